#include <gtest/gtest.h>

#include <cmath>

#include "gist/encoder.hpp"
#include "gist/errors.hpp"
#include "gist/rng.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace gist;
using testing_support::TempDir;

namespace {

TokenizerConfig small_vocab() {
  TokenizerConfig t;
  t.vocab_slots = 64;
  return t;
}

// Params whose table is zero except for the given rows.
EncoderParams with_rows(const TokenizerConfig& tok, std::initializer_list<std::pair<std::string, Vector>> rows) {
  EncoderParams p{tok, Matrix(tok.vocab_slots, 2)};
  for (const auto& [token, v] : rows) {
    const auto id = tokenize(token, tok).at(0);
    std::ranges::copy(v, p.table.row(id).begin());
  }
  return p;
}

}  // namespace

TEST(Tokenize, EmptyText) { EXPECT_TRUE(tokenize("", small_vocab()).empty()); }

TEST(Tokenize, RepeatedTokenSameId) {
  const auto ids = tokenize("a a a", small_vocab());
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[0], ids[1]);
  EXPECT_EQ(ids[1], ids[2]);
}

TEST(Tokenize, CaseFolding) {
  const auto tok = small_vocab();
  EXPECT_EQ(tokenize("Hello world", tok), tokenize("hello WORLD", tok));
  auto cased = tok;
  cased.lowercase = false;
  cased.vocab_slots = 1u << 30;
  EXPECT_NE(tokenize("Hello", cased), tokenize("hello", cased));
}

TEST(Tokenize, WhitespaceRunsAndLimits) {
  auto tok = small_vocab();
  EXPECT_EQ(tokenize("  x\t\ny  ", tok).size(), 2u);
  tok.max_tokens = 2;
  EXPECT_EQ(tokenize("a b c d", tok).size(), 2u);
  for (auto id : tokenize("the quick brown fox jumps", small_vocab())) EXPECT_LT(id, 64u);
}

TEST(Tokenize, HashSeedChangesBuckets) {
  auto a = small_vocab();
  a.vocab_slots = 1u << 30;
  auto b = a;
  b.hash_seed = 99;
  EXPECT_NE(tokenize("token", a), tokenize("token", b));
}

TEST(TokenizerConfig, Validation) {
  TokenizerConfig t;
  t.vocab_slots = 1;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TokenizerConfig{};
  t.max_tokens = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  EXPECT_THROW(init_encoder(TokenizerConfig{}, 1, 0), ConfigError);
}

TEST(InitEncoder, SeededAndBounded) {
  const auto a = init_encoder(small_vocab(), 16, 7);
  EXPECT_EQ(a, init_encoder(small_vocab(), 16, 7));
  EXPECT_NE(a, init_encoder(small_vocab(), 16, 8));
  const double bound = 0.5 / std::sqrt(16.0);
  for (double v : a.table.values()) EXPECT_LE(std::abs(v), bound);
}

TEST(Forward, SingleTokenPoolsToItsRow) {
  const auto tok = small_vocab();
  const auto p = with_rows(tok, {{"w", {3, 4}}});
  const auto out = forward(std::vector<std::string>{"w"}, p);
  EXPECT_DOUBLE_EQ(out.embeddings(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(out.embeddings(0, 1), 0.8);
}

TEST(Forward, MeanOfTwoRows) {
  const auto tok = small_vocab();
  auto ta = tokenize("alpha", tok)[0], tb = tokenize("beta", tok)[0];
  ASSERT_NE(ta, tb);
  const auto p = with_rows(tok, {{"alpha", {1, 0}}, {"beta", {0, 1}}});
  const auto out = forward(std::vector<std::string>{"alpha beta"}, p);
  EXPECT_NEAR(out.embeddings(0, 0), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(out.embeddings(0, 1), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(out.pre_norm(0, 0), 0.5);
}

TEST(Forward, IdenticalTextsIdenticalRows) {
  const auto p = init_encoder(small_vocab(), 8, 1);
  const auto out = forward(std::vector<std::string>{"same text", "same text"}, p);
  EXPECT_TRUE(std::ranges::equal(out.embeddings.row(0), out.embeddings.row(1)));
}

TEST(Forward, EmptyTextIsDegenerate) {
  const auto p = init_encoder(small_vocab(), 8, 1);
  const auto out = forward(std::vector<std::string>{"", "x"}, p);
  EXPECT_TRUE(out.degenerate[0]);
  EXPECT_FALSE(out.degenerate[1]);
  for (double v : out.embeddings.row(0)) EXPECT_EQ(v, 0.0);
}

TEST(Forward, UnitRowsPermutationEquivariantOrderFree) {
  const auto p = init_encoder(TokenizerConfig{}, 8, 2);
  const std::vector<std::string> texts{"a b c", "d e", "f g h i", "c b a"};
  const auto out = forward(texts, p);
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_NEAR(l2_norm(out.embeddings.row(i)), 1.0, 1e-12);
  for (std::size_t d = 0; d < 8; ++d) EXPECT_NEAR(out.embeddings(0, d), out.embeddings(3, d), 1e-15);
  const std::vector<std::string> permuted{texts[2], texts[0], texts[3], texts[1]};
  const auto perm = forward(permuted, p);
  EXPECT_TRUE(std::ranges::equal(perm.embeddings.row(0), out.embeddings.row(2)));
  EXPECT_TRUE(std::ranges::equal(perm.embeddings.row(3), out.embeddings.row(1)));
}

TEST(Forward, ThreadedMatchesSequential) {
  const auto p = init_encoder(TokenizerConfig{}, 16, 3);
  std::vector<std::string> texts;
  for (int i = 0; i < 37; ++i) texts.push_back("t" + std::to_string(i) + " shared w" + std::to_string(i % 5));
  EXPECT_EQ(forward(texts, p, 4).embeddings, forward(texts, p, 1).embeddings);
}

TEST(Backward, ZeroGradientLeavesAccumulator) {
  const auto p = init_encoder(small_vocab(), 4, 1);
  const auto batch = forward(std::vector<std::string>{"a b", "c"}, p);
  GradAccumulator acc(p);
  backward(batch, Matrix(2, 4), p, acc);
  for (double v : acc.grad_table.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, RadialGradientProjectsOut) {
  const auto p = init_encoder(small_vocab(), 4, 1);
  const auto batch = forward(std::vector<std::string>{"a b c"}, p);
  Matrix g(1, 4);
  for (std::size_t d = 0; d < 4; ++d) g(0, d) = 2.5 * batch.embeddings(0, d);
  GradAccumulator acc(p);
  backward(batch, g, p, acc);
  for (double v : acc.grad_table.values()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Backward, ShapeMismatchIsContractError) {
  const auto p = init_encoder(small_vocab(), 4, 1);
  const auto batch = forward(std::vector<std::string>{"a"}, p);
  GradAccumulator acc(p);
  EXPECT_THROW(backward(batch, Matrix(2, 4), p, acc), ContractError);
}

// Scalar probe L = sum_i w_i . e_i checked against central differences.
TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(21);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    auto p = init_encoder(small_vocab(), 4, 100 + trial);
    const std::vector<std::string> texts{"a b b", "c d", "a e f g"};
    Matrix w(3, 4);
    for (double& v : w.values()) v = rng.uniform(-1, 1);
    auto probe = [&](const EncoderParams& q) {
      const auto out = forward(texts, q);
      double s = 0;
      for (std::size_t i = 0; i < 3; ++i) s += dot(w.row(i), out.embeddings.row(i));
      return s;
    };
    GradAccumulator acc(p);
    backward(forward(texts, p), w, p, acc);
    for (const auto& t : texts) {
      for (auto id : tokenize(t, p.tokenizer)) {
        for (std::size_t d = 0; d < 4; ++d) {
          const double base = p.table(id, d);
          p.table(id, d) = base + h;
          const double up = probe(p);
          p.table(id, d) = base - h;
          const double down = probe(p);
          p.table(id, d) = base;
          EXPECT_LT(oracle::relative_error(acc.grad_table(id, d), (up - down) / (2 * h)), 1e-6);
        }
      }
    }
  }
}

TEST(Checkpoint, RoundTripWithAndWithoutState) {
  TempDir dir("ckpt");
  const auto p = init_encoder(small_vocab(), 4, 9);
  save_checkpoint(dir / "a.ckpt", p);
  const auto a = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(a.params, p);
  EXPECT_FALSE(a.state);

  TrainerState s{17, Matrix(64, 4, 0.25), Matrix(64, 4, 0.5)};
  save_checkpoint(dir / "b.ckpt", p, &s);
  const auto b = load_checkpoint(dir / "b.ckpt");
  ASSERT_TRUE(b.state);
  EXPECT_EQ(*b.state, s);
  EXPECT_NE(checkpoint_id(dir / "a.ckpt"), checkpoint_id(dir / "b.ckpt"));
  EXPECT_EQ(checkpoint_id(dir / "a.ckpt"), checkpoint_id(dir / "a.ckpt"));
}

TEST(Checkpoint, CorruptFilesAreDataErrors) {
  TempDir dir("ckpt_bad");
  testing_support::spit(dir / "junk.ckpt", "not a checkpoint at all");
  EXPECT_THROW(load_checkpoint(dir / "junk.ckpt"), DataError);
  const auto p = init_encoder(small_vocab(), 4, 9);
  save_checkpoint(dir / "ok.ckpt", p);
  auto bytes = testing_support::slurp(dir / "ok.ckpt");
  testing_support::spit(dir / "short.ckpt", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), DataError);
  testing_support::spit(dir / "long.ckpt", bytes + "x");
  EXPECT_THROW(load_checkpoint(dir / "long.ckpt"), DataError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), DataError);
}
