#include <gtest/gtest.h>

#include "gist/errors.hpp"
#include "gist/guide.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace gist;
using testing_support::TempDir;

namespace {

std::vector<Triplet> sample_batch() {
  return {{"red apple", "green apple", "blue car", {}},
          {"fast car", "slow car", std::nullopt, {}},
          {"ripe pear", "sweet pear", "old boat", {}}};
}

void expect_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], tol);
}

}  // namespace

TEST(FrozenEncoderGuide, SingleTripletBlocks) {
  const auto guide = make_frozen_encoder_guide(init_encoder(TokenizerConfig{}, 8, 1));
  const std::vector<Triplet> one{{"a b", "c d", "e", {}}};
  const auto s = guide_similarities(one, *guide);
  EXPECT_EQ(s.qp.rows(), 1u);
  ASSERT_TRUE(s.qn);
  EXPECT_EQ(s.qn->cols(), 1u);
  EXPECT_NEAR(s.qq(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(s.pp(0, 0), 1.0, 1e-12);
}

TEST(FrozenEncoderGuide, EqualsForwardThenCosine) {
  const auto params = init_encoder(TokenizerConfig{}, 8, 4);
  const auto guide = make_frozen_encoder_guide(params);
  const auto batch = sample_batch();
  const auto s = guide->similarities(batch);

  std::vector<std::string> q, p, n;
  for (const auto& t : batch) {
    q.push_back(t.query);
    p.push_back(t.positive);
    if (t.negative) n.push_back(*t.negative);
  }
  const Matrix eq = forward(q, params).embeddings, ep = forward(p, params).embeddings,
               en = forward(n, params).embeddings;
  expect_near(s.qp, cosine_matrix(eq, ep), 1e-12);
  expect_near(*s.qn, cosine_matrix(eq, en), 1e-12);
  expect_near(s.qq, cosine_matrix(eq, eq), 1e-12);
  expect_near(s.pp, cosine_matrix(ep, ep), 1e-12);
  EXPECT_EQ(s.qn->cols(), 2u);
  // Symmetric, bounded, deterministic.
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(s.qq(i, j), s.qq(j, i), 1e-9);
      EXPECT_LE(std::abs(s.pp(i, j)), 1.0 + 1e-9);
    }
  }
  EXPECT_EQ(guide->similarities(batch), s);
}

TEST(LabelOracleGuide, DifferentClustersGiveIdentityQQ) {
  const LabelOracleGuide guide({{"q1", "A"}, {"p1", "A"}, {"q2", "B"}, {"p2", "B"}});
  const std::vector<Triplet> batch{{"q1", "p1", std::nullopt, {}}, {"q2", "p2", std::nullopt, {}}};
  const auto s = guide.similarities(batch);
  EXPECT_EQ(s.qq, Matrix(2, 2, std::vector<double>{1, 0, 0, 1}));
  EXPECT_FALSE(s.qn);
  EXPECT_EQ(s.qp(0, 0), LabelOracleGuide::kOracleSelfThreshold);
  EXPECT_EQ(s.qp(0, 1), 0.0);
}

TEST(LabelOracleGuide, FlippedPositiveHasZeroThreshold) {
  const LabelOracleGuide guide({{"q", "A"}, {"p", "B"}, {"n", "A"}});
  const std::vector<Triplet> batch{{"q", "p", "n", {}}};
  const auto s = guide.similarities(batch);
  EXPECT_EQ(s.qp(0, 0), 0.0);
  EXPECT_EQ((*s.qn)(0, 0), 1.0);
}

TEST(LabelOracleGuide, MissingLabelIsDataError) {
  const LabelOracleGuide guide(std::unordered_map<std::string, std::string>{{"q", "A"}});
  const std::vector<Triplet> batch{{"q", "unknown", std::nullopt, {}}};
  EXPECT_THROW(guide.similarities(batch), DataError);
}

TEST(LabelOracleGuide, FromCorpusRejectsConflictingLabels) {
  LabeledCorpus c{{{0, "x", "A", ""}, {1, "x", "B", ""}}};
  EXPECT_THROW(LabelOracleGuide::from_corpus(c), DataError);
}

TEST(EmbeddingStore, RoundTripAndLookup) {
  TempDir dir("store");
  EmbeddingStore store(2);
  store.add("alpha", std::vector<double>{3, 4});
  store.add("beta text", std::vector<double>{0, 2});
  store.save(dir / "store.jsonl");
  const auto loaded = EmbeddingStore::load(dir / "store.jsonl");
  EXPECT_EQ(loaded.size(), 2u);
  EXPECT_TRUE(loaded.contains("alpha"));
  EXPECT_FALSE(loaded.contains("alpha "));  // exact bytes, no normalization
  const auto m = loaded.embed(std::vector<std::string>{"alpha", "beta text"});
  EXPECT_DOUBLE_EQ(m(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(m(1, 1), 1.0);
}

TEST(EmbeddingStore, MissingTextNamedInError) {
  EmbeddingStore store(2);
  store.add("known", std::vector<double>{1, 0});
  try {
    store.embed(std::vector<std::string>{"known", "nowhere to be found"});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere to be found"), std::string::npos);
  }
}

TEST(EmbeddingStore, MalformedFilesRejected) {
  TempDir dir("store_bad");
  testing_support::spit(dir / "nohdr.jsonl", "{\"hash\":\"0000000000000000\",\"embedding\":[1,0]}\n");
  EXPECT_THROW(EmbeddingStore::load(dir / "nohdr.jsonl"), DataError);
  testing_support::spit(dir / "dim.jsonl",
                        "{\"format\":\"gist-embedding-store\",\"version\":1,\"dim\":2,\"hash\":\"fnv1a64\"}\n"
                        "{\"hash\":\"0000000000000000\",\"embedding\":[1,0,3]}\n");
  EXPECT_THROW(EmbeddingStore::load(dir / "dim.jsonl"), DataError);
}

TEST(PrecomputedGuide, MatchesStoreCosines) {
  TempDir dir("pre");
  EmbeddingStore store(2);
  for (const auto& [t, v] : std::vector<std::pair<std::string, Vector>>{
           {"q", {1, 0}}, {"p", {1, 1}}, {"n", {0, 1}}}) {
    store.add(t, v);
  }
  store.save(dir / "s.jsonl");
  const auto guide = make_guide("precomputed:" + (dir / "s.jsonl").string());
  EXPECT_EQ(guide->kind(), "precomputed");
  const std::vector<Triplet> batch{{"q", "p", "n", {}}};
  const auto s = guide->similarities(batch);
  EXPECT_NEAR(s.qp(0, 0), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR((*s.qn)(0, 0), 0.0, 1e-15);
}

TEST(MakeGuide, SpecErrors) {
  EXPECT_THROW(make_guide("nonsense"), ConfigError);
  EXPECT_THROW(make_guide("telepathy:x"), ConfigError);
  EXPECT_THROW(make_guide("frozen:/does/not/exist.ckpt"), DataError);
  EXPECT_THROW(make_embedder("oracle:x"), ConfigError);
}

TEST(MakeGuide, FrozenFromCheckpointFile) {
  TempDir dir("frozen");
  const auto params = init_encoder(TokenizerConfig{}, 4, 2);
  save_checkpoint(dir / "g.ckpt", params);
  const auto guide = make_guide("frozen:" + (dir / "g.ckpt").string());
  const auto direct = make_frozen_encoder_guide(params);
  const auto batch = sample_batch();
  EXPECT_EQ(guide->similarities(batch), direct->similarities(batch));
}
