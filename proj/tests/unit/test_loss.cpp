#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "gist/errors.hpp"
#include "gist/loss.hpp"
#include "gist/selection.hpp"
#include "oracles.hpp"

using namespace gist;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  std::vector<double> v;
  std::size_t cols = 0;
  for (const auto& row : r) {
    cols = row.size();
    v.insert(v.end(), row.begin(), row.end());
  }
  return Matrix(r.size(), cols, v);
}

ModelSimBlock unskipped(SimBlock s) {
  const std::size_t n = s.batch_size();
  return {std::move(s), std::vector<bool>(n, false)};
}

}  // namespace

TEST(LossConfig, Validation) {
  LossConfig c;
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.temperature = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_reduction("sum"), Reduction::Sum);
  EXPECT_THROW(parse_reduction("max"), ConfigError);
}

TEST(ContrastiveLoss, LonePositive) {
  const SimBlock s{rows({{0.4}}), std::nullopt, rows({{1}}), rows({{1}})};
  const auto mask = build_masks(s, nullptr, Strategy::FullBatch);
  const auto out = contrastive_loss(unskipped(s), mask, LossConfig{});
  EXPECT_EQ(out.per_sample[0], 0.0);
  EXPECT_EQ(out.value, 0.0);
  EXPECT_EQ(out.grad.qp(0, 0), 0.0);
}

TEST(ContrastiveLoss, EverythingMaskedIsZeroAtAnyTemperature) {
  Rng rng(1);
  const SimBlock s = oracle::random_block(4, 4, rng, false);
  SimBlock guide = oracle::random_block(4, 4, rng, false);
  for (std::size_t i = 0; i < 4; ++i) guide.qp(i, i) = -2.0;  // every entry exceeds it
  const auto mask = build_masks(s, &guide, Strategy::Guided);
  for (double tau : {1.0, 0.05, 1e-4}) {
    LossConfig cfg;
    cfg.temperature = tau;
    EXPECT_EQ(contrastive_loss(unskipped(s), mask, cfg).value, 0.0);
  }
}

// q1 = p1 = (1,0); q2 = p2 = n1 = (0,1); n2 = (1,0).
TEST(ContrastiveLoss, WorkedExample) {
  const Matrix q = rows({{1, 0}, {0, 1}});
  const Matrix p = rows({{1, 0}, {0, 1}});
  const Matrix n = rows({{0, 1}, {1, 0}});
  const SimBlock s = similarity_block(q, p, &n);
  LossConfig cfg;
  cfg.temperature = 1.0;
  cfg.include_pp_rows = false;
  const auto out = contrastive_loss(unskipped(s), build_masks(s, nullptr, Strategy::FullBatch), cfg);
  const double e = std::exp(1.0);
  EXPECT_NEAR(out.per_sample[0], -std::log(e / (3 + 2 * e)), 1e-14);
  EXPECT_NEAR(out.per_sample[0], 1.1326, 1e-4);
  EXPECT_EQ(out.active_negative_counts[0], 4u);
}

TEST(ContrastiveLoss, MatchesOracleAndInvariants) {
  Rng rng(77);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng.index(6);
    const std::size_t m = rng.index(n + 1);
    const SimBlock s = oracle::random_block(n, m, rng, false);
    const SimBlock g = oracle::random_block(n, m, rng, true);
    LossConfig cfg;
    cfg.temperature = std::pow(10.0, -rng.uniform(0, 2));
    cfg.include_pp_rows = rng.bernoulli(0.5);
    cfg.reduction = rng.bernoulli(0.5) ? Reduction::Mean : Reduction::Sum;
    ModelSimBlock model = unskipped(s);
    for (std::size_t i = 0; i < n; ++i) model.skip_rows[i] = rng.bernoulli(0.15);
    for (Strategy st : {Strategy::Bidirectional, Strategy::FullBatch, Strategy::Guided, Strategy::Assigned}) {
      if (st == Strategy::Assigned && m == 0) continue;
      const auto mask = build_masks(s, &g, st);
      const auto out = contrastive_loss(model, mask, cfg);
      const auto ref = oracle::loss(s, mask, cfg.temperature, cfg.include_pp_rows, cfg.reduction, model.skip_rows);
      EXPECT_NEAR(out.value, ref.value, 1e-9 * std::max(1.0, ref.value));
      double sum = 0;
      std::size_t used = 0;
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(out.per_sample[i], ref.per_sample[i], 1e-9 * std::max(1.0, ref.per_sample[i]));
        EXPECT_GE(out.per_sample[i], 0.0);
        sum += out.per_sample[i];
        used += model.skip_rows[i] ? 0 : 1;
        EXPECT_EQ(out.skipped[i], model.skip_rows[i]);
      }
      const double reduced = cfg.reduction == Reduction::Sum ? sum : (used ? sum / used : 0.0);
      EXPECT_NEAR(out.value, reduced, 1e-12 * std::max(1.0, reduced));
      EXPECT_EQ(out.rows_used, used);

      // Gradient signs, exact zeros on masked cells, softmax normalization.
      for (std::size_t i = 0; i < n; ++i) {
        if (model.skip_rows[i]) continue;
        const auto rs = row_softmax(s, mask, i, cfg);
        double psum = 0;
        for (double p : rs.probabilities) psum += p;
        EXPECT_NEAR(psum, 1.0, 1e-12);
        EXPECT_LE(out.grad.qp(i, i), 0.0);
      }
      for (Block b : kBlocks) {
        const BoolMatrix* bm = mask.block(b);
        if (!bm) continue;
        const Matrix& gr = *oracle::block_of(out.grad, b);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < bm->cols(); ++j) {
            const bool positive_cell = b == Block::QP && i == j;
            const bool dropped = (*bm)(i, j) || model.skip_rows[i] || (b == Block::PP && !cfg.include_pp_rows);
            if (positive_cell) continue;
            if (dropped) {
              EXPECT_EQ(std::bit_cast<std::uint64_t>(gr(i, j)), 0u);
            } else {
              EXPECT_GE(gr(i, j), 0.0);
            }
          }
        }
      }
    }
  }
}

TEST(ContrastiveLoss, TemperatureLimit) {
  // Positive is the strict max: loss falls toward 0 as tau shrinks.
  const SimBlock win{rows({{0.9, 0.2}, {0.1, 0.8}}), std::nullopt, rows({{1, 0.3}, {0.3, 1}}),
                     rows({{1, 0.1}, {0.1, 1}})};
  // Row 0's negative beats its positive: loss grows without bound.
  const SimBlock lose{rows({{0.2, 0.9}, {0.1, 0.8}}), std::nullopt, rows({{1, 0.3}, {0.3, 1}}),
                      rows({{1, 0.1}, {0.1, 1}})};
  const auto mask = build_masks(win, nullptr, Strategy::FullBatch);
  double prev_win = INFINITY, prev_lose = 0;
  for (double tau : {0.1, 0.01, 0.001}) {
    LossConfig cfg;
    cfg.temperature = tau;
    const double w = contrastive_loss(unskipped(win), mask, cfg).per_sample[0];
    const double l = contrastive_loss(unskipped(lose), mask, cfg).per_sample[0];
    EXPECT_LT(w, prev_win);
    EXPECT_GT(l, prev_lose);
    prev_win = w;
    prev_lose = l;
  }
  EXPECT_LT(prev_win, 1e-100);
  EXPECT_GT(prev_lose, 600.0);
}

TEST(ContrastiveLoss, GradientMatchesDifferencesInSimilarities) {
  Rng rng(5);
  const SimBlock s = oracle::random_block(4, 3, rng, false);
  LossConfig cfg;
  cfg.temperature = 0.2;
  const auto mask = build_masks(s, nullptr, Strategy::FullBatch);
  const auto out = contrastive_loss(unskipped(s), mask, cfg);
  // Five-point stencil: truncation O(h^4), so h can stay large enough to keep
  // rounding noise well under the tolerance.
  const double h = 1e-3;
  for (Block b : kBlocks) {
    const Matrix& gr = *oracle::block_of(out.grad, b);
    for (std::size_t i = 0; i < gr.rows(); ++i) {
      for (std::size_t j = 0; j < gr.cols(); ++j) {
        auto at = [&](double delta) {
          SimBlock moved = s;
          (*const_cast<Matrix*>(oracle::block_of(moved, b)))(i, j) += delta;
          return contrastive_loss(unskipped(moved), mask, cfg).value;
        };
        const double fd = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
        EXPECT_LT(oracle::relative_error(gr(i, j), fd), 1e-6) << to_string(b) << " " << i << "," << j;
      }
    }
  }
}

TEST(ContrastiveLoss, ShapeErrors) {
  Rng rng(2);
  const SimBlock s = oracle::random_block(3, 2, rng, false);
  const auto mask = build_masks(oracle::random_block(2, 2, rng, false), nullptr, Strategy::FullBatch);
  EXPECT_THROW(contrastive_loss(unskipped(s), mask, LossConfig{}), ContractError);
}

TEST(BackpropToEmbeddings, ZeroAndSingleCell) {
  const Matrix q = rows({{0.6, 0.8}}), p = rows({{1, 0}}), n(0, 2);
  SimBlock g{Matrix(1, 1), std::nullopt, Matrix(1, 1), Matrix(1, 1)};
  auto z = backprop_to_embeddings(g, q, p, n);
  EXPECT_EQ(z.queries, Matrix(1, 2));
  EXPECT_EQ(z.positives, Matrix(1, 2));
  g.qp(0, 0) = 2.0;
  const auto e = backprop_to_embeddings(g, q, p, n);
  EXPECT_EQ(e.queries, rows({{2.0, 0.0}}));
  EXPECT_EQ(e.positives, rows({{1.2, 1.6}}));
}

TEST(BackpropToEmbeddings, MatchesDifferencesOfBilinearForm) {
  Rng rng(8);
  const std::size_t n = 3, m = 2, d = 4;
  Matrix q = oracle::random_unit_rows(n, d, rng), p = oracle::random_unit_rows(n, d, rng),
         neg = oracle::random_unit_rows(m, d, rng);
  const SimBlock up = oracle::random_block(n, m, rng, false);  // arbitrary upstream weights
  auto scalar = [&](const Matrix& a, const Matrix& b, const Matrix& c) {
    const SimBlock s = similarity_block(a, b, &c);
    double v = 0;
    for (Block blk : kBlocks) {
      const Matrix& w = *oracle::block_of(up, blk);
      const Matrix& x = *oracle::block_of(s, blk);
      for (std::size_t k = 0; k < w.size(); ++k) v += w.values()[k] * x.values()[k];
    }
    return v;
  };
  const auto g = backprop_to_embeddings(up, q, p, neg);
  const double h = 1e-6;
  for (auto [mat, grad] : {std::pair{&q, &g.queries}, std::pair{&p, &g.positives}, std::pair{&neg, &g.negatives}}) {
    for (std::size_t k = 0; k < mat->size(); ++k) {
      const double base = mat->values()[k];
      mat->values()[k] = base + h;
      const double a = scalar(q, p, neg);
      mat->values()[k] = base - h;
      const double b = scalar(q, p, neg);
      mat->values()[k] = base;
      EXPECT_LT(oracle::relative_error(grad->values()[k], (a - b) / (2 * h)), 1e-7);
    }
  }
}
