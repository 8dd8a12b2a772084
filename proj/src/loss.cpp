#include "gist/loss.hpp"

#include <cmath>

namespace gist {

std::string_view to_string(Reduction r) { return r == Reduction::Mean ? "mean" : "sum"; }

Reduction parse_reduction(std::string_view name) {
  if (name == "mean") return Reduction::Mean;
  if (name == "sum") return Reduction::Sum;
  throw ConfigError("unknown reduction \"" + std::string(name) + "\" (expected mean|sum)");
}

void LossConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be positive");
  }
}

namespace {

const Matrix& cells(const SimBlock& s, Block b) {
  switch (b) {
    case Block::QP: return s.qp;
    case Block::QN: return *s.qn;
    case Block::QQ: return s.qq;
    case Block::PP: return s.pp;
  }
  return s.qp;
}

Matrix& cells(SimBlock& s, Block b) {
  return const_cast<Matrix&>(cells(static_cast<const SimBlock&>(s), b));
}

void check_alignment(const SimBlock& s, const MaskSet& m) {
  s.check_shapes();
  const std::size_t n = s.batch_size();
  if (m.qp.rows() != n || m.qq.rows() != n || m.pp.rows() != n || m.qp.cols() != n) {
    throw ContractError("mask set does not match similarity block");
  }
  if (s.qn.has_value() != m.qn.has_value() ||
      (s.qn && (m.qn->rows() != n || m.qn->cols() != s.qn->cols()))) {
    throw ContractError("mask set qn block does not match similarity block");
  }
}

}  // namespace

std::vector<Candidate> row_candidates(const MaskSet& mask, std::size_t row, bool include_pp_rows) {
  std::vector<Candidate> out{{Block::QP, static_cast<std::uint32_t>(row)}};
  for (Block b : kBlocks) {
    if (b == Block::PP && !include_pp_rows) continue;
    const BoolMatrix* m = mask.block(b);
    if (!m) continue;
    for (std::size_t j = 0; j < m->cols(); ++j) {
      if (b == Block::QP && j == row) continue;
      if ((*m)(row, j) == 0) out.push_back({b, static_cast<std::uint32_t>(j)});
    }
  }
  return out;
}

RowSoftmax row_softmax(const SimBlock& sims, const MaskSet& mask, std::size_t row,
                       const LossConfig& cfg) {
  RowSoftmax r;
  r.candidates = row_candidates(mask, row, cfg.include_pp_rows);
  std::vector<double> logits;
  logits.reserve(r.candidates.size());
  for (const auto& c : r.candidates) logits.push_back(cells(sims, c.block)(row, c.col) / cfg.temperature);
  r.probabilities = masked_softmax(logits);
  r.loss = masked_log_softmax(logits, {}, 0);
  return r;
}

LossOutput contrastive_loss(const ModelSimBlock& model_block, const MaskSet& mask,
                            const LossConfig& cfg) {
  cfg.validate();
  const SimBlock& sims = model_block.sims;
  check_alignment(sims, mask);
  const std::size_t n = sims.batch_size();
  if (!model_block.skip_rows.empty() && model_block.skip_rows.size() != n) {
    throw ContractError("skip_rows length does not match batch size");
  }

  LossOutput out;
  out.per_sample.assign(n, 0.0);
  out.active_negative_counts.assign(n, 0);
  out.skipped.assign(n, false);
  out.grad = SimBlock{Matrix(n, n), std::nullopt, Matrix(n, n), Matrix(n, n)};
  if (sims.qn) out.grad.qn = Matrix(n, sims.qn->cols());

  std::vector<RowSoftmax> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!model_block.skip_rows.empty() && model_block.skip_rows[i]) {
      out.skipped[i] = true;
      continue;
    }
    rows[i] = row_softmax(sims, mask, i, cfg);
    out.per_sample[i] = rows[i].loss;
    out.active_negative_counts[i] = rows[i].candidates.size() - 1;
    ++out.rows_used;
  }
  if (out.rows_used == 0) return out;

  const double scale = cfg.reduction == Reduction::Mean ? 1.0 / static_cast<double>(out.rows_used) : 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.skipped[i]) continue;
    total += out.per_sample[i];
    const auto& r = rows[i];
    for (std::size_t c = 0; c < r.candidates.size(); ++c) {
      const double target = c == 0 ? 1.0 : 0.0;
      cells(out.grad, r.candidates[c].block)(i, r.candidates[c].col) +=
          (r.probabilities[c] - target) * scale / cfg.temperature;
    }
  }
  out.value = total * scale;
  return out;
}

EmbeddingGrads backprop_to_embeddings(const SimBlock& grad, const Matrix& queries,
                                      const Matrix& positives, const Matrix& negatives) {
  grad.check_shapes();
  const std::size_t n = grad.batch_size();
  const std::size_t dim = queries.cols();
  if (queries.rows() != n || positives.rows() != n || positives.cols() != dim ||
      negatives.rows() != grad.negative_count() || (negatives.rows() > 0 && negatives.cols() != dim)) {
    throw ContractError("backprop_to_embeddings: embedding shapes do not match gradient block");
  }
  EmbeddingGrads out{Matrix(n, dim), Matrix(n, dim), Matrix(negatives.rows(), dim)};

  // d sim(a_i, b_j) adds g * b_j to a_i and g * a_i to b_j.
  auto bilinear = [dim](const Matrix& g, const Matrix& a, const Matrix& b, Matrix& ga, Matrix& gb) {
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        const double v = g(i, j);
        if (v == 0.0) continue;
        auto ai = a.row(i), bj = b.row(j);
        auto gai = ga.row(i), gbj = gb.row(j);
        for (std::size_t k = 0; k < dim; ++k) {
          gai[k] += v * bj[k];
          gbj[k] += v * ai[k];
        }
      }
    }
  };
  bilinear(grad.qp, queries, positives, out.queries, out.positives);
  if (grad.qn) bilinear(*grad.qn, queries, negatives, out.queries, out.negatives);
  bilinear(grad.qq, queries, queries, out.queries, out.queries);
  bilinear(grad.pp, positives, positives, out.positives, out.positives);
  return out;
}

}  // namespace gist
