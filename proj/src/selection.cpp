#include "gist/selection.hpp"

#include <algorithm>

namespace gist {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Assigned: return "assigned";
    case Strategy::Bidirectional: return "bidirectional";
    case Strategy::FullBatch: return "fullbatch";
    case Strategy::Guided: return "guided";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::Assigned, Strategy::Bidirectional, Strategy::FullBatch,
                     Strategy::Guided}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown strategy \"" + std::string(name) +
                    "\" (expected assigned|bidirectional|fullbatch|guided)");
}

std::string_view to_string(Block b) {
  switch (b) {
    case Block::QP: return "qp";
    case Block::QN: return "qn";
    case Block::QQ: return "qq";
    case Block::PP: return "pp";
  }
  return "?";
}

const BoolMatrix* MaskSet::block(Block b) const {
  switch (b) {
    case Block::QP: return &qp;
    case Block::QN: return qn ? &*qn : nullptr;
    case Block::QQ: return &qq;
    case Block::PP: return &pp;
  }
  return nullptr;
}

namespace {

void mask_diagonal(BoolMatrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) = 1;
}

// Excludes cell (i, j) whenever the guide scores it strictly above row i's
// query-positive similarity. Ties keep the candidate.
void apply_guide(BoolMatrix& mask, const Matrix& sigma, const std::vector<double>& thresholds) {
  for (std::size_t i = 0; i < mask.rows(); ++i) {
    for (std::size_t j = 0; j < mask.cols(); ++j) {
      if (sigma(i, j) > thresholds[i]) mask(i, j) = 1;
    }
  }
}

}  // namespace

MaskSet build_masks(const SimBlock& model_block, const GuideSimBlock* guide_block,
                    Strategy strategy) {
  model_block.check_shapes();
  const std::size_t n = model_block.batch_size();
  const std::size_t m = model_block.negative_count();

  if (strategy == Strategy::Assigned && !model_block.qn) {
    throw ConfigError("strategy assigned needs assigned negatives; the batch has none");
  }
  if (strategy == Strategy::Guided) {
    if (!guide_block) throw ConfigError("strategy guided needs a guide");
    guide_block->check_shapes();
    if (guide_block->batch_size() != n || guide_block->negative_count() != m) {
      throw ContractError("guide block shape does not match model block");
    }
  }

  const bool full = strategy == Strategy::FullBatch || strategy == Strategy::Guided;
  MaskSet mask{BoolMatrix(n, n, full ? 0 : 1), std::nullopt,
               BoolMatrix(n, n, strategy == Strategy::Assigned ? 1 : 0),
               BoolMatrix(n, n, full ? 0 : 1), {}};
  if (model_block.qn) mask.qn = BoolMatrix(n, m, 0);
  mask_diagonal(mask.qp);
  mask_diagonal(mask.qq);
  mask_diagonal(mask.pp);

  if (strategy == Strategy::Guided) {
    const auto& g = *guide_block;
    mask.thresholds.resize(n);
    for (std::size_t i = 0; i < n; ++i) mask.thresholds[i] = g.qp(i, i);
    apply_guide(mask.qp, g.qp, mask.thresholds);
    if (mask.qn) apply_guide(*mask.qn, *g.qn, mask.thresholds);
    apply_guide(mask.qq, g.qq, mask.thresholds);
    apply_guide(mask.pp, g.pp, mask.thresholds);
  }
  return mask;
}

std::vector<std::size_t> count_active_negatives(const MaskSet& mask) {
  std::vector<std::size_t> counts(mask.batch_size(), 0);
  for (Block b : kBlocks) {
    const BoolMatrix* m = mask.block(b);
    if (!m) continue;
    for (std::size_t i = 0; i < m->rows(); ++i) {
      auto row = m->row(i);
      counts[i] += static_cast<std::size_t>(std::ranges::count(row, 0));
    }
  }
  return counts;
}

double masked_fraction(const MaskSet& mask, Block b) {
  const BoolMatrix* m = mask.block(b);
  if (!m || m->empty()) return 0.0;
  const auto masked = std::ranges::count_if(m->values(), [](std::uint8_t v) { return v != 0; });
  return static_cast<double>(masked) / static_cast<double>(m->size());
}

}  // namespace gist
