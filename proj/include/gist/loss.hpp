#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "gist/selection.hpp"
#include "gist/simblock.hpp"

namespace gist {

enum class Reduction { Mean, Sum };
std::string_view to_string(Reduction r);
Reduction parse_reduction(std::string_view name);

struct LossConfig {
  double temperature = 0.01;
  // Row i of the pp block, sim(p_i, p_j), is anchored on the positive rather
  // than the query. When set, its unmasked off-diagonal cells still join row
  // i's candidates; otherwise masking pp would have no effect on the loss.
  bool include_pp_rows = true;
  Reduction reduction = Reduction::Mean;

  void validate() const;
};

struct Candidate {
  Block block;
  std::uint32_t col;
};

/// Row i's softmax candidates: the positive cell (QP, i) first, then the
/// unmasked cells of qp, qn, qq and (optionally) pp in block/column order.
std::vector<Candidate> row_candidates(const MaskSet& mask, std::size_t row, bool include_pp_rows);

struct RowSoftmax {
  std::vector<Candidate> candidates;
  std::vector<double> probabilities;  // aligned with candidates
  double loss = 0.0;                  // -log probabilities[0]
};

RowSoftmax row_softmax(const SimBlock& sims, const MaskSet& mask, std::size_t row,
                       const LossConfig& cfg);

struct LossOutput {
  double value = 0.0;
  std::vector<double> per_sample;  // 0 for skipped rows
  std::vector<std::size_t> active_negative_counts;
  std::vector<bool> skipped;
  std::size_t rows_used = 0;
  // d value / d similarity, laid out like the input block. Cells outside a
  // row's candidate list are exactly zero.
  SimBlock grad;
};

/// InfoNCE over each row's masked candidate set, temperature-scaled, with the
/// query-positive cell as the target. Mean reduction averages over the rows
/// that were not skipped.
LossOutput contrastive_loss(const ModelSimBlock& model_block, const MaskSet& mask,
                            const LossConfig& cfg);

struct EmbeddingGrads {
  Matrix queries;
  Matrix positives;
  Matrix negatives;
};

/// Chain rule through sim(a, b) = a . b: cell gradient g adds g * b to a and
/// g * a to b. The normalization Jacobian is applied later by the encoder.
EmbeddingGrads backprop_to_embeddings(const SimBlock& grad, const Matrix& queries,
                                      const Matrix& positives, const Matrix& negatives);

}  // namespace gist
