#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gist/triplet.hpp"
#include "gist/vecmath.hpp"

namespace gist {

// The four pairwise similarity matrices of a batch of N triplets:
//   qp(i, j) = sim(q_i, p_j)   N x N
//   qn(i, j) = sim(q_i, n_j)   N x M, column j = j-th triplet carrying a negative
//   qq(i, j) = sim(q_i, q_j)   N x N
//   pp(i, j) = sim(p_i, p_j)   N x N
// qn is absent when no triplet in the batch has a negative.
struct SimBlock {
  Matrix qp;
  std::optional<Matrix> qn;
  Matrix qq;
  Matrix pp;

  std::size_t batch_size() const { return qp.rows(); }
  std::size_t negative_count() const { return qn ? qn->cols() : 0; }

  /// Throws ContractError unless all blocks agree on N (and M).
  void check_shapes() const;
  bool operator==(const SimBlock&) const = default;
};

/// Similarities produced by the model being trained. Rows flagged in
/// skip_rows (degenerate query or positive embedding) are left out of the loss.
struct ModelSimBlock {
  SimBlock sims;
  std::vector<bool> skip_rows;  // empty = none skipped
};

using GuideSimBlock = SimBlock;

/// Indices of the triplets that carry a negative, in batch order; this is the
/// column order of every qn block.
std::vector<std::size_t> negative_columns(std::span<const Triplet> batch);

/// Builds the block from unit-row embeddings. negatives may be null or empty.
SimBlock similarity_block(const Matrix& queries, const Matrix& positives,
                          const Matrix* negatives);

}  // namespace gist
