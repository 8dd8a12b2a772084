#include "gist/simblock.hpp"

namespace gist {

void SimBlock::check_shapes() const {
  const std::size_t n = qp.rows();
  auto square = [n](const Matrix& m) { return m.rows() == n && m.cols() == n; };
  if (!square(qp) || !square(qq) || !square(pp)) {
    throw ContractError("similarity block: qp, qq and pp must all be N x N");
  }
  if (qn && qn->rows() != n) throw ContractError("similarity block: qn must have N rows");
}

std::vector<std::size_t> negative_columns(std::span<const Triplet> batch) {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].negative) cols.push_back(i);
  }
  return cols;
}

SimBlock similarity_block(const Matrix& queries, const Matrix& positives,
                          const Matrix* negatives) {
  if (queries.rows() != positives.rows()) {
    throw ContractError("similarity_block: query and positive counts differ");
  }
  SimBlock b{cosine_matrix(queries, positives), std::nullopt, cosine_matrix(queries, queries),
             cosine_matrix(positives, positives)};
  if (negatives && negatives->rows() > 0) b.qn = cosine_matrix(queries, *negatives);
  return b;
}

}  // namespace gist
