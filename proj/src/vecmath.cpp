#include "gist/vecmath.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace gist {

namespace {

bool is_masked(std::span<const std::uint8_t> mask, std::size_t i) {
  return !mask.empty() && mask[i] != 0;
}

void check_mask(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  if (!mask.empty() && mask.size() != logits.size()) {
    throw ContractError("mask length does not match logits length");
  }
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Normalized l2_normalize(std::span<const double> v) {
  Normalized out{Vector(v.begin(), v.end()), false};
  const double n = l2_norm(v);
  if (n == 0.0) {
    out.degenerate = true;
    return out;
  }
  for (double& x : out.values) x /= n;
  return out;
}

std::vector<bool> l2_normalize_rows(Matrix& m) {
  std::vector<bool> degenerate(m.rows(), false);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double n = l2_norm(row);
    if (n == 0.0) {
      degenerate[r] = true;
      continue;
    }
    for (double& x : row) x /= n;
  }
  return degenerate;
}

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ConfigError("cosine_matrix: dimension mismatch (" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.cols()) + ")");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

namespace {

// Largest unmasked logit and sum of exp(x - max) over the other unmasked
// entries. Splitting off the max lets log1p keep tiny tails exact.
struct ShiftedSum {
  std::size_t argmax = SIZE_MAX;
  double max = -std::numeric_limits<double>::infinity();
  double rest = 0.0;
};

ShiftedSum shifted_sum(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  check_mask(logits, mask);
  ShiftedSum s;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!is_masked(mask, i) && (s.argmax == SIZE_MAX || logits[i] > s.max)) {
      s.argmax = i;
      s.max = logits[i];
    }
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i != s.argmax && !is_masked(mask, i)) s.rest += std::exp(logits[i] - s.max);
  }
  return s;
}

}  // namespace

double log_sum_exp(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  const ShiftedSum s = shifted_sum(logits, mask);
  if (s.argmax == SIZE_MAX) return s.max;
  return s.max + std::log1p(s.rest);
}

double masked_log_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask,
                          std::size_t target) {
  check_mask(logits, mask);
  if (target >= logits.size()) throw ContractError("masked_log_softmax: target out of range");
  if (is_masked(mask, target)) throw ContractError("masked_log_softmax: target is masked");
  const ShiftedSum s = shifted_sum(logits, mask);
  return (s.max - logits[target]) + std::log1p(s.rest);
}

Vector masked_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  // Shift by the max and divide by the sum: each weight is then accurate to a
  // few ulp, unlike exp(x - lse) whose error grows with |lse|.
  Vector p(logits.size(), 0.0);
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!is_masked(mask, i)) hi = std::max(hi, logits[i]);
  }
  if (std::isinf(hi)) return p;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!is_masked(mask, i)) sum += p[i] = std::exp(logits[i] - hi);
  }
  for (double& x : p) x /= sum;
  return p;
}

}  // namespace gist
