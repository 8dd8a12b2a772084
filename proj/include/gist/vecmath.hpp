#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gist/errors.hpp"

namespace gist {

// Row-major dense 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw ContractError("grid value count does not match rows x cols");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

using Matrix = Grid<double>;
using BoolMatrix = Grid<std::uint8_t>;  // 0/1; vector<bool> has no spans
using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

struct Normalized {
  Vector values;
  bool degenerate = false;  // input had zero norm; values are all zero
};

Normalized l2_normalize(std::span<const double> v);

/// Normalizes each row in place. Returns per-row degenerate flags.
std::vector<bool> l2_normalize_rows(Matrix& m);

/// out(i, j) = dot(a.row(i), b.row(j)). Rows are expected to be unit norm;
/// the caller owns that precondition.
Matrix cosine_matrix(const Matrix& a, const Matrix& b);

/// Max-shifted log(sum(exp(x))) over the entries with mask == 0.
/// Returns -inf when every entry is masked.
double log_sum_exp(std::span<const double> logits, std::span<const std::uint8_t> mask = {});

/// -log softmax(logits)[target] restricted to the unmasked entries
/// (mask value nonzero = excluded). Throws ContractError if the target is
/// masked or out of range.
double masked_log_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask,
                          std::size_t target);

/// Softmax over unmasked entries; masked entries get exactly 0.
Vector masked_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask = {});

}  // namespace gist
