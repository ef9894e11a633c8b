#include "sgnep/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sgnep {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n, double scale) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
  return m;
}

Vector Matrix::apply(std::span<const double> v) const {
  if (v.size() != cols_) throw std::invalid_argument("Matrix::apply: dimension mismatch");
  Vector out(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* row = &data_[r * cols_];
    double acc = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

Vector Matrix::apply_transpose(std::span<const double> v) const {
  if (v.size() != rows_) throw std::invalid_argument("Matrix::apply_transpose: dimension mismatch");
  Vector out(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* row = &data_[r * cols_];
    for (std::size_t c = 0; c < cols_; ++c) out[c] += row[c] * v[r];
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Vector flatten(const BlockVector& blocks) {
  Vector flat;
  for (const auto& b : blocks) flat.insert(flat.end(), b.begin(), b.end());
  return flat;
}

BlockVector split_blocks(std::span<const double> flat, std::size_t num_blocks) {
  if (num_blocks == 0 || flat.size() % num_blocks != 0) {
    throw std::invalid_argument("split_blocks: length not divisible by block count");
  }
  const std::size_t len = flat.size() / num_blocks;
  BlockVector out(num_blocks);
  for (std::size_t i = 0; i < num_blocks; ++i) {
    out[i].assign(flat.begin() + static_cast<std::ptrdiff_t>(i * len),
                  flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * len));
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace sgnep
