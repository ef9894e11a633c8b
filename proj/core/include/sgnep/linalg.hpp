#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sgnep {

using Vector = std::vector<double>;

/// One block per agent; every block has the same length.
using BlockVector = std::vector<Vector>;

/// Small dense row-major matrix. Only what the solvers need.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix identity(std::size_t n, double scale = 1.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  /// y = M v
  Vector apply(std::span<const double> v) const;
  /// y = M^T v
  Vector apply_transpose(std::span<const double> v) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);

/// Flattens blocks in order; the inverse of `split_blocks`.
Vector flatten(const BlockVector& blocks);
BlockVector split_blocks(std::span<const double> flat, std::size_t num_blocks);

bool all_finite(std::span<const double> v);

}  // namespace sgnep
