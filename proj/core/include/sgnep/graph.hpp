#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "sgnep/linalg.hpp"

namespace sgnep {

/// Undirected weighted graph over which agents exchange (z_i, lambda_i).
/// Weights are symmetric, nonnegative, zero on the diagonal; a positive
/// weight is an edge.
class MultiplierGraph {
 public:
  /// Throws std::invalid_argument on a non-square, asymmetric, negative or
  /// nonzero-diagonal matrix.
  explicit MultiplierGraph(Matrix weights);

  static MultiplierGraph ring(std::size_t n);
  static MultiplierGraph complete(std::size_t n);
  /// Node 0 is the hub.
  static MultiplierGraph star(std::size_t n);
  /// "ring", "complete" or "star".
  static MultiplierGraph named(std::string_view topology, std::size_t n);

  std::size_t size() const { return weights_.rows(); }
  double weight(std::size_t i, std::size_t j) const { return weights_(i, j); }
  const Matrix& weights() const { return weights_; }
  /// Nodes j with w_ij > 0, ascending.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_[i]; }

 private:
  Matrix weights_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

struct LaplacianView {
  Matrix L;
  Vector degrees;
};

/// L = D - W.
LaplacianView laplacian(const MultiplierGraph& graph);

/// Breadth-first search over positive-weight edges.
bool is_connected(const MultiplierGraph& graph);

/// Block i of (L kron I_m) v, i.e. sum_j w_ij (v_i - v_j).
BlockVector neighbor_disagreement(const LaplacianView& view, const BlockVector& values);

}  // namespace sgnep
