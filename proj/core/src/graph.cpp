#include "sgnep/graph.hpp"

#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

namespace sgnep {

MultiplierGraph::MultiplierGraph(Matrix weights) : weights_(std::move(weights)) {
  const std::size_t n = weights_.rows();
  if (n == 0 || weights_.cols() != n) {
    throw std::invalid_argument("multiplier graph: weight matrix must be square and nonempty");
  }
  neighbors_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (weights_(i, i) != 0.0) {
      throw std::invalid_argument("multiplier graph: nonzero diagonal at node " +
                                  std::to_string(i));
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double w = weights_(i, j);
      if (!std::isfinite(w) || w < 0.0) {
        throw std::invalid_argument("multiplier graph: negative or non-finite weight");
      }
      if (w != weights_(j, i)) {
        throw std::invalid_argument("multiplier graph: weights are not symmetric");
      }
      if (w > 0.0) neighbors_[i].push_back(j);
    }
  }
}

MultiplierGraph MultiplierGraph::ring(std::size_t n) {
  Matrix w(n, n);
  if (n == 2) {
    w(0, 1) = w(1, 0) = 1.0;
  } else if (n > 2) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      w(i, j) = w(j, i) = 1.0;
    }
  }
  return MultiplierGraph(std::move(w));
}

MultiplierGraph MultiplierGraph::complete(std::size_t n) {
  Matrix w(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) w(i, i) = 0.0;
  return MultiplierGraph(std::move(w));
}

MultiplierGraph MultiplierGraph::star(std::size_t n) {
  Matrix w(n, n);
  for (std::size_t j = 1; j < n; ++j) w(0, j) = w(j, 0) = 1.0;
  return MultiplierGraph(std::move(w));
}

MultiplierGraph MultiplierGraph::named(std::string_view topology, std::size_t n) {
  if (topology == "ring") return ring(n);
  if (topology == "complete") return complete(n);
  if (topology == "star") return star(n);
  throw std::invalid_argument("unknown graph topology '" + std::string(topology) + "'");
}

LaplacianView laplacian(const MultiplierGraph& graph) {
  const std::size_t n = graph.size();
  LaplacianView view{Matrix(n, n), Vector(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      view.degrees[i] += graph.weight(i, j);
      view.L(i, j) = -graph.weight(i, j);
    }
    view.L(i, i) = view.degrees[i];
  }
  return view;
}

bool is_connected(const MultiplierGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t visited = 1;
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop();
    for (std::size_t j : graph.neighbors(i)) {
      if (!seen[j]) {
        seen[j] = true;
        ++visited;
        frontier.push(j);
      }
    }
  }
  return visited == n;
}

BlockVector neighbor_disagreement(const LaplacianView& view, const BlockVector& values) {
  const std::size_t n = view.L.rows();
  if (values.size() != n) {
    throw std::invalid_argument("neighbor_disagreement: expected one block per node");
  }
  const std::size_t m = values.empty() ? 0 : values.front().size();
  for (const auto& v : values) {
    if (v.size() != m) throw std::invalid_argument("neighbor_disagreement: ragged blocks");
  }
  BlockVector out(n, Vector(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double lij = view.L(i, j);
      if (lij == 0.0) continue;
      for (std::size_t r = 0; r < m; ++r) out[i][r] += lij * values[j][r];
    }
  }
  return out;
}

}  // namespace sgnep
