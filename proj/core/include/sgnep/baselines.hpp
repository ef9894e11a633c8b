#pragma once

// Centralized ground truth used to check the distributed solver.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgnep/game.hpp"
#include "sgnep/linalg.hpp"

namespace sgnep {

/// Full pseudogradient x -> col(F_i(x)).
using Pseudogradient = std::function<BlockVector(const BlockVector&)>;

/// Blockwise mean of M sampled gradients; the samples are drawn from the
/// reference stream of `seed`, so a fixed seed gives identical output.
BlockVector saa_gradient(const GameSpec& game, const BlockVector& x, std::size_t samples,
                         std::uint64_t seed);

/// The SAA pseudogradient with its M-sample batch frozen once.
Pseudogradient saa_operator(const GameSpec& game, std::size_t samples, std::uint64_t seed);

struct ReferenceSolution {
  BlockVector x_star;
  Vector lambda_star;
  double natural_residual = 0.0;
  std::size_t samples = 0;
  std::size_t iterations = 0;
  bool converged = false;

  /// max_r max(0, g_r(x*))
  double feasibility(const GameSpec& game) const;
  /// |lambda*^T g(x*)|
  double complementarity(const GameSpec& game) const;
};

struct ReferenceOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double tol = 1e-8;
  std::size_t max_iterations = 200000;
};

/// Projected extragradient on [F_M(x) + grad g(x)^T lambda; -g(x)] over
/// Omega x R^m_+ with a backtracked step, stopped on the unit-step natural
/// residual. Returns converged = false with the last iterate when the
/// budget runs out.
ReferenceSolution solve_reference(const GameSpec& game, const ReferenceOptions& options);

/// Natural residual of the stacked KKT operator at (x, lambda).
double kkt_natural_residual(const GameSpec& game, const Pseudogradient& F, const BlockVector& x,
                            const Vector& lambda);

struct MonotonicityReport {
  std::size_t trials = 0;
  /// min over pairs of <F(x) - F(y), x - y> / |x - y|^2
  double min_ratio = 0.0;
  /// max over pairs of |F(x) - F(y)| / |x - y|
  double max_lipschitz = 0.0;
  std::size_t violations = 0;  ///< pairs with ratio below -1e-8
};

/// Samples pairs uniformly in the (bounded) boxes.
MonotonicityReport monotonicity_probe(const Pseudogradient& F, const std::vector<Box>& boxes,
                                      std::size_t trials, std::uint64_t seed);

struct BruteForceResult {
  bool found = false;
  BlockVector x_star;
  /// min over feasible grid points y of <F(x*), y - x*>; always <= 0.
  double score = 0.0;
  double tolerance = 0.0;
  std::size_t grid_points = 0;
  std::string message;
};

/// Exhaustive VI check on the feasible grid of a deterministic game with
/// N * n <= 3. Picks the grid point maximizing the worst-case VI gap and
/// accepts it when that gap is at least -10 * grid_step * L, with L the
/// empirical Lipschitz bound from `monotonicity_probe`.
BruteForceResult brute_force_vi(const GameSpec& game, double grid_step);

}  // namespace sgnep
