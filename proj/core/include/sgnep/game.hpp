#pragma once

// Stochastic generalized Nash equilibrium problem (SGNEP) description shared
// by every solver: per-agent box sets, separable affine coupling
// g(x) = sum_i (A_i x_i - b_i) <= 0, and a stochastic pseudogradient oracle.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgnep/linalg.hpp"
#include "sgnep/random.hpp"

namespace sgnep {

/// Componentwise interval [lower, upper]; upper may be +infinity.
struct Box {
  Vector lower;
  Vector upper;

  std::size_t dim() const { return lower.size(); }
  bool is_empty() const;
  bool contains(std::span<const double> v) const;
  bool is_bounded() const;
};

/// Separable affine coupling constraint. Agent i owns (A_i, b_i) and
/// g_i(x_i) = A_i x_i - b_i.
struct CouplingConstraint {
  std::vector<Matrix> A;
  std::vector<Vector> b;

  std::size_t num_agents() const { return A.size(); }
  std::size_t dim() const { return b.empty() ? 0 : b.front().size(); }

  /// g_i(x_i)
  Vector local_value(std::size_t i, std::span<const double> x_i) const;
  /// A_i^T lambda
  Vector local_gradient_transpose(std::size_t i, std::span<const double> lambda) const;
};

/// Sampled pseudogradient of an SGNEP. A sample xi is an opaque real vector
/// drawn by the oracle itself; the oracle must be deterministic for fixed
/// (i, x, xi).
class StochasticGradientOracle {
 public:
  virtual ~StochasticGradientOracle() = default;

  /// grad_{x_i} J_i(x_i, x_{-i}, xi)
  virtual Vector gradient(std::size_t agent, const BlockVector& x,
                          std::span<const double> sample) const = 0;

  /// Sample average of `gradient` over a batch.
  virtual Vector mean_gradient(std::size_t agent, const BlockVector& x,
                               const std::vector<Vector>& samples) const;

  /// One i.i.d. draw of the uncertainty seen by `agent`.
  virtual Vector draw_sample(std::size_t agent, RandomStream& rng) const = 0;

  /// True when every sample yields the same gradient.
  virtual bool is_deterministic() const = 0;
};

struct GameSpec {
  std::size_t num_agents = 0;
  std::size_t dim_local = 0;
  std::size_t dim_coupling = 0;
  std::vector<Box> local_sets;
  CouplingConstraint coupling;
  std::shared_ptr<const StochasticGradientOracle> oracle;
};

Vector project_box(std::span<const double> v, const Box& box);
Vector project_nonneg(std::span<const double> v);

/// g(x) = sum_i (A_i x_i - b_i)
Vector coupling_value(const CouplingConstraint& cc, const BlockVector& x);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const;
  /// Messages of every failed check, in order.
  std::vector<std::string> failures() const;
};

/// Structural checks: dimensions, nonempty boxes, and a strictly feasible
/// (Slater) point tested at the box midpoint and then the lower corner.
ValidationReport validate_game(const GameSpec& spec);

/// Midpoint of every box (lower corner where the upper bound is infinite).
BlockVector box_midpoints(const GameSpec& spec);
BlockVector box_lower_corners(const GameSpec& spec);

/// Projects each block onto its local set.
BlockVector project_profile(const BlockVector& x, const GameSpec& spec);

}  // namespace sgnep
