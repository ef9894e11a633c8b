#pragma once

// Competing ride-hailing platforms under a regulated price cap.
//
// Firm i sets a price p_{i,h} per area h; drivers are paid w = beta * p and
// participate with probability q = (beta p - w_low) / (w_high_{i,h} - w_low).
// Demand is affine in all prices and proportional to the uncertain rider
// fraction c_h(xi). Profit per area is q p (d - beta K); the game minimizes
// J_i = -profit subject to the average-price cap (1/N) sum_i p_{i,h} <= cap_h.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgnep/game.hpp"
#include "sgnep/linalg.hpp"
#include "sgnep/random.hpp"

namespace sgnep::ridehail {

struct MarketParams {
  std::size_t num_firms = 0;
  std::size_t num_areas = 0;
  double p_bar = 0.0;        ///< maximum service price ($)
  Vector caps;               ///< per-area average price cap ($)
  double beta = 0.0;         ///< commission ratio
  double w_low = 0.0;        ///< wage floor ($)
  Matrix w_high;             ///< firms x areas, driver willingness ceiling ($)
  Vector theta;              ///< per-firm substitutability in [0, 1]
  Vector C;                  ///< per-area rider mass
  Matrix K;                  ///< firms x areas, registered drivers
  double noise_sigma = 0.0;  ///< relative half-width of the rider-fraction noise

  /// Every violated invariant, empty when valid.
  std::vector<std::string> issues() const;
  /// Throws std::invalid_argument listing every issue.
  void validate() const;

  /// C_h / sum_j K_{j,h}
  double nominal_fraction(std::size_t h) const;
};

/// Realized rider fraction per area (riders per registered driver).
struct MarketSample {
  Vector c;
};

struct TableTwoOptions {
  std::uint64_t seed = 7;
  std::size_t num_firms = 5;
  std::size_t num_areas = 10;
  double noise_sigma = 0.1;
  double w_high_lo = 20.0;
  double w_high_hi = 30.0;
};

/// Draws the randomized entries of the reference simulation table (caps,
/// theta, C, K, w_high) from one seeded stream.
MarketParams table_two_market(const TableTwoOptions& options);

/// Riders choosing firm i in area h. May be negative for extreme prices.
double demand(std::size_t i, std::size_t h, const BlockVector& prices, double c_h,
              const MarketParams& params);

/// (beta p - w_low) / (w_high - w_low), clamped to [0, 1]; `clamped` is set
/// when the raw value fell outside.
double participation_prob(double price, std::size_t i, std::size_t h, const MarketParams& params,
                          bool* clamped = nullptr);

double effective_demand(std::size_t i, std::size_t h, const BlockVector& prices, double c_h,
                        const MarketParams& params);

double drivers_serving(std::size_t i, std::size_t h, double price, const MarketParams& params);

/// J_i(x, xi) = -sum_h q(p) p (d(p, c_h) - beta K). Uses the unclamped
/// (affine) participation so the cost is a polynomial in the prices.
double sampled_cost(std::size_t i, const BlockVector& prices, const MarketSample& sample,
                    const MarketParams& params);

/// Analytic gradient of `sampled_cost` with respect to firm i's prices.
Vector sampled_cost_gradient(std::size_t i, const BlockVector& prices, const MarketSample& sample,
                             const MarketParams& params);

MarketSample sample_uncertainty(RandomStream& rng, const MarketParams& params);

/// Pseudogradient oracle backed by `sampled_cost_gradient`. The sample is
/// the rider-fraction vector c.
class MarketOracle final : public StochasticGradientOracle {
 public:
  explicit MarketOracle(MarketParams params);

  Vector gradient(std::size_t agent, const BlockVector& x,
                  std::span<const double> sample) const override;
  /// The gradient is affine in c, so the batch mean equals the gradient at
  /// the mean sample.
  Vector mean_gradient(std::size_t agent, const BlockVector& x,
                       const std::vector<Vector>& samples) const override;
  Vector draw_sample(std::size_t agent, RandomStream& rng) const override;
  bool is_deterministic() const override { return params_.noise_sigma == 0.0; }

  const MarketParams& params() const { return params_; }

 private:
  MarketParams params_;
};

/// Boxes [max(0, w_low/beta), w_high_{i,h}/beta], the average-price cap
/// split evenly as g_i(x_i) = x_i/N - cap/N, and a MarketOracle.
GameSpec build_game(const MarketParams& params);

struct RealizedOutcomes {
  std::size_t realizations = 0;
  Vector expected_profit;      ///< per firm
  Vector profit_ratio;         ///< per firm, mean of realized / expected
  Vector profit_ratio_stderr;  ///< per firm
  Vector satisfaction;         ///< per area, mean of sum_i k_{i,h} / C_h
  Vector satisfaction_stderr;  ///< per area
  Matrix acceptance_frequency; ///< firms x areas, fraction of accepted draws
  Matrix participation;        ///< firms x areas, participation_prob at x*
};

/// Monte-Carlo evaluation of an equilibrium profile against random driver
/// opportunity costs delta ~ U[w_low, w_high]. A driver pool is fully
/// active when delta <= beta p*. Expectations over xi use
/// `expectation_samples` draws. A firm with zero expected profit reports a
/// ratio of 0.
RealizedOutcomes realized_outcomes(const BlockVector& equilibrium, std::size_t realizations,
                                   std::uint64_t seed, const MarketParams& params,
                                   std::size_t expectation_samples = 1000);

}  // namespace sgnep::ridehail
