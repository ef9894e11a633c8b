#include "sgnep/ridehail.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sgnep::ridehail {

namespace {

double others_price_sum(std::size_t i, std::size_t h, const BlockVector& prices) {
  double s = 0.0;
  for (std::size_t j = 0; j < prices.size(); ++j) {
    if (j != i) s += prices[j][h];
  }
  return s;
}

double substitution_weight(std::size_t i, const MarketParams& params) {
  if (params.num_firms == 1) {
    if (params.theta[i] > 0.0) {
      throw std::invalid_argument("demand: a single firm must have theta = 0");
    }
    return 0.0;
  }
  return params.theta[i] / static_cast<double>(params.num_firms - 1);
}

void check_profile(const BlockVector& prices, const MarketParams& params) {
  if (prices.size() != params.num_firms) {
    throw std::invalid_argument("market: expected one price block per firm");
  }
  for (const auto& p : prices) {
    if (p.size() != params.num_areas) {
      throw std::invalid_argument("market: price block has wrong number of areas");
    }
  }
}

double raw_participation(double price, std::size_t i, std::size_t h, const MarketParams& params) {
  return (params.beta * price - params.w_low) / (params.w_high(i, h) - params.w_low);
}

}  // namespace

std::vector<std::string> MarketParams::issues() const {
  std::vector<std::string> out;
  const std::size_t N = num_firms, n = num_areas;
  if (N < 1) out.push_back("num_firms must be at least 1");
  if (n < 1) out.push_back("num_areas must be at least 1");
  if (caps.size() != n) out.push_back("caps must have one entry per area");
  if (C.size() != n) out.push_back("C must have one entry per area");
  if (theta.size() != N) out.push_back("theta must have one entry per firm");
  if (w_high.rows() != N || w_high.cols() != n) out.push_back("w_high must be firms x areas");
  if (K.rows() != N || K.cols() != n) out.push_back("K must be firms x areas");
  if (!out.empty()) return out;

  if (!(beta > 0.0)) out.push_back("beta must be positive");
  if (!(w_low > 0.0)) out.push_back("w_low must be positive");
  if (!(noise_sigma >= 0.0 && noise_sigma < 1.0)) out.push_back("noise_sigma must lie in [0, 1)");
  const double max_cap = *std::max_element(caps.begin(), caps.end());
  if (!(p_bar > max_cap)) out.push_back("p_bar must exceed every area cap");
  for (std::size_t h = 0; h < n; ++h) {
    if (!(caps[h] > 0.0)) out.push_back("cap of area " + std::to_string(h) + " must be positive");
    if (!(C[h] > 0.0)) out.push_back("C of area " + std::to_string(h) + " must be positive");
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (!(theta[i] >= 0.0 && theta[i] <= 1.0)) {
      out.push_back("theta of firm " + std::to_string(i) + " must lie in [0, 1]");
    }
    if (N == 1 && theta[i] > 0.0) out.push_back("a single firm must have theta = 0");
    for (std::size_t h = 0; h < n; ++h) {
      if (!(w_high(i, h) > w_low)) {
        out.push_back("w_high(" + std::to_string(i) + "," + std::to_string(h) +
                      ") must exceed w_low");
      }
      if (!(K(i, h) > 0.0)) {
        out.push_back("K(" + std::to_string(i) + "," + std::to_string(h) + ") must be positive");
      }
    }
  }
  return out;
}

void MarketParams::validate() const {
  const auto list = issues();
  if (list.empty()) return;
  std::ostringstream msg;
  msg << "invalid market parameters:";
  for (const auto& s : list) msg << "\n  - " << s;
  throw std::invalid_argument(msg.str());
}

double MarketParams::nominal_fraction(std::size_t h) const {
  double total = 0.0;
  for (std::size_t j = 0; j < num_firms; ++j) total += K(j, h);
  return C[h] / total;
}

MarketParams table_two_market(const TableTwoOptions& options) {
  const std::size_t N = options.num_firms, n = options.num_areas;
  RandomStream rng(options.seed, streams::kMarketDraw);
  MarketParams p;
  p.num_firms = N;
  p.num_areas = n;
  p.p_bar = 35.0;
  p.beta = 0.9;
  p.w_low = 12.0;
  p.noise_sigma = options.noise_sigma;
  p.caps.resize(n);
  for (auto& cap : p.caps) cap = rng.uniform(0.65 * p.p_bar, 0.95 * p.p_bar);
  p.theta.resize(N);
  for (auto& t : p.theta) t = rng.uniform(0.6, 1.0);
  p.C.resize(n);
  for (auto& c : p.C) c = rng.uniform(5.0, 12.0) * 1e3;
  p.K = Matrix(N, n);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t h = 0; h < n; ++h) p.K(i, h) = rng.uniform(0.5, 3.0) * 1e3;
  }
  p.w_high = Matrix(N, n);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t h = 0; h < n; ++h) {
      p.w_high(i, h) = rng.uniform(options.w_high_lo, options.w_high_hi);
    }
  }
  return p;
}

double demand(std::size_t i, std::size_t h, const BlockVector& prices, double c_h,
              const MarketParams& params) {
  check_profile(prices, params);
  const double sub = substitution_weight(i, params);
  return c_h * params.K(i, h) / params.p_bar *
         (params.p_bar - prices[i][h] + sub * others_price_sum(i, h, prices));
}

double participation_prob(double price, std::size_t i, std::size_t h, const MarketParams& params,
                          bool* clamped) {
  const double raw = raw_participation(price, i, h, params);
  const double q = std::clamp(raw, 0.0, 1.0);
  if (clamped) *clamped = (q != raw);
  return q;
}

double effective_demand(std::size_t i, std::size_t h, const BlockVector& prices, double c_h,
                        const MarketParams& params) {
  return demand(i, h, prices, c_h, params) * participation_prob(prices[i][h], i, h, params);
}

double drivers_serving(std::size_t i, std::size_t h, double price, const MarketParams& params) {
  return params.K(i, h) * participation_prob(price, i, h, params);
}

double sampled_cost(std::size_t i, const BlockVector& prices, const MarketSample& sample,
                    const MarketParams& params) {
  check_profile(prices, params);
  if (sample.c.size() != params.num_areas) throw std::invalid_argument("sample has wrong size");
  double profit = 0.0;
  for (std::size_t h = 0; h < params.num_areas; ++h) {
    const double p = prices[i][h];
    const double q = raw_participation(p, i, h, params);
    const double d = demand(i, h, prices, sample.c[h], params);
    profit += q * p * (d - params.beta * params.K(i, h));
  }
  return -profit;
}

Vector sampled_cost_gradient(std::size_t i, const BlockVector& prices, const MarketSample& sample,
                             const MarketParams& params) {
  check_profile(prices, params);
  if (sample.c.size() != params.num_areas) throw std::invalid_argument("sample has wrong size");
  const double sub = substitution_weight(i, params);
  Vector grad(params.num_areas);
  for (std::size_t h = 0; h < params.num_areas; ++h) {
    if (!(sample.c[h] > 0.0)) throw std::invalid_argument("sample fraction must be positive");
    const double p = prices[i][h];
    const double K = params.K(i, h);
    const double scale = sample.c[h] * K / params.p_bar;
    const double d = scale * (params.p_bar - p + sub * others_price_sum(i, h, prices));
    const double dd = -scale;
    const double dq = params.beta / (params.w_high(i, h) - params.w_low);
    const double q = raw_participation(p, i, h, params);
    const double margin = d - params.beta * K;
    // d/dp [q p (d - beta K)], product rule with q and d affine in p
    grad[h] = -(dq * p * margin + q * margin + q * p * dd);
  }
  return grad;
}

MarketSample sample_uncertainty(RandomStream& rng, const MarketParams& params) {
  MarketSample s;
  s.c.resize(params.num_areas);
  for (std::size_t h = 0; h < params.num_areas; ++h) {
    const double u = 2.0 * rng.uniform() - 1.0;
    s.c[h] = params.nominal_fraction(h) * (1.0 + params.noise_sigma * u);
  }
  return s;
}

MarketOracle::MarketOracle(MarketParams params) : params_(std::move(params)) {
  params_.validate();
}

Vector MarketOracle::gradient(std::size_t agent, const BlockVector& x,
                              std::span<const double> sample) const {
  MarketSample s{Vector(sample.begin(), sample.end())};
  return sampled_cost_gradient(agent, x, s, params_);
}

Vector MarketOracle::mean_gradient(std::size_t agent, const BlockVector& x,
                                   const std::vector<Vector>& samples) const {
  if (samples.empty()) throw std::invalid_argument("mean_gradient: empty batch");
  MarketSample mean{Vector(params_.num_areas, 0.0)};
  for (const auto& s : samples) {
    if (s.size() != params_.num_areas) throw std::invalid_argument("sample has wrong size");
    for (std::size_t h = 0; h < s.size(); ++h) mean.c[h] += s[h];
  }
  for (double& c : mean.c) c /= static_cast<double>(samples.size());
  return sampled_cost_gradient(agent, x, mean, params_);
}

Vector MarketOracle::draw_sample(std::size_t /*agent*/, RandomStream& rng) const {
  return sample_uncertainty(rng, params_).c;
}

GameSpec build_game(const MarketParams& params) {
  params.validate();
  const std::size_t N = params.num_firms, n = params.num_areas;
  GameSpec spec;
  spec.num_agents = N;
  spec.dim_local = n;
  spec.dim_coupling = n;
  const double inv_n = 1.0 / static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i) {
    Box box{Vector(n), Vector(n)};
    for (std::size_t h = 0; h < n; ++h) {
      box.lower[h] = std::max(0.0, params.w_low / params.beta);
      box.upper[h] = params.w_high(i, h) / params.beta;
    }
    spec.local_sets.push_back(std::move(box));
    spec.coupling.A.push_back(Matrix::identity(n, inv_n));
    Vector b(n);
    for (std::size_t h = 0; h < n; ++h) b[h] = params.caps[h] * inv_n;
    spec.coupling.b.push_back(std::move(b));
  }
  spec.oracle = std::make_shared<MarketOracle>(params);
  return spec;
}

RealizedOutcomes realized_outcomes(const BlockVector& equilibrium, std::size_t realizations,
                                   std::uint64_t seed, const MarketParams& params,
                                   std::size_t expectation_samples) {
  check_profile(equilibrium, params);
  if (realizations == 0) throw std::invalid_argument("realized_outcomes: need at least one draw");
  if (expectation_samples == 0) {
    throw std::invalid_argument("realized_outcomes: need at least one expectation sample");
  }
  const std::size_t N = params.num_firms, n = params.num_areas;

  // E_xi[d] by SAA; demand is affine in c so averaging c is exact.
  RandomStream xi_rng(seed, streams::kExpectation);
  Vector c_mean(n, 0.0);
  for (std::size_t s = 0; s < expectation_samples; ++s) {
    const MarketSample draw = sample_uncertainty(xi_rng, params);
    for (std::size_t h = 0; h < n; ++h) c_mean[h] += draw.c[h];
  }
  for (double& c : c_mean) c /= static_cast<double>(expectation_samples);

  // Per (firm, area) profit earned when the whole pool participates.
  Matrix full_margin(N, n);
  RealizedOutcomes out;
  out.realizations = realizations;
  out.expected_profit.assign(N, 0.0);
  out.participation = Matrix(N, n);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t h = 0; h < n; ++h) {
      const double p = equilibrium[i][h];
      const double d = demand(i, h, equilibrium, c_mean[h], params);
      full_margin(i, h) = p * (d - params.beta * params.K(i, h));
      const double q = participation_prob(p, i, h, params);
      out.participation(i, h) = q;
      out.expected_profit[i] += q * full_margin(i, h);
    }
  }

  RandomStream delta_rng(seed, streams::kRealizations);
  // Welford accumulators; constant samples give an exact zero spread.
  struct Running {
    double mean = 0.0, m2 = 0.0;
    std::size_t count = 0;
    void add(double v) {
      ++count;
      const double d = v - mean;
      mean += d / static_cast<double>(count);
      m2 += d * (v - mean);
    }
    double stderr_of_mean() const {
      if (count < 2) return 0.0;
      const double c = static_cast<double>(count);
      return std::sqrt(std::max(0.0, m2 / (c - 1.0)) / c);
    }
  };
  std::vector<Running> ratio_stats(N), sat_stats(n);
  out.acceptance_frequency = Matrix(N, n);
  for (std::size_t r = 0; r < realizations; ++r) {
    Vector realized(N, 0.0), served(n, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t h = 0; h < n; ++h) {
        const double delta = delta_rng.uniform(params.w_low, params.w_high(i, h));
        if (delta <= params.beta * equilibrium[i][h]) {
          out.acceptance_frequency(i, h) += 1.0;
          realized[i] += full_margin(i, h);
          served[h] += params.K(i, h);
        }
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      const double ratio = std::abs(out.expected_profit[i]) > 1e-12
                               ? realized[i] / out.expected_profit[i]
                               : 0.0;
      ratio_stats[i].add(ratio);
    }
    for (std::size_t h = 0; h < n; ++h) {
      sat_stats[h].add(served[h] / params.C[h]);
    }
  }

  const double R = static_cast<double>(realizations);
  for (std::size_t i = 0; i < N; ++i) {
    out.profit_ratio.push_back(ratio_stats[i].mean);
    out.profit_ratio_stderr.push_back(ratio_stats[i].stderr_of_mean());
    for (std::size_t h = 0; h < n; ++h) out.acceptance_frequency(i, h) /= R;
  }
  for (std::size_t h = 0; h < n; ++h) {
    out.satisfaction.push_back(sat_stats[h].mean);
    out.satisfaction_stderr.push_back(sat_stats[h].stderr_of_mean());
  }
  return out;
}

}  // namespace sgnep::ridehail
