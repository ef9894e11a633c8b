#pragma once

// Instances and helpers shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "sgnep/game.hpp"
#include "sgnep/graph.hpp"
#include "sgnep/linalg.hpp"
#include "sgnep/random.hpp"
#include "sgnep/ridehail.hpp"
#include "sgnep/tikhonov.hpp"

namespace sgnep::testing {

/// Two firms, one area, no demand noise. The cap of 6 binds at the
/// equilibrium (shared multiplier about 0.45).
inline ridehail::MarketParams tiny_market() {
  ridehail::MarketParams p;
  p.num_firms = 2;
  p.num_areas = 1;
  p.p_bar = 10.0;
  p.caps = {6.0};
  p.beta = 0.9;
  p.w_low = 1.0;
  p.w_high = Matrix(2, 1);
  p.w_high(0, 0) = 9.0;
  p.w_high(1, 0) = 8.0;
  p.theta = {0.8, 0.6};
  p.C = {3.6};
  p.K = Matrix(2, 1);
  p.K(0, 0) = 1.0;
  p.K(1, 0) = 0.8;
  p.noise_sigma = 0.0;
  return p;
}

/// Fast schedule for the tiny instance: small offsets, a and b close to 1/2.
inline ScheduleOptions tiny_schedule() {
  ScheduleOptions s;
  s.a = 0.51;
  s.b = 0.48;
  s.eta_lo = 1.0;
  s.eta_hi = 2.0;
  s.zeta_lo = 1.0;
  s.zeta_hi = 2.0;
  return s;
}

inline ridehail::MarketParams table_two(std::uint64_t seed = 7) {
  ridehail::TableTwoOptions o;
  o.seed = seed;
  return ridehail::table_two_market(o);
}

/// Schedule used for the Table II convergence runs: (a, b) = (0.7, 0.2),
/// eta near 1e8, zeta near 1e6, with fast dual and auxiliary scalings.
inline ScheduleOptions table_two_schedule() {
  ScheduleOptions s;
  s.a = 0.7;
  s.b = 0.2;
  s.eta_lo = 1e8;
  s.eta_hi = 1.1e8;
  s.zeta_lo = 1e6;
  s.zeta_hi = 1.1e6;
  s.nu = {1e3};
  s.tau = {1e3};
  return s;
}

inline MultiplierGraph scaled_ring(std::size_t n, double weight) {
  Matrix W = MultiplierGraph::ring(n).weights();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) W(i, j) *= weight;
  }
  return MultiplierGraph(W);
}

/// Schedule whose steps and regularization are numerically zero: offsets
/// near 1e300 give alpha, eps below 1e-100.
inline ScheduleOptions frozen_schedule(bool freeze_alpha, bool freeze_eps) {
  ScheduleOptions s;
  s.a = 0.6;
  s.b = 0.35;
  s.eta_lo = freeze_alpha ? 1e300 : 1.0;
  s.eta_hi = freeze_alpha ? 1.1e300 : 2.0;
  s.zeta_lo = freeze_eps ? 1e300 : 1.0;
  s.zeta_hi = freeze_eps ? 1.1e300 : 2.0;
  return s;
}

inline double max_abs_diff(const BlockVector& a, const BlockVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  }
  return m;
}

inline double max_abs_diff(const std::vector<AgentState>& a, const std::vector<AgentState>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (auto [u, v] : {std::pair{&a[i].x, &b[i].x}, std::pair{&a[i].z, &b[i].z},
                        std::pair{&a[i].lambda, &b[i].lambda}}) {
      for (std::size_t j = 0; j < u->size(); ++j) m = std::max(m, std::abs((*u)[j] - (*v)[j]));
    }
  }
  return m;
}

/// Uniform point in every box.
inline BlockVector random_profile(const GameSpec& game, RandomStream& rng) {
  BlockVector x(game.num_agents);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Box& b = game.local_sets[i];
    for (std::size_t j = 0; j < b.dim(); ++j) x[i].push_back(rng.uniform(b.lower[j], b.upper[j]));
  }
  return x;
}

/// Feasible primal blocks, arbitrary z, nonnegative lambda.
inline std::vector<AgentState> random_states(const GameSpec& game, RandomStream& rng) {
  const BlockVector x = random_profile(game, rng);
  std::vector<AgentState> s(game.num_agents);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i].x = x[i];
    for (std::size_t r = 0; r < game.dim_coupling; ++r) {
      s[i].z.push_back(rng.uniform(-5.0, 5.0));
      s[i].lambda.push_back(rng.uniform(0.0, 5.0));
    }
  }
  return s;
}

inline BlockVector sample_gradients(const GameSpec& game, const std::vector<AgentState>& s,
                                    RandomStream& rng) {
  BlockVector x;
  for (const auto& a : s) x.push_back(a.x);
  BlockVector g;
  for (std::size_t i = 0; i < s.size(); ++i) {
    g.push_back(game.oracle->gradient(i, x, game.oracle->draw_sample(i, rng)));
  }
  return g;
}

/// Average ranks, ties sharing the mean rank.
inline Vector ranks(const Vector& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  Vector r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = mean_rank;
    i = j + 1;
  }
  return r;
}

/// Pearson correlation of the ranks.
inline double spearman(const Vector& a, const Vector& b) {
  const Vector ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return (saa == 0.0 || sbb == 0.0) ? 0.0 : sab / std::sqrt(saa * sbb);
}

}  // namespace sgnep::testing
