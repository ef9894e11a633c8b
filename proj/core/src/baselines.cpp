#include "sgnep/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "sgnep/random.hpp"
#include "sgnep/tikhonov.hpp"

namespace sgnep {

namespace {

struct KktPoint {
  BlockVector x;
  Vector lambda;
};

struct KktField {
  BlockVector fx;
  Vector flambda;
};

KktField kkt_operator(const GameSpec& game, const Pseudogradient& F, const KktPoint& u) {
  KktField out;
  out.fx = F(u.x);
  for (std::size_t i = 0; i < game.num_agents; ++i) {
    const Vector Atl = game.coupling.local_gradient_transpose(i, u.lambda);
    for (std::size_t j = 0; j < Atl.size(); ++j) out.fx[i][j] += Atl[j];
  }
  out.flambda = coupling_value(game.coupling, u.x);
  for (double& v : out.flambda) v = -v;
  return out;
}

KktPoint projected_step(const GameSpec& game, const KktPoint& u, const KktField& f, double step) {
  KktPoint out;
  out.x.resize(u.x.size());
  for (std::size_t i = 0; i < u.x.size(); ++i) {
    Vector v(u.x[i].size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = u.x[i][j] - step * f.fx[i][j];
    out.x[i] = project_box(v, game.local_sets[i]);
  }
  Vector l(u.lambda.size());
  for (std::size_t r = 0; r < l.size(); ++r) l[r] = u.lambda[r] - step * f.flambda[r];
  out.lambda = project_nonneg(l);
  return out;
}

double distance(const KktPoint& a, const KktPoint& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    for (std::size_t j = 0; j < a.x[i].size(); ++j) {
      const double d = a.x[i][j] - b.x[i][j];
      acc += d * d;
    }
  }
  for (std::size_t r = 0; r < a.lambda.size(); ++r) {
    const double d = a.lambda[r] - b.lambda[r];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double field_distance(const KktField& a, const KktField& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.fx.size(); ++i) {
    for (std::size_t j = 0; j < a.fx[i].size(); ++j) {
      const double d = a.fx[i][j] - b.fx[i][j];
      acc += d * d;
    }
  }
  for (std::size_t r = 0; r < a.flambda.size(); ++r) {
    const double d = a.flambda[r] - b.flambda[r];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

BlockVector saa_gradient(const GameSpec& game, const BlockVector& x, std::size_t samples,
                         std::uint64_t seed) {
  return saa_operator(game, samples, seed)(x);
}

Pseudogradient saa_operator(const GameSpec& game, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw std::invalid_argument("saa: sample count must be at least 1");
  auto sets = std::make_shared<const SampleSets>(
      draw_sample_sets(game, samples, seed, streams::kReferenceSamples));
  auto oracle = game.oracle;
  const std::size_t N = game.num_agents;
  return [sets, oracle, N](const BlockVector& x) {
    BlockVector out(N);
    for (std::size_t i = 0; i < N; ++i) out[i] = oracle->mean_gradient(i, x, (*sets)[i]);
    return out;
  };
}

double ReferenceSolution::feasibility(const GameSpec& game) const {
  double worst = 0.0;
  for (double v : coupling_value(game.coupling, x_star)) worst = std::max(worst, v);
  return worst;
}

double ReferenceSolution::complementarity(const GameSpec& game) const {
  return std::abs(dot(lambda_star, coupling_value(game.coupling, x_star)));
}

double kkt_natural_residual(const GameSpec& game, const Pseudogradient& F, const BlockVector& x,
                            const Vector& lambda) {
  const KktPoint u{x, lambda};
  return distance(u, projected_step(game, u, kkt_operator(game, F, u), 1.0));
}

ReferenceSolution solve_reference(const GameSpec& game, const ReferenceOptions& options) {
  const auto report = validate_game(game);
  if (!report.ok()) {
    std::string msg = "solve_reference: invalid game";
    for (const auto& f : report.failures()) msg += "; " + f;
    throw std::invalid_argument(msg);
  }
  const Pseudogradient F = saa_operator(game, options.samples, options.seed);

  KktPoint u{box_midpoints(game), Vector(game.dim_coupling, 0.0)};
  KktField fu = kkt_operator(game, F, u);
  double step = 1.0;
  constexpr double kShrink = 0.5;
  constexpr double kGrow = 1.2;
  constexpr double kContraction = 0.9;

  ReferenceSolution sol;
  sol.samples = options.samples;
  std::size_t k = 0;
  double residual = distance(u, projected_step(game, u, fu, 1.0));
  for (; k < options.max_iterations && residual > options.tol; ++k) {
    KktPoint half;
    KktField fhalf;
    for (;;) {
      half = projected_step(game, u, fu, step);
      fhalf = kkt_operator(game, F, half);
      const double move = distance(u, half);
      if (move == 0.0 || step * field_distance(fu, fhalf) <= kContraction * move) break;
      step *= kShrink;
      if (step < 1e-300) throw std::runtime_error("solve_reference: step underflow");
    }
    u = projected_step(game, u, fhalf, step);
    fu = kkt_operator(game, F, u);
    residual = distance(u, projected_step(game, u, fu, 1.0));
    step *= kGrow;
  }
  sol.x_star = u.x;
  sol.lambda_star = u.lambda;
  sol.natural_residual = residual;
  sol.iterations = k;
  sol.converged = residual <= options.tol;
  return sol;
}

MonotonicityReport monotonicity_probe(const Pseudogradient& F, const std::vector<Box>& boxes,
                                      std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("monotonicity_probe: trials must be >= 1");
  for (const auto& b : boxes) {
    if (!b.is_bounded() || b.is_empty()) {
      throw std::invalid_argument("monotonicity_probe: boxes must be bounded and nonempty");
    }
  }
  RandomStream rng(seed, streams::kProbe);
  auto draw = [&] {
    BlockVector x(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      x[i].resize(boxes[i].dim());
      for (std::size_t j = 0; j < boxes[i].dim(); ++j) {
        x[i][j] = rng.uniform(boxes[i].lower[j], boxes[i].upper[j]);
      }
    }
    return x;
  };
  MonotonicityReport rep;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    const BlockVector x = draw(), y = draw();
    const Vector fx = flatten(F(x)), fy = flatten(F(y));
    const Vector xf = flatten(x), yf = flatten(y);
    double inner = 0.0, dx2 = 0.0, df2 = 0.0;
    for (std::size_t c = 0; c < xf.size(); ++c) {
      const double dx = xf[c] - yf[c], df = fx[c] - fy[c];
      inner += df * dx;
      dx2 += dx * dx;
      df2 += df * df;
    }
    if (dx2 == 0.0) continue;
    const double ratio = inner / dx2;
    rep.min_ratio = std::min(rep.min_ratio, ratio);
    rep.max_lipschitz = std::max(rep.max_lipschitz, std::sqrt(df2 / dx2));
    if (ratio < -1e-8) ++rep.violations;
    ++rep.trials;
  }
  return rep;
}

namespace {

using Point = Vector;

// Lower-left to upper-right monotone chain hull of 2-D points.
std::vector<Point> hull_2d(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Point& o, const Point& a, const Point& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

BruteForceResult brute_force_vi(const GameSpec& game, double grid_step) {
  const std::size_t N = game.num_agents, n = game.dim_local, d = N * n;
  if (d == 0 || d > 3) throw std::invalid_argument("brute_force_vi: needs N * n <= 3");
  if (!(grid_step > 0.0)) throw std::invalid_argument("brute_force_vi: grid_step must be > 0");
  if (!game.oracle || !game.oracle->is_deterministic()) {
    throw std::invalid_argument("brute_force_vi: needs a deterministic oracle");
  }
  for (const auto& b : game.local_sets) {
    if (!b.is_bounded() || b.is_empty()) {
      throw std::invalid_argument("brute_force_vi: boxes must be bounded and nonempty");
    }
  }
  const Pseudogradient F = saa_operator(game, 1, 0);

  Vector lo(d), hi(d);
  std::vector<std::size_t> count(d);
  for (std::size_t c = 0; c < d; ++c) {
    lo[c] = game.local_sets[c / n].lower[c % n];
    hi[c] = game.local_sets[c / n].upper[c % n];
    count[c] = static_cast<std::size_t>(std::floor((hi[c] - lo[c]) / grid_step + 1e-9)) + 1;
  }
  auto to_profile = [&](const Point& p) {
    BlockVector x(N, Vector(n));
    for (std::size_t c = 0; c < d; ++c) x[c / n][c % n] = p[c];
    return x;
  };
  auto feasible = [&](const Point& p) {
    for (double v : coupling_value(game.coupling, to_profile(p))) {
      if (v > 1e-12) return false;
    }
    return true;
  };

  // Feasible points of each line along the last axis form a contiguous run
  // (box and affine constraints), so the extreme points of the feasible grid
  // are among the run endpoints.
  std::vector<Point> feasible_points, endpoints;
  std::size_t lines = 1;
  for (std::size_t c = 0; c + 1 < d; ++c) lines *= count[c];
  for (std::size_t line = 0; line < lines; ++line) {
    Point p(d);
    std::size_t rest = line;
    for (std::size_t c = d - 1; c-- > 0;) {
      p[c] = lo[c] + static_cast<double>(rest % count[c]) * grid_step;
      rest /= count[c];
    }
    bool any = false;
    Point first, last;
    for (std::size_t t = 0; t < count[d - 1]; ++t) {
      p[d - 1] = lo[d - 1] + static_cast<double>(t) * grid_step;
      if (!feasible(p)) continue;
      if (!any) first = p;
      last = p;
      any = true;
      feasible_points.push_back(p);
    }
    if (any) {
      endpoints.push_back(first);
      if (last != first) endpoints.push_back(last);
    }
  }
  if (d == 2) endpoints = hull_2d(std::move(endpoints));

  BruteForceResult result;
  result.grid_points = feasible_points.size();
  if (feasible_points.empty()) {
    result.message = "no feasible grid point at this resolution";
    return result;
  }

  double best = -std::numeric_limits<double>::infinity();
  const Point* best_point = nullptr;
  for (const auto& p : feasible_points) {
    const Vector f = flatten(F(to_profile(p)));
    double worst = 0.0;
    for (const auto& e : endpoints) {
      double gap = 0.0;
      for (std::size_t c = 0; c < d; ++c) gap += f[c] * (e[c] - p[c]);
      worst = std::min(worst, gap);
    }
    if (worst > best) {
      best = worst;
      best_point = &p;
    }
  }

  const MonotonicityReport probe = monotonicity_probe(F, game.local_sets, 200, 0);
  result.tolerance = 10.0 * grid_step * probe.max_lipschitz;
  result.score = best;
  result.x_star = to_profile(*best_point);
  result.found = best >= -result.tolerance;
  if (!result.found) result.message = "no VI point at this resolution";
  return result;
}

}  // namespace sgnep
