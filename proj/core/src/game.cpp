#include "sgnep/game.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sgnep {

bool Box::is_empty() const {
  if (lower.size() != upper.size()) return true;
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!(lower[j] <= upper[j])) return true;
  }
  return false;
}

bool Box::contains(std::span<const double> v) const {
  if (v.size() != dim()) return false;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] < lower[j] || v[j] > upper[j]) return false;
  }
  return true;
}

bool Box::is_bounded() const {
  return std::all_of(upper.begin(), upper.end(), [](double u) { return std::isfinite(u); }) &&
         std::all_of(lower.begin(), lower.end(), [](double l) { return std::isfinite(l); });
}

Vector CouplingConstraint::local_value(std::size_t i, std::span<const double> x_i) const {
  Vector g = A.at(i).apply(x_i);
  const Vector& bi = b.at(i);
  for (std::size_t r = 0; r < g.size(); ++r) g[r] -= bi[r];
  return g;
}

Vector CouplingConstraint::local_gradient_transpose(std::size_t i,
                                                    std::span<const double> lambda) const {
  return A.at(i).apply_transpose(lambda);
}

Vector StochasticGradientOracle::mean_gradient(std::size_t agent, const BlockVector& x,
                                               const std::vector<Vector>& samples) const {
  if (samples.empty()) throw std::invalid_argument("mean_gradient: empty batch");
  Vector acc;
  for (const auto& s : samples) {
    Vector g = gradient(agent, x, s);
    if (acc.empty()) acc.assign(g.size(), 0.0);
    for (std::size_t j = 0; j < g.size(); ++j) acc[j] += g[j];
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (double& v : acc) v *= inv;
  return acc;
}

Vector project_box(std::span<const double> v, const Box& box) {
  if (v.size() != box.dim() || box.upper.size() != box.dim()) {
    throw std::invalid_argument("project_box: dimension mismatch");
  }
  Vector out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    out[j] = std::min(std::max(v[j], box.lower[j]), box.upper[j]);
  }
  return out;
}

Vector project_nonneg(std::span<const double> v) {
  Vector out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = std::max(0.0, v[j]);
  return out;
}

Vector coupling_value(const CouplingConstraint& cc, const BlockVector& x) {
  if (x.size() != cc.num_agents()) {
    throw std::invalid_argument("coupling_value: expected one block per agent");
  }
  Vector g(cc.dim(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != cc.A[i].cols()) {
      throw std::invalid_argument("coupling_value: block dimension mismatch");
    }
    const Vector gi = cc.local_value(i, x[i]);
    for (std::size_t r = 0; r < g.size(); ++r) g[r] += gi[r];
  }
  return g;
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::vector<std::string> ValidationReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.passed) out.push_back(c.name + ": " + c.detail);
  }
  return out;
}

BlockVector box_midpoints(const GameSpec& spec) {
  BlockVector out(spec.local_sets.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Box& b = spec.local_sets[i];
    out[i].resize(b.dim());
    for (std::size_t j = 0; j < b.dim(); ++j) {
      out[i][j] = std::isfinite(b.upper[j]) ? 0.5 * (b.lower[j] + b.upper[j]) : b.lower[j];
    }
  }
  return out;
}

BlockVector box_lower_corners(const GameSpec& spec) {
  BlockVector out;
  for (const auto& b : spec.local_sets) out.push_back(b.lower);
  return out;
}

BlockVector project_profile(const BlockVector& x, const GameSpec& spec) {
  BlockVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = project_box(x[i], spec.local_sets.at(i));
  return out;
}

ValidationReport validate_game(const GameSpec& spec) {
  ValidationReport report;
  const std::size_t N = spec.num_agents, n = spec.dim_local, m = spec.dim_coupling;

  {
    ValidationCheck c{"dimensions", true, ""};
    std::ostringstream why;
    if (N < 1 || n < 1 || m < 1) why << "N, n and m must all be at least 1; ";
    if (spec.local_sets.size() != N) why << "expected " << N << " local sets; ";
    if (spec.coupling.A.size() != N || spec.coupling.b.size() != N) {
      why << "coupling must have one (A_i, b_i) per agent; ";
    } else {
      for (std::size_t i = 0; i < N; ++i) {
        if (spec.coupling.A[i].rows() != m || spec.coupling.A[i].cols() != n ||
            spec.coupling.b[i].size() != m) {
          why << "coupling block " << i << " is not " << m << "x" << n << "; ";
        }
      }
    }
    for (std::size_t i = 0; i < spec.local_sets.size(); ++i) {
      if (spec.local_sets[i].lower.size() != n || spec.local_sets[i].upper.size() != n) {
        why << "local set " << i << " has wrong dimension; ";
      }
    }
    if (!spec.oracle) why << "missing gradient oracle; ";
    c.detail = why.str();
    c.passed = c.detail.empty();
    report.checks.push_back(c);
    if (!c.passed) return report;
  }

  bool boxes_ok = true;
  {
    ValidationCheck c{"local sets", true, ""};
    for (std::size_t i = 0; i < N; ++i) {
      if (spec.local_sets[i].is_empty()) {
        c.passed = false;
        c.detail += "empty local set for agent " + std::to_string(i) + "; ";
      }
    }
    boxes_ok = c.passed;
    report.checks.push_back(c);
  }

  {
    ValidationCheck c{"slater", false, ""};
    if (!boxes_ok) {
      c.detail = "skipped: empty local set";
    } else {
      auto strictly_feasible = [&](const BlockVector& x) {
        const Vector g = coupling_value(spec.coupling, x);
        return std::all_of(g.begin(), g.end(), [](double v) { return v < 0.0; });
      };
      if (strictly_feasible(box_midpoints(spec))) {
        c.passed = true;
        c.detail = "strictly feasible at box midpoint";
      } else if (strictly_feasible(box_lower_corners(spec))) {
        c.passed = true;
        c.detail = "strictly feasible at lower corner";
      } else {
        c.detail = "no Slater point found";
      }
    }
    report.checks.push_back(c);
  }
  return report;
}

}  // namespace sgnep
