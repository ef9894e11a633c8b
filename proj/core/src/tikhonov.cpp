#include "sgnep/tikhonov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sgnep {

namespace {

Vector broadcast(const Vector& v, std::size_t n, const char* name) {
  if (v.empty()) return Vector(n, 1.0);
  if (v.size() == 1) return Vector(n, v.front());
  if (v.size() != n) {
    throw std::invalid_argument(std::string("schedule: ") + name + " needs one entry per agent");
  }
  return v;
}

void require_finite(std::span<const double> v, std::size_t k, const char* what) {
  if (!all_finite(v)) throw NumericalFailure(k, std::string("non-finite ") + what);
}

}  // namespace

double step_size(std::size_t k, double offset, double exponent) {
  if (!(exponent > 0.0 && exponent < 1.0)) {
    throw std::invalid_argument("step_size: exponent must lie in (0, 1)");
  }
  if (!(offset > 0.0) || !std::isfinite(offset)) {
    throw std::invalid_argument("step_size: offset must be positive");
  }
  return std::pow(static_cast<double>(k) + offset, -exponent);
}

bool validate_schedule(double a, double b) {
  return a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0 && a + b < 1.0 && a > b;
}

std::vector<std::string> ScheduleOptions::issues() const {
  std::vector<std::string> out;
  if (!validate_schedule(a, b)) {
    std::ostringstream msg;
    msg << "exponents (a, b) = (" << a << ", " << b
        << ") must satisfy a, b in (0, 1), a + b < 1 and a > b";
    out.push_back(msg.str());
  }
  if (!(eta_lo > 0.0)) out.push_back("eta lower bound must be positive");
  if (!common_eta && !(eta_lo < eta_hi)) out.push_back("eta interval must satisfy lo < hi");
  if (!(zeta_lo > 0.0)) out.push_back("zeta lower bound must be positive");
  if (!common_zeta && !(zeta_lo < zeta_hi)) out.push_back("zeta interval must satisfy lo < hi");
  for (const auto* v : {&gamma, &nu, &tau}) {
    for (double s : *v) {
      if (!(s > 0.0)) {
        out.push_back("gamma, nu and tau must be positive");
        return out;
      }
    }
  }
  return out;
}

StepSchedule::StepSchedule(double a, double b, Vector eta, Vector zeta, Vector gamma, Vector nu,
                           Vector tau, std::size_t dim_local, std::size_t dim_coupling,
                           AuxiliaryForward z_forward)
    : a_(a),
      b_(b),
      eta_(std::move(eta)),
      zeta_(std::move(zeta)),
      n_(dim_local),
      m_(dim_coupling),
      z_forward_(z_forward) {
  if (!validate_schedule(a_, b_)) {
    throw std::invalid_argument("schedule: exponents violate a, b in (0,1), a + b < 1, a > b");
  }
  const std::size_t N = eta_.size();
  if (N == 0) throw std::invalid_argument("schedule: no agents");
  if (zeta_.size() != N * (n_ + 2 * m_)) {
    throw std::invalid_argument("schedule: need one zeta per stacked coordinate");
  }
  gamma_ = broadcast(gamma, N, "gamma");
  nu_ = broadcast(nu, N, "nu");
  tau_ = broadcast(tau, N, "tau");
  for (const auto* v : {&eta_, &zeta_, &gamma_, &nu_, &tau_}) {
    for (double s : *v) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw std::invalid_argument("schedule: offsets and scalings must be positive");
      }
    }
  }
}

StepSchedule StepSchedule::sample(const ScheduleOptions& options, std::size_t num_agents,
                                  std::size_t dim_local, std::size_t dim_coupling,
                                  RandomStream& rng) {
  const auto issues = options.issues();
  if (!issues.empty()) throw std::invalid_argument("schedule: " + issues.front());
  Vector eta(num_agents);
  for (auto& e : eta) {
    e = options.common_eta ? options.eta_lo : rng.uniform(options.eta_lo, options.eta_hi);
  }
  Vector zeta(num_agents * (dim_local + 2 * dim_coupling));
  for (auto& z : zeta) {
    z = options.common_zeta ? options.zeta_lo : rng.uniform(options.zeta_lo, options.zeta_hi);
  }
  return StepSchedule(options.a, options.b, std::move(eta), std::move(zeta), options.gamma,
                      options.nu, options.tau, dim_local, dim_coupling, options.z_forward);
}

double StepSchedule::alpha(std::size_t agent, std::size_t k) const {
  return step_size(k, eta_.at(agent), a_);
}

double StepSchedule::epsilon(std::size_t coord, std::size_t k) const {
  return step_size(k, zeta_.at(coord), b_);
}

double StepSchedule::alpha_max(std::size_t k) const {
  return step_size(k, *std::min_element(eta_.begin(), eta_.end()), a_);
}

double StepSchedule::epsilon_min(std::size_t k) const {
  return step_size(k, *std::max_element(zeta_.begin(), zeta_.end()), b_);
}

AgentState agent_update(std::size_t agent, const GameSpec& game, const MultiplierGraph& graph,
                        const std::vector<AgentState>& states, const Vector& sampled_gradient,
                        const StepSchedule& schedule, std::size_t k) {
  const std::size_t n = game.dim_local, m = game.dim_coupling;
  const AgentState& self = states.at(agent);
  if (sampled_gradient.size() != n || self.x.size() != n || self.z.size() != m ||
      self.lambda.size() != m) {
    throw std::invalid_argument("agent_update: dimension mismatch");
  }
  require_finite(sampled_gradient, k, "sampled gradient");
  require_finite(self.x, k, "primal state");
  require_finite(self.z, k, "auxiliary state");
  require_finite(self.lambda, k, "dual state");

  const double alpha = schedule.alpha(agent, k);

  // Neighbor disagreements sum_j w_ij (v_i - v_j) for lambda and z.
  Vector lambda_dis(m, 0.0), z_dis(m, 0.0);
  for (std::size_t j : graph.neighbors(agent)) {
    const double w = graph.weight(agent, j);
    const AgentState& other = states[j];
    for (std::size_t r = 0; r < m; ++r) {
      lambda_dis[r] += w * (self.lambda[r] - other.lambda[r]);
      z_dis[r] += w * (self.z[r] - other.z[r]);
    }
  }

  AgentState next;

  const Vector coupling_grad = game.coupling.local_gradient_transpose(agent, self.lambda);
  Vector x_step(n);
  const double gx = alpha * schedule.gamma(agent);
  for (std::size_t j = 0; j < n; ++j) {
    const double eps = schedule.epsilon(schedule.x_coord(agent, j), k);
    x_step[j] = self.x[j] - gx * (sampled_gradient[j] + coupling_grad[j] + eps * self.x[j]);
  }
  next.x = project_box(x_step, game.local_sets.at(agent));

  const Vector& z_forward =
      schedule.z_forward() == AuxiliaryForward::Dual ? lambda_dis : z_dis;
  next.z.resize(m);
  const double gz = alpha * schedule.nu(agent);
  for (std::size_t r = 0; r < m; ++r) {
    const double eps = schedule.epsilon(schedule.z_coord(agent, r), k);
    next.z[r] = self.z[r] - gz * (z_forward[r] + eps * self.z[r]);
  }

  const Vector g_local = game.coupling.local_value(agent, self.x);
  Vector lambda_step(m);
  const double gl = alpha * schedule.tau(agent);
  for (std::size_t r = 0; r < m; ++r) {
    const double eps = schedule.epsilon(schedule.lambda_coord(agent, r), k);
    lambda_step[r] =
        self.lambda[r] + gl * (g_local[r] - eps * self.lambda[r] + z_dis[r] - lambda_dis[r]);
  }
  next.lambda = project_nonneg(lambda_step);

  require_finite(next.x, k, "primal update");
  require_finite(next.z, k, "auxiliary update");
  require_finite(next.lambda, k, "dual update");
  return next;
}

Vector stack_states(const std::vector<AgentState>& states) {
  Vector u;
  for (const auto& s : states) u.insert(u.end(), s.x.begin(), s.x.end());
  for (const auto& s : states) u.insert(u.end(), s.z.begin(), s.z.end());
  for (const auto& s : states) u.insert(u.end(), s.lambda.begin(), s.lambda.end());
  return u;
}

std::vector<AgentState> unstack_states(const Vector& u, std::size_t num_agents,
                                       std::size_t dim_local, std::size_t dim_coupling) {
  const std::size_t N = num_agents, n = dim_local, m = dim_coupling;
  if (u.size() != N * (n + 2 * m)) throw std::invalid_argument("unstack_states: bad length");
  std::vector<AgentState> out(N);
  auto at = [&](std::size_t offset) { return u.begin() + static_cast<std::ptrdiff_t>(offset); };
  for (std::size_t i = 0; i < N; ++i) {
    out[i].x.assign(at(i * n), at((i + 1) * n));
    out[i].z.assign(at(N * n + i * m), at(N * n + (i + 1) * m));
    out[i].lambda.assign(at(N * (n + m) + i * m), at(N * (n + m) + (i + 1) * m));
  }
  return out;
}

std::vector<AgentState> compact_step(const GameSpec& game, const MultiplierGraph& graph,
                                     const std::vector<AgentState>& states,
                                     const BlockVector& sampled_gradients,
                                     const StepSchedule& schedule, std::size_t k) {
  const std::size_t N = game.num_agents, n = game.dim_local, m = game.dim_coupling;
  const std::size_t nx = N * n, nm = N * m, T = nx + 2 * nm;
  if (states.size() != N || sampled_gradients.size() != N || schedule.stacked_dim() != T) {
    throw std::invalid_argument("compact_step: dimension mismatch");
  }
  const Vector u = stack_states(states);
  require_finite(u, k, "stacked state");
  const Vector F = flatten(sampled_gradients);
  if (F.size() != nx) throw std::invalid_argument("compact_step: gradient dimension mismatch");
  require_finite(F, k, "sampled gradient");

  // L kron I_m
  const LaplacianView lap = laplacian(graph);
  Matrix bigL(nm, nm);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t r = 0; r < m; ++r) bigL(i * m + r, j * m + r) = lap.L(i, j);
    }
  }
  // grad G = blkdiag(A_i), G(x) = col(g_i(x_i))
  Matrix gradG(nm, nx);
  Vector G(nm);
  for (std::size_t i = 0; i < N; ++i) {
    const Matrix& A = game.coupling.A[i];
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < n; ++c) gradG(i * m + r, i * n + c) = A(r, c);
      G[i * m + r] = -game.coupling.b[i][r];
    }
  }
  const std::span<const double> x(u.data(), nx);
  const std::span<const double> z(u.data() + nx, nm);
  const std::span<const double> lambda(u.data() + nx + nm, nm);
  const Vector Ax = gradG.apply(x);
  for (std::size_t r = 0; r < nm; ++r) G[r] += Ax[r];

  const Vector Llambda = bigL.apply(lambda);
  const Vector Lz = bigL.apply(z);
  const Vector gradGt_lambda = gradG.apply_transpose(lambda);

  Vector A_hat(T);
  for (std::size_t c = 0; c < nx; ++c) A_hat[c] = F[c] + gradGt_lambda[c];
  const Vector& z_row = schedule.z_forward() == AuxiliaryForward::Dual ? Llambda : Lz;
  for (std::size_t r = 0; r < nm; ++r) {
    A_hat[nx + r] = z_row[r];
    A_hat[nx + nm + r] = Llambda[r] - G[r] - Lz[r];
  }

  // Phi_k^-1 = diag(alpha_i gamma_i, alpha_i nu_i, alpha_i tau_i)
  Vector phi_inv(T);
  for (std::size_t i = 0; i < N; ++i) {
    const double alpha = schedule.alpha(i, k);
    for (std::size_t c = 0; c < n; ++c) phi_inv[schedule.x_coord(i, c)] = alpha * schedule.gamma(i);
    for (std::size_t r = 0; r < m; ++r) {
      phi_inv[schedule.z_coord(i, r)] = alpha * schedule.nu(i);
      phi_inv[schedule.lambda_coord(i, r)] = alpha * schedule.tau(i);
    }
  }

  Vector w(T);
  for (std::size_t c = 0; c < T; ++c) {
    w[c] = u[c] - phi_inv[c] * (A_hat[c] + schedule.epsilon(c, k) * u[c]);
  }

  // Resolvent of the normal cones: N_Omega on x, 0 on z, N_{R+} on lambda.
  std::vector<AgentState> next = unstack_states(w, N, n, m);
  for (std::size_t i = 0; i < N; ++i) {
    next[i].x = project_box(next[i].x, game.local_sets[i]);
    next[i].lambda = project_nonneg(next[i].lambda);
  }
  require_finite(stack_states(next), k, "compact update");
  return next;
}

SampleSets draw_sample_sets(const GameSpec& game, std::size_t count, std::uint64_t seed,
                            std::uint64_t stream) {
  RandomStream rng(seed, stream);
  SampleSets sets(game.num_agents);
  for (std::size_t i = 0; i < game.num_agents; ++i) {
    sets[i].reserve(count);
    for (std::size_t s = 0; s < count; ++s) sets[i].push_back(game.oracle->draw_sample(i, rng));
  }
  return sets;
}

ResidualRow residuals(const std::vector<AgentState>& states, const GameSpec& game,
                      const BlockVector* reference, const SampleSets& samples) {
  const std::size_t N = game.num_agents, m = game.dim_coupling;
  if (samples.size() != N) throw std::invalid_argument("residuals: need a sample set per agent");
  for (const auto& s : samples) {
    if (s.empty()) throw std::invalid_argument("residuals: sample count must be at least 1");
  }
  ResidualRow row;

  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      for (std::size_t r = 0; r < m; ++r) {
        row.consensus =
            std::max(row.consensus, std::abs(states[i].lambda[r] - states[j].lambda[r]));
      }
    }
  }

  BlockVector x(N);
  for (std::size_t i = 0; i < N; ++i) x[i] = states[i].x;
  const Vector g = coupling_value(game.coupling, x);
  for (double v : g) row.feasibility = std::max(row.feasibility, std::max(0.0, v));

  Vector lambda_mean(m, 0.0);
  for (const auto& s : states) {
    for (std::size_t r = 0; r < m; ++r) lambda_mean[r] += s.lambda[r] / static_cast<double>(N);
  }
  double nat_sq = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const Vector F = game.oracle->mean_gradient(i, x, samples[i]);
    const Vector Atl = game.coupling.local_gradient_transpose(i, lambda_mean);
    Vector trial(x[i].size());
    for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = x[i][j] - F[j] - Atl[j];
    const Vector proj = project_box(trial, game.local_sets[i]);
    for (std::size_t j = 0; j < trial.size(); ++j) {
      const double d = x[i][j] - proj[j];
      nat_sq += d * d;
    }
  }
  row.natural = std::sqrt(nat_sq);

  if (reference) {
    const Vector xf = flatten(x), rf = flatten(*reference);
    if (xf.size() != rf.size()) throw std::invalid_argument("residuals: reference has wrong size");
    Vector diff(xf.size());
    for (std::size_t c = 0; c < xf.size(); ++c) diff[c] = xf[c] - rf[c];
    row.ref_dist = norm2(diff) / norm2(rf);
  } else {
    row.ref_dist = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

BlockVector RunRecord::final_primal() const {
  BlockVector x;
  for (const auto& s : final_states) x.push_back(s.x);
  return x;
}

TikhonovSolver::TikhonovSolver(GameSpec game, MultiplierGraph graph,
                               const ScheduleOptions& schedule, SolverOptions options,
                               std::uint64_t seed)
    : game_(std::move(game)),
      graph_(std::move(graph)),
      schedule_([&] {
        RandomStream offsets(seed, streams::kOffsets);
        return StepSchedule::sample(schedule, game_.num_agents, game_.dim_local,
                                    game_.dim_coupling, offsets);
      }()),
      options_(options),
      seed_(seed) {
  if (graph_.size() != game_.num_agents) {
    throw std::invalid_argument("solver: graph size differs from the number of agents");
  }
  if (options_.log_interval == 0) throw std::invalid_argument("solver: log_interval must be >= 1");
  if (options_.residual_samples == 0) {
    throw std::invalid_argument("solver: residual_samples must be >= 1");
  }
  for (std::size_t i = 0; i < game_.num_agents; ++i) agent_streams_.emplace_back(seed, i);
  const BlockVector x0 = options_.initial == InitialPoint::Midpoint ? box_midpoints(game_)
                                                                     : box_lower_corners(game_);
  for (std::size_t i = 0; i < game_.num_agents; ++i) {
    states_.push_back(AgentState{x0[i], Vector(game_.dim_coupling, 0.0),
                                 Vector(game_.dim_coupling, 0.0)});
  }
}

void TikhonovSolver::set_states(std::vector<AgentState> states) {
  if (states.size() != game_.num_agents) throw std::invalid_argument("set_states: wrong count");
  states_ = std::move(states);
}

BlockVector TikhonovSolver::sample_gradients() {
  BlockVector x(game_.num_agents);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = states_[i].x;
  BlockVector grads(game_.num_agents);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const Vector xi = game_.oracle->draw_sample(i, agent_streams_[i]);
    grads[i] = game_.oracle->gradient(i, x, xi);
  }
  return grads;
}

void TikhonovSolver::apply_round(const BlockVector& sampled_gradients) {
  std::vector<AgentState> next(game_.num_agents);
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = agent_update(i, game_, graph_, states_, sampled_gradients[i], schedule_, k_);
  }
  states_ = std::move(next);
  ++k_;
  check_divergence();
}

void TikhonovSolver::check_divergence() const {
  for (const auto& s : states_) {
    for (const auto* v : {&s.x, &s.z, &s.lambda}) {
      if (norm_inf(*v) > options_.divergence_threshold) {
        throw NumericalFailure(k_, "iterate norm exceeded divergence threshold");
      }
    }
  }
}

RunRecord TikhonovSolver::run(const BlockVector* reference) {
  RunRecord record;
  record.seed = seed_;
  record.generator = std::string(kGeneratorName);
  record.eta = schedule_.eta();
  record.zeta = schedule_.zeta();

  const SampleSets monitor_samples =
      draw_sample_sets(game_, options_.residual_samples, seed_, streams::kMonitor);

  auto log_row = [&](const BlockVector* grads) {
    ResidualRow row = residuals(states_, game_, reference, monitor_samples);
    row.k = k_;
    row.alpha = schedule_.alpha_max(k_);
    row.eps_min = schedule_.epsilon_min(k_);
    if (grads) {
      BlockVector x(game_.num_agents);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = states_[i].x;
      double delta_sq = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const Vector mean = game_.oracle->mean_gradient(i, x, monitor_samples[i]);
        double acc = 0.0;
        for (std::size_t j = 0; j < mean.size(); ++j) {
          const double d = mean[j] - (*grads)[i][j];
          acc += d * d;
        }
        // |.|_Phi with Phi = diag(1/gamma)
        delta_sq += acc / schedule_.gamma(i);
      }
      const double a = schedule_.alpha_max(k_);
      record.error_monitor.weighted_sum +=
          static_cast<double>(options_.log_interval) * a * a * delta_sq;
      record.error_monitor.last_ratio = a / row.eps_min * delta_sq;
      ++record.error_monitor.observations;
    }
    record.rows.push_back(row);
    if (options_.record_states) {
      BlockVector x;
      for (const auto& s : states_) x.push_back(s.x);
      record.primal_trajectory.push_back(std::move(x));
    }
    return row;
  };

  record.stop_reason = "budget";
  while (k_ < options_.max_iterations) {
    const BlockVector grads = sample_gradients();
    if (k_ % options_.log_interval == 0) {
      const ResidualRow row = log_row(&grads);
      if (k_ >= options_.min_iterations && row.consensus <= options_.consensus_tol &&
          row.feasibility <= options_.feasibility_tol && row.natural <= options_.natural_tol) {
        record.stop_reason = "tolerance";
        break;
      }
    }
    apply_round(grads);
  }
  if (record.stop_reason == "budget" &&
      (record.rows.empty() || record.rows.back().k != k_)) {
    log_row(nullptr);
  }
  record.iterations = k_;
  record.final_states = states_;
  return record;
}

RunRecord run(const GameSpec& game, const MultiplierGraph& graph,
              const ScheduleOptions& schedule, std::uint64_t seed, const SolverOptions& options,
              const BlockVector* reference) {
  std::vector<std::string> problems;
  for (const auto& f : validate_game(game).failures()) problems.push_back(f);
  if (!is_connected(graph)) problems.push_back("multiplier graph is not connected");
  for (const auto& s : schedule.issues()) problems.push_back("schedule: " + s);
  if (!problems.empty()) {
    std::string msg = "run: invalid setup";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw std::invalid_argument(msg);
  }
  TikhonovSolver solver(game, graph, schedule, options, seed);
  return solver.run(reference);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_run_csv(const RunRecord& record, std::ostream& out) {
  out << "k,alpha,eps_min,consensus_res,feas_res,nat_res,ref_dist\n";
  for (const auto& r : record.rows) {
    out << r.k << ',' << format_number(r.alpha) << ',' << format_number(r.eps_min) << ','
        << format_number(r.consensus) << ',' << format_number(r.feasibility) << ','
        << format_number(r.natural) << ',' << format_number(r.ref_dist) << '\n';
  }
}

}  // namespace sgnep
