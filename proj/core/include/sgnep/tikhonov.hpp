#pragma once

// Distributed stochastic Tikhonov forward-backward iteration for SGNEPs.
//
// Each agent keeps (x_i, z_i, lambda_i). One synchronous round uses a single
// fresh sample per agent and vanishing steps alpha_i^k = (k + eta_i)^-a with
// vanishing regularization eps_j^k = (k + zeta_j)^-b on every coordinate j of
// the stacked state u = col(x, z, lambda):
//
//   x_i      <- P_Omega_i [x_i - alpha gamma_i (F_i + A_i^T lambda_i + eps x_i)]
//   z_i      <- z_i - alpha nu_i ([L lambda]_i + eps z_i)
//   lambda_i <- P_+ [lambda_i + alpha tau_i (g_i(x_i) - eps lambda_i
//                                           + [L z]_i - [L lambda]_i)]
//
// `agent_update` is the per-agent form; `compact_step` evaluates the same
// round as one preconditioned forward-backward step on the stacked operator
// and exists to cross-check it.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sgnep/errors.hpp"
#include "sgnep/game.hpp"
#include "sgnep/graph.hpp"
#include "sgnep/linalg.hpp"
#include "sgnep/random.hpp"

namespace sgnep {

struct AgentState {
  Vector x;
  Vector z;
  Vector lambda;

  bool operator==(const AgentState&) const = default;
};

/// (k + offset)^-exponent. Throws std::invalid_argument unless offset > 0
/// and exponent lies in (0, 1).
double step_size(std::size_t k, double offset, double exponent);

/// a, b in (0, 1), a + b < 1 and a > b.
bool validate_schedule(double a, double b);

/// Which disagreement drives the z-update. `Dual` is the per-agent
/// iteration as written; `Auxiliary` uses [L z]_i instead and is kept only
/// for comparison runs.
enum class AuxiliaryForward { Dual, Auxiliary };

struct ScheduleOptions {
  double a = 0.7;
  double b = 0.2;
  double eta_lo = 1e8;
  double eta_hi = 1.1e8;
  double zeta_lo = 1e6;
  double zeta_hi = 1.1e6;
  /// Every agent uses eta_lo instead of a sampled offset.
  bool common_eta = false;
  /// Every coordinate uses zeta_lo instead of a sampled offset.
  bool common_zeta = false;
  /// Per-agent scalings; empty means 1 for every agent, one entry is
  /// broadcast.
  Vector gamma;
  Vector nu;
  Vector tau;
  AuxiliaryForward z_forward = AuxiliaryForward::Dual;

  /// Every violated constraint, empty when valid.
  std::vector<std::string> issues() const;
};

/// Realized schedule: offsets are sampled once, then fixed.
class StepSchedule {
 public:
  StepSchedule(double a, double b, Vector eta, Vector zeta, Vector gamma, Vector nu, Vector tau,
               std::size_t dim_local, std::size_t dim_coupling,
               AuxiliaryForward z_forward = AuxiliaryForward::Dual);

  /// Draws eta_i on [eta_lo, eta_hi] and zeta_j on [zeta_lo, zeta_hi].
  static StepSchedule sample(const ScheduleOptions& options, std::size_t num_agents,
                             std::size_t dim_local, std::size_t dim_coupling, RandomStream& rng);

  double a() const { return a_; }
  double b() const { return b_; }
  std::size_t num_agents() const { return eta_.size(); }
  std::size_t dim_local() const { return n_; }
  std::size_t dim_coupling() const { return m_; }
  /// nN + 2Nm
  std::size_t stacked_dim() const { return zeta_.size(); }

  double alpha(std::size_t agent, std::size_t k) const;
  double epsilon(std::size_t coord, std::size_t k) const;
  double alpha_max(std::size_t k) const;
  double epsilon_min(std::size_t k) const;

  double gamma(std::size_t agent) const { return gamma_[agent]; }
  double nu(std::size_t agent) const { return nu_[agent]; }
  double tau(std::size_t agent) const { return tau_[agent]; }
  AuxiliaryForward z_forward() const { return z_forward_; }

  const Vector& eta() const { return eta_; }
  const Vector& zeta() const { return zeta_; }

  // Stacked coordinate layout: x blocks, then z blocks, then lambda blocks.
  std::size_t x_coord(std::size_t agent, std::size_t j) const { return agent * n_ + j; }
  std::size_t z_coord(std::size_t agent, std::size_t j) const {
    return num_agents() * n_ + agent * m_ + j;
  }
  std::size_t lambda_coord(std::size_t agent, std::size_t j) const {
    return num_agents() * (n_ + m_) + agent * m_ + j;
  }

 private:
  double a_, b_;
  Vector eta_, zeta_, gamma_, nu_, tau_;
  std::size_t n_, m_;
  AuxiliaryForward z_forward_;
};

/// One agent's round-k update. Reads only round-k values.
/// Throws NumericalFailure on non-finite inputs or outputs.
AgentState agent_update(std::size_t agent, const GameSpec& game, const MultiplierGraph& graph,
                        const std::vector<AgentState>& states, const Vector& sampled_gradient,
                        const StepSchedule& schedule, std::size_t k);

/// Stacked state u = col(x, z, lambda).
Vector stack_states(const std::vector<AgentState>& states);
std::vector<AgentState> unstack_states(const Vector& u, std::size_t num_agents,
                                       std::size_t dim_local, std::size_t dim_coupling);

/// u+ = (Id + Phi_k^-1 B)^-1 (u - Phi_k^-1 (A_hat u + eps^k u)) with dense
/// stacked operators; the resolvent is the blockwise projection.
std::vector<AgentState> compact_step(const GameSpec& game, const MultiplierGraph& graph,
                                     const std::vector<AgentState>& states,
                                     const BlockVector& sampled_gradients,
                                     const StepSchedule& schedule, std::size_t k);

struct ResidualRow {
  std::size_t k = 0;
  double alpha = 0.0;    ///< max_i alpha_i^k
  double eps_min = 0.0;  ///< min_j eps_j^k
  double consensus = 0.0;
  double feasibility = 0.0;
  double natural = 0.0;
  double ref_dist = 0.0;  ///< NaN without a reference
};

/// Per-agent batches of uncertainty samples for SAA estimates.
using SampleSets = std::vector<std::vector<Vector>>;

SampleSets draw_sample_sets(const GameSpec& game, std::size_t count, std::uint64_t seed,
                            std::uint64_t stream);

/// Consensus max_{i,j} |lambda_i - lambda_j|_inf, coupling violation
/// |max(0, g(x))|_inf, SAA natural residual
/// |x - P_Omega(x - F_M(x) - grad g^T mean(lambda))|_2 and, with a reference,
/// |x - x*| / |x*|.
ResidualRow residuals(const std::vector<AgentState>& states, const GameSpec& game,
                      const BlockVector* reference, const SampleSets& samples);

enum class InitialPoint { Midpoint, Lower };

struct SolverOptions {
  std::size_t max_iterations = 200000;
  std::size_t min_iterations = 1000;
  std::size_t log_interval = 100;
  double consensus_tol = 1e-3;
  double feasibility_tol = 1e-3;
  double natural_tol = 1e-2;
  std::size_t residual_samples = 200;
  double divergence_threshold = 1e12;
  InitialPoint initial = InitialPoint::Midpoint;
  bool record_states = false;
};

/// Estimated stochastic error of the single-sample pseudogradient,
/// measured against the SAA mean at logged iterations.
struct ErrorMonitor {
  /// Riemann estimate of sum_k alpha_k^2 |Delta^k|_Phi^2.
  double weighted_sum = 0.0;
  /// Last (alpha / eps_min) |Delta|_Phi^2.
  double last_ratio = 0.0;
  std::size_t observations = 0;
};

struct RunRecord {
  std::vector<ResidualRow> rows;
  std::vector<BlockVector> primal_trajectory;  ///< one per row when recorded
  std::vector<AgentState> final_states;
  std::size_t iterations = 0;
  std::string stop_reason;  ///< "tolerance" or "budget"
  std::uint64_t seed = 0;
  std::string generator;
  Vector eta;
  Vector zeta;
  ErrorMonitor error_monitor;

  BlockVector final_primal() const;
};

/// Stateful driver for synchronous rounds. Agent i draws its samples from
/// stream i; offsets come from the offsets stream; residual SAA batches from
/// the monitor stream.
class TikhonovSolver {
 public:
  TikhonovSolver(GameSpec game, MultiplierGraph graph, const ScheduleOptions& schedule,
                 SolverOptions options, std::uint64_t seed);

  const std::vector<AgentState>& states() const { return states_; }
  void set_states(std::vector<AgentState> states);
  std::size_t iteration() const { return k_; }
  const StepSchedule& schedule() const { return schedule_; }
  const GameSpec& game() const { return game_; }
  const MultiplierGraph& graph() const { return graph_; }

  /// Draws one sample per agent and returns F_i(x^k, xi_i^k).
  BlockVector sample_gradients();
  /// Applies one round with the given sampled gradients and advances k.
  void apply_round(const BlockVector& sampled_gradients);

  RunRecord run(const BlockVector* reference = nullptr);

 private:
  void check_divergence() const;

  GameSpec game_;
  MultiplierGraph graph_;
  StepSchedule schedule_;
  SolverOptions options_;
  std::uint64_t seed_;
  std::vector<RandomStream> agent_streams_;
  std::vector<AgentState> states_;
  std::size_t k_ = 0;
};

/// Validates game, graph and schedule, then runs to the stop rule.
/// Throws std::invalid_argument on failed validation.
RunRecord run(const GameSpec& game, const MultiplierGraph& graph,
              const ScheduleOptions& schedule, std::uint64_t seed, const SolverOptions& options,
              const BlockVector* reference = nullptr);

/// Header: k,alpha,eps_min,consensus_res,feas_res,nat_res,ref_dist
void write_run_csv(const RunRecord& record, std::ostream& out);

/// printf("%.12g") with "nan"/"inf" spelled out; used by every text artifact.
std::string format_number(double v);

}  // namespace sgnep
