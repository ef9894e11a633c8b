#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "fixtures.hpp"
#include "sgnep/baselines.hpp"
#include "sgnep/tikhonov.hpp"

using namespace sgnep;
using sgnep::testing::max_abs_diff;

namespace {

class ConstantOracle final : public StochasticGradientOracle {
 public:
  explicit ConstantOracle(double value) : value_(value) {}
  Vector gradient(std::size_t agent, const BlockVector& x, std::span<const double>) const override {
    return Vector(x[agent].size(), value_);
  }
  Vector draw_sample(std::size_t, RandomStream&) const override { return {}; }
  bool is_deterministic() const override { return true; }

 private:
  double value_;
};

GameSpec scalar_game(std::size_t N, double grad, double A, double b, Box box) {
  GameSpec g;
  g.num_agents = N;
  g.dim_local = 1;
  g.dim_coupling = 1;
  for (std::size_t i = 0; i < N; ++i) {
    g.local_sets.push_back(box);
    g.coupling.A.push_back(Matrix::identity(1, A));
    g.coupling.b.push_back(Vector{b});
  }
  g.oracle = std::make_shared<ConstantOracle>(grad);
  return g;
}

StepSchedule realize(const ScheduleOptions& o, const GameSpec& g, std::uint64_t seed = 1) {
  RandomStream rng(seed, streams::kOffsets);
  return StepSchedule::sample(o, g.num_agents, g.dim_local, g.dim_coupling, rng);
}

std::vector<AgentState> distributed_round(const GameSpec& g, const MultiplierGraph& graph,
                                          const std::vector<AgentState>& s,
                                          const BlockVector& grads, const StepSchedule& sched,
                                          std::size_t k) {
  std::vector<AgentState> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.push_back(agent_update(i, g, graph, s, grads[i], sched, k));
  }
  return out;
}

// KKT point of the tiny market spread over agents: x_i = x*_i, lambda_i =
// lambda*, and z solving [L z]_i = -g_i(x*_i) so every row is stationary.
std::vector<AgentState> equilibrium_states(const GameSpec& g, const MultiplierGraph& graph,
                                           const ReferenceSolution& ref) {
  const std::size_t N = g.num_agents;
  const LaplacianView lv = laplacian(graph);
  Eigen::MatrixXd L(N, N);
  Eigen::VectorXd rhs(N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) L(i, j) = lv.L(i, j);
    rhs(i) = -g.coupling.local_value(i, ref.x_star[i])[0];
  }
  const Eigen::VectorXd z = L.completeOrthogonalDecomposition().pseudoInverse() * rhs;
  std::vector<AgentState> s(N);
  for (std::size_t i = 0; i < N; ++i) s[i] = AgentState{ref.x_star[i], {z(i)}, ref.lambda_star};
  return s;
}

}  // namespace

TEST(StepSize, Examples) {
  EXPECT_DOUBLE_EQ(step_size(0, 1.0, 0.5), 1.0);
  EXPECT_NEAR(step_size(0, 1e8, 0.7), std::pow(10.0, -5.6), 1e-18);
  EXPECT_NEAR(step_size(0, 1e8, 0.7), 2.5119e-6, 1e-10);
  EXPECT_THROW(step_size(3, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(step_size(3, 0.0, 0.5), std::invalid_argument);
  EXPECT_THROW(step_size(3, 1.0, 0.0), std::invalid_argument);
}

TEST(ValidateSchedule, Examples) {
  EXPECT_TRUE(validate_schedule(0.7, 0.2));
  EXPECT_FALSE(validate_schedule(0.5, 0.6));
  EXPECT_FALSE(validate_schedule(0.7, 0.35));
  EXPECT_FALSE(validate_schedule(1.0, 0.0));
}

TEST(StepSchedule, OffsetsDrawnInsideIntervals) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  const StepSchedule s = realize(ScheduleOptions{}, g);
  EXPECT_EQ(s.stacked_dim(), 5u * 10u + 2u * 5u * 10u);
  for (double e : s.eta()) {
    EXPECT_GE(e, 1e8);
    EXPECT_LT(e, 1.1e8);
  }
  for (double z : s.zeta()) {
    EXPECT_GE(z, 1e6);
    EXPECT_LT(z, 1.1e6);
  }
  ScheduleOptions common;
  common.common_eta = true;
  common.common_zeta = true;
  const StepSchedule c = realize(common, g);
  for (double e : c.eta()) EXPECT_EQ(e, 1e8);
  for (double z : c.zeta()) EXPECT_EQ(z, 1e6);
}

TEST(StepSchedule, StrictlyDecreasing) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  for (const ScheduleOptions& o : {ScheduleOptions{}, sgnep::testing::tiny_schedule()}) {
    const StepSchedule s = realize(o, g);
    for (std::size_t k = 0; k < 10000; ++k) {
      ASSERT_LT(s.alpha_max(k + 1), s.alpha_max(k));
      ASSERT_LT(s.epsilon_min(k + 1), s.epsilon_min(k));
      ASSERT_LT(s.alpha(3, k + 1), s.alpha(3, k));
      ASSERT_LT(s.epsilon(17, k + 1), s.epsilon(17, k));
    }
  }
}

// With equal offsets, (k + c)^(b - a) decreases for every k when a > b.
TEST(StepSchedule, RatioDecreasesWithEqualOffsets) {
  const GameSpec g = ridehail::build_game(sgnep::testing::tiny_market());
  for (double offset : {1.0, 1e3, 1e6}) {
    ScheduleOptions o = sgnep::testing::tiny_schedule();
    o.eta_lo = o.eta_hi = o.zeta_lo = o.zeta_hi = offset;
    o.common_eta = o.common_zeta = true;
    const StepSchedule s = realize(o, g);
    for (std::size_t k = 0; k < 10000; ++k) {
      ASSERT_LT(s.alpha_max(k + 1) / s.epsilon_min(k + 1), s.alpha_max(k) / s.epsilon_min(k));
    }
  }
}

// The ratio decreases only once a (k + zeta) > b (k + eta); with eta = 1e8
// and zeta = 1e6 that is k > (b eta - a zeta) / (a - b), about 3.9e7.
TEST(StepSchedule, RatioGrowsEarlyWhenEtaDominatesZeta) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  ScheduleOptions o;
  o.common_eta = o.common_zeta = true;
  const StepSchedule s = realize(o, g);
  EXPECT_GT(s.alpha_max(10000) / s.epsilon_min(10000), s.alpha_max(0) / s.epsilon_min(0));
  const double turn = (0.2 * 1e8 - 0.7 * 1e6) / 0.5;
  const auto k = static_cast<std::size_t>(turn);
  EXPECT_LT(s.alpha_max(4 * k) / s.epsilon_min(4 * k), s.alpha_max(2 * k) / s.epsilon_min(2 * k));
}

TEST(ScheduleOptions, IssuesListed) {
  ScheduleOptions o;
  o.a = 0.5;
  o.b = 0.6;
  o.eta_lo = -1.0;
  o.tau = {0.0};
  const auto issues = o.issues();
  EXPECT_EQ(issues.size(), 3u);
  EXPECT_NE(issues.front().find("a > b"), std::string::npos);
}

TEST(AgentUpdate, StationaryWhenNothingDrives) {
  const GameSpec g = scalar_game(3, 0.0, 0.0, 0.0, Box{{0.0}, {10.0}});
  const MultiplierGraph graph = MultiplierGraph::ring(3);
  const StepSchedule s = realize(sgnep::testing::frozen_schedule(false, true), g);
  std::vector<AgentState> states(3, AgentState{{4.0}, {0.0}, {0.0}});
  states[1].x = {7.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const AgentState next = agent_update(i, g, graph, states, {0.0}, s, 0);
    EXPECT_NEAR(next.x[0], states[i].x[0], 1e-90);
    EXPECT_EQ(next.z, states[i].z);
    EXPECT_EQ(next.lambda, states[i].lambda);
  }
}

TEST(AgentUpdate, ZeroStepLeavesStateUnchanged) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  const MultiplierGraph graph = MultiplierGraph::ring(5);
  const StepSchedule s = realize(sgnep::testing::frozen_schedule(true, false), g);
  RandomStream rng(31, 0);
  for (int t = 0; t < 20; ++t) {
    const auto states = sgnep::testing::random_states(g, rng);
    const auto grads = sgnep::testing::sample_gradients(g, states, rng);
    EXPECT_EQ(distributed_round(g, graph, states, grads, s, 0), states);
    EXPECT_EQ(compact_step(g, graph, states, grads, s, 0), states);
  }
}

TEST(AgentUpdate, SingleAgentByHand) {
  // g_1(x) = x - 2, so g_1(1) = -1; alpha = (0 + 4)^-0.5 = 0.5.
  const GameSpec g = scalar_game(1, 2.0, 1.0, 2.0, Box{{0.0}, {10.0}});
  const MultiplierGraph graph(Matrix(1, 1));
  const StepSchedule s(0.5, 0.35, {4.0}, Vector(3, 1e300), {1.0}, {1.0}, {1.0}, 1, 1);
  ASSERT_DOUBLE_EQ(s.alpha(0, 0), 0.5);
  const AgentState next = agent_update(0, g, graph, {AgentState{{1.0}, {0.0}, {0.0}}}, {2.0}, s, 0);
  EXPECT_NEAR(next.x[0], 0.0, 1e-90);
  EXPECT_EQ(next.z[0], 0.0);
  EXPECT_EQ(next.lambda[0], 0.0);
}

TEST(AgentUpdate, NonFiniteInputRaisesWithIteration) {
  const GameSpec g = ridehail::build_game(sgnep::testing::tiny_market());
  const MultiplierGraph graph = MultiplierGraph::complete(2);
  const StepSchedule s = realize(sgnep::testing::tiny_schedule(), g);
  std::vector<AgentState> states(2, AgentState{{5.0}, {0.0}, {0.0}});
  try {
    agent_update(0, g, graph, states, {std::numeric_limits<double>::quiet_NaN()}, s, 17);
    FAIL() << "expected NumericalFailure";
  } catch (const NumericalFailure& e) {
    EXPECT_EQ(e.iteration(), 17u);
  }
  states[1].lambda = {std::numeric_limits<double>::infinity()};
  EXPECT_THROW(agent_update(0, g, graph, states, {1.0}, s, 3), NumericalFailure);
}

TEST(CompactStep, MatchesDistributedRoundOnRandomStates) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  const MultiplierGraph graph = sgnep::testing::scaled_ring(5, 3.0);
  RandomStream rng(5, 0);
  for (auto fwd : {AuxiliaryForward::Dual, AuxiliaryForward::Auxiliary}) {
    ScheduleOptions o = sgnep::testing::tiny_schedule();
    o.z_forward = fwd;
    o.gamma = {0.5, 1.0, 2.0, 1.5, 0.7};
    o.nu = {3.0};
    o.tau = {0.2, 0.4, 0.6, 0.8, 1.0};
    const StepSchedule s = realize(o, g);
    for (int t = 0; t < 100; ++t) {
      const auto states = sgnep::testing::random_states(g, rng);
      const auto grads = sgnep::testing::sample_gradients(g, states, rng);
      const std::size_t k = rng.next_u64() % 1000;
      EXPECT_LE(max_abs_diff(distributed_round(g, graph, states, grads, s, k),
                             compact_step(g, graph, states, grads, s, k)),
                1e-12);
    }
  }
}

TEST(CompactStep, AuxiliaryVariantDiffers) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  const MultiplierGraph graph = MultiplierGraph::ring(5);
  RandomStream rng(6, 0);
  const auto states = sgnep::testing::random_states(g, rng);
  const auto grads = sgnep::testing::sample_gradients(g, states, rng);
  ScheduleOptions o = sgnep::testing::tiny_schedule();
  const auto dual = compact_step(g, graph, states, grads, realize(o, g), 0);
  o.z_forward = AuxiliaryForward::Auxiliary;
  const auto aux = compact_step(g, graph, states, grads, realize(o, g), 0);
  EXPECT_EQ(dual[0].x, aux[0].x);
  EXPECT_GT(max_abs_diff(dual, aux), 1e-6);
}

TEST(StackStates, RoundTrip) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  RandomStream rng(1, 0);
  const auto states = sgnep::testing::random_states(g, rng);
  const Vector u = stack_states(states);
  const StepSchedule s = realize(ScheduleOptions{}, g);
  EXPECT_EQ(u.size(), s.stacked_dim());
  EXPECT_EQ(u[s.z_coord(2, 4)], states[2].z[4]);
  EXPECT_EQ(u[s.lambda_coord(4, 9)], states[4].lambda[9]);
  EXPECT_EQ(unstack_states(u, 5, 10, 10), states);
}

TEST(CompactStep, KktZeroIsFixedPoint) {
  const GameSpec g = ridehail::build_game(sgnep::testing::tiny_market());
  const MultiplierGraph graph = MultiplierGraph::complete(2);
  ReferenceOptions ro;
  ro.samples = 1;
  ro.tol = 1e-13;
  const ReferenceSolution ref = solve_reference(g, ro);
  ASSERT_TRUE(ref.converged);
  const auto u = equilibrium_states(g, graph, ref);
  ScheduleOptions o = sgnep::testing::frozen_schedule(false, true);
  const StepSchedule s = realize(o, g);
  RandomStream rng(1, 0);
  const auto grads = sgnep::testing::sample_gradients(g, u, rng);
  EXPECT_LE(max_abs_diff(compact_step(g, graph, u, grads, s, 0), u), 1e-10);
  EXPECT_LE(max_abs_diff(distributed_round(g, graph, u, grads, s, 0), u), 1e-10);
}

TEST(Residuals, Examples) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  const SampleSets sets = draw_sample_sets(g, 20, 1, streams::kMonitor);
  RandomStream rng(2, 0);
  auto states = sgnep::testing::random_states(g, rng);
  for (auto& s : states) s.lambda = states[0].lambda;
  BlockVector x;
  for (auto& s : states) {
    s.x = g.local_sets[0].lower;
    x.push_back(s.x);
  }
  const ResidualRow row = residuals(states, g, &x, sets);
  EXPECT_EQ(row.consensus, 0.0);
  EXPECT_EQ(row.feasibility, 0.0);
  EXPECT_EQ(row.ref_dist, 0.0);
  EXPECT_TRUE(std::isnan(residuals(states, g, nullptr, sets).ref_dist));
  states[3].lambda[2] += 0.25;
  EXPECT_DOUBLE_EQ(residuals(states, g, &x, sets).consensus, 0.25);
}

TEST(Residuals, SampleCountValidated) {
  const GameSpec g = ridehail::build_game(sgnep::testing::tiny_market());
  SampleSets empty(2);
  std::vector<AgentState> s(2, AgentState{{5.0}, {0.0}, {0.0}});
  EXPECT_THROW(residuals(s, g, nullptr, empty), std::invalid_argument);
}

TEST(Run, SameSeedBitIdentical) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  SolverOptions o;
  o.max_iterations = 3000;
  o.record_states = true;
  const RunRecord a = run(g, MultiplierGraph::ring(5), ScheduleOptions{}, 9, o);
  const RunRecord b = run(g, MultiplierGraph::ring(5), ScheduleOptions{}, 9, o);
  std::ostringstream ca, cb;
  write_run_csv(a, ca);
  write_run_csv(b, cb);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(a.final_states, b.final_states);
  EXPECT_EQ(a.primal_trajectory, b.primal_trajectory);
  EXPECT_EQ(a.eta, b.eta);
  EXPECT_EQ(a.zeta, b.zeta);
  const RunRecord c = run(g, MultiplierGraph::ring(5), ScheduleOptions{}, 10, o);
  EXPECT_NE(a.final_states, c.final_states);
}

TEST(Run, RowsAndCsvLayout) {
  const GameSpec g = ridehail::build_game(sgnep::testing::tiny_market());
  SolverOptions o;
  o.max_iterations = 1050;
  o.log_interval = 100;
  const RunRecord r = run(g, MultiplierGraph::complete(2), sgnep::testing::tiny_schedule(), 1, o);
  EXPECT_EQ(r.stop_reason, "budget");
  EXPECT_EQ(r.iterations, 1050u);
  // Rows at k = 0, 100, ..., 1000 plus the final iterate.
  ASSERT_EQ(r.rows.size(), 12u);
  EXPECT_EQ(r.rows.back().k, 1050u);
  EXPECT_EQ(r.generator, std::string(kGeneratorName));
  std::ostringstream csv;
  write_run_csv(r, csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "k,alpha,eps_min,consensus_res,feas_res,nat_res,ref_dist");
}

TEST(Run, ProjectionSafetyEveryRound) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  TikhonovSolver solver(g, MultiplierGraph::ring(5), sgnep::testing::tiny_schedule(),
                        SolverOptions{}, 4);
  for (int k = 0; k < 500; ++k) {
    solver.apply_round(solver.sample_gradients());
    for (std::size_t i = 0; i < g.num_agents; ++i) {
      ASSERT_TRUE(g.local_sets[i].contains(solver.states()[i].x));
      for (double l : solver.states()[i].lambda) ASSERT_GE(l, 0.0);
    }
  }
}

TEST(Run, StartAtEquilibriumStaysThere) {
  const GameSpec g = ridehail::build_game(sgnep::testing::tiny_market());
  const MultiplierGraph graph = MultiplierGraph::complete(2);
  ReferenceOptions ro;
  ro.samples = 1;
  ro.tol = 1e-13;
  const ReferenceSolution ref = solve_reference(g, ro);
  SolverOptions o;
  o.max_iterations = 2000;
  o.log_interval = 50;
  TikhonovSolver solver(g, graph, sgnep::testing::frozen_schedule(false, true), o, 1);
  solver.set_states(equilibrium_states(g, graph, ref));
  const RunRecord r = solver.run(&ref.x_star);
  for (const auto& row : r.rows) {
    EXPECT_LE(row.consensus, 1e-10);
    EXPECT_LE(row.feasibility, 1e-10);
    EXPECT_LE(row.natural, 1e-10);
    EXPECT_LE(row.ref_dist, 1e-10);
  }
}

TEST(Run, ToleranceStopImpliesConsensus) {
  const GameSpec g = ridehail::build_game(sgnep::testing::tiny_market());
  SolverOptions o;
  o.max_iterations = 200000;
  o.natural_tol = 0.05;
  o.feasibility_tol = 1e-2;
  o.consensus_tol = 1e-3;
  const RunRecord r = run(g, MultiplierGraph::complete(2), sgnep::testing::tiny_schedule(), 2, o);
  ASSERT_EQ(r.stop_reason, "tolerance");
  EXPECT_GE(r.iterations, o.min_iterations);
  double worst = 0.0;
  for (const auto& a : r.final_states) {
    for (const auto& b : r.final_states) {
      for (std::size_t j = 0; j < a.lambda.size(); ++j) {
        worst = std::max(worst, std::abs(a.lambda[j] - b.lambda[j]));
      }
    }
  }
  EXPECT_LE(worst, o.consensus_tol);
}

TEST(Run, DivergenceRaisesWithIteration) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  SolverOptions o;
  o.divergence_threshold = 1.0;
  try {
    run(g, MultiplierGraph::ring(5), ScheduleOptions{}, 1, o);
    FAIL() << "expected NumericalFailure";
  } catch (const NumericalFailure& e) {
    EXPECT_EQ(e.iteration(), 1u);
  }
}

TEST(Run, RejectsInvalidSetup) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  ScheduleOptions bad;
  bad.a = 0.5;
  bad.b = 0.6;
  EXPECT_THROW(run(g, MultiplierGraph::ring(5), bad, 1, SolverOptions{}), std::invalid_argument);
  EXPECT_THROW(run(g, MultiplierGraph(Matrix(5, 5)), ScheduleOptions{}, 1, SolverOptions{}),
               std::invalid_argument);
  EXPECT_THROW(run(g, MultiplierGraph::ring(4), ScheduleOptions{}, 1, SolverOptions{}),
               std::invalid_argument);
}
