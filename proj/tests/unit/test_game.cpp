#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "fixtures.hpp"
#include "sgnep/game.hpp"
#include "sgnep/random.hpp"

using namespace sgnep;

namespace {

// F_i(x) = x_i - target_i, no noise.
class ShiftOracle final : public StochasticGradientOracle {
 public:
  explicit ShiftOracle(BlockVector target) : target_(std::move(target)) {}
  Vector gradient(std::size_t agent, const BlockVector& x, std::span<const double>) const override {
    Vector g(x[agent].size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = x[agent][j] - target_[agent][j];
    return g;
  }
  Vector draw_sample(std::size_t, RandomStream&) const override { return {}; }
  bool is_deterministic() const override { return true; }

 private:
  BlockVector target_;
};

// Two agents in R^1 with box [0, 1] and coupling x_1 + x_2 - cap <= 0.
GameSpec two_agent_game(double cap, Box box = Box{{0.0}, {1.0}}) {
  GameSpec g;
  g.num_agents = 2;
  g.dim_local = 1;
  g.dim_coupling = 1;
  g.local_sets = {box, Box{{0.0}, {1.0}}};
  g.coupling.A = {Matrix::identity(1), Matrix::identity(1)};
  g.coupling.b = {Vector{cap / 2}, Vector{cap / 2}};
  g.oracle = std::make_shared<ShiftOracle>(BlockVector{{0.0}, {0.0}});
  return g;
}

CouplingConstraint price_cap(std::size_t N, double cap) {
  CouplingConstraint cc;
  for (std::size_t i = 0; i < N; ++i) {
    cc.A.push_back(Matrix::identity(1, 1.0 / static_cast<double>(N)));
    cc.b.push_back(Vector{cap / static_cast<double>(N)});
  }
  return cc;
}

}  // namespace

TEST(ProjectBox, ClampsAbove) {
  EXPECT_EQ(project_box(Vector{1.5}, Box{{0.0}, {1.0}}), Vector{1.0});
}

TEST(ProjectBox, InteriorPointFixed) {
  EXPECT_EQ(project_box(Vector{0.5}, Box{{0.0}, {1.0}}), Vector{0.5});
}

TEST(ProjectBox, ClampsBothEnds) {
  EXPECT_EQ(project_box(Vector{-3.0, 7.0}, Box{{0.0, 0.0}, {5.0, 5.0}}), (Vector{0.0, 5.0}));
}

TEST(ProjectBox, InfiniteUpperBound) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(project_box(Vector{1e9}, Box{{0.0}, {inf}}), Vector{1e9});
  EXPECT_FALSE((Box{{0.0}, {inf}}).is_bounded());
}

TEST(ProjectBox, DimensionMismatchThrows) {
  EXPECT_THROW(project_box(Vector{1.0, 2.0}, Box{{0.0}, {1.0}}), std::invalid_argument);
}

TEST(ProjectBox, IdempotentAndNonexpansive) {
  RandomStream rng(11, 0);
  const Box box{{-1.0, 0.0, 2.0}, {1.0, 3.0, 2.5}};
  for (int t = 0; t < 1000; ++t) {
    Vector u(3), v(3);
    for (int j = 0; j < 3; ++j) {
      u[j] = rng.uniform(-10.0, 10.0);
      v[j] = rng.uniform(-10.0, 10.0);
    }
    const Vector pu = project_box(u, box), pv = project_box(v, box);
    EXPECT_EQ(project_box(pu, box), pu);
    EXPECT_TRUE(box.contains(pu));
    Vector du(3), dp(3);
    for (int j = 0; j < 3; ++j) {
      du[j] = u[j] - v[j];
      dp[j] = pu[j] - pv[j];
    }
    EXPECT_LE(norm2(dp), norm2(du) + 1e-15);
  }
}

TEST(ProjectNonneg, Examples) {
  EXPECT_EQ(project_nonneg(Vector{-2.0}), Vector{0.0});
  EXPECT_EQ(project_nonneg(Vector{3.0}), Vector{3.0});
  EXPECT_EQ(project_nonneg(Vector{-1.0, 0.0, 4.0}), (Vector{0.0, 0.0, 4.0}));
}

TEST(CouplingValue, PriceCapViolatedByOne) {
  EXPECT_DOUBLE_EQ(coupling_value(price_cap(2, 10.0), {{8.0}, {14.0}})[0], 1.0);
}

TEST(CouplingValue, PriceCapActive) {
  EXPECT_DOUBLE_EQ(coupling_value(price_cap(2, 10.0), {{8.0}, {12.0}})[0], 0.0);
}

TEST(CouplingValue, ZeroPricesStrictlyFeasible) {
  EXPECT_DOUBLE_EQ(coupling_value(price_cap(2, 10.0), {{0.0}, {0.0}})[0], -10.0);
}

TEST(CouplingValue, SplitConstantsReconstructRightHandSide) {
  const CouplingConstraint cc = price_cap(5, 7.0);
  double total = 0.0;
  for (const auto& b : cc.b) total += b[0];
  EXPECT_NEAR(total, 7.0, 1e-15);
}

TEST(CouplingValue, DimensionMismatchThrows) {
  EXPECT_THROW(coupling_value(price_cap(2, 10.0), {{8.0}}), std::invalid_argument);
  EXPECT_THROW(coupling_value(price_cap(2, 10.0), {{8.0, 1.0}, {2.0}}), std::invalid_argument);
}

TEST(CouplingValue, Affine) {
  const auto game = sgnep::testing::table_two();
  const GameSpec g = ridehail::build_game(game);
  RandomStream rng(3, 0);
  for (int t = 0; t < 100; ++t) {
    const BlockVector x = sgnep::testing::random_profile(g, rng);
    const BlockVector y = sgnep::testing::random_profile(g, rng);
    const double eta = rng.uniform();
    BlockVector mix = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = 0; j < x[i].size(); ++j) mix[i][j] = eta * x[i][j] + (1 - eta) * y[i][j];
    }
    const Vector gm = coupling_value(g.coupling, mix);
    const Vector gx = coupling_value(g.coupling, x), gy = coupling_value(g.coupling, y);
    for (std::size_t r = 0; r < gm.size(); ++r) {
      EXPECT_NEAR(gm[r], eta * gx[r] + (1 - eta) * gy[r], 1e-12);
    }
  }
}

TEST(ValidateGame, TableTwoPasses) {
  const ValidationReport rep = validate_game(ridehail::build_game(sgnep::testing::table_two()));
  EXPECT_TRUE(rep.ok()) << ::testing::PrintToString(rep.failures());
}

TEST(ValidateGame, EmptyLocalSet) {
  const ValidationReport rep = validate_game(two_agent_game(1.0, Box{{2.0}, {1.0}}));
  ASSERT_FALSE(rep.ok());
  bool found = false;
  for (const auto& f : rep.failures()) found |= f.find("empty local set") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(ValidateGame, NoSlaterPoint) {
  // x_1 + x_2 <= -1 is impossible on [0, 1]^2.
  const ValidationReport rep = validate_game(two_agent_game(-1.0));
  ASSERT_FALSE(rep.ok());
  bool found = false;
  for (const auto& f : rep.failures()) found |= f.find("no Slater point found") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(ValidateGame, SlaterAtLowerCorner) {
  // Midpoint sum 1 violates cap 0.5, the lower corner does not.
  EXPECT_TRUE(validate_game(two_agent_game(0.5)).ok());
}

TEST(Oracle, DeterministicForFixedSample) {
  const GameSpec g = ridehail::build_game(sgnep::testing::table_two());
  RandomStream rng(9, 0);
  const BlockVector x = sgnep::testing::random_profile(g, rng);
  const Vector xi = g.oracle->draw_sample(0, rng);
  const Vector a = g.oracle->gradient(2, x, xi);
  const Vector b = g.oracle->gradient(2, x, xi);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), g.dim_local);
}
