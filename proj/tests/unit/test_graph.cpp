#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "sgnep/graph.hpp"
#include "sgnep/random.hpp"

using namespace sgnep;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

double second_smallest_eigenvalue(const Matrix& L) {
  Eigen::MatrixXd E(L.rows(), L.cols());
  for (std::size_t i = 0; i < L.rows(); ++i) {
    for (std::size_t j = 0; j < L.cols(); ++j) E(i, j) = L(i, j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E);
  return es.eigenvalues()(1);
}

}  // namespace

TEST(Laplacian, PathGraph) {
  const MultiplierGraph g(from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
  EXPECT_EQ(laplacian(g).L, from_rows({{1, -1, 0}, {-1, 2, -1}, {0, -1, 1}}));
}

TEST(Laplacian, CompleteGraph) {
  EXPECT_EQ(laplacian(MultiplierGraph::complete(3)).L,
            from_rows({{2, -1, -1}, {-1, 2, -1}, {-1, -1, 2}}));
}

TEST(Laplacian, SingleNode) {
  const LaplacianView v = laplacian(MultiplierGraph(Matrix(1, 1)));
  EXPECT_EQ(v.L, Matrix(1, 1));
  EXPECT_EQ(v.degrees, Vector{0.0});
}

TEST(MultiplierGraph, RejectsInvalidWeights) {
  EXPECT_THROW(MultiplierGraph(from_rows({{0, 1}, {2, 0}})), std::invalid_argument);
  EXPECT_THROW(MultiplierGraph(from_rows({{0, -1}, {-1, 0}})), std::invalid_argument);
  EXPECT_THROW(MultiplierGraph(from_rows({{1, 1}, {1, 0}})), std::invalid_argument);
  EXPECT_THROW(MultiplierGraph(Matrix(2, 3)), std::invalid_argument);
}

TEST(MultiplierGraph, NamedTopologies) {
  const MultiplierGraph star = MultiplierGraph::star(4);
  EXPECT_EQ(star.neighbors(0), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(star.neighbors(2), (std::vector<std::size_t>{0}));
  const MultiplierGraph ring = MultiplierGraph::named("ring", 5);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(ring.neighbors(i).size(), 2u);
  EXPECT_THROW(MultiplierGraph::named("torus", 4), std::invalid_argument);
}

TEST(IsConnected, Examples) {
  EXPECT_TRUE(is_connected(MultiplierGraph(from_rows({{0, 1}, {1, 0}}))));
  EXPECT_FALSE(is_connected(MultiplierGraph(from_rows({{0, 0}, {0, 0}}))));
  EXPECT_TRUE(is_connected(MultiplierGraph::ring(4)));
}

TEST(NeighborDisagreement, ConsensusKernel) {
  const LaplacianView v = laplacian(MultiplierGraph::ring(5));
  const BlockVector out = neighbor_disagreement(v, BlockVector(5, Vector{1.5, -2.0}));
  for (const auto& b : out) EXPECT_EQ(b, (Vector{0.0, 0.0}));
}

TEST(NeighborDisagreement, TwoNodesByHand) {
  const LaplacianView v = laplacian(MultiplierGraph(from_rows({{0, 1}, {1, 0}})));
  EXPECT_EQ(neighbor_disagreement(v, {{1.0}, {3.0}}), (BlockVector{{-2.0}, {2.0}}));
}

TEST(NeighborDisagreement, ZeroWeightGraph) {
  const LaplacianView v = laplacian(MultiplierGraph(Matrix(3, 3)));
  EXPECT_EQ(neighbor_disagreement(v, {{1.0}, {-4.0}, {9.0}}), (BlockVector{{0.0}, {0.0}, {0.0}}));
}

TEST(NeighborDisagreement, DimensionMismatchThrows) {
  const LaplacianView v = laplacian(MultiplierGraph::ring(3));
  EXPECT_THROW(neighbor_disagreement(v, {{1.0}, {2.0}}), std::invalid_argument);
  EXPECT_THROW(neighbor_disagreement(v, {{1.0}, {2.0, 3.0}, {4.0}}), std::invalid_argument);
}

// Random weighted graphs: Laplacian structure, PSD probe, block sums and
// connectivity against the spectral gap.
TEST(Laplacian, RandomGraphProperties) {
  RandomStream rng(2024, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 8;
    const double density = rng.uniform(0.1, 0.8);
    Matrix W(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng.uniform() < density) W(i, j) = W(j, i) = rng.uniform(0.1, 3.0);
      }
    }
    const MultiplierGraph g(W);
    const LaplacianView v = laplacian(g);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row += v.L(i, j);
        EXPECT_EQ(v.L(i, j), v.L(j, i));
      }
      EXPECT_NEAR(row, 0.0, 1e-14);
    }
    for (int p = 0; p < 5; ++p) {
      Vector x(n);
      for (auto& e : x) e = rng.uniform(-1.0, 1.0);
      EXPECT_GE(dot(x, v.L.apply(x)), -1e-12);
      BlockVector blocks(n);
      for (std::size_t i = 0; i < n; ++i) blocks[i] = {x[i], -x[i]};
      Vector total(2, 0.0);
      for (const auto& b : neighbor_disagreement(v, blocks)) {
        total[0] += b[0];
        total[1] += b[1];
      }
      EXPECT_NEAR(total[0], 0.0, 1e-12);
      EXPECT_NEAR(total[1], 0.0, 1e-12);
    }
    if (n >= 2) {
      EXPECT_EQ(is_connected(g), second_smallest_eigenvalue(v.L) > 1e-10) << "n=" << n;
    } else {
      EXPECT_TRUE(is_connected(g));
    }
  }
}

TEST(Laplacian, PsdProbeThousandVectors) {
  const LaplacianView v = laplacian(MultiplierGraph::star(6));
  RandomStream rng(7, 1);
  for (int t = 0; t < 1000; ++t) {
    Vector x(6);
    for (auto& e : x) e = rng.uniform(-10.0, 10.0);
    EXPECT_GE(dot(x, v.L.apply(x)), -1e-10);
  }
}
