#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ulrsim/network.hpp"
#include <stdexcept>

using namespace ulr;

namespace {

void check_doubly_stochastic(const MixingMatrix& A) {
  const int m = A.m;
  for (int i = 0; i < m; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < m; ++j) {
      CHECK(A.at(i, j) >= 0.0);
      CHECK(A.at(i, j) == A.at(j, i));
      row += A.at(i, j);
      col += A.at(j, i);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(A.at(i, i) > 0.0);
  }
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("complete and ring topologies") {
  const Topology c = Topology::complete(5);
  CHECK(c.m == 5);
  CHECK(c.edges.size() == 10);
  CHECK(c.is_connected());
  CHECK(c.is_complete());
  const Topology r = Topology::ring(6);
  CHECK(r.edges.size() == 6);
  CHECK(r.is_connected());
  CHECK_FALSE(r.is_complete());
  for (int d : r.degrees()) CHECK(d == 2);
}

TEST_CASE("lazy metropolis on complete graph") {
  const MixingMatrix A = lazy_metropolis(Topology::complete(3));
  for (int i = 0; i < 3; ++i) {
    CHECK(A.at(i, i) == doctest::Approx(0.5).epsilon(1e-15));
    for (int j = 0; j < 3; ++j) {
      if (i != j) CHECK(A.at(i, j) == doctest::Approx(0.25).epsilon(1e-15));
    }
  }
  check_doubly_stochastic(A);
  CHECK(A.eta == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(A.lambda_bound == doctest::Approx(1.0 - 0.25 / 36.0).epsilon(1e-15));
}

TEST_CASE("lazy metropolis on a path") {
  Topology path;
  path.m = 3;
  path.edges = {{0, 1}, {1, 2}};
  const MixingMatrix A = lazy_metropolis(path);
  CHECK(A.at(0, 1) == doctest::Approx(0.25));
  CHECK(A.at(1, 2) == doctest::Approx(0.25));
  CHECK(A.at(0, 2) == doctest::Approx(0.0));
  CHECK(A.at(0, 0) == doctest::Approx(0.75));
  CHECK(A.at(1, 1) == doctest::Approx(0.5));
  check_doubly_stochastic(A);
}

TEST_CASE("uniform weights require a complete graph") {
  const MixingMatrix A = uniform_complete(Topology::complete(4));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(A.at(i, j) == doctest::Approx(0.25).epsilon(1e-15));
  }
  check_doubly_stochastic(A);
  CHECK_THROWS_AS(uniform_complete(Topology::ring(5)), std::invalid_argument);
}

TEST_CASE("random geometric graph") {
  std::mt19937_64 rng(123);
  const Topology g = random_geometric_graph(30, 0.5, rng);
  CHECK(g.m == 30);
  CHECK(g.is_connected());
  REQUIRE(g.positions.size() == 30);
  // Edge set is exactly the pairs within the radius.
  for (int i = 0; i < g.m; ++i) {
    for (int j = i + 1; j < g.m; ++j) {
      const double dx = g.positions[i][0] - g.positions[j][0];
      const double dy = g.positions[i][1] - g.positions[j][1];
      const bool close = std::hypot(dx, dy) <= 0.5;
      const bool has = std::find(g.edges.begin(), g.edges.end(), std::pair<int, int>{i, j}) !=
                       g.edges.end();
      CHECK(close == has);
    }
  }
  // Determinism: same seed, same graph.
  std::mt19937_64 rng2(123);
  const Topology g2 = random_geometric_graph(30, 0.5, rng2);
  CHECK(g.edges == g2.edges);
  CHECK(g.positions == g2.positions);
  // Unreachable radius.
  std::mt19937_64 rng3(5);
  CHECK_THROWS_AS(random_geometric_graph(40, 0.005, rng3), std::runtime_error);
}

TEST_CASE("lazy metropolis doubly stochastic on random graphs") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Topology g = random_geometric_graph(5 + static_cast<int>(seed % 14), 0.6, rng);
    const MixingMatrix A = lazy_metropolis(g);
    check_doubly_stochastic(A);
    CHECK_NOTHROW(A.validate());
    CHECK(A.eta > 0.0);
    CHECK(A.lambda_bound > 0.0);
    CHECK(A.lambda_bound < 1.0);
  }
}

TEST_CASE("spectral norm of simple matrices") {
  CHECK(spectral_norm({3.0, 0.0, 0.0, 5.0}, 2) == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(spectral_norm({0.0, 1.0, 0.0, 0.0}, 2) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(spectral_norm({0.0, 0.0, 0.0, 0.0}, 2) == doctest::Approx(0.0));
}

TEST_CASE("consensus gap on complete graphs") {
  // Uniform averaging reaches exact consensus in one round.
  const MixingMatrix U = uniform_complete(Topology::complete(5));
  CHECK(consensus_gap(U, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(consensus_gap(U, 10) == doctest::Approx(0.0).epsilon(1e-12));
  // Lazy Metropolis on complete m=5: second eigenvalue is 0.375.
  const MixingMatrix A = lazy_metropolis(Topology::complete(5));
  CHECK(consensus_gap(A, 1) == doctest::Approx(0.375).epsilon(1e-10));
  CHECK(consensus_gap(A, 2) == doctest::Approx(0.375 * 0.375).epsilon(1e-10));
  CHECK(consensus_gap(A, 3) == doctest::Approx(0.375 * 0.375 * 0.375).epsilon(1e-9));
}

TEST_CASE("consensus gap is non-increasing in t") {
  std::mt19937_64 rng(77);
  const Topology g = random_geometric_graph(12, 0.5, rng);
  const MixingMatrix A = lazy_metropolis(g);
  double prev = consensus_gap(A, 1);
  for (long long t : {2LL, 4LL, 8LL, 16LL, 64LL, 256LL}) {
    const double cur = consensus_gap(A, t);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("edge list round trip") {
  std::mt19937_64 rng(9);
  const Topology g = random_geometric_graph(10, 0.6, rng);
  std::stringstream buf;
  save_edge_list(g, buf);
  const Topology h = load_edge_list(buf);
  CHECK(h.m == g.m);
  CHECK(h.edges == g.edges);
}

}  // TEST_SUITE
