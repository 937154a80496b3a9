#include <doctest.h>

#include <sstream>

#include "sdfa/graph.hpp"
#include "sdfa/rng.hpp"

using namespace sdfa;

TEST_SUITE("graph") {

TEST_CASE("body25 adjacency has self-loops and the neck-midhip bone") {
  SkeletonGraph g = build_body25_graph();
  REQUIRE(g.num_joints == 25);
  for (int i = 0; i < 25; ++i) CHECK(g.a(i, i) == 1.0);
  CHECK(g.a(1, 8) == 1.0);
  CHECK(g.a(8, 1) == 1.0);

  // symmetry count: ones = joints + 2 * bones
  int ones = 0;
  for (double v : g.adjacency) ones += v == 1.0 ? 1 : 0;
  CHECK(ones == 25 + 2 * static_cast<int>(g.edges.size()));

  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) CHECK(g.a(i, j) == g.a(j, i));
}

TEST_CASE("row normalization of a single self-loop") {
  auto ahat = normalize_adjacency({1.0}, 1);
  CHECK(ahat[0] == doctest::Approx(1.0));
}

TEST_CASE("row normalization of the 3-node path") {
  // nodes 0-1-2 with self-loops: degrees 2, 3, 2
  SkeletonGraph g = build_graph(3, {{0, 1}, {1, 2}});
  const double e[9] = {0.5, 0.5, 0.0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0, 0.5, 0.5};
  for (int i = 0; i < 9; ++i) CHECK(g.normalized[i] == doctest::Approx(e[i]).epsilon(1e-12));
}

TEST_CASE("body25 rows are stochastic") {
  SkeletonGraph g = build_body25_graph();
  for (int i = 0; i < 25; ++i) {
    double row = 0.0;
    for (int j = 0; j < 25; ++j) row += g.ahat(i, j);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("symmetric normalization keeps symmetry") {
  SkeletonGraph g = build_body25_graph(AdjacencyNorm::symmetric);
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j)
      CHECK(g.ahat(i, j) == doctest::Approx(g.ahat(j, i)).epsilon(1e-12));
}

TEST_CASE("effective adjacency: ones is identity, zeros annihilate") {
  SkeletonGraph g = build_body25_graph();
  std::vector<double> ones(25 * 25, 1.0), zeros(25 * 25, 0.0);
  auto same = effective_adjacency(g.normalized, ones, 25);
  for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i] == g.normalized[i]);
  auto none = effective_adjacency(g.normalized, zeros, 25);
  for (double v : none) CHECK(v == 0.0);
}

TEST_CASE("effective adjacency equals the scalar loop and preserves support") {
  Rng rng(11);
  const int v = 5;
  std::vector<double> ahat(v * v), m(v * v);
  for (auto& x : ahat) x = rng.uniform() < 0.4 ? 0.0 : rng.uniform();
  for (auto& x : m) x = rng.uniform(-2.0, 2.0);
  auto eff = effective_adjacency(ahat, m, v);
  for (int i = 0; i < v * v; ++i) {
    CHECK(eff[i] == doctest::Approx(ahat[i] * m[i]).epsilon(1e-15));
    if (ahat[i] == 0.0) CHECK(eff[i] == 0.0);
  }
}

TEST_CASE("edge table lists one i,j pair per bone") {
  SkeletonGraph g = build_body25_graph();
  std::istringstream table(g.edge_table());
  std::string line;
  std::size_t rows = 0;
  while (std::getline(table, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    const int i = std::stoi(line.substr(0, comma));
    const int j = std::stoi(line.substr(comma + 1));
    CHECK(g.a(i, j) == 1.0);
    ++rows;
  }
  CHECK(rows == g.edges.size());
}

TEST_CASE("zero-degree rows are rejected") {
  CHECK_THROWS_AS(normalize_adjacency({0.0, 0.0, 0.0, 0.0}, 2), InternalError);
}

}  // TEST_SUITE
