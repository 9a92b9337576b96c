#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "seqcore/error.hpp"
#include "seqcore/noise.hpp"
#include "seqcore/random.hpp"

using namespace seqcore;

TEST_CASE("perlin vanishes on lattice points") {
  for (int i = -5; i <= 5; ++i)
    for (int j = -5; j <= 5; ++j) {
      CHECK(perlin({i / 0.25, j / 0.25}, 0.25, {7}) == 0.0);
      CHECK(perlin({double(i), double(j)}, 1.0, {123}) == 0.0);
    }
}

TEST_CASE("perlin is deterministic and seed dependent") {
  const Vec2 p{3.7, -1.2};
  CHECK(perlin(p, 0.3, {5}) == perlin(p, 0.3, {5}));
  int differ = 0;
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const Vec2 q{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    differ += perlin(q, 0.2, {1}) != perlin(q, 0.2, {2});
  }
  CHECK(differ > 90);
}

TEST_CASE("perlin stays in [-1, 1] over a million samples") {
  Rng rng(99);
  double max_abs = 0.0;
  for (int k = 0; k < 1'000'000; ++k) {
    const Vec2 p{rng.uniform(-1000, 1000), rng.uniform(-1000, 1000)};
    max_abs = std::max(max_abs, std::abs(perlin(p, 0.37, {k % 17u})));
  }
  CHECK(max_abs <= 1.0);
  CHECK(max_abs > 0.5);  // not trivially flat
}

TEST_CASE("perlin is Lipschitz continuous") {
  Rng rng(4);
  const double f = 0.8;
  for (int k = 0; k < 1000; ++k) {
    const Vec2 p{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    const Vec2 eps{rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3)};
    const double bound = 10.0 * norm(eps) * kPerlinLipschitz * f;
    CHECK(std::abs(perlin(p, f, {3}) - perlin(p + eps, f, {3})) <= bound);
  }
}

TEST_CASE("jitter_centers: single cell") {
  GridSampling g(10.0, {0, 0, 10, 10}, {1});
  const auto cs = g.jitter_centers();
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].center.x > 0.0);
  CHECK(cs[0].center.x < 10.0);
  CHECK(cs[0].center.y > 0.0);
  CHECK(cs[0].center.y < 10.0);
}

TEST_CASE("jitter_centers: one strictly interior center per cell") {
  GridSampling g(10.0, {0, 0, 30, 20}, {2});
  const auto cs = g.jitter_centers();
  CHECK(cs.size() == 6);
  std::set<std::pair<std::int64_t, std::int64_t>> cells;
  for (const auto& c : cs) {
    cells.insert({c.cell.ix, c.cell.iy});
    CHECK(g.cell_of(c.center) == c.cell);
    CHECK(c.center.x > c.cell.ix * 10.0);
    CHECK(c.center.x < (c.cell.ix + 1) * 10.0);
    CHECK(c.center.y > c.cell.iy * 10.0);
    CHECK(c.center.y < (c.cell.iy + 1) * 10.0);
  }
  CHECK(cells.size() == 6);
}

TEST_CASE("jitter_centers: partial cells at the border count") {
  GridSampling g(10.0, {5, 5, 26, 14}, {2});
  CHECK(g.jitter_centers().size() == 3 * 2);
}

TEST_CASE("jitter_centers is reproducible and order independent") {
  GridSampling a(7.0, {0, 0, 70, 70}, {11});
  GridSampling b(7.0, {21, 21, 35, 35}, {11});
  const auto ca = a.jitter_centers();
  CHECK(ca.size() == 100);
  for (const auto& c : b.jitter_centers()) CHECK(a.center(c.cell) == c.center);
  const auto again = GridSampling(7.0, {0, 0, 70, 70}, {11}).jitter_centers();
  for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca[i].center == again[i].center);
}

TEST_CASE("jitter_centers covers each cell roughly uniformly") {
  // Fractional offsets of many cells: each quadrant of the unit cell gets about a quarter.
  GridSampling g(1.0, {0, 0, 100, 100}, {8});
  int quadrant[4] = {0, 0, 0, 0};
  for (const auto& c : g.jitter_centers()) {
    const double fx = c.center.x - c.cell.ix, fy = c.center.y - c.cell.iy;
    ++quadrant[(fx < 0.5 ? 0 : 1) + (fy < 0.5 ? 0 : 2)];
  }
  for (int q : quadrant) CHECK(std::abs(q - 2500) < 200);
}

TEST_CASE("GridSampling rejects bad configurations") {
  CHECK_THROWS_AS(GridSampling(0.0, {0, 0, 10, 10}, {1}), ConfigError);
  CHECK_THROWS_AS(GridSampling(-1.0, {0, 0, 10, 10}, {1}), ConfigError);
  CHECK_THROWS_AS(GridSampling(1.0, {0, 0, 0, 10}, {1}), ConfigError);
  CHECK_THROWS_AS(GridSampling(1.0, {5, 0, 1, 10}, {1}), ConfigError);
}

TEST_CASE("nearest_center: at a center") {
  GridSampling g(10.0, {0, 0, 30, 30}, {4});
  for (const auto& c : g.jitter_centers()) {
    const auto n = nearest_center(c.center, g, 10.0);
    REQUIRE(n);
    CHECK(n->center == c.center);
    CHECK(n->distance == 0.0);
  }
}

TEST_CASE("nearest_center: single cell distance") {
  GridSampling g(10.0, {0, 0, 10, 10}, {9});
  const Vec2 c = g.jitter_centers()[0].center;
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vec2 p{rng.uniform(0, 10), rng.uniform(0, 10)};
    const auto n = nearest_center(p, g, 10.0);
    REQUIRE(n);
    CHECK(n->distance == doctest::Approx(norm(p - c)).epsilon(1e-12));
  }
}

TEST_CASE("nearest_center matches brute force within reach") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double G = 10.0, reach = 9.5;  // r + A <= G
    GridSampling g(G, {0, 0, 50, 50}, {seed});
    const auto all = g.jitter_centers();
    REQUIRE(all.size() == 25);
    Rng rng(seed + 100);
    int checked = 0;
    for (int k = 0; k < 200; ++k) {
      const Vec2 p{rng.uniform(0, 50), rng.uniform(0, 50)};
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : all) best = std::min(best, norm(p - c.center));
      const auto n = nearest_center(p, g, reach);
      if (best <= reach) {
        REQUIRE(n);
        CHECK(n->distance == best);
        ++checked;
      }
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("nearest_center refuses a reach beyond the cell size") {
  GridSampling g(10.0, {0, 0, 30, 30}, {1});
  CHECK_THROWS_AS(nearest_center({5, 5}, g, 10.5), ConfigError);
  CHECK_NOTHROW(nearest_center({5, 5}, g, 10.0));
}
