#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "arratia/driver.hpp"
#include "arratia/stats.hpp"

using namespace arratia;

TEST_CASE("time grid validation") {
  CHECK_THROWS_AS(TimeGrid({0.0}), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid({0.1, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid({0.0, 0.9}), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid({0.0, 0.5, 0.5, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::uniform(0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::geometric(0.0, 1.1), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::geometric(0.1, 1.0), std::invalid_argument);
}

TEST_CASE("time grid construction") {
  const auto u = TimeGrid::uniform(8);
  CHECK(u.cells() == 8);
  CHECK(u.mesh() == doctest::Approx(0.125));
  CHECK(u.index_of(0.375) == std::optional<std::size_t>(3));
  CHECK_FALSE(u.index_of(0.3).has_value());

  const auto s = u.subdivide(4);
  CHECK(s.cells() == 32);
  CHECK(s.refines(u));
  CHECK_FALSE(u.refines(s));
  CHECK(s == TimeGrid::uniform(32));

  const auto g = TimeGrid::geometric(0.01, 1.5);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == doctest::Approx(0.01));
  CHECK(g[g.cells()] == 1.0);
  for (std::size_t i = 1; i < g.cells(); ++i) CHECK(g[i + 1] > g[i]);
  CHECK(sub_knot(0.25, 0.5, 4, 4) == 0.5);
  CHECK(sub_knot(0.25, 0.5, 0, 4) == 0.25);
}

TEST_CASE("driver starts at zero and rejects bad queries") {
  PathDriver w(3, 0, TimeGrid::uniform(16));
  CHECK(w.value(0.0) == 0.0);
  CHECK_THROWS_AS(w.increment(0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(w.increment(0.6, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(w.value(1.5), std::invalid_argument);
  CHECK_THROWS_AS(w.value(-0.1), std::invalid_argument);
}

TEST_CASE("increments telescope") {
  PathDriver w(11, 2, TimeGrid::uniform(64));
  const double whole = w.increment(0.0, 1.0);
  const double parts = w.increment(0.0, 0.3) + w.increment(0.3, 0.71) + w.increment(0.71, 1.0);
  CHECK(parts == doctest::Approx(whole).epsilon(1e-14));
  // Off-grid values are fixed once sampled.
  const double v = w.value(0.3);
  CHECK(w.value(0.3) == v);
}

TEST_CASE("same seed and query sequence reproduce bitwise") {
  PathDriver a(42, 7, TimeGrid::uniform(32));
  PathDriver b(42, 7, TimeGrid::uniform(32));
  for (double t : {0.5, 0.1234, 0.9, 1.0, 0.77}) CHECK(a.value(t) == b.value(t));
  CHECK(a.uniform(1, 2, 0.5) == b.uniform(1, 2, 0.5));
  PathDriver c(42, 8, TimeGrid::uniform(32));
  CHECK(c.value(1.0) != a.value(1.0));
}

TEST_CASE("refining keeps every returned value") {
  PathDriver w(5, 1, TimeGrid::uniform(4));
  const double v1 = w.value(1.0);
  const double vq = w.value(0.25);
  auto same = w.refine(TimeGrid::uniform(4));
  CHECK(same.value(1.0) == v1);
  auto fine = w.refine(TimeGrid::uniform(16));
  CHECK(fine.value(1.0) == v1);
  CHECK(fine.value(0.25) == vq);
  CHECK(fine.increment(0.0, 1.0) == w.increment(0.0, 1.0));
  CHECK_THROWS_AS(w.refine(TimeGrid({0.0, 0.3, 1.0})), std::invalid_argument);
}

TEST_CASE("marginal law: mean 0, variance t (law of large numbers)") {
  constexpr std::size_t N = 100000;
  Accumulator at1, at03;
  for (std::size_t r = 0; r < N; ++r) {
    PathDriver w(replica_seed(9, r), 0, TimeGrid::uniform(8));
    at1.add(w.value(1.0));
    at03.add(w.value(0.3));
  }
  CHECK(std::abs(at1.mean) < 0.01);
  CHECK(std::abs(at1.variance() - 1.0) < 0.02);
  CHECK(std::abs(at03.mean) < 0.01);
  CHECK(std::abs(at03.variance() - 0.3) < 0.01);
}

TEST_CASE("bridge midpoint has mean c/2 and variance 1/4") {
  constexpr std::size_t N = 100000;
  const double c = 1.3;
  Accumulator mid;
  for (std::size_t r = 0; r < N; ++r) {
    auto w = PathDriver::scripted(TimeGrid({0.0, 1.0}), {0.0, c}, replica_seed(4, r), 0);
    mid.add(w.value(0.5));
  }
  CHECK(std::abs(mid.mean - c / 2) < 0.01);
  CHECK(std::abs(mid.variance() - 0.25) < 0.01);
}

TEST_CASE("disjoint increments are uncorrelated") {
  constexpr std::size_t N = 50000;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t r = 0; r < N; ++r) {
    PathDriver w(replica_seed(21, r), 3, TimeGrid::uniform(4));
    const double a = w.increment(0.0, 0.4);  // off-grid end, bridge sampled
    const double b = w.increment(0.4, 1.0);
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(double(N)));
  CHECK(sxx / N == doctest::Approx(0.4).epsilon(0.03));
  CHECK(syy / N == doctest::Approx(0.6).epsilon(0.03));
}

TEST_CASE("location keying shares drivers across start sets") {
  const auto grid = TimeGrid::uniform(16);
  const std::vector<double> coarse{0.0, 0.5};
  const std::vector<double> fine{0.0, 0.25, 0.5};
  auto a = make_drivers(77, coarse, grid, DriverKeying::by_location);
  auto b = make_drivers(77, fine, grid, DriverKeying::by_location);
  CHECK(a[1].value(1.0) == b[2].value(1.0));
  CHECK(a[0].value(0.5) == b[0].value(0.5));
  CHECK(location_key(-0.0) == location_key(0.0));
  auto c = make_drivers(77, fine, grid, DriverKeying::by_index);
  CHECK(c[2].value(1.0) != b[2].value(1.0));
}

TEST_CASE("auxiliary uniforms lie in (0,1) and depend on the key") {
  PathDriver w(1, 1, TimeGrid::uniform(2));
  Accumulator u;
  for (int i = 0; i < 20000; ++i) {
    const double x = w.uniform(5, i, 0.25);
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    u.add(x);
  }
  CHECK(std::abs(u.mean - 0.5) < 0.01);
  CHECK(w.uniform(5, 0, 0.25) != w.uniform(5, 0, 0.5));
}
