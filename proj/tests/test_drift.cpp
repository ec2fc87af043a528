#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "arratia/drift.hpp"

using namespace arratia;

TEST_CASE("values of each kind") {
  CHECK(DriftSpec::zero()(3.0) == 0.0);
  CHECK(DriftSpec::constant(-1.5)(100.0) == -1.5);
  const auto a = DriftSpec::affine_clamped(2.0, 1.0, -1.0, 2.0);
  CHECK(a(0.0) == 1.0);
  CHECK(a(5.0) == 2.0);
  CHECK(a(-5.0) == -1.0);
  const auto tab = DriftSpec::tabulated({0.0, 1.0, 3.0}, {1.0, -1.0, 0.0});
  CHECK(tab(-2.0) == 1.0);
  CHECK(tab(0.5) == doctest::Approx(0.0));
  CHECK(tab(2.0) == doctest::Approx(-0.5));
  CHECK(tab(9.0) == 0.0);
}

TEST_CASE("reported bounds hold on random samples") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x(-20, 20);
  const DriftSpec drifts[] = {DriftSpec::zero(), DriftSpec::constant(0.7),
                              DriftSpec::affine_clamped(-3.0, 0.5, -2.0, 1.0),
                              DriftSpec::tabulated({-1.0, 0.0, 2.0}, {0.0, 2.0, -1.0})};
  for (const auto& d : drifts) {
    for (int i = 0; i < 2000; ++i) {
      const double a = x(rng), b = x(rng);
      CHECK(std::abs(d(a)) <= d.sup_bound() + 1e-12);
      CHECK(std::abs(d(a) - d(b)) <= d.lipschitz_bound() * std::abs(a - b) + 1e-12);
    }
  }
  CHECK(DriftSpec::affine_clamped(-3.0, 0.5, -2.0, 1.0).lipschitz_bound() == 3.0);
  CHECK(DriftSpec::tabulated({-1.0, 0.0, 2.0}, {0.0, 2.0, -1.0}).lipschitz_bound() == 2.0);
}

TEST_CASE("parse inverts describe") {
  for (const char* text : {"zero", "constant:1.25", "affine:1,-0.5,-1,1", "table:0:1;1:2;2.5:-1"}) {
    const auto d = DriftSpec::parse(text);
    CHECK(d.describe() == text);
    const auto again = DriftSpec::parse(d.describe());
    for (double x : {-3.0, -0.2, 0.0, 0.9, 1.7, 4.0}) CHECK(again(x) == d(x));
  }
}

TEST_CASE("invalid specifications are rejected") {
  CHECK_THROWS_AS(DriftSpec::parse("quadratic:1"), std::invalid_argument);
  CHECK_THROWS_AS(DriftSpec::parse("constant:abc"), std::invalid_argument);
  CHECK_THROWS_AS(DriftSpec::parse("affine:1,2,3"), std::invalid_argument);
  CHECK_THROWS_AS(DriftSpec::affine_clamped(1, 0, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(DriftSpec::tabulated({0, 0}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(DriftSpec::tabulated({0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(DriftSpec::constant(NAN), std::invalid_argument);
}

TEST_CASE("drift increment") {
  CHECK(drift_increment(DriftSpec::zero(), 1.0, 0.5) == 0.0);
  CHECK(drift_increment(DriftSpec::constant(2.0), 1.0, 0.25) == 0.5);
  CHECK(drift_increment(DriftSpec::affine_clamped(1, 0, -9, 9), 2.0, 0.5) == 1.0);
}
