#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "arratia/stats.hpp"

using namespace arratia;

TEST_CASE("accumulator merge matches a single pass") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(2.0, 3.0);
  Accumulator all, a, b;
  for (int i = 0; i < 1000; ++i) {
    const double x = n(rng);
    all.add(x);
    (i < 400 ? a : b).add(x);
  }
  a.merge(b);
  CHECK(a.count == all.count);
  CHECK(a.mean == doctest::Approx(all.mean).epsilon(1e-13));
  CHECK(a.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
  Accumulator empty;
  empty.merge(all);
  CHECK(empty.mean == all.mean);
  CHECK(Accumulator{}.variance() == 0.0);
}

TEST_CASE("least squares on an exact line") {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto f = ols(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.rss < 1e-20);
  const std::vector<double> se{0.1, 0.2, 0.1, 0.3};
  CHECK(wls(x, y, se).slope == doctest::Approx(2.0));
  const std::vector<double> two_x{1, 2}, two_y{1, 3};
  const auto two = ols(two_x, two_y);
  CHECK(two.slope_ci_low == two.slope_ci_high);
}

TEST_CASE("slope interval covers the truth at the nominal rate") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.5);
  int covered = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x, y;
    for (int i = 0; i < 6; ++i) {
      x.push_back(i);
      y.push_back(1.0 - 0.7 * i + noise(rng));
    }
    const auto f = ols(x, y);
    covered += f.slope_ci_low <= -0.7 && -0.7 <= f.slope_ci_high;
  }
  const double rate = double(covered) / trials;
  CHECK(rate > 0.93);
  CHECK(rate < 0.97);
}

TEST_CASE("log-log fit recovers a power law") {
  const std::vector<double> lv{4, 8, 16, 32}, est{1.0, 0.5, 0.25, 0.125}, se{0.01, 0.01, 0.01, 0.01}, none{0, 0, 0, 0};
  CHECK(loglog_fit(lv, est, se).slope == doctest::Approx(-1.0));
  CHECK(loglog_fit(lv, est, none).slope == doctest::Approx(-1.0));
}

TEST_CASE("quantiles") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(student_t_quantile(0.975, 3) == doctest::Approx(3.182446).epsilon(1e-6));
  CHECK(chi_squared_quantile(0.99, 10) == doctest::Approx(23.20925).epsilon(1e-6));
}

TEST_CASE("chunked reduction does not depend on the worker count") {
  auto body = [](std::size_t i, Accumulator& a) { a.add(std::sin(double(i)) * 1e3 + 1e-7 * double(i)); };
  const auto one = chunked_reduce(10007, 1, Accumulator{}, body);
  for (unsigned w : {2u, 3u, 8u}) {
    const auto many = chunked_reduce(10007, w, Accumulator{}, body);
    CHECK(many.count == one.count);
    CHECK(many.mean == one.mean);
    CHECK(many.m2 == one.m2);
  }
  CHECK_THROWS_AS(chunked_reduce(1000, 4, Accumulator{},
                                 [](std::size_t i, Accumulator&) {
                                   if (i == 777) throw std::runtime_error("boom");
                                 }),
                  std::runtime_error);
}
