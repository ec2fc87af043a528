#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "arratia/densities.hpp"
#include "arratia/stats.hpp"

using namespace arratia;
using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

namespace {

double g(double a, double t) { return std::exp(-a * a / (2 * t)) / std::sqrt(2 * std::numbers::pi * t); }

// Merge time density (d/t1) g_{2 t1}(d) times the midpoint law at merge,
// carried to t: a one-dimensional reduction of the merged-pair density.
double merged_reduced(double x1, double x2, double y, double t) {
  const double d = x2 - x1, mid = 0.5 * (x1 + x2);
  auto f = [&](double t1) { return t1 <= 0 ? 0.0 : d / t1 * g(d, 2 * t1) * g(y - mid, t - 0.5 * t1); };
  return gauss_kronrod<double, 61>::integrate(f, 0.0, t, 20, 1e-13);
}

double meet_prob(double d, double t) { return std::erfc(d / (2.0 * std::sqrt(t))); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("heat kernel") {
  CHECK(gauss_kernel(0.0, 1.0) == doctest::Approx(0.398942).epsilon(1e-6));
  CHECK(gauss_kernel(0.7, 0.3) == gauss_kernel(-0.7, 0.3));
  const double total = gauss_kronrod<double, 61>::integrate([](double a) { return gauss_kernel(a, 0.4); },
                                                             -20.0, 20.0, 15, 1e-14);
  CHECK(std::abs(total - 1.0) < 1e-8);
  CHECK_THROWS_AS(gauss_kernel(0.0, 0.0), std::invalid_argument);
}

TEST_CASE("Karlin-McGregor determinant") {
  const std::vector<double> x1{0.2}, y1{-0.5};
  CHECK(km_density(x1, y1, 0.6) == gauss_kernel(0.7, 0.6));

  const std::vector<double> x{0.0, 1.0}, y{0.0, 1.0};
  const double by_hand = g(0, 1) * g(0, 1) - g(1, 1) * g(1, 1);
  CHECK(std::abs(km_density(x, y, 1.0) - by_hand) < 1e-15);
  CHECK(std::abs(km_density(x, y, 1.0) - 0.100605) < 5e-7);

  const double s = 50.0;
  const std::vector<double> xs{0.0, s, 2 * s}, ys{0.3, s - 0.2, 2 * s + 0.1};
  CHECK(std::abs(km_density(xs, ys, 1.0) - g(0.3, 1) * g(0.2, 1) * g(0.1, 1)) < 1e-12);

  CHECK_THROWS_AS(km_density(std::vector<double>{1.0, 0.0}, y, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(km_density(x, std::vector<double>{0.5, 0.5}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(km_density(x, std::vector<double>{0.5}, 1.0), std::invalid_argument);
}

TEST_CASE("determinant is antisymmetric in y and vanishes on the diagonal") {
  const std::vector<double> x2{-0.3, 0.4};
  for (double a : {-1.0, 0.0, 0.35, 2.0}) {
    const std::vector<double> y{a, 0.5}, swapped{0.5, a}, equal{a, a};
    CHECK(km_determinant(x2, y, 0.8) == -km_determinant(x2, swapped, 0.8));
    CHECK(km_determinant(x2, equal, 0.8) == 0.0);
  }
  const std::vector<double> x3{-0.3, 0.4, 1.0};
  const std::vector<double> y3{0.1, -0.6, 1.3}, y3s{-0.6, 0.1, 1.3}, y3e{0.2, 0.2, 1.0};
  CHECK(km_determinant(x3, y3, 0.5) == doctest::Approx(-km_determinant(x3, y3s, 0.5)).epsilon(1e-14));
  CHECK(std::abs(km_determinant(x3, y3e, 0.5)) < 1e-16);
}

TEST_CASE("free pair density") {
  const std::array<double, 2> x{0.0, 0.5};
  CHECK(pair_density_free(x, {0.1, 0.9}, 1.0) == km_density(x, std::array<double, 2>{0.1, 0.9}, 1.0));
  CHECK(pair_density_free(x, {0.3, 0.3 + 1e-9}, 1.0) < 1e-9);
  const double mass = pair_free_mass(x, 1.0);
  CHECK(std::abs(mass - 0.27633) < 1e-4);
  CHECK(std::abs(mass - (1 - meet_prob(0.5, 1.0))) < 1e-6);
}

TEST_CASE("chamber mass of the killed density is at most 1 and decreases in t") {
  // m = 2 against the reflection oracle.
  const std::vector<double> x2{0.0, 0.4};
  double prev = 1.0;
  for (double t : {0.1, 0.4, 1.0}) {
    const double L = 10 * std::sqrt(t);
    auto inner = [&](double y1) {
      return gauss_kronrod<double, 31>::integrate(
          [&](double y2) { return y2 > y1 ? km_density(x2, std::vector<double>{y1, y2}, t) : 0.0; }, y1, 0.4 + L, 10, 1e-12);
    };
    const double mass = gauss_kronrod<double, 31>::integrate(inner, -L, 0.4 + L, 10, 1e-11);
    CHECK(mass <= 1.0);
    CHECK(mass < prev);
    CHECK(std::abs(mass - (1 - meet_prob(0.4, t))) < 1e-6);
    prev = mass;
  }
  // m = 3 by fixed-order Gauss on the ordered chamber.
  const std::vector<double> x3{0.0, 0.5, 1.2};
  prev = 1.0;
  for (double t : {0.1, 0.4, 1.0}) {
    const double lo = -7 * std::sqrt(t), hi = 1.2 + 7 * std::sqrt(t);
    auto f3 = [&](double y1, double y2) {
      return gauss<double, 40>::integrate(
          [&](double y3) { return y3 > y2 ? km_density(x3, std::vector<double>{y1, y2, y3}, t) : 0.0; }, y2, hi);
    };
    auto f2 = [&](double y1) {
      return gauss<double, 40>::integrate([&](double y2) { return y2 > y1 ? f3(y1, y2) : 0.0; }, y1, hi);
    };
    const double mass = gauss<double, 40>::integrate(f2, lo, hi);
    INFO("t " << t << " mass " << mass);
    CHECK(mass <= 1.0 + 1e-6);
    CHECK(mass < prev);
    CHECK(mass <= 1 - meet_prob(0.5, t) + 1e-4);  // the first pair alone must survive
    prev = mass;
  }
}

TEST_CASE("merged pair density") {
  const std::array<double, 2> x{0.0, 0.5};
  for (double y : {-2.0, -0.5, 0.0, 0.25, 0.9, 2.7}) {
    const double v = pair_density_merged(x, y, 1.0);
    CHECK(std::abs(v - merged_reduced(0.0, 0.5, y, 1.0)) < 1e-8);
    CHECK(std::abs(v - pair_density_merged(x, 0.5 - y, 1.0)) < 1e-9);
  }
  CHECK(std::abs(pair_density_merged({-1.0, 2.0}, 0.1, 0.3) - merged_reduced(-1.0, 2.0, 0.1, 0.3)) < 1e-8);
  const double mass = pair_merged_mass(x, 1.0);
  CHECK(std::abs(mass - 0.72367) < 1e-3);
  CHECK(std::abs(2 * pair_free_mass(x, 1.0) + mass - (2 - meet_prob(0.5, 1.0))) < 1e-5);
  CHECK_THROWS_AS(pair_density_merged({0.5, 0.0}, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(pair_density_merged(x, 0.0, 1.0, QuadSpec{1e-30, 2}), QuadratureError);
}

TEST_CASE("one particle: histogram passes chi-square against the normal law") {
  constexpr std::size_t N = 100000;
  const double u = 0.3;
  const HistogramSpec hist{-3.7, 4.3, 40};
  const auto est = estimate_scheme_density(std::vector<double>{u}, 1.0, 1, std::nullopt, hist, N, 5,
                                           WebSpec{TimeGrid::uniform(1)});
  CHECK(est.excluded == 0);
  const auto edges = hist.edges();
  double chi2 = 0.0, inside = 0.0, inside_p = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < hist.bins; ++i) {
    const double p = normal_cdf(edges[i + 1] - u) - normal_cdf(edges[i] - u);
    const double e = N * p;
    inside += double(est.hits[i]);
    inside_p += p;
    if (e < 5) continue;
    chi2 += (est.hits[i] - e) * (est.hits[i] - e) / e;
    ++cells;
  }
  const double tail_e = N * (1 - inside_p);
  chi2 += (N - inside - tail_e) * (N - inside - tail_e) / tail_e;
  ++cells;
  INFO("chi2 " << chi2 << " cells " << cells);
  CHECK(chi2 < chi_squared_quantile(0.99, double(cells - 1)));
}

TEST_CASE("two particles: expected number of clusters") {
  constexpr std::size_t N = 20000;
  const HistogramSpec hist{-8.0, 8.5, 33};
  const auto est = estimate_scheme_density(std::vector<double>{0.0, 0.5}, 1.0, 1, std::nullopt, hist, N, 6,
                                           WebSpec{TimeGrid::uniform(64)});
  double count = 0.0;
  for (auto h : est.hits) count += double(h);
  const double expected = 2 - meet_prob(0.5, 1.0);
  CHECK(std::abs(expected - 1.27633) < 5e-5);
  const double p = meet_prob(0.5, 1.0);
  const double sigma = std::sqrt(p * (1 - p) / N);
  CHECK(std::abs(count / N - expected) < 3 * sigma);
}

TEST_CASE("unmerged pair density is dominated by the killed kernel") {
  constexpr std::size_t N = 40000;
  const HistogramSpec hist{-2.5, 3.0, 11};
  const std::array<double, 2> x{0.0, 0.5};
  const auto est = estimate_scheme_density(x, 1.0, 2, CoalescenceScheme{2, {}}, hist, N, 8,
                                           WebSpec{TimeGrid::uniform(64)});
  const auto e = hist.edges();
  std::size_t checked = 0;
  for (std::size_t i = 0; i < hist.bins; ++i)
    for (std::size_t j = 0; j < hist.bins; ++j) {
      auto f = [&](double a) {
        return gauss<double, 10>::integrate(
            [&](double b) {
              if (a == b) return 0.0;
              return km_density(x, std::array<double, 2>{std::min(a, b), std::max(a, b)}, 1.0);
            },
            e[j], e[j + 1]);
      };
      const double avg = gauss<double, 10>::integrate(f, e[i], e[i + 1]) / ((e[i + 1] - e[i]) * (e[j + 1] - e[j]));
      const double sigma = est.half_widths[i * hist.bins + j] / 1.959964;
      CHECK(est.values[i * hist.bins + j] <= avg + 3 * sigma + 1e-12);
      ++checked;
    }
  CHECK(checked == 121);
}

TEST_CASE("scheme-resolved estimates add up to the unfiltered one") {
  const std::vector<double> u{0.0, 0.4, 0.7};
  const HistogramSpec hist{-3, 4, 14};
  const WebSpec web{TimeGrid::uniform(32)};
  const auto all = estimate_scheme_density(u, 1.0, 1, std::nullopt, hist, 2000, 3, web);
  std::vector<double> sum(all.values.size(), 0.0);
  std::vector<std::uint64_t> hits(all.values.size(), 0);
  for (const auto& j : enumerate_all(3)) {
    const auto part = estimate_scheme_density(u, 1.0, 1, j, hist, 2000, 3, web);
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += part.values[i];
      hits[i] += part.hits[i];
    }
  }
  CHECK(hits == all.hits);
  for (std::size_t i = 0; i < sum.size(); ++i) CHECK(sum[i] == doctest::Approx(all.values[i]).epsilon(1e-12));
}

TEST_CASE("density estimator argument checks") {
  const std::vector<double> u{0.0, 1.0};
  CHECK_THROWS_AS(estimate_scheme_density(u, 1.0, 3, std::nullopt, {}, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(estimate_scheme_density(u, 1.0, 2, CoalescenceScheme{2, {1}}, {}, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(estimate_scheme_density(u, 1.0, 1, std::nullopt, {}, 99, 1), std::invalid_argument);
  CHECK_THROWS_AS(estimate_scheme_density(u, 1.0, 1, CoalescenceScheme{3, {1}}, {}, 100, 1), std::invalid_argument);
}

TEST_CASE("serialized estimates") {
  const std::vector<double> u{0.0, 1.0};
  const auto e1 = estimate_scheme_density(u, 1.0, 1, std::nullopt, {-1, 1, 4}, 100, 1, WebSpec{TimeGrid::uniform(8)});
  const auto csv = e1.to_csv();
  CHECK(csv.rfind("bin_left,bin_right,value,half_width\n", 0) == 0);
  const auto e2 = estimate_scheme_density(u, 1.0, 2, std::nullopt, {-1, 1, 4}, 100, 1, WebSpec{TimeGrid::uniform(8)});
  CHECK(e2.to_csv().rfind("bin_left_1,bin_right_1,bin_left_2,bin_right_2,value,half_width\n", 0) == 0);
  CHECK(e2.values.size() == 16);
}

TEST_CASE("refinement gap") {
  const auto coarse = lattice(0.0, 1.0, 0.1);
  const auto fine = lattice(0.0, 1.0, 0.05);
  const WebSpec web{coalescence_grid(0.05)};
  const auto same = refinement_gap(coarse, coarse, 1.0, {}, 500, 2, web);
  CHECK(same.gap == 0.0);
  CHECK(same.std_error == 0.0);
  const auto g = refinement_gap(coarse, fine, 1.0, {0.0, 0.6}, 2000, 2, web);
  CHECK(g.violations == 0);
  CHECK(g.gap >= 0.0);
  CHECK_THROWS_AS(refinement_gap(lattice(0.0, 1.0, 0.3), fine, 1.0, {}, 10, 2, web), std::invalid_argument);
}

TEST_CASE("nested counts: pathwise monotone, exact whole-line means") {
  const std::vector<std::vector<double>> levels{lattice(0, 1, 0.2), lattice(0, 1, 0.1), lattice(0, 1, 0.05)};
  constexpr std::size_t N = 20000;
  const auto nc = nested_atom_counts(levels, 1.0, {}, N, 13, WebSpec{coalescence_grid(0.05)});
  CHECK(nc.violations == 0);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const double gap = 1.0 / double(levels[l].size() - 1);
    // #clusters = 1 + #adjacent pairs that never met.
    const double exact = 1 + double(levels[l].size() - 1) * std::erf(gap / 2);
    INFO("level " << l << " mean " << nc.counts[l].mean << " exact " << exact);
    CHECK(std::abs(nc.counts[l].mean - exact) < 3.5 * nc.counts[l].std_error());
  }
  for (const auto& s : nc.steps) CHECK(s.mean >= 0.0);
}

TEST_CASE("lattices nest bitwise") {
  const auto a = lattice(0, 1, 0.2), b = lattice(0, 1, 0.05);
  for (double x : a) CHECK(std::find(b.begin(), b.end(), x) != b.end());
  CHECK(b.size() == 21);
  CHECK_THROWS_AS(lattice(0, 1, 0.3), std::invalid_argument);
}
