#include "arratia/densities.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "arratia/measures.hpp"

namespace arratia {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

void require_ascending(std::span<const double> v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw std::invalid_argument(fmt::format("km_density: {} must be strictly ascending", what));
}

// GK integral with an absolute error estimate; throws when it exceeds tol.
template <class F>
double integrate(F&& f, double a, double b, const QuadSpec& q, double tol, double& err_out, const char* what) {
  double err = 0.0, l1 = 0.0;
  const double v = GK::integrate(f, a, b, q.max_depth, 1e-12, &err, &l1);
  if (!std::isfinite(v) || err > tol)
    throw QuadratureError(fmt::format("{}: quadrature error estimate {:.3g} exceeds {:.3g}", what, err, tol), err, tol);
  err_out = err;
  return v;
}

}  // namespace

double gauss_kernel(double a, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("gauss_kernel: t must be positive");
  return std::exp(-a * a / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
}

double km_determinant(std::span<const double> x, std::span<const double> y, double t) {
  if (x.empty() || x.size() != y.size()) throw std::invalid_argument("km_density: x and y must have equal, positive length");
  if (!(t > 0.0)) throw std::invalid_argument("km_density: t must be positive");
  const auto m = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) g(i, j) = gauss_kernel(x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)], t);
  // Cofactor expansion for small m keeps column swaps and repeated columns
  // exact (sign flip, zero); pivoted LU does not.
  switch (m) {
    case 1:
      return g(0, 0);
    case 2:
      return g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    case 3:
      return g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0)) +
             g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
    default:
      return g.partialPivLu().determinant();
  }
}

double km_density(std::span<const double> x, std::span<const double> y, double t) {
  require_ascending(x, "x");
  require_ascending(y, "y");
  return km_determinant(x, y, t);
}

double pair_density_free(std::array<double, 2> x, std::array<double, 2> y, double t) { return km_density(x, y, t); }

double pair_density_merged(std::array<double, 2> x, double y, double t, const QuadSpec& quad) {
  if (!(x[1] > x[0])) throw std::invalid_argument("pair_density_merged: need x1 < x2");
  if (!(t > 0.0)) throw std::invalid_argument("pair_density_merged: t must be positive");
  const double d = x[1] - x[0];
  const double mid = 0.5 * (x[0] + x[1]);
  double inner_err = 0.0;
  auto at_time = [&](double t1) {
    if (!(t1 > 0.0) || !(t1 < t)) return 0.0;
    // The z-integrand is a Gaussian bump: precisions 2/t1 (pair) and 1/(t-t1).
    const double prec = 2.0 / t1 + 1.0 / (t - t1);
    const double centre = (mid * 2.0 / t1 + y / (t - t1)) / prec;
    const double half = 12.0 / std::sqrt(prec);
    auto flux = [&](double z) {
      return d / t1 * gauss_kernel(x[0] - z, t1) * gauss_kernel(x[1] - z, t1) * gauss_kernel(z - y, t - t1);
    };
    double e = 0.0;
    const double v = integrate(flux, centre - half, centre + half, quad, quad.abs_tol, e, "pair_density_merged");
    inner_err = std::max(inner_err, e);
    return v;
  };
  double outer_err = 0.0;
  const double v = integrate(at_time, 0.0, t, quad, quad.abs_tol, outer_err, "pair_density_merged");
  const double total_err = outer_err + t * inner_err;
  if (total_err > quad.abs_tol)
    throw QuadratureError(fmt::format("pair_density_merged: combined error {:.3g} exceeds {:.3g}", total_err, quad.abs_tol),
                          total_err, quad.abs_tol);
  return v;
}

double pair_free_mass(std::array<double, 2> x, double t, const QuadSpec& quad) {
  if (!(x[1] > x[0]) || !(t > 0.0)) throw std::invalid_argument("pair_free_mass: need x1 < x2 and t > 0");
  const double reach = 14.0 * std::sqrt(t);
  const double lo = x[0] - reach, hi = x[1] + reach;
  auto row = [&](double y1) {
    auto f = [&](double y2) { return km_determinant(x, std::array<double, 2>{y1, y2}, t); };
    double e = 0.0;
    return integrate(f, y1, hi, quad, quad.abs_tol, e, "pair_free_mass");
  };
  double e = 0.0;
  return integrate(row, lo, hi, quad, quad.abs_tol, e, "pair_free_mass");
}

double pair_merged_mass(std::array<double, 2> x, double t, const QuadSpec& quad) {
  const double reach = 14.0 * std::sqrt(t);
  double e = 0.0;
  return integrate([&](double y) { return pair_density_merged(x, y, t, quad); }, x[0] - reach, x[1] + reach, quad,
                   quad.abs_tol, e, "pair_merged_mass");
}

std::vector<double> HistogramSpec::edges() const {
  if (bins == 0 || !(hi > lo)) throw std::invalid_argument("HistogramSpec: need bins > 0 and lo < hi");
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(bins));
  e.back() = hi;
  return e;
}

std::string DensityEstimate::to_csv() const {
  std::string s;
  if (k == 1) {
    s = "bin_left,bin_right,value,half_width\n";
  } else {
    for (std::size_t c = 1; c <= k; ++c) s += fmt::format("bin_left_{0},bin_right_{0},", c);
    s += "value,half_width\n";
  }
  const std::size_t b = bins();
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t rest = i;
    std::vector<std::size_t> idx(k);
    for (std::size_t c = k; c-- > 0;) {
      idx[c] = rest % b;
      rest /= b;
    }
    for (std::size_t c = 0; c < k; ++c) s += fmt::format("{},{},", bin_edges[idx[c]], bin_edges[idx[c] + 1]);
    s += fmt::format("{},{}\n", values[i], half_widths[i]);
  }
  return s;
}

std::string DensityEstimate::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["bin_edges"] = bin_edges;
  j["values"] = values;
  j["half_widths"] = half_widths;
  j["hits"] = hits;
  j["low_confidence"] = low_confidence;
  j["replicas"] = replicas;
  j["excluded"] = excluded;
  if (scheme_filter) j["scheme"] = scheme_filter->indices;
  else j["scheme"] = nullptr;
  return j.dump();
}

namespace {

struct HistAcc {
  std::vector<double> sum, sumsq;
  std::size_t replicas = 0, excluded = 0;
  void merge(const HistAcc& o) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sumsq[i] += o.sumsq[i];
    }
    replicas += o.replicas;
    excluded += o.excluded;
  }
};

}  // namespace

DensityEstimate estimate_scheme_density(std::span<const double> start, double t, std::size_t k,
                                        const std::optional<CoalescenceScheme>& scheme, const HistogramSpec& hist,
                                        std::size_t replicas, std::uint64_t seed, const WebSpec& web,
                                        unsigned workers) {
  const std::size_t n = start.size();
  if (k < 1 || k > n) throw std::invalid_argument(fmt::format("estimate_scheme_density: k = {} with {} particles", k, n));
  if (k > 3) throw std::invalid_argument("estimate_scheme_density: k above 3 is not supported");
  if (scheme) {
    if (scheme->n != n || !validate(*scheme)) throw std::invalid_argument("estimate_scheme_density: invalid scheme");
    if (k > scheme->blocks())
      throw std::invalid_argument("estimate_scheme_density: k exceeds the number of blocks of the scheme");
  }
  if (replicas < 100) throw std::invalid_argument("estimate_scheme_density: need at least 100 replicas");
  if (!(t > 0.0) || t > 1.0) throw std::invalid_argument("estimate_scheme_density: t must lie in (0, 1]");

  const auto edges = hist.edges();
  const std::size_t b = hist.bins;
  std::size_t cells = 1;
  for (std::size_t c = 0; c < k; ++c) cells *= b;
  const double width = (hist.hi - hist.lo) / static_cast<double>(b);
  const double volume = std::pow(width, static_cast<double>(k));
  const std::vector<double> start_v(start.begin(), start.end());

  auto bin_of = [&](double x) -> std::ptrdiff_t {
    if (!(x >= hist.lo) || !(x < hist.hi)) return -1;
    auto i = static_cast<std::ptrdiff_t>((x - hist.lo) / width);
    return std::min<std::ptrdiff_t>(i, static_cast<std::ptrdiff_t>(b) - 1);
  };

  HistAcc init{std::vector<double>(cells, 0.0), std::vector<double>(cells, 0.0)};
  const auto total = chunked_reduce(replicas, workers, init, [&](std::size_t r, HistAcc& acc) {
    auto drivers = make_drivers(replica_seed(seed, r), start_v, web.grid);
    ParticleSystem sys(start_v);
    advance_through(sys, web.grid, web.substeps, t, drivers, DriftSpec{}, web.options);
    if (sys.numerical_events() > 0) {
      ++acc.excluded;
      return;
    }
    ++acc.replicas;
    if (scheme && sys.scheme() != *scheme) return;
    std::vector<std::ptrdiff_t> bin;
    for (double x : sys.cluster_positions()) bin.push_back(bin_of(x));
    std::vector<std::size_t> touched;
    auto add = [&](std::size_t cell) { touched.push_back(cell); };
    const std::size_t m = bin.size();
    if (k == 1) {
      for (std::size_t i = 0; i < m; ++i)
        if (bin[i] >= 0) add(static_cast<std::size_t>(bin[i]));
    } else if (k == 2) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          if (i != j && bin[i] >= 0 && bin[j] >= 0) add(static_cast<std::size_t>(bin[i]) * b + static_cast<std::size_t>(bin[j]));
    } else {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t l = 0; l < m; ++l)
            if (i != j && i != l && j != l && bin[i] >= 0 && bin[j] >= 0 && bin[l] >= 0)
              add((static_cast<std::size_t>(bin[i]) * b + static_cast<std::size_t>(bin[j])) * b +
                  static_cast<std::size_t>(bin[l]));
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t i = 0; i < touched.size();) {
      std::size_t j = i;
      while (j < touched.size() && touched[j] == touched[i]) ++j;
      const double c = static_cast<double>(j - i);
      acc.sum[touched[i]] += c;
      acc.sumsq[touched[i]] += c * c;
      i = j;
    }
  });

  DensityEstimate est;
  est.bin_edges = edges;
  est.k = k;
  est.scheme_filter = scheme;
  est.replicas = total.replicas;
  est.excluded = total.excluded;
  est.values.resize(cells);
  est.half_widths.resize(cells);
  est.hits.resize(cells);
  est.low_confidence.resize(cells);
  const double N = static_cast<double>(total.replicas);
  const double z = normal_quantile(0.975);
  for (std::size_t i = 0; i < cells; ++i) {
    const double s = total.sum[i];
    est.values[i] = N > 0 ? s / (N * volume) : 0.0;
    const double var = N > 1 ? std::max(0.0, (total.sumsq[i] - s * s / N) / (N - 1.0)) : 0.0;
    est.half_widths[i] = N > 0 ? z * std::sqrt(var / N) / volume : 0.0;
    est.hits[i] = static_cast<std::uint64_t>(s);
    est.low_confidence[i] = est.hits[i] < 20;
  }
  return est;
}

namespace {

struct NestedAcc {
  std::vector<Accumulator> counts, gaps, steps;
  std::size_t violations = 0;
  void merge(const NestedAcc& o) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
      counts[i].merge(o.counts[i]);
      gaps[i].merge(o.gaps[i]);
    }
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i].merge(o.steps[i]);
    violations += o.violations;
  }
};

}  // namespace

NestedCounts nested_atom_counts(std::span<const std::vector<double>> levels, double t, Interval target,
                                std::size_t replicas, std::uint64_t seed, const WebSpec& web, unsigned workers) {
  if (levels.empty()) throw std::invalid_argument("nested_atom_counts: no levels");
  if (replicas < 1) throw std::invalid_argument("nested_atom_counts: need replicas");
  if (!(t > 0.0) || t > 1.0) throw std::invalid_argument("nested_atom_counts: t must lie in (0, 1]");
  const auto& finest = levels.back();
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
    std::unordered_set<std::uint64_t> next;
    for (double u : levels[l + 1]) next.insert(std::bit_cast<std::uint64_t>(u));
    for (double u : levels[l])
      if (!next.count(std::bit_cast<std::uint64_t>(u)))
        throw std::invalid_argument(fmt::format("nested_atom_counts: level {} is not contained in level {}", l, l + 1));
  }
  const auto ranks = refinement_priority(finest, levels);
  // Particle indices of each level inside the finest system.
  std::vector<std::vector<std::size_t>> members(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l)
    for (double u : levels[l])
      members[l].push_back(static_cast<std::size_t>(std::lower_bound(finest.begin(), finest.end(), u) - finest.begin()));

  const std::size_t L = levels.size();
  NestedAcc init{std::vector<Accumulator>(L), std::vector<Accumulator>(L), std::vector<Accumulator>(L - 1)};
  const auto total = chunked_reduce(replicas, workers, init, [&](std::size_t r, NestedAcc& acc) {
    auto drivers = make_drivers(replica_seed(seed, r), finest, web.grid, DriverKeying::by_location);
    ParticleSystem sys(finest, ranks);
    advance_through(sys, web.grid, web.substeps, t, drivers, DriftSpec{}, web.options);
    std::vector<double> count(L);
    std::vector<std::size_t> seen;
    for (std::size_t l = 0; l < L; ++l) {
      seen.clear();
      for (std::size_t i : members[l]) {
        const std::size_t rep = sys.representative(i);
        if (target.contains(sys.position(i))) seen.push_back(rep);
      }
      std::sort(seen.begin(), seen.end());
      count[l] = static_cast<double>(std::unique(seen.begin(), seen.end()) - seen.begin());
    }
    bool bad = false;
    for (std::size_t l = 0; l < L; ++l) {
      acc.counts[l].add(count[l]);
      acc.gaps[l].add(count[L - 1] - count[l]);
      if (l + 1 < L) {
        acc.steps[l].add(count[l + 1] - count[l]);
        if (count[l + 1] < count[l]) bad = true;
      }
    }
    if (bad) ++acc.violations;
  });
  return {total.counts, total.gaps, total.steps, total.violations, replicas};
}

GapEstimate refinement_gap(std::span<const double> coarse, std::span<const double> fine, double t, Interval target,
                           std::size_t replicas, std::uint64_t seed, const WebSpec& web, unsigned workers) {
  const std::vector<std::vector<double>> levels{{coarse.begin(), coarse.end()}, {fine.begin(), fine.end()}};
  const auto nc = nested_atom_counts(levels, t, target, replicas, seed, web, workers);
  return {nc.gaps[0].mean, nc.gaps[0].std_error(), nc.violations};
}

std::vector<double> lattice(double lo, double hi, double gap) {
  if (!(gap > 0.0) || !(hi >= lo)) throw std::invalid_argument("lattice: need gap > 0 and lo <= hi");
  const double steps = (hi - lo) / gap;
  const auto count = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(count)) > 1e-9 * std::max(1.0, steps))
    throw std::invalid_argument("lattice: gap must divide the range");
  std::vector<double> pts(count + 1);
  for (std::size_t i = 0; i <= count; ++i)
    pts[i] = count == 0 ? lo : lo + ((hi - lo) * static_cast<double>(i)) / static_cast<double>(count);
  return pts;
}

}  // namespace arratia
