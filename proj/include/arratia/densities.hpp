#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arratia/driver.hpp"
#include "arratia/flow.hpp"
#include "arratia/schemes.hpp"
#include "arratia/stats.hpp"

namespace arratia {

/// Heat kernel g_t(a) = exp(-a^2 / 2t) / sqrt(2 pi t).
double gauss_kernel(double a, double t);

/// det[g_t(x_i - y_j)] for any coordinates (no ordering check).
double km_determinant(std::span<const double> x, std::span<const double> y, double t);
/// Transition density of m ordered Brownian particles killed when two meet.
/// Requires strictly ascending x and y.
double km_density(std::span<const double> x, std::span<const double> y, double t);

/// Density of two non-merged particles at y given start x.
double pair_density_free(std::array<double, 2> x, std::array<double, 2> y, double t);

struct QuadSpec {
  double abs_tol = 1e-9;
  unsigned max_depth = 18;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved, double requested)
      : std::runtime_error(what), achieved_(achieved), requested_(requested) {}
  double achieved() const { return achieved_; }
  double requested() const { return requested_; }

 private:
  double achieved_;
  double requested_;
};

/// Density at y of the merged pair started at x1 < x2:
///   int_0^t dt1 int dz  d/t1 * g_t1(x1 - z) g_t1(x2 - z) * g_{t-t1}(z - y),  d = x2 - x1,
/// where d/t1 * g g is the probability flux -1/2 (d1 - d2) p through the
/// diagonal of the killed two-particle density p. Nested adaptive
/// Gauss-Kronrod quadrature; throws QuadratureError if the error estimate
/// exceeds quad.abs_tol.
double pair_density_merged(std::array<double, 2> x, double y, double t, const QuadSpec& quad = {});

/// Integral of pair_density_free(x, .) over y1 < y2 (probability of no merge).
double pair_free_mass(std::array<double, 2> x, double t, const QuadSpec& quad = {});
/// Integral of pair_density_merged(x, .) over the line (probability of a merge).
double pair_merged_mass(std::array<double, 2> x, double t, const QuadSpec& quad = {});

struct HistogramSpec {
  double lo = -3.0;
  double hi = 3.0;
  std::size_t bins = 40;
  std::vector<double> edges() const;
};

/// Histogram estimate of a k-point density. For k >= 2 the values are
/// indexed row-major over a bins^k product grid of the shared 1-D edges.
struct DensityEstimate {
  std::vector<double> bin_edges;
  std::vector<double> values;
  std::vector<double> half_widths;  // 95% normal-approximation interval
  std::vector<std::uint64_t> hits;
  std::vector<bool> low_confidence;  // fewer than 20 hits
  std::size_t k = 1;
  std::optional<CoalescenceScheme> scheme_filter;
  std::size_t replicas = 0;
  std::size_t excluded = 0;  // replicas with numerical merge events

  std::size_t bins() const { return bin_edges.size() - 1; }
  /// Columns bin_left_1, bin_right_1, ..., value, half_width (for k = 1:
  /// bin_left, bin_right, value, half_width).
  std::string to_csv() const;
  std::string to_json() const;
};

struct WebSpec {
  TimeGrid grid = TimeGrid::uniform(1024);
  std::size_t substeps = 1;
  StepOptions options;
};

/// Monte Carlo estimate of the k-point density of the driftless motion from
/// `start` at time t, optionally restricted to replicas whose realized scheme
/// equals `scheme`. Each replica contributes one count per ordered k-tuple of
/// distinct terminal points.
DensityEstimate estimate_scheme_density(std::span<const double> start, double t, std::size_t k,
                                        const std::optional<CoalescenceScheme>& scheme, const HistogramSpec& hist,
                                        std::size_t replicas, std::uint64_t seed, const WebSpec& web = {},
                                        unsigned workers = 1);

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Atom counts in A of nested start sets (coarsest first) simulated as one
/// system on location-keyed drivers, with coarser points ranked first so that
/// every level is an exact sub-system of the finest.
struct NestedCounts {
  std::vector<Accumulator> counts;  // per level
  std::vector<Accumulator> gaps;    // finest count minus level count
  std::vector<Accumulator> steps;   // level l+1 count minus level l count
  std::size_t violations = 0;       // replicas where some count decreased under refinement
  std::size_t replicas = 0;
};

NestedCounts nested_atom_counts(std::span<const std::vector<double>> levels, double t, Interval target,
                                std::size_t replicas, std::uint64_t seed, const WebSpec& web, unsigned workers = 1);

struct GapEstimate {
  double gap = 0.0;
  double std_error = 0.0;
  std::size_t violations = 0;
};

/// E[#atoms of the fine run in A] - E[#atoms of the coarse run in A].
GapEstimate refinement_gap(std::span<const double> coarse, std::span<const double> fine, double t, Interval target,
                           std::size_t replicas, std::uint64_t seed, const WebSpec& web, unsigned workers = 1);

/// Points lo, lo + gap, ..., hi (hi included when it falls on the lattice).
std::vector<double> lattice(double lo, double hi, double gap);

}  // namespace arratia
