#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arratia/drift.hpp"
#include "arratia/driver.hpp"
#include "arratia/flow.hpp"
#include "arratia/splitting.hpp"

namespace arratia {

/// Probability measure with finitely many atoms: strictly ascending locations,
/// positive masses summing to 1 (within 1e-12).
class AtomicMeasure {
 public:
  AtomicMeasure(std::vector<double> locations, std::vector<double> masses);

  /// Sorts, merges bitwise-equal locations, drops zero masses and normalizes.
  static AtomicMeasure from_weighted(std::vector<std::pair<double, double>> atoms);
  static AtomicMeasure dirac(double x) { return AtomicMeasure({x}, {1.0}); }

  std::span<const double> locations() const { return loc_; }
  std::span<const double> masses() const { return mass_; }
  std::size_t size() const { return loc_.size(); }

  /// "location,mass" header followed by one row per atom.
  std::string to_csv() const;
  static AtomicMeasure from_csv(std::string_view text);
  /// JSON array of [location, mass] pairs.
  std::string to_json() const;
  static AtomicMeasure from_json(std::string_view text);

  friend bool operator==(const AtomicMeasure&, const AtomicMeasure&) = default;

 private:
  std::vector<double> loc_;
  std::vector<double> mass_;
};

/// Atom at each distinct position, mass (multiplicity) / m.
AtomicMeasure pushforward_uniform(std::span<const double> positions, std::size_t m);

/// Image of Lebesgue measure on [cell_edges.front(), cell_edges.back()]
/// discretized by particles: particle i stands for the start cell
/// [cell_edges[i], cell_edges[i+1]] and is mapped to positions[cluster_map[i]].
/// Masses are normalized by the total length.
AtomicMeasure pushforward_lebesgue(std::span<const double> cell_edges, std::span<const std::size_t> cluster_map,
                                   std::span<const double> positions);

/// Cell edges for start points inside [lo, hi]: the ends and the midpoints
/// between consecutive points.
std::vector<double> midpoint_edges(std::span<const double> points, double lo = 0.0, double hi = 1.0);

/// Exact W_p between two atomic measures through the quantile coupling.
double wasserstein(const AtomicMeasure& mu, const AtomicMeasure& nu, double p);

/// j/m for j = 0, ..., m-1.
std::vector<double> uniform_start_points(std::size_t m);

/// How one replica of a flow-induced random measure is produced.
struct FlowMeasureSpec {
  enum class Method { flow, split };
  enum class Weights { uniform, lebesgue };

  Method method = Method::flow;
  Weights weights = Weights::uniform;
  std::vector<double> start_points;
  DriftSpec drift;
  double t = 1.0;
  TimeGrid driver_grid = TimeGrid::uniform(1024);  // base grid of the drivers
  TimeGrid flow_grid = TimeGrid::uniform(1024);    // steps of the direct flow
  std::size_t flow_substeps = 1;
  SplitScheme split{TimeGrid::uniform(1), DriftSpec{}, 8, 1024};
  DriverKeying keying = DriverKeying::by_index;
  StepOptions options;
};

/// Runs one replica with drivers derived from `seed` and returns the final
/// particle system.
ParticleSystem simulate(const FlowMeasureSpec& spec, std::uint64_t seed);
AtomicMeasure sample_flow_measure(const FlowMeasureSpec& spec, std::uint64_t seed);
AtomicMeasure measure_of(const FlowMeasureSpec& spec, const ParticleSystem& system);

struct LawDistanceEstimate {
  double point_estimate = 0.0;
  double std_error = 0.0;
  std::size_t replicas = 0;  // successful replicas
  std::size_t failed = 0;
  double p = 1.0;
};

/// Builds a measure from a replica seed. Two samplers fed the same seed share
/// their drivers, which is the coupling.
using MeasureSampler = std::function<AtomicMeasure(std::uint64_t seed)>;

/// Mean and standard error of W_p(A, B) over replicas of the shared-driver
/// coupling, an upper bound for the transport distance between the laws.
/// Replica r uses replica_seed(seed, r). Throwing replicas are skipped and
/// counted.
LawDistanceEstimate estimate_law_distance(const MeasureSampler& a, const MeasureSampler& b, double p,
                                          std::size_t replicas, std::uint64_t seed, unsigned workers = 1);

}  // namespace arratia
