#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "arratia/drift.hpp"
#include "arratia/driver.hpp"
#include "arratia/schemes.hpp"

namespace arratia {

struct MergeEvent {
  double time;
  std::size_t index;  // 1-based position of the lower member among survivors
  bool numerical = false;
};

struct StepOptions {
  // Merge a pair whose endpoint gaps a, b stay positive with the probability
  // exp(-a b / dt) that the (variance 2) gap bridge touched zero in between.
  bool bridge_correction = true;
};

/// n-point motion of coalescing Brownian particles started at ascending points.
///
/// Particles are grouped in clusters that are contiguous in start order. Each
/// cluster moves with the driver of its leader, the member with the best
/// (lowest) priority rank; by default the rank is the start index, so the lower
/// start index survives every merge. Collisions are resolved in rank order: a
/// cluster only ever tests itself against better-ranked clusters, which makes
/// the motion of any rank prefix independent of the remaining particles. With
/// ranks given by refinement level, the image of a coarse start set is therefore
/// pathwise a subset of the image of any finer one on the same drivers.
class ParticleSystem {
 public:
  struct Cluster {
    std::size_t first;   // start indices first..last
    std::size_t last;
    std::size_t leader;  // member whose driver moves the cluster
    double position;
  };

  explicit ParticleSystem(std::vector<double> start_points);
  ParticleSystem(std::vector<double> start_points, std::vector<std::uint32_t> priority_rank);

  std::size_t size() const { return start_.size(); }
  std::span<const double> start_points() const { return start_; }
  double clock() const { return clock_; }

  double position(std::size_t i) const { return leader_pos_[representative(i)]; }
  std::vector<double> positions() const;
  /// Leader of the cluster containing particle i.
  std::size_t representative(std::size_t i) const;

  std::span<const Cluster> clusters() const { return clusters_; }
  std::size_t cluster_count() const { return clusters_.size(); }
  /// Distinct current positions, ascending.
  std::vector<double> cluster_positions() const;

  std::span<const MergeEvent> events() const { return events_; }
  std::size_t numerical_events() const;
  /// Merge indices in event order.
  CoalescenceScheme scheme() const;

  /// Advances every cluster from clock() to t_end and resolves collisions.
  void advance(double t_end, std::span<PathDriver> drivers, const DriftSpec& drift,
               const StepOptions& options = {});

  /// Moves every cluster through the monotone map f at the current clock.
  /// Order violations produced by f are merged and logged as numerical events.
  void apply_map(const std::function<double(double)>& f);

 private:
  std::size_t find(std::size_t i) const;
  void commit(std::span<const std::size_t> head, std::span<const double> final_pos);
  void log_event(double time, std::size_t index, bool numerical);

  std::vector<double> start_;
  std::vector<std::uint32_t> rank_;
  mutable std::vector<std::size_t> parent_;
  std::vector<double> leader_pos_;
  std::vector<Cluster> clusters_;
  std::vector<MergeEvent> events_;
  double clock_ = 0.0;

  struct Scratch {
    std::vector<double> proposed, final_pos;
    std::vector<std::size_t> order, lower, upper, root, head, next, prev, stack;
    std::vector<int> fenwick;
  };
  Scratch work_;
};

/// Copy of `system` advanced by dt.
ParticleSystem step(ParticleSystem system, double dt, std::span<PathDriver> drivers,
                    const DriftSpec& drift, const StepOptions& options = {});

struct FlowRun {
  ParticleSystem system;
  CoalescenceScheme scheme;
};

/// Runs through every knot of `grid`, splitting each cell into
/// `substeps_per_cell` equal steps (the knots of grid.subdivide(substeps)).
FlowRun run(ParticleSystem system, const TimeGrid& grid, std::size_t substeps_per_cell,
            std::span<PathDriver> drivers, const DriftSpec& drift, const StepOptions& options = {});

/// Steps `system` through the sub-knots of `grid` (each cell split into
/// `substeps` equal parts) that lie before t_end, then advances to t_end.
void advance_through(ParticleSystem& system, const TimeGrid& grid, std::size_t substeps, double t_end,
                     std::span<PathDriver> drivers, const DriftSpec& drift, const StepOptions& options = {});

/// Geometric time grid for coalescing runs whose closest start points are
/// `min_gap` apart: first step min_gap^2 * first_fraction, then cells growing
/// by `growth`. Pair merges stay exact in law under bridge correction for any
/// step; the short early steps keep three-particle encounters within one step
/// rare while particles are dense.
TimeGrid coalescence_grid(double min_gap, double first_fraction = 0.05, double growth = 1.1);

/// P(two independent standard Brownian motions started d apart meet by t)
/// = 2 (1 - Phi(d / sqrt(2 t))).
double coalescence_prob_oracle(double d, double t);

/// Priority ranks for `points` given nested start sets `levels` (coarsest
/// first): points of coarser levels rank first, ties broken by start order.
/// Points absent from every level rank last.
std::vector<std::uint32_t> refinement_priority(std::span<const double> points,
                                               std::span<const std::vector<double>> levels);

}  // namespace arratia
