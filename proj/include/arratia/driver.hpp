#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace arratia {

// Counter-based hashing. Every random number in the library is a pure function
// of (seed, stream, tag, counter), so replicas never share generator state.
std::uint64_t mix64(std::uint64_t z);
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag,
                           std::uint64_t counter);
// Maps a 64-bit word to the open interval (0, 1).
double to_unit(std::uint64_t bits);
// Standard normal pair from two counter words (Box-Muller).
std::pair<double, double> normal_pair(std::uint64_t a, std::uint64_t b);

// Seed of replica `index` derived from a master seed. Keyed by index only, so
// growing the replica count extends the sample instead of reshuffling it.
std::uint64_t replica_seed(std::uint64_t master, std::uint64_t index);

// Stream key of a particle identified by its start location rather than its
// position in a start set. Nested start sets then share drivers pathwise.
std::uint64_t location_key(double u);

/// Ascending time knots 0 = t_0 < ... < t_n = 1.
///
/// Cheap to copy: knots live in shared immutable storage.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> knots);

  /// t_j = j / cells.
  static TimeGrid uniform(std::size_t cells);
  /// 0, first, first*growth, first*growth^2, ..., 1.
  static TimeGrid geometric(double first, double growth);

  /// Splits every cell into `parts` equal sub-cells (see `sub_knot`).
  TimeGrid subdivide(std::size_t parts) const;
  /// True if every knot of `coarse` is also a knot of this grid.
  bool refines(const TimeGrid& coarse) const;

  std::span<const double> knots() const { return *knots_; }
  std::size_t cells() const { return knots_->size() - 1; }
  double mesh() const { return mesh_; }
  double operator[](std::size_t i) const { return (*knots_)[i]; }

  /// Index of a knot equal to t (bitwise), if any.
  std::optional<std::size_t> index_of(double t) const;

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.knots_ == b.knots_ || *a.knots_ == *b.knots_;
  }

 private:
  std::shared_ptr<const std::vector<double>> knots_;
  double mesh_ = 0.0;
};

/// k-th of `parts` equal sub-knots of [a, b]; k == parts returns b exactly.
double sub_knot(double a, double b, std::size_t k, std::size_t parts);

/// Seeded Brownian path w on [0, 1] with w(0) = 0.
///
/// Values on the base grid are generated lazily and sequentially from
/// independent Gaussian increments keyed by (seed, particle, knot index). Any
/// other time is inserted on first use by Brownian-bridge sampling between its
/// nearest known neighbours, keyed by the bit pattern of the time. Known values
/// never change afterwards, so increments are additive over any subdivision and
/// reproducible for a fixed query sequence.
class PathDriver {
 public:
  PathDriver(std::uint64_t seed, std::uint64_t particle, TimeGrid base_grid);

  /// Driver with prescribed knot values (values[0] must be 0). Off-grid times
  /// are still bridge-sampled.
  static PathDriver scripted(TimeGrid grid, std::vector<double> values,
                             std::uint64_t seed = 0, std::uint64_t particle = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t particle() const { return particle_; }
  const TimeGrid& grid() const { return grid_; }

  /// w(t) for t in [0, 1].
  double value(double t);
  /// w(t) - w(s); requires 0 <= s < t <= 1.
  double increment(double s, double t);

  /// Copy of this driver declared on a finer grid. New knots are filled by
  /// bridge sampling on demand; every previously returned value is kept.
  PathDriver refine(const TimeGrid& grid) const;

  /// Auxiliary uniform in (0, 1) keyed by this driver's stream, independent of
  /// the path itself.
  double uniform(std::uint64_t tag, std::uint64_t salt, double t) const;

 private:
  double base_value(std::size_t index);
  double bridge_value(double t);

  std::uint64_t seed_;
  std::uint64_t particle_;
  TimeGrid base_;
  TimeGrid grid_;
  std::vector<double> values_;  // materialized prefix of base-grid values
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
  std::map<double, double> extra_;  // bridge-sampled off-grid points
};

/// One driver per start point, all on the same base grid.
enum class DriverKeying { by_index, by_location };
std::vector<PathDriver> make_drivers(std::uint64_t seed, std::span<const double> start_points,
                                     const TimeGrid& base_grid,
                                     DriverKeying keying = DriverKeying::by_index);

}  // namespace arratia
