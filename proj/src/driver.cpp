#include "arratia/driver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace arratia {

namespace {

constexpr std::uint64_t kBaseIncrementTag = 0x62617365ULL;  // "base"
constexpr std::uint64_t kBridgeTag = 0x62726467ULL;         // "brdg"
constexpr std::uint64_t kReplicaTag = 0x7265706cULL;        // "repl"

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag,
                           std::uint64_t counter) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ stream);
  h = mix64(h ^ tag);
  return mix64(h ^ counter);
}

double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1p-53;
}

std::pair<double, double> normal_pair(std::uint64_t a, std::uint64_t b) {
  const double r = std::sqrt(-2.0 * std::log(to_unit(a)));
  const double theta = 2.0 * std::numbers::pi * to_unit(b);
  return {r * std::cos(theta), r * std::sin(theta)};
}

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t index) {
  return counter_hash(master, index, kReplicaTag, 0);
}

std::uint64_t location_key(double u) {
  // +0.0 and -0.0 name the same start point.
  if (u == 0.0) u = 0.0;
  return std::bit_cast<std::uint64_t>(u);
}

// ---------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(std::vector<double> knots) {
  if (knots.size() < 2) throw std::invalid_argument("TimeGrid: need at least two knots");
  if (knots.front() != 0.0) throw std::invalid_argument("TimeGrid: first knot must be 0");
  if (knots.back() != 1.0) throw std::invalid_argument("TimeGrid: last knot must be 1");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1]))
      throw std::invalid_argument("TimeGrid: knots must be strictly ascending");
    mesh_ = std::max(mesh_, knots[i] - knots[i - 1]);
  }
  knots_ = std::make_shared<const std::vector<double>>(std::move(knots));
}

TimeGrid TimeGrid::uniform(std::size_t cells) {
  if (cells == 0) throw std::invalid_argument("TimeGrid::uniform: cells must be positive");
  std::vector<double> k(cells + 1);
  for (std::size_t j = 0; j <= cells; ++j)
    k[j] = static_cast<double>(j) / static_cast<double>(cells);
  return TimeGrid(std::move(k));
}

TimeGrid TimeGrid::geometric(double first, double growth) {
  if (!(first > 0.0 && first < 1.0) || !(growth > 1.0))
    throw std::invalid_argument("TimeGrid::geometric: need 0 < first < 1 and growth > 1");
  std::vector<double> k{0.0};
  for (double t = first; t < 1.0; t *= growth) k.push_back(t);
  // Avoid a sliver cell right before 1.
  if (k.size() > 2 && 1.0 - k.back() < 0.5 * (k.back() - k[k.size() - 2])) k.pop_back();
  k.push_back(1.0);
  return TimeGrid(std::move(k));
}

double sub_knot(double a, double b, std::size_t k, std::size_t parts) {
  if (k == 0) return a;
  if (k >= parts) return b;
  return a + (b - a) * (static_cast<double>(k) / static_cast<double>(parts));
}

TimeGrid TimeGrid::subdivide(std::size_t parts) const {
  if (parts == 0) throw std::invalid_argument("TimeGrid::subdivide: parts must be positive");
  if (parts == 1) return *this;
  const auto& k = *knots_;
  std::vector<double> out;
  out.reserve(cells() * parts + 1);
  for (std::size_t j = 0; j + 1 < k.size(); ++j)
    for (std::size_t i = 0; i < parts; ++i) out.push_back(sub_knot(k[j], k[j + 1], i, parts));
  out.push_back(1.0);
  return TimeGrid(std::move(out));
}

bool TimeGrid::refines(const TimeGrid& coarse) const {
  for (double t : coarse.knots())
    if (!index_of(t)) return false;
  return true;
}

std::optional<std::size_t> TimeGrid::index_of(double t) const {
  const auto& k = *knots_;
  if (!(t >= 0.0 && t <= 1.0)) return std::nullopt;
  // Exact hit for (near-)uniform grids without a search.
  const auto n = static_cast<double>(k.size() - 1);
  const auto guess = static_cast<std::size_t>(std::lround(t * n));
  for (std::size_t g : {guess, guess - 1, guess + 1})
    if (g < k.size() && k[g] == t) return g;
  auto it = std::lower_bound(k.begin(), k.end(), t);
  if (it != k.end() && *it == t) return static_cast<std::size_t>(it - k.begin());
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// PathDriver

PathDriver::PathDriver(std::uint64_t seed, std::uint64_t particle, TimeGrid base_grid)
    : seed_(seed), particle_(particle), base_(base_grid), grid_(std::move(base_grid)) {
  values_.reserve(base_.knots().size());
  values_.push_back(0.0);
}

PathDriver PathDriver::scripted(TimeGrid grid, std::vector<double> values, std::uint64_t seed,
                                std::uint64_t particle) {
  if (values.size() != grid.knots().size())
    throw std::invalid_argument("PathDriver::scripted: one value per knot required");
  if (values.front() != 0.0) throw std::invalid_argument("PathDriver::scripted: w(0) must be 0");
  PathDriver d(seed, particle, std::move(grid));
  d.values_ = std::move(values);
  return d;
}

double PathDriver::base_value(std::size_t index) {
  while (values_.size() <= index) {
    const std::size_t i = values_.size() - 1;  // increment over [t_i, t_{i+1}]
    double z;
    if (has_spare_) {
      z = spare_normal_;
      has_spare_ = false;
    } else {
      const std::uint64_t pair = i / 2;
      auto [z0, z1] = normal_pair(counter_hash(seed_, particle_, kBaseIncrementTag, 2 * pair),
                                  counter_hash(seed_, particle_, kBaseIncrementTag, 2 * pair + 1));
      z = z0;
      spare_normal_ = z1;
      has_spare_ = true;
    }
    const double dt = base_[i + 1] - base_[i];
    values_.push_back(values_.back() + std::sqrt(dt) * z);
  }
  return values_[index];
}

double PathDriver::value(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("PathDriver::value: time outside [0, 1]: " + std::to_string(t));
  if (auto idx = base_.index_of(t)) return base_value(*idx);
  if (auto it = extra_.find(t); it != extra_.end()) return it->second;
  return bridge_value(t);
}

double PathDriver::bridge_value(double t) {
  const auto knots = base_.knots();
  auto hi = std::upper_bound(knots.begin(), knots.end(), t);
  const auto hi_idx = static_cast<std::size_t>(hi - knots.begin());
  double tl = knots[hi_idx - 1];
  double tr = knots[hi_idx];
  double wl = base_value(hi_idx - 1);
  double wr = base_value(hi_idx);

  auto above = extra_.upper_bound(t);
  if (above != extra_.end() && above->first < tr) {
    tr = above->first;
    wr = above->second;
  }
  if (above != extra_.begin()) {
    auto below = std::prev(above);
    if (below->first > tl) {
      tl = below->first;
      wl = below->second;
    }
  }

  const std::uint64_t key = std::bit_cast<std::uint64_t>(t);
  const double z = normal_pair(counter_hash(seed_, particle_, kBridgeTag, 2 * key),
                               counter_hash(seed_, particle_, kBridgeTag, 2 * key + 1))
                       .first;
  const double span = tr - tl;
  const double mean = wl + (t - tl) / span * (wr - wl);
  const double sd = std::sqrt((t - tl) * (tr - t) / span);
  const double w = mean + sd * z;
  extra_.emplace(t, w);
  return w;
}

double PathDriver::increment(double s, double t) {
  if (!(s < t)) throw std::invalid_argument("PathDriver::increment: need s < t");
  if (!(s >= 0.0 && t <= 1.0))
    throw std::invalid_argument("PathDriver::increment: interval outside [0, 1]");
  // Order matters only for reproducibility: left endpoint first.
  const double ws = value(s);
  return value(t) - ws;
}

PathDriver PathDriver::refine(const TimeGrid& grid) const {
  if (!grid.refines(grid_))
    throw std::invalid_argument("PathDriver::refine: grid does not refine the driver's grid");
  PathDriver out = *this;
  out.grid_ = grid;
  return out;
}

double PathDriver::uniform(std::uint64_t tag, std::uint64_t salt, double t) const {
  return to_unit(counter_hash(seed_ ^ mix64(salt), particle_, tag, std::bit_cast<std::uint64_t>(t)));
}

std::vector<PathDriver> make_drivers(std::uint64_t seed, std::span<const double> start_points,
                                     const TimeGrid& base_grid, DriverKeying keying) {
  std::vector<PathDriver> out;
  out.reserve(start_points.size());
  for (std::size_t i = 0; i < start_points.size(); ++i) {
    const std::uint64_t key =
        keying == DriverKeying::by_index ? static_cast<std::uint64_t>(i) : location_key(start_points[i]);
    out.emplace_back(seed, key, base_grid);
  }
  return out;
}

}  // namespace arratia
