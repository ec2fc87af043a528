#include "arratia/measures.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "arratia/stats.hpp"

namespace arratia {

AtomicMeasure::AtomicMeasure(std::vector<double> locations, std::vector<double> masses)
    : loc_(std::move(locations)), mass_(std::move(masses)) {
  if (loc_.empty() || loc_.size() != mass_.size())
    throw std::invalid_argument("AtomicMeasure: need equally many locations and masses, at least one");
  double total = 0.0;
  for (std::size_t i = 0; i < loc_.size(); ++i) {
    if (!std::isfinite(loc_[i])) throw std::invalid_argument("AtomicMeasure: locations must be finite");
    if (i > 0 && !(loc_[i] > loc_[i - 1]))
      throw std::invalid_argument("AtomicMeasure: locations must be strictly ascending");
    if (!(mass_[i] > 0.0) || !std::isfinite(mass_[i]))
      throw std::invalid_argument("AtomicMeasure: masses must be positive");
    total += mass_[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument(fmt::format("AtomicMeasure: masses sum to {}, not 1", total));
}

AtomicMeasure AtomicMeasure::from_weighted(std::vector<std::pair<double, double>> atoms) {
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> loc, mass;
  double total = 0.0;
  for (const auto& [x, w] : atoms) {
    if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("AtomicMeasure: negative weight");
    if (w == 0.0) continue;
    total += w;
    if (!loc.empty() && loc.back() == x) {
      mass.back() += w;
    } else {
      loc.push_back(x);
      mass.push_back(w);
    }
  }
  if (!(total > 0.0)) throw std::invalid_argument("AtomicMeasure: total weight must be positive");
  for (auto& m : mass) m /= total;
  return AtomicMeasure(std::move(loc), std::move(mass));
}

std::string AtomicMeasure::to_csv() const {
  std::string s = "location,mass\n";
  for (std::size_t i = 0; i < loc_.size(); ++i) s += fmt::format("{},{}\n", loc_[i], mass_[i]);
  return s;
}

AtomicMeasure AtomicMeasure::from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "location,mass")
    throw std::invalid_argument("AtomicMeasure::from_csv: expected header 'location,mass'");
  std::vector<double> loc, mass;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("AtomicMeasure::from_csv: malformed row: " + line);
    loc.push_back(std::stod(line.substr(0, comma)));
    mass.push_back(std::stod(line.substr(comma + 1)));
  }
  return AtomicMeasure(std::move(loc), std::move(mass));
}

std::string AtomicMeasure::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < loc_.size(); ++i) j.push_back({loc_[i], mass_[i]});
  return j.dump();
}

AtomicMeasure AtomicMeasure::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_array()) throw std::invalid_argument("AtomicMeasure::from_json: expected an array of pairs");
  std::vector<double> loc, mass;
  for (const auto& atom : j) {
    if (!atom.is_array() || atom.size() != 2)
      throw std::invalid_argument("AtomicMeasure::from_json: atoms are [location, mass] pairs");
    loc.push_back(atom[0].get<double>());
    mass.push_back(atom[1].get<double>());
  }
  return AtomicMeasure(std::move(loc), std::move(mass));
}

AtomicMeasure pushforward_uniform(std::span<const double> positions, std::size_t m) {
  if (positions.empty() || m == 0) throw std::invalid_argument("pushforward_uniform: empty input");
  if (positions.size() != m)
    throw std::invalid_argument(fmt::format("pushforward_uniform: {} positions for m = {}", positions.size(), m));
  std::vector<double> sorted(positions.begin(), positions.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> loc, mass;
  const double unit = 1.0 / static_cast<double>(m);
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    loc.push_back(sorted[i]);
    mass.push_back(static_cast<double>(j - i) * unit);
    i = j;
  }
  return AtomicMeasure(std::move(loc), std::move(mass));
}

AtomicMeasure pushforward_lebesgue(std::span<const double> cell_edges, std::span<const std::size_t> cluster_map,
                                   std::span<const double> positions) {
  const std::size_t k = cluster_map.size();
  if (k == 0 || cell_edges.size() != k + 1)
    throw std::invalid_argument("pushforward_lebesgue: need one cell (two edges) per particle");
  for (std::size_t i = 0; i < k; ++i)
    if (!(cell_edges[i + 1] > cell_edges[i]))
      throw std::invalid_argument("pushforward_lebesgue: cell edges must be strictly ascending");
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r = cluster_map[i];
    if (r >= positions.size()) throw std::logic_error("pushforward_lebesgue: cluster map points outside positions");
    if (cluster_map[r] != r) throw std::logic_error("pushforward_lebesgue: representative is not its own representative");
    atoms.emplace_back(positions[r], cell_edges[i + 1] - cell_edges[i]);
  }
  return AtomicMeasure::from_weighted(std::move(atoms));
}

std::vector<double> midpoint_edges(std::span<const double> points, double lo, double hi) {
  if (points.empty()) throw std::invalid_argument("midpoint_edges: no points");
  if (points.front() < lo || points.back() > hi) throw std::invalid_argument("midpoint_edges: points outside range");
  std::vector<double> edges{lo};
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i] > points[i - 1])) throw std::invalid_argument("midpoint_edges: points must be strictly ascending");
    edges.push_back(0.5 * (points[i - 1] + points[i]));
  }
  edges.push_back(hi);
  return edges;
}

namespace {

// Cumulative masses with the last entry pinned to exactly 1.
std::vector<double> cumulative(std::span<const double> mass) {
  std::vector<double> c(mass.size());
  double s = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) c[i] = (s += mass[i]);
  for (auto& v : c) v /= s;
  c.back() = 1.0;
  return c;
}

}  // namespace

double wasserstein(const AtomicMeasure& mu, const AtomicMeasure& nu, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("wasserstein: p must be at least 1");
  const auto F = cumulative(mu.masses());
  const auto G = cumulative(nu.masses());
  const auto x = mu.locations();
  const auto y = nu.locations();
  double total = 0.0, q = 0.0;
  std::size_t i = 0, j = 0;
  while (i < F.size() && j < G.size()) {
    const double next = std::min(F[i], G[j]);
    if (next > q) total += (next - q) * std::pow(std::abs(x[i] - y[j]), p);
    q = next;
    if (F[i] <= next) ++i;
    if (G[j] <= next) ++j;
  }
  return std::pow(total, 1.0 / p);
}

std::vector<double> uniform_start_points(std::size_t m) {
  if (m == 0) throw std::invalid_argument("uniform_start_points: m must be positive");
  std::vector<double> u(m);
  for (std::size_t j = 0; j < m; ++j) u[j] = static_cast<double>(j) / static_cast<double>(m);
  return u;
}

ParticleSystem simulate(const FlowMeasureSpec& spec, std::uint64_t seed) {
  if (!(spec.t > 0.0) || spec.t > 1.0) throw std::invalid_argument("simulate: t must lie in (0, 1]");
  auto drivers = make_drivers(seed, spec.start_points, spec.driver_grid, spec.keying);
  ParticleSystem system(spec.start_points);
  if (spec.method == FlowMeasureSpec::Method::split) {
    SplitScheme scheme = spec.split;
    scheme.drift = spec.drift;
    return run_split_flow(std::move(system), scheme, drivers, spec.t, spec.options).system;
  }
  advance_through(system, spec.flow_grid, spec.flow_substeps, spec.t, drivers, spec.drift, spec.options);
  return system;
}

AtomicMeasure measure_of(const FlowMeasureSpec& spec, const ParticleSystem& system) {
  const auto pos = system.positions();
  if (spec.weights == FlowMeasureSpec::Weights::uniform) return pushforward_uniform(pos, pos.size());
  std::vector<std::size_t> map(system.size());
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = system.representative(i);
  const auto edges = midpoint_edges(spec.start_points, std::min(0.0, spec.start_points.front()),
                                    std::max(1.0, spec.start_points.back()));
  return pushforward_lebesgue(edges, map, pos);
}

AtomicMeasure sample_flow_measure(const FlowMeasureSpec& spec, std::uint64_t seed) {
  return measure_of(spec, simulate(spec, seed));
}

namespace {

struct DistanceAcc {
  Accumulator acc;
  std::size_t failed = 0;
  void merge(const DistanceAcc& o) {
    acc.merge(o.acc);
    failed += o.failed;
  }
};

}  // namespace

LawDistanceEstimate estimate_law_distance(const MeasureSampler& a, const MeasureSampler& b, double p,
                                          std::size_t replicas, std::uint64_t seed, unsigned workers) {
  if (replicas < 2) throw std::invalid_argument("estimate_law_distance: need at least two replicas");
  if (!(p >= 1.0)) throw std::invalid_argument("estimate_law_distance: p must be at least 1");
  const auto total = chunked_reduce(replicas, workers, DistanceAcc{}, [&](std::size_t r, DistanceAcc& acc) {
    const std::uint64_t s = replica_seed(seed, r);
    try {
      acc.acc.add(wasserstein(a(s), b(s), p));
    } catch (const std::exception&) {
      ++acc.failed;
    }
  });
  return {total.acc.mean, total.acc.std_error(), total.acc.count, total.failed, p};
}

}  // namespace arratia
