#include "arratia/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

namespace arratia {

namespace {

constexpr std::uint64_t kBridgeTag = 0x62726b72;  // "brkr"
constexpr std::size_t npos = static_cast<std::size_t>(-1);

std::vector<std::uint32_t> identity_ranks(std::size_t n) {
  std::vector<std::uint32_t> r(n);
  std::iota(r.begin(), r.end(), 0u);
  return r;
}

struct Fenwick {
  std::vector<int>& tree;
  void reset(std::size_t n) {
    tree.assign(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
      tree[i] += 1;
      const std::size_t j = i + (i & (~i + 1));
      if (j <= n) tree[j] += tree[i];
    }
  }
  void remove(std::size_t slot) {
    for (std::size_t i = slot + 1; i < tree.size(); i += i & (~i + 1)) tree[i] -= 1;
  }
  // Number of live slots in [0, slot].
  int prefix(std::size_t slot) const {
    int s = 0;
    for (std::size_t i = slot + 1; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  }
};

}  // namespace

ParticleSystem::ParticleSystem(std::vector<double> start_points)
    : ParticleSystem(start_points, identity_ranks(start_points.size())) {}

ParticleSystem::ParticleSystem(std::vector<double> start_points, std::vector<std::uint32_t> priority_rank)
    : start_(std::move(start_points)), rank_(std::move(priority_rank)) {
  const std::size_t n = start_.size();
  if (n == 0) throw std::invalid_argument("ParticleSystem: need at least one start point");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(start_[i])) throw std::invalid_argument("ParticleSystem: start points must be finite");
    if (i > 0 && !(start_[i] > start_[i - 1]))
      throw std::invalid_argument("ParticleSystem: start points must be strictly ascending");
  }
  if (rank_.size() != n) throw std::invalid_argument("ParticleSystem: one priority rank per particle required");
  {
    auto sorted = rank_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("ParticleSystem: priority ranks must be distinct");
  }
  parent_.resize(n);
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  leader_pos_ = start_;
  clusters_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) clusters_.push_back({i, i, i, start_[i]});
}

std::size_t ParticleSystem::find(std::size_t i) const {
  while (parent_[i] != i) {
    parent_[i] = parent_[parent_[i]];
    i = parent_[i];
  }
  return i;
}

std::size_t ParticleSystem::representative(std::size_t i) const {
  if (i >= start_.size()) throw std::out_of_range("ParticleSystem: particle index out of range");
  return find(i);
}

std::vector<double> ParticleSystem::positions() const {
  std::vector<double> out(start_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = leader_pos_[find(i)];
  return out;
}

std::vector<double> ParticleSystem::cluster_positions() const {
  std::vector<double> out;
  out.reserve(clusters_.size());
  for (const auto& c : clusters_) out.push_back(c.position);
  return out;
}

std::size_t ParticleSystem::numerical_events() const {
  return static_cast<std::size_t>(
      std::count_if(events_.begin(), events_.end(), [](const MergeEvent& e) { return e.numerical; }));
}

CoalescenceScheme ParticleSystem::scheme() const {
  CoalescenceScheme s{start_.size(), {}};
  s.indices.reserve(events_.size());
  for (const auto& e : events_) s.indices.push_back(e.index);
  return s;
}

void ParticleSystem::log_event(double time, std::size_t index, bool numerical) {
  if (!events_.empty() && !(time > events_.back().time))
    time = std::nextafter(events_.back().time, std::numeric_limits<double>::infinity());
  events_.push_back({time, index, numerical});
}

// Rebuilds clusters from slot heads (head[c] == c starts a new block) and the
// final slot positions. Each block is led by its best-ranked leader.
void ParticleSystem::commit(std::span<const std::size_t> head, std::span<const double> final_pos) {
  std::vector<Cluster> next;
  next.reserve(clusters_.size());
  std::size_t best_slot = 0;
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    const auto& cl = clusters_[c];
    if (head[c] == c) {
      if (!next.empty()) next.back().position = final_pos[best_slot];
      next.push_back(cl);
      best_slot = c;
      continue;
    }
    auto& blk = next.back();
    blk.last = cl.last;
    if (rank_[cl.leader] < rank_[blk.leader]) {
      parent_[blk.leader] = cl.leader;
      blk.leader = cl.leader;
      best_slot = c;
    } else {
      parent_[cl.leader] = blk.leader;
    }
  }
  next.back().position = final_pos[best_slot];
  for (auto& blk : next) leader_pos_[blk.leader] = blk.position;
  clusters_ = std::move(next);
}

void ParticleSystem::advance(double t_end, std::span<PathDriver> drivers, const DriftSpec& drift,
                             const StepOptions& options) {
  const double s = clock_;
  if (!(t_end > s)) throw std::invalid_argument(fmt::format("step: dt must be positive (t = {}, end = {})", s, t_end));
  if (t_end > 1.0) throw std::invalid_argument(fmt::format("step: clock would pass 1 (end = {})", t_end));
  if (drivers.size() != start_.size())
    throw std::invalid_argument(
        fmt::format("step: {} drivers supplied for {} particles", drivers.size(), start_.size()));

  const double dt = t_end - s;
  const std::size_t k = clusters_.size();
  auto& w = work_;
  w.proposed.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& cl = clusters_[c];
    w.proposed[c] = cl.position + drift_increment(drift, cl.position, dt) + drivers[cl.leader].increment(s, t_end);
  }
  clock_ = t_end;

  // Nearest better-ranked cluster on each side (monotonic stacks).
  auto rank_of = [&](std::size_t c) { return rank_[clusters_[c].leader]; };
  w.lower.assign(k, npos);
  w.upper.assign(k, npos);
  w.stack.clear();
  for (std::size_t c = 0; c < k; ++c) {
    while (!w.stack.empty() && rank_of(w.stack.back()) > rank_of(c)) w.stack.pop_back();
    if (!w.stack.empty()) w.lower[c] = w.stack.back();
    w.stack.push_back(c);
  }
  w.stack.clear();
  for (std::size_t c = k; c-- > 0;) {
    while (!w.stack.empty() && rank_of(w.stack.back()) > rank_of(c)) w.stack.pop_back();
    if (!w.stack.empty()) w.upper[c] = w.stack.back();
    w.stack.push_back(c);
  }

  w.order.resize(k);
  std::iota(w.order.begin(), w.order.end(), std::size_t{0});
  if (!std::is_sorted(w.order.begin(), w.order.end(),
                      [&](std::size_t a, std::size_t b) { return rank_of(a) < rank_of(b); }))
    std::sort(w.order.begin(), w.order.end(), [&](std::size_t a, std::size_t b) { return rank_of(a) < rank_of(b); });

  struct Hit {
    double time;
    std::size_t target;
    std::size_t slot;
  };
  std::vector<Hit> hits;
  w.final_pos.resize(k);
  for (std::size_t c : w.order) {
    const double x0 = clusters_[c].position;
    const double x1 = w.proposed[c];
    double best = std::numeric_limits<double>::infinity();
    std::size_t target = npos;
    auto consider = [&](std::size_t nb, double g0, double g1) {
      double frac;
      if (g1 <= 0.0) {
        frac = g0 / (g0 - g1);
      } else if (options.bridge_correction) {
        const double expo = g0 * g1 / dt;
        if (expo > 745.0) return;
        const double u = drivers[clusters_[c].leader].uniform(kBridgeTag, drivers[clusters_[nb].leader].particle(), t_end);
        if (!(u < std::exp(-expo))) return;
        frac = g0 / (g0 + g1);
      } else {
        return;
      }
      if (frac < best) {
        best = frac;
        target = nb;
      }
    };
    if (w.lower[c] != npos) consider(w.lower[c], x0 - clusters_[w.lower[c]].position, x1 - w.final_pos[w.lower[c]]);
    if (w.upper[c] != npos) consider(w.upper[c], clusters_[w.upper[c]].position - x0, w.final_pos[w.upper[c]] - x1);
    if (target == npos) {
      w.final_pos[c] = x1;
    } else {
      w.final_pos[c] = w.final_pos[target];
      hits.push_back({s + std::clamp(best, 0.0, 1.0) * dt, target, c});
    }
  }

  if (hits.empty()) {
    for (std::size_t c = 0; c < k; ++c) {
      clusters_[c].position = w.final_pos[c];
      leader_pos_[clusters_[c].leader] = w.final_pos[c];
    }
    return;
  }

  // Replay the merges in time order between currently adjacent blocks so every
  // logged index refers to the survivors at that moment.
  std::sort(hits.begin(), hits.end(),
            [](const Hit& a, const Hit& b) { return a.time != b.time ? a.time < b.time : a.slot < b.slot; });
  w.head.resize(k);
  w.next.resize(k);
  w.prev.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    w.head[c] = c;
    w.next[c] = c + 1 < k ? c + 1 : npos;
    w.prev[c] = c > 0 ? c - 1 : npos;
  }
  Fenwick live{w.fenwick};
  live.reset(k);
  auto head_of = [&](std::size_t c) {
    while (w.head[c] != c) {
      w.head[c] = w.head[w.head[c]];
      c = w.head[c];
    }
    return c;
  };
  auto join = [&](std::size_t lo, double time) {
    const std::size_t hi = w.next[lo];
    log_event(time, static_cast<std::size_t>(live.prefix(lo)), false);
    live.remove(hi);
    w.head[hi] = lo;
    w.next[lo] = w.next[hi];
    if (w.next[hi] != npos) w.prev[w.next[hi]] = lo;
  };

  std::vector<Hit> pending = std::move(hits);
  while (!pending.empty()) {
    bool progressed = false;
    for (auto it = pending.begin(); it != pending.end(); ++it) {
      const std::size_t a = head_of(it->target), b = head_of(it->slot);
      if (a == b) {
        pending.erase(it);
        progressed = true;
        break;
      }
      const std::size_t lo = std::min(a, b), hi = std::max(a, b);
      if (w.next[lo] == hi) {
        join(lo, it->time);
        pending.erase(it);
        progressed = true;
        break;
      }
    }
    if (progressed) continue;
    // No pending pair is adjacent: the earliest absorbs the blocks between it.
    const Hit h = pending.front();
    const std::size_t lo = std::min(head_of(h.target), head_of(h.slot));
    const std::size_t hi = std::max(head_of(h.target), head_of(h.slot));
    while (w.next[lo] != npos && w.next[lo] <= hi) join(lo, h.time);
    pending.erase(pending.begin());
  }

  for (std::size_t c = 0; c < k; ++c) w.head[c] = head_of(c);
  commit(w.head, w.final_pos);
}

void ParticleSystem::apply_map(const std::function<double(double)>& f) {
  const std::size_t k = clusters_.size();
  struct Block {
    std::size_t first_slot;
    std::size_t best_slot;
    double y;
  };
  std::vector<double> y(k);
  for (std::size_t c = 0; c < k; ++c) {
    y[c] = f(clusters_[c].position);
    if (!std::isfinite(y[c])) throw std::runtime_error("apply_map: map produced a non-finite position");
  }
  std::vector<Block> stack;
  stack.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    Block cur{c, c, y[c]};
    while (!stack.empty() && cur.y <= stack.back().y) {
      const Block top = stack.back();
      stack.pop_back();
      log_event(clock_, stack.size() + 1, true);
      const bool keep_top = rank_[clusters_[top.best_slot].leader] < rank_[clusters_[cur.best_slot].leader];
      const std::size_t best = keep_top ? top.best_slot : cur.best_slot;
      cur = Block{top.first_slot, best, y[best]};
    }
    stack.push_back(cur);
  }
  std::vector<std::size_t> head(k);
  std::vector<double> final_pos(k);
  for (const auto& blk : stack) {
    const std::size_t end = (&blk == &stack.back()) ? k : (&blk + 1)->first_slot;
    for (std::size_t c = blk.first_slot; c < end; ++c) {
      head[c] = blk.first_slot;
      final_pos[c] = blk.y;
    }
  }
  commit(head, final_pos);
}

ParticleSystem step(ParticleSystem system, double dt, std::span<PathDriver> drivers, const DriftSpec& drift,
                    const StepOptions& options) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const double t_end = system.clock() + dt;
  // Snap to 1 when rounding lands just past it.
  system.advance(t_end > 1.0 && t_end - 1.0 < 1e-12 ? 1.0 : t_end, drivers, drift, options);
  return system;
}

void advance_through(ParticleSystem& system, const TimeGrid& grid, std::size_t substeps, double t_end,
                     std::span<PathDriver> drivers, const DriftSpec& drift, const StepOptions& options) {
  if (substeps < 1) throw std::invalid_argument("run: substeps must be at least 1");
  if (t_end > 1.0) throw std::invalid_argument("run: end time must not exceed 1");
  const auto knots = grid.knots();
  for (std::size_t j = 0; j + 1 < knots.size() && system.clock() < t_end; ++j) {
    for (std::size_t i = 1; i <= substeps; ++i) {
      const double t = std::min(sub_knot(knots[j], knots[j + 1], i, substeps), t_end);
      if (t <= system.clock()) continue;
      system.advance(t, drivers, drift, options);
    }
  }
}

FlowRun run(ParticleSystem system, const TimeGrid& grid, std::size_t substeps_per_cell,
            std::span<PathDriver> drivers, const DriftSpec& drift, const StepOptions& options) {
  advance_through(system, grid, substeps_per_cell, 1.0, drivers, drift, options);
  auto scheme = system.scheme();
  return {std::move(system), std::move(scheme)};
}

TimeGrid coalescence_grid(double min_gap, double first_fraction, double growth) {
  if (!(min_gap > 0.0) || !(first_fraction > 0.0))
    throw std::invalid_argument("coalescence_grid: gap and fraction must be positive");
  return TimeGrid::geometric(std::min(0.5, min_gap * min_gap * first_fraction), growth);
}

double coalescence_prob_oracle(double d, double t) {
  if (!(d > 0.0) || !(t > 0.0)) throw std::invalid_argument("coalescence_prob_oracle: need d > 0 and t > 0");
  return std::erfc(d / (2.0 * std::sqrt(t)));
}

std::vector<std::uint32_t> refinement_priority(std::span<const double> points,
                                               std::span<const std::vector<double>> levels) {
  std::unordered_map<std::uint64_t, std::size_t> level_of;
  for (std::size_t l = levels.size(); l-- > 0;)
    for (double u : levels[l]) level_of[std::bit_cast<std::uint64_t>(u)] = l;
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto level = [&](std::size_t i) {
    auto it = level_of.find(std::bit_cast<std::uint64_t>(points[i]));
    return it == level_of.end() ? levels.size() : it->second;
  };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return level(a) < level(b); });
  std::vector<std::uint32_t> rank(points.size());
  for (std::size_t r = 0; r < idx.size(); ++r) rank[idx[r]] = static_cast<std::uint32_t>(r);
  return rank;
}

}  // namespace arratia
