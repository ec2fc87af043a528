#include "arratia/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "arratia/measures.hpp"
#include "arratia/schemes.hpp"
#include "arratia/splitting.hpp"
#include "arratia/stats.hpp"

#ifndef ARRATIA_VERSION
#define ARRATIA_VERSION "0.0.0"
#endif

namespace arratia {

std::string_view library_version() { return ARRATIA_VERSION; }

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kKindNames[] = {
    {ExperimentKind::split_rate, "split-rate"},
    {ExperimentKind::discretize_rate, "discretize-rate"},
    {ExperimentKind::refinement, "refinement"},
    {ExperimentKind::density_check, "density-check"},
    {ExperimentKind::scheme_census, "scheme-census"},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  v = trim(v);
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw std::invalid_argument(fmt::format("config: key '{}': cannot parse '{}'", key, v));
  return out;
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view v) {
  std::vector<T> out;
  for (auto item : split_list(v)) out.push_back(parse_number<T>(key, item));
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw std::invalid_argument(fmt::format("config: key '{}': expected true/false, got '{}'", key, v));
}

std::string fmt_double(double x) { return fmt::format("{}", x); }

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

ExperimentKind parse_kind(std::string_view text) {
  text = trim(text);
  for (const auto& [k, name] : kKindNames)
    if (name == text) return k;
  throw std::invalid_argument(fmt::format("config: unknown experiment '{}'", text));
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  ExperimentConfig c;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument(fmt::format("config line {}: expected 'key = value'", line_no));
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "experiment") c.kind = parse_kind(value);
    else if (key == "drift") c.drift = DriftSpec::parse(value);
    else if (key == "t") c.t = parse_number<double>(key, value);
    else if (key == "p") c.p = parse_number<double>(key, value);
    else if (key == "m") c.m = parse_number<std::size_t>(key, value);
    else if (key == "m_scale") c.m_scale = parse_number<double>(key, value);
    else if (key == "epsilon") c.epsilon = parse_number<double>(key, value);
    else if (key == "partitions") c.partitions = parse_list<std::size_t>(key, value);
    else if (key == "levels") c.levels = parse_list<std::size_t>(key, value);
    else if (key == "reference") c.reference = parse_number<std::size_t>(key, value);
    else if (key == "gaps") c.gaps = parse_list<double>(key, value);
    else if (key == "start") c.start = parse_list<double>(key, value);
    else if (key == "flow_steps") c.flow_steps = parse_number<std::size_t>(key, value);
    else if (key == "ode_substeps") c.ode_substeps = parse_number<std::size_t>(key, value);
    else if (key == "grid_first") c.grid_first = parse_number<double>(key, value);
    else if (key == "grid_growth") c.grid_growth = parse_number<double>(key, value);
    else if (key == "bridge") c.bridge = parse_bool(key, value);
    else if (key == "target") {
      if (value == "all") {
        c.target = Interval{};
      } else {
        const auto v = parse_list<double>(key, value);
        if (v.size() != 2) throw std::invalid_argument("config: target is 'all' or 'lo,hi'");
        c.target = Interval{v[0], v[1]};
      }
    } else if (key == "bins") c.bins = parse_number<std::size_t>(key, value);
    else if (key == "window") {
      const auto v = parse_list<double>(key, value);
      if (v.size() != 2) throw std::invalid_argument("config: window is 'lo,hi'");
      c.window_lo = v[0];
      c.window_hi = v[1];
    } else if (key == "replicas") c.replicas = parse_number<std::size_t>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "output") c.output = std::string(value);
    else throw std::invalid_argument(fmt::format("config line {}: unknown key '{}'", line_no, key));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (replicas < 2) fail("replicas must be at least 2");
  if (!(t > 0.0) || t > 1.0) fail("t must lie in (0, 1]");
  if (!(p >= 1.0)) fail("p must be at least 1");
  if (flow_steps < 1 || ode_substeps < 1) fail("step counts must be positive");
  if (!(grid_first > 0.0) || !(grid_growth > 1.0)) fail("grid_first must be positive and grid_growth above 1");
  if (!(target.lo <= target.hi)) fail("target must satisfy lo <= hi");
  switch (kind) {
    case ExperimentKind::split_rate:
      if (partitions.size() < 2) fail("split-rate needs at least two partitions");
      for (auto n : partitions)
        if (n < 2) fail("partition sizes must be at least 2");
      if (m == 0 && !(m_scale > 0.0 && epsilon > 0.0 && epsilon < 0.5)) fail("m schedule needs m_scale > 0, 0 < epsilon < 1/2");
      break;
    case ExperimentKind::discretize_rate:
      if (levels.size() < 2) fail("discretize-rate needs at least two levels");
      for (auto m_level : levels)
        if (m_level < 1 || reference % m_level != 0) fail(fmt::format("level {} must divide reference {}", m_level, reference));
      break;
    case ExperimentKind::refinement:
      if (gaps.size() < 2) fail("refinement needs a coarse gap and a reference gap");
      for (std::size_t i = 1; i < gaps.size(); ++i)
        if (!(gaps[i] < gaps[i - 1])) fail("gaps must be strictly decreasing, reference last");
      if (drift.kind() != DriftSpec::Kind::zero) fail("refinement is defined for zero drift");
      break;
    case ExperimentKind::density_check:
      if (start.size() != 2 || !(start[1] > start[0])) fail("density-check needs two ascending start points");
      if (drift.kind() != DriftSpec::Kind::zero) fail("density-check is defined for zero drift");
      if (bins < 1 || !(window_hi > window_lo)) fail("bins and window must describe a histogram");
      if (replicas < 100) fail("density-check needs at least 100 replicas");
      break;
    case ExperimentKind::scheme_census:
      if (start.empty() || start.size() > 8) fail("scheme-census needs 1 to 8 start points");
      for (std::size_t i = 1; i < start.size(); ++i)
        if (!(start[i] > start[i - 1])) fail("start points must be strictly ascending");
      break;
  }
}

std::string ExperimentConfig::canonical() const {
  auto join_d = [](const std::vector<double>& v) {
    std::vector<std::string> s;
    for (double x : v) s.push_back(fmt_double(x));
    return fmt::format("{}", fmt::join(s, ","));
  };
  std::string out;
  auto put = [&](std::string_view k, const std::string& v) { out += fmt::format("{} = {}\n", k, v); };
  put("experiment", std::string(to_string(kind)));
  put("drift", drift.describe());
  put("t", fmt_double(t));
  put("p", fmt_double(p));
  put("m", fmt::format("{}", m));
  put("m_scale", fmt_double(m_scale));
  put("epsilon", fmt_double(epsilon));
  put("partitions", fmt::format("{}", fmt::join(partitions, ",")));
  put("levels", fmt::format("{}", fmt::join(levels, ",")));
  put("reference", fmt::format("{}", reference));
  put("gaps", join_d(gaps));
  put("start", join_d(start));
  put("flow_steps", fmt::format("{}", flow_steps));
  put("ode_substeps", fmt::format("{}", ode_substeps));
  put("grid_first", fmt_double(grid_first));
  put("grid_growth", fmt_double(grid_growth));
  put("bridge", bridge ? "true" : "false");
  put("target", std::isinf(target.lo) && std::isinf(target.hi) && target.lo < 0 && target.hi > 0
                    ? std::string("all")
                    : fmt::format("{},{}", fmt_double(target.lo), fmt_double(target.hi)));
  put("bins", fmt::format("{}", bins));
  put("window", fmt::format("{},{}", fmt_double(window_lo), fmt_double(window_hi)));
  put("replicas", fmt::format("{}", replicas));
  put("seed", fmt::format("{}", seed));
  put("output", output);
  return out;
}

std::string ExperimentConfig::digest() const {
  // The output path does not influence results, so it is left out.
  auto text = canonical();
  text.erase(text.rfind("output = "));
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::size_t atoms_for_partition(const ExperimentConfig& config, std::size_t n) {
  if (config.m > 0) return config.m;
  const double raw = config.m_scale * (0.25 - config.epsilon / 2.0) * std::log(static_cast<double>(n));
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(raw)));
}

bool operator==(const ResultRecord& a, const ResultRecord& b) {
  return a.experiment == b.experiment && a.config_digest == b.config_digest && a.seed == b.seed &&
         a.version == b.version && a.status == b.status && a.failed_replicas == b.failed_replicas &&
         a.levels == b.levels && a.fits == b.fits && a.best_model == b.best_model && a.summary == b.summary &&
         a.series == b.series;
}

std::string to_csv(const ResultRecord& record) {
  std::string s = "level,estimate,std_error,replicas\n";
  for (const auto& l : record.levels) {
    std::string label = l.level;
    if (label.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char ch : label) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      label = q + "\"";
    }
    s += fmt::format("{},{},{},{}\n", label, l.estimate, l.std_error, l.replicas);
  }
  return s;
}

std::string to_json(const ResultRecord& r) {
  nlohmann::json j;
  j["experiment"] = r.experiment;
  j["config_digest"] = r.config_digest;
  j["seed"] = r.seed;
  j["version"] = r.version;
  j["status"] = r.status;
  j["failed_replicas"] = r.failed_replicas;
  j["levels"] = nlohmann::json::array();
  for (const auto& l : r.levels)
    j["levels"].push_back({{"level", l.level}, {"estimate", l.estimate}, {"std_error", l.std_error}, {"replicas", l.replicas}});
  j["fits"] = nlohmann::json::array();
  for (const auto& f : r.fits)
    j["fits"].push_back({{"model", f.model},
                         {"slope", f.slope},
                         {"slope_ci_low", f.slope_ci_low},
                         {"slope_ci_high", f.slope_ci_high},
                         {"intercept", f.intercept},
                         {"rss", f.rss}});
  j["best_model"] = r.best_model;
  j["summary"] = r.summary;
  j["series"] = r.series;
  return j.dump(2) + "\n";
}

ResultRecord record_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  ResultRecord r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.version = j.at("version").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.failed_replicas = j.at("failed_replicas").get<std::size_t>();
  for (const auto& l : j.at("levels"))
    r.levels.push_back({l.at("level").get<std::string>(), l.at("estimate").get<double>(), l.at("std_error").get<double>(),
                        l.at("replicas").get<std::size_t>()});
  for (const auto& f : j.at("fits"))
    r.fits.push_back({f.at("model").get<std::string>(), f.at("slope").get<double>(), f.at("slope_ci_low").get<double>(),
                      f.at("slope_ci_high").get<double>(), f.at("intercept").get<double>(), f.at("rss").get<double>()});
  r.best_model = j.at("best_model").get<std::string>();
  r.summary = j.at("summary").get<std::map<std::string, double>>();
  r.series = j.at("series").get<std::map<std::string, std::vector<double>>>();
  return r;
}

void emit(const ResultRecord& record, Format format, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw std::runtime_error(fmt::format("emit: cannot create directory for '{}': {}", path.string(), ec.message()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("emit: cannot open '{}' for writing", path.string()));
  out << (format == Format::csv ? to_csv(record) : to_json(record));
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("emit: write to '{}' failed", path.string()));
}

namespace {

FitReport fit_report(std::string model, const LinearFit& f, double unweighted_rss) {
  return {std::move(model), f.slope, f.slope_ci_low, f.slope_ci_high, f.intercept, unweighted_rss};
}

// Power law fit of estimates against levels, with the unweighted log-space RSS.
FitReport power_fit(std::span<const double> x, std::span<const double> est, std::span<const double> se) {
  const auto f = loglog_fit(x, est, se);
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::log(est[i]) - f.intercept - f.slope * std::log(x[i]);
    rss += r * r;
  }
  return fit_report("power", f, rss);
}

bool all_positive(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

struct SplitAcc {
  std::vector<Accumulator> level, decrease;
  std::size_t failed = 0;
  void merge(const SplitAcc& o) {
    for (std::size_t i = 0; i < level.size(); ++i) level[i].merge(o.level[i]);
    for (std::size_t i = 0; i < decrease.size(); ++i) decrease[i].merge(o.decrease[i]);
    failed += o.failed;
  }
};

void split_rate(const ExperimentConfig& c, unsigned workers, ResultRecord& rec) {
  const TimeGrid fine = TimeGrid::uniform(c.flow_steps);
  const std::size_t L = c.partitions.size();
  std::vector<std::pair<FlowMeasureSpec, FlowMeasureSpec>> specs;
  for (std::size_t n : c.partitions) {
    const std::size_t m = atoms_for_partition(c, n);
    FlowMeasureSpec a;
    a.method = FlowMeasureSpec::Method::flow;
    a.start_points = uniform_start_points(m);
    a.drift = c.drift;
    a.t = c.t;
    a.driver_grid = fine;
    a.flow_grid = fine;
    a.options.bridge_correction = c.bridge;
    FlowMeasureSpec b = a;
    b.method = FlowMeasureSpec::Method::split;
    b.split = SplitScheme{TimeGrid::uniform(n), c.drift, c.ode_substeps, std::max<std::size_t>(1, c.flow_steps / n)};
    specs.emplace_back(std::move(a), std::move(b));
    rec.summary[fmt::format("m_{}", n)] = static_cast<double>(m);
  }

  // Every level sees the same replica seeds, so successive differences are paired.
  SplitAcc init{std::vector<Accumulator>(L), std::vector<Accumulator>(L ? L - 1 : 0)};
  const auto total = chunked_reduce(c.replicas, workers, init, [&](std::size_t r, SplitAcc& acc) {
    const std::uint64_t seed = replica_seed(c.seed, r);
    std::vector<double> w(L);
    try {
      for (std::size_t l = 0; l < L; ++l)
        w[l] = wasserstein(sample_flow_measure(specs[l].first, seed), sample_flow_measure(specs[l].second, seed), c.p);
    } catch (const std::exception&) {
      ++acc.failed;
      return;
    }
    for (std::size_t l = 0; l < L; ++l) acc.level[l].add(w[l]);
    for (std::size_t l = 0; l + 1 < L; ++l) acc.decrease[l].add(w[l] - w[l + 1]);
  });

  std::vector<double> delta, est, se;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& a = total.level[l];
    rec.levels.push_back({fmt::format("{}", c.partitions[l]), a.mean, a.std_error(), a.count});
    delta.push_back(1.0 / static_cast<double>(c.partitions[l]));
    est.push_back(a.mean);
    se.push_back(a.std_error());
  }
  for (std::size_t l = 0; l + 1 < L; ++l) {
    const auto key = fmt::format("{}_{}", c.partitions[l], c.partitions[l + 1]);
    rec.summary["decrease_" + key] = total.decrease[l].mean;
    rec.summary["decrease_se_" + key] = total.decrease[l].std_error();
  }
  rec.failed_replicas = total.failed;
  if (!all_positive(est)) return;
  // est ~ C (log 1/delta)^(-1/p): one free constant, fitted in log space.
  std::vector<double> lx(delta.size());
  double logc = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    lx[i] = std::log(std::log(1.0 / delta[i]));
    logc += std::log(est[i]) + lx[i] / c.p;
  }
  logc /= static_cast<double>(delta.size());
  double rss_log = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double r = std::log(est[i]) - (logc - lx[i] / c.p);
    rss_log += r * r;
  }
  rec.fits.push_back({"log", -1.0 / c.p, -1.0 / c.p, -1.0 / c.p, logc, rss_log});
  rec.fits.push_back(power_fit(delta, est, se));
  rec.best_model = rss_log <= rec.fits.back().rss ? "log" : "power";
  rec.summary["log_model_constant"] = std::exp(logc);
}

struct LevelAcc {
  std::vector<Accumulator> acc;
  std::size_t failed = 0;
  void merge(const LevelAcc& o) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i].merge(o.acc[i]);
    failed += o.failed;
  }
};

void discretize_rate(const ExperimentConfig& c, unsigned workers, ResultRecord& rec) {
  auto ms = c.levels;
  std::sort(ms.begin(), ms.end());
  const std::size_t M = c.reference;
  const auto finest = uniform_start_points(M);
  std::vector<std::vector<double>> sets;
  for (auto m : ms) sets.push_back(uniform_start_points(m));
  sets.push_back(finest);
  const auto ranks = refinement_priority(finest, sets);
  const TimeGrid grid = coalescence_grid(1.0 / static_cast<double>(M), c.grid_first, c.grid_growth);
  StepOptions opt;
  opt.bridge_correction = c.bridge;

  LevelAcc init{std::vector<Accumulator>(ms.size())};
  const auto total = chunked_reduce(c.replicas, workers, init, [&](std::size_t r, LevelAcc& acc) {
    try {
      auto drivers = make_drivers(replica_seed(c.seed, r), finest, grid, DriverKeying::by_location);
      ParticleSystem sys(finest, ranks);
      advance_through(sys, grid, 1, c.t, drivers, c.drift, opt);
      const auto pos = sys.positions();
      const auto reference = pushforward_uniform(pos, M);
      std::vector<double> sub;
      for (std::size_t l = 0; l < ms.size(); ++l) {
        const std::size_t stride = M / ms[l];
        sub.clear();
        for (std::size_t j = 0; j < ms[l]; ++j) sub.push_back(pos[j * stride]);
        acc.acc[l].add(wasserstein(reference, pushforward_uniform(sub, ms[l]), c.p));
      }
    } catch (const std::exception&) {
      ++acc.failed;
    }
  });
  std::vector<double> x, est, se;
  for (std::size_t l = 0; l < ms.size(); ++l) {
    const auto& a = total.acc[l];
    rec.levels.push_back({fmt::format("{}", ms[l]), a.mean, a.std_error(), a.count});
    x.push_back(static_cast<double>(ms[l]));
    est.push_back(a.mean);
    se.push_back(a.std_error());
  }
  rec.failed_replicas = total.failed;
  if (all_positive(est)) {
    rec.fits.push_back(power_fit(x, est, se));
    rec.best_model = "power";
  }
  rec.summary["target_slope"] = -1.0 / c.p;
}

void refinement(const ExperimentConfig& c, unsigned workers, ResultRecord& rec) {
  std::vector<std::vector<double>> sets;
  for (double g : c.gaps) sets.push_back(lattice(0.0, 1.0, g));
  WebSpec web{coalescence_grid(c.gaps.back(), c.grid_first, c.grid_growth), 1, {c.bridge}};
  const auto nc = nested_atom_counts(sets, c.t, c.target, c.replicas, c.seed, web, workers);
  const bool whole_line = std::isinf(c.target.lo) && std::isinf(c.target.hi);
  const double length = whole_line ? 1.0 : c.target.hi - c.target.lo;
  std::vector<double> x, est, se;
  for (std::size_t l = 0; l + 1 < sets.size(); ++l) {
    const double g = nc.gaps[l].mean / length;
    rec.levels.push_back({fmt_double(c.gaps[l]), g, nc.gaps[l].std_error() / length, nc.replicas});
    x.push_back(c.gaps[l]);
    est.push_back(g);
    se.push_back(nc.gaps[l].std_error() / length);
    if (l > 0 && g > 0.0) rec.summary[fmt::format("ratio_{}_{}", fmt_double(c.gaps[l - 1]), fmt_double(c.gaps[l]))] = est[l - 1] / g;
  }
  for (std::size_t l = 0; l < sets.size(); ++l) {
    rec.summary[fmt::format("mean_count_{}", fmt_double(c.gaps[l]))] = nc.counts[l].mean;
    if (whole_line) {
      // Expected number of distinct images on the line: 1 + sum over gaps of P(no merge).
      const double expected = 1.0 + static_cast<double>(sets[l].size() - 1) * std::erf(c.gaps[l] / (2.0 * std::sqrt(c.t)));
      rec.summary[fmt::format("exact_count_{}", fmt_double(c.gaps[l]))] = expected;
    }
  }
  rec.summary["violations"] = static_cast<double>(nc.violations);
  if (all_positive(est)) {
    rec.fits.push_back(power_fit(x, est, se));
    rec.best_model = "power";
  }
}

void density_check(const ExperimentConfig& c, unsigned workers, ResultRecord& rec) {
  const std::array<double, 2> x{c.start[0], c.start[1]};
  const HistogramSpec hist{c.window_lo, c.window_hi, c.bins};
  WebSpec web{coalescence_grid(x[1] - x[0], c.grid_first, c.grid_growth), 1, {c.bridge}};
  const CoalescenceScheme merged{2, {1}};
  const auto est = estimate_scheme_density(c.start, c.t, 1, merged, hist, c.replicas, c.seed, web, workers);
  const double width = (c.window_hi - c.window_lo) / static_cast<double>(c.bins);
  const double N = static_cast<double>(est.replicas);
  double mc_mass = 0.0, max_z = 0.0, outside = 0.0;
  std::vector<double> analytic, left;
  for (std::size_t i = 0; i < est.bins(); ++i) {
    const double a = est.bin_edges[i], b = est.bin_edges[i + 1];
    const double avg =
        boost::math::quadrature::gauss<double, 7>::integrate([&](double y) { return pair_density_merged(x, y, c.t); }, a, b) /
        (b - a);
    analytic.push_back(avg);
    left.push_back(a);
    mc_mass += est.values[i] * width;
    // Null standard error from the analytic bin probability (one merged atom per replica at most).
    const double prob = std::clamp(avg * width, 0.0, 1.0);
    const double sigma = std::max(std::sqrt(prob * (1.0 - prob) / N) / width, est.half_widths[i] / normal_quantile(0.975));
    const double z = sigma > 0.0 ? std::abs(est.values[i] - avg) / sigma : (est.values[i] == avg ? 0.0 : INFINITY);
    max_z = std::max(max_z, z);
    if (z > 3.0) outside += 1.0;
    rec.levels.push_back({fmt_double(0.5 * (a + b)), est.values[i], est.half_widths[i] / normal_quantile(0.975), est.replicas});
  }
  rec.series["bin_left"] = left;
  rec.series["analytic"] = analytic;
  rec.summary["max_z"] = max_z;
  rec.summary["bins_beyond_3_sigma"] = outside;
  rec.summary["mc_mass_in_window"] = mc_mass;
  rec.summary["analytic_mass"] = pair_merged_mass(x, c.t);
  rec.summary["oracle_mass"] = coalescence_prob_oracle(x[1] - x[0], c.t);
  rec.summary["low_confidence_bins"] =
      static_cast<double>(std::count(est.low_confidence.begin(), est.low_confidence.end(), true));
}

struct CensusAcc {
  std::vector<std::uint64_t> counts;
  std::size_t excluded = 0;
  std::size_t unmatched = 0;  // realized schemes missing from the enumeration
  void merge(const CensusAcc& o) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    excluded += o.excluded;
    unmatched += o.unmatched;
  }
};

void scheme_census(const ExperimentConfig& c, unsigned workers, ResultRecord& rec) {
  const std::size_t n = c.start.size();
  const auto schemes = enumerate_all(n);
  std::map<std::vector<std::size_t>, std::size_t> index;
  for (std::size_t i = 0; i < schemes.size(); ++i) index[schemes[i].indices] = i;
  const TimeGrid grid = TimeGrid::uniform(c.flow_steps);
  StepOptions opt;
  opt.bridge_correction = c.bridge;
  CensusAcc init{std::vector<std::uint64_t>(schemes.size(), 0)};
  const auto total = chunked_reduce(c.replicas, workers, init, [&](std::size_t r, CensusAcc& acc) {
    auto drivers = make_drivers(replica_seed(c.seed, r), c.start, grid);
    ParticleSystem sys(c.start);
    advance_through(sys, grid, 1, c.t, drivers, c.drift, opt);
    if (sys.numerical_events() > 0) {
      ++acc.excluded;
      return;
    }
    const auto it = index.find(sys.scheme().indices);
    if (it == index.end()) {
      ++acc.unmatched;
      return;
    }
    ++acc.counts[it->second];
  });
  const std::uint64_t N = c.replicas - total.excluded;
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    const double f = N ? static_cast<double>(total.counts[i]) / static_cast<double>(N) : 0.0;
    rec.levels.push_back({schemes[i].label(), f, N ? std::sqrt(f * (1.0 - f) / static_cast<double>(N)) : 0.0,
                          static_cast<std::size_t>(N)});
  }
  const std::uint64_t matched = std::accumulate(total.counts.begin(), total.counts.end(), std::uint64_t{0});
  rec.summary["frequency_sum"] = N ? static_cast<double>(matched) / static_cast<double>(N) : 0.0;
  rec.summary["excluded"] = static_cast<double>(total.excluded);
  rec.summary["unmatched"] = static_cast<double>(total.unmatched);
}

}  // namespace

ResultRecord run_experiment(const ExperimentConfig& config, unsigned workers, const std::vector<Format>& formats) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  ResultRecord rec;
  rec.experiment = std::string(to_string(config.kind));
  rec.config_digest = config.digest();
  rec.seed = config.seed;
  rec.version = std::string(library_version());
  switch (config.kind) {
    case ExperimentKind::split_rate:
      split_rate(config, workers, rec);
      break;
    case ExperimentKind::discretize_rate:
      discretize_rate(config, workers, rec);
      break;
    case ExperimentKind::refinement:
      refinement(config, workers, rec);
      break;
    case ExperimentKind::density_check:
      density_check(config, workers, rec);
      break;
    case ExperimentKind::scheme_census:
      scheme_census(config, workers, rec);
      break;
  }
  if (rec.failed_replicas * 100 > config.replicas) rec.status = "partial";
  rec.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  for (auto f : formats) emit(rec, f, config.output + (f == Format::csv ? ".csv" : ".json"));
  return rec;
}

}  // namespace arratia
