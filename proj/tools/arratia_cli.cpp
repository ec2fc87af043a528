// Command-line front end for the experiment harness.
//
//   arratia run <config> [--seed N] [--replicas N] [--out PATH] [--format csv|json] [--workers N]
//   arratia census [--start 0,1,2] [--t 1] [--drift zero] [--steps 1024] [common flags]
//   arratia validate-config <config>
//
// Exit status: 0 success, 1 error, 2 partial failure (> 1% of replicas failed).

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <exception>
#include <optional>
#include <thread>

#include "arratia/experiment.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out;
  std::optional<std::string> format;
  unsigned workers = 1;
};

void apply(const Overrides& o, arratia::ExperimentConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (o.replicas) c.replicas = *o.replicas;
  if (o.out) c.output = *o.out;
}

std::vector<arratia::Format> formats_of(const Overrides& o) {
  if (!o.format) return {arratia::Format::csv, arratia::Format::json};
  return {*o.format == "csv" ? arratia::Format::csv : arratia::Format::json};
}

void print(const arratia::ResultRecord& r) {
  fmt::print("{} digest={} seed={} version={} status={}\n", r.experiment, r.config_digest, r.seed, r.version, r.status);
  fmt::print("{:>14} {:>14} {:>14} {:>9}\n", "level", "estimate", "std_error", "replicas");
  for (const auto& l : r.levels) fmt::print("{:>14} {:>14.6g} {:>14.6g} {:>9}\n", l.level, l.estimate, l.std_error, l.replicas);
  for (const auto& f : r.fits)
    fmt::print("fit {:<6} slope {:.4f} [{:.4f}, {:.4f}] intercept {:.4f} rss {:.4g}\n", f.model, f.slope, f.slope_ci_low,
               f.slope_ci_high, f.intercept, f.rss);
  if (!r.best_model.empty()) fmt::print("best model: {}\n", r.best_model);
  for (const auto& [k, v] : r.summary) fmt::print("{} = {:.6g}\n", k, v);
  std::fprintf(stderr, "wall clock %.2f s\n", r.wall_clock_seconds);
}

int finish(const arratia::ResultRecord& r) {
  print(r);
  return r.status == "ok" ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coalescing Brownian flow experiments"};
  app.require_subcommand(1);

  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--replicas", o.replicas, "Replica count")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
    sub->add_option("--out", o.out, "Output path without extension");
    sub->add_option("--format", o.format, "Write only this format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--workers", o.workers, "Worker threads (results do not depend on it)")
        ->check(CLI::Range(1u, std::max(1u, 4 * std::thread::hardware_concurrency())));
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  add_common(run);

  std::vector<double> start{0.0, 1.0, 2.0};
  double t = 1.0;
  std::string drift = "zero";
  std::size_t steps = 1024;
  auto* census = app.add_subcommand("census", "Tabulate coalescence scheme frequencies");
  census->add_option("--start", start, "Ascending start points")->delimiter(',');
  census->add_option("--t", t, "Final time in (0, 1]");
  census->add_option("--drift", drift, "Drift: zero | constant:c | affine:a,b,lo,hi | table:x:a;...");
  census->add_option("--steps", steps, "Uniform time steps");
  add_common(census);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-config", "Parse and validate a config file");
  validate->add_option("config", validate_path, "Config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto c = arratia::ExperimentConfig::load(config_path);
      apply(o, c);
      return finish(arratia::run_experiment(c, o.workers, formats_of(o)));
    }
    if (*census) {
      arratia::ExperimentConfig c;
      c.kind = arratia::ExperimentKind::scheme_census;
      c.start = start;
      c.t = t;
      c.drift = arratia::DriftSpec::parse(drift);
      c.flow_steps = steps;
      c.replicas = 10000;
      c.output = "census";
      apply(o, c);
      return finish(arratia::run_experiment(c, o.workers, formats_of(o)));
    }
    if (*validate) {
      const auto c = arratia::ExperimentConfig::load(validate_path);
      c.validate();
      fmt::print("{}", c.canonical());
      fmt::print("# digest {}\n", c.digest());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
