#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "arratia/densities.hpp"
#include "arratia/drift.hpp"

namespace arratia {

std::string_view library_version();

enum class ExperimentKind { split_rate, discretize_rate, refinement, density_check, scheme_census };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view text);

/// Flat "key = value" configuration. Lists are comma separated, '#' starts a
/// comment. See README for the key reference.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::scheme_census;
  DriftSpec drift;
  double t = 1.0;
  double p = 2.0;
  std::size_t m = 0;  // split-rate: fixed atom count, 0 selects the m(n) schedule
  double m_scale = 10.0;
  double epsilon = 0.1;
  std::vector<std::size_t> partitions{4, 8, 16, 32, 64};
  std::vector<std::size_t> levels{8, 16, 32, 64, 128};
  std::size_t reference = 4096;
  std::vector<double> gaps{0.2, 0.1, 0.05, 0.0125};
  std::vector<double> start{0.0, 0.5};
  std::size_t flow_steps = 1024;
  std::size_t ode_substeps = 8;
  double grid_first = 0.05;
  double grid_growth = 1.1;
  bool bridge = true;
  Interval target;
  std::size_t bins = 40;
  double window_lo = -3.0;
  double window_hi = 3.0;
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  std::string output = "results";

  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
  /// Every key with its resolved value, one "key = value" per line, fixed order.
  std::string canonical() const;
  /// FNV-1a 64 of canonical() without the output line, hex.
  std::string digest() const;
};

/// Atom count used at partition size n by the split-rate study.
std::size_t atoms_for_partition(const ExperimentConfig& config, std::size_t n);

struct LevelStat {
  std::string level;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t replicas = 0;
  friend bool operator==(const LevelStat&, const LevelStat&) = default;
};

struct FitReport {
  std::string model;
  double slope = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
  double intercept = 0.0;
  double rss = 0.0;
  friend bool operator==(const FitReport&, const FitReport&) = default;
};

struct ResultRecord {
  std::string experiment;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string version;
  std::string status = "ok";
  std::size_t failed_replicas = 0;
  std::vector<LevelStat> levels;
  std::vector<FitReport> fits;
  std::string best_model;
  std::map<std::string, double> summary;
  std::map<std::string, std::vector<double>> series;
  double wall_clock_seconds = 0.0;  // reported, never persisted

  /// Equality over the persisted fields.
  friend bool operator==(const ResultRecord& a, const ResultRecord& b);
};

enum class Format { csv, json };

std::string to_csv(const ResultRecord& record);
std::string to_json(const ResultRecord& record);
ResultRecord record_from_json(std::string_view text);

/// Writes `record` to `path` in the given format, creating parent directories.
void emit(const ResultRecord& record, Format format, const std::filesystem::path& path);

/// Runs the configured study. When `formats` is non-empty the record is
/// written to config.output + ".csv" / ".json".
ResultRecord run_experiment(const ExperimentConfig& config, unsigned workers = 1,
                            const std::vector<Format>& formats = {Format::csv, Format::json});

}  // namespace arratia
