#pragma once

// Bar ingestion, run configuration, CSV writers, and the subcommand drivers
// behind the `chlosv` executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "chlosv/particle_filter.hpp"
#include "chlosv/simulator.hpp"

namespace chlosv {

/// One CSV row in price levels. Missing extremes are empty fields on disk.
struct BarRecord {
  std::string date;  // YYYY-MM-DD
  double open = 0.0;
  std::optional<double> high;
  std::optional<double> low;
  double close = 0.0;
};

struct ParseOptions {
  /// Reject ordering violations instead of dropping the extremes to missing.
  bool strict = false;
};

/// Reads `date,open,high,low,close`, returning rows sorted by date.
/// Throws DataError naming the offending line.
std::vector<BarRecord> parse_bars(const std::filesystem::path& path, const ParseOptions& opts = {},
                                  std::vector<std::string>* warnings = nullptr);

/// Log-price observations. Zero-range bars lose both extremes.
std::vector<ChloObservation<double>> to_observations(const std::vector<BarRecord>& bars);

/// Weekly ISO dates starting at `first` (YYYY-MM-DD).
std::vector<std::string> weekly_dates(std::size_t count, const std::string& first = "2000-01-07");

/// Every tunable of every subcommand; defaults match the simulation study.
struct RunConfig {
  ModelVariant model = ModelVariant::kExsv;
  int particles = 30000;
  double discount = 0.95;
  std::uint64_t seed = 1;
  PriorHyper prior;
  SeriesControl series;
  double resample_ess_fraction = 0.0;
  bool weekend_effect = true;
  bool strict = false;

  std::string input;
  std::string output;
  std::string truth_output;

  // simulate / study
  int n_periods = 156;
  int grid_nodes = 1000;
  double mu = 0.000961;
  double alpha = -3.75;
  double phi = 0.9;
  double tau = 0.11;
  double s0 = 100.0;
  int n_datasets = 100;
  int dataset = 0;
  std::string pairs = "stsv/rasv,rasv/rcsv,rcsv/exsv,rasv/exsv";

  // oracle (period opened at 0)
  double oracle_mu = 0.0;
  double oracle_sigma = 0.02;
  std::int64_t paths = 1000000;
  int oracle_grid = 10000;
  bool bridge = true;
  ExtremesBox box;

  FilterConfig filter_config() const;
  SimConfig sim_config() const;
  std::vector<ModelPair> model_pairs() const;
};

/// Sets one key; throws ConfigError for unknown keys or bad values.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies a flat `key = value` file (`#` starts a comment).
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Keys accepted by apply_config_value, for help text.
std::vector<std::string> config_keys();

std::string format_double(double v);

void write_bars(std::ostream& os, const std::vector<std::string>& dates, const std::vector<PriceBar>& prices);
void write_truth(std::ostream& os, const std::vector<std::string>& dates, const std::vector<double>& true_sigma);
void write_snapshots(std::ostream& os, const std::vector<std::string>& dates,
                     const std::vector<FilterSnapshot>& snaps);
void write_study_table(std::ostream& os, const std::vector<RatioRow>& rows);

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

int run_fit(const RunConfig& cfg, std::ostream& err);
int run_simulate(const RunConfig& cfg, std::ostream& err);
int run_study(const RunConfig& cfg, std::ostream& err);
int run_oracle(const RunConfig& cfg, std::ostream& err);

}  // namespace chlosv
