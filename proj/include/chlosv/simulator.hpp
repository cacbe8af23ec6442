#pragma once

// Synthetic OHLC data under the stochastic-volatility model, the four-model
// comparison study, and a Monte Carlo estimator of box probabilities of the
// (low, high, close) law used to check the closed-form densities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "chlosv/likelihood.hpp"
#include "chlosv/particle_filter.hpp"
#include "chlosv/random.hpp"
#include "chlosv/vol_process.hpp"

namespace chlosv {

struct SimConfig {
  int n_periods = 156;
  int grid_nodes = 1000;
  Theta<double> theta_true{0.000961, -3.75, 0.9, 0.11 * 0.11};
  double s0 = 100.0;
  int n_datasets = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PriceBar {
  double open = 0.0, high = 0.0, low = 0.0, close = 0.0;
};

/// `bars` are the logs of `prices`, so exporting `prices` and parsing them
/// back reproduces `bars` bit for bit. Each open equals the previous close.
struct SimDataset {
  std::vector<PriceBar> prices;
  std::vector<ChloObservation<double>> bars;
  std::vector<double> true_log_sigma;
};

/// Euler path over `grid_nodes` steps of a unit period; extremes are taken over
/// the grid. With `bridge_extremes` each grid interval contributes the exact
/// maximum/minimum of the Brownian bridge through its endpoints.
template <typename Rng>
ChloObservation<double> simulate_period(double open_log_price, const PeriodParams<double>& p, int grid_nodes, Rng& rng,
                                        bool bridge_extremes = false);

SimDataset simulate_dataset(const SimConfig& cfg, std::uint64_t dataset_index = 0);

double rmsd(std::span<const double> estimate, std::span<const double> truth);
/// Median over t of |estimate_t - truth_t|.
double mad(std::span<const double> estimate, std::span<const double> truth);

/// Linear-interpolation (type 7) sample quantile.
double sample_quantile(std::vector<double> values, double q);

struct ModelPair {
  ModelVariant numerator;
  ModelVariant denominator;
};

/// The rows of the comparison table: STSV/RASV, RASV/RCSV, RCSV/EXSV, RASV/EXSV.
std::vector<ModelPair> default_model_pairs();

struct ModelFit {
  ModelVariant variant;
  double rmsd = 0.0;
  double mad = 0.0;
  int covered = 0;           // periods whose 90% interval holds the true sigma
  double final_mu_mean = 0.0;
  double min_ess = 0.0;
  bool ess_valid = true;     // every period had 0 < ESS <= N
  std::vector<double> sigma_mean;
};

struct DatasetResult {
  std::vector<double> true_sigma;
  std::vector<ModelFit> fits;  // one per distinct model in the study

  const ModelFit& fit(ModelVariant v) const;
};

struct RatioRow {
  ModelPair pair;
  double rmsd_median = 0.0, rmsd_q05 = 0.0, rmsd_q95 = 0.0;
  double mad_median = 0.0, mad_q05 = 0.0, mad_q95 = 0.0;
};

struct StudyResult {
  std::vector<DatasetResult> datasets;
  std::vector<RatioRow> rows;
};

/// Fits every model named in `pairs` to `cfg.n_datasets` simulated datasets.
/// `filter.variant` is ignored; all models of one dataset share a filter seed.
StudyResult run_study(const SimConfig& cfg, const FilterConfig& filter, const std::vector<ModelPair>& pairs);

std::string pair_label(const ModelPair& p);

/// Axis-aligned region of (low, high, close) space; infinite bounds allowed.
struct ExtremesBox {
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  double low_min = -kInf, low_max = kInf;
  double high_min = -kInf, high_max = kInf;
  double close_min = -kInf, close_max = kInf;

  bool contains(double low, double high, double close) const {
    return low >= low_min && low < low_max && high >= high_min && high < high_max && close >= close_min &&
           close < close_max;
  }
};

struct ExtremesSample {
  std::vector<double> low, high, close;
  std::size_t size() const { return close.size(); }
};

/// Simulated (low, high, close) of `n_paths` unit periods started at `open`.
ExtremesSample simulate_extremes(double open, const PeriodParams<double>& p, std::size_t n_paths, int grid_nodes,
                                 std::uint64_t seed, bool bridge_extremes = true);

struct OracleEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
};

/// Fraction of sample points satisfying `inside`, with its binomial standard error.
template <typename Pred>
OracleEstimate box_probability(const ExtremesSample& s, Pred&& inside) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (inside(s.low[i], s.high[i], s.close[i])) ++hits;
  const double n = static_cast<double>(s.size());
  const double prob = static_cast<double>(hits) / n;
  return {prob, std::sqrt(prob * (1.0 - prob) / n)};
}

/// Monte Carlo probability that (low, high, close) of a period opened at 0 falls in `box`.
OracleEstimate mc_density_oracle(const PeriodParams<double>& p, const ExtremesBox& box, std::size_t n_paths,
                                 int grid_nodes, std::uint64_t seed, bool bridge_extremes = true);

// ---------------------------------------------------------------------------

template <typename Rng>
ChloObservation<double> simulate_period(double open_log_price, const PeriodParams<double>& p, int grid_nodes, Rng& rng,
                                        bool bridge_extremes) {
  if (grid_nodes < 2) throw InvalidInput("simulate_period: grid_nodes must be >= 2");
  const double h = 1.0 / grid_nodes;
  const double drift = p.mu * h;
  const double step_sd = p.sigma * std::sqrt(h);
  const double var = step_sd * step_sd;
  // beyond this margin the bridge excursion exceeds the running extreme with probability < e^-50
  const double margin = 5.0 * step_sd;

  double y = open_log_price;
  double hi = y;
  double lo = y;
  for (int k = 0; k < grid_nodes; ++k) {
    const double next = y + drift + step_sd * standard_normal(rng);
    if (bridge_extremes) {
      const double top = std::max(y, next);
      const double bottom = std::min(y, next);
      const double dy = next - y;
      if (top > hi - margin) {
        const double peak = 0.5 * (y + next + std::sqrt(dy * dy - 2.0 * var * std::log(open_uniform(rng))));
        hi = std::max(hi, peak);
      }
      if (bottom < lo + margin) {
        const double trough = 0.5 * (y + next - std::sqrt(dy * dy - 2.0 * var * std::log(open_uniform(rng))));
        lo = std::min(lo, trough);
      }
    }
    y = next;
    hi = std::max(hi, y);
    lo = std::min(lo, y);
  }
  ChloObservation<double> out;
  out.open = open_log_price;
  out.close = y;
  out.low = lo;
  out.high = hi;
  return out;
}

}  // namespace chlosv
