#pragma once

// Auxiliary particle filter with kernel-shrunk artificial evolution of the
// structural parameters (Liu-West), for the log-volatility state and the
// drift/AR(1) parameters under four observation models.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "chlosv/likelihood.hpp"
#include "chlosv/vol_process.hpp"

namespace chlosv {

enum class ModelVariant {
  kStsv,  // close only
  kRasv,  // range only, drift fixed at zero
  kRcsv,  // range and close
  kExsv,  // open, high, low, close
};

std::string to_string(ModelVariant v);
ModelVariant parse_variant(const std::string& name);

/// Number of unconstrained structural coordinates the variant learns.
inline int eta_dimension(ModelVariant v) { return v == ModelVariant::kRasv ? 3 : 4; }

struct LikelihoodDiagnostics {
  int neg_inf = 0;
  int series_failures = 0;
};

/// Log-likelihood of one bar under `variant`, picking the marginal that
/// matches the bar's missingness. An extreme that is not strictly outside
/// [min(open, close), max(open, close)] is treated as missing.
double bar_log_likelihood(const ChloObservation<double>& bar, ModelVariant variant, double mu, double sigma,
                          const SeriesControl& ctl, LikelihoodDiagnostics* diag = nullptr);

/// Particles stored column-wise: eta is d x N, with d = eta_dimension(variant).
struct ParticleCloud {
  ModelVariant variant = ModelVariant::kExsv;
  Eigen::MatrixXd eta;
  Eigen::VectorXd log_sigma;
  Eigen::VectorXd weights;
  int time_index = 0;

  Eigen::Index size() const { return log_sigma.size(); }
  void validate() const;
};

struct Summary {
  double mean = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
};

struct FilterSnapshot {
  int period = 0;
  Summary sigma;
  Summary mu;
  Summary alpha;
  Summary phi;
  Summary tau2;
  double ess = 0.0;
  int neg_inf_loglik = 0;
  int series_failures = 0;
};

struct FilterConfig {
  ModelVariant variant = ModelVariant::kExsv;
  int particles = 30000;
  double discount = 0.95;
  std::uint64_t seed = 1;
  PriorHyper prior;
  SeriesControl series;
  /// Condition each bar on its own open; otherwise on the previous close.
  bool weekend_effect = true;
  /// Systematic resample after a step when ESS < fraction * N; 0 disables.
  double resample_ess_fraction = 0.0;

  void validate() const;
};

/// Shrinkage a = (3 eps - 1) / (2 eps) and 1 - a^2, for 0.5 < eps < 1.
std::pair<double, double> shrinkage_constants(double epsilon);

/// Weighted mean and covariance of the eta particles, and the shrunk kernel
/// locations m_j = a eta_j + (1 - a) mean.
struct KernelMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd locations;
};

KernelMoments shrink_locations(const ParticleCloud& cloud, double a);

ParticleCloud init_cloud(const PriorHyper& hyper, int n, ModelVariant variant, std::uint64_t seed);

/// Weighted summaries of a cloud (no state change).
FilterSnapshot summarize(const ParticleCloud& cloud);

/// One filter period: point estimates, auxiliary indicators, kernel draw,
/// state propagation, second-stage reweighting. `period` keys the random
/// substreams; the returned cloud has time_index + 1.
std::pair<ParticleCloud, FilterSnapshot> filter_step(const ParticleCloud& cloud, const ChloObservation<double>& bar,
                                                     double epsilon, const SeriesControl& ctl, std::uint64_t seed,
                                                     int period, double resample_ess_fraction = 0.0);

/// Runs the filter over `bars` and returns one snapshot per bar.
std::vector<FilterSnapshot> run_filter(std::span<const ChloObservation<double>> bars, const FilterConfig& config);

}  // namespace chlosv
