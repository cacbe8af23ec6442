#include "chlosv/particle_filter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "chlosv/errors.hpp"
#include "chlosv/random.hpp"
#include "chlosv/weights.hpp"

namespace chlosv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kKernelJitter = 1e-12;

// Row layout of the eta matrix for a variant.
struct EtaRows {
  int mu;  // -1 when drift is not learned
  int alpha;
  int logit_phi;
  int log_tau2;
};

EtaRows rows_for(ModelVariant v) {
  if (v == ModelVariant::kRasv) return {-1, 0, 1, 2};
  return {0, 1, 2, 3};
}

double drift_of(const Eigen::MatrixXd& eta, const EtaRows& r, Eigen::Index j) {
  return r.mu < 0 ? 0.0 : eta(r.mu, j);
}

// Indices sorted by (log sigma, eta column); makes resampling independent of storage order.
std::vector<Eigen::Index> canonical_order(const ParticleCloud& c) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(c.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    if (c.log_sigma(i) != c.log_sigma(j)) return c.log_sigma(i) < c.log_sigma(j);
    for (Eigen::Index k = 0; k < c.eta.rows(); ++k)
      if (c.eta(k, i) != c.eta(k, j)) return c.eta(k, i) < c.eta(k, j);
    return false;
  });
  return order;
}

// N multinomial draws by inversion against sorted uniforms (exponential spacings).
std::vector<Eigen::Index> multinomial_sorted(const Eigen::VectorXd& probs, const std::vector<Eigen::Index>& order,
                                            CounterRng& rng) {
  const auto n = static_cast<std::size_t>(probs.size());
  std::vector<double> spacing(n + 1);
  double total = 0.0;
  for (auto& e : spacing) {
    e = -std::log(open_uniform(rng));
    total += e;
  }
  std::vector<Eigen::Index> parents(n);
  double u = 0.0;
  double cum = 0.0;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < n; ++j) {
    u += spacing[j] / total;
    while (pos + 1 < n && cum + probs(order[pos]) < u) {
      cum += probs(order[pos]);
      ++pos;
    }
    // never land on a zero-probability slot (possible only through rounding at the ends)
    std::size_t pick = pos;
    while (probs(order[pick]) == 0.0 && pick + 1 < n) ++pick;
    while (probs(order[pick]) == 0.0 && pick > 0) --pick;
    parents[j] = order[pick];
  }
  return parents;
}

// Lower factor of a symmetric PSD matrix; falls back to an eigen square root.
Eigen::MatrixXd kernel_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

Summary summarize_values(const Eigen::VectorXd& values, const Eigen::VectorXd& w) {
  static constexpr double kLevels[] = {0.05, 0.95};
  const auto q = weighted_quantiles(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())),
                                    std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), kLevels);
  return {values.dot(w), q[0], q[1]};
}

void systematic_resample(ParticleCloud& c, CounterRng& rng) {
  const Eigen::Index n = c.size();
  const double start = open_uniform(rng) / static_cast<double>(n);
  Eigen::MatrixXd eta(c.eta.rows(), n);
  Eigen::VectorXd ls(n);
  double cum = c.weights(0);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double u = start + static_cast<double>(j) / static_cast<double>(n);
    while (cum < u && k + 1 < n) cum += c.weights(++k);
    eta.col(j) = c.eta.col(k);
    ls(j) = c.log_sigma(k);
  }
  c.eta = std::move(eta);
  c.log_sigma = std::move(ls);
  c.weights.setConstant(1.0 / static_cast<double>(n));
}

}  // namespace

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::kStsv: return "STSV";
    case ModelVariant::kRasv: return "RASV";
    case ModelVariant::kRcsv: return "RCSV";
    case ModelVariant::kExsv: return "EXSV";
  }
  return "?";
}

ModelVariant parse_variant(const std::string& name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "stsv") return ModelVariant::kStsv;
  if (s == "rasv") return ModelVariant::kRasv;
  if (s == "rcsv") return ModelVariant::kRcsv;
  if (s == "exsv") return ModelVariant::kExsv;
  throw ConfigError("unknown model variant '" + name + "' (expected stsv|rasv|rcsv|exsv)");
}

double bar_log_likelihood(const ChloObservation<double>& bar, ModelVariant variant, double mu, double sigma,
                          const SeriesControl& ctl, LikelihoodDiagnostics* diag) {
  const PeriodParams<double> p{mu, sigma};
  const double lo_bound = std::min(bar.open, bar.close);
  const double hi_bound = std::max(bar.open, bar.close);
  const bool has_low = bar.low && *bar.low < lo_bound;
  const bool has_high = bar.high && *bar.high > hi_bound;

  double value = kNegInf;
  bool series_failure = false;
  auto take = [&](const LogDensity<double>& d) {
    value = d.value;
    series_failure = d.series_failure();
  };

  switch (variant) {
    case ModelVariant::kStsv:
      value = log_density_close(bar, p);
      break;
    case ModelVariant::kRasv:
      if (bar.low && bar.high && *bar.high > *bar.low)
        take(log_density_range(*bar.high - *bar.low, sigma, ctl));
      else
        value = 0.0;
      break;
    case ModelVariant::kRcsv:
      if (bar.low && bar.high && (*bar.high - *bar.low) > std::abs(bar.close - bar.open))
        take(log_density_range_close(*bar.high - *bar.low, bar.open, bar.close, p, ctl));
      else
        value = log_density_close(bar, p);
      break;
    case ModelVariant::kExsv:
      if (has_low && has_high) {
        take(log_density_chlo(bar, p, ctl));
      } else if (has_high) {
        value = log_density_close_max(bar, p);
      } else if (has_low) {
        value = log_density_close_min(bar, p);
      } else {
        value = log_density_close(bar, p);
      }
      break;
  }
  if (diag) {
    if (value == kNegInf) ++diag->neg_inf;
    if (series_failure) ++diag->series_failures;
  }
  return value;
}

void ParticleCloud::validate() const {
  const Eigen::Index n = size();
  if (n < 2) throw InvalidInput("ParticleCloud: need at least 2 particles");
  if (eta.cols() != n || weights.size() != n || eta.rows() != eta_dimension(variant))
    throw InvalidInput("ParticleCloud: inconsistent dimensions");
  if (!eta.allFinite() || !log_sigma.allFinite()) throw InvalidInput("ParticleCloud: non-finite particle");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
    throw InvalidInput("ParticleCloud: weights are not a simplex");
}

void FilterConfig::validate() const {
  if (particles < 2) throw ConfigError("particles must be >= 2");
  if (!(discount > 0.5 && discount < 1.0)) throw ConfigError("discount must lie in (0.5, 1)");
  if (!(resample_ess_fraction >= 0.0 && resample_ess_fraction <= 1.0))
    throw ConfigError("resample_ess_fraction must lie in [0, 1]");
  try {
    prior.validate();
    series.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

std::pair<double, double> shrinkage_constants(double epsilon) {
  if (!(epsilon > 0.5 && epsilon < 1.0)) throw InvalidInput("discount factor must lie in (0.5, 1)");
  const double a = (3.0 * epsilon - 1.0) / (2.0 * epsilon);
  return {a, 1.0 - a * a};
}

KernelMoments shrink_locations(const ParticleCloud& cloud, double a) {
  const Eigen::VectorXd& w = cloud.weights;
  KernelMoments k;
  k.mean = cloud.eta * w;
  const Eigen::MatrixXd centered = cloud.eta.colwise() - k.mean;
  k.cov = centered * w.asDiagonal() * centered.transpose();
  k.locations = (a * cloud.eta).colwise() + (1.0 - a) * k.mean;
  return k;
}

ParticleCloud init_cloud(const PriorHyper& hyper, int n, ModelVariant variant, std::uint64_t seed) {
  if (n < 2) throw InvalidInput("init_cloud: need at least 2 particles");
  hyper.validate();
  const EtaRows rows = rows_for(variant);
  ParticleCloud c;
  c.variant = variant;
  c.eta.resize(eta_dimension(variant), n);
  c.log_sigma.resize(n);
  c.weights.setConstant(n, 1.0 / n);
  for (int j = 0; j < n; ++j) {
    CounterRng rng(seed, stream_key(Stream::kPrior, 0), static_cast<std::uint64_t>(j));
    const Theta<double> theta = sample_prior(hyper, rng);
    const Eta<double> eta = to_eta(theta).eta;
    if (rows.mu >= 0) c.eta(rows.mu, j) = eta(eta_index::kMu);
    c.eta(rows.alpha, j) = eta(eta_index::kAlpha);
    c.eta(rows.logit_phi, j) = eta(eta_index::kLogitPhi);
    c.eta(rows.log_tau2, j) = eta(eta_index::kLogTau2);
    // clamped phi keeps the stationary variance finite
    c.log_sigma(j) = stationary_init(from_eta(eta), standard_normal(rng));
  }
  return c;
}

FilterSnapshot summarize(const ParticleCloud& c) {
  const EtaRows r = rows_for(c.variant);
  FilterSnapshot s;
  s.period = c.time_index;
  const Eigen::VectorXd& w = c.weights;
  s.sigma = summarize_values(c.log_sigma.array().exp().matrix(), w);
  if (r.mu >= 0)
    s.mu = summarize_values(c.eta.row(r.mu).transpose(), w);
  else
    s.mu = {0.0, 0.0, 0.0};
  s.alpha = summarize_values(c.eta.row(r.alpha).transpose(), w);
  s.phi = summarize_values(c.eta.row(r.logit_phi).transpose().unaryExpr([](double x) { return expit(x); }), w);
  s.tau2 = summarize_values(c.eta.row(r.log_tau2).transpose().array().exp().matrix(), w);
  s.ess = ess(w);
  return s;
}

std::pair<ParticleCloud, FilterSnapshot> filter_step(const ParticleCloud& cloud, const ChloObservation<double>& bar,
                                                     double epsilon, const SeriesControl& ctl, std::uint64_t seed,
                                                     int period, double resample_ess_fraction) {
  cloud.validate();
  const auto [a, one_minus_a2] = shrinkage_constants(epsilon);
  const Eigen::Index n = cloud.size();
  const Eigen::Index d = cloud.eta.rows();
  const EtaRows r = rows_for(cloud.variant);
  const Eigen::VectorXd& w = cloud.weights;
  LikelihoodDiagnostics diag;

  // 1. point estimates
  const KernelMoments km = shrink_locations(cloud, a);
  const Eigen::MatrixXd& m = km.locations;

  Eigen::VectorXd first_loglik(n);
  Eigen::VectorXd first_log_w(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double alpha = cloud.eta(r.alpha, j);
    const double z = std::exp(alpha + expit(cloud.eta(r.logit_phi, j)) * (cloud.log_sigma(j) - alpha));
    first_loglik(j) = bar_log_likelihood(bar, cloud.variant, drift_of(m, r, j), z, ctl, &diag);
    first_log_w(j) = w(j) > 0.0 ? std::log(w(j)) + first_loglik(j) : kNegInf;
  }

  // 2. auxiliary indicators
  Eigen::VectorXd first_prob;
  if (!normalize_log_weights(first_log_w, first_prob))
    throw FilterDegeneracy(period, "every first-stage likelihood is zero");
  const auto order = canonical_order(cloud);
  CounterRng indicator_rng(seed, stream_key(Stream::kIndicators, static_cast<std::uint64_t>(period)));
  const auto parents = multinomial_sorted(first_prob, order, indicator_rng);

  // 3-4. kernel draw of eta and state propagation
  const Eigen::MatrixXd factor =
      kernel_factor(one_minus_a2 * (km.cov + kKernelJitter * Eigen::MatrixXd::Identity(d, d)));
  ParticleCloud next;
  next.variant = cloud.variant;
  next.time_index = cloud.time_index + 1;
  next.eta.resize(d, n);
  next.log_sigma.resize(n);
  Eigen::VectorXd second_log_w(n);
  Eigen::VectorXd noise(d);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index parent = parents[static_cast<std::size_t>(j)];
    CounterRng rng(seed, stream_key(Stream::kPropagate, static_cast<std::uint64_t>(period)),
                   static_cast<std::uint64_t>(j));
    for (Eigen::Index k = 0; k < d; ++k) noise(k) = standard_normal(rng);
    next.eta.col(j) = m.col(parent) + factor * noise;
    const double alpha = next.eta(r.alpha, j);
    const double mean = alpha + expit(next.eta(r.logit_phi, j)) * (cloud.log_sigma(parent) - alpha);
    next.log_sigma(j) = mean + std::exp(0.5 * next.eta(r.log_tau2, j)) * standard_normal(rng);

    // 5. second-stage weight
    const double num = bar_log_likelihood(bar, cloud.variant, drift_of(next.eta, r, j),
                                          std::exp(next.log_sigma(j)), ctl, &diag);
    second_log_w(j) = num - first_loglik(parent);
  }
  if (!normalize_log_weights(second_log_w, next.weights))
    throw FilterDegeneracy(period, "every second-stage weight is zero");

  FilterSnapshot snap = summarize(next);
  snap.period = period;
  snap.neg_inf_loglik = diag.neg_inf;
  snap.series_failures = diag.series_failures;

  if (resample_ess_fraction > 0.0 && snap.ess < resample_ess_fraction * static_cast<double>(n)) {
    CounterRng rng(seed, stream_key(Stream::kResample, static_cast<std::uint64_t>(period)));
    systematic_resample(next, rng);
  }
  return {std::move(next), snap};
}

std::vector<FilterSnapshot> run_filter(std::span<const ChloObservation<double>> bars, const FilterConfig& config) {
  config.validate();
  if (bars.empty()) throw InvalidInput("run_filter: no bars");
  ParticleCloud cloud = init_cloud(config.prior, config.particles, config.variant, config.seed);
  std::vector<FilterSnapshot> out;
  out.reserve(bars.size());
  for (std::size_t t = 0; t < bars.size(); ++t) {
    ChloObservation<double> bar = bars[t];
    if (!config.weekend_effect && t > 0) bar.open = bars[t - 1].close;
    auto [next, snap] = filter_step(cloud, bar, config.discount, config.series, config.seed,
                                    static_cast<int>(t) + 1, config.resample_ess_fraction);
    cloud = std::move(next);
    out.push_back(snap);
  }
  return out;
}

}  // namespace chlosv
