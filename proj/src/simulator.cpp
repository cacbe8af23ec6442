#include "chlosv/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "chlosv/errors.hpp"

namespace chlosv {

void SimConfig::validate() const {
  if (n_periods < 1) throw ConfigError("n_periods must be >= 1");
  if (grid_nodes < 2) throw ConfigError("grid_nodes must be >= 2");
  if (!(s0 > 0.0) || !std::isfinite(s0)) throw ConfigError("s0 must be positive");
  if (n_datasets < 1) throw ConfigError("n_datasets must be >= 1");
  try {
    theta_true.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

SimDataset simulate_dataset(const SimConfig& cfg, std::uint64_t dataset_index) {
  cfg.validate();
  const Theta<double>& theta = cfg.theta_true;
  SimDataset ds;
  ds.prices.reserve(static_cast<std::size_t>(cfg.n_periods));
  ds.bars.reserve(static_cast<std::size_t>(cfg.n_periods));
  ds.true_log_sigma.reserve(static_cast<std::size_t>(cfg.n_periods));

  CounterRng latent(cfg.seed, stream_key(Stream::kLatentPath, dataset_index));
  double log_sigma = stationary_init(theta, standard_normal(latent));
  for (int t = 0; t < cfg.n_periods; ++t) {
    log_sigma = evolve_logvol(log_sigma, theta, standard_normal(latent));
    ds.true_log_sigma.push_back(log_sigma);
  }

  double open_level = cfg.s0;
  for (int t = 0; t < cfg.n_periods; ++t) {
    CounterRng rng(cfg.seed, stream_key(Stream::kBarPath, dataset_index), static_cast<std::uint64_t>(t));
    const PeriodParams<double> p{theta.mu, std::exp(ds.true_log_sigma[static_cast<std::size_t>(t)])};
    const auto path = simulate_period(std::log(open_level), p, cfg.grid_nodes, rng);
    PriceBar price{open_level, std::exp(*path.high), std::exp(*path.low), std::exp(path.close)};
    // rounding in exp must not break the ordering the path satisfies
    price.high = std::max(price.high, std::max(price.open, price.close));
    price.low = std::min(price.low, std::min(price.open, price.close));
    ChloObservation<double> bar;
    bar.open = std::log(price.open);
    bar.close = std::log(price.close);
    bar.high = std::log(price.high);
    bar.low = std::log(price.low);
    ds.prices.push_back(price);
    ds.bars.push_back(bar);
    open_level = price.close;
  }
  return ds;
}

double rmsd(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || truth.empty()) throw InvalidInput("rmsd: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += (estimate[i] - truth[i]) * (estimate[i] - truth[i]);
  return std::sqrt(acc / static_cast<double>(truth.size()));
}

double mad(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || truth.empty()) throw InvalidInput("mad: size mismatch");
  std::vector<double> dev(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) dev[i] = std::abs(estimate[i] - truth[i]);
  return sample_quantile(std::move(dev), 0.5);
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidInput("sample_quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("sample_quantile: level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<ModelPair> default_model_pairs() {
  using V = ModelVariant;
  return {{V::kStsv, V::kRasv}, {V::kRasv, V::kRcsv}, {V::kRcsv, V::kExsv}, {V::kRasv, V::kExsv}};
}

std::string pair_label(const ModelPair& p) { return to_string(p.numerator) + "/" + to_string(p.denominator); }

const ModelFit& DatasetResult::fit(ModelVariant v) const {
  for (const auto& f : fits)
    if (f.variant == v) return f;
  throw InvalidInput("DatasetResult: model " + to_string(v) + " was not fitted");
}

StudyResult run_study(const SimConfig& cfg, const FilterConfig& filter, const std::vector<ModelPair>& pairs) {
  cfg.validate();
  filter.validate();
  if (pairs.empty()) throw ConfigError("run_study: no model pairs");
  std::vector<ModelVariant> models;
  for (const auto& p : pairs)
    for (const auto v : {p.numerator, p.denominator})
      if (std::find(models.begin(), models.end(), v) == models.end()) models.push_back(v);

  StudyResult out;
  for (int d = 0; d < cfg.n_datasets; ++d) {
    const SimDataset ds = simulate_dataset(cfg, static_cast<std::uint64_t>(d));
    DatasetResult res;
    res.true_sigma.reserve(ds.true_log_sigma.size());
    for (const double ls : ds.true_log_sigma) res.true_sigma.push_back(std::exp(ls));

    for (const auto v : models) {
      FilterConfig fc = filter;
      fc.variant = v;
      fc.seed = CounterRng(filter.seed, 0x5eed, static_cast<std::uint64_t>(d))();
      std::vector<FilterSnapshot> snaps;
      try {
        snaps = run_filter(ds.bars, fc);
      } catch (const FilterDegeneracy& e) {
        throw FilterDegeneracy(e.period(), "dataset " + std::to_string(d) + ", model " + to_string(v) + ": " + e.what());
      }
      ModelFit fit;
      fit.variant = v;
      fit.min_ess = static_cast<double>(fc.particles);
      for (std::size_t t = 0; t < snaps.size(); ++t) {
        const auto& s = snaps[t];
        fit.sigma_mean.push_back(s.sigma.mean);
        if (s.sigma.q05 <= res.true_sigma[t] && res.true_sigma[t] <= s.sigma.q95) ++fit.covered;
        if (!(s.ess > 0.0 && s.ess <= static_cast<double>(fc.particles) * (1.0 + 1e-12))) fit.ess_valid = false;
        fit.min_ess = std::min(fit.min_ess, s.ess);
      }
      fit.final_mu_mean = snaps.back().mu.mean;
      fit.rmsd = rmsd(fit.sigma_mean, res.true_sigma);
      fit.mad = mad(fit.sigma_mean, res.true_sigma);
      res.fits.push_back(std::move(fit));
    }
    out.datasets.push_back(std::move(res));
  }

  for (const auto& p : pairs) {
    std::vector<double> rmsd_ratio, mad_ratio;
    for (const auto& ds : out.datasets) {
      rmsd_ratio.push_back(ds.fit(p.numerator).rmsd / ds.fit(p.denominator).rmsd);
      mad_ratio.push_back(ds.fit(p.numerator).mad / ds.fit(p.denominator).mad);
    }
    RatioRow row;
    row.pair = p;
    row.rmsd_median = sample_quantile(rmsd_ratio, 0.5);
    row.rmsd_q05 = sample_quantile(rmsd_ratio, 0.05);
    row.rmsd_q95 = sample_quantile(rmsd_ratio, 0.95);
    row.mad_median = sample_quantile(mad_ratio, 0.5);
    row.mad_q05 = sample_quantile(mad_ratio, 0.05);
    row.mad_q95 = sample_quantile(mad_ratio, 0.95);
    out.rows.push_back(row);
  }
  return out;
}

ExtremesSample simulate_extremes(double open, const PeriodParams<double>& p, std::size_t n_paths, int grid_nodes,
                                 std::uint64_t seed, bool bridge_extremes) {
  ExtremesSample s;
  s.low.reserve(n_paths);
  s.high.reserve(n_paths);
  s.close.reserve(n_paths);
  CounterRng rng(seed, stream_key(Stream::kOracle, 0));
  for (std::size_t i = 0; i < n_paths; ++i) {
    const auto bar = simulate_period(open, p, grid_nodes, rng, bridge_extremes);
    s.low.push_back(*bar.low);
    s.high.push_back(*bar.high);
    s.close.push_back(bar.close);
  }
  return s;
}

OracleEstimate mc_density_oracle(const PeriodParams<double>& p, const ExtremesBox& box, std::size_t n_paths,
                                 int grid_nodes, std::uint64_t seed, bool bridge_extremes) {
  if (n_paths == 0) throw InvalidInput("mc_density_oracle: n_paths must be positive");
  const auto sample = simulate_extremes(0.0, p, n_paths, grid_nodes, seed, bridge_extremes);
  return box_probability(sample, [&](double lo, double hi, double c) { return box.contains(lo, hi, c); });
}

}  // namespace chlosv
