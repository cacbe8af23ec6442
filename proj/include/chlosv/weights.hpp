#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "chlosv/errors.hpp"

namespace chlosv {

/// Effective sample size N / (1 + V(w) / E(w)^2), V the population variance.
template <typename Derived>
double ess(const Eigen::MatrixBase<Derived>& weights) {
  const auto n = weights.size();
  if (n == 0) throw InvalidInput("ess: empty weights");
  const double mean = weights.mean();
  const double var = (weights.array() - mean).square().mean();
  return static_cast<double>(n) / (1.0 + var / (mean * mean));
}

/// Exponentiates log-weights into a simplex, subtracting the maximum first.
/// Returns false when every entry is -inf (nothing to normalize).
template <typename Derived>
bool normalize_log_weights(const Eigen::MatrixBase<Derived>& log_w, Eigen::VectorXd& out) {
  const double top = log_w.maxCoeff();
  if (!std::isfinite(top)) return false;
  out = (log_w.array() - top).exp().matrix();
  out /= out.sum();
  return true;
}

/// Smallest value whose cumulative weight reaches each requested level.
/// `levels` must be sorted ascending; weights need not be normalized.
inline std::vector<double> weighted_quantiles(std::span<const double> values, std::span<const double> weights,
                                              std::span<const double> levels) {
  if (values.empty() || values.size() != weights.size()) throw InvalidInput("weighted_quantiles: bad input sizes");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

  // accumulate in sorted order so the running sum ends exactly at `total`
  double total = 0.0;
  for (const std::size_t i : order) total += weights[i];
  std::vector<double> out;
  out.reserve(levels.size());
  double cum = 0.0;
  std::size_t pos = 0;
  for (const double q : levels) {
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("weighted_quantiles: level outside [0, 1]");
    // relative slack so that rounding in the running sum cannot skip an atom
    const double target = q * total * (1.0 - 1e-12);
    // skip leading zero-weight values so q = 0 lands on supported mass
    while (pos < order.size() && (cum + weights[order[pos]] < target || weights[order[pos]] == 0.0) &&
           pos + 1 < order.size()) {
      cum += weights[order[pos]];
      ++pos;
    }
    out.push_back(values[order[pos]]);
  }
  return out;
}

inline double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  const double level[] = {q};
  return weighted_quantiles(values, weights, level).front();
}

}  // namespace chlosv
