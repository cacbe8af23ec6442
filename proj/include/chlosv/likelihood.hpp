#pragma once

// Per-period densities of drifted Brownian motion over a unit interval,
// conditional on drift and volatility: the close alone, the joint of
// (low, high, close), range with close, range alone, and the two
// single-extreme marginals. All values are natural logs; -inf marks a
// point outside the support.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "chlosv/errors.hpp"
#include "chlosv/series.hpp"

namespace chlosv {

template <typename Scalar>
struct PeriodParams {
  Scalar mu = 0;
  Scalar sigma = 1;
};

/// One period in log-price space. `open` is the conditioning start value.
template <typename Scalar>
struct ChloObservation {
  Scalar open = 0;
  Scalar close = 0;
  std::optional<Scalar> low;
  std::optional<Scalar> high;
};

template <typename Scalar>
struct LogDensity {
  Scalar value = -std::numeric_limits<Scalar>::infinity();
  int terms_used = 0;
  bool converged = true;
  bool nonpositive = false;  // truncated sum was <= 0 or lost to cancellation

  bool series_failure() const { return !converged || nonpositive; }
};

namespace detail {

template <typename Scalar>
constexpr Scalar neg_inf() {
  return -std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
constexpr Scalar log_sqrt_2pi() {
  return static_cast<Scalar>(0.91893853320467274178032973640561763986139747363778L);
}

template <typename Scalar>
void require_finite(Scalar v, const char* what) {
  using std::isfinite;
  if (!isfinite(v)) throw InvalidInput(std::string("non-finite ") + what);
}

template <typename Scalar>
void check_params(const PeriodParams<Scalar>& p) {
  require_finite(p.mu, "drift");
  require_finite(p.sigma, "volatility");
  if (!(p.sigma > 0)) throw InvalidInput("volatility must be positive");
}

template <typename Scalar>
void check_sigma(Scalar sigma) {
  require_finite(sigma, "volatility");
  if (!(sigma > 0)) throw InvalidInput("volatility must be positive");
}

/// log of exp{-(mu^2 - 2 mu x) / (2 sigma^2)}, the change-of-measure factor for drift.
template <typename Scalar>
Scalar log_drift_factor(Scalar mu, Scalar x, Scalar sigma) {
  return (mu * x - Scalar(0.5) * mu * mu) / (sigma * sigma);
}

template <typename Scalar>
LogDensity<Scalar> from_series(const SeriesResult<Scalar>& s, Scalar log_prefactor) {
  LogDensity<Scalar> out;
  out.terms_used = s.terms_used;
  out.converged = s.converged;
  if (s.cancelled()) {
    out.nonpositive = true;
    return out;
  }
  if (!s.converged) return out;
  out.value = log_prefactor + s.log_value();
  return out;
}

}  // namespace detail

/// Gaussian log-density of the close given the open: N(open + mu, sigma^2).
template <typename Scalar>
Scalar log_density_close(const ChloObservation<Scalar>& obs, const PeriodParams<Scalar>& p) {
  detail::require_finite(obs.open, "open");
  detail::require_finite(obs.close, "close");
  detail::check_params(p);
  using std::log;
  const Scalar z = (obs.close - obs.open - p.mu) / p.sigma;
  return -detail::log_sqrt_2pi<Scalar>() - log(p.sigma) - Scalar(0.5) * z * z;
}

/// Joint log-density of (low, high, close) given the open.
///
/// Image sum over n of 4n^2(2 d1 - 1) e^{-d1} - 4n(n-1)(2 d2 - 1) e^{-d2} with
/// d1 = (x - 2nr)^2 / 2s^2, d2 = (x - 2(low-open) - 2nr)^2 / 2s^2, x = close - open,
/// r = high - low, times the drift factor over sqrt(2 pi) s^3.
template <typename Scalar>
LogDensity<Scalar> log_density_chlo(const ChloObservation<Scalar>& obs, const PeriodParams<Scalar>& p,
                                    const SeriesControl& ctl = {}) {
  if (!obs.low || !obs.high) throw InvalidInput("log_density_chlo requires both extremes");
  detail::require_finite(obs.open, "open");
  detail::require_finite(obs.close, "close");
  detail::require_finite(*obs.low, "low");
  detail::require_finite(*obs.high, "high");
  detail::check_params(p);

  using std::fmin;
  using std::fmax;
  using std::log;
  const Scalar lo = *obs.low;
  const Scalar hi = *obs.high;
  if (!(lo < fmin(obs.open, obs.close)) || !(hi > fmax(obs.open, obs.close))) return {};

  const Scalar x = obs.close - obs.open;
  const Scalar a = lo - obs.open;
  const Scalar r = hi - lo;
  const Scalar inv2s2 = Scalar(1) / (Scalar(2) * p.sigma * p.sigma);

  auto block = [&](int k) {
    SeriesBlock<Scalar> b;
    if (k == 0) return b;
    for (const int n : {k, -k}) {
      const Scalar nn = n;
      const Scalar u1 = x - Scalar(2) * nn * r;
      const Scalar u2 = x - Scalar(2) * a - Scalar(2) * nn * r;
      const Scalar d1 = u1 * u1 * inv2s2;
      const Scalar d2 = u2 * u2 * inv2s2;
      b.add(Scalar(4) * nn * nn * (Scalar(2) * d1 - Scalar(1)), d1);
      b.add(-Scalar(4) * nn * (nn - Scalar(1)) * (Scalar(2) * d2 - Scalar(1)), d2);
    }
    return b;
  };
  const auto s = truncated_signed_series<Scalar>(block, ctl, 1);
  const Scalar log_pre =
      -detail::log_sqrt_2pi<Scalar>() - Scalar(3) * log(p.sigma) + detail::log_drift_factor(p.mu, x, p.sigma);
  return detail::from_series(s, log_pre);
}

/// Joint log-density of (range, close) given the open, the joint above with
/// the level of the extremes integrated out at fixed range.
template <typename Scalar>
LogDensity<Scalar> log_density_range_close(Scalar range, Scalar open, Scalar close, const PeriodParams<Scalar>& p,
                                           const SeriesControl& ctl = {}) {
  detail::require_finite(range, "range");
  detail::require_finite(open, "open");
  detail::require_finite(close, "close");
  detail::check_params(p);

  using std::abs;
  using std::log;
  const Scalar x = close - open;
  const Scalar ax = abs(x);
  if (!(range > ax)) return {};

  const Scalar width = (range - ax) / p.sigma;
  auto block = [&](int k) {
    SeriesBlock<Scalar> b;
    if (k == 0) return b;
    for (const int n : {k, -k}) {
      const Scalar nn = n;
      const Scalar v = (Scalar(2) * nn * range - ax) / p.sigma;
      const Scalar c = Scalar(4) * nn * nn * width * (v * v - Scalar(1)) + Scalar(4) * nn * (nn - Scalar(1)) * v;
      b.add(c, Scalar(0.5) * v * v);
    }
    return b;
  };
  const auto s = truncated_signed_series<Scalar>(block, ctl, 1);
  const Scalar log_pre =
      -detail::log_sqrt_2pi<Scalar>() - Scalar(2) * log(p.sigma) + detail::log_drift_factor(p.mu, x, p.sigma);
  return detail::from_series(s, log_pre);
}

/// Log-density of the range of a driftless Brownian path over a unit interval:
/// 8 / (sqrt(2 pi) s) * sum_{n>=1} (-1)^{n-1} n^2 exp(-n^2 r^2 / 2s^2).
template <typename Scalar>
LogDensity<Scalar> log_density_range(Scalar range, Scalar sigma, const SeriesControl& ctl = {}) {
  detail::require_finite(range, "range");
  detail::check_sigma(sigma);
  using std::log;
  if (!(range > 0)) return {};

  const Scalar c = range * range / (Scalar(2) * sigma * sigma);
  auto block = [&](int k) {
    SeriesBlock<Scalar> b;
    if (k == 0) return b;
    const Scalar n = k;
    b.add((k % 2 == 1 ? Scalar(1) : Scalar(-1)) * n * n, n * n * c);
    return b;
  };
  const auto s = truncated_signed_series<Scalar>(block, ctl, 1);
  const Scalar log_pre = log(Scalar(8)) - detail::log_sqrt_2pi<Scalar>() - log(sigma);
  return detail::from_series(s, log_pre);
}

/// Joint log-density of (high, close) given the open, low unobserved.
template <typename Scalar>
Scalar log_density_close_max(const ChloObservation<Scalar>& obs, const PeriodParams<Scalar>& p) {
  if (!obs.high) throw InvalidInput("log_density_close_max requires the high");
  detail::require_finite(obs.open, "open");
  detail::require_finite(obs.close, "close");
  detail::require_finite(*obs.high, "high");
  detail::check_params(p);
  using std::fmax;
  using std::log;
  if (!(*obs.high > fmax(obs.open, obs.close))) return detail::neg_inf<Scalar>();
  const Scalar w = Scalar(2) * *obs.high - obs.close - obs.open;
  const Scalar x = obs.close - obs.open;
  return log(Scalar(2) * w) - detail::log_sqrt_2pi<Scalar>() - Scalar(3) * log(p.sigma) -
         w * w / (Scalar(2) * p.sigma * p.sigma) + detail::log_drift_factor(p.mu, x, p.sigma);
}

/// Joint log-density of (low, close) given the open, high unobserved.
template <typename Scalar>
Scalar log_density_close_min(const ChloObservation<Scalar>& obs, const PeriodParams<Scalar>& p) {
  if (!obs.low) throw InvalidInput("log_density_close_min requires the low");
  detail::require_finite(obs.open, "open");
  detail::require_finite(obs.close, "close");
  detail::require_finite(*obs.low, "low");
  detail::check_params(p);
  using std::fmin;
  using std::log;
  if (!(*obs.low < fmin(obs.open, obs.close))) return detail::neg_inf<Scalar>();
  const Scalar w = obs.close + obs.open - Scalar(2) * *obs.low;
  const Scalar x = obs.close - obs.open;
  return log(Scalar(2) * w) - detail::log_sqrt_2pi<Scalar>() - Scalar(3) * log(p.sigma) -
         w * w / (Scalar(2) * p.sigma * p.sigma) + detail::log_drift_factor(p.mu, x, p.sigma);
}

}  // namespace chlosv
