#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "chlosv/errors.hpp"

namespace chlosv {

/// Truncation control shared by every image-sum density.
struct SeriesControl {
  double rel_tol = 1e-12;
  int max_terms = 100;

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw InvalidInput("SeriesControl: rel_tol must lie in (0, 1)");
    if (max_terms < 1) throw InvalidInput("SeriesControl: max_terms must be >= 1");
  }
};

/// Terms c_i * exp(-d_i) belonging to one symmetric index block {n = k, n = -k}.
template <typename Scalar, int Capacity = 4>
struct SeriesBlock {
  std::array<Scalar, Capacity> coef{};
  std::array<Scalar, Capacity> expo{};
  int size = 0;

  void add(Scalar c, Scalar d) {
    coef[size] = c;
    expo[size] = d;
    ++size;
  }
};

/// Sum held as scaled_sum * exp(-shift) so that deep tails do not underflow.
template <typename Scalar>
struct SeriesResult {
  Scalar scaled_sum = 0;
  Scalar scaled_abs = 0;  // sum of |terms| on the same scale
  Scalar shift = 0;
  int terms_used = 0;     // blocks evaluated
  bool converged = false;

  Scalar value() const {
    using std::exp;
    return scaled_sum * exp(-shift);
  }

  /// True when the signed sum is not distinguishable from rounding noise.
  bool cancelled() const {
    return !(scaled_sum > Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scaled_abs);
  }

  Scalar log_value() const {
    using std::log;
    if (!(scaled_sum > 0)) return -std::numeric_limits<Scalar>::infinity();
    return log(scaled_sum) - shift;
  }
};

/// Sums a signed exponential series block by block, outward from `first_block`.
///
/// `block(k)` returns the terms for |n| = k. All terms share one exponent
/// shift, the smallest exponent seen so far; when a later block carries a
/// smaller exponent the partial sums are rescaled. Summation stops once a
/// block's absolute contribution is at most rel_tol times the running |sum|,
/// or after |n| reaches max_terms (converged = false).
template <typename Scalar, typename BlockFn>
SeriesResult<Scalar> truncated_signed_series(BlockFn&& block, const SeriesControl& ctl, int first_block = 0) {
  using std::exp;
  using std::abs;
  SeriesResult<Scalar> out;
  bool have_shift = false;
  const Scalar tol = static_cast<Scalar>(ctl.rel_tol);

  for (int k = first_block; k <= ctl.max_terms; ++k) {
    const auto b = block(k);
    Scalar block_sum = 0;
    Scalar block_abs = 0;
    for (int i = 0; i < b.size; ++i) {
      if (b.coef[i] == Scalar(0)) continue;
      if (!have_shift) {
        out.shift = b.expo[i];
        have_shift = true;
      } else if (b.expo[i] < out.shift) {
        const Scalar rescale = exp(b.expo[i] - out.shift);
        out.scaled_sum *= rescale;
        out.scaled_abs *= rescale;
        block_sum *= rescale;
        block_abs *= rescale;
        out.shift = b.expo[i];
      }
      const Scalar t = b.coef[i] * exp(out.shift - b.expo[i]);
      block_sum += t;
      block_abs += abs(t);
    }
    out.scaled_sum += block_sum;
    out.scaled_abs += block_abs;
    ++out.terms_used;
    if (block_abs <= tol * abs(out.scaled_sum)) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace chlosv
