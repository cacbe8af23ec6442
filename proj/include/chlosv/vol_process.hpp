#pragma once

// AR(1) log-volatility dynamics, its stationary law, the structural-parameter
// priors, and the map between natural and unconstrained parameters.

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "chlosv/errors.hpp"

namespace chlosv {

template <typename Scalar>
struct Theta {
  Scalar mu = 0;
  Scalar alpha = 0;
  Scalar phi = 0;
  Scalar tau2 = 1;

  void validate() const {
    using std::isfinite;
    if (!isfinite(mu) || !isfinite(alpha) || !isfinite(phi) || !isfinite(tau2))
      throw InvalidInput("Theta: non-finite component");
    if (!(phi >= 0 && phi < 1)) throw InvalidInput("Theta: phi must lie in [0, 1)");
    if (!(tau2 > 0)) throw InvalidInput("Theta: tau2 must be positive");
  }
};

/// (mu, alpha, logit(phi), log(tau2)).
template <typename Scalar>
using Eta = Eigen::Matrix<Scalar, 4, 1>;

namespace eta_index {
inline constexpr int kMu = 0;
inline constexpr int kAlpha = 1;
inline constexpr int kLogitPhi = 2;
inline constexpr int kLogTau2 = 3;
}  // namespace eta_index

/// Normal/normal/beta/inverse-gamma hyperparameters. Inverse gamma uses the
/// shape/scale convention, mean v/(u-1); beta(q, r) has mean q/(q+r).
struct PriorHyper {
  double d_mu = 0.0;
  double D_mu = 1e-4;
  double d_alpha = -3.75;
  double D_alpha = 0.025;
  double q_phi = 9.0;
  double r_phi = 1.0;
  double u_tau = 6.0;
  double v_tau = 0.06;

  void validate() const {
    for (double v : {d_mu, D_mu, d_alpha, D_alpha, q_phi, r_phi, u_tau, v_tau})
      if (!std::isfinite(v)) throw InvalidInput("PriorHyper: non-finite hyperparameter");
    if (!(D_mu > 0 && D_alpha > 0)) throw InvalidInput("PriorHyper: variances must be positive");
    if (!(q_phi > 0 && r_phi > 0 && u_tau > 0 && v_tau > 0)) throw InvalidInput("PriorHyper: shapes must be positive");
  }
};

template <typename Scalar>
Scalar expit(Scalar x) {
  using std::exp;
  return x >= 0 ? Scalar(1) / (Scalar(1) + exp(-x)) : exp(x) / (Scalar(1) + exp(x));
}

template <typename Scalar>
Scalar logit(Scalar p) {
  using std::log;
  return log(p) - std::log1p(-p);
}

/// alpha + phi (prev - alpha) + tau * noise
template <typename Scalar>
Scalar evolve_logvol(Scalar logsigma_prev, const Theta<Scalar>& theta, Scalar noise) {
  using std::sqrt;
  return theta.alpha + theta.phi * (logsigma_prev - theta.alpha) + sqrt(theta.tau2) * noise;
}

/// Draw from N(alpha, tau^2 / (1 - phi^2)) given a standard normal `noise`.
template <typename Scalar>
Scalar stationary_init(const Theta<Scalar>& theta, Scalar noise) {
  using std::sqrt;
  if (!(theta.phi < 1)) throw InvalidInput("stationary_init: phi must be < 1");
  return theta.alpha + sqrt(theta.tau2 / (Scalar(1) - theta.phi * theta.phi)) * noise;
}

template <typename Rng>
Theta<double> sample_prior(const PriorHyper& h, Rng& rng) {
  boost::random::normal_distribution<double> mu(h.d_mu, std::sqrt(h.D_mu));
  boost::random::normal_distribution<double> alpha(h.d_alpha, std::sqrt(h.D_alpha));
  boost::random::beta_distribution<double> phi(h.q_phi, h.r_phi);
  boost::random::gamma_distribution<double> precision(h.u_tau, 1.0 / h.v_tau);
  Theta<double> t;
  t.mu = mu(rng);
  t.alpha = alpha(rng);
  t.phi = phi(rng);
  t.tau2 = 1.0 / precision(rng);
  return t;
}

template <typename Scalar>
struct EtaTransform {
  Eta<Scalar> eta;
  bool phi_clamped = false;
};

inline constexpr double kPhiClamp = 1e-12;

template <typename Scalar>
EtaTransform<Scalar> to_eta(const Theta<Scalar>& theta) {
  using std::log;
  EtaTransform<Scalar> out;
  Scalar phi = theta.phi;
  const Scalar lo = Scalar(kPhiClamp);
  const Scalar hi = Scalar(1) - Scalar(kPhiClamp);
  if (phi < lo || phi > hi) {
    phi = std::clamp(phi, lo, hi);
    out.phi_clamped = true;
  }
  out.eta << theta.mu, theta.alpha, logit(phi), log(theta.tau2);
  return out;
}

template <typename Derived>
Theta<typename Derived::Scalar> from_eta(const Eigen::MatrixBase<Derived>& eta) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  Theta<Scalar> t;
  t.mu = eta(eta_index::kMu);
  t.alpha = eta(eta_index::kAlpha);
  t.phi = expit(eta(eta_index::kLogitPhi));
  t.tau2 = exp(eta(eta_index::kLogTau2));
  return t;
}

}  // namespace chlosv
