#pragma once

// Closed-form thresholds and minimax lower bounds for support recovery of
// k-tree-sparse signals. All logarithms are natural.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace treesense::bounds {

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

inline void check_gamma(double gamma) {
  require(gamma > 0.0 && gamma < 1.0 / 3.0, "gamma must lie in (0, 1/3)");
}

}  // namespace detail

/// Amplitude at or below which every estimator fed m non-adaptive Gaussian
/// measurements has minimax risk >= gamma:
/// sqrt((1 - 2 gamma) / 25) * sqrt(sigma^2 (n / m) log k).
inline double theorem1_threshold(double n, double m, double k, double gamma, double sigma2) {
  detail::check_gamma(gamma);
  detail::require(k >= 2 && k <= (n + 1) / 2, "theorem1_threshold: need 2 <= k <= (n+1)/2");
  detail::require(m > 0 && sigma2 >= 0, "theorem1_threshold: need m > 0, sigma2 >= 0");
  return std::sqrt((1.0 - 2.0 * gamma) / 25.0) * std::sqrt(sigma2 * (n / m) * std::log(k));
}

/// Same guarantee over every (possibly adaptive) strategy with m measurements:
/// (1 - 2 gamma) sqrt(sigma^2 k / m).
inline double theorem2_threshold(double k, double m, double gamma, double sigma2) {
  detail::check_gamma(gamma);
  detail::require(k >= 2, "theorem2_threshold: need k >= 2");
  detail::require(m > 0 && sigma2 >= 0, "theorem2_threshold: need m > 0, sigma2 >= 0");
  return (1.0 - 2.0 * gamma) * std::sqrt(sigma2 * k / m);
}

/// Sufficient amplitude for repeated-measurement tree sensing stated in terms
/// of the total budget m (uses 1/r <= 3k/m):
/// sqrt(24 [1 + log(4 beta / delta)]) * sqrt(sigma^2 (k / m) log k).
inline double sufficient_mu_suffcond(double k, double m, double beta, double delta, double sigma2) {
  detail::require(k >= 2, "sufficient_mu_suffcond: need k >= 2");
  detail::require(beta >= 1, "sufficient_mu_suffcond: need beta >= 1");
  detail::require(delta > 0 && delta < 1, "sufficient_mu_suffcond: delta must lie in (0,1)");
  detail::require(m > 0 && sigma2 >= 0, "sufficient_mu_suffcond: need m > 0, sigma2 >= 0");
  return std::sqrt(24.0 * (1.0 + std::log(4.0 * beta / delta))) *
         std::sqrt(sigma2 * (k / m) * std::log(k));
}

/// Upper bound on the failure probability of tree sensing with threshold tau:
/// k exp(-(mu - tau)^2 / 2 sigma^2) + (k + 1) exp(-tau^2 / 2 sigma^2), capped at 1.
/// Vacuous (1) unless 0 <= tau < mu.
inline double error_envelope(double k, double mu, double tau, double sigma2) {
  if (!(mu > tau) || !(tau >= 0)) return 1.0;
  if (sigma2 == 0.0) return tau > 0 ? 0.0 : 1.0;
  const double miss = k * std::exp(-(mu - tau) * (mu - tau) / (2.0 * sigma2));
  const double false_alarm = (k + 1) * std::exp(-tau * tau / (2.0 * sigma2));
  return std::min(1.0, miss + false_alarm);
}

/// KL divergence between the observation laws of two hard-subclass signals
/// under the Gaussian ensemble: m mu^2 / (n sigma^2).
inline double kl_gaussian_ensemble(double m, double n, double mu, double sigma2) {
  detail::require(m > 0 && n > 0 && sigma2 > 0, "kl_gaussian_ensemble: need m, n, sigma2 > 0");
  return m * mu * mu / (n * sigma2);
}

/// Two-hypothesis minimax error lower bound for KL budget alpha:
/// max{exp(-alpha)/4, (1 - sqrt(alpha/2))/2}.
inline double tsybakov_binary(double alpha) {
  detail::require(alpha >= 0, "tsybakov_binary: alpha must be >= 0");
  return std::max(0.25 * std::exp(-alpha), 0.5 * (1.0 - std::sqrt(alpha / 2.0)));
}

/// The L+1 hypothesis bound before specialization, at a given tau in (0,1):
/// (tau L / (1 + tau L)) (1 + (alpha + sqrt(alpha/2)) / log tau).
inline double tsybakov_multi_at(double alpha, double L, double tau) {
  detail::require(tau > 0 && tau < 1, "tsybakov_multi_at: tau must lie in (0,1)");
  return (tau * L / (1.0 + tau * L)) * (1.0 + (alpha + std::sqrt(alpha / 2.0)) / std::log(tau));
}

enum class MultiMode { specialized, supremum };

/// (L+1)-hypothesis minimax error lower bound for average KL budget alpha.
///
/// `specialized` (default) evaluates tau = 1/sqrt(L) and relaxes to
/// max(0, (1 - (2 alpha + sqrt(2 alpha)) / log L) / 2). `supremum` maximizes
/// the unrelaxed expression over tau by golden-section search (tol 1e-8),
/// floored at 0; it is never smaller than the specialized value.
inline double tsybakov_multi(double alpha, double L, MultiMode mode = MultiMode::specialized) {
  detail::require(L >= 2, "tsybakov_multi: L must be >= 2");
  detail::require(alpha >= 0, "tsybakov_multi: alpha must be >= 0");
  const double relaxed =
      std::max(0.0, 0.5 * (1.0 - (2.0 * alpha + std::sqrt(2.0 * alpha)) / std::log(L)));
  if (mode == MultiMode::specialized) return relaxed;

  // The objective is unimodal in log(tau) on (0,1) for the parameter ranges used here.
  auto f = [&](double s) { return tsybakov_multi_at(alpha, L, std::exp(s)); };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(1e-12), b = std::log(1.0 - 1e-12);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-8) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    }
  }
  double best = std::max({fc, fd, tsybakov_multi_at(alpha, L, 1.0 / std::sqrt(L))});
  return std::max({0.0, best, relaxed});
}

/// One-sparse minimax risk lower bound in n_eff dimensions over any strategy
/// with m measurements: max(0, (1 - sqrt(m mu^2 / (n_eff sigma^2))) / 2).
inline double onesparse_lower(double m, double n_eff, double mu, double sigma2) {
  detail::require(m > 0 && n_eff > 0 && sigma2 > 0, "onesparse_lower: need m, n_eff, sigma2 > 0");
  return std::max(0.0, 0.5 * (1.0 - std::sqrt(m * mu * mu / (n_eff * sigma2))));
}

/// Lower bound on non-adaptive Gaussian minimax risk at amplitude mu, routed
/// through the binary bound for k = 2 and the L = k-1 bound for k >= 3.
inline double nonadaptive_risk_lower(double n, double m, double k, double mu, double sigma2) {
  detail::require(k >= 2, "nonadaptive_risk_lower: need k >= 2");
  const double alpha = kl_gaussian_ensemble(m, n, mu, sigma2);
  if (k < 3) return tsybakov_binary(alpha);
  return tsybakov_multi(alpha, k - 1);
}

/// Lower bound on adaptive minimax risk at amplitude mu: the one-sparse bound
/// over the k-element neighbor set of the hard subclass.
inline double adaptive_risk_lower(double m, double k, double mu, double sigma2) {
  detail::require(k >= 2, "adaptive_risk_lower: need k >= 2");
  return onesparse_lower(m, k, mu, sigma2);
}

}  // namespace treesense::bounds
