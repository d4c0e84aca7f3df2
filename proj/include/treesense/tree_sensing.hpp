#pragma once

// Adaptive tree sensing: test nodes top-down by direct (optionally repeated)
// measurement, descending into the children of every node whose averaged
// observation clears the threshold.

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "treesense/sensing.hpp"
#include "treesense/tree_model.hpp"

namespace treesense {

enum class QueueOrder { fifo, lifo, unordered_set };

/// tau = sqrt(2 sigma^2 log(4 k' / delta)).
inline double threshold_lemma1(double k_prime, double delta, double sigma2) {
  const double arg = 4.0 * k_prime / delta;
  if (!(k_prime > 0) || !(delta > 0) || !(sigma2 >= 0) || !(arg > 1.0))
    throw std::invalid_argument("threshold: requires k' > 0, delta > 0, sigma2 >= 0, 4k'/delta > 1");
  return std::sqrt(2.0 * sigma2 * std::log(arg));
}

/// Threshold for tests that average r observations: sigma^2 replaced by sigma^2 / r.
inline double threshold_corollary(double k_prime, double delta, double sigma2, double r) {
  if (!(r >= 1)) throw std::invalid_argument("threshold_corollary: r must be >= 1");
  return threshold_lemma1(k_prime, delta, sigma2 / r);
}

/// Amplitude above which r-fold averaged tree sensing recovers the support
/// with probability at least 1 - delta:
/// sqrt(8 [1 + log(4 beta / delta)]) * sqrt((sigma^2 / r) log k).
inline double sufficient_mu_corollary(double k, double beta, double delta, double sigma2, double r) {
  if (!(k >= 2)) throw std::invalid_argument("sufficient_mu_corollary: k must be >= 2");
  if (!(beta >= 1)) throw std::invalid_argument("sufficient_mu_corollary: beta must be >= 1");
  if (!(delta > 0 && delta < 1))
    throw std::invalid_argument("sufficient_mu_corollary: delta must lie in (0,1)");
  if (!(r >= 1) || !(sigma2 >= 0))
    throw std::invalid_argument("sufficient_mu_corollary: r >= 1 and sigma2 >= 0 required");
  return std::sqrt(8.0 * (1.0 + std::log(4.0 * beta / delta))) *
         std::sqrt(sigma2 / r * std::log(k));
}

struct TreeSensingParams {
  std::size_t k_prime = 1;
  double delta = 0.01;
  double sigma2 = 1.0;
  std::size_t r = 1;
  QueueOrder order = QueueOrder::fifo;
  std::optional<double> hard_budget;
  // Replaces the computed threshold when set (noiseless traces, envelope checks).
  std::optional<double> tau;
  // Drives element selection for QueueOrder::unordered_set only.
  std::uint64_t order_seed = 0;

  void validate() const {
    if (k_prime < 1) throw std::invalid_argument("TreeSensingParams: k' must be >= 1");
    if (!(delta > 0 && delta < 1))
      throw std::invalid_argument("TreeSensingParams: delta must lie in (0,1)");
    if (r < 1) throw std::invalid_argument("TreeSensingParams: r must be >= 1");
    if (!(sigma2 >= 0)) throw std::invalid_argument("TreeSensingParams: sigma2 must be >= 0");
    if (tau && !(*tau >= 0)) throw std::invalid_argument("TreeSensingParams: tau must be >= 0");
    if (hard_budget && !(*hard_budget >= 0))
      throw std::invalid_argument("TreeSensingParams: hard_budget must be >= 0");
  }

  double threshold() const {
    if (tau) return *tau;
    return threshold_corollary(static_cast<double>(k_prime), delta, sigma2,
                               static_cast<double>(r));
  }
};

struct SensingResult {
  Support estimate;
  std::size_t measurements_used = 0;
  std::size_t tests = 0;
  bool truncated = false;
  double tau = 0.0;
};

/// Runs the procedure against `oracle`. Never throws on budget exhaustion:
/// the run stops before the offending test and reports truncated = true.
inline SensingResult run_tree_sensing(MeasurementOracle& oracle, const TreeShape& shape,
                                      const TreeSensingParams& params) {
  params.validate();
  if (!(oracle.shape() == shape)) throw std::invalid_argument("run_tree_sensing: shape mismatch");

  const double tau = params.threshold();
  const std::size_t r = params.r;
  std::deque<node_t> queue{1};
  std::vector<node_t> accepted;
  rng_t pick_rng(params.order_seed);
  SensingResult out{Support(shape), 0, 0, false, tau};

  while (!queue.empty()) {
    if (params.hard_budget &&
        static_cast<double>(out.measurements_used + r) > *params.hard_budget) {
      out.truncated = true;
      break;
    }

    node_t node = 0;
    switch (params.order) {
      case QueueOrder::fifo:
        node = queue.front();
        queue.pop_front();
        break;
      case QueueOrder::lifo:
        node = queue.back();
        queue.pop_back();
        break;
      case QueueOrder::unordered_set: {
        std::uniform_int_distribution<std::size_t> pick(0, queue.size() - 1);
        auto it = queue.begin() + static_cast<std::ptrdiff_t>(pick(pick_rng));
        node = *it;
        *it = queue.back();
        queue.pop_back();
        break;
      }
    }

    double y = 0.0;
    try {
      y = oracle.direct_measure(node, r);
    } catch (const BudgetExhausted&) {
      out.truncated = true;
      break;
    }
    out.measurements_used += r;
    ++out.tests;

    if (std::abs(y) >= tau) {
      accepted.push_back(node);
      for (node_t c : children(node, shape)) queue.push_back(c);
    }
  }

  out.estimate = Support(shape, std::move(accepted));
  return out;
}

struct TwoStageResult {
  std::vector<double> estimate;  // dense, entry i-1 holds the estimate of x_i
  SensingResult stage1;
  bool truncated = false;
};

/// Support recovery followed by r2-fold direct measurement of every selected
/// coordinate. `stage1_sigma2`, when set, overrides the oracle noise during
/// stage 1 only.
inline TwoStageResult two_stage_estimate(MeasurementOracle& oracle, const TreeShape& shape,
                                         const TreeSensingParams& params, std::size_t r2,
                                         std::optional<double> stage1_sigma2 = std::nullopt) {
  if (r2 < 1) throw std::invalid_argument("two_stage_estimate: r2 must be >= 1");
  const double sigma2 = oracle.noise_variance();
  if (stage1_sigma2) oracle.set_noise_variance(*stage1_sigma2);
  SensingResult stage1 = run_tree_sensing(oracle, shape, params);
  oracle.set_noise_variance(sigma2);
  const bool truncated = stage1.truncated;
  TwoStageResult out{std::vector<double>(shape.size(), 0.0), std::move(stage1), truncated};

  for (node_t i : out.stage1.estimate) {
    try {
      out.estimate[i - 1] = oracle.direct_measure(i, r2);
    } catch (const BudgetExhausted&) {
      out.truncated = true;
      break;
    }
  }
  return out;
}

}  // namespace treesense
