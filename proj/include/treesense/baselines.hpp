#pragma once

// Comparison methods: Lasso and tree-structured Group Lasso on non-adaptive
// Gaussian measurements (accelerated proximal gradient), plus a sequential
// thresholding stand-in for unstructured adaptive compressive sensing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "treesense/sensing.hpp"
#include "treesense/tree_model.hpp"

namespace treesense {

struct SolverSettings {
  std::size_t max_iters = 3000;
  // Stop when ||x_{t+1} - x_t|| <= tol * max(1, ||x_t||).
  double tol = 1e-7;
  // Step is 1/L; L = ||A||_2^2 when unset.
  std::optional<double> lipschitz;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("SolverSettings: max_iters must be >= 1");
    if (!(tol > 0)) throw std::invalid_argument("SolverSettings: tol must be > 0");
    if (lipschitz && !(*lipschitz > 0))
      throw std::invalid_argument("SolverSettings: lipschitz must be > 0");
  }
};

struct SolveResult {
  Eigen::VectorXd x;
  bool converged = false;
  std::size_t iterations = 0;
  double objective = 0.0;
};

/// ||A||_2^2, from the smaller of the two Gram matrices.
inline double spectral_norm_sq(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::MatrixXd gram = A.rows() <= A.cols() ? Eigen::MatrixXd(A * A.transpose())
                                              : Eigen::MatrixXd(A.transpose() * A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// Tree-structured groups: one group per node holding its full heap subtree.
/// Ordered deepest level first so every group precedes any group containing it.
struct GroupHierarchy {
  std::vector<std::vector<node_t>> groups;  // 1-based, ascending within a group
  std::vector<node_t> owner;                // node whose subtree the group is
  std::vector<double> weights;
  std::size_t n = 0;
};

inline GroupHierarchy build_tree_groups(const TreeShape& shape) {
  const std::size_t n = shape.size();
  std::vector<std::vector<node_t>> subtree(n + 1);
  for (node_t i = n; i >= 1; --i) {
    auto& g = subtree[i];
    g.push_back(i);
    for (node_t c : children(i, shape)) g.insert(g.end(), subtree[c].begin(), subtree[c].end());
    std::sort(g.begin(), g.end());
  }

  std::vector<node_t> order(n);
  std::iota(order.begin(), order.end(), node_t{1});
  auto depth = [](node_t i) {
    std::size_t d = 0;
    while (i > 1) {
      i /= 2;
      ++d;
    }
    return d;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](node_t a, node_t b) { return depth(a) > depth(b); });

  GroupHierarchy h;
  h.n = n;
  for (node_t i : order) {
    h.groups.push_back(std::move(subtree[i]));
    h.owner.push_back(i);
    h.weights.push_back(1.0);
  }
  return h;
}

/// Prox of lambda * sum_G w_G ||u_G||_2: block soft-scaling applied group by
/// group in hierarchy order. A group with zero norm is left unchanged.
inline Eigen::VectorXd tree_group_prox(const Eigen::VectorXd& v, double lambda,
                                       const GroupHierarchy& h) {
  if (static_cast<std::size_t>(v.size()) != h.n)
    throw std::invalid_argument("tree_group_prox: vector length != hierarchy size");
  Eigen::VectorXd u = v;
  if (lambda == 0.0) return u;
  for (std::size_t g = 0; g < h.groups.size(); ++g) {
    const auto& grp = h.groups[g];
    double norm2 = 0.0;
    for (node_t i : grp) norm2 += u[static_cast<Eigen::Index>(i - 1)] * u[static_cast<Eigen::Index>(i - 1)];
    if (norm2 == 0.0) continue;
    const double norm = std::sqrt(norm2);
    const double scale = std::max(0.0, 1.0 - lambda * h.weights[g] / norm);
    for (node_t i : grp) u[static_cast<Eigen::Index>(i - 1)] *= scale;
  }
  return u;
}

inline double tree_group_penalty(const Eigen::VectorXd& x, const GroupHierarchy& h) {
  double s = 0.0;
  for (std::size_t g = 0; g < h.groups.size(); ++g) {
    double norm2 = 0.0;
    for (node_t i : h.groups[g]) norm2 += x[static_cast<Eigen::Index>(i - 1)] * x[static_cast<Eigen::Index>(i - 1)];
    s += h.weights[g] * std::sqrt(norm2);
  }
  return s;
}

inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  return v.unaryExpr([t](double a) { return a > t ? a - t : (a < -t ? a + t : 0.0); });
}

namespace detail {

// FISTA with a function-value restart: a step that would raise the objective
// is rejected and momentum is reset, so the accepted objective never increases.
template <class Prox, class Penalty>
SolveResult proximal_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double lambda,
                              Prox&& prox, Penalty&& penalty, const SolverSettings& settings,
                              const Eigen::VectorXd* warm) {
  settings.validate();
  if (A.rows() != y.size()) throw std::invalid_argument("solver: rows(A) != length(y)");
  if (!(lambda >= 0)) throw std::invalid_argument("solver: lambda must be >= 0");
  const Eigen::Index n = A.cols();
  double L = settings.lipschitz ? *settings.lipschitz : spectral_norm_sq(A);
  if (!(L > 0)) L = 1.0;

  // A x and A z are carried along so each iteration costs two products with A.
  auto objective = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& ax) {
    return 0.5 * (ax - y).squaredNorm() + lambda * penalty(x);
  };

  SolveResult out;
  Eigen::VectorXd x = warm ? *warm : Eigen::VectorXd::Zero(n);
  if (x.size() != n) throw std::invalid_argument("solver: warm start has wrong length");
  Eigen::VectorXd ax = A * x;
  Eigen::VectorXd z = x, az = ax, u(n), au(A.rows()), grad(n);
  double fx = objective(x, ax);
  double t = 1.0;
  bool z_is_x = true;

  for (std::size_t it = 1; it <= settings.max_iters; ++it) {
    out.iterations = it;
    grad.noalias() = A.transpose() * (az - y);
    u = prox(z - grad / L, lambda / L);
    au.noalias() = A * u;
    const double fu = objective(u, au);

    if (!(fu <= fx)) {
      if (z_is_x) {
        // Plain prox-gradient step from x did not decrease: numerically stationary.
        out.converged = true;
        break;
      }
      z = x;
      az = ax;
      z_is_x = true;
      t = 1.0;
      continue;
    }

    const double step = (u - x).norm();
    const double scale = std::max(1.0, x.norm());
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double c = (t - 1.0) / t_next;
    z = u + c * (u - x);
    az = au + c * (au - ax);
    z_is_x = c == 0.0;
    x.swap(u);
    ax.swap(au);
    fx = fu;
    t = t_next;
    if (step <= settings.tol * scale) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  out.objective = fx;
  return out;
}

}  // namespace detail

/// argmin 1/2 ||y - A x||^2 + lambda ||x||_1.
inline SolveResult fista_lasso(const GaussianEnsemble& A, const Eigen::VectorXd& y, double lambda,
                               const SolverSettings& settings = {},
                               const Eigen::VectorXd* warm = nullptr) {
  return detail::proximal_gradient(
      A.rows, y, lambda, [](const Eigen::VectorXd& v, double t) { return soft_threshold(v, t); },
      [](const Eigen::VectorXd& x) { return x.lpNorm<1>(); }, settings, warm);
}

/// argmin 1/2 ||y - A x||^2 + lambda sum_G w_G ||x_G||_2 over the tree groups.
inline SolveResult group_lasso_solve(const GaussianEnsemble& A, const Eigen::VectorXd& y,
                                     double lambda, const GroupHierarchy& h,
                                     const SolverSettings& settings = {},
                                     const Eigen::VectorXd* warm = nullptr) {
  if (static_cast<std::size_t>(A.n()) != h.n)
    throw std::invalid_argument("group_lasso_solve: hierarchy size != columns of A");
  return detail::proximal_gradient(
      A.rows, y, lambda,
      [&h](const Eigen::VectorXd& v, double t) { return tree_group_prox(v, t, h); },
      [&h](const Eigen::VectorXd& x) { return tree_group_penalty(x, h); }, settings, warm);
}

/// `count` values spaced logarithmically from lambda_max down to ratio * lambda_max.
inline std::vector<double> lambda_grid(double lambda_max, std::size_t count = 30,
                                       double ratio = 1e-3) {
  if (count < 1) throw std::invalid_argument("lambda_grid: count must be >= 1");
  std::vector<double> grid(count, lambda_max);
  if (count == 1) return grid;
  for (std::size_t j = 0; j < count; ++j)
    grid[j] = lambda_max * std::pow(ratio, static_cast<double>(j) / static_cast<double>(count - 1));
  return grid;
}

/// Smallest lambda giving x = 0 for the Lasso: ||A^T y||_inf.
inline double lasso_lambda_max(const GaussianEnsemble& A, const Eigen::VectorXd& y) {
  return (A.rows.transpose() * y).lpNorm<Eigen::Infinity>();
}

/// A lambda at or above which the tree Group Lasso returns 0. The root group
/// spans every coordinate with unit weight, so ||A^T y||_2 suffices.
inline double group_lasso_lambda_max(const GaussianEnsemble& A, const Eigen::VectorXd& y) {
  return (A.rows.transpose() * y).norm();
}

/// {i : |x_i| > threshold}, 1-based ascending.
inline std::vector<node_t> extract_support(const Eigen::VectorXd& x, double threshold) {
  std::vector<node_t> s;
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (std::abs(x[j]) > threshold) s.push_back(static_cast<node_t>(j + 1));
  return s;
}

struct SweepCandidate {
  double lambda;
  std::vector<node_t> support;
  bool converged;
};

/// Optional early exit: the sweep stops after the first candidate for which it returns true.
using SweepStop = std::function<bool(const std::vector<node_t>&)>;

namespace detail {

template <class Solve>
std::vector<SweepCandidate> sweep(const std::vector<double>& grid, double mu, Solve&& solve,
                                  const SweepStop& stop) {
  if (grid.empty()) throw std::invalid_argument("support sweep: lambda grid is empty");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<SweepCandidate> out;
  std::optional<Eigen::VectorXd> warm;
  for (double lambda : sorted) {
    SolveResult res = solve(lambda, warm ? &*warm : nullptr);
    out.push_back({lambda, extract_support(res.x, mu / 3.0), res.converged});
    warm = std::move(res.x);
    if (stop && stop(out.back().support)) break;
  }
  return out;
}

}  // namespace detail

/// One candidate support per lambda, {i : |x_hat_i| > mu/3}; grid is solved
/// from the largest lambda down with warm starts.
inline std::vector<SweepCandidate> lasso_support_sweep(const GaussianEnsemble& A,
                                                       const Eigen::VectorXd& y,
                                                       const std::vector<double>& grid, double mu,
                                                       const SolverSettings& settings = {},
                                                       const SweepStop& stop = {}) {
  SolverSettings s = settings;
  if (!s.lipschitz) s.lipschitz = spectral_norm_sq(A.rows);
  return detail::sweep(grid, mu, [&](double lambda, const Eigen::VectorXd* warm) {
    return fista_lasso(A, y, lambda, s, warm);
  }, stop);
}

inline std::vector<SweepCandidate> group_lasso_support_sweep(const GaussianEnsemble& A,
                                                             const Eigen::VectorXd& y,
                                                             const std::vector<double>& grid,
                                                             double mu, const GroupHierarchy& h,
                                                             const SolverSettings& settings = {},
                                                             const SweepStop& stop = {}) {
  SolverSettings s = settings;
  if (!s.lipschitz) s.lipschitz = spectral_norm_sq(A.rows);
  return detail::sweep(grid, mu, [&](double lambda, const Eigen::VectorXd* warm) {
    return group_lasso_solve(A, y, lambda, h, s, warm);
  }, stop);
}

struct SeqThresholdSettings {
  // Smallest per-coordinate energy allowed in the first pass.
  double eps_min = 1e-3;
};

struct SeqThresholdResult {
  std::vector<node_t> estimate;  // 1-based ascending, size k
  std::size_t passes = 0;
  double energy_served = 0.0;
};

/// Sequential thresholding with a total sensing-energy budget.
///
/// ceil(log2(n/k)) passes (at least one). Every pass but the last spends half
/// of the remaining energy spread evenly over the survivors and keeps the
/// upper half by observed value (never fewer than k); the last pass spends
/// everything left and keeps the top k. Observed values are signed, which
/// suits nonnegative signals. Not a reimplementation of any published
/// schedule: only the exact-budget and unstructured-adaptive properties are
/// intended.
inline SeqThresholdResult adaptive_seq_threshold(MeasurementOracle& oracle, const TreeShape& shape,
                                                 double m_budget, std::size_t k,
                                                 const SeqThresholdSettings& settings = {}) {
  const std::size_t n = shape.size();
  if (k < 1 || k > n) throw std::invalid_argument("adaptive_seq_threshold: k outside [1..n]");
  if (!(m_budget >= 2.0 * static_cast<double>(n) * settings.eps_min))
    throw std::invalid_argument("adaptive_seq_threshold: budget below 2 n eps_min");
  if (m_budget > oracle.remaining() + 1e-9)
    throw std::invalid_argument("adaptive_seq_threshold: oracle budget smaller than m_budget");

  const double ratio = static_cast<double>(n) / static_cast<double>(k);
  const std::size_t passes =
      ratio <= 1.0 ? 1 : static_cast<std::size_t>(std::ceil(std::log2(ratio) - 1e-12));

  std::vector<node_t> survivors(n);
  std::iota(survivors.begin(), survivors.end(), node_t{1});
  std::vector<double> obs;
  SeqThresholdResult out;
  out.passes = std::max<std::size_t>(passes, 1);

  for (std::size_t p = 1; p <= out.passes; ++p) {
    const bool last = p == out.passes;
    const double remaining = m_budget - out.energy_served;
    const double pass_energy = last ? remaining : 0.5 * remaining;
    const double e = pass_energy / static_cast<double>(survivors.size());
    obs.assign(survivors.size(), 0.0);
    for (std::size_t j = 0; j < survivors.size(); ++j) {
      obs[j] = oracle.measure_energy(survivors[j], e);
      out.energy_served += e;
    }

    std::size_t keep = last ? k : std::max(k, (survivors.size() + 1) / 2);
    keep = std::min(keep, survivors.size());
    std::vector<std::size_t> order(survivors.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return obs[a] > obs[b]; });
    std::vector<node_t> next;
    next.reserve(keep);
    for (std::size_t j = 0; j < keep; ++j) next.push_back(survivors[order[j]]);
    std::sort(next.begin(), next.end());
    survivors = std::move(next);
  }
  out.estimate = std::move(survivors);
  return out;
}

}  // namespace treesense
