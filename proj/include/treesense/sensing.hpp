#pragma once

// Observation model y = <a, x> + w, w ~ N(0, sigma^2), for coordinate
// (adaptive) measurements and for the iid N(0, 1/n) Gaussian ensemble.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "treesense/tree_model.hpp"

namespace treesense {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for a named sub-purpose (cell, method, ...) of a base seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return mix64(base ^ mix64(tag ^ 0x5851f42d4c957f2dULL));
}

/// Random stream for trial `trial_index` under `base_seed`. A pure function
/// of its arguments, so results never depend on scheduling.
inline rng_t rng_stream(std::uint64_t base_seed, std::uint64_t trial_index) {
  std::uint64_t a = mix64(base_seed);
  std::uint64_t b = mix64(a ^ mix64(trial_index + 0x632be59bd9b4e019ULL));
  std::uint64_t c = mix64(b);
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return rng_t(seq);
}

class BudgetExhausted : public std::runtime_error {
public:
  BudgetExhausted(double requested, double remaining)
      : std::runtime_error("measurement budget exhausted: requested " + std::to_string(requested) +
                           ", remaining " + std::to_string(remaining)),
        requested_(requested), remaining_(remaining) {}

  double requested() const { return requested_; }
  double remaining() const { return remaining_; }

private:
  double requested_;
  double remaining_;
};

enum class RecordKind { coordinate, energy, dense_row, raw };

inline const char* to_string(RecordKind k) {
  switch (k) {
    case RecordKind::coordinate: return "coordinate";
    case RecordKind::energy: return "energy";
    case RecordKind::dense_row: return "dense_row";
    case RecordKind::raw: return "raw";
  }
  return "?";
}

struct SensingRecord {
  RecordKind kind;
  std::size_t index_or_row;  // 1-based node index, or 0-based ensemble row
  double repeats_or_energy;
  double observation;
  double cost;
};

/// Ordered (descriptor, observation) pairs plus budget accounting.
class SensingLog {
public:
  void append(SensingRecord rec) {
    consumed_ += rec.cost;
    records_.push_back(rec);
  }

  const std::vector<SensingRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  double consumed() const { return consumed_; }

  /// Appends one unit-cost dense_row record per entry of a non-adaptive observation vector.
  void append_dense_rows(const Eigen::VectorXd& y) {
    for (Eigen::Index j = 0; j < y.size(); ++j)
      append({RecordKind::dense_row, static_cast<std::size_t>(j), 1.0, y[j], 1.0});
  }

  /// CSV with header `record_idx,kind,index_or_row,repeats_or_energy,observation`.
  void write_csv(std::ostream& os) const {
    os << "record_idx,kind,index_or_row,repeats_or_energy,observation\n";
    auto old = os.precision(17);
    for (std::size_t j = 0; j < records_.size(); ++j) {
      const auto& r = records_[j];
      os << j << ',' << to_string(r.kind) << ',' << r.index_or_row << ',' << r.repeats_or_energy
         << ',' << r.observation << '\n';
    }
    os.precision(old);
  }

private:
  std::vector<SensingRecord> records_;
  double consumed_ = 0.0;
};

/// Serves noisy coordinate measurements of a hidden signal under a budget of
/// unit-norm measurement equivalents. Owned by exactly one trial.
class MeasurementOracle {
public:
  MeasurementOracle(TreeShape shape, std::vector<double> x, double sigma2, double budget, rng_t rng)
      : shape_(shape), x_(std::move(x)), sigma2_(sigma2), budget_(budget), rng_(std::move(rng)) {
    if (x_.size() != shape_.size()) throw std::invalid_argument("oracle: signal length != n");
    if (!(sigma2 >= 0)) throw std::invalid_argument("oracle: sigma2 must be >= 0");
    if (!(budget >= 0)) throw std::invalid_argument("oracle: budget must be >= 0");
  }

  MeasurementOracle(const SparseSignal& s, double sigma2, double budget, rng_t rng)
      : MeasurementOracle(s.shape(), s.dense(), sigma2, budget, std::move(rng)) {}

  /// Mean of r independent draws of x_i + N(0, sigma^2); costs r budget units.
  double direct_measure(node_t i, std::size_t r = 1) {
    shape_.check(i);
    if (r < 1) throw std::invalid_argument("direct_measure: r must be >= 1");
    reserve(static_cast<double>(r));
    const double xi = x_[i - 1];
    if (log_raw_) {
      double sum = 0.0;
      for (std::size_t j = 0; j < r; ++j) {
        double y = xi + noise(sigma2_);
        log_.append({RecordKind::raw, i, 1.0, y, 1.0});
        sum += y;
      }
      return sum / static_cast<double>(r);
    }
    double y = xi + noise(sigma2_ / static_cast<double>(r));
    log_.append({RecordKind::coordinate, i, static_cast<double>(r), y, static_cast<double>(r)});
    return y;
  }

  /// Measurement of coordinate i with sensing energy e: x_i + N(0, sigma^2 / e).
  double measure_energy(node_t i, double energy) {
    shape_.check(i);
    if (!(energy > 0)) throw std::invalid_argument("measure_energy: energy must be > 0");
    reserve(energy);
    double y = x_[i - 1] + noise(sigma2_ / energy);
    log_.append({RecordKind::energy, i, energy, y, energy});
    return y;
  }

  double budget() const { return budget_; }
  double consumed() const { return log_.consumed(); }
  double remaining() const { return budget_ - log_.consumed(); }
  const SensingLog& log() const { return log_; }
  const TreeShape& shape() const { return shape_; }

  double noise_variance() const { return sigma2_; }
  void set_noise_variance(double sigma2) {
    if (!(sigma2 >= 0)) throw std::invalid_argument("oracle: sigma2 must be >= 0");
    sigma2_ = sigma2;
  }

  /// Log every raw draw instead of one pre-averaged record per call.
  void set_log_raw(bool on) { log_raw_ = on; }

  /// Oracle-side truth; estimators never call this.
  double truth(node_t i) const {
    shape_.check(i);
    return x_[i - 1];
  }

private:
  // Budget slack absorbs rounding when fractional energies sum to the total.
  static constexpr double kSlack = 1e-9;

  void reserve(double cost) {
    if (log_.consumed() + cost > budget_ + kSlack) throw BudgetExhausted(cost, remaining());
  }

  double noise(double var) {
    if (var == 0.0) return 0.0;
    return std::sqrt(var) * std_normal_(rng_);
  }

  TreeShape shape_;
  std::vector<double> x_;
  double sigma2_;
  double budget_;
  rng_t rng_;
  std::normal_distribution<double> std_normal_{0.0, 1.0};
  SensingLog log_;
  bool log_raw_ = false;
};

/// m x n matrix with iid N(0, 1/n) entries, so E||row||^2 = 1.
struct GaussianEnsemble {
  Eigen::MatrixXd rows;

  Eigen::Index m() const { return rows.rows(); }
  Eigen::Index n() const { return rows.cols(); }
};

inline GaussianEnsemble gaussian_ensemble(const TreeShape& shape, std::size_t m, rng_t& rng) {
  if (m < 1) throw std::invalid_argument("gaussian_ensemble: m must be >= 1");
  const auto n = static_cast<Eigen::Index>(shape.size());
  const double sd = 1.0 / std::sqrt(static_cast<double>(n));
  std::normal_distribution<double> z(0.0, 1.0);
  GaussianEnsemble A{Eigen::MatrixXd(static_cast<Eigen::Index>(m), n)};
  for (Eigen::Index i = 0; i < A.rows.rows(); ++i)
    for (Eigen::Index j = 0; j < n; ++j) A.rows(i, j) = sd * z(rng);
  return A;
}

/// y = A x + w, w iid N(0, sigma^2). `x` is the dense signal (entry i-1 holds x_i).
inline Eigen::VectorXd nonadaptive_observe(const std::vector<double>& x, const GaussianEnsemble& A,
                                           double sigma2, rng_t& rng) {
  if (static_cast<Eigen::Index>(x.size()) != A.n())
    throw std::invalid_argument("nonadaptive_observe: ensemble has " + std::to_string(A.n()) +
                                " columns, signal has length " + std::to_string(x.size()));
  if (!(sigma2 >= 0)) throw std::invalid_argument("nonadaptive_observe: sigma2 must be >= 0");
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd y = A.rows * xv;
  if (sigma2 > 0) {
    std::normal_distribution<double> w(0.0, std::sqrt(sigma2));
    for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += w(rng);
  }
  return y;
}

inline Eigen::VectorXd nonadaptive_observe(const SparseSignal& s, const GaussianEnsemble& A,
                                           double sigma2, rng_t& rng) {
  return nonadaptive_observe(s.dense(), A, sigma2, rng);
}

}  // namespace treesense
