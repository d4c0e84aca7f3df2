#pragma once

// Monte Carlo harness: experiment configuration, deterministic trial
// scheduling over a worker pool, and CSV / overlay emission.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "treesense/baselines.hpp"
#include "treesense/bounds.hpp"
#include "treesense/sensing.hpp"
#include "treesense/tree_model.hpp"
#include "treesense/tree_sensing.hpp"

namespace treesense::bench {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class InfeasibleExperiment : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Experiment { sweep_mu, phase, compare, bounds, enumerate };
enum class Method { tree, acs, glasso, lasso };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::sweep_mu: return "sweep_mu";
    case Experiment::phase: return "phase";
    case Experiment::compare: return "compare";
    case Experiment::bounds: return "bounds";
    case Experiment::enumerate: return "enumerate";
  }
  return "?";
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::tree: return "tree";
    case Method::acs: return "acs";
    case Method::glasso: return "glasso";
    case Method::lasso: return "lasso";
  }
  return "?";
}

NLOHMANN_JSON_SERIALIZE_ENUM(Experiment, {{Experiment::sweep_mu, "sweep_mu"},
                                          {Experiment::phase, "phase"},
                                          {Experiment::compare, "compare"},
                                          {Experiment::bounds, "bounds"},
                                          {Experiment::enumerate, "enumerate"}})

NLOHMANN_JSON_SERIALIZE_ENUM(Method, {{Method::tree, "tree"},
                                      {Method::acs, "acs"},
                                      {Method::glasso, "glasso"},
                                      {Method::lasso, "lasso"}})

}  // namespace treesense::bench

namespace treesense {

NLOHMANN_JSON_SERIALIZE_ENUM(SignMode, {{SignMode::nonnegative, "nonnegative"},
                                        {SignMode::random_sign, "random_sign"}})
NLOHMANN_JSON_SERIALIZE_ENUM(AmplitudeMode, {{AmplitudeMode::constant_mu, "constant_mu"},
                                             {AmplitudeMode::iid_above_mu, "iid_above_mu"}})
NLOHMANN_JSON_SERIALIZE_ENUM(QueueOrder, {{QueueOrder::fifo, "fifo"},
                                          {QueueOrder::lifo, "lifo"},
                                          {QueueOrder::unordered_set, "unordered_set"}})
NLOHMANN_JSON_SERIALIZE_ENUM(SupportSampler, {{SupportSampler::growth, "growth"},
                                              {SupportSampler::uniform_exact, "uniform_exact"}})

}  // namespace treesense

namespace treesense::bench {

struct ExperimentConfig {
  Experiment experiment = Experiment::sweep_mu;
  std::size_t n = 1023;
  std::vector<std::size_t> n_grid;  // compare: one cell block per dimension
  std::size_t k = 16;
  std::optional<std::size_t> k_prime;  // defaults to k
  std::optional<std::size_t> m;        // defaults to r (2k + 1)
  std::size_t m_max = 1000;
  std::size_t r = 4;
  std::size_t r2 = 0;  // sweep_mu: > 0 adds the two-stage amplitude estimate
  std::optional<double> stage1_sigma2;
  std::size_t trials = 100;
  std::vector<double> mu_grid;
  std::vector<std::size_t> k_grid;
  double sigma2 = 1.0;
  double delta = 0.01;
  double beta = 1.0;
  double gamma = 0.25;
  std::uint64_t base_seed = 20130101;
  std::vector<Method> methods{Method::tree, Method::acs, Method::glasso, Method::lasso};
  SignMode sign_mode = SignMode::nonnegative;
  AmplitudeMode amplitude_mode = AmplitudeMode::constant_mu;
  QueueOrder order = QueueOrder::fifo;
  SupportSampler sampler = SupportSampler::growth;
  std::string output_path;
  std::size_t workers = 1;
  std::size_t lambda_count = 30;
  double lambda_ratio = 1e-3;
  std::size_t solver_max_iters = 1000;
  double solver_tol = 1e-5;
  bool list = false;    // enumerate: print every member
  bool timing = false;  // append a wall_time column to raw rows

  std::size_t effective_k_prime() const { return k_prime.value_or(k); }
  std::size_t effective_m() const { return m.value_or(r * (2 * k + 1)); }
  bool has(Method method) const {
    return std::find(methods.begin(), methods.end(), method) != methods.end();
  }
};

/// Log-spaced grid of `count` points from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t j = 0; j < count; ++j)
    g[j] = lo * std::pow(hi / lo, count == 1 ? 0.0 : double(j) / double(count - 1));
  return g;
}

inline std::vector<double> linear_grid(double lo, double hi, double step) {
  std::vector<double> g;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (std::size_t j = 0; j < count; ++j) g.push_back(lo + step * double(j));
  return g;
}

/// Defaults for an experiment. The phase grid is a reduced version of the
/// full-size one unless `paper_scale` is set.
inline ExperimentConfig default_config(Experiment e, bool paper_scale = false) {
  ExperimentConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::compare:
      c.n_grid = {255, 1023, 4095};
      c.k = 16;
      c.r = 4;
      c.trials = 100;
      c.mu_grid = log_grid(0.5, 16.0, 11);
      break;
    case Experiment::phase:
      c.mu_grid = linear_grid(0.0, 17.0, 0.5);
      c.m_max = 1000;
      if (paper_scale) {
        c.n = 65535;
        c.k_grid.clear();
        for (std::size_t k = 1; k <= 400; ++k) c.k_grid.push_back(k);
        c.trials = 100;
      } else {
        c.n = 4095;
        c.k_grid.clear();
        for (std::size_t k = 2; k <= 128; k += 2) c.k_grid.push_back(k);
        c.trials = 50;
      }
      c.methods = {Method::tree};
      break;
    case Experiment::sweep_mu:
      c.n = 1023;
      c.k = 16;
      c.r = 4;
      c.trials = 100;
      c.mu_grid = linear_grid(0.0, 8.0, 0.5);
      c.methods = {Method::tree};
      break;
    case Experiment::bounds:
      c.n = 1023;
      c.k = 16;
      c.m = 132;
      break;
    case Experiment::enumerate:
      c.n = 7;
      c.k = 3;
      break;
  }
  return c;
}

namespace detail {

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

template <class T>
void take(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  take(j, key, v);
  out = v;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "experiment", "n",        "n_grid",       "k",          "k_prime",      "m",
      "m_max",      "r",        "r2",           "stage1_sigma2", "trials",    "mu_grid",
      "k_grid",     "sigma2",   "delta",        "beta",       "gamma",        "base_seed",
      "methods",    "sign_mode", "amplitude_mode", "order",   "sampler",      "output_path",
      "workers",    "lambda_count", "lambda_ratio", "solver_max_iters", "solver_tol", "list",
      "timing"};
  return keys;
}

}  // namespace detail

/// Checks every parameter invariant the experiment relies on.
inline void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  auto sorted_nonempty = [&](const auto& g, const char* name) {
    if (g.empty()) fail(std::string(name) + " must be nonempty");
    if (!std::is_sorted(g.begin(), g.end())) fail(std::string(name) + " must be sorted");
  };
  if (c.trials < 1) fail("trials must be >= 1");
  if (c.n < 1) fail("n must be >= 1");
  if (!(c.sigma2 >= 0)) fail("sigma2 must be >= 0");
  if (!(c.delta > 0 && c.delta < 1)) fail("delta must lie in (0,1)");
  if (!(c.beta >= 1)) fail("beta must be >= 1");
  if (!(c.gamma > 0 && c.gamma < 1.0 / 3.0)) fail("gamma must lie in (0,1/3)");
  if (c.workers < 1) fail("workers must be >= 1");
  if (c.lambda_count < 1) fail("lambda_count must be >= 1");
  if (!(c.lambda_ratio > 0 && c.lambda_ratio <= 1)) fail("lambda_ratio must lie in (0,1]");
  if (c.solver_max_iters < 1 || !(c.solver_tol > 0)) fail("solver settings out of range");
  if (c.stage1_sigma2 && !(*c.stage1_sigma2 >= 0)) fail("stage1_sigma2 must be >= 0");
  if (c.k_prime && *c.k_prime < 1) fail("k_prime must be >= 1");

  switch (c.experiment) {
    case Experiment::compare:
      sorted_nonempty(c.n_grid, "n_grid");
      sorted_nonempty(c.mu_grid, "mu_grid");
      if (c.methods.empty()) fail("methods must be nonempty");
      if (c.r < 1) fail("r must be >= 1");
      for (std::size_t n : c.n_grid)
        if (c.k < 1 || c.k > (n + 1) / 2) fail("k must lie in [1, (n+1)/2] for every n in n_grid");
      for (double mu : c.mu_grid)
        if (!(mu >= 0)) fail("mu_grid entries must be >= 0");
      break;
    case Experiment::phase:
      sorted_nonempty(c.k_grid, "k_grid");
      sorted_nonempty(c.mu_grid, "mu_grid");
      if (c.m_max < 1) fail("m_max must be >= 1");
      for (std::size_t k : c.k_grid)
        if (k < 1 || k > (c.n + 1) / 2) fail("k_grid entries must lie in [1, (n+1)/2]");
      for (double mu : c.mu_grid)
        if (!(mu >= 0)) fail("mu_grid entries must be >= 0");
      break;
    case Experiment::sweep_mu:
      sorted_nonempty(c.mu_grid, "mu_grid");
      if (c.r < 1) fail("r must be >= 1");
      if (c.k < 1 || c.k > (c.n + 1) / 2) fail("k must lie in [1, (n+1)/2]");
      for (double mu : c.mu_grid)
        if (!(mu >= 0)) fail("mu_grid entries must be >= 0");
      break;
    case Experiment::bounds:
      if (c.k < 2 || c.k > (c.n + 1) / 2) fail("bounds need 2 <= k <= (n+1)/2");
      if (c.effective_m() < 1) fail("m must be >= 1");
      if (c.r < 1) fail("r must be >= 1");
      break;
    case Experiment::enumerate:
      if (c.k < 1 || c.k > c.n) fail("enumerate needs 1 <= k <= n");
      if (c.n > 63) fail("enumerate is limited to n <= 63");
      break;
  }
}

/// Overlays a JSON document onto `base`. Unknown keys are rejected.
inline ExperimentConfig apply_json(ExperimentConfig c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!detail::known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  using detail::take;
  if (j.contains("experiment")) {
    Experiment e{};
    take(j, "experiment", e);
    if (j.at("experiment") != nlohmann::json(e) || e != c.experiment)
      throw ConfigError("config experiment does not match the requested subcommand");
  }
  take(j, "n", c.n);
  take(j, "n_grid", c.n_grid);
  take(j, "k", c.k);
  take(j, "k_prime", c.k_prime);
  take(j, "m", c.m);
  take(j, "m_max", c.m_max);
  take(j, "r", c.r);
  take(j, "r2", c.r2);
  take(j, "stage1_sigma2", c.stage1_sigma2);
  take(j, "trials", c.trials);
  take(j, "mu_grid", c.mu_grid);
  take(j, "k_grid", c.k_grid);
  take(j, "sigma2", c.sigma2);
  take(j, "delta", c.delta);
  take(j, "beta", c.beta);
  take(j, "gamma", c.gamma);
  take(j, "base_seed", c.base_seed);
  take(j, "sign_mode", c.sign_mode);
  take(j, "amplitude_mode", c.amplitude_mode);
  take(j, "order", c.order);
  take(j, "sampler", c.sampler);
  take(j, "output_path", c.output_path);
  take(j, "workers", c.workers);
  take(j, "lambda_count", c.lambda_count);
  take(j, "lambda_ratio", c.lambda_ratio);
  take(j, "solver_max_iters", c.solver_max_iters);
  take(j, "solver_tol", c.solver_tol);
  take(j, "list", c.list);
  take(j, "timing", c.timing);
  if (j.contains("methods")) {
    c.methods.clear();
    if (!j.at("methods").is_array()) throw ConfigError("methods must be an array");
    for (const auto& m : j.at("methods")) {
      if (!m.is_string()) throw ConfigError("methods entries must be strings");
      const auto s = m.get<std::string>();
      if (s == "tree") c.methods.push_back(Method::tree);
      else if (s == "acs") c.methods.push_back(Method::acs);
      else if (s == "glasso") c.methods.push_back(Method::glasso);
      else if (s == "lasso") c.methods.push_back(Method::lasso);
      else throw ConfigError("unknown method '" + s + "'");
    }
  }
  // Enum strings that do not match map to the first enumerator; catch that.
  auto check_enum = [&](const char* key, const std::vector<std::string>& allowed) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_string() || std::find(allowed.begin(), allowed.end(), v.get<std::string>()) == allowed.end())
      throw ConfigError(std::string("invalid value for '") + key + "'");
  };
  check_enum("experiment", {"sweep_mu", "phase", "compare", "bounds", "enumerate"});
  check_enum("sign_mode", {"nonnegative", "random_sign"});
  check_enum("amplitude_mode", {"constant_mu", "iid_above_mu"});
  check_enum("order", {"fifo", "lifo", "unordered_set"});
  check_enum("sampler", {"growth", "uniform_exact"});
  return c;
}

inline ExperimentConfig load_config(Experiment e, const std::string& json_text, bool paper_scale = false) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& err) {
    throw ConfigError(std::string("config is not valid JSON: ") + err.what());
  }
  auto c = apply_json(default_config(e, paper_scale), j);
  validate(c);
  return c;
}

/// One row of the raw CSV. Summary rows use trial = -1 and carry rates.
struct TrialResult {
  Experiment experiment = Experiment::sweep_mu;
  std::string method;
  std::size_t n = 0;
  std::size_t k = 0;
  double mu = 0.0;
  long long trial = 0;
  std::uint64_t seed = 0;
  double success = 0.0;
  double measurements = 0.0;
  double truncated = 0.0;
  std::string status = "ok";
  double wall_time = 0.0;
};

struct TwoStageRow {
  double mu;
  long long trial;
  bool stage1_success;
  double sq_error;
};

struct ExperimentOutput {
  std::vector<TrialResult> rows;  // raw rows first, then summary rows
  std::string overlay;            // gnuplot-compatible whitespace table, '#' comments
  std::vector<TwoStageRow> two_stage;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline const char* csv_header() {
  return "experiment,method,n,k,mu,trial,seed,success,measurements,truncated,status";
}

inline void write_row(std::ostream& os, const TrialResult& r, bool timing) {
  os << to_string(r.experiment) << ',' << r.method << ',' << r.n << ',' << r.k << ','
     << format_number(r.mu) << ',' << r.trial << ',' << r.seed << ',' << format_number(r.success)
     << ',' << format_number(r.measurements) << ',' << format_number(r.truncated) << ','
     << r.status;
  if (timing) os << ',' << format_number(r.wall_time);
  os << '\n';
}

inline void write_csv(std::ostream& os, const ExperimentOutput& out, bool timing = false) {
  os << csv_header() << (timing ? ",wall_time" : "") << '\n';
  for (const auto& r : out.rows) write_row(os, r, timing);
}

inline void write_two_stage_csv(std::ostream& os, const ExperimentOutput& out) {
  os << "mu,trial,stage1_success,sq_error\n";
  for (const auto& r : out.two_stage)
    os << format_number(r.mu) << ',' << r.trial << ',' << (r.stage1_success ? 1 : 0) << ','
       << format_number(r.sq_error) << '\n';
}

/// Runs `work(i)` for i in [0, count) on `workers` threads. Results land in
/// index order regardless of scheduling; the first exception is rethrown.
template <class R, class Work>
std::vector<R> run_pool(std::size_t count, std::size_t workers, Work&& work) {
  std::vector<R> results(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto loop = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        results[i] = work(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
  }
  if (error) std::rethrow_exception(error);
  return results;
}

/// Aggregates raw rows per (method, n, k, mu) in first-appearance order.
inline std::vector<TrialResult> summarize(const std::vector<TrialResult>& raw) {
  struct Acc {
    TrialResult head;
    double success = 0, measurements = 0, truncated = 0;
    std::size_t count = 0, ok = 0;
  };
  std::vector<Acc> accs;
  std::map<std::tuple<std::string, std::size_t, std::size_t, double>, std::size_t> index;
  for (const auto& r : raw) {
    auto key = std::make_tuple(r.method, r.n, r.k, r.mu);
    auto [it, inserted] = index.try_emplace(key, accs.size());
    if (inserted) accs.push_back(Acc{r});
    auto& a = accs[it->second];
    ++a.count;
    if (r.status != "ok") continue;
    ++a.ok;
    a.success += r.success;
    a.measurements += r.measurements;
    a.truncated += r.truncated;
  }
  std::vector<TrialResult> out;
  for (const auto& a : accs) {
    TrialResult s = a.head;
    s.trial = -1;
    s.wall_time = 0.0;
    if (a.ok == 0) {
      s.success = s.measurements = s.truncated = std::nan("");
      s.status = a.head.status;
    } else {
      s.success = a.success / double(a.ok);
      s.measurements = a.measurements / double(a.ok);
      s.truncated = a.truncated / double(a.ok);
      s.status = "summary";
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

struct TrialSignal {
  Support support;
  std::vector<double> x;
};

// mu = 0 keeps the drawn support but zeroes every amplitude (the "signal" is
// pure noise, while success is still judged against the drawn support).
inline TrialSignal draw_signal(const ExperimentConfig& c, const TreeShape& shape, std::size_t k,
                               double mu, rng_t& rng) {
  Support s = random_support(shape, k, rng, c.sampler);
  if (mu == 0.0) return {s, std::vector<double>(shape.size(), 0.0)};
  auto signal = make_signal(s, mu, c.sign_mode, c.amplitude_mode, rng);
  return {s, signal.dense()};
}

inline std::uint64_t cell_seed(std::uint64_t base, Experiment e, std::size_t n, std::size_t k) {
  return derive_seed(derive_seed(derive_seed(base, static_cast<std::uint64_t>(e) + 1), n), k);
}

constexpr std::uint64_t kSignalTag = 1;
constexpr std::uint64_t kEnsembleTag = 2;
constexpr std::uint64_t kMethodTag = 16;

inline std::uint64_t mu_tag(double mu) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &mu, sizeof bits);
  return bits;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

/// Tree-sensing parameters used by every experiment for sparsity k and r repeats.
inline TreeSensingParams tree_params(const ExperimentConfig& c, std::size_t k, std::size_t r,
                                     double hard_budget) {
  TreeSensingParams p;
  p.k_prime = c.k_prime.value_or(k);
  p.delta = c.delta;
  p.sigma2 = c.sigma2;
  p.r = r;
  p.order = c.order;
  p.hard_budget = hard_budget;
  return p;
}

/// Method comparison over (n, mu) cells. Per trial one signal is drawn; the
/// two non-adaptive methods share one ensemble and observation vector.
inline ExperimentOutput run_compare(const ExperimentConfig& c) {
  validate(c);
  struct Job {
    std::size_t n;
    double mu;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (std::size_t n : c.n_grid)
    for (double mu : c.mu_grid)
      for (std::size_t t = 0; t < c.trials; ++t) jobs.push_back({n, mu, t});

  const std::size_t m = c.effective_m();
  std::map<std::size_t, GroupHierarchy> groups;
  if (c.has(Method::glasso))
    for (std::size_t n : c.n_grid) groups.emplace(n, build_tree_groups(TreeShape(n)));

  SolverSettings solver;
  solver.max_iters = c.solver_max_iters;
  solver.tol = c.solver_tol;

  auto per_trial = run_pool<std::vector<TrialResult>>(jobs.size(), c.workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    const TreeShape shape(job.n);
    const std::uint64_t seed = detail::cell_seed(c.base_seed, c.experiment, job.n, c.k);
    const std::uint64_t mu_seed = derive_seed(seed, detail::mu_tag(job.mu));
    auto signal_rng = rng_stream(derive_seed(seed, detail::kSignalTag), job.trial);
    const auto sig = detail::draw_signal(c, shape, c.k, job.mu, signal_rng);

    std::vector<TrialResult> rows;
    auto row = [&](Method method) {
      TrialResult r;
      r.experiment = c.experiment;
      r.method = to_string(method);
      r.n = job.n;
      r.k = c.k;
      r.mu = job.mu;
      r.trial = static_cast<long long>(job.trial);
      r.seed = seed;
      return r;
    };

    std::optional<GaussianEnsemble> A;
    Eigen::VectorXd y;
    if (c.has(Method::lasso) || c.has(Method::glasso)) {
      auto rng = rng_stream(derive_seed(mu_seed, detail::kEnsembleTag), job.trial);
      A = gaussian_ensemble(shape, m, rng);
      y = nonadaptive_observe(sig.x, *A, c.sigma2, rng);
    }
    const auto& truth = sig.support.indices();

    for (Method method : c.methods) {
      auto t0 = detail::Clock::now();
      TrialResult r = row(method);
      auto rng = rng_stream(derive_seed(mu_seed, detail::kMethodTag + static_cast<std::uint64_t>(method)),
                            job.trial);
      switch (method) {
        case Method::tree: {
          MeasurementOracle oracle(shape, sig.x, c.sigma2, double(m), std::move(rng));
          auto res = run_tree_sensing(oracle, shape, tree_params(c, c.k, c.r, double(m)));
          r.success = res.estimate == sig.support ? 1.0 : 0.0;
          r.measurements = double(res.measurements_used);
          r.truncated = res.truncated ? 1.0 : 0.0;
          break;
        }
        case Method::acs: {
          MeasurementOracle oracle(shape, sig.x, c.sigma2, double(m), std::move(rng));
          try {
            auto res = adaptive_seq_threshold(oracle, shape, double(m), c.k);
            r.success = res.estimate == truth ? 1.0 : 0.0;
            r.measurements = res.energy_served;
          } catch (const std::invalid_argument& e) {
            r.status = "skipped:infeasible_budget";
          }
          break;
        }
        case Method::lasso:
        case Method::glasso: {
          SweepStop stop = [&](const std::vector<node_t>& s) { return s == truth; };
          std::vector<SweepCandidate> cands;
          if (method == Method::lasso) {
            auto grid = lambda_grid(lasso_lambda_max(*A, y), c.lambda_count, c.lambda_ratio);
            cands = lasso_support_sweep(*A, y, grid, job.mu, solver, stop);
          } else {
            auto grid = lambda_grid(group_lasso_lambda_max(*A, y), c.lambda_count, c.lambda_ratio);
            cands = group_lasso_support_sweep(*A, y, grid, job.mu, groups.at(job.n), solver, stop);
          }
          r.success = !cands.empty() && cands.back().support == truth ? 1.0 : 0.0;
          r.measurements = double(m);
          break;
        }
      }
      r.wall_time = detail::seconds_since(t0);
      rows.push_back(std::move(r));
    }
    return rows;
  });

  ExperimentOutput out;
  for (auto& rows : per_trial)
    for (auto& r : rows) out.rows.push_back(std::move(r));
  auto summary = summarize(out.rows);
  out.rows.insert(out.rows.end(), summary.begin(), summary.end());

  std::ostringstream ov;
  ov << "# bound overlay for compare: k=" << c.k << " m=" << m << " gamma=" << c.gamma
     << " sigma2=" << c.sigma2 << " delta=" << c.delta << " beta=" << c.beta << " r=" << c.r << "\n";
  ov << "# acs is a sequential-thresholding stand-in (median survivors, ceil(log2(n/k)) passes, "
        "half the remaining energy per pass), not a reimplementation of a published schedule\n";
  ov << "# n theorem1 theorem2 suffcond corollary_sufficient\n";
  for (std::size_t n : c.n_grid) {
    const double k = double(c.k);
    auto value_or_nan = [](auto f) {
      try {
        return f();
      } catch (const std::invalid_argument&) {
        return std::nan("");
      }
    };
    ov << n << ' ' << format_number(value_or_nan([&] { return bounds::theorem1_threshold(double(n), double(m), k, c.gamma, c.sigma2); }))
       << ' ' << format_number(value_or_nan([&] { return bounds::theorem2_threshold(k, double(m), c.gamma, c.sigma2); }))
       << ' ' << format_number(value_or_nan([&] { return bounds::sufficient_mu_suffcond(k, double(m), c.beta, c.delta, c.sigma2); }))
       << ' ' << format_number(value_or_nan([&] { return sufficient_mu_corollary(k, c.beta, c.delta, c.sigma2, double(c.r)); }))
       << '\n';
  }
  out.overlay = ov.str();
  return out;
}

/// Repeated-measurement tree sensing over a (k, mu) grid with total budget
/// m_max and r = floor(m_max / (2k + 1)).
inline ExperimentOutput run_phase(const ExperimentConfig& c) {
  validate(c);
  struct Job {
    std::size_t k;
    double mu;
    std::size_t trial;
    std::size_t r;
  };
  std::vector<Job> jobs;
  std::vector<TrialResult> infeasible;
  for (std::size_t k : c.k_grid) {
    const std::size_t r = c.m_max / (2 * k + 1);
    for (double mu : c.mu_grid) {
      if (r == 0) {
        TrialResult s;
        s.experiment = c.experiment;
        s.method = "tree";
        s.n = c.n;
        s.k = k;
        s.mu = mu;
        s.trial = -1;
        s.seed = detail::cell_seed(c.base_seed, c.experiment, c.n, k);
        s.success = s.measurements = s.truncated = std::nan("");
        s.status = "infeasible";
        infeasible.push_back(std::move(s));
        continue;
      }
      for (std::size_t t = 0; t < c.trials; ++t) jobs.push_back({k, mu, t, r});
    }
  }
  if (jobs.empty()) throw InfeasibleExperiment("phase: every k in k_grid has r = 0 under m_max");

  const TreeShape shape(c.n);
  auto rows = run_pool<TrialResult>(jobs.size(), c.workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    auto t0 = detail::Clock::now();
    const std::uint64_t seed = detail::cell_seed(c.base_seed, c.experiment, c.n, job.k);
    // Signals and noise are shared across the mu axis (common random numbers).
    auto signal_rng = rng_stream(derive_seed(seed, detail::kSignalTag), job.trial);
    const auto sig = detail::draw_signal(c, shape, job.k, job.mu, signal_rng);
    auto rng = rng_stream(derive_seed(seed, detail::kMethodTag), job.trial);
    MeasurementOracle oracle(shape, sig.x, c.sigma2, double(c.m_max), std::move(rng));
    auto res = run_tree_sensing(oracle, shape, tree_params(c, job.k, job.r, double(c.m_max)));

    TrialResult r;
    r.experiment = c.experiment;
    r.method = "tree";
    r.n = c.n;
    r.k = job.k;
    r.mu = job.mu;
    r.trial = static_cast<long long>(job.trial);
    r.seed = seed;
    r.success = res.estimate == sig.support ? 1.0 : 0.0;
    r.measurements = double(res.measurements_used);
    r.truncated = res.truncated ? 1.0 : 0.0;
    r.wall_time = detail::seconds_since(t0);
    return r;
  });

  ExperimentOutput out;
  out.rows = std::move(rows);
  auto summary = summarize(out.rows);
  summary.insert(summary.end(), infeasible.begin(), infeasible.end());
  std::stable_sort(summary.begin(), summary.end(), [](const TrialResult& a, const TrialResult& b) {
    return std::tie(a.k, a.mu) < std::tie(b.k, b.mu);
  });
  out.rows.insert(out.rows.end(), summary.begin(), summary.end());

  std::ostringstream ov;
  ov << "# phase overlay: n=" << c.n << " m_max=" << c.m_max << " delta=" << c.delta
     << " beta=" << c.beta << " sigma2=" << c.sigma2 << "\n";
  ov << "# k r tau mu_corollary mu_suffcond\n";
  for (std::size_t k : c.k_grid) {
    const std::size_t r = c.m_max / (2 * k + 1);
    double tau = std::nan(""), cor = std::nan(""), suff = std::nan("");
    if (r >= 1) {
      tau = threshold_corollary(double(c.k_prime.value_or(k)), c.delta, c.sigma2, double(r));
      if (k >= 2) {
        cor = sufficient_mu_corollary(double(k), c.beta, c.delta, c.sigma2, double(r));
        suff = bounds::sufficient_mu_suffcond(double(k), double(c.m_max), c.beta, c.delta, c.sigma2);
      }
    }
    ov << k << ' ' << r << ' ' << format_number(tau) << ' ' << format_number(cor) << ' '
       << format_number(suff) << '\n';
  }
  out.overlay = ov.str();
  return out;
}

/// Tree sensing at fixed (n, k, r) across mu_grid; with r2 > 0 also runs the
/// two-stage amplitude estimator and records its squared error.
inline ExperimentOutput run_sweep_mu(const ExperimentConfig& c) {
  validate(c);
  const TreeShape shape(c.n);
  const std::size_t m = c.effective_m();
  struct Job {
    double mu;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (double mu : c.mu_grid)
    for (std::size_t t = 0; t < c.trials; ++t) jobs.push_back({mu, t});

  struct Outcome {
    TrialResult row;
    std::optional<TwoStageRow> two_stage;
  };
  auto outcomes = run_pool<Outcome>(jobs.size(), c.workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    auto t0 = detail::Clock::now();
    const std::uint64_t seed = detail::cell_seed(c.base_seed, c.experiment, c.n, c.k);
    auto signal_rng = rng_stream(derive_seed(seed, detail::kSignalTag), job.trial);
    const auto sig = detail::draw_signal(c, shape, c.k, job.mu, signal_rng);
    auto rng = rng_stream(derive_seed(seed, detail::kMethodTag), job.trial);
    const auto params = tree_params(c, c.k, c.r, double(m));

    Outcome o;
    auto& r = o.row;
    r.experiment = c.experiment;
    r.method = "tree";
    r.n = c.n;
    r.k = c.k;
    r.mu = job.mu;
    r.trial = static_cast<long long>(job.trial);
    r.seed = seed;

    if (c.r2 > 0) {
      const double budget = double(m) + double(c.r2) * double(c.k);
      MeasurementOracle oracle(shape, sig.x, c.sigma2, budget, std::move(rng));
      auto res = two_stage_estimate(oracle, shape, params, c.r2, c.stage1_sigma2);
      double err = 0.0;
      for (std::size_t i = 0; i < sig.x.size(); ++i)
        err += (res.estimate[i] - sig.x[i]) * (res.estimate[i] - sig.x[i]);
      const bool ok = res.stage1.estimate == sig.support;
      r.success = ok ? 1.0 : 0.0;
      r.measurements = oracle.consumed();
      r.truncated = res.truncated ? 1.0 : 0.0;
      o.two_stage = TwoStageRow{job.mu, r.trial, ok, err};
    } else {
      MeasurementOracle oracle(shape, sig.x, c.sigma2, double(m), std::move(rng));
      auto res = run_tree_sensing(oracle, shape, params);
      r.success = res.estimate == sig.support ? 1.0 : 0.0;
      r.measurements = double(res.measurements_used);
      r.truncated = res.truncated ? 1.0 : 0.0;
    }
    r.wall_time = detail::seconds_since(t0);
    return o;
  });

  ExperimentOutput out;
  for (auto& o : outcomes) {
    out.rows.push_back(o.row);
    if (o.two_stage) out.two_stage.push_back(*o.two_stage);
  }
  auto summary = summarize(out.rows);
  out.rows.insert(out.rows.end(), summary.begin(), summary.end());

  std::ostringstream ov;
  ov << "# sweep_mu overlay: n=" << c.n << " k=" << c.k << " r=" << c.r << " m=" << m << "\n";
  ov << "# tau corollary_sufficient suffcond theorem2\n";
  const double k = double(c.k);
  const double tau = threshold_corollary(double(c.effective_k_prime()), c.delta, c.sigma2, double(c.r));
  double cor = std::nan(""), suff = std::nan(""), t2 = std::nan("");
  if (c.k >= 2) {
    cor = sufficient_mu_corollary(k, c.beta, c.delta, c.sigma2, double(c.r));
    suff = bounds::sufficient_mu_suffcond(k, double(m), c.beta, c.delta, c.sigma2);
    t2 = bounds::theorem2_threshold(k, double(m), c.gamma, c.sigma2);
  }
  ov << format_number(tau) << ' ' << format_number(cor) << ' ' << format_number(suff) << ' '
     << format_number(t2) << '\n';
  out.overlay = ov.str();
  return out;
}

/// |T_{n,k}|, optionally followed by every member.
inline std::string run_enumerate(const ExperimentConfig& c) {
  validate(c);
  const TreeShape shape(c.n);
  auto all = enumerate_supports(shape, c.k);
  std::ostringstream os;
  os << "n,k,count\n" << c.n << ',' << c.k << ',' << all.size() << '\n';
  if (c.list) {
    os << "support\n";
    for (const auto& s : all) os << '"' << s.str() << "\"\n";
  }
  return os.str();
}

struct BoundsRow {
  std::string label;
  double value;
};

inline std::vector<BoundsRow> bounds_table(const ExperimentConfig& c) {
  validate(c);
  const double n = double(c.n), k = double(c.k), m = double(c.effective_m()), r = double(c.r);
  const double tau = threshold_corollary(double(c.effective_k_prime()), c.delta, c.sigma2, r);
  const double cor = sufficient_mu_corollary(k, c.beta, c.delta, c.sigma2, r);
  return {
      {"theorem1", bounds::theorem1_threshold(n, m, k, c.gamma, c.sigma2)},
      {"theorem2", bounds::theorem2_threshold(k, m, c.gamma, c.sigma2)},
      {"suffcond", bounds::sufficient_mu_suffcond(k, m, c.beta, c.delta, c.sigma2)},
      {"corollary_sufficient", cor},
      {"tau", tau},
      {"envelope", bounds::error_envelope(k, cor, tau, c.sigma2 / r)},
  };
}

/// Labeled table as aligned text, or as two-column CSV.
inline std::string run_bounds(const ExperimentConfig& c, bool csv = false) {
  auto rows = bounds_table(c);
  std::ostringstream os;
  if (csv) {
    os << "quantity,value\n";
    for (const auto& r : rows) os << r.label << ',' << format_number(r.value) << '\n';
    return os.str();
  }
  os << "n=" << c.n << " m=" << c.effective_m() << " k=" << c.k << " gamma=" << c.gamma
     << " delta=" << c.delta << " beta=" << c.beta << " sigma2=" << c.sigma2 << " r=" << c.r << '\n';
  for (const auto& r : rows) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-22s %.6f\n", r.label.c_str(), r.value);
    os << buf;
  }
  return os.str();
}

}  // namespace treesense::bench
