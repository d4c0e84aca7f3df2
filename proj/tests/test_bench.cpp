#include <gtest/gtest.h>

#include <sstream>

#include "treesense/bench.hpp"

using namespace treesense;
using namespace treesense::bench;

namespace {

ExperimentConfig small_phase() {
  auto c = default_config(Experiment::phase);
  c.n = 255;
  c.k_grid = {2, 4};
  c.mu_grid = {0.0, 3.0, 6.0};
  c.m_max = 60;
  c.trials = 6;
  c.base_seed = 99;
  return c;
}

ExperimentConfig small_compare() {
  auto c = default_config(Experiment::compare);
  c.n_grid = {63};
  c.k = 4;
  c.mu_grid = {6.0};
  c.trials = 3;
  c.base_seed = 5;
  return c;
}

std::string csv_of(const ExperimentOutput& out) {
  std::ostringstream os;
  write_csv(os, out);
  return os.str();
}

}  // namespace

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(load_config(Experiment::phase, R"({"trails": 3})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::phase, R"({"order": "random"})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::phase, R"({"methods": ["tree", "omp"]})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::phase, "[1,2]"), ConfigError);
  EXPECT_THROW(load_config(Experiment::phase, "{not json"), ConfigError);
}

TEST(Config, InvariantsRejected) {
  EXPECT_THROW(load_config(Experiment::sweep_mu, R"({"mu_grid": [2, 1]})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::sweep_mu, R"({"mu_grid": []})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::sweep_mu, R"({"trials": 0})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::phase, R"({"k_grid": [4096]})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::bounds, R"({"gamma": 0.4})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::compare, R"({"experiment": "phase"})"), ConfigError);
  EXPECT_THROW(load_config(Experiment::compare, R"({"k": "16"})"), ConfigError);
}

TEST(Config, OverlayKeepsDefaults) {
  auto c = load_config(Experiment::sweep_mu, R"({"k": 8, "order": "lifo"})");
  EXPECT_EQ(c.k, 8u);
  EXPECT_EQ(c.order, QueueOrder::lifo);
  EXPECT_EQ(c.n, default_config(Experiment::sweep_mu).n);
  EXPECT_EQ(c.effective_m(), 4u * 17u);
}

TEST(Config, FullScalePhaseGrid) {
  auto c = default_config(Experiment::phase, true);
  EXPECT_EQ(c.n, 65535u);
  EXPECT_EQ(c.k_grid.back(), 400u);
  EXPECT_EQ(c.trials, 100u);
  EXPECT_NO_THROW(validate(c));
}

TEST(Grids, Shapes) {
  auto g = log_grid(0.5, 16, 11);
  ASSERT_EQ(g.size(), 11u);
  EXPECT_DOUBLE_EQ(g.front(), 0.5);
  EXPECT_NEAR(g.back(), 16, 1e-12);
  EXPECT_NEAR(g[2], 1.0, 1e-12);
  auto l = linear_grid(0, 17, 0.5);
  EXPECT_EQ(l.size(), 35u);
  EXPECT_DOUBLE_EQ(l.back(), 17.0);
}

TEST(Pool, ResultsInIndexOrderAndExceptionsPropagate) {
  auto r = run_pool<std::size_t>(100, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(r[i], i * i);
  EXPECT_THROW(run_pool<int>(10, 3,
                             [](std::size_t i) -> int {
                               if (i == 7) throw std::runtime_error("x");
                               return 0;
                             }),
               std::runtime_error);
}

TEST(Phase, DeterministicAcrossRunsAndWorkers) {
  auto c = small_phase();
  const auto a = csv_of(run_phase(c));
  c.workers = 3;
  EXPECT_EQ(a, csv_of(run_phase(c)));
  c.base_seed = 100;
  EXPECT_NE(a, csv_of(run_phase(c)));
}

// Each trial depends only on (seed, cell, trial index): dropping or reordering
// other cells and trials leaves its row unchanged.
TEST(Phase, TrialIsolation) {
  auto c = small_phase();
  const auto full = run_phase(c);
  auto sub = c;
  sub.k_grid = {4};
  sub.mu_grid = {6.0};
  sub.trials = 3;
  const auto part = run_phase(sub);
  std::size_t matched = 0;
  for (const auto& r : part.rows) {
    if (r.trial < 0) continue;
    for (const auto& f : full.rows)
      if (f.k == r.k && f.mu == r.mu && f.trial == r.trial) {
        EXPECT_EQ(f.success, r.success);
        EXPECT_EQ(f.measurements, r.measurements);
        EXPECT_EQ(f.seed, r.seed);
        ++matched;
      }
  }
  EXPECT_EQ(matched, 3u);
}

TEST(Phase, SummaryMatchesRawRows) {
  const auto out = run_phase(small_phase());
  std::map<std::pair<std::size_t, double>, std::pair<double, int>> acc;
  for (const auto& r : out.rows)
    if (r.trial >= 0) {
      acc[{r.k, r.mu}].first += r.success;
      acc[{r.k, r.mu}].second += 1;
    }
  std::size_t summaries = 0;
  for (const auto& r : out.rows) {
    if (r.trial >= 0) continue;
    ++summaries;
    EXPECT_EQ(r.status, "summary");
    auto [sum, count] = acc.at({r.k, r.mu});
    EXPECT_EQ(count, 6);
    EXPECT_DOUBLE_EQ(r.success, sum / count);
  }
  EXPECT_EQ(summaries, 6u);
}

TEST(Phase, BudgetRespectedAndInfeasibleCellsReported) {
  auto c = small_phase();
  c.k_grid = {2, 64};
  const auto out = run_phase(c);
  for (const auto& r : out.rows) {
    if (r.k == 64) {
      EXPECT_EQ(r.trial, -1);
      EXPECT_EQ(r.status, "infeasible");
    } else if (r.trial >= 0) {
      EXPECT_LE(r.measurements, double(c.m_max));
    }
  }
  c.k_grid = {64};
  EXPECT_THROW(run_phase(c), InfeasibleExperiment);
}

TEST(Phase, OverlayListsEveryK) {
  const auto out = run_phase(small_phase());
  EXPECT_NE(out.overlay.find("\n2 12 "), std::string::npos);
  EXPECT_NE(out.overlay.find("\n4 6 "), std::string::npos);
}

TEST(Compare, RowsPerMethodAndSharedSignal) {
  auto c = small_compare();
  const auto out = run_compare(c);
  std::map<std::string, int> per_method;
  for (const auto& r : out.rows)
    if (r.trial >= 0) ++per_method[r.method];
  EXPECT_EQ(per_method.size(), 4u);
  for (auto& [m, count] : per_method) EXPECT_EQ(count, 3) << m;
  EXPECT_EQ(csv_of(out), csv_of(run_compare(c)));
  // Dropping methods must not change the remaining methods' rows.
  auto only_tree = c;
  only_tree.methods = {Method::tree};
  const auto t = run_compare(only_tree);
  for (const auto& r : t.rows) {
    if (r.trial < 0) continue;
    for (const auto& f : out.rows)
      if (f.method == "tree" && f.trial == r.trial) {
        EXPECT_EQ(f.success, r.success);
      }
  }
}

TEST(SweepMu, TwoStageRowsEmitted) {
  auto c = default_config(Experiment::sweep_mu);
  c.n = 63;
  c.k = 4;
  c.r2 = 2;
  c.stage1_sigma2 = 0.0;
  c.mu_grid = {5.0};
  c.trials = 4;
  const auto out = run_sweep_mu(c);
  ASSERT_EQ(out.two_stage.size(), 4u);
  for (const auto& r : out.two_stage) EXPECT_TRUE(r.stage1_success);
}

TEST(Enumerate, Counts) {
  auto c = default_config(Experiment::enumerate);
  EXPECT_EQ(run_enumerate(c), "n,k,count\n7,3,5\n");
  c.k = 4;
  EXPECT_EQ(run_enumerate(c), "n,k,count\n7,4,6\n");
  c.k = 2;
  c.list = true;
  EXPECT_EQ(run_enumerate(c), "n,k,count\n7,2,2\nsupport\n\"1,2\"\n\"1,3\"\n");
}

TEST(Bounds, Table) {
  auto c = default_config(Experiment::bounds);
  auto text = run_bounds(c);
  EXPECT_NE(text.find("theorem2               0.174078"), std::string::npos) << text;
  auto rows = bounds_table(c);
  EXPECT_NEAR(rows[1].value, 0.17408, 1e-5);
  EXPECT_NE(run_bounds(c, true).find("theorem1,0.6555"), std::string::npos);
}

TEST(Csv, HeaderAndNumberFormat) {
  ExperimentOutput out;
  TrialResult r;
  r.experiment = Experiment::compare;
  r.method = "lasso";
  r.n = 7;
  r.k = 2;
  r.mu = 0.1;
  r.trial = 3;
  r.seed = 42;
  r.success = 1;
  r.measurements = 132;
  out.rows.push_back(r);
  EXPECT_EQ(csv_of(out),
            "experiment,method,n,k,mu,trial,seed,success,measurements,truncated,status\n"
            "compare,lasso,7,2,0.1,3,42,1,132,0,ok\n");
}
