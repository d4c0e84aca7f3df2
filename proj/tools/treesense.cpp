// treesense: run Monte Carlo experiments and print bound tables.
//
//   treesense compare  [--config FILE] [--workers N] [--out FILE]
//   treesense phase    [--config FILE] [--paper-scale] [--workers N] [--out FILE]
//   treesense sweep-mu [--config FILE] [--workers N] [--out FILE]
//   treesense bounds   [--n N --m M --k K --gamma G --delta D --beta B --sigma2 S --r R] [--csv]
//   treesense enumerate --n N --k K [--list]
//
// Exit codes: 0 success, 2 configuration error, 3 infeasible experiment.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "treesense/bench.hpp"

namespace ts = treesense::bench;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ts::ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Common {
  std::string config_path;
  std::string out;
  std::size_t workers = 0;
  bool paper_scale = false;
};

ts::ExperimentConfig resolve(ts::Experiment e, const Common& opts) {
  const std::string text = opts.config_path.empty() ? "{}" : read_file(opts.config_path);
  auto c = ts::load_config(e, text, opts.paper_scale);
  if (const char* env = std::getenv("TREESENSE_SEED")) {
    try {
      std::size_t pos = 0;
      c.base_seed = std::stoull(env, &pos);
      if (env[pos] != '\0') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ts::ConfigError("TREESENSE_SEED must be an unsigned integer");
    }
  }
  if (opts.workers > 0) c.workers = opts.workers;
  if (!opts.out.empty()) c.output_path = opts.out;
  ts::validate(c);
  return c;
}

void emit(const ts::ExperimentConfig& c, const ts::ExperimentOutput& out) {
  if (c.output_path.empty()) {
    ts::write_csv(std::cout, out, c.timing);
    return;
  }
  auto open = [](const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    return f;
  };
  {
    auto f = open(c.output_path);
    ts::write_csv(f, out, c.timing);
  }
  {
    auto f = open(c.output_path + ".overlay.dat");
    f << out.overlay;
  }
  if (!out.two_stage.empty()) {
    auto f = open(c.output_path + ".two_stage.csv");
    ts::write_two_stage_csv(f, out);
  }
  std::cerr << "wrote " << c.output_path << " (" << out.rows.size() << " rows)\n";
}

void add_common(CLI::App* sub, Common& opts, bool paper_scale) {
  sub->add_option("--config", opts.config_path, "JSON experiment config");
  sub->add_option("--workers", opts.workers, "worker threads");
  sub->add_option("--out", opts.out, "output CSV (stdout if omitted)");
  if (paper_scale) sub->add_flag("--paper-scale", opts.paper_scale, "full-size grid (n = 65535, k up to 400, 100 trials)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive tree-sparse sensing experiments"};
  app.require_subcommand(1);

  Common compare_opts, phase_opts, sweep_opts;
  auto* compare = app.add_subcommand("compare", "tree vs acs vs group lasso vs lasso");
  add_common(compare, compare_opts, false);
  auto* phase = app.add_subcommand("phase", "success rate over (k, mu)");
  add_common(phase, phase_opts, true);
  auto* sweep = app.add_subcommand("sweep-mu", "tree sensing success across mu");
  add_common(sweep, sweep_opts, false);

  auto bc = ts::default_config(ts::Experiment::bounds);
  std::size_t bounds_m = *bc.m;
  bool bounds_csv = false;
  auto* bounds = app.add_subcommand("bounds", "threshold and error-bound table");
  bounds->add_option("--n", bc.n);
  bounds->add_option("--m", bounds_m);
  bounds->add_option("--k", bc.k);
  bounds->add_option("--gamma", bc.gamma);
  bounds->add_option("--delta", bc.delta);
  bounds->add_option("--beta", bc.beta);
  bounds->add_option("--sigma2", bc.sigma2);
  bounds->add_option("--r", bc.r);
  bounds->add_flag("--csv", bounds_csv);

  auto ec = ts::default_config(ts::Experiment::enumerate);
  auto* enumerate = app.add_subcommand("enumerate", "count (and list) tree supports");
  enumerate->add_option("--n", ec.n);
  enumerate->add_option("--k", ec.k);
  enumerate->add_flag("--list", ec.list);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*compare) {
      auto c = resolve(ts::Experiment::compare, compare_opts);
      emit(c, ts::run_compare(c));
    } else if (*phase) {
      auto c = resolve(ts::Experiment::phase, phase_opts);
      emit(c, ts::run_phase(c));
    } else if (*sweep) {
      auto c = resolve(ts::Experiment::sweep_mu, sweep_opts);
      emit(c, ts::run_sweep_mu(c));
    } else if (*bounds) {
      bc.m = bounds_m;
      std::cout << ts::run_bounds(bc, bounds_csv);
    } else if (*enumerate) {
      std::cout << ts::run_enumerate(ec);
    }
  } catch (const ts::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ts::InfeasibleExperiment& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
