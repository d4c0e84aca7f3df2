// Recover a tree-sparse signal on a 1023-node tree, then estimate its amplitudes.

#include <iostream>

#include "treesense/tree_sensing.hpp"

using namespace treesense;

int main() {
  const TreeShape shape(1023);
  const std::size_t k = 16, r = 4;
  auto rng = rng_stream(7, 0);

  Support truth = random_support(shape, k, rng);
  auto signal = make_signal(truth, 6.5, SignMode::random_sign, AmplitudeMode::constant_mu, rng);

  TreeSensingParams params;
  params.k_prime = k;
  params.r = r;
  params.hard_budget = double(r * (2 * k + 1));
  std::cout << "threshold " << params.threshold() << ", sufficient amplitude "
            << sufficient_mu_corollary(double(k), 1.0, params.delta, params.sigma2, double(r)) << '\n';

  MeasurementOracle oracle(signal, 1.0, 1e6, rng_stream(7, 1));
  auto result = run_tree_sensing(oracle, shape, params);
  std::cout << "truth    " << truth.str() << '\n'
            << "estimate " << result.estimate.str() << '\n'
            << (result.estimate == truth ? "exact recovery" : "support error") << " using "
            << result.measurements_used << " measurements\n";

  MeasurementOracle oracle2(signal, 1.0, 1e6, rng_stream(7, 2));
  auto two = two_stage_estimate(oracle2, shape, params, 16);
  std::cout << "amplitudes:";
  for (node_t i : truth) std::cout << ' ' << i << ':' << signal.at(i) << "->" << two.estimate[i - 1];
  std::cout << '\n';
}
