#include <gtest/gtest.h>

#include <map>
#include <set>

#include "treesense/sensing.hpp"
#include "treesense/tree_model.hpp"

using namespace treesense;

namespace {

// Test-only oracle: filter every subset of [1..n] through the definition.
std::vector<std::vector<node_t>> brute_force_supports(std::size_t n, std::size_t k) {
  std::vector<std::vector<node_t>> out;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<node_t> s;
    for (std::size_t b = 0; b < n; ++b)
      if (mask & (1u << b)) s.push_back(b + 1);
    bool ok = s.front() == 1;
    for (node_t i : s)
      if (i != 1 && !(mask & (1u << (i / 2 - 1)))) ok = false;
    if (ok) out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// |T_{n,k}| for a complete tree of the given height by convolution over the
// two child subtrees: g_h(k) = sum_{a+b=k-1} g_{h-1}(a) g_{h-1}(b), g(0) = 1.
std::size_t complete_tree_count(std::size_t height, std::size_t k) {
  if (k == 0) return 1;
  if (height == 0) return 0;
  std::size_t total = 0;
  for (std::size_t a = 0; a <= k - 1; ++a)
    total += complete_tree_count(height - 1, a) * complete_tree_count(height - 1, k - 1 - a);
  return total;
}

}  // namespace

TEST(TreeShape, RejectsEmptyTree) { EXPECT_THROW(TreeShape(0), std::invalid_argument); }

TEST(Children, HeapArithmetic) {
  EXPECT_EQ(children(1, TreeShape(7)), (std::vector<node_t>{2, 3}));
  EXPECT_TRUE(children(5, TreeShape(7)).empty());
  EXPECT_EQ(children(6, TreeShape(12)), (std::vector<node_t>{12}));
  EXPECT_THROW(children(0, TreeShape(7)), std::invalid_argument);
  EXPECT_THROW(children(8, TreeShape(7)), std::invalid_argument);
}

TEST(IsTreeSupport, Examples) {
  TreeShape t(7);
  EXPECT_TRUE(is_tree_support({1, 2, 3, 5}, t));
  EXPECT_FALSE(is_tree_support({2, 3}, t));
  EXPECT_FALSE(is_tree_support({1, 5}, t));
  EXPECT_TRUE(is_tree_support({}, t));
  EXPECT_THROW(is_tree_support({1, 9}, t), std::invalid_argument);
}

TEST(Support, RejectsDisconnectedSets) {
  EXPECT_THROW(Support(TreeShape(7), {1, 5}), std::invalid_argument);
  Support s(TreeShape(7), {5, 1, 2, 3});
  EXPECT_EQ(s.str(), "1,2,3,5");
  EXPECT_EQ(parse_support("1, 2,3,5", TreeShape(7)), s);
}

TEST(NeighborSet, Examples) {
  TreeShape t(7);
  EXPECT_EQ(neighbor_set(Support(t, {1})), (std::vector<node_t>{2, 3}));
  EXPECT_EQ(neighbor_set(Support(t, {1, 2, 3})), (std::vector<node_t>{4, 5, 6, 7}));
  EXPECT_EQ(neighbor_set(Support(t, {1, 2, 3, 5})), (std::vector<node_t>{4, 6, 7}));
  EXPECT_THROW(neighbor_set(Support(t)), std::invalid_argument);
}

TEST(NeighborSet, MatchesBruteForceAugmentation) {
  for (std::size_t n : {3u, 7u, 12u, 15u}) {
    TreeShape t(n);
    for (std::size_t k = 1; k < std::min<std::size_t>(n, 6); ++k) {
      for (const auto& s : enumerate_supports(t, k)) {
        std::vector<node_t> expected;
        for (node_t j = 1; j <= n; ++j) {
          if (s.contains(j)) continue;
          auto aug = s.indices();
          aug.push_back(j);
          if (is_tree_support(aug, t)) expected.push_back(j);
        }
        auto got = neighbor_set(s);
        ASSERT_EQ(got, expected) << "n=" << n << " T=" << s.str();
        auto next = enumerate_supports(t, k + 1);
        for (node_t j : got) {
          auto aug = s.indices();
          aug.push_back(j);
          EXPECT_TRUE(std::binary_search(next.begin(), next.end(), Support(t, aug)));
        }
      }
    }
  }
}

TEST(LeftmostSupport, Examples) {
  EXPECT_EQ(leftmost_support(TreeShape(7), 3).indices(), (std::vector<node_t>{1, 2, 3}));
  EXPECT_EQ(leftmost_support(TreeShape(15), 5).indices(), (std::vector<node_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(leftmost_support(TreeShape(7), 1).indices(), (std::vector<node_t>{1}));
  EXPECT_THROW(leftmost_support(TreeShape(7), 0), std::invalid_argument);
  EXPECT_THROW(leftmost_support(TreeShape(7), 8), std::invalid_argument);
}

TEST(EnumerateSupports, SmallCounts) {
  TreeShape t(7);
  auto two = enumerate_supports(t, 2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].str(), "1,2");
  EXPECT_EQ(two[1].str(), "1,3");
  EXPECT_EQ(enumerate_supports(t, 3).size(), 5u);
  EXPECT_EQ(enumerate_supports(t, 4).size(), 6u);
  EXPECT_TRUE(enumerate_supports(t, 0).empty());
}

TEST(EnumerateSupports, EqualsPowerSetFilter) {
  for (std::size_t n = 1; n <= 15; ++n) {
    TreeShape t(n);
    for (std::size_t k = 1; k <= n; ++k) {
      auto got = enumerate_supports(t, k);
      auto want = brute_force_supports(n, k);
      ASSERT_EQ(got.size(), want.size()) << "n=" << n << " k=" << k;
      for (std::size_t j = 0; j < got.size(); ++j) EXPECT_EQ(got[j].indices(), want[j]);
    }
  }
}

TEST(EnumerateSupports, CompleteTreeRecursion) {
  for (std::size_t h : {2u, 3u, 4u, 5u}) {
    TreeShape t((std::size_t{1} << h) - 1);
    for (std::size_t k = 1; k <= 6; ++k)
      EXPECT_EQ(enumerate_supports(t, k).size(), complete_tree_count(h, k)) << "h=" << h << " k=" << k;
  }
}

// Neighbor-set size properties on the grid n in {3,7,15,31}, k <= 6.
TEST(NeighborSet, SizeAtMostKPlusOne) {
  for (std::size_t n : {3u, 7u, 15u, 31u}) {
    TreeShape t(n);
    for (std::size_t k = 1; k <= std::min<std::size_t>(6, n - 1); ++k)
      for (const auto& s : enumerate_supports(t, k))
        EXPECT_LE(neighbor_set(s).size(), k + 1) << "n=" << n << " T=" << s.str();
  }
}

TEST(LeftmostSupport, HardSubclassHasExactlyKNeighbors) {
  for (std::size_t n : {3u, 7u, 15u, 31u}) {
    TreeShape t(n);
    for (std::size_t k = 2; k <= std::min<std::size_t>(6, (n + 1) / 2); ++k)
      EXPECT_EQ(neighbor_set(leftmost_support(t, k - 1)).size(), k) << "n=" << n << " k=" << k;
  }
  // Beyond the grid the construction keeps working up to (n+1)/2.
  TreeShape big(1023);
  for (std::size_t k = 2; k <= 512; ++k)
    ASSERT_EQ(neighbor_set(leftmost_support(big, k - 1)).size(), k);
}

TEST(RandomSupport, AlwaysValidAndExactSize) {
  TreeShape t(1023);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto rng = rng_stream(7, seed);
    auto s = random_support(t, 16, rng);
    EXPECT_EQ(s.size(), 16u);
    EXPECT_TRUE(is_tree_support(s.indices(), t));
  }
}

TEST(RandomSupport, Examples) {
  TreeShape t(7);
  auto rng = rng_stream(42, 0);
  EXPECT_EQ(random_support(t, 1, rng).str(), "1");

  auto all = enumerate_supports(t, 4);
  auto r42 = rng_t(42);
  auto s = random_support(t, 4, r42);
  EXPECT_TRUE(std::binary_search(all.begin(), all.end(), s));

  EXPECT_THROW(random_support(t, 0, rng), std::invalid_argument);
  EXPECT_THROW(random_support(t, 5, rng), std::invalid_argument);
}

TEST(RandomSupport, CoversEnumeration) {
  TreeShape t(7);
  for (auto sampler : {SupportSampler::growth, SupportSampler::uniform_exact}) {
    std::map<std::string, int> seen;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      auto rng = rng_stream(1, seed);
      seen[random_support(t, 4, rng, sampler).str()]++;
    }
    EXPECT_EQ(seen.size(), 6u);
  }
}

TEST(RandomSupport, UniformExactIsUniform) {
  TreeShape t(7);
  std::map<std::string, int> seen;
  const int draws = 60000;
  for (int seed = 0; seed < draws; ++seed) {
    auto rng = rng_stream(3, static_cast<std::uint64_t>(seed));
    seen[random_support(t, 4, rng, SupportSampler::uniform_exact).str()]++;
  }
  // 6 equally likely outcomes; 5 standard errors.
  const double p = 1.0 / 6.0, se = std::sqrt(p * (1 - p) / draws);
  for (const auto& [key, count] : seen) EXPECT_NEAR(count / double(draws), p, 5 * se) << key;
  EXPECT_THROW(
      [] {
        auto rng = rng_t(0);
        random_support(TreeShape(63), 3, rng, SupportSampler::uniform_exact);
      }(),
      std::invalid_argument);
}

TEST(RandomSupport, DeterministicUnderSeed) {
  TreeShape t(4095);
  auto a = rng_stream(99, 5), b = rng_stream(99, 5);
  EXPECT_EQ(random_support(t, 64, a), random_support(t, 64, b));
}

TEST(MakeSignal, FigureOneSignal) {
  TreeShape t(7);
  auto rng = rng_t(0);
  auto x = make_signal(Support(t, {1, 2, 3, 5}), 1.0, SignMode::nonnegative,
                       AmplitudeMode::constant_mu, rng);
  EXPECT_EQ(x.dense(), (std::vector<double>{1, 1, 1, 0, 1, 0, 0}));
  EXPECT_EQ(x.at(4), 0.0);
  EXPECT_EQ(x.str(), "1:1,2:1,3:1,5:1");
}

TEST(MakeSignal, AmplitudeInvariants) {
  TreeShape t(255);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rng = rng_stream(11, seed);
    auto s = random_support(t, 16, rng);
    auto a = make_signal(s, 2.0, SignMode::random_sign, AmplitudeMode::constant_mu, rng);
    for (double v : a.amplitudes()) EXPECT_EQ(std::abs(v), 2.0);
    auto b = make_signal(s, 2.0, SignMode::nonnegative, AmplitudeMode::iid_above_mu, rng);
    for (double v : b.amplitudes()) EXPECT_GE(v, 2.0);
    auto dense = b.dense();
    for (node_t i = 1; i <= t.size(); ++i)
      if (!s.contains(i)) {
        EXPECT_EQ(dense[i - 1], 0.0);
      }
  }
  auto rng = rng_t(0);
  EXPECT_THROW(make_signal(Support(t, {1}), 0.0, SignMode::nonnegative,
                           AmplitudeMode::constant_mu, rng),
               std::invalid_argument);
}
