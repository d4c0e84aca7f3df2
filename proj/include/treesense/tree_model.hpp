#pragma once

// Rooted connected subtrees of a nearly complete binary tree stored in heap
// layout: node i (1-based) has children 2i and 2i+1 when they are <= n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace treesense {

using node_t = std::size_t;
using rng_t = std::mt19937_64;

class TreeShape {
public:
  explicit TreeShape(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("TreeShape: n must be >= 1");
  }

  std::size_t size() const { return n_; }
  bool contains(node_t i) const { return i >= 1 && i <= n_; }

  void check(node_t i) const {
    if (!contains(i))
      throw std::invalid_argument("node index " + std::to_string(i) +
                                  " outside [1.." + std::to_string(n_) + "]");
  }

  static node_t parent(node_t i) { return i / 2; }

  /// Height of a complete tree holding n nodes, i.e. number of levels.
  std::size_t levels() const {
    std::size_t d = 0;
    for (std::size_t m = n_; m > 0; m >>= 1) ++d;
    return d;
  }

  friend bool operator==(const TreeShape&, const TreeShape&) = default;

private:
  std::size_t n_;
};

/// In-range children of node i, ascending.
inline std::vector<node_t> children(node_t i, const TreeShape& shape) {
  shape.check(i);
  std::vector<node_t> out;
  out.reserve(2);
  for (node_t c : {2 * i, 2 * i + 1})
    if (c <= shape.size()) out.push_back(c);
  return out;
}

/// True iff the set is empty, or contains the root and every member's parent.
/// Accepts unsorted input with duplicates ignored.
inline bool is_tree_support(std::vector<node_t> indices, const TreeShape& shape) {
  for (node_t i : indices) shape.check(i);
  if (indices.empty()) return true;
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (indices.front() != 1) return false;
  for (node_t i : indices) {
    if (i == 1) continue;
    if (!std::binary_search(indices.begin(), indices.end(), TreeShape::parent(i)))
      return false;
  }
  return true;
}

/// A validated rooted connected subtree (member of T_{n,k}, k = size()).
class Support {
public:
  Support(TreeShape shape, std::vector<node_t> indices)
      : shape_(shape), idx_(std::move(indices)) {
    std::sort(idx_.begin(), idx_.end());
    idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
    if (!is_tree_support(idx_, shape_))
      throw std::invalid_argument("Support: not a rooted connected subtree: " + str());
  }

  explicit Support(TreeShape shape) : shape_(shape) {}

  const TreeShape& shape() const { return shape_; }
  const std::vector<node_t>& indices() const { return idx_; }
  std::size_t size() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  bool contains(node_t i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }

  auto begin() const { return idx_.begin(); }
  auto end() const { return idx_.end(); }

  /// Ascending comma-separated list, e.g. "1,2,3,5". Empty support is "".
  std::string str() const {
    std::string s;
    for (std::size_t j = 0; j < idx_.size(); ++j) {
      if (j) s += ',';
      s += std::to_string(idx_[j]);
    }
    return s;
  }

  friend bool operator==(const Support& a, const Support& b) {
    return a.shape_ == b.shape_ && a.idx_ == b.idx_;
  }
  friend bool operator<(const Support& a, const Support& b) { return a.idx_ < b.idx_; }

private:
  TreeShape shape_;
  std::vector<node_t> idx_;
};

/// Parses "1,2,5" (whitespace tolerated). Throws if the result is not a tree support.
inline Support parse_support(std::string_view text, const TreeShape& shape) {
  std::vector<node_t> idx;
  std::string token;
  std::istringstream in{std::string(text)};
  while (std::getline(in, token, ',')) {
    auto first = token.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    unsigned long long v = std::stoull(token.substr(first));
    idx.push_back(static_cast<node_t>(v));
  }
  for (node_t i : idx) shape.check(i);
  return Support(shape, std::move(idx));
}

/// N(T): nodes outside T whose addition keeps T a rooted connected subtree.
/// For a nonempty support these are exactly the non-member children of members.
inline std::vector<node_t> neighbor_set(const Support& t) {
  if (t.empty()) throw std::invalid_argument("neighbor_set: empty support");
  std::vector<node_t> out;
  for (node_t i : t)
    for (node_t c : children(i, t.shape()))
      if (!t.contains(c)) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

/// The first k heap indices {1..k}: top-down, left-to-right selection.
inline Support leftmost_support(const TreeShape& shape, std::size_t k) {
  if (k < 1 || k > shape.size())
    throw std::invalid_argument("leftmost_support: k outside [1..n]");
  std::vector<node_t> idx(k);
  for (std::size_t j = 0; j < k; ++j) idx[j] = j + 1;
  return Support(shape, std::move(idx));
}

namespace detail {

// Include-or-exclude recursion over the frontier. Each subtree is produced
// once because a frontier node, once excluded, is never offered again.
inline void enumerate_rec(const TreeShape& shape, std::size_t k, std::vector<node_t>& current,
                          std::vector<node_t> frontier,
                          const std::function<void(const std::vector<node_t>&)>& emit) {
  if (current.size() == k) {
    emit(current);
    return;
  }
  if (frontier.empty()) return;
  node_t v = frontier.back();
  frontier.pop_back();

  auto with = frontier;
  for (node_t c : children(v, shape)) with.push_back(c);
  current.push_back(v);
  enumerate_rec(shape, k, current, std::move(with), emit);
  current.pop_back();

  enumerate_rec(shape, k, current, std::move(frontier), emit);
}

}  // namespace detail

/// Every member of T_{n,k} in lexicographic order of sorted index lists.
/// Exponential in k; meant for small trees (n <= 63, k <= 8).
inline std::vector<Support> enumerate_supports(const TreeShape& shape, std::size_t k) {
  std::vector<Support> out;
  if (k == 0 || k > shape.size()) return out;
  std::vector<node_t> current;
  current.reserve(k);
  detail::enumerate_rec(shape, k, current, {1}, [&](const std::vector<node_t>& s) {
    out.emplace_back(shape, s);
  });
  std::sort(out.begin(), out.end());
  return out;
}

enum class SupportSampler { growth, uniform_exact };

inline std::size_t max_sparsity(const TreeShape& shape) { return (shape.size() + 1) / 2; }

/// Random member of T_{n,k}.
///
/// `growth` starts from the root and repeatedly adds a uniformly chosen element
/// of the current neighbor set. This is not uniform over T_{n,k}. `uniform_exact` draws
/// uniformly from the full enumeration and is limited to n <= 31.
inline Support random_support(const TreeShape& shape, std::size_t k, rng_t& rng,
                              SupportSampler sampler = SupportSampler::growth) {
  if (k < 1 || k > max_sparsity(shape))
    throw std::invalid_argument("random_support: k outside [1..(n+1)/2]");

  if (sampler == SupportSampler::uniform_exact) {
    if (shape.size() > 31)
      throw std::invalid_argument("random_support: uniform_exact requires n <= 31");
    auto all = enumerate_supports(shape, k);
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    return all[pick(rng)];
  }

  std::vector<node_t> members{1};
  std::vector<node_t> frontier = children(1, shape);
  members.reserve(k);
  while (members.size() < k) {
    std::uniform_int_distribution<std::size_t> pick(0, frontier.size() - 1);
    std::size_t j = pick(rng);
    node_t v = frontier[j];
    frontier[j] = frontier.back();
    frontier.pop_back();
    members.push_back(v);
    for (node_t c : children(v, shape)) frontier.push_back(c);
  }
  return Support(shape, std::move(members));
}

enum class SignMode { nonnegative, random_sign };
enum class AmplitudeMode { constant_mu, iid_above_mu };

/// x_i = alpha_i on the support, 0 elsewhere, with |alpha_i| >= mu.
class SparseSignal {
public:
  SparseSignal(Support support, std::vector<double> amplitudes, double mu)
      : support_(std::move(support)), amp_(std::move(amplitudes)), mu_(mu) {
    if (!(mu > 0)) throw std::invalid_argument("SparseSignal: mu must be > 0");
    if (amp_.size() != support_.size())
      throw std::invalid_argument("SparseSignal: one amplitude per support index required");
    for (double a : amp_)
      if (!(std::abs(a) >= mu_))
        throw std::invalid_argument("SparseSignal: amplitude below mu");
  }

  const Support& support() const { return support_; }
  const TreeShape& shape() const { return support_.shape(); }
  const std::vector<double>& amplitudes() const { return amp_; }
  double mu() const { return mu_; }

  /// x_i for 1-based i.
  double at(node_t i) const {
    shape().check(i);
    auto it = std::lower_bound(support_.begin(), support_.end(), i);
    if (it == support_.end() || *it != i) return 0.0;
    return amp_[static_cast<std::size_t>(it - support_.begin())];
  }

  /// Dense vector, 0-based storage (entry i-1 holds x_i).
  std::vector<double> dense() const {
    std::vector<double> x(shape().size(), 0.0);
    for (std::size_t j = 0; j < support_.size(); ++j) x[support_.indices()[j] - 1] = amp_[j];
    return x;
  }

  /// Sparse "index:value" pairs, comma separated.
  std::string str() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t j = 0; j < support_.size(); ++j) {
      if (j) os << ',';
      os << support_.indices()[j] << ':' << amp_[j];
    }
    return os.str();
  }

private:
  Support support_;
  std::vector<double> amp_;
  double mu_;
};

/// iid_above_mu draws |alpha_i| = mu * (1 + E), E ~ Exp(1).
inline SparseSignal make_signal(const Support& support, double mu, SignMode sign_mode,
                                AmplitudeMode amplitude_mode, rng_t& rng) {
  if (!(mu > 0)) throw std::invalid_argument("make_signal: mu must be > 0");
  std::vector<double> amp(support.size(), mu);
  std::exponential_distribution<double> excess(1.0);
  std::bernoulli_distribution coin(0.5);
  for (double& a : amp) {
    if (amplitude_mode == AmplitudeMode::iid_above_mu) a = mu * (1.0 + excess(rng));
    if (sign_mode == SignMode::random_sign && coin(rng)) a = -a;
  }
  return SparseSignal(support, std::move(amp), mu);
}

}  // namespace treesense
