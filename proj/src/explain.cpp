#include "ltrlab/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ltrlab::explain {

namespace {

using ranker::Tree;
using ranker::TreeEnsemble;
using ranker::TreeNode;

void check_covers(const TreeEnsemble& ensemble) {
  for (const auto& tree : ensemble.trees())
    for (const auto& node : tree.nodes)
      if (!(node.cover > 0.0)) throw std::invalid_argument("tree_shap: node with zero cover");
}

// Element of the feature path maintained during traversal: feature
// index, the fractions of paths flowing when the feature is (one) or
// is not (zero) in the coalition, and the permutation weight.
struct PathElement {
  int feature;
  double zero_fraction;
  double one_fraction;
  double weight;
};

using Path = std::vector<PathElement>;

void extend_path(Path& path, double zero_fraction, double one_fraction, int feature) {
  const int depth = static_cast<int>(path.size());
  path.push_back({feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0});
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].weight += one_fraction * path[i].weight * (i + 1) / static_cast<double>(depth + 1);
    path[i].weight = zero_fraction * path[i].weight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void unwind_path(Path& path, int index) {
  const int depth = static_cast<int>(path.size()) - 1;
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next = path[depth].weight;
  if (one_fraction != 0.0) {
    for (int j = depth - 1; j >= 0; --j) {
      const double tmp = path[j].weight;
      path[j].weight = next * (depth + 1) / (static_cast<double>(j + 1) * one_fraction);
      next = tmp - path[j].weight * zero_fraction * (depth - j) / static_cast<double>(depth + 1);
    }
  } else {
    for (int j = depth - 1; j >= 0; --j)
      path[j].weight = path[j].weight * (depth + 1) / (zero_fraction * (depth - j));
  }
  for (int j = index; j < depth; ++j) {
    path[j].feature = path[j + 1].feature;
    path[j].zero_fraction = path[j + 1].zero_fraction;
    path[j].one_fraction = path[j + 1].one_fraction;
  }
  path.pop_back();
}

double unwound_sum(const Path& path, int index) {
  const int depth = static_cast<int>(path.size()) - 1;
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double total = 0.0;
  if (one_fraction != 0.0) {
    double next = path[depth].weight;
    for (int j = depth - 1; j >= 0; --j) {
      const double tmp = next / (static_cast<double>(j + 1) * one_fraction);
      total += tmp;
      next = path[j].weight - tmp * zero_fraction * (depth - j);
    }
  } else {
    for (int j = depth - 1; j >= 0; --j)
      total += path[j].weight / (zero_fraction * (depth - j));
  }
  return total * (depth + 1);
}

void shap_recurse(const Tree& tree, int node_index, Path path, double zero_fraction,
                  double one_fraction, int parent_feature, std::span<const double> x,
                  std::vector<double>& phi) {
  extend_path(path, zero_fraction, one_fraction, parent_feature);
  const TreeNode& node = tree.nodes[node_index];

  if (node.is_leaf()) {
    for (std::size_t i = 1; i < path.size(); ++i)
      phi[path[i].feature] +=
          unwound_sum(path, static_cast<int>(i)) * (path[i].one_fraction - path[i].zero_fraction) * node.value;
    return;
  }

  const int hot = x[node.feature] < node.threshold ? node.left : node.right;
  const int cold = hot == node.left ? node.right : node.left;
  const double hot_fraction = tree.nodes[hot].cover / node.cover;
  const double cold_fraction = tree.nodes[cold].cover / node.cover;

  // A feature met twice on the path has its previous extension undone
  // and the fractions merged.
  double incoming_zero = 1.0;
  double incoming_one = 1.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (path[k].feature == node.feature) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, static_cast<int>(k));
      break;
    }
  }

  shap_recurse(tree, hot, path, incoming_zero * hot_fraction, incoming_one, node.feature, x, phi);
  shap_recurse(tree, cold, std::move(path), incoming_zero * cold_fraction, 0.0, node.feature, x, phi);
}

std::vector<int> active_features(const TreeEnsemble& ensemble) {
  std::set<int> features;
  for (const auto& tree : ensemble.trees())
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) features.insert(node.feature);
  return {features.begin(), features.end()};
}

// Conditional expectation of one tree when coalition features follow
// x's path and the rest split by cover.
double descend_expectation(const Tree& tree, int node_index, std::span<const double> x,
                           const std::vector<char>& in_coalition) {
  const TreeNode& node = tree.nodes[node_index];
  if (node.is_leaf()) return node.value;
  if (in_coalition[node.feature]) {
    const int child = x[node.feature] < node.threshold ? node.left : node.right;
    return descend_expectation(tree, child, x, in_coalition);
  }
  const double left = descend_expectation(tree, node.left, x, in_coalition);
  const double right = descend_expectation(tree, node.right, x, in_coalition);
  return (tree.nodes[node.left].cover * left + tree.nodes[node.right].cover * right) / node.cover;
}

}  // namespace

Attribution tree_shap(const TreeEnsemble& ensemble, std::span<const double> x) {
  if (x.size() != ensemble.feature_count())
    throw std::invalid_argument("tree_shap: feature vector length mismatch");
  check_covers(ensemble);

  Attribution out;
  out.phi.assign(ensemble.feature_count(), 0.0);
  out.base_value = ensemble.base_score();

  std::vector<double> tree_phi(ensemble.feature_count());
  for (const auto& tree : ensemble.trees()) {
    std::fill(tree_phi.begin(), tree_phi.end(), 0.0);
    shap_recurse(tree, 0, Path{}, 1.0, 1.0, -1, x, tree_phi);
    for (std::size_t f = 0; f < tree_phi.size(); ++f)
      out.phi[f] += ensemble.learning_rate() * tree_phi[f];
    out.base_value += ensemble.learning_rate() * tree.cover_weighted_mean();
  }
  return out;
}

Attribution brute_force_shapley(const TreeEnsemble& ensemble, std::span<const double> x,
                                int max_active) {
  if (x.size() != ensemble.feature_count())
    throw std::invalid_argument("brute_force_shapley: feature vector length mismatch");
  check_covers(ensemble);

  const auto active = active_features(ensemble);
  const int m = static_cast<int>(active.size());
  if (m > max_active)
    throw std::invalid_argument("brute_force_shapley: too many active features for enumeration");

  Attribution out;
  out.phi.assign(ensemble.feature_count(), 0.0);

  // Value table over coalitions of the active features (lr-scaled sum
  // of per-tree conditional expectations, base excluded).
  const std::size_t n_masks = static_cast<std::size_t>(1) << m;
  std::vector<double> value(n_masks, 0.0);
  std::vector<char> in_coalition(ensemble.feature_count(), 0);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    std::fill(in_coalition.begin(), in_coalition.end(), 0);
    for (int bit = 0; bit < m; ++bit)
      if (mask & (static_cast<std::size_t>(1) << bit)) in_coalition[active[bit]] = 1;
    double total = 0.0;
    for (const auto& tree : ensemble.trees())
      total += descend_expectation(tree, 0, x, in_coalition);
    value[mask] = ensemble.learning_rate() * total;
  }
  out.base_value = ensemble.base_score() + value[0];

  if (m == 0) return out;

  std::vector<double> factorial(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) factorial[i] = factorial[i - 1] * i;

  for (int bit = 0; bit < m; ++bit) {
    const std::size_t member = static_cast<std::size_t>(1) << bit;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & member) continue;
      const int size = std::popcount(mask);
      const double weight = factorial[size] * factorial[m - size - 1] / factorial[m];
      phi += weight * (value[mask | member] - value[mask]);
    }
    out.phi[active[bit]] = phi;
  }
  return out;
}

ImportanceReport feature_importance(const TreeEnsemble& ensemble,
                                    const std::vector<std::vector<double>>& sample) {
  if (sample.empty()) throw std::invalid_argument("feature_importance: empty sample");

  ImportanceReport report;
  report.mean_abs_phi.assign(ensemble.feature_count(), 0.0);
  for (const auto& instance : sample) {
    const auto attribution = tree_shap(ensemble, instance);
    for (std::size_t f = 0; f < report.mean_abs_phi.size(); ++f)
      report.mean_abs_phi[f] += std::fabs(attribution.phi[f]);
  }
  for (double& v : report.mean_abs_phi) v /= static_cast<double>(sample.size());

  std::vector<std::size_t> order(report.mean_abs_phi.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (report.mean_abs_phi[a] != report.mean_abs_phi[b])
      return report.mean_abs_phi[a] > report.mean_abs_phi[b];
    return a < b;
  });
  report.rank.assign(report.mean_abs_phi.size(), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) report.rank[order[pos]] = static_cast<int>(pos) + 1;
  return report;
}

}  // namespace ltrlab::explain
