#include "ltrlab/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ltrlab/eval.hpp"

namespace ltrlab::ranker {

namespace {

constexpr double kLeafRegularizer = 1.0;  // Newton step denominator: H + lambda
constexpr double kMinSplitGain = 1e-12;

struct FlatMatrix {
  std::vector<double> values;  // row-major, n x d
  std::size_t n = 0;
  std::size_t d = 0;
  // Per feature, row indices sorted by (value asc, row asc).
  std::vector<std::vector<std::uint32_t>> order;

  double at(std::size_t row, std::size_t feature) const { return values[row * d + feature]; }

  void presort() {
    order.assign(d, {});
    for (std::size_t f = 0; f < d; ++f) {
      auto& idx = order[f];
      idx.resize(n);
      std::iota(idx.begin(), idx.end(), 0u);
      std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double va = at(a, f);
        const double vb = at(b, f);
        if (va != vb) return va < vb;
        return a < b;
      });
    }
  }
};

struct BuildNode {
  double sum_g = 0.0;
  double sum_h = 0.0;
  std::size_t count = 0;
  int tree_index = -1;
  // Best split found so far for the current level.
  double best_gain = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
};

double leaf_value(double g, double h) { return -g / (h + kLeafRegularizer); }

double split_score(double g, double h) { return g * g / (h + kLeafRegularizer); }

// Grows one tree level-wise with exact greedy split search over
// presorted feature columns. node_of_row ends at each row's final leaf,
// which doubles as the prediction for the score update.
Tree fit_tree(const FlatMatrix& X, std::span<const double> grad, std::span<const double> hess,
              const std::vector<std::size_t>& allowed_features, int max_depth, int min_leaf_count,
              std::vector<int>& node_of_row) {
  Tree tree;
  node_of_row.assign(X.n, 0);

  double g0 = 0.0, h0 = 0.0;
  for (std::size_t r = 0; r < X.n; ++r) {
    g0 += grad[r];
    h0 += hess[r];
  }
  tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, leaf_value(g0, h0), static_cast<double>(X.n)});

  std::vector<BuildNode> level;
  level.push_back({g0, h0, X.n, 0, 0.0, -1, 0.0});

  // level_slot[tree_index] -> position in `level`, or -1 when the node
  // is not being grown this level.
  std::vector<int> level_slot;

  for (int depth = 0; depth < max_depth && !level.empty(); ++depth) {
    level_slot.assign(tree.nodes.size(), -1);
    bool any_candidate = false;
    for (std::size_t s = 0; s < level.size(); ++s) {
      level[s].best_gain = 0.0;
      level[s].best_feature = -1;
      if (level[s].count >= 2 * static_cast<std::size_t>(min_leaf_count)) {
        level_slot[level[s].tree_index] = static_cast<int>(s);
        any_candidate = true;
      }
    }
    if (!any_candidate) break;

    // Per-slot running prefix stats, reset per feature.
    std::vector<double> run_g(level.size()), run_h(level.size()), last_val(level.size());
    std::vector<std::size_t> run_cnt(level.size());
    std::vector<char> has_last(level.size());

    for (std::size_t f : allowed_features) {
      std::fill(run_g.begin(), run_g.end(), 0.0);
      std::fill(run_h.begin(), run_h.end(), 0.0);
      std::fill(run_cnt.begin(), run_cnt.end(), 0u);
      std::fill(has_last.begin(), has_last.end(), 0);

      for (std::uint32_t r : X.order[f]) {
        const int slot = level_slot[node_of_row[r]];
        if (slot < 0) continue;
        BuildNode& node = level[slot];
        const double v = X.at(r, f);
        if (has_last[slot] && v > last_val[slot]) {
          const std::size_t left_cnt = run_cnt[slot];
          const std::size_t right_cnt = node.count - left_cnt;
          if (left_cnt >= static_cast<std::size_t>(min_leaf_count) &&
              right_cnt >= static_cast<std::size_t>(min_leaf_count)) {
            const double gl = run_g[slot];
            const double hl = run_h[slot];
            const double gain = 0.5 * (split_score(gl, hl) + split_score(node.sum_g - gl, node.sum_h - hl) -
                                       split_score(node.sum_g, node.sum_h));
            if (gain > node.best_gain + kMinSplitGain) {
              node.best_gain = gain;
              node.best_feature = static_cast<int>(f);
              node.best_threshold = 0.5 * (last_val[slot] + v);
            }
          }
        }
        run_g[slot] += grad[r];
        run_h[slot] += hess[r];
        run_cnt[slot] += 1;
        last_val[slot] = v;
        has_last[slot] = 1;
      }
    }

    // Materialize accepted splits and reassign rows to children.
    std::vector<BuildNode> next_level;
    for (auto& node : level) {
      if (level_slot[node.tree_index] < 0 || node.best_feature < 0) continue;
      TreeNode& parent = tree.nodes[node.tree_index];
      parent.feature = node.best_feature;
      parent.threshold = node.best_threshold;
      parent.left = static_cast<int>(tree.nodes.size());
      parent.right = parent.left + 1;
      parent.value = 0.0;
      tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, 0.0});
      tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, 0.0});
      next_level.push_back({0.0, 0.0, 0, parent.left, 0.0, -1, 0.0});
      next_level.push_back({0.0, 0.0, 0, parent.right, 0.0, -1, 0.0});
    }
    if (next_level.empty()) break;

    std::vector<int> child_slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < next_level.size(); ++s) child_slot[next_level[s].tree_index] = static_cast<int>(s);

    for (std::size_t r = 0; r < X.n; ++r) {
      const int tree_index = node_of_row[r];
      const TreeNode& parent = tree.nodes[tree_index];
      if (parent.is_leaf()) continue;
      const int child = X.at(r, parent.feature) < parent.threshold ? parent.left : parent.right;
      node_of_row[r] = child;
      const int slot = child_slot[child];
      next_level[slot].sum_g += grad[r];
      next_level[slot].sum_h += hess[r];
      next_level[slot].count += 1;
    }

    for (const auto& child : next_level) {
      TreeNode& n = tree.nodes[child.tree_index];
      n.cover = static_cast<double>(child.count);
      n.value = leaf_value(child.sum_g, child.sum_h);
    }
    level = std::move(next_level);
  }

  return tree;
}

FlatMatrix flatten_dataset(const data::Dataset& dataset) {
  FlatMatrix X;
  X.d = dataset.schema().size();
  X.n = dataset.total_items();
  X.values.reserve(X.n * X.d);
  for (const auto& group : dataset.groups())
    for (const auto& item : group.items)
      X.values.insert(X.values.end(), item.features.begin(), item.features.end());
  X.presort();
  return X;
}

std::vector<std::size_t> resolve_allowed_features(const data::FeatureSchema& schema,
                                                  const TrainConfig& config) {
  if (config.allowed_channels.empty()) {
    std::vector<std::size_t> all(schema.size());
    std::iota(all.begin(), all.end(), 0u);
    return all;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < schema.size(); ++i)
    for (auto channel : config.allowed_channels)
      if (schema.field(i).channel == channel) {
        out.push_back(i);
        break;
      }
  if (out.empty()) throw std::invalid_argument("TrainConfig: channel filter excludes every feature");
  return out;
}

double mean_train_ndcg(std::span<const double> scores, const std::vector<std::vector<double>>& labels,
                       std::span<const std::size_t> offsets, int k) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t g = 0; g < labels.size(); ++g) {
    const auto& ys = labels[g];
    std::vector<std::uint32_t> idx(ys.size());
    std::iota(idx.begin(), idx.end(), 0u);
    const double* s = scores.data() + offsets[g];
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (s[a] != s[b]) return s[a] > s[b];
      return a < b;
    });
    std::vector<double> ranked(ys.size());
    for (std::size_t i = 0; i < idx.size(); ++i) ranked[i] = ys[idx[i]];
    if (const auto v = eval::ndcg_at_k(ranked, k, eval::GainType::kIdentity)) {
      total += *v;
      ++counted;
    }
  }
  return counted > 0 ? total / static_cast<double>(counted) : 0.0;
}

}  // namespace

void TrainConfig::validate() const {
  if (n_trees < 0) throw std::invalid_argument("TrainConfig: n_trees must be >= 0");
  if (max_depth < 1) throw std::invalid_argument("TrainConfig: max_depth must be >= 1");
  if (min_leaf_count < 1) throw std::invalid_argument("TrainConfig: min_leaf_count must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw std::invalid_argument("TrainConfig: learning_rate must be in (0, 1]");
  if (ndcg_truncation < 1) throw std::invalid_argument("TrainConfig: ndcg_truncation must be >= 1");
}

double Tree::predict(std::span<const double> x) const {
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf())
    node = &nodes[x[node->feature] < node->threshold ? node->left : node->right];
  return node->value;
}

double Tree::cover_weighted_mean() const {
  const double root_cover = nodes.front().cover;
  double total = 0.0;
  for (const auto& node : nodes)
    if (node.is_leaf()) total += node.value * node.cover;
  return total / root_cover;
}

TreeEnsemble::TreeEnsemble(double base_score, double learning_rate, std::uint64_t schema_hash,
                           std::size_t feature_count)
    : base_score_(base_score),
      learning_rate_(learning_rate),
      schema_hash_(schema_hash),
      feature_count_(feature_count) {}

double TreeEnsemble::predict(std::span<const double> x) const {
  if (x.size() != feature_count_)
    throw std::invalid_argument("TreeEnsemble::predict: feature vector length mismatch");
  double total = 0.0;
  for (const auto& tree : trees_) total += tree.predict(x);
  return base_score_ + learning_rate_ * total;
}

double TreeEnsemble::predict_for(const data::FeatureSchema& schema, std::span<const double> x) const {
  if (schema.hash() != schema_hash_)
    throw std::invalid_argument("TreeEnsemble::predict_for: schema hash mismatch");
  return predict(x);
}

GradientPair lambda_gradients(std::span<const double> scores, std::span<const double> labels, int k) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("lambda_gradients: scores/labels length mismatch");
  if (scores.size() < 2) throw std::invalid_argument("lambda_gradients: need at least 2 items");
  if (k < 1) throw std::invalid_argument("lambda_gradients: k must be >= 1");

  const std::size_t n = scores.size();
  GradientPair out;
  out.gradient.assign(n, 0.0);
  out.hessian.assign(n, 0.0);

  bool any_pair = false;
  for (std::size_t i = 0; i + 1 < n && !any_pair; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (labels[i] != labels[j]) {
        any_pair = true;
        break;
      }
  if (!any_pair) return out;  // all-equal labels: valid, zero gradients

  // Positions in the current score ordering (desc, ties by index).
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<std::size_t> pos(n);
  for (std::size_t p = 0; p < n; ++p) pos[idx[p]] = p;

  std::vector<double> sorted_labels(labels.begin(), labels.end());
  std::sort(sorted_labels.begin(), sorted_labels.end(), std::greater<>());
  const double idcg = eval::dcg_at_k(sorted_labels, k, eval::GainType::kIdentity);

  auto discount = [&](std::size_t p) {
    return p < static_cast<std::size_t>(k) ? 1.0 / std::log2(static_cast<double>(p) + 2.0) : 0.0;
  };

  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labels[i] == labels[j]) continue;
      const std::size_t hi = labels[i] > labels[j] ? i : j;
      const std::size_t lo = hi == i ? j : i;
      const double delta_ndcg =
          (labels[hi] - labels[lo]) * std::fabs(discount(pos[hi]) - discount(pos[lo])) / idcg;
      if (delta_ndcg == 0.0) continue;  // both beyond the truncation depth
      const double rho = 1.0 / (1.0 + std::exp(scores[hi] - scores[lo]));
      const double lambda = rho * delta_ndcg;
      out.gradient[hi] -= lambda;
      out.gradient[lo] += lambda;
      const double curvature = rho * (1.0 - rho) * delta_ndcg;
      out.hessian[hi] += curvature;
      out.hessian[lo] += curvature;
    }
  }
  return out;
}

TreeEnsemble train_ranker(const data::Dataset& dataset,
                          const std::vector<std::vector<double>>& labels_per_group,
                          const TrainConfig& config, TrainLog* log) {
  config.validate();
  if (dataset.groups().empty()) throw std::invalid_argument("train_ranker: empty dataset");
  if (labels_per_group.size() != dataset.groups().size())
    throw std::invalid_argument("train_ranker: labels do not parallel dataset groups");

  bool any_signal = false;
  double label_sum = 0.0;
  std::size_t n_rows = 0;
  for (std::size_t g = 0; g < labels_per_group.size(); ++g) {
    const auto& ys = labels_per_group[g];
    if (ys.size() != dataset.groups()[g].items.size())
      throw std::invalid_argument("train_ranker: label count mismatch in group '" +
                                  dataset.groups()[g].query.id + "'");
    for (double y : ys) {
      if (!std::isfinite(y) || y < 0.0)
        throw std::invalid_argument("train_ranker: labels must be finite and >= 0");
      label_sum += y;
      ++n_rows;
    }
    for (std::size_t i = 1; i < ys.size(); ++i)
      if (ys[i] != ys[0]) any_signal = true;
  }
  if (!any_signal) throw std::runtime_error("train_ranker: no ranking signal (all labels constant)");

  const FlatMatrix X = flatten_dataset(dataset);
  const auto allowed = resolve_allowed_features(dataset.schema(), config);

  std::vector<std::size_t> offsets;
  offsets.reserve(dataset.groups().size());
  std::size_t acc = 0;
  for (const auto& group : dataset.groups()) {
    offsets.push_back(acc);
    acc += group.items.size();
  }

  const double base_score = label_sum / static_cast<double>(n_rows);
  TreeEnsemble ensemble(base_score, config.learning_rate, dataset.schema().hash(), X.d);

  std::vector<double> scores(n_rows, base_score);
  std::vector<double> grad(n_rows), hess(n_rows);
  std::vector<int> node_of_row;

  for (int round = 0; round < config.n_trees; ++round) {
    for (std::size_t g = 0; g < labels_per_group.size(); ++g) {
      const std::size_t off = offsets[g];
      const std::size_t cnt = labels_per_group[g].size();
      const auto pair = lambda_gradients({scores.data() + off, cnt}, labels_per_group[g],
                                         config.ndcg_truncation);
      std::copy(pair.gradient.begin(), pair.gradient.end(), grad.begin() + off);
      std::copy(pair.hessian.begin(), pair.hessian.end(), hess.begin() + off);
    }

    Tree tree = fit_tree(X, grad, hess, allowed, config.max_depth, config.min_leaf_count, node_of_row);
    for (std::size_t r = 0; r < n_rows; ++r)
      scores[r] += config.learning_rate * tree.nodes[node_of_row[r]].value;
    ensemble.add_tree(std::move(tree));

    if (log != nullptr)
      log->train_ndcg.push_back(mean_train_ndcg(scores, labels_per_group, offsets, config.ndcg_truncation));
  }
  return ensemble;
}

TreeEnsemble train_regression(const std::vector<std::vector<double>>& rows,
                              std::span<const double> targets, const data::FeatureSchema& schema,
                              const TrainConfig& config) {
  config.validate();
  if (rows.empty()) throw std::invalid_argument("train_regression: empty row set");
  if (rows.size() != targets.size())
    throw std::invalid_argument("train_regression: rows/targets length mismatch");

  FlatMatrix X;
  X.n = rows.size();
  X.d = schema.size();
  X.values.reserve(X.n * X.d);
  for (const auto& row : rows) {
    if (row.size() != X.d) throw std::invalid_argument("train_regression: row width mismatch");
    X.values.insert(X.values.end(), row.begin(), row.end());
  }
  X.presort();
  const auto allowed = resolve_allowed_features(schema, config);

  double base = 0.0;
  for (double t : targets) base += t;
  base /= static_cast<double>(targets.size());

  TreeEnsemble ensemble(base, config.learning_rate, schema.hash(), X.d);
  std::vector<double> pred(X.n, base);
  std::vector<double> grad(X.n), hess(X.n, 1.0);
  std::vector<int> node_of_row;

  for (int round = 0; round < config.n_trees; ++round) {
    for (std::size_t r = 0; r < X.n; ++r) grad[r] = pred[r] - targets[r];
    Tree tree = fit_tree(X, grad, hess, allowed, config.max_depth, config.min_leaf_count, node_of_row);
    for (std::size_t r = 0; r < X.n; ++r)
      pred[r] += config.learning_rate * tree.nodes[node_of_row[r]].value;
    ensemble.add_tree(std::move(tree));
  }
  return ensemble;
}

std::vector<std::size_t> rank_group(const TreeEnsemble& ensemble, const data::QueryGroup& group,
                                    const data::FeatureSchema& schema) {
  if (schema.hash() != ensemble.schema_hash())
    throw std::invalid_argument("rank_group: schema hash mismatch");
  std::vector<double> scores(group.items.size());
  for (std::size_t i = 0; i < group.items.size(); ++i)
    scores[i] = ensemble.predict(group.items[i].features);
  std::vector<std::size_t> idx(group.items.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return group.items[a].product_id < group.items[b].product_id;
  });
  return idx;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TreeEnsemble::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("TreeEnsemble::save: cannot open '" + path.string() + "'");
  out << "ltrlab_model v1\n";
  char hash_buf[24];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx", static_cast<unsigned long long>(schema_hash_));
  out << "schema_hash " << hash_buf << '\n';
  out << "feature_count " << feature_count_ << '\n';
  out << "base_score " << format_double(base_score_) << '\n';
  out << "learning_rate " << format_double(learning_rate_) << '\n';
  out << "n_trees " << trees_.size() << '\n';
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& tree = trees_[t];
    out << "tree " << t << ' ' << tree.nodes.size() << '\n';
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& node = tree.nodes[i];
      if (node.is_leaf()) {
        out << i << " leaf " << format_double(node.value) << ' ' << format_double(node.cover) << '\n';
      } else {
        out << i << " split " << node.feature << ' ' << format_double(node.threshold) << ' '
            << node.left << ' ' << node.right << ' ' << format_double(node.cover) << '\n';
      }
    }
  }
  if (!out) throw std::runtime_error("TreeEnsemble::save: write failure on '" + path.string() + "'");
}

TreeEnsemble TreeEnsemble::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("TreeEnsemble::load: cannot open '" + path.string() + "'");

  auto expect = [&](const std::string& key) {
    std::string word;
    if (!(in >> word) || word != key)
      throw std::runtime_error("TreeEnsemble::load: malformed model file (expected '" + key + "')");
  };

  expect("ltrlab_model");
  expect("v1");
  expect("schema_hash");
  std::string hash_hex;
  in >> hash_hex;
  const std::uint64_t schema_hash = std::stoull(hash_hex, nullptr, 16);
  expect("feature_count");
  std::size_t feature_count = 0;
  in >> feature_count;
  expect("base_score");
  double base_score = 0.0;
  in >> base_score;
  expect("learning_rate");
  double learning_rate = 0.0;
  in >> learning_rate;
  expect("n_trees");
  std::size_t n_trees = 0;
  in >> n_trees;
  if (!in) throw std::runtime_error("TreeEnsemble::load: malformed header");

  TreeEnsemble ensemble(base_score, learning_rate, schema_hash, feature_count);
  for (std::size_t t = 0; t < n_trees; ++t) {
    expect("tree");
    std::size_t index = 0, n_nodes = 0;
    in >> index >> n_nodes;
    if (!in || index != t || n_nodes == 0)
      throw std::runtime_error("TreeEnsemble::load: malformed tree header");
    Tree tree;
    tree.nodes.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      std::size_t node_index = 0;
      std::string kind;
      in >> node_index >> kind;
      if (!in || node_index != i) throw std::runtime_error("TreeEnsemble::load: malformed node record");
      TreeNode node;
      if (kind == "leaf") {
        in >> node.value >> node.cover;
      } else if (kind == "split") {
        in >> node.feature >> node.threshold >> node.left >> node.right >> node.cover;
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= feature_count ||
            node.left < 0 || node.right < 0 || static_cast<std::size_t>(node.left) >= n_nodes ||
            static_cast<std::size_t>(node.right) >= n_nodes)
          throw std::runtime_error("TreeEnsemble::load: invalid split node");
      } else {
        throw std::runtime_error("TreeEnsemble::load: unknown node kind '" + kind + "'");
      }
      if (!in) throw std::runtime_error("TreeEnsemble::load: truncated node record");
      if (!(node.cover > 0.0)) throw std::runtime_error("TreeEnsemble::load: non-positive cover");
      tree.nodes[i] = node;
    }
    ensemble.add_tree(std::move(tree));
  }
  return ensemble;
}

}  // namespace ltrlab::ranker
