#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ltrlab/datamodel.hpp"

namespace ltrlab::ranker {

// Node of a binary regression tree. cover is the number of training
// samples that reached the node; the attribution module relies on it,
// so it is preserved through serialization.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  // Expected output when inputs are distributed per node covers.
  double cover_weighted_mean() const;
};

// Additive ensemble: prediction = base_score + learning_rate * sum of
// tree outputs. Immutable once trained; shareable read-only.
class TreeEnsemble {
 public:
  TreeEnsemble() = default;
  TreeEnsemble(double base_score, double learning_rate, std::uint64_t schema_hash,
               std::size_t feature_count);

  double predict(std::span<const double> x) const;
  // Checked entry point; throws on schema mismatch.
  double predict_for(const data::FeatureSchema& schema, std::span<const double> x) const;

  void add_tree(Tree tree) { trees_.push_back(std::move(tree)); }

  const std::vector<Tree>& trees() const { return trees_; }
  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  std::uint64_t schema_hash() const { return schema_hash_; }
  std::size_t feature_count() const { return feature_count_; }

  void save(const std::filesystem::path& path) const;
  static TreeEnsemble load(const std::filesystem::path& path);

 private:
  std::vector<Tree> trees_;
  double base_score_ = 0.0;
  double learning_rate_ = 1.0;
  std::uint64_t schema_hash_ = 0;
  std::size_t feature_count_ = 0;
};

struct TrainConfig {
  int n_trees = 120;
  int max_depth = 5;
  int min_leaf_count = 20;
  double learning_rate = 0.15;
  int ndcg_truncation = 10;
  // Channels the learner may split on. Empty means all channels.
  std::vector<data::FeatureChannel> allowed_channels;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GradientPair {
  std::vector<double> gradient;
  std::vector<double> hessian;
};

// Pairwise-logistic gradients weighted by the NDCG@k change from
// swapping each pair in the current score ordering (identity gain on
// labels; per-group ideal DCG normalizes the factor). For a pair with
// y_i > y_j, rho = 1/(1+exp(s_i - s_j)), item i accumulates
// -rho*|dNDCG| and item j the negation; hessians accumulate
// rho*(1-rho)*|dNDCG| on both sides.
GradientPair lambda_gradients(std::span<const double> scores, std::span<const double> labels, int k);

struct TrainLog {
  std::vector<double> train_ndcg;  // per-round mean NDCG@k, identity gain
};

// Boosted trainer over query groups: each round fits one tree to the
// lambda gradients with Newton leaf values -G/(H + 1). labels_per_group
// must parallel dataset.groups(). Throws "no ranking signal" when every
// group has constant labels.
TreeEnsemble train_ranker(const data::Dataset& dataset,
                          const std::vector<std::vector<double>>& labels_per_group,
                          const TrainConfig& config, TrainLog* log = nullptr);

// Squared-error regression mode over plain rows; used by the baseline
// content scorer. Rows are full-width feature vectors; the channel
// filter in config still applies.
TreeEnsemble train_regression(const std::vector<std::vector<double>>& rows,
                              std::span<const double> targets, const data::FeatureSchema& schema,
                              const TrainConfig& config);

// Indices of group.items sorted by descending ensemble score, ties
// broken by ascending product id.
std::vector<std::size_t> rank_group(const TreeEnsemble& ensemble, const data::QueryGroup& group,
                                    const data::FeatureSchema& schema);

}  // namespace ltrlab::ranker
