#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ltrlab/eval.hpp"
#include "ltrlab/ranker.hpp"
#include "ltrlab/rng.hpp"
#include "testutil.hpp"

using namespace ltrlab;

namespace {

// Brute-force |dNDCG| from swapping items i and j in the current score
// ordering, computed through eval::ndcg_at_k with identity gain.
double swap_delta_ndcg(const std::vector<double>& scores, const std::vector<double>& labels,
                       std::size_t i, std::size_t j, int k) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<double> ranked(n);
  for (std::size_t p = 0; p < n; ++p) ranked[p] = labels[order[p]];
  const auto before = eval::ndcg_at_k(ranked, k, eval::GainType::kIdentity);

  std::vector<std::size_t> swapped = order;
  for (std::size_t p = 0; p < n; ++p) {
    if (swapped[p] == i) swapped[p] = j;
    else if (swapped[p] == j) swapped[p] = i;
  }
  for (std::size_t p = 0; p < n; ++p) ranked[p] = labels[swapped[p]];
  const auto after = eval::ndcg_at_k(ranked, k, eval::GainType::kIdentity);
  return std::fabs(*after - *before);
}

// Expected gradients rebuilt from first principles with the swap oracle.
ranker::GradientPair reference_gradients(const std::vector<double>& scores,
                                         const std::vector<double>& labels, int k) {
  ranker::GradientPair out;
  out.gradient.assign(scores.size(), 0.0);
  out.hessian.assign(scores.size(), 0.0);
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    for (std::size_t j = i + 1; j < scores.size(); ++j) {
      if (labels[i] == labels[j]) continue;
      const std::size_t hi = labels[i] > labels[j] ? i : j;
      const std::size_t lo = hi == i ? j : i;
      const double delta = swap_delta_ndcg(scores, labels, i, j, k);
      const double rho = 1.0 / (1.0 + std::exp(scores[hi] - scores[lo]));
      out.gradient[hi] -= rho * delta;
      out.gradient[lo] += rho * delta;
      out.hessian[hi] += rho * (1.0 - rho) * delta;
      out.hessian[lo] += rho * (1.0 - rho) * delta;
    }
  }
  return out;
}

// Single-feature corpus whose labels increase with the feature.
data::Dataset monotone_corpus(int n_queries, int items_per_group, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<data::FeatureField> fields{{"signal", data::FeatureChannel::kSparseContent},
                                         {"noise", data::FeatureChannel::kXeDense}};
  std::vector<data::QueryGroup> groups;
  for (int g = 0; g < n_queries; ++g) {
    data::QueryGroup group;
    group.query.id = "q" + std::to_string(g);
    group.query.segment = "head";
    for (int i = 0; i < items_per_group; ++i) {
      data::Item item;
      item.product_id = "p" + std::to_string(g) + "_" + std::to_string(i);
      item.features = {rng.uniform(), rng.uniform()};
      group.items.push_back(std::move(item));
    }
    groups.push_back(std::move(group));
  }
  return data::Dataset{data::FeatureSchema{std::move(fields)}, std::move(groups)};
}

std::vector<std::vector<double>> labels_from_feature(const data::Dataset& corpus,
                                                     std::size_t feature) {
  std::vector<std::vector<double>> labels;
  for (const auto& group : corpus.groups()) {
    std::vector<double> ys;
    for (const auto& item : group.items) ys.push_back(item.features[feature]);
    labels.push_back(std::move(ys));
  }
  return labels;
}

}  // namespace

TEST_CASE("saturated correctly-ordered pair has vanishing gradients") {
  const auto pair = ranker::lambda_gradients(std::vector<double>{10.0, -10.0},
                                             std::vector<double>{1.0, 0.0}, 2);
  CHECK(std::fabs(pair.gradient[0]) < 1e-4);
  CHECK(std::fabs(pair.gradient[1]) < 1e-4);
}

TEST_CASE("tied scores on a two-item group give the half-delta gradient") {
  const std::vector<double> scores{0.0, 0.0};
  const std::vector<double> labels{1.0, 0.0};
  const auto pair = ranker::lambda_gradients(scores, labels, 2);
  const double delta = swap_delta_ndcg(scores, labels, 0, 1, 2);
  CHECK(pair.gradient[0] == doctest::Approx(-0.5 * delta).epsilon(1e-12));
  CHECK(pair.gradient[1] == doctest::Approx(0.5 * delta).epsilon(1e-12));
}

TEST_CASE("lambda gradients match the brute-force swap oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(6);
    std::vector<double> scores(n), labels(n);
    for (auto& s : scores) s = rng.normal(0.0, 1.5);
    for (auto& y : labels) y = static_cast<double>(rng.uniform_index(4));
    if (std::all_of(labels.begin(), labels.end(), [&](double y) { return y == labels[0]; })) continue;
    const int k = 1 + static_cast<int>(rng.uniform_index(n));
    const auto actual = ranker::lambda_gradients(scores, labels, k);
    const auto expected = reference_gradients(scores, labels, k);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(actual.gradient[i] == doctest::Approx(expected.gradient[i]).epsilon(1e-10));
      CHECK(actual.hessian[i] == doctest::Approx(expected.hessian[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("lambda gradients are the derivative of the pairwise-logistic surrogate") {
  Rng rng(43);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5;
    std::vector<double> scores(n), labels(n);
    for (auto& s : scores) s = rng.normal(0.0, 1.0);
    for (auto& y : labels) y = static_cast<double>(rng.uniform_index(4));
    bool constant = true;
    for (double y : labels) constant &= (y == labels[0]);
    if (constant) continue;
    const int k = 3;

    // Freeze the |dNDCG| weights at the evaluation point; the surrogate
    // is then smooth and central differences apply.
    std::vector<std::vector<double>> weights(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (labels[i] != labels[j]) weights[i][j] = swap_delta_ndcg(scores, labels, i, j, k);

    auto surrogate = [&](const std::vector<double>& s) {
      double total = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          if (labels[i] == labels[j]) continue;
          const std::size_t hi = labels[i] > labels[j] ? i : j;
          const std::size_t lo = hi == i ? j : i;
          total += weights[i][j] * std::log1p(std::exp(-(s[hi] - s[lo])));
        }
      }
      return total;
    };

    const auto pair = ranker::lambda_gradients(scores, labels, k);
    const double h = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> up = scores, down = scores;
      up[i] += h;
      down[i] -= h;
      const double numeric = (surrogate(up) - surrogate(down)) / (2.0 * h);
      if (std::fabs(numeric) > 1e-8)
        CHECK(pair.gradient[i] == doctest::Approx(numeric).epsilon(1e-4));
    }
    ++checked;
  }
  CHECK(checked >= 90);
}

TEST_CASE("within-group gradients cancel") {
  Rng rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(8);
    std::vector<double> scores(n), labels(n);
    for (auto& s : scores) s = rng.normal(0.0, 1.0);
    for (auto& y : labels) y = static_cast<double>(rng.uniform_index(3));
    const auto pair = ranker::lambda_gradients(scores, labels, 5);
    double sum = 0.0;
    for (double g : pair.gradient) sum += g;
    CHECK(std::fabs(sum) <= 1e-12);
  }
  // The two-item case cancels bitwise.
  const auto pair = ranker::lambda_gradients(std::vector<double>{0.3, -0.2},
                                             std::vector<double>{2.0, 1.0}, 2);
  CHECK(pair.gradient[0] + pair.gradient[1] == 0.0);
}

TEST_CASE("all-equal labels yield zero gradients without error") {
  const auto pair =
      ranker::lambda_gradients(std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{2.0, 2.0, 2.0}, 3);
  for (double g : pair.gradient) CHECK(g == 0.0);
  for (double h : pair.hessian) CHECK(h == 0.0);
}

TEST_CASE("training on a noiseless monotone corpus reaches NDCG ~ 1") {
  const auto corpus = monotone_corpus(200, 20, 307);
  const auto labels = labels_from_feature(corpus, 0);
  ranker::TrainConfig config;
  config.n_trees = 50;
  config.max_depth = 6;
  config.min_leaf_count = 1;
  config.learning_rate = 0.3;
  config.ndcg_truncation = 10;
  ranker::TrainLog log;
  const auto model = ranker::train_ranker(corpus, labels, config, &log);
  REQUIRE_FALSE(log.train_ndcg.empty());
  CHECK(log.train_ndcg.back() >= 0.999);
}

TEST_CASE("zero trees fall back to the base score and input order") {
  const auto corpus = monotone_corpus(3, 6, 11);
  const auto labels = labels_from_feature(corpus, 0);
  ranker::TrainConfig config;
  config.n_trees = 0;
  const auto model = ranker::train_ranker(corpus, labels, config);
  double label_sum = 0.0;
  std::size_t count = 0;
  for (const auto& ys : labels)
    for (double y : ys) {
      label_sum += y;
      ++count;
    }
  CHECK(model.predict(corpus.groups()[0].items[0].features) ==
        doctest::Approx(label_sum / count).epsilon(1e-12));

  // All-equal scores rank by ascending product id.
  const auto order = ranker::rank_group(model, corpus.groups()[0], corpus.schema());
  for (std::size_t i = 1; i < order.size(); ++i)
    CHECK(corpus.groups()[0].items[order[i - 1]].product_id <
          corpus.groups()[0].items[order[i]].product_id);
}

TEST_CASE("channel filter keeps excluded features out of every tree") {
  const auto corpus = monotone_corpus(50, 10, 13);
  // Labels driven by the xe-dense feature, which the filter excludes;
  // the trees must cope with sparse-content only.
  const auto labels = labels_from_feature(corpus, 1);
  ranker::TrainConfig config;
  config.n_trees = 20;
  config.max_depth = 3;
  config.min_leaf_count = 5;
  config.allowed_channels = {data::FeatureChannel::kSparseContent};
  const auto model = ranker::train_ranker(corpus, labels, config);
  for (const auto& tree : model.trees())
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) CHECK(node.feature == 0);
}

TEST_CASE("constant labels raise the no-signal error") {
  const auto corpus = monotone_corpus(3, 5, 17);
  std::vector<std::vector<double>> labels(corpus.groups().size(), std::vector<double>(5, 1.0));
  CHECK_THROWS_WITH_AS(ranker::train_ranker(corpus, labels, ranker::TrainConfig{}),
                       doctest::Contains("no ranking signal"), std::runtime_error);
}

TEST_CASE("training is deterministic: identical runs serialize identically") {
  const auto corpus = monotone_corpus(30, 8, 19);
  const auto labels = labels_from_feature(corpus, 0);
  ranker::TrainConfig config;
  config.n_trees = 15;
  config.max_depth = 3;
  config.min_leaf_count = 3;

  const auto a = ranker::train_ranker(corpus, labels, config);
  const auto b = ranker::train_ranker(corpus, labels, config);
  const auto path_a = testutil::temp_path("model_a.txt");
  const auto path_b = testutil::temp_path("model_b.txt");
  a.save(path_a);
  b.save(path_b);
  std::ifstream fa(path_a), fb(path_b);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK_FALSE(sa.str().empty());
}

TEST_CASE("uniform label scaling leaves training invariant") {
  const auto corpus = monotone_corpus(30, 8, 23);
  const auto labels = labels_from_feature(corpus, 0);
  ranker::TrainConfig config;
  config.n_trees = 12;
  config.max_depth = 3;
  config.min_leaf_count = 3;
  const auto base_model = ranker::train_ranker(corpus, labels, config);

  SUBCASE("power-of-two scaling is bit-exact") {
    auto scaled = labels;
    for (auto& group : scaled)
      for (auto& y : group) y *= 2.0;
    const auto scaled_model = ranker::train_ranker(corpus, scaled, config);
    const auto path_a = testutil::temp_path("scale_a.txt");
    const auto path_b = testutil::temp_path("scale_b.txt");
    base_model.save(path_a);
    scaled_model.save(path_b);
    std::ifstream fa(path_a), fb(path_b);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    // Base score scales; trees must coincide. Compare rankings instead
    // of bytes for the whole model.
    for (const auto& group : corpus.groups())
      CHECK(ranker::rank_group(base_model, group, corpus.schema()) ==
            ranker::rank_group(scaled_model, group, corpus.schema()));
  }
  SUBCASE("arbitrary positive scaling preserves the rankings") {
    auto scaled = labels;
    for (auto& group : scaled)
      for (auto& y : group) y *= 3.0;
    const auto scaled_model = ranker::train_ranker(corpus, scaled, config);
    for (const auto& group : corpus.groups())
      CHECK(ranker::rank_group(base_model, group, corpus.schema()) ==
            ranker::rank_group(scaled_model, group, corpus.schema()));
  }
}

TEST_CASE("predict walks hand-traced trees") {
  ranker::Tree tree;
  tree.nodes = {
      {0, 0.5, 1, 2, 0.0, 10.0},       // split on f0 at 0.5
      {-1, 0.0, -1, -1, -1.5, 6.0},    // left leaf
      {-1, 0.0, -1, -1, 2.5, 4.0},     // right leaf
  };
  ranker::TreeEnsemble ensemble(1.0, 0.5, 1234, 2);
  ensemble.add_tree(tree);

  CHECK(ensemble.predict(std::vector<double>{0.4, 9.0}) == doctest::Approx(1.0 + 0.5 * -1.5));
  CHECK(ensemble.predict(std::vector<double>{0.6, -9.0}) == doctest::Approx(1.0 + 0.5 * 2.5));
  // Feature 1 is never split on; prediction ignores it.
  CHECK(ensemble.predict(std::vector<double>{0.4, 123.0}) ==
        ensemble.predict(std::vector<double>{0.4, -123.0}));

  ranker::TreeEnsemble empty(0.25, 0.1, 99, 3);
  CHECK(empty.predict(std::vector<double>{1.0, 2.0, 3.0}) == 0.25);
  CHECK_THROWS_AS(empty.predict(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("rank_group orders by score with product-id tie-break and is input-order invariant") {
  data::FeatureSchema schema{{{"f0", data::FeatureChannel::kSparseContent}}};
  ranker::Tree tree;
  tree.nodes = {
      {0, 0.5, 1, 2, 0.0, 10.0},
      {-1, 0.0, -1, -1, 0.0, 5.0},
      {-1, 0.0, -1, -1, 1.0, 5.0},
  };
  ranker::TreeEnsemble model(0.0, 1.0, schema.hash(), 1);
  model.add_tree(tree);

  data::QueryGroup group{{"q0", "head"},
                         {{"pb", {0.9}, data::EngagementOutcome::kNonEngaged, std::nullopt},
                          {"pa", {0.8}, data::EngagementOutcome::kNonEngaged, std::nullopt},
                          {"pc", {0.1}, data::EngagementOutcome::kNonEngaged, std::nullopt}}};
  const auto order = ranker::rank_group(model, group, schema);
  // pa and pb tie on score 1.0; pa wins by id. pc scores 0.
  CHECK(group.items[order[0]].product_id == "pa");
  CHECK(group.items[order[1]].product_id == "pb");
  CHECK(group.items[order[2]].product_id == "pc");

  data::QueryGroup permuted{{"q0", "head"}, {group.items[2], group.items[0], group.items[1]}};
  const auto order2 = ranker::rank_group(model, permuted, schema);
  std::vector<std::string> ids, ids2;
  for (auto i : order) ids.push_back(group.items[i].product_id);
  for (auto i : order2) ids2.push_back(permuted.items[i].product_id);
  CHECK(ids == ids2);

  data::FeatureSchema other{{{"g0", data::FeatureChannel::kSparseContent}}};
  CHECK_THROWS_AS(ranker::rank_group(model, group, other), std::invalid_argument);
}

TEST_CASE("serialization round-trips bit-identical predictions") {
  const auto corpus = monotone_corpus(20, 8, 29);
  const auto labels = labels_from_feature(corpus, 0);
  ranker::TrainConfig config;
  config.n_trees = 10;
  config.max_depth = 4;
  config.min_leaf_count = 2;
  const auto model = ranker::train_ranker(corpus, labels, config);

  const auto path = testutil::temp_path("roundtrip_model.txt");
  model.save(path);
  const auto loaded = ranker::TreeEnsemble::load(path);
  CHECK(loaded.schema_hash() == model.schema_hash());
  CHECK(loaded.base_score() == model.base_score());
  for (const auto& group : corpus.groups())
    for (const auto& item : group.items)
      CHECK(loaded.predict(item.features) == model.predict(item.features));

  CHECK_THROWS_AS(ranker::TreeEnsemble::load(testutil::temp_path("missing_model.txt")),
                  std::runtime_error);
}

TEST_CASE("cover bookkeeping: parent cover equals the sum of child covers") {
  const auto corpus = monotone_corpus(40, 10, 31);
  const auto labels = labels_from_feature(corpus, 0);
  ranker::TrainConfig config;
  config.n_trees = 8;
  config.max_depth = 4;
  config.min_leaf_count = 2;
  const auto model = ranker::train_ranker(corpus, labels, config);
  for (const auto& tree : model.trees()) {
    CHECK(tree.nodes[0].cover == doctest::Approx(400.0));
    for (const auto& node : tree.nodes) {
      CHECK(node.cover > 0.0);
      if (!node.is_leaf())
        CHECK(node.cover == tree.nodes[node.left].cover + tree.nodes[node.right].cover);
    }
  }
}
