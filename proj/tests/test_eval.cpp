#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ltrlab/eval.hpp"
#include "ltrlab/rng.hpp"
#include "testutil.hpp"

using namespace ltrlab;

TEST_CASE("ndcg hand-computed example") {
  // Ranked ratings (2, 3) at k=2: DCG = 3 + 7/log2(3), IDCG = 7 + 3/log2(3).
  const auto value = eval::ndcg_at_k(std::vector<double>{2.0, 3.0}, 2);
  REQUIRE(value.has_value());
  const double dcg = 3.0 + 7.0 / std::log2(3.0);
  const double idcg = 7.0 + 3.0 / std::log2(3.0);
  CHECK(*value == doctest::Approx(dcg / idcg).epsilon(1e-12));
  CHECK(*value == doctest::Approx(0.83398).epsilon(1e-5));
}

TEST_CASE("ideal ordering scores exactly 1") {
  CHECK(*eval::ndcg_at_k(std::vector<double>{4.0, 3.0, 2.0, 1.0, 0.0}, 5) == 1.0);
  CHECK(*eval::ndcg_at_k(std::vector<double>{7.0, 7.0, 7.0}, 3) == 1.0);
}

TEST_CASE("all-zero ratings are undefined, negatives rejected") {
  CHECK_FALSE(eval::ndcg_at_k(std::vector<double>{0.0, 0.0, 0.0}, 3).has_value());
  CHECK_THROWS_AS(eval::ndcg_at_k(std::vector<double>{1.0, -0.5}, 2), std::invalid_argument);
  CHECK_THROWS_AS(eval::ndcg_at_k(std::vector<double>{}, 2), std::invalid_argument);
}

TEST_CASE("ndcg matches the reference oracle on all 120 permutations of 5 ratings") {
  std::vector<double> ratings{0.0, 1.0, 2.0, 3.0, 4.0};
  std::sort(ratings.begin(), ratings.end());
  const double ideal = testutil::reference_dcg({4.0, 3.0, 2.0, 1.0, 0.0}, 5, true);
  int count = 0;
  do {
    const auto value = eval::ndcg_at_k(ratings, 5);
    REQUIRE(value.has_value());
    const double expected = testutil::reference_dcg(ratings, 5, true) / ideal;
    CHECK(*value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(*value <= 1.0 + 1e-12);
    // NDCG is 1 only for the gain-sorted ordering (ratings distinct here).
    const bool sorted = std::is_sorted(ratings.begin(), ratings.end(), std::greater<>());
    CHECK((*value == 1.0) == sorted);
    ++count;
  } while (std::next_permutation(ratings.begin(), ratings.end()));
  CHECK(count == 120);
}

TEST_CASE("truncation and identity gain behave") {
  const std::vector<double> ratings{1.0, 3.0, 2.0};
  // k=1 sees only the first rating.
  const double expected1 = 1.0 / 3.0;  // gain 1 vs ideal gain 3 at position 1
  CHECK(*eval::ndcg_at_k(ratings, 1, eval::GainType::kIdentity) ==
        doctest::Approx(expected1).epsilon(1e-12));
  // Identity gain differs from exponential for these ratings.
  CHECK(*eval::ndcg_at_k(ratings, 3, eval::GainType::kIdentity) !=
        *eval::ndcg_at_k(ratings, 3, eval::GainType::kExponential));
}

TEST_CASE("swapping a higher-rated item into an earlier position never lowers ndcg") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(6);
    std::vector<double> ratings(n);
    for (auto& r : ratings) r = static_cast<double>(rng.uniform_index(5));
    if (std::all_of(ratings.begin(), ratings.end(), [](double r) { return r == 0.0; })) continue;
    const int k = 1 + static_cast<int>(rng.uniform_index(n));
    const auto before = eval::ndcg_at_k(ratings, k);
    const std::size_t i = rng.uniform_index(n - 1);
    std::size_t j = i + 1 + rng.uniform_index(n - i - 1);
    if (ratings[j] > ratings[i]) {
      std::vector<double> swapped = ratings;
      std::swap(swapped[i], swapped[j]);
      const auto after = eval::ndcg_at_k(swapped, k);
      REQUIRE(before.has_value());
      REQUIRE(after.has_value());
      CHECK(*after >= *before - 1e-12);
    }
  }
}

TEST_CASE("incomplete-beta t CDF matches numeric integration of the density") {
  for (const double df : {1.0, 5.0, 30.0, 200.0}) {
    const double norm =
        std::exp(std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df)) / std::sqrt(df * M_PI);
    auto density = [&](double u) {
      return norm * std::pow(1.0 + u * u / df, -0.5 * (df + 1.0));
    };
    for (const double t : {0.0, 0.3, 1.0, 2.5, 5.0}) {
      const double integral = testutil::adaptive_simpson(density, 0.0, t, 1e-13);
      const double expected = 0.5 + integral;
      CHECK(std::fabs(eval::student_t_cdf(t, df) - expected) < 1e-8);
      CHECK(std::fabs(eval::student_t_cdf(-t, df) - (1.0 - expected)) < 1e-8);
    }
  }
}

TEST_CASE("paired t-test degenerate cases") {
  const auto all_zero = eval::paired_t_test(std::vector<double>(10, 0.0));
  CHECK(all_zero.zero_variance);
  CHECK(all_zero.p == 1.0);
  CHECK(all_zero.t == 0.0);

  const auto symmetric = eval::paired_t_test(std::vector<double>{1.0, -1.0});
  CHECK(symmetric.t == 0.0);
  CHECK(symmetric.p == doctest::Approx(1.0).epsilon(1e-12));

  const auto single = eval::paired_t_test(std::vector<double>{0.7});
  CHECK(single.zero_variance);
  CHECK(single.p == 1.0);

  CHECK_THROWS_AS(eval::paired_t_test(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("paired t-test matches an independent CDF evaluation on gaussian draws") {
  Rng rng(99);
  std::vector<double> deltas(100);
  for (auto& d : deltas) d = rng.normal(0.5, 1.0);
  const auto result = eval::paired_t_test(deltas);

  // Independent recomputation: t statistic from first principles, p via
  // numeric integration of the t density.
  const double n = static_cast<double>(deltas.size());
  const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : deltas) ss += (d - mean) * (d - mean);
  const double t_ref = mean / std::sqrt(ss / (n - 1.0) / n);
  CHECK(result.t == doctest::Approx(t_ref).epsilon(1e-12));

  const double df = n - 1.0;
  const double norm =
      std::exp(std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df)) / std::sqrt(df * M_PI);
  auto density = [&](double u) { return norm * std::pow(1.0 + u * u / df, -0.5 * (df + 1.0)); };
  const double tail = 0.5 - testutil::adaptive_simpson(density, 0.0, std::fabs(t_ref), 1e-13);
  CHECK(std::fabs(result.p - 2.0 * tail) < 1e-6);
}

TEST_CASE("t-test symmetry under negation") {
  Rng rng(7);
  std::vector<double> deltas(40);
  for (auto& d : deltas) d = rng.normal(0.2, 1.0);
  std::vector<double> negated(deltas.size());
  std::transform(deltas.begin(), deltas.end(), negated.begin(), [](double d) { return -d; });
  const auto a = eval::paired_t_test(deltas);
  const auto b = eval::paired_t_test(negated);
  CHECK(a.t == doctest::Approx(-b.t).epsilon(1e-12));
  CHECK(a.p == doctest::Approx(b.p).epsilon(1e-12));
}

namespace {

// Small evaluation pool with a noiseless xe feature (equal to rho).
data::Dataset oracle_pool(int n_queries, std::uint64_t seed) {
  synth::GenConfig gen;
  gen.n_queries = n_queries;
  gen.items_per_group = 15;
  gen.n_sparse_features = 2;
  gen.xe_noise = 0.0;
  gen.seed = seed;
  return synth::generate_corpus(gen, synth::UserModelParams{});
}

}  // namespace

TEST_CASE("evaluate_offline: identical models give zero change and p = 1") {
  const auto pool = oracle_pool(30, 12);
  const std::size_t xe = *pool.schema().index_of("xe_score");
  const auto model = testutil::staircase_ensemble(pool.schema().size(), xe, pool.schema().hash(), 7, true);
  const auto report = eval::evaluate_offline(model, model, pool, synth::JudgeModelParams{}, 10, 5);
  CHECK(report.pct_change == 0.0);
  CHECK(report.p == 1.0);
  CHECK(report.zero_variance);
}

TEST_CASE("evaluate_offline: rho oracle beats a score-free baseline") {
  const auto pool = oracle_pool(200, 13);
  const std::size_t xe = *pool.schema().index_of("xe_score");
  const auto oracle =
      testutil::staircase_ensemble(pool.schema().size(), xe, pool.schema().hash(), 8, true);
  // No trees: constant scores, ranking falls back to product-id order,
  // which is independent of rho.
  const ranker::TreeEnsemble indifferent(0.0, 1.0, pool.schema().hash(), pool.schema().size());
  synth::JudgeModelParams noiseless;
  noiseless.judge_noise = 0.0;
  const auto report = eval::evaluate_offline(indifferent, oracle, pool, noiseless, 10, 5);
  CHECK(report.pct_change > 0.0);
  CHECK(report.p < 0.01);
}

TEST_CASE("evaluate_offline with zero usable queries reports the error") {
  // Every item far below the lowest judge threshold: all ratings are 0,
  // both NDCGs are undefined, every query is excluded.
  data::FeatureSchema schema{{{"f0", data::FeatureChannel::kXeDense}}};
  std::vector<data::QueryGroup> groups;
  for (int g = 0; g < 3; ++g) {
    data::QueryGroup group;
    group.query = {"q" + std::to_string(g), "head"};
    for (int i = 0; i < 4; ++i) {
      data::Item item;
      item.product_id = "p" + std::to_string(g) + "_" + std::to_string(i);
      item.features = {0.01 * i};
      item.latent = data::LatentTruth{0.01, 0.5};
      group.items.push_back(std::move(item));
    }
    groups.push_back(std::move(group));
  }
  const data::Dataset pool{schema, std::move(groups)};
  const auto model = testutil::staircase_ensemble(1, 0, schema.hash(), 4, true);
  synth::JudgeModelParams noiseless;
  noiseless.judge_noise = 0.0;
  CHECK_THROWS_WITH_AS(eval::evaluate_offline(model, model, pool, noiseless, 10, 1),
                       doctest::Contains("zero usable"), std::runtime_error);
}

TEST_CASE("evaluate_offline rates each query-product pair once") {
  const auto pool = oracle_pool(40, 14);
  const std::size_t xe = *pool.schema().index_of("xe_score");
  const auto a = testutil::staircase_ensemble(pool.schema().size(), xe, pool.schema().hash(), 7, true);
  const auto b = testutil::staircase_ensemble(pool.schema().size(), xe, pool.schema().hash(), 7, false);

  // Swapping which model is "baseline" must mirror the per-query values
  // exactly: the pair ratings cannot depend on which model surfaced them.
  const auto forward = eval::evaluate_offline(a, b, pool, synth::JudgeModelParams{}, 10, 77);
  const auto backward = eval::evaluate_offline(b, a, pool, synth::JudgeModelParams{}, 10, 77);
  REQUIRE(forward.per_query.size() == backward.per_query.size());
  for (std::size_t i = 0; i < forward.per_query.size(); ++i) {
    CHECK(forward.per_query[i].ndcg_baseline == backward.per_query[i].ndcg_variant);
    CHECK(forward.per_query[i].ndcg_variant == backward.per_query[i].ndcg_baseline);
  }
}
