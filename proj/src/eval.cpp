#include "ltrlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "ltrlab/rng.hpp"

namespace ltrlab::eval {

namespace {

double gain_of(double rating, GainType gain) {
  if (rating < 0.0) throw std::invalid_argument("ndcg: negative rating");
  return gain == GainType::kExponential ? std::exp2(rating) - 1.0 : rating;
}

}  // namespace

double dcg_at_k(std::span<const double> ratings, int k, GainType gain) {
  if (k < 1) throw std::invalid_argument("dcg_at_k: k must be >= 1");
  const std::size_t limit = std::min<std::size_t>(ratings.size(), static_cast<std::size_t>(k));
  double dcg = 0.0;
  for (std::size_t i = 0; i < limit; ++i)
    dcg += gain_of(ratings[i], gain) / std::log2(static_cast<double>(i) + 2.0);
  return dcg;
}

std::optional<double> ndcg_at_k(std::span<const double> ratings, int k, GainType gain) {
  if (ratings.empty()) throw std::invalid_argument("ndcg_at_k: empty rating list");
  const double dcg = dcg_at_k(ratings, k, gain);
  std::vector<double> ideal(ratings.begin(), ratings.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg_at_k(ideal, k, gain);
  if (idcg == 0.0) return std::nullopt;
  return dcg / idcg;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Symmetry switch keeps the continued fraction in its fast-converging
  // region.
  if (x > (a + 1.0) / (a + b + 2.0))
    return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);

  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);

  // Modified Lentz evaluation of the standard continued fraction.
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
    double numerator = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + numerator * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + numerator / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;

    numerator = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + numerator * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + numerator / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return front * h / a;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student t: df must be > 0");
  if (!std::isfinite(t)) return 0.0;
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(0.5 * df, 0.5, x);
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided_p(t, df);
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> deltas) {
  TTestResult result;
  result.n = static_cast<int>(deltas.size());
  if (deltas.empty()) throw std::invalid_argument("paired_t_test: no deltas");
  if (deltas.size() < 2) {
    // Degenerate sample: no degrees of freedom, flagged and reported as
    // inconclusive.
    result.zero_variance = true;
    return result;
  }
  const double n = static_cast<double>(deltas.size());
  double mean = 0.0;
  for (double d : deltas) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : deltas) ss += (d - mean) * (d - mean);
  const double var = ss / (n - 1.0);
  if (var == 0.0) {
    result.zero_variance = true;
    result.t = 0.0;
    result.p = 1.0;
    return result;
  }
  result.t = mean / std::sqrt(var / n);
  result.p = student_t_two_sided_p(result.t, n - 1.0);
  return result;
}

EvalReport evaluate_offline(const ranker::TreeEnsemble& baseline, const ranker::TreeEnsemble& variant,
                            const data::Dataset& queries, const synth::JudgeModelParams& judge,
                            int k, std::uint64_t seed) {
  judge.validate();
  if (k < 1) throw std::invalid_argument("evaluate_offline: k must be >= 1");
  if (!queries.has_latent())
    throw std::invalid_argument("evaluate_offline: query set lacks latent truth for judging");

  EvalReport report;
  std::vector<double> deltas;
  for (const auto& group : queries.groups()) {
    const auto order_b = ranker::rank_group(baseline, group, queries.schema());
    const auto order_v = ranker::rank_group(variant, group, queries.schema());
    const std::size_t depth = std::min<std::size_t>(group.items.size(), static_cast<std::size_t>(k));

    // One rating per distinct query-product pair, shared by both models.
    std::unordered_map<std::size_t, double> ratings;
    const std::uint64_t query_seed = derive_seed(seed, group.query.id);
    auto rate = [&](std::size_t item_index) {
      auto it = ratings.find(item_index);
      if (it != ratings.end()) return it->second;
      const auto& item = group.items[item_index];
      const double rating = static_cast<double>(
          synth::simulate_judgment(item.latent->rho, judge, derive_seed(query_seed, item.product_id)));
      ratings.emplace(item_index, rating);
      return rating;
    };

    std::vector<double> rated_b, rated_v;
    rated_b.reserve(depth);
    rated_v.reserve(depth);
    for (std::size_t pos = 0; pos < depth; ++pos) {
      rated_b.push_back(rate(order_b[pos]));
      rated_v.push_back(rate(order_v[pos]));
    }

    const auto ndcg_b = ndcg_at_k(rated_b, k);
    const auto ndcg_v = ndcg_at_k(rated_v, k);
    if (!ndcg_b || !ndcg_v) {
      ++report.n_excluded;
      continue;
    }
    report.per_query.push_back({group.query.id, *ndcg_b, *ndcg_v});
    report.mean_baseline += *ndcg_b;
    report.mean_variant += *ndcg_v;
    deltas.push_back(*ndcg_v - *ndcg_b);
  }

  report.n_queries = static_cast<int>(report.per_query.size());
  if (report.n_queries == 0) throw std::runtime_error("evaluate_offline: zero usable queries");
  report.mean_baseline /= report.n_queries;
  report.mean_variant /= report.n_queries;
  report.pct_change = 100.0 * (report.mean_variant - report.mean_baseline) / report.mean_baseline;

  const auto test = paired_t_test(deltas);
  report.t = test.t;
  report.p = test.p;
  report.zero_variance = test.zero_variance;
  return report;
}

}  // namespace ltrlab::eval
