#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltrlab/datamodel.hpp"
#include "ltrlab/ranker.hpp"
#include "ltrlab/synthgen.hpp"

namespace ltrlab::eval {

enum class GainType {
  kExponential,  // 2^r - 1, the convention for judged 5-point ratings
  kIdentity,     // raw label, used for training-side NDCG factors
};

// NDCG@k of a list whose ratings are given in ranked order, with
// discount 1/log2(i + 1) at 1-based position i. Returns nullopt when
// the ideal DCG is zero (all-zero gains), which callers must treat as
// "undefined" rather than 0 or 1.
std::optional<double> ndcg_at_k(std::span<const double> ratings_in_ranked_order, int k,
                                GainType gain = GainType::kExponential);

double dcg_at_k(std::span<const double> ratings_in_ranked_order, int k,
                GainType gain = GainType::kExponential);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int n = 0;
  // Set when the deltas had no variance (or n < 2); p is 1 by convention.
  bool zero_variance = false;
};

// Two-sided paired t-test on per-unit differences.
TTestResult paired_t_test(std::span<const double> deltas);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);
// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);
double student_t_two_sided_p(double t, double df);

struct QueryEval {
  std::string query_id;
  double ndcg_baseline = 0.0;
  double ndcg_variant = 0.0;
};

struct EvalReport {
  std::vector<QueryEval> per_query;
  double mean_baseline = 0.0;
  double mean_variant = 0.0;
  double pct_change = 0.0;
  double t = 0.0;
  double p = 1.0;
  bool zero_variance = false;
  int n_queries = 0;   // usable (defined) queries
  int n_excluded = 0;  // dropped for undefined NDCG
};

// Offline protocol: rank every query with both models, pool the top-k
// of each, rate each distinct query-product pair once with the judge
// simulator, score NDCG@k per model, and run a paired t-test on the
// per-query differences. Queries must carry latent truth (the judge
// rates against rho).
EvalReport evaluate_offline(const ranker::TreeEnsemble& baseline, const ranker::TreeEnsemble& variant,
                            const data::Dataset& queries, const synth::JudgeModelParams& judge,
                            int k, std::uint64_t seed);

}  // namespace ltrlab::eval
