#include "ltrlab/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "ltrlab/rng.hpp"

namespace ltrlab::synth {

namespace {

// Beta mixture for latent content relevance, skewed toward low/mid so
// the top of the scale stays sparsely populated.
struct MixtureComponent {
  double weight;
  double a;
  double b;
};
constexpr MixtureComponent kRhoMixture[] = {
    {0.45, 1.8, 6.0},
    {0.40, 5.0, 5.0},
    {0.15, 8.0, 3.0},
};

double sample_rho(Rng& rng) {
  double u = rng.uniform();
  for (const auto& component : kRhoMixture) {
    if (u < component.weight) return rng.beta(component.a, component.b);
    u -= component.weight;
  }
  return rng.beta(kRhoMixture[2].a, kRhoMixture[2].b);
}

double sample_pi(Rng& rng) { return rng.beta(1.1, 1.4); }

// Exponents of the per-feature monotone maps rho^p; cycled when the
// config asks for more sparse features than the table holds.
constexpr double kSparseExponents[] = {0.5, 0.8, 1.0, 1.4, 1.9, 2.5, 3.2, 4.0};

double funnel_stage(double slope, double intensity) { return -std::expm1(-slope * intensity); }

// Engagement intensity: dominated by the exogenous propensity pi, with
// content relevance as a secondary multiplier. Strictly increasing in
// both latents and equal to 1 at (1, 1).
double funnel_intensity(double rho, double pi) { return pi * (0.25 + 0.75 * rho); }

}  // namespace

void GenConfig::validate() const {
  if (n_queries < 1) throw std::invalid_argument("GenConfig: n_queries must be >= 1");
  if (items_per_group < 2) throw std::invalid_argument("GenConfig: items_per_group must be >= 2");
  if (n_sparse_features < 1) throw std::invalid_argument("GenConfig: n_sparse_features must be >= 1");
  for (double noise : {sparse_noise, xe_noise, engagement_feature_noise, logging_noise})
    if (!(noise >= 0.0) || !std::isfinite(noise))
      throw std::invalid_argument("GenConfig: noise levels must be finite and >= 0");
  if (!(head_weight >= 0.0 && torso_weight >= 0.0 && tail_weight >= 0.0) ||
      head_weight + torso_weight + tail_weight <= 0.0)
    throw std::invalid_argument("GenConfig: segment weights must be non-negative and not all zero");
}

void UserModelParams::validate() const {
  if (!(persistence > 0.0 && persistence < 1.0))
    throw std::invalid_argument("UserModelParams: persistence must be in (0, 1)");
  for (double slope : {click_slope, atc_slope, order_slope})
    if (!(slope >= 0.0) || !std::isfinite(slope))
      throw std::invalid_argument("UserModelParams: slopes must be finite and >= 0");
}

double UserModelParams::click_prob(double rho, double pi) const {
  return funnel_stage(click_slope, funnel_intensity(rho, pi));
}

double UserModelParams::atc_prob(double rho, double pi) const {
  return funnel_stage(atc_slope, funnel_intensity(rho, pi));
}

double UserModelParams::order_prob(double rho, double pi) const {
  return funnel_stage(order_slope, funnel_intensity(rho, pi));
}

void JudgeModelParams::validate() const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0))
      throw std::invalid_argument("JudgeModelParams: thresholds must lie in (0, 1)");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw std::invalid_argument("JudgeModelParams: thresholds must be strictly increasing");
  }
  if (!(judge_noise >= 0.0) || !std::isfinite(judge_noise))
    throw std::invalid_argument("JudgeModelParams: judge_noise must be finite and >= 0");
}

std::vector<data::EngagementOutcome> simulate_session(std::span<const SessionItem> ranking,
                                                      const UserModelParams& params,
                                                      std::uint64_t seed) {
  params.validate();
  if (ranking.empty()) throw std::invalid_argument("simulate_session: empty ranking");

  Rng rng(seed);
  std::vector<data::EngagementOutcome> outcomes(ranking.size(), data::EngagementOutcome::kNonEngaged);
  for (std::size_t pos = 0; pos < ranking.size(); ++pos) {
    // Continuation happens independently of engagement, so position i is
    // examined with probability persistence^i exactly.
    if (pos > 0 && !rng.bernoulli(params.persistence)) break;
    const auto& item = ranking[pos];
    if (!rng.bernoulli(params.click_prob(item.rho, item.pi))) continue;
    outcomes[pos] = data::EngagementOutcome::kClicked;
    if (!rng.bernoulli(params.atc_prob(item.rho, item.pi))) continue;
    outcomes[pos] = data::EngagementOutcome::kAddedToCart;
    if (rng.bernoulli(params.order_prob(item.rho, item.pi)))
      outcomes[pos] = data::EngagementOutcome::kOrdered;
  }
  return outcomes;
}

int simulate_judgment(double rho, const JudgeModelParams& params, std::uint64_t seed) {
  params.validate();
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::domain_error("simulate_judgment: rho outside [0, 1]");
  Rng rng(seed);
  const double noisy = std::clamp(rho + rng.normal(0.0, params.judge_noise), 0.0, 1.0);
  int rating = 0;
  for (double threshold : params.thresholds)
    if (noisy >= threshold) ++rating;
  return rating;
}

data::Dataset generate_corpus(const GenConfig& config, const UserModelParams& user) {
  config.validate();
  user.validate();

  std::vector<data::FeatureField> fields;
  for (int f = 0; f < config.n_sparse_features; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "sparse_%d", f);
    fields.push_back({name, data::FeatureChannel::kSparseContent});
  }
  fields.push_back({"xe_score", data::FeatureChannel::kXeDense});
  fields.push_back({"xe_score_aux", data::FeatureChannel::kXeDense});
  fields.push_back({"log_eng", data::FeatureChannel::kEngagement});
  fields.push_back({"log_rate", data::FeatureChannel::kEngagement});
  fields.push_back({"log_ctr", data::FeatureChannel::kEngagement});
  fields.push_back({"log_exam", data::FeatureChannel::kEngagement});
  data::FeatureSchema schema{std::move(fields)};

  const double segment_total = config.head_weight + config.torso_weight + config.tail_weight;
  const std::size_t n_items = static_cast<std::size_t>(config.items_per_group);

  std::vector<data::QueryGroup> groups;
  groups.reserve(config.n_queries);
  for (int g = 0; g < config.n_queries; ++g) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(g)));

    data::QueryGroup group;
    char qid[24];
    std::snprintf(qid, sizeof(qid), "q%05d", g);
    group.query.id = qid;
    const double seg_draw = rng.uniform(0.0, segment_total);
    group.query.segment = seg_draw < config.head_weight                          ? "head"
                          : seg_draw < config.head_weight + config.torso_weight ? "torso"
                                                                                 : "tail";

    std::vector<double> rho(n_items), pi(n_items), logging_score(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
      rho[i] = sample_rho(rng);
      pi[i] = sample_pi(rng);
      logging_score[i] = 0.6 * rho[i] + 0.4 * pi[i] + rng.normal(0.0, config.logging_noise);
    }

    // The logging policy ranks by a noisy relevance proxy; its
    // positions stamp position bias onto the engagement features and
    // drive the outcome-producing session.
    std::vector<std::size_t> log_order(n_items);
    std::iota(log_order.begin(), log_order.end(), 0u);
    std::sort(log_order.begin(), log_order.end(), [&](std::size_t a, std::size_t b) {
      if (logging_score[a] != logging_score[b]) return logging_score[a] > logging_score[b];
      return a < b;
    });
    std::vector<std::size_t> log_pos(n_items);
    for (std::size_t p = 0; p < n_items; ++p) log_pos[log_order[p]] = p;

    std::vector<SessionItem> logged(n_items);
    for (std::size_t p = 0; p < n_items; ++p) logged[p] = {rho[log_order[p]], pi[log_order[p]]};
    const auto session =
        simulate_session(logged, user, derive_seed(config.seed, fnv1a_hash(group.query.id) ^ 0x5e5510aULL));

    group.items.reserve(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
      data::Item item;
      char pid[32];
      std::snprintf(pid, sizeof(pid), "p%05d_%03zu", g, i);
      item.product_id = pid;
      item.latent = data::LatentTruth{rho[i], pi[i]};
      item.outcome = session[log_pos[i]];

      item.features.reserve(schema.size());
      for (int f = 0; f < config.n_sparse_features; ++f) {
        const double exponent = kSparseExponents[f % std::size(kSparseExponents)];
        item.features.push_back(std::pow(rho[i], exponent) + rng.normal(0.0, config.sparse_noise));
      }
      // Cross-encoder channel: a primary dense relevance score and a
      // noisier auxiliary, as a production stack would emit several
      // related semantic scores.
      item.features.push_back(rho[i] + rng.normal(0.0, config.xe_noise));
      item.features.push_back(rho[i] + rng.normal(0.0, 1.8 * config.xe_noise));

      // Historical aggregates from the logging pass, graded in
      // fidelity. log_eng is a composite expected-grade estimate,
      // log_rate the position-free funnel propensity, log_ctr a
      // click-level aggregate, log_exam the raw examination share of
      // the logged position.
      const double exam = std::pow(user.persistence, static_cast<double>(log_pos[i]));
      const double p_click = user.click_prob(rho[i], pi[i]);
      const double p_atc = user.atc_prob(rho[i], pi[i]);
      const double p_order = user.order_prob(rho[i], pi[i]);
      const double funnel_rate = p_click * (1.0 + p_atc * (1.0 + p_order));
      item.features.push_back(exam * funnel_rate +
                              rng.normal(0.0, 2.0 * config.engagement_feature_noise));
      item.features.push_back(funnel_rate + rng.normal(0.0, config.engagement_feature_noise));
      item.features.push_back(exam * p_click +
                              rng.normal(0.0, 3.0 * config.engagement_feature_noise));
      item.features.push_back(exam);
      group.items.push_back(std::move(item));
    }
    groups.push_back(std::move(group));
  }

  return data::Dataset{std::move(schema), std::move(groups)};
}

}  // namespace ltrlab::synth
