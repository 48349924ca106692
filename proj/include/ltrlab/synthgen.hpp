#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ltrlab/datamodel.hpp"

namespace ltrlab::synth {

// Shape of the generated corpus. Content relevance rho is drawn from a
// Beta mixture skewed toward low/mid values so that genuinely
// high-relevance items are scarce; engagement propensity pi is drawn
// independently of rho.
struct GenConfig {
  int n_queries = 500;
  int items_per_group = 30;
  int n_sparse_features = 6;
  double sparse_noise = 0.50;
  double xe_noise = 0.22;  // should stay below sparse_noise
  double engagement_feature_noise = 0.02;
  double logging_noise = 0.15;  // score noise of the logging ranking pass
  double head_weight = 0.3;
  double torso_weight = 0.4;
  double tail_weight = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
};

// Cascade browsing model: position i is examined with probability
// persistence^i; an examined item advances through the
// click -> add-to-cart -> order funnel with stage probabilities
// 1 - exp(-slope * rho * pi).
struct UserModelParams {
  double persistence = 0.85;
  double click_slope = 8.0;
  double atc_slope = 5.0;
  double order_slope = 3.0;

  void validate() const;

  double click_prob(double rho, double pi) const;
  double atc_prob(double rho, double pi) const;    // conditional on click
  double order_prob(double rho, double pi) const;  // conditional on add-to-cart
};

// Judge simulator: gaussian noise on rho, clamp to [0, 1], bucket
// against four increasing thresholds into a 5-point rating.
struct JudgeModelParams {
  std::array<double, 4> thresholds{0.2, 0.4, 0.6, 0.8};
  double judge_noise = 0.03;

  void validate() const;
};

data::Dataset generate_corpus(const GenConfig& config, const UserModelParams& user);

struct SessionItem {
  double rho = 0.0;
  double pi = 0.0;
};

// Simulates one browsing session over a ranked list; unexamined items
// come back as NonEngaged. Pure function of (inputs, seed).
std::vector<data::EngagementOutcome> simulate_session(std::span<const SessionItem> ranking,
                                                      const UserModelParams& params,
                                                      std::uint64_t seed);

// 5-point rating in {0..4}. Pure function of (inputs, seed).
int simulate_judgment(double rho, const JudgeModelParams& params, std::uint64_t seed);

}  // namespace ltrlab::synth
