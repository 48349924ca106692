#pragma once

#include <span>
#include <vector>

#include "ltrlab/ranker.hpp"

namespace ltrlab::explain {

// Per-feature attribution for one instance. Local accuracy holds:
// base_value + sum(phi) equals the ensemble prediction.
struct Attribution {
  std::vector<double> phi;
  double base_value = 0.0;
};

// Exact Shapley attribution of the cover-proportional conditional
// expectation game: features in the coalition follow x's path, the
// rest split proportionally to node cover. Per-tree attributions are
// summed across boosting rounds and scaled by the learning rate.
Attribution tree_shap(const ranker::TreeEnsemble& ensemble, std::span<const double> x);

// Subset-enumeration oracle over the same value function. Restricted
// to ensembles splitting on at most max_active distinct features.
Attribution brute_force_shapley(const ranker::TreeEnsemble& ensemble, std::span<const double> x,
                                int max_active = 12);

struct ImportanceReport {
  std::vector<double> mean_abs_phi;  // per feature
  std::vector<int> rank;             // 1 = most important; ties by feature index
};

ImportanceReport feature_importance(const ranker::TreeEnsemble& ensemble,
                                    const std::vector<std::vector<double>>& sample);

}  // namespace ltrlab::explain
