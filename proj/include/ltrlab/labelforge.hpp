#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ltrlab/datamodel.hpp"
#include "ltrlab/sigmoid.hpp"

namespace ltrlab::labels {

// Binary cross-entropy between a relevance target r in [0, 1] and a
// prediction r_hat in the open interval (0, 1).
double cross_entropy(double r, double r_hat);

// Grade values per engagement outcome. NonEngaged maps to 1 rather
// than 0: a zero grade would erase content information from the label
// of every unengaged item. normalize_within_group divides grades by
// the maximum grade present in the group before composing labels.
struct EngagementGrading {
  double non_engaged = 1.0;
  double clicked = 2.0;
  double added_to_cart = 4.0;
  double ordered = 8.0;
  bool normalize_within_group = false;

  double grade(data::EngagementOutcome outcome) const;
  void validate() const;
};

// The composed training label y = sigma(C) * E together with its
// factors, kept so the factorization can be audited exactly.
struct TrainingLabel {
  double y = 0.0;
  double content = 0.0;              // C before any transform
  double transformed_content = 0.0;  // sigma(C), or C when no transform
  double engagement = 0.0;           // E (post-normalization when enabled)
};

TrainingLabel compose_label(double content, data::EngagementOutcome outcome,
                            const EngagementGrading& grading,
                            const std::optional<SigmoidParams>& transform);

// Labels for a whole corpus; content_scores is flattened in group/item
// order. Handles within-group grade normalization when configured.
std::vector<std::vector<TrainingLabel>> label_dataset(const data::Dataset& dataset,
                                                      std::span<const double> content_scores,
                                                      const EngagementGrading& grading,
                                                      const std::optional<SigmoidParams>& transform);

struct ScorerConfig {
  int epochs = 400;
  double learning_rate = 2.0;

  void validate() const;
};

struct JudgedExample {
  std::vector<double> features;  // restricted to content channels
  double r = 0.0;                // judged relevance in [0, 1]
};

// Single-layer scorer with a sigmoid link, trained by full-batch
// gradient descent on the mean cross-entropy; the step is backtracked
// whenever it would increase the loss, so the recorded loss history is
// non-increasing.
struct ContentScorerModel {
  std::vector<double> weights;
  double bias = 0.0;
  bool degenerate = false;  // single-class input; constant output
  int epochs_run = 0;
  double final_loss = 0.0;
  std::vector<double> loss_history;
};

ContentScorerModel train_content_scorer(const std::vector<JudgedExample>& judged,
                                        const ScorerConfig& config);

// Deterministic score in (0, 1); throws on feature-length mismatch.
double predict_content(const ContentScorerModel& model, std::span<const double> features);

}  // namespace ltrlab::labels
