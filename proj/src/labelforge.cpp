#include "ltrlab/labelforge.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace ltrlab::labels {

namespace {

constexpr double kProbClamp = 1e-12;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

double cross_entropy(double r, double r_hat) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::domain_error("cross_entropy: r outside [0, 1]");
  if (!(r_hat > 0.0 && r_hat < 1.0)) throw std::domain_error("cross_entropy: r_hat outside (0, 1)");
  return -r * std::log(r_hat) - (1.0 - r) * std::log1p(-r_hat);
}

double EngagementGrading::grade(data::EngagementOutcome outcome) const {
  switch (outcome) {
    case data::EngagementOutcome::kNonEngaged: return non_engaged;
    case data::EngagementOutcome::kClicked: return clicked;
    case data::EngagementOutcome::kAddedToCart: return added_to_cart;
    case data::EngagementOutcome::kOrdered: return ordered;
  }
  throw std::logic_error("unknown EngagementOutcome");
}

void EngagementGrading::validate() const {
  if (!(non_engaged > 0.0 && clicked > non_engaged && added_to_cart > clicked &&
        ordered > added_to_cart))
    throw std::invalid_argument(
        "EngagementGrading: grades must be positive and strictly increasing along the outcome order");
}

TrainingLabel compose_label(double content, data::EngagementOutcome outcome,
                            const EngagementGrading& grading,
                            const std::optional<SigmoidParams>& transform) {
  grading.validate();
  if (!(content >= 0.0 && content <= 1.0))
    throw std::domain_error("compose_label: content score outside [0, 1]");
  TrainingLabel label;
  label.content = content;
  label.transformed_content = transform ? sigmoid_transform(content, *transform) : content;
  label.engagement = grading.grade(outcome);
  label.y = label.transformed_content * label.engagement;
  return label;
}

std::vector<std::vector<TrainingLabel>> label_dataset(const data::Dataset& dataset,
                                                      std::span<const double> content_scores,
                                                      const EngagementGrading& grading,
                                                      const std::optional<SigmoidParams>& transform) {
  grading.validate();
  if (content_scores.size() != dataset.total_items())
    throw std::invalid_argument("label_dataset: content score count mismatch");

  std::vector<std::vector<TrainingLabel>> out;
  out.reserve(dataset.groups().size());
  std::size_t cursor = 0;
  for (const auto& group : dataset.groups()) {
    std::vector<TrainingLabel> labels;
    labels.reserve(group.items.size());
    double max_grade = 0.0;
    for (const auto& item : group.items) max_grade = std::max(max_grade, grading.grade(item.outcome));
    for (const auto& item : group.items) {
      TrainingLabel label = compose_label(content_scores[cursor++], item.outcome, grading, transform);
      if (grading.normalize_within_group) {
        label.engagement /= max_grade;
        label.y = label.transformed_content * label.engagement;
      }
      labels.push_back(label);
    }
    out.push_back(std::move(labels));
  }
  return out;
}

void ScorerConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("ScorerConfig: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("ScorerConfig: learning_rate must be > 0");
}

namespace {

double mean_loss(const std::vector<JudgedExample>& judged, const std::vector<double>& weights,
                 double bias) {
  double total = 0.0;
  for (const auto& example : judged) {
    double z = bias;
    for (std::size_t f = 0; f < weights.size(); ++f) z += weights[f] * example.features[f];
    total += cross_entropy(example.r, clamp_prob(logistic(z)));
  }
  return total / static_cast<double>(judged.size());
}

}  // namespace

ContentScorerModel train_content_scorer(const std::vector<JudgedExample>& judged,
                                        const ScorerConfig& config) {
  config.validate();
  if (judged.size() < 2) throw std::invalid_argument("train_content_scorer: need >= 2 examples");
  const std::size_t dim = judged.front().features.size();
  double r_sum = 0.0;
  bool has_low = false, has_high = false;
  for (const auto& example : judged) {
    if (example.features.size() != dim)
      throw std::invalid_argument("train_content_scorer: inconsistent feature width");
    if (!(example.r >= 0.0 && example.r <= 1.0))
      throw std::invalid_argument("train_content_scorer: target outside [0, 1]");
    r_sum += example.r;
    (example.r < 0.5 ? has_low : has_high) = true;
  }

  ContentScorerModel model;
  model.weights.assign(dim, 0.0);

  if (!has_low || !has_high) {
    // Single class: nothing separable to learn. Fall back to the
    // constant maximum-likelihood predictor.
    const double mean_r = clamp_prob(r_sum / static_cast<double>(judged.size()));
    model.bias = std::log(mean_r / (1.0 - mean_r));
    model.degenerate = true;
    model.final_loss = mean_loss(judged, model.weights, model.bias);
    model.loss_history.push_back(model.final_loss);
    std::cerr << "train_content_scorer: warning: single-class targets, returning constant model\n";
    return model;
  }

  const double n = static_cast<double>(judged.size());
  double loss = mean_loss(judged, model.weights, model.bias);
  model.loss_history.push_back(loss);
  double step = config.learning_rate;

  std::vector<double> grad_w(dim);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    double grad_b = 0.0;
    for (const auto& example : judged) {
      double z = model.bias;
      for (std::size_t f = 0; f < dim; ++f) z += model.weights[f] * example.features[f];
      const double residual = clamp_prob(logistic(z)) - example.r;
      for (std::size_t f = 0; f < dim; ++f) grad_w[f] += residual * example.features[f];
      grad_b += residual;
    }
    for (double& g : grad_w) g /= n;
    grad_b /= n;

    // Backtracking keeps the epoch-to-epoch loss non-increasing.
    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      std::vector<double> trial_w(dim);
      for (std::size_t f = 0; f < dim; ++f) trial_w[f] = model.weights[f] - step * grad_w[f];
      const double trial_b = model.bias - step * grad_b;
      const double trial_loss = mean_loss(judged, trial_w, trial_b);
      if (trial_loss <= loss) {
        model.weights = std::move(trial_w);
        model.bias = trial_b;
        loss = trial_loss;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    model.epochs_run = epoch + 1;
    model.loss_history.push_back(loss);
    if (!accepted) break;  // step underflow; converged
  }
  model.final_loss = loss;
  return model;
}

double predict_content(const ContentScorerModel& model, std::span<const double> features) {
  if (features.size() != model.weights.size())
    throw std::invalid_argument("predict_content: feature vector length mismatch");
  double z = model.bias;
  for (std::size_t f = 0; f < features.size(); ++f) z += model.weights[f] * features[f];
  return clamp_prob(logistic(z));
}

}  // namespace ltrlab::labels
