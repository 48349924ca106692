#pragma once

namespace ltrlab::labels {

// Shape parameters of the polarizing transform applied to content
// relevance scores: sigma(c) = 1 / (1 + exp(-alpha * (c - beta))).
// alpha controls steepness, beta the center.
struct SigmoidParams {
  double alpha = 12.0;
  double beta = 0.5;

  void validate() const;
};

// Evaluates the transform at c in [0, 1]. Throws std::domain_error for
// c outside the unit interval.
double sigmoid_transform(double c, const SigmoidParams& params);

// Content-score intervals induced by where the transform's gradient
// crosses 1. The middle interval (c1, c2) is where the transform
// magnifies content differences; outside it the curve is flat and
// engagement dominates the label.
struct IntervalBounds {
  double c1 = 0.0;
  double c2 = 0.0;
  // True when the gradient never exceeds 1 (alpha <= 4) and the middle
  // interval is empty.
  bool degenerate = false;
};

// Solves alpha * s(c) * (1 - s(c)) = 1 for the two gradient-1 crossings.
// Solutions are clamped to [0, 1] since content scores live there.
IntervalBounds compute_intervals(const SigmoidParams& params);

}  // namespace ltrlab::labels
