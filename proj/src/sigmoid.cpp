#include "ltrlab/sigmoid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ltrlab::labels {

void SigmoidParams::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("SigmoidParams: alpha must be > 0");
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("SigmoidParams: beta must be in (0, 1)");
}

double sigmoid_transform(double c, const SigmoidParams& params) {
  params.validate();
  if (!(c >= 0.0 && c <= 1.0))
    throw std::domain_error("sigmoid_transform: content score outside [0, 1]");
  return 1.0 / (1.0 + std::exp(-params.alpha * (c - params.beta)));
}

IntervalBounds compute_intervals(const SigmoidParams& params) {
  params.validate();
  IntervalBounds bounds;
  // The gradient alpha*s*(1-s) peaks at alpha/4 when c = beta. At or
  // below alpha = 4 it never exceeds 1 and the middle interval is empty.
  if (params.alpha <= 4.0) {
    bounds.degenerate = true;
    return bounds;
  }
  // s*(1-s) = 1/alpha has roots s = (1 +- sqrt(1 - 4/alpha)) / 2;
  // mapping back through the inverse transform, the crossings sit
  // symmetrically at beta +- logit(s+)/alpha.
  const double root = std::sqrt(1.0 - 4.0 / params.alpha);
  const double s_plus = 0.5 * (1.0 + root);
  const double offset = std::log(s_plus / (1.0 - s_plus)) / params.alpha;
  bounds.c1 = std::clamp(params.beta - offset, 0.0, 1.0);
  bounds.c2 = std::clamp(params.beta + offset, 0.0, 1.0);
  return bounds;
}

}  // namespace ltrlab::labels
