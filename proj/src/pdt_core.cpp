#include "pdt/pdt_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdt/error.hpp"

namespace pdt {

namespace {

std::vector<double> normalized(std::vector<double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

DiscreteEpistemicBelief::DiscreteEpistemicBelief(std::vector<EpistemicPoint> support,
                                                 std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.empty()) throw InvalidArgument("empty support");
  if (support_.size() != weights_.size())
    throw InvalidArgument("support and weights differ in length");
  for (std::size_t i = 0; i < support_.size(); ++i)
    for (std::size_t j = i + 1; j < support_.size(); ++j)
      if (support_[i] == support_[j]) throw InvalidArgument("duplicate support point");
  for (double w : weights_)
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("negative or non-finite weight");
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > kNormalizationTolerance)
    throw InvalidArgument("weights do not sum to one");
  weights_ = normalized(std::move(weights_));
}

DiscreteEpistemicBelief DiscreteEpistemicBelief::scalar(std::vector<double> support,
                                                        std::vector<double> weights) {
  std::vector<EpistemicPoint> points;
  points.reserve(support.size());
  for (double s : support) points.push_back({s});
  return {std::move(points), std::move(weights)};
}

double GaussianBelief::sd() const { return std::sqrt(variance); }

DiscreteEpistemicBelief epistemic_condition(const DiscreteEpistemicBelief& prior,
                                            const Likelihood& likelihood,
                                            const InformationEvent& event) {
  std::vector<double> posterior(prior.size());
  double normalizer = 0.0;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const double l = likelihood(prior.support()[i], event);
    if (!(l >= 0.0) || !std::isfinite(l))
      throw InvalidArgument("likelihood must be finite and non-negative");
    posterior[i] = l * prior.weights()[i];
    normalizer += posterior[i];
  }
  if (!(normalizer > 0.0))
    throw AllZeroLikelihood("observation has zero probability under every hypothesis");
  for (double& w : posterior) w /= normalizer;
  // Bypass the sum check; the ratio above is normalized up to rounding.
  return DiscreteEpistemicBelief(prior.support(), normalized(std::move(posterior)));
}

double predictive_probability(const DiscreteEpistemicBelief& belief, const Conditional& conditional) {
  double p = 0.0;
  for (std::size_t i = 0; i < belief.size(); ++i)
    p += belief.weights()[i] * conditional(belief.support()[i]);
  return std::clamp(p, 0.0, 1.0);
}

GaussianBelief gaussian_condition(const GaussianBelief& prior, double obs, double noise_variance) {
  if (!(noise_variance > 0.0)) throw InvalidArgument("noise variance must be positive");
  if (!(prior.variance >= 0.0)) throw InvalidArgument("prior variance must be non-negative");
  if (prior.variance == 0.0) return prior;
  // Gain form avoids dividing by a zero prior precision.
  const double gain = prior.variance / (prior.variance + noise_variance);
  return {prior.mean + gain * (obs - prior.mean), (1.0 - gain) * prior.variance};
}

PdtTriplet::PdtTriplet(std::vector<std::string> attributes, std::string structural_assumptions)
    : attributes_(std::move(attributes)), assumptions_(std::move(structural_assumptions)) {}

PdtTriplet PdtTriplet::with_event(InformationEvent event) const {
  for (const auto& e : information_)
    if (e.decision == event.decision && e.observation.size() != event.observation.size())
      throw DimensionMismatch("observation dimension changed for decision '" + event.decision + "'");
  PdtTriplet next = *this;
  next.information_.push_back(std::move(event));
  return next;
}

}  // namespace pdt
