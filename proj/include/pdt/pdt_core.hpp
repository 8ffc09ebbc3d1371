#pragma once

// Probabilistic digital twin data model and epistemic conditioning.
//
// A twin is the triplet (attributes, structural assumptions, information).
// Epistemic uncertainty is carried by a belief over the generator theta,
// either on a finite support or as a Gaussian conjugate family. Updating the
// twin means conditioning that belief on new information events; the
// aleatory model P(X | theta) is never touched.

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pdt {

inline constexpr double kNormalizationTolerance = 1e-12;

// A decision/condition descriptor paired with what was observed under it.
struct InformationEvent {
  std::string decision;
  std::vector<double> observation;
};

using EpistemicPoint = std::vector<double>;

class DiscreteEpistemicBelief {
 public:
  // Throws InvalidArgument unless the support is non-empty and distinct and
  // the weights are non-negative and sum to one (within tolerance). Weights
  // are renormalized exactly on construction.
  DiscreteEpistemicBelief(std::vector<EpistemicPoint> support, std::vector<double> weights);

  static DiscreteEpistemicBelief scalar(std::vector<double> support, std::vector<double> weights);

  const std::vector<EpistemicPoint>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return support_.size(); }

 private:
  std::vector<EpistemicPoint> support_;
  std::vector<double> weights_;
};

struct GaussianBelief {
  double mean = 0.0;
  double variance = 0.0;

  double sd() const;
};

// P(o | theta, d) evaluated at one support point.
using Likelihood = std::function<double(const EpistemicPoint& theta, const InformationEvent& event)>;
// P(event | theta) for predictive marginals.
using Conditional = std::function<double(const EpistemicPoint& theta)>;

DiscreteEpistemicBelief epistemic_condition(const DiscreteEpistemicBelief& prior,
                                            const Likelihood& likelihood,
                                            const InformationEvent& event);

double predictive_probability(const DiscreteEpistemicBelief& belief, const Conditional& conditional);

// Normal-normal conjugate update of a belief about a location parameter.
GaussianBelief gaussian_condition(const GaussianBelief& prior, double obs, double noise_variance);

class PdtTriplet {
 public:
  PdtTriplet(std::vector<std::string> attributes, std::string structural_assumptions);

  const std::vector<std::string>& attributes() const { return attributes_; }
  const std::string& structural_assumptions() const { return assumptions_; }
  const std::vector<InformationEvent>& information() const { return information_; }

  // Returns a copy with the event appended. Observations for a given decision
  // type must all have the same dimension.
  PdtTriplet with_event(InformationEvent event) const;

 private:
  std::vector<std::string> attributes_;
  std::string assumptions_;
  std::vector<InformationEvent> information_;
};

}  // namespace pdt
