#pragma once

// Component ("coin") game: a project of N days with a component of unknown
// reliability theta in {theta_bad, theta_good}. Each day the operator tests,
// replaces, uses the component, or terminates the project. The information
// state is the pair of outcome counts on the current component plus the days
// left; the hidden theta lives in the state for the simulator only.

#include <array>
#include <cstddef>
#include <string>

#include "pdt/belief_mdp.hpp"
#include "pdt/config.hpp"
#include "pdt/pdt_core.hpp"

namespace pdt::component {

enum class Action : std::size_t { Terminate = 0, Test = 1, Replace = 2, Use = 3 };
inline constexpr std::size_t kActionCount = 4;
inline constexpr std::array<const char*, kActionCount> kActionNames = {"terminate", "test", "replace", "use"};

enum class Encoding { Set, Compressed };

struct Config {
  int horizon = 10;
  double theta_bad = 0.5;
  double theta_good = 0.99;
  double prior_bad = 0.5;  // P(theta = theta_bad) for a freshly bought component
  double cost_test = -10'000.0;
  double cost_replace = -100'000.0;
  double reward_use = 1'000'000.0;  // Y = 0
  double loss_use = 1'000'000.0;    // paid when Y = 1
  double reward_terminate = 0.0;
  double constraint_threshold = 0.9;  // Use needs P(theta = theta_good) > threshold
  bool constrained = false;
  Encoding encoding = Encoding::Set;

  // Reads keys under "env.component."; missing keys keep the defaults above.
  static Config from(const KeyValueConfig& kv);
};

struct ComponentBelief {
  int n_success = 0;  // Y = 0 outcomes on the current component
  int n_fail = 0;     // Y = 1 outcomes

  bool operator==(const ComponentBelief&) const = default;
};

struct State {
  ComponentBelief belief;
  int days_left = 0;
  double hidden_theta = 0.0;

  bool terminal() const { return days_left <= 0; }
  bool operator==(const State&) const = default;
};

// P(theta = theta_bad | counts), evaluated through the log-odds.
double belief_psi(const ComponentBelief& belief, const Config& config);

// Probability that the next test/use outcome is Y = 0, marginalizing theta.
double success_probability(double psi, const Config& config);

double expected_use_reward(double psi, const Config& config);

ActionMask action_mask(const State& state, const Config& config);

// Transition driven by one uniform draw u in [0, 1): for Test/Use, Y = 0 iff
// u < hidden_theta; for Replace, the new component is bad iff u < prior_bad.
StepResult<State> transition(const State& state, Action action, const Config& config, double u);

StepResult<State> step(const State& state, Action action, const Config& config, Rng& rng);

// The belief expressed as a discrete epistemic belief over {theta_bad, theta_good}.
DiscreteEpistemicBelief prior_belief(const Config& config);
double outcome_likelihood(const EpistemicPoint& theta, const InformationEvent& event);

class Env {
 public:
  using State = component::State;

  explicit Env(Config config) : config_(config) {}

  const Config& config() const { return config_; }
  std::size_t action_count() const { return kActionCount; }
  std::size_t set_dim() const { return 1; }
  std::size_t aux_dim() const { return config_.encoding == Encoding::Set ? 1 : 2; }

  State reset(Rng& rng) const;
  State initial_state(double hidden_theta) const;
  StepResult<State> step(const State& s, std::size_t action, Rng& rng) const;
  ActionMask mask(const State& s) const { return action_mask(s, config_); }
  EncodedState encode(const State& s) const;

 private:
  Config config_;
};

}  // namespace pdt::component
