#include "pdt/env_component.hpp"

#include <cmath>

#include "pdt/error.hpp"

namespace pdt::component {

Config Config::from(const KeyValueConfig& kv) {
  const std::string p = "env.component.";
  Config c;
  c.horizon = static_cast<int>(kv.get_int(p + "horizon", c.horizon));
  c.theta_bad = kv.get_double(p + "theta_bad", c.theta_bad);
  c.theta_good = kv.get_double(p + "theta_good", c.theta_good);
  c.prior_bad = kv.get_double(p + "prior_bad", c.prior_bad);
  c.cost_test = kv.get_double(p + "cost_test", c.cost_test);
  c.cost_replace = kv.get_double(p + "cost_replace", c.cost_replace);
  c.reward_use = kv.get_double(p + "reward_use", c.reward_use);
  c.loss_use = kv.get_double(p + "loss_use", c.loss_use);
  c.reward_terminate = kv.get_double(p + "reward_terminate", c.reward_terminate);
  c.constraint_threshold = kv.get_double(p + "constraint_threshold", c.constraint_threshold);
  c.constrained = kv.get_bool(p + "constrained", c.constrained);
  const std::string enc = kv.get_string(p + "encoding", "set");
  if (enc == "set") {
    c.encoding = Encoding::Set;
  } else if (enc == "compressed") {
    c.encoding = Encoding::Compressed;
  } else {
    throw ConfigError(p + "encoding must be 'set' or 'compressed'");
  }
  if (c.horizon < 1) throw ConfigError(p + "horizon must be positive");
  auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in_unit(c.theta_bad) || !in_unit(c.theta_good) || c.theta_bad == c.theta_good)
    throw ConfigError(p + "theta values must be distinct and inside (0, 1)");
  if (!(c.prior_bad >= 0.0 && c.prior_bad <= 1.0)) throw ConfigError(p + "prior_bad must lie in [0, 1]");
  return c;
}

double belief_psi(const ComponentBelief& belief, const Config& config) {
  if (config.prior_bad <= 0.0) return 0.0;
  if (config.prior_bad >= 1.0) return 1.0;
  const double log_odds = std::log(config.prior_bad) - std::log1p(-config.prior_bad) +
                          belief.n_success * (std::log(config.theta_bad) - std::log(config.theta_good)) +
                          belief.n_fail * (std::log1p(-config.theta_bad) - std::log1p(-config.theta_good));
  return 1.0 / (1.0 + std::exp(-log_odds));
}

double success_probability(double psi, const Config& config) {
  return psi * config.theta_bad + (1.0 - psi) * config.theta_good;
}

double expected_use_reward(double psi, const Config& config) {
  auto bet = [&](double theta) { return theta * config.reward_use - (1.0 - theta) * config.loss_use; };
  return psi * bet(config.theta_bad) + (1.0 - psi) * bet(config.theta_good);
}

ActionMask action_mask(const State& state, const Config& config) {
  ActionMask mask(kActionCount, !state.terminal());
  if (config.constrained && !state.terminal()) {
    const double p_good = 1.0 - belief_psi(state.belief, config);
    mask[static_cast<std::size_t>(Action::Use)] = p_good > config.constraint_threshold;
  }
  return mask;
}

StepResult<State> transition(const State& state, Action action, const Config& config, double u) {
  if (state.terminal()) throw StepAfterDone("component project has no days left");
  State next = state;
  double reward = 0.0;
  switch (action) {
    case Action::Terminate:
      next.days_left = 0;
      return {next, config.reward_terminate, true};
    case Action::Test:
    case Action::Use: {
      const bool works = u < state.hidden_theta;
      if (works) {
        ++next.belief.n_success;
      } else {
        ++next.belief.n_fail;
      }
      reward = action == Action::Test ? config.cost_test : (works ? config.reward_use : -config.loss_use);
      break;
    }
    case Action::Replace:
      next.belief = {};
      next.hidden_theta = u < config.prior_bad ? config.theta_bad : config.theta_good;
      reward = config.cost_replace;
      break;
    default:
      throw InvalidArgument("unknown component action");
  }
  --next.days_left;
  return {next, reward, next.terminal()};
}

StepResult<State> step(const State& state, Action action, const Config& config, Rng& rng) {
  return transition(state, action, config, rng.uniform());
}

DiscreteEpistemicBelief prior_belief(const Config& config) {
  return DiscreteEpistemicBelief::scalar({config.theta_bad, config.theta_good},
                                         {config.prior_bad, 1.0 - config.prior_bad});
}

double outcome_likelihood(const EpistemicPoint& theta, const InformationEvent& event) {
  const double y = event.observation.at(0);
  return y == 0.0 ? theta.at(0) : 1.0 - theta.at(0);
}

State Env::reset(Rng& rng) const {
  const double theta = rng.uniform() < config_.prior_bad ? config_.theta_bad : config_.theta_good;
  return initial_state(theta);
}

State Env::initial_state(double hidden_theta) const { return {{}, config_.horizon, hidden_theta}; }

StepResult<State> Env::step(const State& s, std::size_t action, Rng& rng) const {
  if (action >= kActionCount) throw InvalidArgument("action index out of range");
  return component::step(s, static_cast<Action>(action), config_, rng);
}

EncodedState Env::encode(const State& s) const {
  const double progress = static_cast<double>(s.days_left) / config_.horizon;
  EncodedState e;
  if (config_.encoding == Encoding::Set) {
    e.set.assign(static_cast<std::size_t>(s.belief.n_success), {0.0});
    e.set.insert(e.set.end(), static_cast<std::size_t>(s.belief.n_fail), {1.0});
    e.aux = {progress};
  } else {
    e.aux = {belief_psi(s.belief, config_), progress};
  }
  return e;
}

}  // namespace pdt::component
