#pragma once

// Deep Q-learning on the information state-space: epsilon-greedy exploration
// restricted to legal actions, uniform experience replay, and a target network
// refreshed every `target_sync_steps` environment steps.

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pdt/belief_mdp.hpp"
#include "pdt/config.hpp"
#include "pdt/deepsets.hpp"
#include "pdt/error.hpp"
#include "pdt/random.hpp"

namespace pdt::dqn {

struct StoredTransition {
  EncodedState state;
  std::size_t action = 0;
  double reward = 0.0;  // already scaled for the learner
  EncodedState next_state;
  bool done = false;
  ActionMask next_mask;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(StoredTransition t);
  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t pushed() const { return pushed_; }

  // i = 0 is the oldest retained transition.
  const StoredTransition& at(std::size_t i) const;

  // Distinct indices, uniform without replacement; batch is capped at size().
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::vector<StoredTransition> ring_;
  std::size_t next_ = 0;
  std::uint64_t pushed_ = 0;
};

struct TrainConfig {
  std::size_t episodes = 3000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double discount = 1.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_episodes = 1500;  // linear decay horizon; from() defaults it to episodes / 2
  std::size_t target_sync_steps = 500;
  std::size_t replay_capacity = 50'000;
  std::size_t warmup_transitions = 64;  // no updates before this many pushes
  std::size_t train_every = 1;          // environment steps per gradient update
  double reward_scale = 1.0;            // learner-side only
  bool double_dqn = false;
  std::uint64_t seed = 1;
  nn::Architecture architecture;  // set/aux/output dims are taken from the environment

  double epsilon_at(std::size_t episode) const;

  // Reads keys under "<prefix>." and validates ranges.
  static TrainConfig from(const KeyValueConfig& kv, const std::string& prefix, TrainConfig defaults);
  void validate() const;
};

std::size_t greedy_action(std::span<const double> q, const ActionMask& mask);
std::size_t epsilon_greedy(std::span<const double> q, const ActionMask& mask, double epsilon, Rng& rng);
double td_target(double reward, bool done, std::span<const double> next_q, const ActionMask& next_mask,
                 double discount);

struct CurvePoint {
  std::size_t episode = 0;
  double episode_return = 0.0;  // unscaled environment reward
  double epsilon = 0.0;
  double loss_moving_average = 0.0;
};

struct TrainResult {
  nn::DeepSetsNet net;
  std::vector<CurvePoint> curve;
  std::size_t steps = 0;
  std::size_t updates = 0;
};

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

// One regression step of the online net towards TD targets from `target`.
// Returns the batch's mean squared TD error.
double learn_batch(nn::DeepSetsNet& online, const nn::DeepSetsNet& target, nn::AdamState& adam,
                   const ReplayBuffer& buffer, const std::vector<std::size_t>& batch, const TrainConfig& config);

// Seed stream for training episode `episode`; disjoint from small-integer
// evaluation seeds.
inline std::uint64_t training_episode_seed(std::uint64_t seed, std::size_t episode) {
  return derive_seed(seed ^ 0x7472616e5f646f6eULL, episode);
}

template <Environment Env>
nn::Architecture architecture_for(const Env& env, nn::Architecture arch) {
  arch.set_dim = env.set_dim();
  arch.aux_dim = env.aux_dim();
  arch.output_dim = env.action_count();
  return arch;
}

// Called after every environment step during training.
struct StepObservation {
  std::size_t episode;
  std::size_t step;  // global environment step, 1-based
  const ActionMask& mask;
  std::size_t action;
  const nn::DeepSetsNet& online;
  const nn::DeepSetsNet& target;
};

struct NoObserver {
  void operator()(const StepObservation&) const {}
};

template <Environment Env, class Observer = NoObserver>
TrainResult train(const Env& env, const TrainConfig& config, Observer&& observe = {}) {
  config.validate();
  TrainResult result{nn::DeepSetsNet(architecture_for(env, config.architecture), derive_seed(config.seed, 7)),
                     {}, 0, 0};
  nn::DeepSetsNet& online = result.net;
  nn::DeepSetsNet target = online;
  nn::AdamState adam = nn::make_adam_state(online);
  ReplayBuffer buffer(config.replay_capacity);
  Rng sample_rng(derive_seed(config.seed, 11));
  double loss_ma = 0.0;
  bool have_loss = false;

  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    const std::uint64_t episode_seed = training_episode_seed(config.seed, ep);
    Rng env_rng = environment_stream(episode_seed);
    Rng explore_rng = policy_stream(episode_seed);
    const double epsilon = config.epsilon_at(ep);

    auto state = env.reset(env_rng);
    EncodedState encoded = env.encode(state);
    double episode_return = 0.0;
    for (bool done = false; !done;) {
      const ActionMask mask = env.mask(state);
      const auto q = online.forward(encoded);
      const std::size_t action = epsilon_greedy(q, mask, epsilon, explore_rng);
      auto step = env.step(state, action, env_rng);
      episode_return += step.reward;
      done = step.done;

      EncodedState next_encoded = env.encode(step.next);
      ActionMask next_mask = done ? ActionMask(env.action_count(), false) : env.mask(step.next);
      buffer.push({std::move(encoded), action, step.reward * config.reward_scale, next_encoded, done,
                   std::move(next_mask)});
      ++result.steps;

      if (buffer.pushed() >= config.warmup_transitions && result.steps % config.train_every == 0) {
        const auto batch = buffer.sample_indices(config.batch_size, sample_rng);
        const double loss = learn_batch(online, target, adam, buffer, batch, config);
        if (!std::isfinite(loss))
          throw DivergenceDetected("non-finite loss at episode " + std::to_string(ep) + ", step " +
                                   std::to_string(result.steps));
        loss_ma = have_loss ? 0.99 * loss_ma + 0.01 * loss : loss;
        have_loss = true;
        ++result.updates;
      }
      if (result.steps % config.target_sync_steps == 0) target = online;
      observe(StepObservation{ep, result.steps, mask, action, online, target});

      state = std::move(step.next);
      encoded = std::move(next_encoded);
    }
    result.curve.push_back({ep, episode_return, epsilon, loss_ma});
  }
  return result;
}

// Greedy (epsilon = 0) policy over a frozen network; safe to share across
// evaluation threads.
template <Environment Env>
Policy<typename Env::State> greedy_policy(const Env& env, nn::DeepSetsNet net) {
  auto frozen = std::make_shared<const nn::DeepSetsNet>(std::move(net));
  return [env, frozen](const typename Env::State& s, const ActionMask& mask, Rng&) {
    return greedy_action(frozen->forward(env.encode(s)), mask);
  };
}

// Uniform over legal actions.
template <class State>
Policy<State> random_policy() {
  return [](const State&, const ActionMask& mask, Rng& rng) {
    std::vector<double> zeros(mask.size(), 0.0);
    return epsilon_greedy(zeros, mask, 1.0, rng);
  };
}

}  // namespace pdt::dqn
