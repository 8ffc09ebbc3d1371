#pragma once

// Finite-horizon belief-state MDP plumbing.
//
// Transition kernels are generative: an environment exposes a seeded step
// function rather than explicit matrices. Each episode gets two random
// streams derived from its seed, one for the environment and one for the
// policy, so changing the policy never perturbs the environment's draws.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pdt/error.hpp"
#include "pdt/random.hpp"

namespace pdt {

using ActionMask = std::vector<bool>;

// Feature representation consumed by set networks: an unordered collection of
// equal-length vectors plus a dense auxiliary vector.
struct EncodedState {
  std::vector<std::vector<double>> set;
  std::vector<double> aux;
};

template <class State>
struct StepResult {
  State next;
  double reward = 0.0;
  bool done = false;
};

template <class State>
struct Transition {
  State state;
  std::size_t action = 0;
  double reward = 0.0;
  State next_state;
  bool done = false;
};

template <class State>
struct EpisodeRecord {
  std::vector<Transition<State>> transitions;
  std::uint64_t seed = 0;
  double total_return = 0.0;

  std::size_t length() const { return transitions.size(); }
};

template <class E>
concept Environment = requires(const E& env, const typename E::State& s, std::size_t a, Rng& rng) {
  { env.action_count() } -> std::convertible_to<std::size_t>;
  { env.reset(rng) } -> std::same_as<typename E::State>;
  { env.step(s, a, rng) } -> std::same_as<StepResult<typename E::State>>;
  { env.mask(s) } -> std::same_as<ActionMask>;
  { env.encode(s) } -> std::same_as<EncodedState>;
};

template <class State>
using Policy = std::function<std::size_t(const State&, const ActionMask&, Rng&)>;

inline Rng environment_stream(std::uint64_t seed) { return Rng(derive_seed(seed, 0)); }
inline Rng policy_stream(std::uint64_t seed) { return Rng(derive_seed(seed, 1)); }

template <Environment Env>
EpisodeRecord<typename Env::State> run_episode(const Env& env, const Policy<typename Env::State>& policy,
                                               std::uint64_t seed, double discount) {
  if (!(discount >= 0.0 && discount <= 1.0)) throw InvalidArgument("discount must lie in [0, 1]");
  Rng env_rng = environment_stream(seed);
  Rng policy_rng = policy_stream(seed);

  EpisodeRecord<typename Env::State> record;
  record.seed = seed;
  auto state = env.reset(env_rng);
  double weight = 1.0;
  for (;;) {
    const ActionMask mask = env.mask(state);
    const std::size_t action = policy(state, mask, policy_rng);
    if (action >= mask.size() || !mask[action])
      throw PolicyReturnedMaskedAction("action " + std::to_string(action));
    auto result = env.step(state, action, env_rng);
    record.total_return += weight * result.reward;
    weight *= discount;
    const bool done = result.done;
    record.transitions.push_back({std::move(state), action, result.reward, result.next, done});
    if (done) break;
    state = std::move(result.next);
  }
  return record;
}

// Runs episodes base_seed + i for i in [0, n) and hands each record to the
// visitor in episode order. Episodes inside a chunk may run on worker threads;
// the visitor always runs on the calling thread.
template <Environment Env, class Visitor>
void for_each_episode(const Env& env, const Policy<typename Env::State>& policy, std::size_t n_episodes,
                      std::uint64_t base_seed, double discount, Visitor&& visit, unsigned threads = 1) {
  constexpr std::size_t kChunk = 1024;
  threads = std::max(1u, threads);
  std::vector<EpisodeRecord<typename Env::State>> chunk;
  for (std::size_t begin = 0; begin < n_episodes; begin += kChunk) {
    const std::size_t count = std::min(kChunk, n_episodes - begin);
    chunk.assign(count, {});
    auto work = [&](std::size_t worker) {
      for (std::size_t i = worker; i < count; i += threads)
        chunk[i] = run_episode(env, policy, base_seed + begin + i, discount);
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    }
    for (std::size_t i = 0; i < count; ++i) visit(begin + i, chunk[i]);
  }
}

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;
};

// Bins are [e_i, e_{i+1}); the last bin also includes its right edge.
Histogram make_histogram(const std::vector<double>& values, std::vector<double> edges);
std::vector<double> uniform_edges(double lo, double hi, std::size_t bins);

struct EvalSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single episode
  double min = 0.0;
  double max = 0.0;
  Histogram histogram;
  std::vector<std::uint64_t> seeds;
  std::vector<double> returns;
  std::vector<std::size_t> lengths;

  double standard_error() const;
};

EvalSummary summarize(std::vector<std::uint64_t> seeds, std::vector<double> returns,
                      std::vector<std::size_t> lengths, std::vector<double> histogram_edges = {});

template <Environment Env>
EvalSummary evaluate_policy(const Env& env, const Policy<typename Env::State>& policy, std::size_t n_episodes,
                            std::uint64_t base_seed, double discount, std::vector<double> histogram_edges = {},
                            unsigned threads = 1) {
  if (n_episodes == 0) throw InvalidArgument("n_episodes must be at least 1");
  std::vector<std::uint64_t> seeds;
  std::vector<double> returns;
  std::vector<std::size_t> lengths;
  for_each_episode(
      env, policy, n_episodes, base_seed, discount,
      [&](std::size_t, const EpisodeRecord<typename Env::State>& r) {
        seeds.push_back(r.seed);
        returns.push_back(r.total_return);
        lengths.push_back(r.length());
      },
      threads);
  return summarize(std::move(seeds), std::move(returns), std::move(lengths), std::move(histogram_edges));
}

// Shortest round-trip decimal form; identical bytes for identical doubles.
std::string format_double(double x);

void write_episode_csv(std::ostream& out, const EvalSummary& summary);
void write_histogram_csv(std::ostream& out, const Histogram& histogram);
nlohmann::json summary_json(const EvalSummary& summary);

}  // namespace pdt
