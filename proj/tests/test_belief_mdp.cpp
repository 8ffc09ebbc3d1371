#include <sstream>

#include "doctest.h"
#include "pdt/belief_mdp.hpp"
#include "pdt/dqn.hpp"
#include "pdt/env_component.hpp"

using namespace pdt;
using component::Action;

namespace {

Policy<component::State> always(Action a) {
  return [a](const component::State&, const ActionMask&, Rng&) { return static_cast<std::size_t>(a); };
}

// Two-step toy environment with fixed rewards, for discount arithmetic.
struct FixedRewardEnv {
  struct State {
    int t = 0;
  };
  std::vector<double> rewards;

  std::size_t action_count() const { return 1; }
  State reset(Rng&) const { return {}; }
  StepResult<State> step(const State& s, std::size_t, Rng&) const {
    const bool done = s.t + 1 == static_cast<int>(rewards.size());
    return {{s.t + 1}, rewards[static_cast<std::size_t>(s.t)], done};
  }
  ActionMask mask(const State&) const { return {true}; }
  EncodedState encode(const State&) const { return {}; }
};

}  // namespace

TEST_CASE("always-terminate episode has one transition and zero return") {
  component::Env env{component::Config{}};
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    auto r = run_episode(env, always(Action::Terminate), seed, 1.0);
    CHECK(r.length() == 1);
    CHECK(r.total_return == 0.0);
    CHECK(r.transitions.back().done);
  }
}

TEST_CASE("episodes are reproducible from their seed") {
  component::Env env{component::Config{}};
  auto policy = dqn::random_policy<component::State>();
  auto a = run_episode(env, policy, 42, 1.0);
  auto b = run_episode(env, policy, 42, 1.0);
  REQUIRE(a.length() == b.length());
  CHECK(a.total_return == b.total_return);
  for (std::size_t i = 0; i < a.length(); ++i) {
    CHECK(a.transitions[i].action == b.transitions[i].action);
    CHECK(a.transitions[i].next_state == b.transitions[i].next_state);
  }
  // Exactly one done flag, on the last transition.
  for (std::size_t i = 0; i + 1 < a.length(); ++i) CHECK_FALSE(a.transitions[i].done);
  CHECK(a.transitions.back().done);
}

TEST_CASE("environment randomness does not depend on the policy") {
  component::Env env{component::Config{}};
  auto use = run_episode(env, always(Action::Use), 5, 1.0);
  auto test = run_episode(env, always(Action::Test), 5, 1.0);
  // Same hidden component and same outcome draws; only the payoffs differ.
  CHECK(use.transitions[0].state.hidden_theta == test.transitions[0].state.hidden_theta);
  for (std::size_t i = 0; i < use.length(); ++i)
    CHECK(use.transitions[i].next_state.belief == test.transitions[i].next_state.belief);
}

TEST_CASE("masked action from a policy is surfaced") {
  component::Config c;
  c.constrained = true;
  component::Env env(c);
  CHECK_THROWS_AS(run_episode(env, always(Action::Use), 0, 1.0), PolicyReturnedMaskedAction);
}

TEST_CASE("discounted return arithmetic and monotonicity") {
  FixedRewardEnv neg{{-1.0, -2.0, -4.0}};
  Policy<FixedRewardEnv::State> only = [](const FixedRewardEnv::State&, const ActionMask&, Rng&) {
    return std::size_t{0};
  };
  CHECK(run_episode(neg, only, 0, 0.5).total_return == doctest::Approx(-1.0 - 1.0 - 1.0));
  // All-negative rewards: the accumulated cost grows with the discount.
  double previous = 1e300;
  for (double g = 0.0; g <= 1.0; g += 0.125) {
    const double r = run_episode(neg, only, 0, g).total_return;
    CHECK(r <= previous);
    previous = r;
  }
  FixedRewardEnv pos{{1.0, 2.0, 4.0}};
  previous = -1e300;
  for (double g = 0.0; g <= 1.0; g += 0.125) {
    const double r = run_episode(pos, only, 0, g).total_return;
    CHECK(r >= previous);
    previous = r;
  }
  CHECK_THROWS_AS(run_episode(pos, only, 0, 1.5), InvalidArgument);
}

TEST_CASE("evaluate_policy summary statistics") {
  component::Env env{component::Config{}};
  SUBCASE("single episode") {
    auto s = evaluate_policy(env, dqn::random_policy<component::State>(), 1, 7, 1.0);
    CHECK(s.sd == 0.0);
    CHECK(s.mean == s.returns[0]);
    CHECK(s.seeds[0] == 7);
  }
  SUBCASE("always terminate") {
    auto s = evaluate_policy(env, always(Action::Terminate), 50, 0, 1.0);
    CHECK(s.mean == 0.0);
    CHECK(s.sd == 0.0);
  }
  SUBCASE("mean within range, seeds consecutive, threads agree") {
    auto policy = dqn::random_policy<component::State>();
    auto s = evaluate_policy(env, policy, 300, 1000, 1.0, uniform_edges(-1e7, 1e7, 40));
    CHECK(s.mean >= s.min);
    CHECK(s.mean <= s.max);
    for (std::size_t i = 0; i < s.seeds.size(); ++i) CHECK(s.seeds[i] == 1000 + i);
    std::size_t total = s.histogram.underflow + s.histogram.overflow;
    for (auto c : s.histogram.counts) total += c;
    CHECK(total == 300);

    auto t = evaluate_policy(env, policy, 300, 1000, 1.0, uniform_edges(-1e7, 1e7, 40), 3);
    CHECK(t.returns == s.returns);
  }
  CHECK_THROWS_AS(evaluate_policy(env, always(Action::Terminate), 0, 0, 1.0), InvalidArgument);
}

TEST_CASE("histogram edges and CSV output") {
  auto h = make_histogram({-1.0, 0.0, 0.5, 1.0, 2.0}, uniform_edges(0.0, 1.0, 2));
  CHECK(h.underflow == 1);
  CHECK(h.overflow == 1);
  CHECK(h.counts == std::vector<std::size_t>{1, 2});

  auto s = summarize({3, 4}, {1.5, -2.0}, {2, 1});
  std::ostringstream csv;
  write_episode_csv(csv, s);
  CHECK(csv.str() == "seed,return,length\n3,1.5,2\n4,-2,1\n");
  CHECK(summary_json(s)["episodes"] == 2);
  CHECK(format_double(0.1) == "0.1");
}
