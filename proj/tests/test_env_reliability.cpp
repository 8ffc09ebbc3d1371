#include <cmath>

#include "doctest.h"
#include "pdt/dqn.hpp"
#include "pdt/env_reliability.hpp"
#include "pdt/error.hpp"

using namespace pdt;
using namespace pdt::reliability;

namespace {

Config degenerate_config() {
  Config c;
  c.beta_prior_sd = 0.0;
  c.defect_prior_sd = 0.0;
  c.discrepancy_prior_sd = 0.0;
  return c;
}

}  // namespace

TEST_CASE("pf_given_theta closed form") {
  Config c;
  Features beta = Features::Zero();
  CHECK(pf_given_theta(beta, 0.0, 0.0, c) == 0.5);
  CHECK(pf_given_theta(beta, 1.0, -1.0, c) == 0.5);
  // Phi(-3.0902) for the inverse normal CDF at 1 - 1e-3.
  CHECK(pf_given_theta(beta, 0.0, 3.0902, c) == doctest::Approx(1e-3).epsilon(1e-3));
  c.aleatory_sd = 0.0;
  CHECK_THROWS_AS(pf_given_theta(beta, 0.0, 1.0, c), InvalidArgument);
}

TEST_CASE("pf_given_theta is non-decreasing in the weight scale for positive margin") {
  Config c;
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Features beta;
    for (int k = 0; k < 5; ++k) beta(k) = rng.normal();
    const double d = rng.uniform(), mu = 0.5 + 3 * rng.uniform();
    double previous = 0.0;
    for (double scale = 1.0; scale <= 8.0; scale += 0.25) {
      const double pf = pf_given_theta(scale * beta, d, mu, c);
      CHECK(pf >= previous);
      previous = pf;
    }
  }
}

TEST_CASE("check_objective boundaries") {
  CHECK(check_objective(5e-4, 1e-4, 1e-3) == Objective::ConfirmedBelow);
  CHECK(check_objective(2e-3, 4e-4, 1e-3) == Objective::ConfirmedAbove);
  CHECK(check_objective(1e-3, 0.0, 1e-3) == Objective::Undecided);
  CHECK(check_objective(6e-4, 2e-4, 1e-3) == Objective::Undecided);  // 1e-3 is not < 1e-3
  CHECK_THROWS_AS(check_objective(1e-3, -1.0, 1e-3), InvalidArgument);
}

TEST_CASE("estimate_pf_stats with degenerate posteriors") {
  Config c = degenerate_config();
  GroundTruth truth;
  auto s = prior_state(c, truth, 9);
  s.surrogate.weight_mean << 0.1, 0.2, 0.0, -0.3, 0.05;
  auto stats = estimate_pf_stats(s, c, 123);
  CHECK(stats.sd == 0.0);
  CHECK(stats.mean == pf_given_theta(s.surrogate.weight_mean, s.defect.mean, s.discrepancy.mean, c));
}

TEST_CASE("estimate_pf_stats is deterministic per seed") {
  Config c;
  auto s = prior_state(c, {}, 0);
  auto a = estimate_pf_stats(s, c, 77);
  auto b = estimate_pf_stats(s, c, 77);
  CHECK(a.mean == b.mean);
  CHECK(a.sd == b.sd);
  CHECK(a.sd > 0.0);
}

TEST_CASE("candidate grid and basis") {
  auto grid = candidate_grid();
  CHECK(grid.size() == 64);
  for (const auto& x : grid)
    for (int k = 0; k < 5; ++k) CHECK(std::abs(x(k)) <= 1.0);
  CHECK(grid[0](0) == 0.0);  // radical inverse of 1 in base 2 is 1/2
  Input zero = Input::Zero();
  auto f = basis(zero);
  CHECK(f(0) == 1.0);
  CHECK(f(4) == 1.0);
}

TEST_CASE("select_fe_input") {
  SurrogatePosterior iso;
  iso.weight_covariance = Covariance::Identity();
  std::vector<Input> pool;
  pool.push_back(Input::Zero());
  for (int k = 0; k < 5; ++k) pool.push_back(Input::Unit(k));
  const auto pick = select_fe_input(iso, pool);
  CHECK(pick != 0);
  // Under isotropy the predictive variance is |phi_B(x)|^2.
  for (const auto& x : pool) CHECK(iso.predictive_variance(x) == doctest::Approx(basis(x).squaredNorm()));

  SurrogatePosterior none;
  CHECK(select_fe_input(none, pool) == 0);
  CHECK_THROWS_AS(select_fe_input(none, {}), InvalidArgument);

  // After observing the chosen point with tiny noise, a duplicate of it loses.
  const Input x = pool[pick];
  auto after = iso.condition(x, 0.3, 1e-8);
  CHECK(after.predictive_variance(x) < 1e-6);
  std::vector<Input> dupes{x, x, Input::Unit(4) * 0.5};
  CHECK(select_fe_input(after, dupes) == 2);
}

TEST_CASE("FE updates never increase any candidate's predictive variance") {
  Config c;
  Env env(c);
  Rng rng(5);
  auto s = env.reset(rng);
  for (int i = 0; i < 12 && !s.done; ++i) {
    std::vector<double> before;
    for (const auto& x : env.candidates()) before.push_back(s.surrogate.predictive_variance(x));
    auto r = env.step(s, static_cast<std::size_t>(Action::FE), rng);
    for (std::size_t k = 0; k < before.size(); ++k)
      CHECK(r.next.surrogate.predictive_variance(env.candidates()[k]) <= before[k] + 1e-12);
    Eigen::SelfAdjointEigenSolver<Covariance> eig(r.next.surrogate.weight_covariance);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    CHECK((r.next.surrogate.weight_covariance - r.next.surrogate.weight_covariance.transpose()).norm() < 1e-10);
    s = r.next;
  }
}

TEST_CASE("step rewards and bookkeeping") {
  Config c;
  Env env(c);
  Rng rng(6);
  auto s = env.reset(rng);
  auto fe = env.step_with_noise(s, Action::FE, 0.0);
  CHECK(fe.reward == -0.1);
  CHECK(fe.next.fe_observations.size() == 1);
  CHECK(fe.next.fe_observations[0].size() == 6);
  auto lab = env.step_with_noise(s, Action::Lab, 0.5);
  CHECK(lab.reward == -1.0);
  CHECK(lab.next.discrepancy.variance < s.discrepancy.variance);
  auto meas = env.step_with_noise(s, Action::Measurement, -0.5);
  CHECK(meas.reward == -10.0);
  CHECK(meas.next.defect.variance < s.defect.variance);
  CHECK(meas.next.action_counts[0] == 1);
  CHECK(meas.next.actions_taken == 1);
}

TEST_CASE("degenerate config succeeds on the first action") {
  Env env(degenerate_config());
  Rng rng(7);
  auto s = env.reset(rng);
  auto r = env.step(s, static_cast<std::size_t>(Action::Lab), rng);
  CHECK(r.done);
  CHECK(r.next.success());
  CHECK(r.reward == -1.0);
  CHECK_THROWS_AS(env.step(r.next, 0, rng), StepAfterDone);
}

TEST_CASE("hitting the action limit fails with the penalty") {
  Config c;
  c.max_actions = 3;
  c.lab_noise_sd = 1e3;  // labs barely inform
  c.beta_prior_sd = 0.0;
  c.discrepancy_prior_mean = 3.0902;  // prior mean sits on the target
  Env env(c);
  auto policy = [](const State&, const ActionMask&, Rng&) { return static_cast<std::size_t>(Action::Lab); };
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rec = run_episode(env, Policy<State>(policy), seed, 1.0);
    const auto& last = rec.transitions.back();
    if (!last.next_state.success()) {
      ++failures;
      CHECK(rec.length() == 3);
      CHECK(last.reward == -1.0 + -20.0);
    }
  }
  CHECK(failures > 0);
}

TEST_CASE("episode rewards come from the fixed cost menu") {
  Env env{Config{}};
  auto policy = dqn::random_policy<State>();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto rec = run_episode(env, policy, seed, 1.0);
    CHECK(rec.length() <= 40);
    for (const auto& t : rec.transitions) {
      const double penalty = t.done && !t.next_state.success() ? -20.0 : 0.0;
      bool menu = false;
      for (double c : {-10.0, -1.0, -0.1}) menu = menu || t.reward == c + penalty;
      CHECK(menu);
    }
    CHECK(rec.transitions.back().next_state.actions_taken == static_cast<int>(rec.length()));
    // Outcome depends only on the seeded state path.
    auto again = run_episode(env, policy, seed, 1.0);
    CHECK(again.transitions.back().next_state.success() == rec.transitions.back().next_state.success());
  }
}

TEST_CASE("benchmark cycle") {
  for (int i = 0; i < 10; ++i) CHECK(benchmark_action(i) == Action::FE);
  CHECK(benchmark_action(10) == Action::Lab);
  CHECK(benchmark_action(11) == Action::Measurement);
  for (int i = 12; i < 22; ++i) CHECK(benchmark_action(i) == Action::FE);
  CHECK(benchmark_action(22) == Action::Lab);
}

TEST_CASE("encoding carries the FE set and channel statistics") {
  Env env{Config{}};
  Rng rng(8);
  auto s = env.reset(rng);
  s = env.step_with_noise(s, Action::FE, 0.0).next;
  auto e = env.encode(s);
  CHECK(e.set.size() == 1);
  CHECK(e.set[0].size() == env.set_dim());
  CHECK(e.aux.size() == env.aux_dim());
  CHECK(e.aux[1] == doctest::Approx(0.05));
  CHECK(e.aux[3] == doctest::Approx(0.2));
  CHECK(e.aux[4] == doctest::Approx(1.0 / 40));
}
