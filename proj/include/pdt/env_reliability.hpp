#pragma once

// Closed-form analog of a corroded-pipeline reliability study.
//
// Limit state  g = mu_m + gamma * d + beta^T xi + eps_a,  xi ~ N(0, I_5),
// eps_a ~ N(0, sigma_a^2), so that
//
//   p_f(beta, d, mu_m) = Phi( -(mu_m + gamma d) / sqrt(beta^T beta + sigma_a^2) ).
//
// The epistemic generator is theta = (beta, d, mu_m). Three experiment types
// reduce uncertainty about it:
//   Measurement  noisy observation of the defect size d       (cost 10)
//   FE           beta^T phi_B(x) at a chosen input x in R^5    (cost 0.1)
//   Lab          noisy observation of the discrepancy mu_m     (cost 1)
// The episode succeeds once E[p_f] +/- 2 Std(p_f) lies entirely on one side of
// the target, and fails after `max_actions` experiments.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "pdt/belief_mdp.hpp"
#include "pdt/config.hpp"
#include "pdt/pdt_core.hpp"

namespace pdt::reliability {

inline constexpr std::size_t kInputDim = 5;
inline constexpr std::size_t kFeatureDim = 5;
inline constexpr std::size_t kActionCount = 3;

using Input = Eigen::Matrix<double, kInputDim, 1>;
using Features = Eigen::Matrix<double, kFeatureDim, 1>;
using Covariance = Eigen::Matrix<double, kFeatureDim, kFeatureDim>;

enum class Action : std::size_t { Measurement = 0, FE = 1, Lab = 2 };
inline constexpr std::array<const char*, kActionCount> kActionNames = {"measurement", "fe", "lab"};

enum class Objective { Undecided, ConfirmedBelow, ConfirmedAbove };

// phi_B(x) = (1, x1, x2, x3 x4, exp(-|x|^2 / 2)).
Features basis(const Input& x);

// 64 Halton points (bases 2, 3, 5, 7, 11) mapped to [-1, 1]^5.
std::vector<Input> candidate_grid(std::size_t count = 64);

struct SurrogatePosterior {
  Features weight_mean = Features::Zero();
  Covariance weight_covariance = Covariance::Zero();

  double predictive_variance(const Input& x) const;
  // Rank-one Bayesian linear-regression update with y = beta^T phi_B(x) + noise.
  SurrogatePosterior condition(const Input& x, double y, double noise_variance) const;
};

struct GroundTruth {
  Features beta = Features::Zero();
  double defect = 0.0;
  double discrepancy = 0.0;
};

struct Config {
  double beta_prior_sd = 1.0;  // isotropic zero-mean prior on the surrogate weights
  double defect_prior_mean = 0.0;
  double defect_prior_sd = 0.05;
  double discrepancy_prior_mean = 7.6;
  double discrepancy_prior_sd = 0.2;
  double aleatory_sd = 1.0;
  double sensitivity = 1.0;  // gamma
  double measurement_noise_sd = 0.1;
  double lab_noise_sd = 0.5;
  double fe_noise_sd = 0.7;
  double cost_measurement = -10.0;
  double cost_fe = -0.1;
  double cost_lab = -1.0;
  double target_pf = 1e-3;
  int max_actions = 40;
  std::size_t mc_samples = 512;
  double failure_penalty = -20.0;
  std::size_t candidate_count = 64;

  static Config from(const KeyValueConfig& kv);
};

struct State {
  SurrogatePosterior surrogate;
  GaussianBelief defect;
  GaussianBelief discrepancy;
  std::vector<std::vector<double>> fe_observations;  // (x1..x5, y)
  int actions_taken = 0;
  std::array<int, kActionCount> action_counts{};
  Objective objective = Objective::Undecided;
  bool done = false;
  // Simulator-only fields.
  GroundTruth truth;
  std::uint64_t mc_seed = 0;  // common random numbers for every estimate in the episode

  bool success() const { return done && objective != Objective::Undecided; }
};

struct PfStats {
  double mean = 0.0;
  double sd = 0.0;
};

double pf_given_theta(const Features& beta, double defect, double discrepancy, const Config& config);

PfStats estimate_pf_stats(const State& state, const Config& config, std::uint64_t seed);

Objective check_objective(double mean, double sd, double target);

// Index of the candidate with the largest predictive variance; lowest index on ties.
std::size_t select_fe_input(const SurrogatePosterior& surrogate, const std::vector<Input>& pool);

// The prior state with the given hidden truth and estimator seed.
State prior_state(const Config& config, const GroundTruth& truth, std::uint64_t mc_seed);

class Env {
 public:
  using State = reliability::State;

  explicit Env(Config config);

  const Config& config() const { return config_; }
  const std::vector<Input>& candidates() const { return candidates_; }
  std::size_t action_count() const { return kActionCount; }
  std::size_t set_dim() const { return kInputDim + 1; }
  std::size_t aux_dim() const { return 5; }

  State reset(Rng& rng) const;
  StepResult<State> step(const State& s, std::size_t action, Rng& rng) const;
  // Transition with the observation noise supplied as a standard normal draw.
  StepResult<State> step_with_noise(const State& s, Action action, double standard_noise) const;
  ActionMask mask(const State& s) const { return ActionMask(kActionCount, !s.done); }
  EncodedState encode(const State& s) const;

 private:
  Config config_;
  std::vector<Input> candidates_;
};

// 10 x FE, 1 x Lab, 1 x Measurement, repeated.
Action benchmark_action(int actions_taken);
Policy<State> benchmark_policy();

}  // namespace pdt::reliability
