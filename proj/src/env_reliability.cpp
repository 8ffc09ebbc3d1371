#include "pdt/env_reliability.hpp"

#include <cmath>

#include "pdt/error.hpp"

namespace pdt::reliability {

namespace {

double radical_inverse(std::size_t i, std::size_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Square root factor A with A A^T = cov, tolerant of semi-definite input.
Covariance sqrt_factor(const Covariance& cov) {
  Eigen::SelfAdjointEigenSolver<Covariance> eig(cov);
  const Features roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal();
}

}  // namespace

Features basis(const Input& x) {
  Features f;
  f << 1.0, x(0), x(1), x(2) * x(3), std::exp(-0.5 * x.squaredNorm());
  return f;
}

std::vector<Input> candidate_grid(std::size_t count) {
  constexpr std::array<std::size_t, kInputDim> bases = {2, 3, 5, 7, 11};
  std::vector<Input> grid(count);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t k = 0; k < kInputDim; ++k) grid[i](k) = 2.0 * radical_inverse(i + 1, bases[k]) - 1.0;
  return grid;
}

double SurrogatePosterior::predictive_variance(const Input& x) const {
  const Features f = basis(x);
  return f.dot(weight_covariance * f);
}

SurrogatePosterior SurrogatePosterior::condition(const Input& x, double y, double noise_variance) const {
  if (!(noise_variance > 0.0)) throw InvalidArgument("FE noise variance must be positive");
  const Features f = basis(x);
  const Features cf = weight_covariance * f;
  const double s = noise_variance + f.dot(cf);
  const Features gain = cf / s;
  SurrogatePosterior next;
  next.weight_mean = weight_mean + gain * (y - f.dot(weight_mean));
  const Covariance updated = weight_covariance - s * gain * gain.transpose();
  next.weight_covariance = 0.5 * (updated + updated.transpose());
  return next;
}

Config Config::from(const KeyValueConfig& kv) {
  const std::string p = "env.reliability.";
  Config c;
  c.beta_prior_sd = kv.get_double(p + "beta_prior_sd", c.beta_prior_sd);
  c.defect_prior_mean = kv.get_double(p + "defect_prior_mean", c.defect_prior_mean);
  c.defect_prior_sd = kv.get_double(p + "defect_prior_sd", c.defect_prior_sd);
  c.discrepancy_prior_mean = kv.get_double(p + "discrepancy_prior_mean", c.discrepancy_prior_mean);
  c.discrepancy_prior_sd = kv.get_double(p + "discrepancy_prior_sd", c.discrepancy_prior_sd);
  c.aleatory_sd = kv.get_double(p + "aleatory_sd", c.aleatory_sd);
  c.sensitivity = kv.get_double(p + "sensitivity", c.sensitivity);
  c.measurement_noise_sd = kv.get_double(p + "measurement_noise_sd", c.measurement_noise_sd);
  c.lab_noise_sd = kv.get_double(p + "lab_noise_sd", c.lab_noise_sd);
  c.fe_noise_sd = kv.get_double(p + "fe_noise_sd", c.fe_noise_sd);
  c.cost_measurement = kv.get_double(p + "cost_measurement", c.cost_measurement);
  c.cost_fe = kv.get_double(p + "cost_fe", c.cost_fe);
  c.cost_lab = kv.get_double(p + "cost_lab", c.cost_lab);
  c.target_pf = kv.get_double(p + "target_pf", c.target_pf);
  c.max_actions = static_cast<int>(kv.get_int(p + "max_actions", c.max_actions));
  c.mc_samples = static_cast<std::size_t>(kv.get_int(p + "mc_samples", static_cast<std::int64_t>(c.mc_samples)));
  c.failure_penalty = kv.get_double(p + "failure_penalty", c.failure_penalty);
  c.candidate_count =
      static_cast<std::size_t>(kv.get_int(p + "candidate_count", static_cast<std::int64_t>(c.candidate_count)));
  if (!(c.aleatory_sd > 0.0)) throw ConfigError(p + "aleatory_sd must be positive");
  if (c.beta_prior_sd < 0.0 || c.defect_prior_sd < 0.0 || c.discrepancy_prior_sd < 0.0)
    throw ConfigError(p + "prior standard deviations must be non-negative");
  if (!(c.measurement_noise_sd > 0.0 && c.lab_noise_sd > 0.0 && c.fe_noise_sd > 0.0))
    throw ConfigError(p + "observation noise must be positive");
  if (c.max_actions < 1 || c.mc_samples < 2 || c.candidate_count < 1)
    throw ConfigError(p + "max_actions, mc_samples and candidate_count out of range");
  return c;
}

double pf_given_theta(const Features& beta, double defect, double discrepancy, const Config& config) {
  if (!(config.aleatory_sd > 0.0)) throw InvalidArgument("aleatory sd must be positive");
  const double margin = discrepancy + config.sensitivity * defect;
  const double spread = std::sqrt(beta.squaredNorm() + config.aleatory_sd * config.aleatory_sd);
  return normal_cdf(-margin / spread);
}

PfStats estimate_pf_stats(const State& state, const Config& config, std::uint64_t seed) {
  Rng rng(seed);
  const Covariance factor = sqrt_factor(state.surrogate.weight_covariance);
  const double defect_sd = state.defect.sd();
  const double discrepancy_sd = state.discrepancy.sd();
  // Welford keeps the spread exactly zero when every sample coincides.
  double mean = 0.0, m2 = 0.0;
  Features z;
  for (std::size_t i = 0; i < config.mc_samples; ++i) {
    for (std::size_t k = 0; k < kFeatureDim; ++k) z(k) = rng.normal();
    const Features beta = state.surrogate.weight_mean + factor * z;
    const double defect = state.defect.mean + defect_sd * rng.normal();
    const double discrepancy = state.discrepancy.mean + discrepancy_sd * rng.normal();
    const double pf = pf_given_theta(beta, defect, discrepancy, config);
    const double delta = pf - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (pf - mean);
  }
  const double n = static_cast<double>(config.mc_samples);
  return {mean, n > 1 ? std::sqrt(std::max(m2, 0.0) / (n - 1.0)) : 0.0};
}

Objective check_objective(double mean, double sd, double target) {
  if (!(sd >= 0.0)) throw InvalidArgument("standard deviation must be non-negative");
  if (mean + 2.0 * sd < target) return Objective::ConfirmedBelow;
  if (mean - 2.0 * sd > target) return Objective::ConfirmedAbove;
  return Objective::Undecided;
}

std::size_t select_fe_input(const SurrogatePosterior& surrogate, const std::vector<Input>& pool) {
  if (pool.empty()) throw InvalidArgument("empty candidate pool");
  std::size_t best = 0;
  double best_var = surrogate.predictive_variance(pool[0]);
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const double v = surrogate.predictive_variance(pool[i]);
    if (v > best_var) {
      best = i;
      best_var = v;
    }
  }
  return best;
}

State prior_state(const Config& config, const GroundTruth& truth, std::uint64_t mc_seed) {
  State s;
  s.surrogate.weight_covariance = Covariance::Identity() * (config.beta_prior_sd * config.beta_prior_sd);
  s.defect = {config.defect_prior_mean, config.defect_prior_sd * config.defect_prior_sd};
  s.discrepancy = {config.discrepancy_prior_mean, config.discrepancy_prior_sd * config.discrepancy_prior_sd};
  s.truth = truth;
  s.mc_seed = mc_seed;
  return s;
}

Env::Env(Config config) : config_(config), candidates_(candidate_grid(config.candidate_count)) {}

State Env::reset(Rng& rng) const {
  GroundTruth truth;
  for (std::size_t k = 0; k < kFeatureDim; ++k) truth.beta(k) = config_.beta_prior_sd * rng.normal();
  truth.defect = config_.defect_prior_mean + config_.defect_prior_sd * rng.normal();
  truth.discrepancy = config_.discrepancy_prior_mean + config_.discrepancy_prior_sd * rng.normal();
  const std::uint64_t mc_seed = rng.next();
  return prior_state(config_, truth, mc_seed);
}

StepResult<State> Env::step(const State& s, std::size_t action, Rng& rng) const {
  if (action >= kActionCount) throw InvalidArgument("action index out of range");
  return step_with_noise(s, static_cast<Action>(action), rng.normal());
}

StepResult<State> Env::step_with_noise(const State& s, Action action, double standard_noise) const {
  if (s.done) throw StepAfterDone("reliability episode already finished");
  State next = s;
  double reward = 0.0;
  switch (action) {
    case Action::Measurement: {
      const double sd = config_.measurement_noise_sd;
      next.defect = gaussian_condition(s.defect, s.truth.defect + sd * standard_noise, sd * sd);
      reward = config_.cost_measurement;
      break;
    }
    case Action::Lab: {
      const double sd = config_.lab_noise_sd;
      next.discrepancy = gaussian_condition(s.discrepancy, s.truth.discrepancy + sd * standard_noise, sd * sd);
      reward = config_.cost_lab;
      break;
    }
    case Action::FE: {
      const double sd = config_.fe_noise_sd;
      const Input& x = candidates_[select_fe_input(s.surrogate, candidates_)];
      const double y = s.truth.beta.dot(basis(x)) + sd * standard_noise;
      next.surrogate = s.surrogate.condition(x, y, sd * sd);
      std::vector<double> obs(x.data(), x.data() + kInputDim);
      obs.push_back(y);
      next.fe_observations.push_back(std::move(obs));
      reward = config_.cost_fe;
      break;
    }
    default:
      throw InvalidArgument("unknown reliability action");
  }
  ++next.actions_taken;
  ++next.action_counts[static_cast<std::size_t>(action)];

  const PfStats stats = estimate_pf_stats(next, config_, next.mc_seed);
  next.objective = check_objective(stats.mean, stats.sd, config_.target_pf);
  if (next.objective != Objective::Undecided) {
    next.done = true;
  } else if (next.actions_taken >= config_.max_actions) {
    next.done = true;
    reward += config_.failure_penalty;
  }
  const bool done = next.done;
  return {std::move(next), reward, done};
}

EncodedState Env::encode(const State& s) const {
  return {s.fe_observations,
          {s.defect.mean, s.defect.sd(), s.discrepancy.mean, s.discrepancy.sd(),
           static_cast<double>(s.actions_taken) / config_.max_actions}};
}

Action benchmark_action(int actions_taken) {
  const int phase = actions_taken % 12;
  if (phase < 10) return Action::FE;
  return phase == 10 ? Action::Lab : Action::Measurement;
}

Policy<State> benchmark_policy() {
  return [](const State& s, const ActionMask&, Rng&) {
    return static_cast<std::size_t>(benchmark_action(s.actions_taken));
  };
}

}  // namespace pdt::reliability
