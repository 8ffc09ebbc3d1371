#pragma once

// Permutation-invariant set network f(I) = rho( sum_{y in I} phi(y) ++ aux ).
//
// phi and rho are plain multilayer perceptrons with ReLU hidden layers and a
// linear output. Set elements are sorted lexicographically before the sum so
// that the pooled vector, and therefore the output, is bit-identical for every
// ordering of the same multiset.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "pdt/belief_mdp.hpp"
#include "pdt/random.hpp"

namespace pdt::nn {

using SetElements = std::vector<std::vector<double>>;

class Mlp {
 public:
  // Intermediate activations; layer 0 is the input.
  struct Cache {
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;
  explicit Mlp(std::vector<std::size_t> sizes);

  // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void initialize(Rng& rng);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::vector<double> forward(std::span<const double> input) const;
  std::span<const double> forward(std::span<const double> input, Cache& cache) const;

  // Adds dL/dparams into `grad`. When `input_grad` is non-null it receives
  // dL/dinput.
  void backward(const Cache& cache, std::span<const double> upstream, std::span<double> grad,
                std::vector<double>* input_grad) const;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Same shapes as the network parameters.
struct GradientBundle {
  std::vector<double> phi;
  std::vector<double> rho;

  void zero();
  void scale(double factor);
  double max_abs() const;
};

struct Architecture {
  std::size_t set_dim = 1;
  std::size_t aux_dim = 0;
  std::size_t output_dim = 1;
  std::vector<std::size_t> phi_hidden = {32, 32};
  std::size_t latent_dim = 16;
  std::vector<std::size_t> rho_hidden = {32, 32};
};

class DeepSetsNet {
 public:
  struct Cache {
    std::vector<const std::vector<double>*> order;
    std::vector<Mlp::Cache> phi;
    std::vector<double> pooled;  // sum of phi outputs followed by aux
    Mlp::Cache rho;
  };

  DeepSetsNet() = default;
  DeepSetsNet(const Architecture& arch, std::uint64_t seed);
  DeepSetsNet(Mlp phi, Mlp rho, std::size_t aux_dim);

  const Mlp& phi() const { return phi_; }
  const Mlp& rho() const { return rho_; }
  Mlp& phi() { return phi_; }
  Mlp& rho() { return rho_; }
  std::size_t set_dim() const { return phi_.input_dim(); }
  std::size_t latent_dim() const { return phi_.output_dim(); }
  std::size_t aux_dim() const { return aux_dim_; }
  std::size_t output_dim() const { return rho_.output_dim(); }
  std::size_t param_count() const { return phi_.param_count() + rho_.param_count(); }

  std::vector<double> forward(const SetElements& set, std::span<const double> aux) const;
  std::vector<double> forward(const EncodedState& state) const { return forward(state.set, state.aux); }
  std::span<const double> forward(const SetElements& set, std::span<const double> aux, Cache& cache) const;

  GradientBundle backward(const SetElements& set, std::span<const double> aux,
                          std::span<const double> upstream) const;
  // Accumulates into `grad` using a cache filled by the caching forward.
  void backward(const Cache& cache, std::span<const double> upstream, GradientBundle& grad) const;

  GradientBundle zero_gradient() const;

  nlohmann::json to_json() const;
  static DeepSetsNet from_json(const nlohmann::json& j);

 private:
  void check_inputs(const SetElements& set, std::span<const double> aux) const;

  Mlp phi_;
  Mlp rho_;
  std::size_t aux_dim_ = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m_phi, v_phi, m_rho, v_rho;
  std::int64_t step = 0;
};

AdamState make_adam_state(const DeepSetsNet& net);

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t step, double learning_rate, const AdamConfig& config = {});
void adam_update(DeepSetsNet& net, const GradientBundle& grads, AdamState& state, double learning_rate,
                 const AdamConfig& config = {});

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& payload);
nlohmann::json load_checkpoint(const std::filesystem::path& path);

}  // namespace pdt::nn
