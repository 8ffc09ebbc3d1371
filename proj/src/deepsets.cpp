#include "pdt/deepsets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pdt/error.hpp"

namespace pdt::nn {

namespace {

constexpr int kCheckpointVersion = 1;

std::vector<std::size_t> concat(std::size_t first, const std::vector<std::size_t>& mid, std::size_t last) {
  std::vector<std::size_t> out{first};
  out.insert(out.end(), mid.begin(), mid.end());
  out.push_back(last);
  return out;
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw InvalidArgument("an MLP needs at least an input and an output size");
  for (auto s : sizes_)
    if (s == 0) throw InvalidArgument("MLP layer sizes must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void Mlp::initialize(Rng& rng) {
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    const std::size_t end = l + 1 < layer_count() ? offsets_[l + 1] : params_.size();
    for (std::size_t i = offsets_[l]; i < end; ++i) params_[i] = bound * (2.0 * rng.uniform() - 1.0);
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Cache cache;
  auto out = forward(input, cache);
  return {out.begin(), out.end()};
}

std::span<const double> Mlp::forward(std::span<const double> input, Cache& cache) const {
  if (input.size() != input_dim()) throw DimensionMismatch("MLP input has wrong dimension");
  cache.activations.resize(sizes_.size());
  cache.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    const auto& in = cache.activations[l];
    auto& out = cache.activations[l + 1];
    out.resize(n_out);
    const bool hidden = l + 1 < layer_count();
    for (std::size_t j = 0; j < n_out; ++j) {
      double z = b[j];
      const double* row = w + j * n_in;
      for (std::size_t i = 0; i < n_in; ++i) z += row[i] * in[i];
      out[j] = hidden && z < 0.0 ? 0.0 : z;
    }
  }
  return cache.activations.back();
}

void Mlp::backward(const Cache& cache, std::span<const double> upstream, std::span<double> grad,
                   std::vector<double>* input_grad) const {
  if (upstream.size() != output_dim()) throw DimensionMismatch("upstream gradient has wrong dimension");
  if (grad.size() != params_.size()) throw DimensionMismatch("gradient buffer has wrong size");
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> next;
  for (std::size_t l = layer_count(); l-- > 0;) {
    const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
    const auto& in = cache.activations[l];
    if (l + 1 < layer_count()) {
      const auto& out = cache.activations[l + 1];
      for (std::size_t j = 0; j < n_out; ++j)
        if (!(out[j] > 0.0)) delta[j] = 0.0;
    }
    double* gw = grad.data() + weight_offset(l);
    double* gb = grad.data() + bias_offset(l);
    for (std::size_t j = 0; j < n_out; ++j) {
      const double d = delta[j];
      if (d == 0.0) continue;
      gb[j] += d;
      double* row = gw + j * n_in;
      for (std::size_t i = 0; i < n_in; ++i) row[i] += d * in[i];
    }
    if (l == 0 && input_grad == nullptr) break;
    const double* w = params_.data() + weight_offset(l);
    next.assign(n_in, 0.0);
    for (std::size_t j = 0; j < n_out; ++j) {
      const double d = delta[j];
      if (d == 0.0) continue;
      const double* row = w + j * n_in;
      for (std::size_t i = 0; i < n_in; ++i) next[i] += row[i] * d;
    }
    delta.swap(next);
  }
  if (input_grad) *input_grad = std::move(delta);
}

void GradientBundle::zero() {
  std::fill(phi.begin(), phi.end(), 0.0);
  std::fill(rho.begin(), rho.end(), 0.0);
}

void GradientBundle::scale(double factor) {
  for (double& g : phi) g *= factor;
  for (double& g : rho) g *= factor;
}

double GradientBundle::max_abs() const {
  double m = 0.0;
  for (double g : phi) m = std::max(m, std::abs(g));
  for (double g : rho) m = std::max(m, std::abs(g));
  return m;
}

DeepSetsNet::DeepSetsNet(const Architecture& arch, std::uint64_t seed)
    : phi_(concat(arch.set_dim, arch.phi_hidden, arch.latent_dim)),
      rho_(concat(arch.latent_dim + arch.aux_dim, arch.rho_hidden, arch.output_dim)),
      aux_dim_(arch.aux_dim) {
  Rng rng(seed);
  phi_.initialize(rng);
  rho_.initialize(rng);
}

DeepSetsNet::DeepSetsNet(Mlp phi, Mlp rho, std::size_t aux_dim)
    : phi_(std::move(phi)), rho_(std::move(rho)), aux_dim_(aux_dim) {
  if (phi_.output_dim() + aux_dim_ != rho_.input_dim())
    throw DimensionMismatch("phi output plus aux must match rho input");
}

void DeepSetsNet::check_inputs(const SetElements& set, std::span<const double> aux) const {
  if (aux.size() != aux_dim_) throw DimensionMismatch("aux vector has wrong dimension");
  for (const auto& y : set)
    if (y.size() != set_dim()) throw DimensionMismatch("set element has wrong dimension");
}

std::span<const double> DeepSetsNet::forward(const SetElements& set, std::span<const double> aux,
                                             Cache& cache) const {
  check_inputs(set, aux);
  cache.order.clear();
  for (const auto& y : set) cache.order.push_back(&y);
  std::sort(cache.order.begin(), cache.order.end(),
            [](const std::vector<double>* a, const std::vector<double>* b) { return *a < *b; });

  const std::size_t p = latent_dim();
  cache.pooled.assign(p + aux_dim_, 0.0);
  cache.phi.resize(set.size());
  for (std::size_t k = 0; k < cache.order.size(); ++k) {
    auto out = phi_.forward(*cache.order[k], cache.phi[k]);
    for (std::size_t i = 0; i < p; ++i) cache.pooled[i] += out[i];
  }
  std::copy(aux.begin(), aux.end(), cache.pooled.begin() + static_cast<std::ptrdiff_t>(p));
  return rho_.forward(cache.pooled, cache.rho);
}

std::vector<double> DeepSetsNet::forward(const SetElements& set, std::span<const double> aux) const {
  Cache cache;
  auto out = forward(set, aux, cache);
  return {out.begin(), out.end()};
}

GradientBundle DeepSetsNet::zero_gradient() const {
  return {std::vector<double>(phi_.param_count(), 0.0), std::vector<double>(rho_.param_count(), 0.0)};
}

void DeepSetsNet::backward(const Cache& cache, std::span<const double> upstream, GradientBundle& grad) const {
  if (grad.phi.size() != phi_.param_count() || grad.rho.size() != rho_.param_count())
    throw DimensionMismatch("gradient bundle shape does not match network");
  std::vector<double> pooled_grad;
  const bool need_phi = !cache.order.empty();
  rho_.backward(cache.rho, upstream, grad.rho, need_phi ? &pooled_grad : nullptr);
  if (!need_phi) return;
  std::span<const double> latent_grad(pooled_grad.data(), latent_dim());
  for (std::size_t k = 0; k < cache.order.size(); ++k) phi_.backward(cache.phi[k], latent_grad, grad.phi, nullptr);
}

GradientBundle DeepSetsNet::backward(const SetElements& set, std::span<const double> aux,
                                     std::span<const double> upstream) const {
  if (upstream.size() != output_dim()) throw DimensionMismatch("upstream gradient has wrong dimension");
  Cache cache;
  forward(set, aux, cache);
  GradientBundle grad = zero_gradient();
  backward(cache, upstream, grad);
  return grad;
}

nlohmann::json DeepSetsNet::to_json() const {
  auto params = [](std::span<const double> p) { return std::vector<double>(p.begin(), p.end()); };
  return {
      {"format", "deepsets"},
      {"version", kCheckpointVersion},
      {"aux_dim", aux_dim_},
      {"phi", {{"sizes", phi_.sizes()}, {"params", params(phi_.params())}}},
      {"rho", {{"sizes", rho_.sizes()}, {"params", params(rho_.params())}}},
  };
}

DeepSetsNet DeepSetsNet::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "deepsets" || j.value("version", 0) != kCheckpointVersion)
    throw InvalidArgument("not a version " + std::to_string(kCheckpointVersion) + " deep-sets checkpoint");
  auto read = [](const nlohmann::json& part) {
    Mlp m(part.at("sizes").get<std::vector<std::size_t>>());
    const auto values = part.at("params").get<std::vector<double>>();
    if (values.size() != m.param_count()) throw DimensionMismatch("checkpoint parameter count mismatch");
    std::copy(values.begin(), values.end(), m.params().begin());
    return m;
  };
  return {read(j.at("phi")), read(j.at("rho")), j.at("aux_dim").get<std::size_t>()};
}

AdamState make_adam_state(const DeepSetsNet& net) {
  AdamState s;
  s.m_phi.assign(net.phi().param_count(), 0.0);
  s.v_phi.assign(net.phi().param_count(), 0.0);
  s.m_rho.assign(net.rho().param_count(), 0.0);
  s.v_rho.assign(net.rho().param_count(), 0.0);
  return s;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t step, double learning_rate, const AdamConfig& config) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
    throw DimensionMismatch("adam buffers disagree in size");
  if (step < 1) throw InvalidArgument("adam step counter starts at 1");
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grads[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    params[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
  }
}

void adam_update(DeepSetsNet& net, const GradientBundle& grads, AdamState& state, double learning_rate,
                 const AdamConfig& config) {
  ++state.step;
  adam_update(net.phi().params(), grads.phi, state.m_phi, state.v_phi, state.step, learning_rate, config);
  adam_update(net.rho().params(), grads.rho, state.m_rho, state.v_rho, state.step, learning_rate, config);
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << payload.dump(1) << '\n';
}

nlohmann::json load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingCheckpoint(path.string());
  return nlohmann::json::parse(in);
}

}  // namespace pdt::nn
