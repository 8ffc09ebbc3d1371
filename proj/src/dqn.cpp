#include "pdt/dqn.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>

namespace pdt::dqn {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InvalidArgument("replay capacity must be positive");
  ring_.reserve(std::min<std::size_t>(capacity_, 4096));
}

void ReplayBuffer::push(StoredTransition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
  ++pushed_;
}

const StoredTransition& ReplayBuffer::at(std::size_t i) const {
  if (i >= ring_.size()) throw InvalidArgument("replay index out of range");
  const std::size_t oldest = ring_.size() < capacity_ ? 0 : next_;
  return ring_[(oldest + i) % ring_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  batch = std::min(batch, ring_.size());
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> all(ring_.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch; ++i) std::swap(all[i], all[i + rng.index(all.size() - i)]);
  all.resize(batch);
  return all;
}

double TrainConfig::epsilon_at(std::size_t episode) const {
  if (epsilon_decay_episodes == 0 || episode >= epsilon_decay_episodes) return epsilon_end;
  const double frac = static_cast<double>(episode) / static_cast<double>(epsilon_decay_episodes);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

void TrainConfig::validate() const {
  auto prob = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (batch_size == 0 || replay_capacity == 0 || target_sync_steps == 0 || train_every == 0)
    throw ConfigError("batch size, replay capacity, sync period and train_every must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!prob(discount)) throw ConfigError("discount must lie in [0, 1]");
  if (!prob(epsilon_start) || !prob(epsilon_end)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(reward_scale > 0.0)) throw ConfigError("reward scale must be positive");
}

TrainConfig TrainConfig::from(const KeyValueConfig& kv, const std::string& prefix, TrainConfig d) {
  const std::string p = prefix + ".";
  auto count = [&](const std::string& key, std::size_t fallback) {
    const auto v = kv.get_int(p + key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(p + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  auto sizes = [&](const std::string& key, const std::vector<std::size_t>& fallback) {
    std::string joined;
    for (std::size_t i = 0; i < fallback.size(); ++i) joined += (i ? "," : "") + std::to_string(fallback[i]);
    const std::string s = kv.get_string(p + key, joined);
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
      const auto comma = s.find(',', pos);
      const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        out.push_back(static_cast<std::size_t>(std::stoul(tok)));
      } catch (const std::exception&) {
        throw ConfigError(p + key + ": expected comma-separated layer sizes");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return out;
  };
  TrainConfig c = d;
  c.episodes = count("episodes", d.episodes);
  c.batch_size = count("batch_size", d.batch_size);
  c.learning_rate = kv.get_double(p + "learning_rate", d.learning_rate);
  c.discount = kv.get_double(p + "discount", d.discount);
  c.epsilon_start = kv.get_double(p + "epsilon_start", d.epsilon_start);
  c.epsilon_end = kv.get_double(p + "epsilon_end", d.epsilon_end);
  c.epsilon_decay_episodes = count("epsilon_decay_episodes", c.episodes / 2);
  c.target_sync_steps = count("target_sync_steps", d.target_sync_steps);
  c.replay_capacity = count("replay_capacity", d.replay_capacity);
  c.warmup_transitions = count("warmup_transitions", d.warmup_transitions);
  c.train_every = count("train_every", d.train_every);
  c.reward_scale = kv.get_double(p + "reward_scale", d.reward_scale);
  c.double_dqn = kv.get_bool(p + "double_dqn", d.double_dqn);
  c.seed = static_cast<std::uint64_t>(kv.get_int(p + "seed", static_cast<std::int64_t>(d.seed)));
  c.architecture.phi_hidden = sizes("phi_hidden", d.architecture.phi_hidden);
  c.architecture.latent_dim = count("latent_dim", d.architecture.latent_dim);
  c.architecture.rho_hidden = sizes("rho_hidden", d.architecture.rho_hidden);
  c.validate();
  return c;
}

std::size_t greedy_action(std::span<const double> q, const ActionMask& mask) {
  if (q.size() != mask.size()) throw DimensionMismatch("q-values and mask differ in length");
  std::size_t best = q.size();
  for (std::size_t a = 0; a < q.size(); ++a)
    if (mask[a] && (best == q.size() || q[a] > q[best])) best = a;
  if (best == q.size()) throw NoLegalAction("every action is masked");
  return best;
}

std::size_t epsilon_greedy(std::span<const double> q, const ActionMask& mask, double epsilon, Rng& rng) {
  const std::size_t legal = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (legal == 0) throw NoLegalAction("every action is masked");
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    std::size_t pick = rng.index(legal);
    for (std::size_t a = 0; a < mask.size(); ++a)
      if (mask[a] && pick-- == 0) return a;
  }
  return greedy_action(q, mask);
}

double td_target(double reward, bool done, std::span<const double> next_q, const ActionMask& next_mask,
                 double discount) {
  if (done) return reward;
  return reward + discount * next_q[greedy_action(next_q, next_mask)];
}

double learn_batch(nn::DeepSetsNet& online, const nn::DeepSetsNet& target, nn::AdamState& adam,
                   const ReplayBuffer& buffer, const std::vector<std::size_t>& batch, const TrainConfig& config) {
  if (batch.empty()) return 0.0;
  nn::GradientBundle grad = online.zero_gradient();
  nn::DeepSetsNet::Cache cache;
  std::vector<double> upstream(online.output_dim(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t idx : batch) {
    const StoredTransition& t = buffer.at(idx);
    double y = t.reward;
    if (!t.done) {
      const auto next_q = target.forward(t.next_state);
      if (config.double_dqn) {
        const auto pick = greedy_action(online.forward(t.next_state), t.next_mask);
        y += config.discount * next_q[pick];
      } else {
        y = td_target(t.reward, false, next_q, t.next_mask, config.discount);
      }
    }
    const auto q = online.forward(t.state.set, t.state.aux, cache);
    const double err = q[t.action] - y;
    loss += err * err * inv_batch;
    std::fill(upstream.begin(), upstream.end(), 0.0);
    upstream[t.action] = err * inv_batch;
    online.backward(cache, upstream, grad);
  }
  if (std::isfinite(loss)) nn::adam_update(online, grad, adam, config.learning_rate);
  return loss;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "episode,return,epsilon,loss_ma\n";
  for (const auto& p : curve)
    out << p.episode << ',' << format_double(p.episode_return) << ',' << format_double(p.epsilon) << ','
        << format_double(p.loss_moving_average) << '\n';
}

}  // namespace pdt::dqn
