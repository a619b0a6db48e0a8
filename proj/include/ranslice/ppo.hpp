#pragma once

// PPO agent over a discrete action set: categorical policy network and value
// network (separate MLPs), GAE advantages, clipped-surrogate updates, and an
// epsilon-style uniform exploration overlay with step-wise decay.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ranslice/error.hpp"
#include "ranslice/nn.hpp"
#include "ranslice/random.hpp"

namespace ranslice {

struct AgentConfig {
  double learning_rate = 0.01;
  int batch_size = 4;
  double exploration_rate = 0.5;
  double exploration_decay = 0.5;
  int exploration_decay_interval = 200;
  double clip_ratio = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  int epochs_per_update = 4;
  std::vector<int> hidden_layers{64, 64};
  int state_dim = 0;
  int action_count = 0;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  bool normalize_advantages = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(exploration_rate >= 0 && exploration_rate <= 1)) throw ConfigError("exploration_rate must lie in [0, 1]");
    if (!(exploration_decay >= 0 && exploration_decay <= 1)) throw ConfigError("exploration_decay must lie in [0, 1]");
    if (exploration_decay_interval < 1) throw ConfigError("exploration_decay_interval must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs_per_update < 1) throw ConfigError("epochs_per_update must be >= 1");
    if (!(clip_ratio > 0)) throw ConfigError("clip_ratio must be positive");
    if (discount < 0 || discount > 1 || gae_lambda < 0 || gae_lambda > 1)
      throw ConfigError("discount and gae_lambda must lie in [0, 1]");
    if (state_dim < 1 || action_count < 1) throw ConfigError("state_dim and action_count must be positive");
    for (int h : hidden_layers)
      if (h < 1) throw ConfigError("hidden layer sizes must be positive");
  }
};

// epsilon(step) = eps0 * decay^floor(step / interval)
inline double exploration_rate(const AgentConfig& cfg, std::int64_t step) {
  return cfg.exploration_rate *
         std::pow(cfg.exploration_decay, static_cast<double>(step / cfg.exploration_decay_interval));
}

struct TransitionBatch {
  std::vector<std::vector<double>> states;
  std::vector<std::size_t> action_indices;
  std::vector<double> behavior_log_probs;
  std::vector<double> rewards;
  std::vector<double> value_estimates;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return states.size(); }
  bool empty() const { return states.empty(); }

  void push(std::vector<double> state, std::size_t action, double log_prob, double reward, double value) {
    states.push_back(std::move(state));
    action_indices.push_back(action);
    behavior_log_probs.push_back(log_prob);
    rewards.push_back(reward);
    value_estimates.push_back(value);
  }

  void clear() { *this = TransitionBatch{}; }
};

// Generalized advantage estimation over one contiguous batch, bootstrapped
// from the value of the state following the last transition.
inline void compute_gae(TransitionBatch& batch, double bootstrap_value, double discount, double lambda) {
  const auto n = batch.size();
  expects(batch.rewards.size() == n && batch.value_estimates.size() == n, "batch fields misaligned");
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);
  double gae = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 == n ? bootstrap_value : batch.value_estimates[t + 1];
    const double delta = batch.rewards[t] + discount * next_value - batch.value_estimates[t];
    gae = delta + discount * lambda * gae;
    batch.advantages[t] = gae;
    batch.returns[t] = gae + batch.value_estimates[t];
  }
}

struct PolicySample {
  std::size_t action_index = 0;
  double log_prob = 0.0;
  bool explored = false;
  double epsilon = 0.0;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

inline std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (double& x : p) x /= z;
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double lse = m + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

class PpoAgent {
 public:
  explicit PpoAgent(AgentConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::vector<int> policy_sizes{cfg_.state_dim};
    policy_sizes.insert(policy_sizes.end(), cfg_.hidden_layers.begin(), cfg_.hidden_layers.end());
    std::vector<int> value_sizes = policy_sizes;
    policy_sizes.push_back(cfg_.action_count);
    value_sizes.push_back(1);
    policy_ = Mlp(policy_sizes);
    value_ = Mlp(value_sizes);
    Rng init = make_rng(cfg_.seed, {0x1417});
    policy_.init_orthogonal(init, std::sqrt(2.0), 0.0);
    value_.init_orthogonal(init, std::sqrt(2.0), 0.0);
    reset_optimizers();
  }

  const AgentConfig& config() const { return cfg_; }
  Mlp& policy_network() { return policy_; }
  Mlp& value_network() { return value_; }
  const Mlp& policy_network() const { return policy_; }
  const Mlp& value_network() const { return value_; }

  void reset_optimizers() {
    policy_opt_ = Adam(policy_.parameter_count(), cfg_.learning_rate);
    value_opt_ = Adam(value_.parameter_count(), cfg_.learning_rate);
  }

  std::vector<double> action_probabilities(std::span<const double> state) const {
    return softmax(policy_.forward(state));
  }

  double log_prob(std::span<const double> state, std::size_t action) const {
    expects(action < static_cast<std::size_t>(cfg_.action_count), "action index out of range");
    return log_softmax(policy_.forward(state))[action];
  }

  double value_estimate(std::span<const double> state) const { return value_.forward(state)[0]; }

  // With probability epsilon(step) a uniformly random action, otherwise a draw
  // from the policy. The log-probability is always under the current policy.
  PolicySample policy_action(std::span<const double> state, std::int64_t step, Rng& rng) const {
    return sample_with_epsilon(state, exploration_rate(cfg_, step), rng);
  }

  PolicySample sample_with_epsilon(std::span<const double> state, double epsilon, Rng& rng) const {
    expects(static_cast<int>(state.size()) == cfg_.state_dim, "state dimension mismatch");
    const auto logp = log_softmax(policy_.forward(state));
    PolicySample s;
    s.epsilon = epsilon;
    const double u = uniform_open01(rng);
    if (u < epsilon) {
      s.explored = true;
      s.action_index = uniform_index(rng, logp.size());
    } else {
      double target = uniform_open01(rng);
      s.action_index = logp.size() - 1;
      for (std::size_t i = 0; i < logp.size(); ++i) {
        target -= std::exp(logp[i]);
        if (target <= 0) {
          s.action_index = i;
          break;
        }
      }
    }
    s.log_prob = logp[s.action_index];
    return s;
  }

  // Clipped-surrogate loss plus value_coef * mean squared value error minus the
  // entropy bonus. Gradients are accumulated into the two buffers when given.
  double loss_and_gradient(const TransitionBatch& batch, std::vector<double>* policy_grad,
                           std::vector<double>* value_grad, UpdateStats* stats = nullptr) const {
    const auto n = batch.size();
    expects(n > 0, "empty batch");
    expects(batch.advantages.size() == n && batch.returns.size() == n && batch.action_indices.size() == n &&
                batch.behavior_log_probs.size() == n,
            "batch fields misaligned");
    if (policy_grad) policy_grad->assign(policy_.parameter_count(), 0.0);
    if (value_grad) value_grad->assign(value_.parameter_count(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto advantages = prepared_advantages(batch);
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double kl = 0.0;
    Mlp::Cache cache;
    for (std::size_t i = 0; i < n; ++i) {
      const auto logits = policy_.forward(batch.states[i], policy_grad ? &cache : nullptr);
      const auto logp = log_softmax(logits);
      const std::size_t a = batch.action_indices[i];
      const double ratio = std::exp(logp[a] - batch.behavior_log_probs[i]);
      const double adv = advantages[i];
      const double clipped = std::clamp(ratio, 1.0 - cfg_.clip_ratio, 1.0 + cfg_.clip_ratio);
      const bool unclipped_active = ratio * adv <= clipped * adv;
      policy_loss -= (unclipped_active ? ratio * adv : clipped * adv) * inv_n;
      kl += (batch.behavior_log_probs[i] - logp[a]) * inv_n;
      double h = 0.0;
      for (double lp : logp) h -= std::exp(lp) * lp;
      entropy += h * inv_n;

      if (policy_grad) {
        std::vector<double> g(logits.size(), 0.0);
        const double dlogp = unclipped_active ? -ratio * adv * inv_n : 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double p = std::exp(logp[k]);
          g[k] = dlogp * ((k == a ? 1.0 : 0.0) - p);
          // d(-c * H)/d logit_k = c * p_k (log p_k + H)
          g[k] += cfg_.entropy_coef * inv_n * p * (logp[k] + h);
        }
        policy_.backward(cache, g, *policy_grad);
      }

      const double v = value_.forward(batch.states[i], value_grad ? &cache : nullptr)[0];
      const double err = v - batch.returns[i];
      value_loss += err * err * inv_n;
      if (value_grad) {
        const double g = cfg_.value_coef * 2.0 * err * inv_n;
        value_.backward(cache, std::span<const double>(&g, 1), *value_grad);
      }
    }
    if (stats) {
      stats->policy_loss = policy_loss;
      stats->value_loss = value_loss;
      stats->entropy = entropy;
      stats->approx_kl = kl;
    }
    return policy_loss + cfg_.value_coef * value_loss - cfg_.entropy_coef * entropy;
  }

  // Computes GAE on the batch, then runs epochs_per_update full-batch gradient
  // steps. On a non-finite loss or gradient the parameters are restored and
  // the update is reported as aborted.
  UpdateStats update(TransitionBatch& batch, double bootstrap_value) {
    compute_gae(batch, bootstrap_value, cfg_.discount, cfg_.gae_lambda);
    return optimize(batch);
  }

  // Update on a batch whose advantages and returns are already filled in.
  UpdateStats optimize(const TransitionBatch& batch) {
    const std::vector<double> policy_backup(policy_.parameters().begin(), policy_.parameters().end());
    const std::vector<double> value_backup(value_.parameters().begin(), value_.parameters().end());
    UpdateStats stats;
    std::vector<double> gp;
    std::vector<double> gv;
    for (int epoch = 0; epoch < cfg_.epochs_per_update; ++epoch) {
      const double loss = loss_and_gradient(batch, &gp, &gv, &stats);
      if (!std::isfinite(loss) || !all_finite(gp) || !all_finite(gv)) {
        std::ostringstream os;
        os << "non-finite PPO loss at epoch " << epoch << " (policy " << stats.policy_loss << ", value "
           << stats.value_loss << ")";
        std::copy(policy_backup.begin(), policy_backup.end(), policy_.parameters().begin());
        std::copy(value_backup.begin(), value_backup.end(), value_.parameters().begin());
        stats.aborted = true;
        stats.diagnostic = os.str();
        return stats;
      }
      clip_norm(gp);
      clip_norm(gv);
      policy_opt_.step(policy_.parameters(), gp);
      value_opt_.step(value_.parameters(), gv);
    }
    UpdateStats after;
    loss_and_gradient(batch, nullptr, nullptr, &after);
    stats.approx_kl = after.approx_kl;
    return stats;
  }

  // Text checkpoint: version header, then each network's layer sizes and
  // parameters as hexadecimal floats (exact round trip).
  void save(std::ostream& out) const {
    out << "ranslice-checkpoint 1\n";
    write_net(out, "policy", policy_);
    write_net(out, "value", value_);
  }

  void load(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "ranslice-checkpoint") throw ConfigError("not a ranslice checkpoint");
    if (version != 1) throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    read_net(in, "policy", policy_);
    read_net(in, "value", value_);
    reset_optimizers();
  }

 private:
  std::vector<double> prepared_advantages(const TransitionBatch& batch) const {
    std::vector<double> adv = batch.advantages;
    if (cfg_.normalize_advantages && adv.size() > 1) {
      double mean = 0.0;
      for (double a : adv) mean += a;
      mean /= static_cast<double>(adv.size());
      double var = 0.0;
      for (double a : adv) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / static_cast<double>(adv.size()));
      for (double& a : adv) a = (a - mean) / (sd + 1e-8);
    }
    return adv;
  }

  static bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  }

  void clip_norm(std::vector<double>& g) const {
    if (cfg_.max_grad_norm <= 0) return;
    double sq = 0.0;
    for (double x : g) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > cfg_.max_grad_norm)
      for (double& x : g) x *= cfg_.max_grad_norm / norm;
  }

  static void write_net(std::ostream& out, const char* name, const Mlp& net) {
    out << name << ' ' << net.layer_sizes().size();
    for (int s : net.layer_sizes()) out << ' ' << s;
    out << '\n';
    char buf[40];
    for (double p : net.parameters()) {
      std::snprintf(buf, sizeof buf, "%a\n", p);
      out << buf;
    }
  }

  static void read_net(std::istream& in, const char* name, Mlp& net) {
    std::string tag;
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != name) throw ConfigError(std::string("checkpoint: missing section ") + name);
    std::vector<int> sizes(count);
    for (int& s : sizes)
      if (!(in >> s)) throw ConfigError("checkpoint: truncated layer sizes");
    if (sizes != net.layer_sizes()) throw ConfigError(std::string("checkpoint: ") + name + " layer sizes differ");
    std::string token;
    for (double& p : net.parameters()) {
      if (!(in >> token)) throw ConfigError("checkpoint: truncated parameters");
      p = std::strtod(token.c_str(), nullptr);
    }
  }

  AgentConfig cfg_;
  Mlp policy_;
  Mlp value_;
  Adam policy_opt_;
  Adam value_opt_;
};

}  // namespace ranslice
