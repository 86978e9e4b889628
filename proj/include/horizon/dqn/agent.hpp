#pragma once

// Double-DQN learner over the three discrete betting actions
// {half Kelly, Kelly, endpoint}.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "horizon/core.hpp"
#include "horizon/distributions.hpp"
#include "horizon/dqn/features.hpp"
#include "horizon/dqn/mlp.hpp"
#include "horizon/dqn/replay.hpp"
#include "horizon/error.hpp"
#include "horizon/random.hpp"
#include "horizon/strategies.hpp"

namespace horizon::dqn {

inline constexpr int kNumActions = 3;

struct TrainConfig {
  double gamma = 1.0;
  double lr = 3e-4;
  std::size_t batch = 512;
  std::size_t min_buffer = 40'000;
  std::size_t target_update = 1000;  // gradient steps between hard copies
  double eps_start = 1.0;
  double eps_min = 0.02;
  double eps_decay = 0.99998;  // per episode
  int episodes = 20'000;
  double huber_delta = 1.0;
  double grad_clip = 10.0;
  std::size_t buffer_capacity = 3'200'000;
  int num_envs = 16;
  int train_every = 16;  // environment steps per gradient step
  int eval_every = 1000;  // episodes
  int eval_episodes = 4000;
  std::uint64_t eval_seed = 20240607;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
  int plateau_patience = 3;
  double plateau_factor = 0.5;
  double min_lr = 1e-5;
  std::vector<int> hidden = {256, 128};
  double alpha = 0.05;
  double clip_eps = 1e-3;
  std::uint64_t seed = 0;

  std::vector<int> layer_sizes() const {
    std::vector<int> s{static_cast<int>(kFeatureCount)};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(kNumActions);
    return s;
  }
};

inline Mlp make_qnet(const std::vector<int>& sizes, std::uint64_t seed) {
  Mlp net(sizes);
  Rng rng(derive_seed(seed, StreamKind::init, 0));
  net.init_uniform(rng);
  return net;
}

// Argmax with ties to the lowest index.
inline int argmax_action(const double* q, int n = kNumActions) {
  int best = 0;
  for (int a = 1; a < n; ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

inline Mlp::Matrix feature_column(const FeatureVector& f) {
  Mlp::Matrix x(static_cast<Eigen::Index>(kFeatureCount), 1);
  for (std::size_t i = 0; i < kFeatureCount; ++i) x(static_cast<Eigen::Index>(i), 0) = f[i];
  return x;
}

// Epsilon-greedy choice; one uniform draw decides between exploring and exploiting.
inline Action act(const Mlp& net, const FeatureVector& f, double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) return static_cast<Action>(rng.below(kNumActions));
  const Mlp::Matrix q = net.forward(feature_column(f));
  return static_cast<Action>(argmax_action(q.data(), static_cast<int>(q.rows())));
}

class AdamW {
 public:
  AdamW() = default;
  AdamW(std::size_t n, double beta1, double beta2, double eps, double weight_decay)
      : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= lr * wd_ * params[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  long steps() const { return t_; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, wd_ = 1e-4;
  long t_ = 0;
  std::vector<double> m_, v_;
};

struct TdLoss {
  double loss = 0.0;
  std::vector<double> grad;
};

inline double huber(double d, double delta) {
  const double a = std::abs(d);
  return a <= delta ? 0.5 * d * d : delta * (a - 0.5 * delta);
}

// Mean Huber loss of Q_online(s,a) against the Double-DQN target, and its
// gradient with respect to the online parameters (target held fixed).
inline TdLoss td_loss(const Mlp& online, const Mlp& target, std::span<const Transition* const> batch, double gamma,
                      double huber_delta) {
  if (batch.empty()) throw UsageError("empty training batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto F = static_cast<Eigen::Index>(kFeatureCount);
  Mlp::Matrix s(F, B), s2(F, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const Transition& tr = *batch[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < F; ++i) {
      s(i, j) = tr.state[static_cast<std::size_t>(i)];
      s2(i, j) = tr.next_state[static_cast<std::size_t>(i)];
    }
  }

  std::vector<double> y(batch.size());
  bool any_bootstrap = false;
  for (const Transition* tr : batch) any_bootstrap = any_bootstrap || !tr->terminal;
  Mlp::Matrix q_next_online, q_next_target;
  if (any_bootstrap && gamma != 0.0) {
    q_next_online = online.forward(s2);
    q_next_target = target.forward(s2);
  }
  for (Eigen::Index j = 0; j < B; ++j) {
    const Transition& tr = *batch[static_cast<std::size_t>(j)];
    double boot = 0.0;
    if (!tr.terminal && gamma != 0.0) {
      const int a_star = argmax_action(q_next_online.col(j).data(), static_cast<int>(q_next_online.rows()));
      boot = gamma * q_next_target(a_star, j);
    }
    y[static_cast<std::size_t>(j)] = tr.reward + boot;
  }

  Mlp::Cache cache;
  const Mlp::Matrix q = online.forward(s, cache);
  Mlp::Matrix d_out = Mlp::Matrix::Zero(q.rows(), q.cols());
  TdLoss out;
  const double inv_b = 1.0 / static_cast<double>(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const int a = batch[static_cast<std::size_t>(j)]->action;
    const double d = q(a, j) - y[static_cast<std::size_t>(j)];
    out.loss += huber(d, huber_delta) * inv_b;
    d_out(a, j) = std::clamp(d, -huber_delta, huber_delta) * inv_b;
  }
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite temporal-difference loss");
  online.backward(cache, d_out, out.grad);
  return out;
}

struct TdStats {
  double loss = 0.0;
  double grad_norm = 0.0;
  bool applied = false;
};

// One optimizer step on the batch. A batch with identically zero gradient
// leaves the parameters untouched.
inline TdStats td_update(Mlp& online, const Mlp& target, std::span<const Transition* const> batch,
                         const TrainConfig& cfg, AdamW& opt, double lr) {
  TdLoss tl = td_loss(online, target, batch, cfg.gamma, cfg.huber_delta);
  double sq = 0.0;
  for (double g : tl.grad) sq += g * g;
  TdStats st{tl.loss, std::sqrt(sq), false};
  if (!std::isfinite(st.grad_norm)) throw NumericalError("non-finite gradient norm");
  if (st.grad_norm == 0.0) return st;
  if (cfg.grad_clip > 0.0 && st.grad_norm > cfg.grad_clip) {
    const double scale = cfg.grad_clip / st.grad_norm;
    for (double& g : tl.grad) g *= scale;
  }
  opt.step(online.params(), tl.grad, lr);
  st.applied = true;
  return st;
}

// Greedy policy of a trained network as a betting rule.
class DqnRule final : public BetRule {
 public:
  explicit DqnRule(std::shared_ptr<const Mlp> net) : net_(std::move(net)) {
    if (!net_ || net_->input_dim() != static_cast<int>(kFeatureCount) || net_->output_dim() != kNumActions) {
      throw UsageError("network shape does not match the betting state");
    }
  }
  Decision bet(const WealthState& state, const NullSpec& spec, Rng&) override {
    const Mlp::Matrix q = net_->forward(feature_column(features(state, spec)));
    const auto a = static_cast<Action>(argmax_action(q.data()));
    return Decision{action_bet(a, state, spec), a};
  }

 private:
  std::shared_ptr<const Mlp> net_;
};

// One episode of the betting environment.
struct Episode {
  EpisodeConfig config;
  std::optional<World> world;
  std::optional<NullSpec> spec;
  WealthState state;
  Rng data;
  long index = -1;
  bool active = false;

  void start(const EpisodeConfig& cfg, long idx, std::uint64_t data_seed, double alpha, double clip_eps) {
    config = cfg;
    world.emplace(cfg.world());
    spec.emplace(cfg.m, alpha, cfg.N, clip_eps);
    state = WealthState{};
    data = Rng(data_seed);
    index = idx;
    active = true;
  }

  // Returns true when the episode ends; `hit` reports a threshold crossing.
  bool step(Action a, bool& hit) {
    const double bet = action_bet(a, state, *spec);
    state = wealth_update(state, bet, world->sample(data), *spec);
    hit = state.log_wealth >= spec->threshold();
    return hit || state.t >= spec->horizon();
  }
};

inline std::vector<EpisodeConfig> sample_configs(const ConfigRanges& ranges, std::size_t count, std::uint64_t seed) {
  std::vector<EpisodeConfig> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, StreamKind::config, i));
    out.push_back(sample_episode_config(rng, ranges));
  }
  return out;
}

struct EvalResult {
  long hits = 0;
  long episodes = 0;
  double rate() const { return episodes > 0 ? static_cast<double>(hits) / static_cast<double>(episodes) : 0.0; }
};

// Greedy rollouts on fixed configurations, batched across episodes.
inline EvalResult evaluate_greedy(const Mlp& net, std::span<const EpisodeConfig> configs, std::uint64_t seed,
                                  double alpha = 0.05, double clip_eps = 1e-3) {
  std::vector<Episode> eps(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    eps[i].start(configs[i], static_cast<long>(i), derive_seed(seed, StreamKind::evaluation, i), alpha, clip_eps);
  }
  EvalResult res;
  res.episodes = static_cast<long>(configs.size());
  std::vector<std::size_t> live(configs.size());
  for (std::size_t i = 0; i < live.size(); ++i) live[i] = i;
  Mlp::Matrix x;
  while (!live.empty()) {
    x.resize(static_cast<Eigen::Index>(kFeatureCount), static_cast<Eigen::Index>(live.size()));
    for (std::size_t j = 0; j < live.size(); ++j) {
      const FeatureVector f = features(eps[live[j]].state, *eps[live[j]].spec);
      for (std::size_t i = 0; i < kFeatureCount; ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[i];
    }
    const Mlp::Matrix q = net.forward(x);
    std::vector<std::size_t> still;
    still.reserve(live.size());
    for (std::size_t j = 0; j < live.size(); ++j) {
      bool hit = false;
      const auto a = static_cast<Action>(argmax_action(q.col(static_cast<Eigen::Index>(j)).data()));
      if (eps[live[j]].step(a, hit)) {
        res.hits += hit ? 1 : 0;
      } else {
        still.push_back(live[j]);
      }
    }
    live.swap(still);
  }
  return res;
}

struct TrainMetrics {
  int episode = 0;
  double train_hit_rate = 0.0;
  double eval_hit_rate = 0.0;
  double epsilon = 0.0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  Mlp best;
  Mlp final_net;
  double best_eval = -1.0;
  int best_episode = 0;
  long gradient_steps = 0;
  std::vector<TrainMetrics> metrics;
};

using CheckpointSink = std::function<void(const Mlp&, const TrainMetrics&)>;

inline double exploration_rate(const TrainConfig& cfg, long episode) {
  return std::max(cfg.eps_min, cfg.eps_start * std::pow(cfg.eps_decay, static_cast<double>(episode)));
}

// Single-threaded learner with lockstep vectorized environments; the result
// is a pure function of the configuration and the sampler ranges.
inline TrainResult train(const TrainConfig& cfg, const ConfigRanges& ranges, const CheckpointSink& on_checkpoint = {}) {
  if (cfg.num_envs <= 0 || cfg.train_every <= 0 || cfg.eval_every <= 0 || cfg.batch == 0) {
    throw UsageError("invalid training configuration");
  }
  Mlp online = make_qnet(cfg.layer_sizes(), cfg.seed);
  Mlp target = online;
  AdamW opt(online.num_params(), cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
  ReplayBuffer replay(cfg.buffer_capacity);
  Rng explore(derive_seed(cfg.seed, StreamKind::exploration, 0));
  Rng sampler(derive_seed(cfg.seed, StreamKind::replay, 0));
  const std::vector<EpisodeConfig> eval_configs =
      sample_configs(ranges, static_cast<std::size_t>(std::max(cfg.eval_episodes, 0)), cfg.eval_seed);

  TrainResult result;
  double lr = cfg.lr;
  int bad_evals = 0;
  long window_hits = 0, window_done = 0;
  double loss_sum = 0.0;
  long loss_count = 0;

  auto checkpoint = [&](int episode) {
    const double eval = evaluate_greedy(online, eval_configs, cfg.eval_seed, cfg.alpha, cfg.clip_eps).rate();
    TrainMetrics row;
    row.episode = episode;
    row.train_hit_rate = window_done > 0 ? static_cast<double>(window_hits) / static_cast<double>(window_done) : 0.0;
    row.eval_hit_rate = eval;
    row.epsilon = exploration_rate(cfg, episode);
    row.lr = lr;
    row.loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    result.metrics.push_back(row);
    window_hits = window_done = 0;
    loss_sum = 0.0;
    loss_count = 0;
    if (eval > result.best_eval) {
      result.best_eval = eval;
      result.best_episode = episode;
      result.best = online;
      bad_evals = 0;
      if (on_checkpoint) on_checkpoint(online, row);
    } else if (++bad_evals >= cfg.plateau_patience) {
      lr = std::max(cfg.min_lr, lr * cfg.plateau_factor);
      bad_evals = 0;
    }
  };

  checkpoint(0);

  std::vector<Episode> envs(static_cast<std::size_t>(cfg.num_envs));
  std::vector<double> env_eps(envs.size(), 0.0);
  long started = 0;
  int finished = 0;
  auto launch = [&](std::size_t slot) {
    if (started >= cfg.episodes) {
      envs[slot].active = false;
      return;
    }
    Rng crng(derive_seed(cfg.seed, StreamKind::config, static_cast<std::uint64_t>(started)));
    envs[slot].start(sample_episode_config(crng, ranges), started,
                     derive_seed(cfg.seed, StreamKind::data, static_cast<std::uint64_t>(started)), cfg.alpha,
                     cfg.clip_eps);
    env_eps[slot] = exploration_rate(cfg, started);
    ++started;
  };
  for (std::size_t i = 0; i < envs.size(); ++i) launch(i);

  long env_steps = 0;
  Mlp::Matrix x(static_cast<Eigen::Index>(kFeatureCount), static_cast<Eigen::Index>(envs.size()));
  std::vector<FeatureVector> phi(envs.size());
  std::vector<const Transition*> batch;
  while (finished < cfg.episodes) {
    for (std::size_t i = 0; i < envs.size(); ++i) {
      phi[i] = envs[i].active ? features(envs[i].state, *envs[i].spec) : FeatureVector{};
      for (std::size_t k = 0; k < kFeatureCount; ++k) x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = phi[i][k];
    }
    const Mlp::Matrix q = online.forward(x);
    for (std::size_t i = 0; i < envs.size(); ++i) {
      Episode& env = envs[i];
      if (!env.active) continue;
      Action a;
      if (explore.uniform() < env_eps[i]) {
        a = static_cast<Action>(explore.below(kNumActions));
      } else {
        a = static_cast<Action>(argmax_action(q.col(static_cast<Eigen::Index>(i)).data()));
      }
      bool hit = false;
      const bool done = env.step(a, hit);
      Transition tr;
      tr.state = to_stored(phi[i]);
      tr.next_state = to_stored(features(env.state, *env.spec));
      tr.action = static_cast<std::int8_t>(a);
      tr.reward = hit ? 1.0f : 0.0f;
      tr.terminal = done;
      replay.push(tr);
      ++env_steps;

      if (replay.size() >= std::max(cfg.min_buffer, cfg.batch) && env_steps % cfg.train_every == 0) {
        batch = replay.sample(cfg.batch, sampler);
        const TdStats st = td_update(online, target, batch, cfg, opt, lr);
        loss_sum += st.loss;
        ++loss_count;
        ++result.gradient_steps;
        if (result.gradient_steps % static_cast<long>(cfg.target_update) == 0) target = online;
      }

      if (done) {
        ++finished;
        ++window_done;
        window_hits += hit ? 1 : 0;
        if (finished % cfg.eval_every == 0 || finished == cfg.episodes) checkpoint(finished);
        launch(i);
      }
    }
  }
  result.final_net = online;
  return result;
}

}  // namespace horizon::dqn
