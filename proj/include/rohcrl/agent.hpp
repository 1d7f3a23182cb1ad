#pragma once

// DDQN compressor agent: truncated history encoding, epsilon-greedy action
// selection, FIFO replay memory and the episode/gradient-step training loop
// with a target network synced after every episode.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rohcrl/env.hpp"
#include "rohcrl/metrics.hpp"
#include "rohcrl/mlp.hpp"
#include "rohcrl/random.hpp"

namespace rohcrl {

enum class EncodingMode { GeBinary, HmmReal };

inline EncodingMode encoding_for(ChannelKind kind) {
  return kind == ChannelKind::GilbertElliot ? EncodingMode::GeBinary : EncodingMode::HmmReal;
}

/// Dimensions that fix the network input: delay d, extra history d0, W and
/// the z_H encoding.
struct AgentShape {
  int delay = 0;
  int history_extra = 4;
  int window = 5;
  EncodingMode mode = EncodingMode::GeBinary;

  int observation_slots() const { return delay + history_extra + 1; }
  int action_slots() const { return delay + history_extra; }

  int observation_width() const {
    return 2 + (mode == EncodingMode::GeBinary ? 2 : 1) + (window + 3) + (delay + 1);
  }
  int input_width() const { return observation_slots() * observation_width() + action_slots() * kNumActions; }

  friend bool operator==(const AgentShape&, const AgentShape&) = default;
};

/// z[t], ..., z[t-d-d0] and alpha[t-1], ..., alpha[t-d-d0], most recent first.
/// Before the episode has produced enough slots the window repeats the
/// initial observation and the environment's padding action.
class HistoryWindow {
 public:
  HistoryWindow(const Observation& initial, int delay, int history_extra) {
    if (delay < 0 || history_extra < 0) throw std::invalid_argument("negative history size");
    observations_.assign(static_cast<std::size_t>(delay + history_extra + 1), initial);
    actions_.assign(static_cast<std::size_t>(delay + history_extra), kPaddingAction);
  }

  void push(CompressorAction action, Observation z) {
    if (!actions_.empty()) {
      actions_.push_front(action);
      actions_.pop_back();
    }
    observations_.push_front(std::move(z));
    observations_.pop_back();
  }

  const std::deque<Observation>& observations() const { return observations_; }
  const std::deque<CompressorAction>& actions() const { return actions_; }

  friend bool operator==(const HistoryWindow&, const HistoryWindow&) = default;

 private:
  std::deque<Observation> observations_;
  std::deque<CompressorAction> actions_;
};

inline int encoded_length(const AgentShape& s) { return s.input_width(); }

/// Oldest to newest: every observation slot (one-hot z_T, z_H one-hot or raw,
/// one-hot z_D over {-1..W+1}, the d+1 source bits), then every action slot
/// as a one-hot over the 6 actions.
inline std::vector<double> encode(const HistoryWindow& window, const AgentShape& shape) {
  const auto& obs = window.observations();
  const auto& acts = window.actions();
  if (static_cast<int>(obs.size()) != shape.observation_slots() ||
      static_cast<int>(acts.size()) != shape.action_slots())
    throw std::invalid_argument("history window does not match the agent shape");

  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(shape.input_width()));
  for (auto it = obs.rbegin(); it != obs.rend(); ++it) {
    const Observation& z = *it;
    x.push_back(z.z_T ? 0.0 : 1.0);
    x.push_back(z.z_T ? 1.0 : 0.0);
    if (shape.mode == EncodingMode::GeBinary) {
      const bool* h = std::get_if<bool>(&z.z_H);
      if (!h) throw std::invalid_argument("binary encoding needs a Gilbert-Elliot observation");
      x.push_back(*h ? 0.0 : 1.0);
      x.push_back(*h ? 1.0 : 0.0);
    } else {
      const double* h = std::get_if<double>(&z.z_H);
      if (!h) throw std::invalid_argument("real encoding needs a hidden-Markov observation");
      x.push_back(*h);
    }
    if (z.z_D < -1 || z.z_D > shape.window + 1) throw std::invalid_argument("z_D out of range");
    for (int v = -1; v <= shape.window + 1; ++v) x.push_back(z.z_D == v ? 1.0 : 0.0);
    if (static_cast<int>(z.sigma_S.size()) != shape.delay + 1)
      throw std::invalid_argument("source window length must be d+1");
    for (bool b : z.sigma_S) x.push_back(b ? 1.0 : 0.0);
  }
  for (auto it = acts.rbegin(); it != acts.rend(); ++it) {
    const int idx = action_index(*it);
    for (int k = 0; k < kNumActions; ++k) x.push_back(k == idx ? 1.0 : 0.0);
  }
  return x;
}

// --- Replay memory ----------------------------------------------------------

/// Fixed-capacity FIFO; once full, each push evicts the oldest entry.
template <class T>
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  /// i = 0 is the oldest retained entry.
  const T& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  /// Uniform draw with replacement.
  std::vector<const T*> sample(std::size_t batch, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("cannot sample from an empty replay memory");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const T*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> items_;
};

using Features = std::shared_ptr<const std::vector<double>>;

// Consecutive transitions share the encoded history between them.
struct Transition {
  Features state;
  int action = 0;
  double reward = 0.0;
  Features next_state;
};

// --- Configuration ----------------------------------------------------------

struct AgentConfig {
  double gamma = 0.95;
  double eta = 1e-4;
  double epsilon_init = 1.0;
  double epsilon_decay = 0.995;
  double epsilon_floor = 0.05;
  int batch_size = 64;
  int replay_capacity = 100000;
  int grad_steps = 200;  // K
  int history_extra = 4;  // d0
  int hidden_width = 128;
  int hidden_layers = 3;
  bool double_q = false;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("agent gamma must lie in (0,1)");
    if (!(eta >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
    if (!(epsilon_init >= 0.0 && epsilon_init <= 1.0))
      throw std::invalid_argument("initial epsilon must lie in [0,1]");
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0))
      throw std::invalid_argument("epsilon decay must lie in (0,1]");
    if (!(epsilon_floor >= 0.0 && epsilon_floor <= 1.0))
      throw std::invalid_argument("epsilon floor must lie in [0,1]");
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
    if (replay_capacity < batch_size)
      throw std::invalid_argument("batch size must not exceed replay capacity");
    if (grad_steps < 0) throw std::invalid_argument("gradient steps must be nonnegative");
    if (history_extra < 0) throw std::invalid_argument("d0 must be nonnegative");
    if (hidden_width < 1) throw std::invalid_argument("hidden width must be positive");
    if (hidden_layers < 0) throw std::invalid_argument("hidden layer count must be nonnegative");
  }
};

inline AgentShape shape_for(const EnvConfig& env, const AgentConfig& agent) {
  return {env.delay, agent.history_extra, env.window, encoding_for(env.channel)};
}

// --- Action selection and targets -------------------------------------------

/// Index of the largest entry; ties go to the lowest index.
inline int greedy_index(const Eigen::Ref<const Eigen::VectorXd>& q) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i)
    if (q(i) > q(best)) best = i;
  return best;
}

inline int select_action_index(const nn::MlpParams& params, std::span<const double> features,
                               double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0,1]");
  if (bernoulli(rng, epsilon))
    return std::uniform_int_distribution<int>(0, kNumActions - 1)(rng);
  return greedy_index(nn::forward(params, features));
}

inline CompressorAction select_action(const nn::MlpParams& params, const HistoryWindow& window,
                                      const AgentShape& shape, double epsilon, Rng& rng) {
  const std::vector<double> x = encode(window, shape);
  return action_from_index(select_action_index(params, x, epsilon, rng));
}

/// r + gamma * max_a Q_target(h', a)
inline double td_target(const nn::MlpParams& target_params, double reward,
                        std::span<const double> next_features, double gamma) {
  return reward + gamma * nn::forward(target_params, next_features).maxCoeff();
}

/// r + gamma * Q_target(h', argmax_a Q_online(h', a))
inline double td_target_double(const nn::MlpParams& online, const nn::MlpParams& target_params,
                               double reward, std::span<const double> next_features, double gamma) {
  const int a = greedy_index(nn::forward(online, next_features));
  return reward + gamma * nn::forward(target_params, next_features)(a);
}

/// One SGD step on the mean squared TD error of `batch`; returns that mean.
inline double train_step(nn::MlpParams& params, const nn::MlpParams& target_params,
                         std::span<const Transition* const> batch, double eta, double gamma,
                         bool double_q = false) {
  if (batch.empty()) throw std::invalid_argument("train_step needs a nonempty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto width = static_cast<Eigen::Index>(batch.front()->state->size());
  Eigen::MatrixXd x(width, n);
  Eigen::MatrixXd x_next(width, n);
  std::vector<int> actions(batch.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& tr = *batch[static_cast<std::size_t>(j)];
    if (static_cast<Eigen::Index>(tr.state->size()) != width ||
        static_cast<Eigen::Index>(tr.next_state->size()) != width)
      throw std::invalid_argument("inconsistent feature widths in batch");
    x.col(j) = Eigen::Map<const Eigen::VectorXd>(tr.state->data(), width);
    x_next.col(j) = Eigen::Map<const Eigen::VectorXd>(tr.next_state->data(), width);
    actions[static_cast<std::size_t>(j)] = tr.action;
  }

  const Eigen::MatrixXd q_next = nn::forward_batch(target_params, x_next);
  Eigen::MatrixXd q_online_next;
  if (double_q) q_online_next = nn::forward_batch(params, x_next);
  std::vector<double> targets(batch.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const double bootstrap =
        double_q ? q_next(greedy_index(q_online_next.col(j)), j) : q_next.col(j).maxCoeff();
    targets[static_cast<std::size_t>(j)] = batch[static_cast<std::size_t>(j)]->reward + gamma * bootstrap;
  }

  nn::LossAndGrad lg = nn::batch_loss_grad(params, x, actions, targets);
  nn::sgd_step(params, lg.grad, eta);
  return lg.loss;
}

// --- Training loop ------------------------------------------------------------

struct EpisodeStats {
  int episode = 0;
  double mean_reward = 0.0;
  double efficiency = 0.0;
  double feedback_rate = 0.0;
  double epsilon = 0.0;  // exploration rate used during the episode
  double mean_loss = 0.0;
};

class DdqnTrainer {
 public:
  DdqnTrainer(const EnvConfig& env_cfg, AgentConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        shape_(shape_for(env_cfg, cfg_)),
        memory_(static_cast<std::size_t>(cfg_.replay_capacity)),
        rng_(derive_seed(seed, streams::kTrainer)),
        seed_(seed),
        epsilon_(cfg_.epsilon_init) {
    env_cfg.validate();
    cfg_.validate();
    Rng init_rng(derive_seed(seed, streams::kInit));
    online_ = nn::init(nn::MlpConfig::q_network(shape_.input_width(), cfg_.hidden_width,
                                                cfg_.hidden_layers),
                       init_rng);
    target_ = online_;
  }

  /// One outer iteration: interact for T slots, K gradient steps, sync the
  /// target network, decay epsilon.
  EpisodeStats train_episode(const EnvConfig& env_cfg) {
    if (shape_for(env_cfg, cfg_) != shape_)
      throw std::invalid_argument("environment dimensions changed during training");
    RohcEnv env(env_cfg);
    Observation z = env.reset(derive_seed(seed_, streams::kEnvironment, static_cast<std::uint64_t>(episode_)));
    HistoryWindow window(z, shape_.delay, shape_.history_extra);
    auto features = std::make_shared<const std::vector<double>>(encode(window, shape_));
    MetricsAccumulator metrics(env_cfg.lengths);

    while (!env.done()) {
      const int a = select_action_index(online_, *features, epsilon_, rng_);
      const CompressorAction action = action_from_index(a);
      StepOutcome out = env.step(action);
      metrics.add(action, out.reward, out.diagnostics);
      window.push(action, std::move(out.observation));
      auto next = std::make_shared<const std::vector<double>>(encode(window, shape_));
      memory_.push({features, a, out.reward, next});
      features = std::move(next);
    }

    double loss_sum = 0.0;
    int steps = 0;
    if (!memory_.empty()) {
      for (int k = 0; k < cfg_.grad_steps; ++k) {
        const auto batch = memory_.sample(static_cast<std::size_t>(cfg_.batch_size), rng_);
        loss_sum += train_step(online_, target_, batch, cfg_.eta, cfg_.gamma, cfg_.double_q);
        ++steps;
      }
    }
    target_ = online_;

    EpisodeStats stats;
    stats.episode = episode_;
    stats.epsilon = epsilon_;
    stats.mean_loss = steps ? loss_sum / steps : 0.0;
    if (metrics.slots() > 0) {
      const MetricsReport m = metrics.report();
      stats.mean_reward = m.mean_reward;
      stats.efficiency = m.transmission_efficiency;
      stats.feedback_rate = m.feedback_rate;
    }
    ++episode_;
    epsilon_ = std::max(cfg_.epsilon_floor, cfg_.epsilon_init * std::pow(cfg_.epsilon_decay, episode_));
    return stats;
  }

  const nn::MlpParams& params() const { return online_; }
  const nn::MlpParams& target_params() const { return target_; }
  const AgentConfig& config() const { return cfg_; }
  const AgentShape& shape() const { return shape_; }
  const ReplayMemory<Transition>& memory() const { return memory_; }
  double epsilon() const { return epsilon_; }
  int episodes_done() const { return episode_; }

  // Restores a checkpointed network; the target network is synced to it.
  void load_params(nn::MlpParams params, int episode, double epsilon) {
    if (params.config().widths != online_.config().widths)
      throw std::invalid_argument("checkpoint network shape does not match the agent");
    online_ = std::move(params);
    target_ = online_;
    episode_ = episode;
    epsilon_ = epsilon;
  }

 private:
  AgentConfig cfg_;
  AgentShape shape_;
  nn::MlpParams online_;
  nn::MlpParams target_;
  ReplayMemory<Transition> memory_;
  Rng rng_;
  std::uint64_t seed_;
  double epsilon_;
  int episode_ = 0;
};

struct TrainingResult {
  nn::MlpParams params;
  std::vector<EpisodeStats> curve;
};

inline TrainingResult run_training(const EnvConfig& env_cfg, const AgentConfig& agent_cfg,
                                   int episodes, std::uint64_t seed) {
  if (episodes < 0) throw std::invalid_argument("episode count must be nonnegative");
  DdqnTrainer trainer(env_cfg, agent_cfg, seed);
  TrainingResult result;
  for (int j = 0; j < episodes; ++j) result.curve.push_back(trainer.train_episode(env_cfg));
  result.params = trainer.params();
  return result;
}

/// Deterministic argmax policy over a frozen network.
class GreedyPolicy {
 public:
  GreedyPolicy(nn::MlpParams params, AgentShape shape)
      : params_(std::move(params)), shape_(shape) {
    if (params_.input_width() != shape_.input_width())
      throw std::invalid_argument("network input width does not match the history encoding");
  }

  void reset() {
    window_.reset();
    last_ = kPaddingAction;
  }

  CompressorAction act(const Observation& z, Rng&) {
    if (!window_)
      window_.emplace(z, shape_.delay, shape_.history_extra);
    else
      window_->push(last_, z);
    const std::vector<double> x = encode(*window_, shape_);
    last_ = action_from_index(greedy_index(nn::forward(params_, x)));
    return last_;
  }

 private:
  nn::MlpParams params_;
  AgentShape shape_;
  std::optional<HistoryWindow> window_;
  CompressorAction last_ = kPaddingAction;
};

// --- Checkpoints ----------------------------------------------------------------
//
// <path> holds the network (nn::save format); <path>.meta holds key=value
// lines with the agent configuration, history shape, episode index and epsilon.

struct CheckpointMeta {
  AgentConfig agent;
  AgentShape shape;
  int episode = 0;
  double epsilon = 1.0;
};

inline void save_checkpoint(const std::string& path, const nn::MlpParams& params,
                            const CheckpointMeta& meta) {
  std::ofstream net(path);
  if (!net) throw std::runtime_error("cannot write checkpoint " + path);
  nn::save(net, params);
  std::ofstream side(path + ".meta");
  if (!side) throw std::runtime_error("cannot write checkpoint metadata " + path + ".meta");
  side << std::setprecision(17);
  side << "gamma=" << meta.agent.gamma << '\n'
       << "eta=" << meta.agent.eta << '\n'
       << "epsilon_init=" << meta.agent.epsilon_init << '\n'
       << "epsilon_decay=" << meta.agent.epsilon_decay << '\n'
       << "epsilon_floor=" << meta.agent.epsilon_floor << '\n'
       << "batch_size=" << meta.agent.batch_size << '\n'
       << "replay_capacity=" << meta.agent.replay_capacity << '\n'
       << "grad_steps=" << meta.agent.grad_steps << '\n'
       << "history_extra=" << meta.agent.history_extra << '\n'
       << "hidden_width=" << meta.agent.hidden_width << '\n'
       << "hidden_layers=" << meta.agent.hidden_layers << '\n'
       << "double_q=" << int{meta.agent.double_q} << '\n'
       << "delay=" << meta.shape.delay << '\n'
       << "window=" << meta.shape.window << '\n'
       << "encoding=" << (meta.shape.mode == EncodingMode::GeBinary ? "ge" : "hmm") << '\n'
       << "episode=" << meta.episode << '\n'
       << "epsilon=" << meta.epsilon << '\n';
}

inline std::pair<nn::MlpParams, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream net(path);
  if (!net) throw std::runtime_error("cannot read checkpoint " + path);
  nn::MlpParams params = nn::load(net);
  std::ifstream side(path + ".meta");
  if (!side) throw std::runtime_error("cannot read checkpoint metadata " + path + ".meta");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(side, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(std::string("checkpoint metadata lacks ") + key);
    return it->second;
  };
  CheckpointMeta m;
  m.agent.gamma = std::stod(get("gamma"));
  m.agent.eta = std::stod(get("eta"));
  m.agent.epsilon_init = std::stod(get("epsilon_init"));
  m.agent.epsilon_decay = std::stod(get("epsilon_decay"));
  m.agent.epsilon_floor = std::stod(get("epsilon_floor"));
  m.agent.batch_size = std::stoi(get("batch_size"));
  m.agent.replay_capacity = std::stoi(get("replay_capacity"));
  m.agent.grad_steps = std::stoi(get("grad_steps"));
  m.agent.history_extra = std::stoi(get("history_extra"));
  m.agent.hidden_width = std::stoi(get("hidden_width"));
  m.agent.hidden_layers = std::stoi(get("hidden_layers"));
  m.agent.double_q = std::stoi(get("double_q")) != 0;
  m.shape.delay = std::stoi(get("delay"));
  m.shape.window = std::stoi(get("window"));
  m.shape.history_extra = m.agent.history_extra;
  m.shape.mode = get("encoding") == "hmm" ? EncodingMode::HmmReal : EncodingMode::GeBinary;
  m.episode = std::stoi(get("episode"));
  m.epsilon = std::stod(get("epsilon"));
  if (params.input_width() != m.shape.input_width())
    throw std::runtime_error("checkpoint network does not match its metadata");
  return {std::move(params), m};
}

}  // namespace rohcrl
