#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "rohcrl/env.hpp"
#include "rohcrl/random.hpp"

namespace rohcrl {

// --- Keep-transmitting benchmark -------------------------------------------

struct KtConfig {
  double feedback_prob = 0.1;
  // Header used for each decompressor class reported by the latest feedback.
  HeaderType on_full = HeaderType::CO3;
  HeaderType on_repair = HeaderType::CO7;
  HeaderType on_none = HeaderType::IR;

  void validate() const {
    if (!(feedback_prob >= 0.0 && feedback_prob <= 1.0))
      throw std::invalid_argument("KT feedback probability must lie in [0,1]");
  }

  HeaderType header_for(ContextClass c) const {
    switch (c) {
      case ContextClass::Full: return on_full;
      case ContextClass::Repair: return on_repair;
      case ContextClass::None: return on_none;
    }
    return on_none;
  }
};

/// Header from the latest feedback (IR before any arrives), never CO3 for an
/// uncompressible header, and a Bernoulli(p_F) feedback request.
inline CompressorAction kt_policy(std::optional<int> latest_feedback, bool compressible_now,
                                  const KtConfig& cfg, int window, Rng& rng) {
  CompressorAction a;
  a.request_feedback = bernoulli(rng, cfg.feedback_prob);
  a.header = latest_feedback ? cfg.header_for(classify_state(*latest_feedback, window))
                             : HeaderType::IR;
  if (!compressible_now && a.header == HeaderType::CO3) a.header = HeaderType::CO7;
  return a;
}

class KtPolicy {
 public:
  KtPolicy(KtConfig cfg, int window) : cfg_(cfg), window_(window) { cfg_.validate(); }

  void reset() { latest_.reset(); }

  CompressorAction act(const Observation& z, Rng& rng) {
    if (z.z_D >= 0) latest_ = z.z_D;
    return kt_policy(latest_, z.compressible_now(), cfg_, window_, rng);
  }

  std::optional<int> latest_feedback() const { return latest_; }

 private:
  KtConfig cfg_;
  int window_;
  std::optional<int> latest_;
};

class FixedPolicy {
 public:
  explicit FixedPolicy(HeaderType header, bool request_feedback = false)
      : action_{header, request_feedback} {}
  void reset() {}
  CompressorAction act(const Observation&, Rng&) { return action_; }

 private:
  CompressorAction action_;
};

class RandomPolicy {
 public:
  void reset() {}
  CompressorAction act(const Observation&, Rng& rng) {
    return action_from_index(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng));
  }
};

// --- Exact finite-horizon oracle -------------------------------------------
//
// For d = 0, noiseless observations and a Gilbert-Elliot channel, the
// compressor state (sigma_D, sigma_H, source history, previous feedback flag)
// is Markov. The oracle evaluates max over actions of the expected discounted
// reward over H slots by recursion over every action and every stochastic
// branch (channel, transmission, source), with the decompressor state known
// exactly. No causal policy can beat it.

struct OracleState {
  int sigma_D = 0;
  bool channel_good = true;      // sigma_H[t]
  std::vector<bool> source;      // sigma_S[t], sigma_S[t-1], ... (d_S entries)
  bool previous_feedback = false;  // alpha_F[t-1]
};

struct OracleResult {
  double value = 0.0;
  CompressorAction first_action;
};

class ExactOracle {
 public:
  static constexpr double kMaxWork = 5e7;

  explicit ExactOracle(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.delay != 0) throw std::invalid_argument("exact oracle requires d = 0");
    if (cfg_.noise.eps_t != 0.0 || cfg_.noise.eps_h != 0.0)
      throw std::invalid_argument("exact oracle requires noiseless observations");
    if (cfg_.channel != ChannelKind::GilbertElliot)
      throw std::invalid_argument("exact oracle requires the Gilbert-Elliot channel");
  }

  OracleResult solve(const OracleState& start, int horizon) {
    check_budget(horizon);
    if (horizon == 0) return {0.0, kPaddingAction};
    OracleResult best{-1e300, kPaddingAction};
    for (int a = 0; a < kNumActions; ++a) {
      const double q = action_value(start, action_from_index(a), horizon);
      if (q > best.value) best = {q, action_from_index(a)};
    }
    return best;
  }

  /// Expected optimal value over the reset distribution of RohcEnv: NC,
  /// stationary channel, all-compressible source history followed by one
  /// source draw, no previous feedback request.
  OracleResult solve_from_reset(int horizon) {
    check_budget(horizon);
    const double p_bad = ge_stationary(cfg_.ge);
    std::vector<bool> ones(static_cast<std::size_t>(cfg_.source.order), true);
    const double p_one = cfg_.source.prob_one(ones);
    std::array<double, kNumActions> q{};
    double value = 0.0;
    for (int good = 0; good < 2; ++good) {
      for (int bit = 0; bit < 2; ++bit) {
        const double p = (good ? 1.0 - p_bad : p_bad) * (bit ? p_one : 1.0 - p_one);
        if (p == 0.0) continue;
        OracleState s{cfg_.window + 1, good == 1, shifted(ones, bit == 1), false};
        value += p * solve(s, horizon).value;
        if (horizon > 0)
          for (int a = 0; a < kNumActions; ++a) q[static_cast<std::size_t>(a)] += p * action_value(s, action_from_index(a), horizon);
      }
    }
    // Before the first slot nothing is observed, so the committed first action
    // is the best one in expectation; value keeps the state-wise optimum.
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
    return {value, action_from_index(best)};
  }

  const EnvConfig& config() const { return cfg_; }

 private:
  using Key = std::tuple<int, int, bool, std::vector<bool>, bool>;

  void check_budget(int horizon) const {
    if (horizon < 0) throw std::invalid_argument("oracle horizon must be nonnegative");
    const double states = static_cast<double>(cfg_.window + 2) * 2.0 *
                          static_cast<double>(std::size_t{1} << cfg_.source.order) * 2.0;
    const double work = states * horizon * kNumActions * 8.0;
    if (work > kMaxWork)
      throw std::invalid_argument("exact oracle branch count exceeds the safety bound");
  }

  static std::vector<bool> shifted(std::vector<bool> history, bool bit) {
    history.insert(history.begin(), bit);
    history.pop_back();
    return history;
  }

  double value(const OracleState& s, int horizon) {
    if (horizon == 0) return 0.0;
    const Key key{horizon, s.sigma_D, s.channel_good, s.source, s.previous_feedback};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    double best = -1e300;
    for (int a = 0; a < kNumActions; ++a)
      best = std::max(best, action_value(s, action_from_index(a), horizon));
    memo_.emplace(key, best);
    return best;
  }

  double action_value(const OracleState& s, CompressorAction a, int horizon) {
    const GilbertElliotConfig& ge = cfg_.ge;
    const double p_next_good = s.channel_good ? 1.0 - ge.p_good_to_bad() : ge.p_bad_to_good();
    const double p_one = cfg_.source.prob_one(s.source);
    const DecompressorState current(s.sigma_D, cfg_.window);
    const double penalty = s.previous_feedback ? cfg_.lambda : 0.0;
    double total = 0.0;
    for (int good = 0; good < 2; ++good) {
      const double p_h = good ? p_next_good : 1.0 - p_next_good;
      if (p_h == 0.0) continue;
      const double p_success = ge_success_probability(good == 1, a.header, ge);
      for (int tx = 0; tx < 2; ++tx) {
        const double p_t = tx ? p_success : 1.0 - p_success;
        if (p_t == 0.0) continue;
        const DecompressorState next = decompressor_step(current, a.header, tx == 1, s.source.front());
        const double reward =
            (is_decode_success(next) ? packet_efficiency(a.header, cfg_.lengths) : 0.0) - penalty;
        double future = 0.0;
        if (horizon > 1) {
          for (int bit = 0; bit < 2; ++bit) {
            const double p_s = bit ? p_one : 1.0 - p_one;
            if (p_s == 0.0) continue;
            const OracleState nxt{next.value(), good == 1, shifted(s.source, bit == 1),
                                  a.request_feedback};
            future += p_s * value(nxt, horizon - 1);
          }
        }
        total += p_h * p_t * (reward + cfg_.gamma * future);
      }
    }
    return total;
  }

  EnvConfig cfg_;
  std::map<Key, double> memo_;
};

inline OracleResult exact_oracle(const EnvConfig& cfg, const OracleState& start, int horizon) {
  return ExactOracle(cfg).solve(start, horizon);
}

// --- Monte Carlo discounted return --------------------------------------------

/// Mean of sum_t gamma^t r[t] over `rollouts` independent episodes of length
/// `horizon` started from reset.
template <Policy P>
double discounted_return(P& policy, EnvConfig cfg, int horizon, int rollouts, std::uint64_t seed) {
  cfg.horizon = horizon;
  double sum = 0.0;
  for (int i = 0; i < rollouts; ++i) {
    const Trace trace = run_episode(policy, cfg, derive_seed(seed, streams::kRollout, static_cast<std::uint64_t>(i)));
    double g = 0.0;
    double discount = 1.0;
    for (const TraceRow& r : trace) {
      g += discount * r.reward;
      discount *= cfg.gamma;
    }
    sum += g;
  }
  return rollouts > 0 ? sum / rollouts : 0.0;
}

}  // namespace rohcrl
