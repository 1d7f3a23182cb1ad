#pragma once

// Compressor-side POMDP environment: header source, channel, decompressor,
// the d-slot lag between compressor and decompressor, feedback, and reward.
//
// Time indexing. The environment at compressor slot t holds the decompressor
// state sigma_D[t-d], the channel state sigma_H[t-d] and transmission status
// sigma_T[t-d], the last d+1 actions alpha[t-1..t-d-1] and the source bits
// sigma_S[t..t-d]. Stepping with alpha[t] delivers the packet sent d slots ago
// (alpha[t-d]), charges the feedback request made d+1 slots ago, and returns
// the observation for slot t+1. A request issued at slot s is answered in the
// observation of slot s+d+1 with sigma_D[s+1], the decompressor state right
// after it processed the packet that carried the request.

#include <concepts>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rohcrl/channel.hpp"
#include "rohcrl/core.hpp"
#include "rohcrl/random.hpp"

namespace rohcrl {

enum class ChannelKind { GilbertElliot, Hmm };

struct EnvConfig {
  int window = 5;  // W
  int delay = 4;   // d
  HeaderLengths lengths;
  double lambda = 0.01;
  double gamma = 0.95;
  ChannelKind channel = ChannelKind::GilbertElliot;
  GilbertElliotConfig ge;
  HmmChannelConfig hmm;
  ObsNoiseConfig noise;
  SourceDynamics source;
  int horizon = 2000;

  void validate() const {
    if (window < 1) throw std::invalid_argument("W must be at least 1");
    if (delay < 0) throw std::invalid_argument("delay d must be nonnegative");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
    if (horizon < 0) throw std::invalid_argument("horizon T must be nonnegative");
    lengths.validate();
    noise.validate();
    source.validate();
    if (channel == ChannelKind::GilbertElliot)
      ge.validate();
    else
      hmm.validate();
  }
};

struct Observation {
  bool z_T = false;
  std::variant<bool, double> z_H{false};  // bool for Gilbert-Elliot, real for HMM
  int z_D = -1;                           // -1 when no feedback arrives this slot
  std::vector<bool> sigma_S;              // sigma_S[t], ..., sigma_S[t-d]

  bool compressible_now() const { return sigma_S.front(); }
  double z_H_value() const {
    return std::visit([](auto v) { return static_cast<double>(v); }, z_H);
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepDiagnostics {
  bool decode_success = false;
  HeaderType delivered_header = HeaderType::IR;  // alpha_C[t-d]
  bool charged_feedback = false;                 // alpha_F[t-d-1]
  int sigma_D = 0;                               // sigma_D[t-d+1]
  bool sigma_T = false;                          // sigma_T[t-d+1]
  double sigma_H = 0.0;                          // sigma_H[t-d+1]
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  StepDiagnostics diagnostics;
};

struct PendingFeedback {
  long due_slot;
  int sigma_D;
};

struct EnvState {
  DecompressorState decompressor{0, 1};
  SourceState source;
  ChannelState channel;
  std::deque<CompressorAction> pending_actions;  // alpha[t-1], ..., alpha[t-d-1]
  std::deque<bool> sigma_S_window;               // sigma_S[t], ..., sigma_S[t-d]
  bool sigma_T = false;                          // sigma_T[t-d]
  double sigma_H = 0.0;                          // sigma_H[t-d]
  std::deque<PendingFeedback> feedback_queue;
  long clock = 0;
};

inline double packet_efficiency(HeaderType header, const HeaderLengths& lengths) {
  return static_cast<double>(lengths.payload) /
         static_cast<double>(lengths.payload + header_length(header, lengths));
}

class RohcEnv {
 public:
  explicit RohcEnv(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }
  long clock() const { return state_.clock; }
  bool done() const { return state_.clock >= cfg_.horizon; }

  Observation reset(std::uint64_t seed) {
    rng_.seed(seed);
    const int d = cfg_.delay;
    state_ = EnvState{};
    state_.decompressor = DecompressorState::no_context(cfg_.window);
    if (cfg_.channel == ChannelKind::GilbertElliot) {
      const GeState ge = ge_initial(cfg_.ge, rng_);
      state_.sigma_H = ge.good ? 1.0 : 0.0;
      state_.channel = ge;
    } else {
      HmmState hmm = hmm_initial(cfg_.hmm, rng_);
      state_.sigma_H = hmm.envelope();
      state_.channel = std::move(hmm);
    }
    state_.sigma_T = false;
    state_.source = SourceState::initial(cfg_.source);
    for (int k = 0; k <= d; ++k) {
      auto [next, bit] = source_step(std::move(state_.source), rng_);
      state_.source = std::move(next);
      state_.sigma_S_window.push_front(bit);
    }
    state_.pending_actions.assign(static_cast<std::size_t>(d + 1), kPaddingAction);
    return observe();
  }

  StepOutcome step(CompressorAction action) {
    if (done()) throw std::logic_error("step called past the episode horizon");
    const auto d = static_cast<std::size_t>(cfg_.delay);

    state_.pending_actions.push_front(action);
    const CompressorAction delivered = state_.pending_actions[d];
    const CompressorAction charged = state_.pending_actions[d + 1];
    state_.pending_actions.pop_back();

    advance_channel(delivered.header);

    const bool compressible = state_.sigma_S_window.back();  // sigma_S[t-d]
    state_.decompressor =
        decompressor_step(state_.decompressor, delivered.header, state_.sigma_T, compressible);
    const bool success = is_decode_success(state_.decompressor);

    StepOutcome out;
    out.reward = (success ? packet_efficiency(delivered.header, cfg_.lengths) : 0.0) -
                 (charged.request_feedback ? cfg_.lambda : 0.0);
    out.diagnostics = {success,
                       delivered.header,
                       charged.request_feedback,
                       state_.decompressor.value(),
                       state_.sigma_T,
                       state_.sigma_H};

    if (delivered.request_feedback)
      state_.feedback_queue.push_back({state_.clock + 1, state_.decompressor.value()});

    auto [source, bit] = source_step(std::move(state_.source), rng_);
    state_.source = std::move(source);
    state_.sigma_S_window.push_front(bit);
    state_.sigma_S_window.pop_back();

    ++state_.clock;
    out.observation = observe();
    return out;
  }

 private:
  void advance_channel(HeaderType header) {
    if (auto* ge = std::get_if<GeState>(&state_.channel)) {
      *ge = ge_step(*ge, cfg_.ge, rng_);
      state_.sigma_H = ge->good ? 1.0 : 0.0;
      state_.sigma_T = ge_transmission(ge->good, header, cfg_.ge, rng_);
    } else {
      auto [next, envelope] = hmm_step(std::get<HmmState>(std::move(state_.channel)), cfg_.hmm, rng_);
      state_.channel = std::move(next);
      state_.sigma_H = envelope;
      state_.sigma_T = hmm_transmission(envelope, cfg_.hmm, rng_);
    }
  }

  Observation observe() {
    Observation z;
    z.z_T = observe_transmission(state_.sigma_T, cfg_.noise.eps_t, rng_);
    if (cfg_.channel == ChannelKind::GilbertElliot)
      z.z_H = observe_channel_ge(state_.sigma_H > 0.5, cfg_.noise.eps_h, rng_);
    else
      z.z_H = observe_channel_hmm(state_.sigma_H, cfg_.hmm.obs_noise_var, rng_);
    if (!state_.feedback_queue.empty() && state_.feedback_queue.front().due_slot == state_.clock) {
      z.z_D = state_.feedback_queue.front().sigma_D;
      state_.feedback_queue.pop_front();
    }
    z.sigma_S.assign(state_.sigma_S_window.begin(), state_.sigma_S_window.end());
    return z;
  }

  EnvConfig cfg_;
  EnvState state_;
  Rng rng_;
};

// --- Policies and episodes ------------------------------------------------

/// A compressor policy sees one observation per slot and keeps whatever
/// history it needs; reset() starts a new episode.
template <class P>
concept Policy = requires(P& p, const Observation& z, Rng& rng) {
  { p.act(z, rng) } -> std::convertible_to<CompressorAction>;
  p.reset();
};

struct TraceRow {
  long t = 0;
  CompressorAction action;
  Observation observation;  // z[t], seen before acting
  double reward = 0.0;
  StepDiagnostics diagnostics;
};

using Trace = std::vector<TraceRow>;

template <Policy P>
Trace run_episode(P& policy, const EnvConfig& cfg, std::uint64_t seed) {
  RohcEnv env(cfg);
  Rng policy_rng(derive_seed(seed, streams::kPolicy));
  Observation z = env.reset(derive_seed(seed, streams::kEnvironment));
  policy.reset();
  Trace trace;
  trace.reserve(static_cast<std::size_t>(cfg.horizon));
  while (!env.done()) {
    const CompressorAction a = policy.act(z, policy_rng);
    StepOutcome out = env.step(a);
    trace.push_back({env.clock() - 1, a, std::move(z), out.reward, out.diagnostics});
    z = std::move(out.observation);
  }
  return trace;
}

// --- Trace CSV --------------------------------------------------------------

inline constexpr const char* kTraceCsvHeader =
    "t,alpha_C,alpha_F,z_T,z_H,z_D,sigma_S,sigma_D,sigma_T,reward,decode_success,"
    "alpha_C_delivered,alpha_F_charged";

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << kTraceCsvHeader << '\n';
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(9);
  for (const TraceRow& r : trace) {
    os << r.t << ',' << header_code(r.action.header) << ',' << int{r.action.request_feedback} << ','
       << int{r.observation.z_T} << ',' << r.observation.z_H_value() << ',' << r.observation.z_D
       << ',' << int{r.observation.compressible_now()} << ',' << r.diagnostics.sigma_D << ','
       << int{r.diagnostics.sigma_T} << ',' << r.reward << ',' << int{r.diagnostics.decode_success}
       << ',' << header_code(r.diagnostics.delivered_header) << ','
       << int{r.diagnostics.charged_feedback} << '\n';
  }
  os.flags(flags);
  os.precision(precision);
}

/// Parses a trace written by write_trace_csv. Only the exported columns are
/// restored; the observation's source window holds just sigma_S[t].
inline Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceCsvHeader)
    throw std::runtime_error("trace CSV: missing or unexpected header row");
  Trace trace;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 13)
      throw std::runtime_error("trace CSV line " + std::to_string(lineno) + ": expected 13 fields");
    try {
      TraceRow r;
      r.t = std::stol(f[0]);
      r.action = {header_from_code(std::stoi(f[1])), std::stoi(f[2]) != 0};
      r.observation.z_T = std::stoi(f[3]) != 0;
      r.observation.z_H = std::stod(f[4]);
      r.observation.z_D = std::stoi(f[5]);
      r.observation.sigma_S = {std::stoi(f[6]) != 0};
      r.diagnostics.sigma_D = std::stoi(f[7]);
      r.diagnostics.sigma_T = std::stoi(f[8]) != 0;
      r.reward = std::stod(f[9]);
      r.diagnostics.decode_success = std::stoi(f[10]) != 0;
      r.diagnostics.delivered_header = header_from_code(std::stoi(f[11]));
      r.diagnostics.charged_feedback = std::stoi(f[12]) != 0;
      trace.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw std::runtime_error("trace CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace rohcrl
