#pragma once

// Shared domain types, the decompressor state machine and the header
// compressibility source.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rohcrl/random.hpp"

namespace rohcrl {

enum class HeaderType : std::uint8_t { IR = 0, CO7 = 1, CO3 = 2 };

inline constexpr int kNumHeaders = 3;
inline constexpr int kNumActions = 6;

inline HeaderType header_from_code(int code) {
  if (code < 0 || code >= kNumHeaders)
    throw std::invalid_argument("header code must be 0 (IR), 1 (CO7) or 2 (CO3), got " +
                                std::to_string(code));
  return static_cast<HeaderType>(code);
}

inline constexpr int header_code(HeaderType h) { return static_cast<int>(h); }

inline const char* header_name(HeaderType h) {
  switch (h) {
    case HeaderType::IR: return "IR";
    case HeaderType::CO7: return "CO7";
    case HeaderType::CO3: return "CO3";
  }
  return "?";
}

/// Payload and per-header bit lengths. IR is longest, CO3 shortest.
struct HeaderLengths {
  int payload = 20;
  std::array<int, kNumHeaders> header{60, 15, 1};

  void validate() const {
    if (payload <= 0) throw std::invalid_argument("payload length must be positive");
    if (!(header[0] > header[1] && header[1] > header[2] && header[2] > 0))
      throw std::invalid_argument("header lengths must satisfy L0 > L1 > L2 > 0");
  }
};

inline int header_length(HeaderType h, const HeaderLengths& lengths) {
  return lengths.header[static_cast<std::size_t>(header_code(h))];
}

struct CompressorAction {
  HeaderType header = HeaderType::IR;
  bool request_feedback = false;

  friend bool operator==(const CompressorAction&, const CompressorAction&) = default;
};

// Action index layout: 2 * header code + feedback flag.
inline constexpr int action_index(CompressorAction a) {
  return 2 * header_code(a.header) + (a.request_feedback ? 1 : 0);
}

inline CompressorAction action_from_index(int index) {
  if (index < 0 || index >= kNumActions)
    throw std::invalid_argument("action index out of range: " + std::to_string(index));
  return {static_cast<HeaderType>(index / 2), (index % 2) == 1};
}

inline constexpr CompressorAction kPaddingAction{HeaderType::IR, false};

enum class ContextClass { Full, Repair, None };

/// Decompressor FSM state: 0..W-1 full context (confidence high to low),
/// W repair context, W+1 no context.
class DecompressorState {
 public:
  DecompressorState(int value, int window) : value_(value), window_(window) {
    if (window < 1) throw std::invalid_argument("W must be at least 1");
    if (value < 0 || value > window + 1)
      throw std::invalid_argument("decompressor state " + std::to_string(value) +
                                  " outside 0..W+1");
  }

  static DecompressorState no_context(int window) { return {window + 1, window}; }
  static DecompressorState repair_context(int window) { return {window, window}; }

  int value() const { return value_; }
  int window() const { return window_; }

  ContextClass context_class() const {
    if (value_ < window_) return ContextClass::Full;
    if (value_ == window_) return ContextClass::Repair;
    return ContextClass::None;
  }

  friend bool operator==(const DecompressorState&, const DecompressorState&) = default;

 private:
  int value_;
  int window_;
};

inline ContextClass classify_state(int value, int window) {
  return DecompressorState(value, window).context_class();
}

/// One slot of the decompressor state machine.
///
/// Full context level l: decodes when the packet arrives and either the header
/// is compressible or a longer header was sent. A lost compressible packet
/// drops one confidence level (level W is repair context). An uncompressible
/// header that is lost or sent as CO3 damages the context outright.
/// Repair context: only a received IR or CO7 restores it.
/// No context: only a received IR establishes it.
inline DecompressorState decompressor_step(DecompressorState current, HeaderType header,
                                           bool tx_ok, bool compressible) {
  const int w = current.window();
  const int s = current.value();
  const bool co3 = header == HeaderType::CO3;
  switch (current.context_class()) {
    case ContextClass::Full:
      if (tx_ok && (compressible || !co3)) return {0, w};
      if (compressible) return {s + 1, w};
      return DecompressorState::repair_context(w);
    case ContextClass::Repair:
      if (tx_ok && !co3) return {0, w};
      return current;
    case ContextClass::None:
      if (tx_ok && header == HeaderType::IR) return {0, w};
      return current;
  }
  return current;
}

inline bool is_decode_success(const DecompressorState& next) { return next.value() == 0; }

/// Conditional law of a d_S-th order binary Markov source. `p_one[k]` is the
/// probability that the next bit is 1 given history k, where bit i of k is the
/// value i+1 slots ago.
struct SourceDynamics {
  int order = 1;
  std::vector<double> p_one{1.0, 0.9};

  static SourceDynamics always_compressible(int order = 1) {
    return {order, std::vector<double>(std::size_t{1} << order, 1.0)};
  }

  void validate() const {
    if (order < 1 || order > 16) throw std::invalid_argument("source order must be in 1..16");
    if (p_one.size() != (std::size_t{1} << order))
      throw std::invalid_argument("source table must have 2^order entries");
    for (double p : p_one)
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("source probabilities must lie in [0,1]");
  }

  double prob_one(const std::vector<bool>& history) const {
    std::size_t k = 0;
    for (int i = 0; i < order; ++i)
      if (history[static_cast<std::size_t>(i)]) k |= std::size_t{1} << i;
    return p_one[k];
  }
};

struct SourceState {
  std::vector<bool> window;  // most recent first, length = dynamics.order
  SourceDynamics dynamics;

  // History of all-compressible headers.
  static SourceState initial(SourceDynamics dynamics) {
    dynamics.validate();
    SourceState s;
    s.window.assign(static_cast<std::size_t>(dynamics.order), true);
    s.dynamics = std::move(dynamics);
    return s;
  }
};

inline std::pair<SourceState, bool> source_step(SourceState state, Rng& rng) {
  const bool bit = bernoulli(rng, state.dynamics.prob_one(state.window));
  state.window.insert(state.window.begin(), bit);
  state.window.pop_back();
  return {std::move(state), bit};
}

}  // namespace rohcrl
