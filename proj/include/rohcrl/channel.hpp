#pragma once

// Channel quality processes (Gilbert-Elliot and Rayleigh envelope of an
// AR(1) Gaussian pair), transmission-status sampling, and the noisy
// lower-layer observations of both.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <utility>
#include <variant>

#include "rohcrl/core.hpp"
#include "rohcrl/random.hpp"

namespace rohcrl {

struct GilbertElliotConfig {
  double mean_bad_duration = 5.0;  // l_B
  double eps_b = 0.2;
  double beta_good = 0.9;  // P(success | good)
  double beta_bad = 0.1;   // P(success | bad)
  // Per-header multiplier on the success probability; identity by default.
  std::array<double, kNumHeaders> header_scale{1.0, 1.0, 1.0};

  double p_bad_to_good() const { return (1.0 / mean_bad_duration) / (1.0 / eps_b - 1.0); }
  double p_good_to_bad() const { return 1.0 / mean_bad_duration; }

  void validate() const {
    if (!(mean_bad_duration > 0.0)) throw std::invalid_argument("l_B must be positive");
    if (!(eps_b > 0.0 && eps_b < 1.0)) throw std::invalid_argument("eps_B must lie in (0,1)");
    const double p01 = p_bad_to_good();
    const double p10 = p_good_to_bad();
    if (!(p01 > 0.0 && p01 <= 1.0 + 1e-12))
      throw std::invalid_argument("bad->good probability (1/l_B)/(1/eps_B-1) must lie in (0,1]");
    if (!(p10 > 0.0 && p10 <= 1.0 + 1e-12))
      throw std::invalid_argument("good->bad probability 1/l_B must lie in (0,1]");
    if (!(beta_bad >= 0.0 && beta_bad <= beta_good && beta_good <= 1.0))
      throw std::invalid_argument("need 0 <= beta_0 <= beta_1 <= 1");
    for (double s : header_scale)
      if (!(s >= 0.0)) throw std::invalid_argument("header scale must be nonnegative");
  }
};

struct HmmChannelConfig {
  double rho = 0.5;
  int order = 4;  // d_H
  double tx_power = 2.0;
  double obs_noise_var = 1.0;  // omega_H^2

  void validate() const {
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0,1)");
    if (order < 1) throw std::invalid_argument("d_H must be positive");
    if (!(tx_power > 0.0)) throw std::invalid_argument("P_T must be positive");
    if (!(obs_noise_var >= 0.0)) throw std::invalid_argument("omega_H^2 must be nonnegative");
  }
};

struct ObsNoiseConfig {
  double eps_t = 0.1;
  double eps_h = 0.1;

  void validate() const {
    if (!(eps_t >= 0.0 && eps_t < 0.5)) throw std::invalid_argument("eps_T must lie in [0,0.5)");
    if (!(eps_h >= 0.0 && eps_h < 0.5)) throw std::invalid_argument("eps_H must lie in [0,0.5)");
  }
};

struct GeState {
  bool good = true;
  friend bool operator==(const GeState&, const GeState&) = default;
};

struct HmmState {
  std::deque<double> in_phase;    // most recent first, d_H entries
  std::deque<double> quadrature;  // most recent first, d_H entries

  double envelope() const { return std::hypot(in_phase.front(), quadrature.front()); }
  friend bool operator==(const HmmState&, const HmmState&) = default;
};

using ChannelState = std::variant<GeState, HmmState>;

// --- Gilbert-Elliot -------------------------------------------------------

/// Stationary probability of the bad state (sigma_H = 0).
inline double ge_stationary(const GilbertElliotConfig& cfg) {
  const double p01 = cfg.p_bad_to_good();
  const double p10 = cfg.p_good_to_bad();
  return p10 / (p01 + p10);
}

inline GeState ge_initial(const GilbertElliotConfig& cfg, Rng& rng) {
  return {!bernoulli(rng, ge_stationary(cfg))};
}

inline GeState ge_step(GeState state, const GilbertElliotConfig& cfg, Rng& rng) {
  if (state.good)
    return {!bernoulli(rng, cfg.p_good_to_bad())};
  return {bernoulli(rng, cfg.p_bad_to_good())};
}

inline double ge_success_probability(bool good, HeaderType header, const GilbertElliotConfig& cfg) {
  const double base = good ? cfg.beta_good : cfg.beta_bad;
  return std::min(1.0, base * cfg.header_scale[static_cast<std::size_t>(header_code(header))]);
}

inline bool ge_transmission(bool good, HeaderType header, const GilbertElliotConfig& cfg, Rng& rng) {
  return bernoulli(rng, ge_success_probability(good, header, cfg));
}

// --- Rayleigh hidden Markov ------------------------------------------------
//
// The in-phase and quadrature components are stationary Gaussian processes
// whose d_H-window covariance has entries rho^|i-j|. That kernel is the AR(1)
// autocovariance, so conditioning on the last d_H values collapses to
// A[t] = rho * A[t-1] + sqrt(1 - rho^2) * w[t].

inline double ar1_next(double previous, double rho, Rng& rng) {
  return rho * previous + std::sqrt(1.0 - rho * rho) * standard_normal(rng);
}

inline HmmState hmm_advance(HmmState state, const HmmChannelConfig& cfg, Rng& rng) {
  const double i = ar1_next(state.in_phase.front(), cfg.rho, rng);
  const double q = ar1_next(state.quadrature.front(), cfg.rho, rng);
  state.in_phase.push_front(i);
  state.in_phase.pop_back();
  state.quadrature.push_front(q);
  state.quadrature.pop_back();
  return state;
}

/// d_H i.i.d. standard normal draws per component, then 10 d_H burn-in steps.
inline HmmState hmm_initial(const HmmChannelConfig& cfg, Rng& rng) {
  HmmState s;
  for (int k = 0; k < cfg.order; ++k) {
    s.in_phase.push_back(standard_normal(rng));
    s.quadrature.push_back(standard_normal(rng));
  }
  for (int k = 0; k < 10 * cfg.order; ++k) s = hmm_advance(std::move(s), cfg, rng);
  return s;
}

/// Advances both components one slot and returns the Rayleigh envelope.
inline std::pair<HmmState, double> hmm_step(HmmState state, const HmmChannelConfig& cfg, Rng& rng) {
  state = hmm_advance(std::move(state), cfg, rng);
  const double envelope = state.envelope();
  return {std::move(state), envelope};
}

inline bool hmm_transmission(double envelope, const HmmChannelConfig& cfg, Rng& rng) {
  return cfg.tx_power * envelope > standard_normal(rng);
}

// --- Lower-layer observations ---------------------------------------------

inline bool observe_transmission(bool tx_ok, double eps_t, Rng& rng) {
  return bernoulli(rng, eps_t) ? !tx_ok : tx_ok;
}

inline bool observe_channel_ge(bool good, double eps_h, Rng& rng) {
  return bernoulli(rng, eps_h) ? !good : good;
}

inline double observe_channel_hmm(double envelope, double obs_noise_var, Rng& rng) {
  return envelope + std::sqrt(obs_noise_var) * standard_normal(rng);
}

}  // namespace rohcrl
