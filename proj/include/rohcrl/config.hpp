#pragma once

// Experiment configuration: flat `key = value` files with dotted section
// prefixes, e.g.
//
//   env.d = 4
//   env.ge.eps_B = 0.2
//   agent.eta = 1e-4
//   experiment.sweep.param = env.ge.eps_B
//   experiment.sweep.values = 0.1, 0.2, 0.3
//
// Blank lines and lines starting with '#' are ignored. Unknown keys are errors.

#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rohcrl/agent.hpp"
#include "rohcrl/baselines.hpp"
#include "rohcrl/env.hpp"

namespace rohcrl {

struct ExperimentConfig {
  EnvConfig env;
  AgentConfig agent;
  KtConfig kt;
  std::string policy = "rl";  // rl | kt | ir | co7 | co3 | random
  int episodes = 100;         // M
  std::uint64_t seed = 1;
  std::string sweep_param;
  std::vector<double> sweep_values;
  std::vector<std::pair<int, double>> adapt_schedule;  // (episode, eps_B)

  void validate() const {
    env.validate();
    agent.validate();
    kt.validate();
    if (episodes < 0) throw std::invalid_argument("experiment.episodes must be nonnegative");
    static const char* const kPolicies[] = {"rl", "kt", "ir", "co7", "co3", "random"};
    bool known = false;
    for (const char* p : kPolicies) known = known || policy == p;
    if (!known) throw std::invalid_argument("unknown policy '" + policy + "'");
  }
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline HeaderType parse_header(const std::string& key, const std::string& v) {
  if (v == "IR" || v == "ir" || v == "0") return HeaderType::IR;
  if (v == "CO7" || v == "co7" || v == "1") return HeaderType::CO7;
  if (v == "CO3" || v == "co3" || v == "2") return HeaderType::CO3;
  throw ConfigError(key + ": expected IR, CO7 or CO3, got '" + v + "'");
}

template <class T>
std::string to_text(const T& v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  bool numeric = true;  // may be used as a sweep axis
};

inline const std::map<std::string, Field>& fields() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    auto integer = [&](const std::string& key, auto member) {
      f[key] = {[key, member](C& c, S v) { member(c) = static_cast<int>(parse_int(key, v)); }, true};
    };
    auto dbl = [&](const std::string& key, auto member) {
      f[key] = {[key, member](C& c, S v) { member(c) = parse_double(key, v); }, true};
    };

    integer("env.W", [](C& c) -> int& { return c.env.window; });
    integer("env.d", [](C& c) -> int& { return c.env.delay; });
    integer("env.L", [](C& c) -> int& { return c.env.lengths.payload; });
    integer("env.L0", [](C& c) -> int& { return c.env.lengths.header[0]; });
    integer("env.L1", [](C& c) -> int& { return c.env.lengths.header[1]; });
    integer("env.L2", [](C& c) -> int& { return c.env.lengths.header[2]; });
    integer("env.T", [](C& c) -> int& { return c.env.horizon; });
    dbl("env.lambda", [](C& c) -> double& { return c.env.lambda; });
    dbl("env.gamma", [](C& c) -> double& { return c.env.gamma; });
    dbl("env.eps_T", [](C& c) -> double& { return c.env.noise.eps_t; });
    dbl("env.eps_H", [](C& c) -> double& { return c.env.noise.eps_h; });
    f["env.channel"] = {[](C& c, S v) {
                          if (v == "ge") c.env.channel = ChannelKind::GilbertElliot;
                          else if (v == "hmm") c.env.channel = ChannelKind::Hmm;
                          else throw ConfigError("env.channel: expected ge or hmm, got '" + v + "'");
                        },
                        false};
    dbl("env.ge.l_B", [](C& c) -> double& { return c.env.ge.mean_bad_duration; });
    dbl("env.ge.eps_B", [](C& c) -> double& { return c.env.ge.eps_b; });
    dbl("env.ge.beta_1", [](C& c) -> double& { return c.env.ge.beta_good; });
    dbl("env.ge.beta_0", [](C& c) -> double& { return c.env.ge.beta_bad; });
    dbl("env.ge.scale_IR", [](C& c) -> double& { return c.env.ge.header_scale[0]; });
    dbl("env.ge.scale_CO7", [](C& c) -> double& { return c.env.ge.header_scale[1]; });
    dbl("env.ge.scale_CO3", [](C& c) -> double& { return c.env.ge.header_scale[2]; });
    dbl("env.hmm.rho", [](C& c) -> double& { return c.env.hmm.rho; });
    integer("env.hmm.d_H", [](C& c) -> int& { return c.env.hmm.order; });
    dbl("env.hmm.P_T", [](C& c) -> double& { return c.env.hmm.tx_power; });
    dbl("env.hmm.omega_H_sq", [](C& c) -> double& { return c.env.hmm.obs_noise_var; });
    integer("env.source.order", [](C& c) -> int& { return c.env.source.order; });
    f["env.source.p_one"] = {[](C& c, S v) {
                               c.env.source.p_one.clear();
                               for (const auto& item : split_list(v))
                                 c.env.source.p_one.push_back(parse_double("env.source.p_one", item));
                             },
                             false};

    dbl("agent.gamma", [](C& c) -> double& { return c.agent.gamma; });
    dbl("agent.eta", [](C& c) -> double& { return c.agent.eta; });
    dbl("agent.epsilon_init", [](C& c) -> double& { return c.agent.epsilon_init; });
    dbl("agent.epsilon_decay", [](C& c) -> double& { return c.agent.epsilon_decay; });
    dbl("agent.epsilon_floor", [](C& c) -> double& { return c.agent.epsilon_floor; });
    integer("agent.batch_size", [](C& c) -> int& { return c.agent.batch_size; });
    integer("agent.replay_capacity", [](C& c) -> int& { return c.agent.replay_capacity; });
    integer("agent.grad_steps", [](C& c) -> int& { return c.agent.grad_steps; });
    integer("agent.d0", [](C& c) -> int& { return c.agent.history_extra; });
    integer("agent.hidden_width", [](C& c) -> int& { return c.agent.hidden_width; });
    integer("agent.hidden_layers", [](C& c) -> int& { return c.agent.hidden_layers; });
    f["agent.double_q"] = {[](C& c, S v) { c.agent.double_q = parse_bool("agent.double_q", v); }, false};

    dbl("kt.p_F", [](C& c) -> double& { return c.kt.feedback_prob; });
    f["kt.on_full"] = {[](C& c, S v) { c.kt.on_full = parse_header("kt.on_full", v); }, false};
    f["kt.on_repair"] = {[](C& c, S v) { c.kt.on_repair = parse_header("kt.on_repair", v); }, false};
    f["kt.on_none"] = {[](C& c, S v) { c.kt.on_none = parse_header("kt.on_none", v); }, false};

    f["experiment.policy"] = {[](C& c, S v) { c.policy = v; }, false};
    integer("experiment.episodes", [](C& c) -> int& { return c.episodes; });
    f["experiment.seed"] = {[](C& c, S v) {
                              const long long s = parse_int("experiment.seed", v);
                              if (s < 0) throw ConfigError("experiment.seed must be nonnegative");
                              c.seed = static_cast<std::uint64_t>(s);
                            },
                            false};
    f["experiment.sweep.param"] = {[](C& c, S v) { c.sweep_param = v; }, false};
    f["experiment.sweep.values"] = {[](C& c, S v) {
                                      c.sweep_values.clear();
                                      for (const auto& item : split_list(v))
                                        c.sweep_values.push_back(parse_double("experiment.sweep.values", item));
                                    },
                                    false};
    f["experiment.adapt.schedule"] = {[](C& c, S v) {
                                        c.adapt_schedule.clear();
                                        for (const auto& item : split_list(v)) {
                                          const auto colon = item.find(':');
                                          if (colon == std::string::npos)
                                            throw ConfigError("experiment.adapt.schedule: expected episode:eps_B pairs");
                                          c.adapt_schedule.emplace_back(
                                              static_cast<int>(parse_int("experiment.adapt.schedule", trim(item.substr(0, colon)))),
                                              parse_double("experiment.adapt.schedule", trim(item.substr(colon + 1))));
                                        }
                                      },
                                      false};
    return f;
  }();
  return table;
}

}  // namespace detail

inline bool is_config_key(const std::string& key) { return detail::fields().count(key) > 0; }

inline bool is_sweepable_key(const std::string& key) {
  const auto it = detail::fields().find(key);
  return it != detail::fields().end() && it->second.numeric;
}

inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = detail::fields().find(key);
  if (it == detail::fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, value);
}

inline void set_config_value(ExperimentConfig& cfg, const std::string& key, double value) {
  if (!is_sweepable_key(key)) throw ConfigError("'" + key + "' is not a numeric config field");
  const auto& field = detail::fields().at(key);
  // Integer fields reject fractional text, so format integral values plainly.
  if (value == static_cast<double>(static_cast<long long>(value)))
    field.set(cfg, std::to_string(static_cast<long long>(value)));
  else
    field.set(cfg, detail::to_text(value));
}

inline void apply_config_text(ExperimentConfig& cfg, std::istream& is) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  apply_config_text(cfg, is);
  return cfg;
}

// --- Presets ------------------------------------------------------------------
//
// Desk-scale reproductions of the published experiment grid. Each preset
// fixes the environment of one figure and sets its sweep axis.

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig4", "fig5", "fig6", "fig7",
                                              "fig8", "fig13", "fig14", "fig15"};
  return names;
}

inline void apply_gilbert_elliot_defaults(ExperimentConfig& c) {
  c.env.channel = ChannelKind::GilbertElliot;
  c.env.window = 5;
  c.env.delay = 4;
  c.env.lengths = HeaderLengths{};
  c.env.ge = GilbertElliotConfig{};
  c.env.noise = ObsNoiseConfig{0.1, 0.1};
  c.env.source = SourceDynamics{};
}

inline void apply_hidden_markov_defaults(ExperimentConfig& c) {
  apply_gilbert_elliot_defaults(c);
  c.env.channel = ChannelKind::Hmm;
  c.env.delay = 8;
  c.env.hmm = HmmChannelConfig{0.5, 4, 2.0, 1.0};
}

inline void apply_preset(ExperimentConfig& c, const std::string& name) {
  if (name == "fig4") {
    apply_gilbert_elliot_defaults(c);
    c.sweep_param = "env.ge.eps_B";
    c.sweep_values = {0.1, 0.2, 0.3, 0.4, 0.5};
  } else if (name == "fig5") {
    apply_gilbert_elliot_defaults(c);
    c.sweep_param = "env.d";
    c.sweep_values = {2, 4, 6, 8};
  } else if (name == "fig6") {
    apply_gilbert_elliot_defaults(c);
    c.sweep_param = "env.eps_T";
    c.sweep_values = {0.0, 0.1, 0.2, 0.3, 0.4};
  } else if (name == "fig7") {
    apply_gilbert_elliot_defaults(c);
    c.sweep_param = "env.eps_H";
    c.sweep_values = {0.0, 0.1, 0.2, 0.3, 0.4};
  } else if (name == "fig8") {
    apply_gilbert_elliot_defaults(c);
    c.sweep_param = "env.L";
    c.sweep_values = {10, 20, 40, 80, 160};
  } else if (name == "fig13") {
    apply_hidden_markov_defaults(c);
    c.sweep_param = "env.hmm.P_T";
    c.sweep_values = {0.5, 1.0, 2.0, 4.0};
  } else if (name == "fig14") {
    apply_hidden_markov_defaults(c);
    c.sweep_param = "env.hmm.rho";
    c.sweep_values = {0.1, 0.3, 0.5, 0.7, 0.9};
  } else if (name == "fig15") {
    apply_hidden_markov_defaults(c);
    c.sweep_param = "env.hmm.omega_H_sq";
    c.sweep_values = {0.25, 0.5, 1.0, 2.0, 4.0};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

/// Published scale: M = 3000 episodes of T = 10000 slots, width-2048 layers.
inline void apply_paper_scale(ExperimentConfig& c) {
  c.episodes = 3000;
  c.env.horizon = 10000;
  c.agent.hidden_width = 2048;
}

}  // namespace rohcrl
