#pragma once

// Experiment orchestration: train, evaluate greedily on a held-out seed,
// compare against KT at the matched feedback rate, sweep one config axis,
// and export results.

#include <cstdint>
#include <future>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rohcrl/agent.hpp"
#include "rohcrl/baselines.hpp"
#include "rohcrl/config.hpp"
#include "rohcrl/metrics.hpp"

namespace rohcrl {

struct ResultRow {
  std::string sweep_param;
  double sweep_value = 0.0;
  std::string policy;
  double efficiency = 0.0;
  double feedback_rate = 0.0;
  double mean_reward = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Seed of the greedy evaluation episode; disjoint from every training
/// episode seed of the same run.
inline std::uint64_t evaluation_seed(std::uint64_t seed) {
  return derive_seed(seed, streams::kEvaluation);
}

template <Policy P>
MetricsReport evaluate_policy(P& policy, const EnvConfig& env, std::uint64_t seed) {
  return compute_metrics(run_episode(policy, env, seed), env.lengths);
}

inline MetricsReport evaluate_baseline(const ExperimentConfig& cfg, const std::string& name,
                                       std::uint64_t seed) {
  if (name == "kt") {
    KtPolicy p(cfg.kt, cfg.env.window);
    return evaluate_policy(p, cfg.env, seed);
  }
  if (name == "random") {
    RandomPolicy p;
    return evaluate_policy(p, cfg.env, seed);
  }
  HeaderType h = HeaderType::IR;
  if (name == "co7") h = HeaderType::CO7;
  else if (name == "co3") h = HeaderType::CO3;
  else if (name != "ir") throw std::invalid_argument("unknown baseline policy '" + name + "'");
  FixedPolicy p(h);
  return evaluate_policy(p, cfg.env, seed);
}

/// Rows for one (already parameterized) configuration: the trained greedy
/// agent, then KT with p_F set to the agent's realized feedback rate.
inline std::vector<ResultRow> run_point(const ExperimentConfig& cfg, const std::string& param,
                                        double value, std::uint64_t seed) {
  cfg.validate();
  const TrainingResult trained = run_training(cfg.env, cfg.agent, cfg.episodes, seed);
  const std::uint64_t eval_seed = evaluation_seed(seed);
  GreedyPolicy greedy(trained.params, shape_for(cfg.env, cfg.agent));
  const MetricsReport rl = evaluate_policy(greedy, cfg.env, eval_seed);

  ExperimentConfig kt_cfg = cfg;
  kt_cfg.kt.feedback_prob = rl.feedback_rate;
  const MetricsReport kt = evaluate_baseline(kt_cfg, "kt", eval_seed);

  return {{param, value, "rl", rl.transmission_efficiency, rl.feedback_rate, rl.mean_reward, seed},
          {param, value, "kt", kt.transmission_efficiency, kt.feedback_rate, kt.mean_reward, seed}};
}

/// One job per sweep point, seeded seed + point index. With no sweep axis the
/// configuration itself is the single point.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, int jobs = 1) {
  cfg.validate();
  std::vector<ExperimentConfig> points;
  std::vector<double> values;
  if (cfg.sweep_param.empty()) {
    points.push_back(cfg);
    values.push_back(0.0);
  } else {
    if (!is_sweepable_key(cfg.sweep_param))
      throw ConfigError("sweep axis '" + cfg.sweep_param + "' is not a numeric config field");
    if (cfg.sweep_values.empty()) throw ConfigError("sweep axis has no values");
    for (double v : cfg.sweep_values) {
      ExperimentConfig p = cfg;
      set_config_value(p, cfg.sweep_param, v);
      p.validate();
      points.push_back(std::move(p));
      values.push_back(v);
    }
  }
  const std::string param = cfg.sweep_param.empty() ? "none" : cfg.sweep_param;

  std::vector<std::vector<ResultRow>> per_point(points.size());
  const std::size_t width = static_cast<std::size_t>(jobs < 1 ? 1 : jobs);
  for (std::size_t begin = 0; begin < points.size(); begin += width) {
    std::vector<std::future<std::vector<ResultRow>>> running;
    const std::size_t end = std::min(points.size(), begin + width);
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint64_t seed = cfg.seed + i;
      if (width == 1)
        per_point[i] = run_point(points[i], param, values[i], seed);
      else
        running.push_back(std::async(std::launch::async, [&, i, seed] {
          return run_point(points[i], param, values[i], seed);
        }));
    }
    for (std::size_t k = 0; k < running.size(); ++k) per_point[begin + k] = running[k].get();
  }

  std::vector<ResultRow> rows;
  for (auto& p : per_point) rows.insert(rows.end(), p.begin(), p.end());
  return rows;
}

/// Continues training across channel switches without resetting the network.
/// Schedule entries (episode, eps_B) take effect from that episode on.
inline std::vector<EpisodeStats> adapt_experiment(const ExperimentConfig& cfg,
                                                  const std::vector<std::pair<int, double>>& schedule) {
  cfg.validate();
  if (cfg.env.channel != ChannelKind::GilbertElliot)
    throw std::invalid_argument("adaptation schedules switch eps_B and need the Gilbert-Elliot channel");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].first < 0) throw std::invalid_argument("schedule episode must be nonnegative");
    if (i > 0 && schedule[i].first <= schedule[i - 1].first)
      throw std::invalid_argument("schedule episodes must be strictly increasing");
    GilbertElliotConfig ge = cfg.env.ge;
    ge.eps_b = schedule[i].second;
    ge.validate();
  }

  DdqnTrainer trainer(cfg.env, cfg.agent, cfg.seed);
  EnvConfig env = cfg.env;
  std::size_t next = 0;
  std::vector<EpisodeStats> curve;
  for (int j = 0; j < cfg.episodes; ++j) {
    while (next < schedule.size() && schedule[next].first <= j) env.ge.eps_b = schedule[next++].second;
    curve.push_back(trainer.train_episode(env));
  }
  return curve;
}

// --- CSV --------------------------------------------------------------------------

inline constexpr const char* kResultCsvHeader =
    "sweep_param,sweep_value,policy,efficiency,feedback_rate,mean_reward,seed";

inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  const auto precision = os.precision();
  os << kResultCsvHeader << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows)
    os << r.sweep_param << ',' << r.sweep_value << ',' << r.policy << ',' << r.efficiency << ','
       << r.feedback_rate << ',' << r.mean_reward << ',' << r.seed << '\n';
  os.precision(precision);
}

inline std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kResultCsvHeader)
    throw std::runtime_error("results CSV: missing or unexpected header row");
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw std::runtime_error("results CSV: expected 7 fields in '" + line + "'");
    rows.push_back({f[0], std::stod(f[1]), f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                    std::stoull(f[6])});
  }
  return rows;
}

inline void write_curve_csv(std::ostream& os, const std::vector<EpisodeStats>& curve) {
  const auto precision = os.precision();
  os << "episode,mean_reward,efficiency,feedback_rate,epsilon\n" << std::setprecision(9);
  for (const auto& s : curve)
    os << s.episode << ',' << s.mean_reward << ',' << s.efficiency << ',' << s.feedback_rate << ','
       << s.epsilon << '\n';
  os.precision(precision);
}

}  // namespace rohcrl
