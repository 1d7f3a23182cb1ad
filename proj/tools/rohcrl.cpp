// Command-line harness: train, evaluate, sweep, adapt, and the two
// self-checks. Results go to --out (stdout when omitted) as CSV; summaries
// and diagnostics go to stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rohcrl/config.hpp"
#include "rohcrl/experiment.hpp"
#include "rohcrl/fsm_table.hpp"

namespace {

using namespace rohcrl;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string preset;
  bool paper_scale = false;
  std::vector<std::string> overrides;
  int jobs = 1;
  std::string checkpoint;
  std::string policy;
  std::string schedule;
  int horizon = 3;
  int rollouts = 10000;
};

ExperimentConfig build_config(const Options& o) {
  ExperimentConfig c;
  if (!o.preset.empty()) apply_preset(c, o.preset);
  if (o.paper_scale) apply_paper_scale(c);
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw std::runtime_error("cannot read config file " + o.config_path);
    apply_config_text(c, in);
  }
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

// Writes through a temporary string so a failed run leaves no partial file.
void emit(const Options& o, const std::function<void(std::ostream&)>& write) {
  std::ostringstream buf;
  write(buf);
  if (o.out.empty() || o.out == "-") {
    std::cout << buf.str() << std::flush;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + o.out);
  f << buf.str();
  if (!f.flush()) throw std::runtime_error("write failed for " + o.out);
}

std::string summary(const MetricsReport& m) {
  char line[160];
  std::snprintf(line, sizeof line, "efficiency %.6f  feedback_rate %.6f  mean_reward %.6f",
                m.transmission_efficiency, m.feedback_rate, m.mean_reward);
  return line;
}

int cmd_train(const Options& o) {
  const ExperimentConfig c = build_config(o);
  DdqnTrainer trainer(c.env, c.agent, c.seed);
  std::vector<EpisodeStats> curve;
  for (int j = 0; j < c.episodes; ++j) curve.push_back(trainer.train_episode(c.env));
  emit(o, [&](std::ostream& os) { write_curve_csv(os, curve); });
  if (!o.checkpoint.empty())
    save_checkpoint(o.checkpoint, trainer.params(),
                    {trainer.config(), trainer.shape(), trainer.episodes_done(), trainer.epsilon()});
  if (!curve.empty()) std::cerr << "final episode: mean_reward " << curve.back().mean_reward << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  ExperimentConfig c = build_config(o);
  if (!o.policy.empty()) c.policy = o.policy;
  c.validate();
  const std::uint64_t seed = evaluation_seed(c.seed);
  Trace trace;
  if (c.policy == "rl") {
    if (o.checkpoint.empty()) throw std::runtime_error("eval with policy rl needs --checkpoint");
    auto [params, meta] = load_checkpoint(o.checkpoint);
    GreedyPolicy greedy(std::move(params), shape_for(c.env, meta.agent));
    trace = run_episode(greedy, c.env, seed);
  } else if (c.policy == "kt") {
    KtPolicy p(c.kt, c.env.window);
    trace = run_episode(p, c.env, seed);
  } else if (c.policy == "random") {
    RandomPolicy p;
    trace = run_episode(p, c.env, seed);
  } else {
    FixedPolicy p(c.policy == "ir" ? HeaderType::IR : c.policy == "co7" ? HeaderType::CO7 : HeaderType::CO3);
    trace = run_episode(p, c.env, seed);
  }
  emit(o, [&](std::ostream& os) { write_trace_csv(os, trace); });
  std::cerr << c.policy << ": " << summary(compute_metrics(trace, c.env.lengths)) << '\n';
  return 0;
}

int cmd_sweep(const Options& o) {
  const ExperimentConfig c = build_config(o);
  if (o.jobs < 1) throw std::invalid_argument("--jobs must be at least 1");
  const std::vector<ResultRow> rows = run_experiment(c, o.jobs);
  emit(o, [&](std::ostream& os) { write_results_csv(os, rows); });
  return 0;
}

int cmd_adapt(const Options& o) {
  ExperimentConfig c = build_config(o);
  if (!o.schedule.empty()) set_config_value(c, "experiment.adapt.schedule", o.schedule);
  if (c.adapt_schedule.empty()) throw std::runtime_error("adapt needs a schedule (--schedule or experiment.adapt.schedule)");
  const std::vector<EpisodeStats> curve = adapt_experiment(c, c.adapt_schedule);
  emit(o, [&](std::ostream& os) { write_curve_csv(os, curve); });
  return 0;
}

int cmd_fsm_check(const Options& o) {
  const ExperimentConfig c = build_config(o);
  std::vector<int> windows{c.env.window};
  if (c.env.window != 1) windows.push_back(1);
  int mismatches = 0;
  std::ostringstream report;
  for (int w : windows) {
    const FsmCheckReport r = check_fsm(w);
    mismatches += r.mismatches;
    report << "W=" << w << ": " << r.cases << " cases, " << r.mismatches << " mismatches\n";
    for (const std::string& f : r.failures) report << "  " << f << '\n';
  }
  emit(o, [&](std::ostream& os) { os << report.str(); });
  if (mismatches > 0) {
    std::cerr << "error: decompressor transitions disagree with the table\n";
    return 1;
  }
  return 0;
}

int cmd_oracle_check(const Options& o) {
  const ExperimentConfig c = build_config(o);
  if (o.horizon < 1 || o.rollouts < 1) throw std::invalid_argument("--horizon and --rollouts must be positive");
  ExactOracle oracle(c.env);
  const double bound = oracle.solve_from_reset(o.horizon).value;
  const double tolerance = 0.02;

  std::vector<std::pair<std::string, double>> values;
  FixedPolicy ir(HeaderType::IR), co7(HeaderType::CO7), co3(HeaderType::CO3);
  RandomPolicy random;
  KtPolicy kt(c.kt, c.env.window);
  values.emplace_back("ir", discounted_return(ir, c.env, o.horizon, o.rollouts, c.seed));
  values.emplace_back("co7", discounted_return(co7, c.env, o.horizon, o.rollouts, c.seed));
  values.emplace_back("co3", discounted_return(co3, c.env, o.horizon, o.rollouts, c.seed));
  values.emplace_back("random", discounted_return(random, c.env, o.horizon, o.rollouts, c.seed));
  values.emplace_back("kt", discounted_return(kt, c.env, o.horizon, o.rollouts, c.seed));
  if (!o.checkpoint.empty()) {
    auto [params, meta] = load_checkpoint(o.checkpoint);
    GreedyPolicy greedy(std::move(params), shape_for(c.env, meta.agent));
    values.emplace_back("rl", discounted_return(greedy, c.env, o.horizon, o.rollouts, c.seed));
  }

  bool bounded = true;
  std::ostringstream report;
  report << std::setprecision(6) << "policy,discounted_return,oracle,within_bound\n";
  for (const auto& [name, v] : values) {
    const bool ok = v <= bound + tolerance;
    bounded = bounded && ok;
    report << name << ',' << v << ',' << bound << ',' << (ok ? 1 : 0) << '\n';
  }
  emit(o, [&](std::ostream& os) { os << report.str(); });
  if (!bounded) {
    std::cerr << "error: a policy exceeds the oracle value by more than " << tolerance << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Header compression control with deep Q-learning"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed (overrides experiment.seed)");
  app.add_option("--out", o.out, "output file (stdout when omitted)");
  app.add_option("--preset", o.preset, "figure preset")
      ->check(CLI::IsMember({"fig4", "fig5", "fig6", "fig7", "fig8", "fig13", "fig14", "fig15"}));
  app.add_flag("--paper-scale", o.paper_scale, "full training scale (M=3000, T=10000, width 2048)");
  app.add_option("--set", o.overrides, "override one config key (key=value, repeatable)");

  auto* train = app.add_subcommand("train", "train an agent and write its reward curve");
  train->add_option("--checkpoint", o.checkpoint, "save the trained network here");

  auto* eval = app.add_subcommand("eval", "run one greedy evaluation episode and write its trace");
  eval->add_option("--policy", o.policy, "rl, kt, ir, co7, co3 or random");
  eval->add_option("--checkpoint", o.checkpoint, "network for policy rl");

  auto* sweep = app.add_subcommand("sweep", "train and compare RL with KT over the sweep axis");
  sweep->add_option("--jobs", o.jobs, "sweep points run in parallel");

  auto* adapt = app.add_subcommand("adapt", "train while the channel changes on a schedule");
  adapt->add_option("--schedule", o.schedule, "episode:eps_B pairs, e.g. 0:0.1,50:0.3");

  auto* fsm = app.add_subcommand("fsm-check", "check decompressor transitions against the table");

  auto* oracle = app.add_subcommand("oracle-check", "bound policies by the exact finite-horizon optimum");
  oracle->add_option("--horizon", o.horizon, "oracle horizon H");
  oracle->add_option("--rollouts", o.rollouts, "Monte Carlo rollouts per policy");
  oracle->add_option("--checkpoint", o.checkpoint, "also evaluate this trained network");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*sweep) return cmd_sweep(o);
    if (*adapt) return cmd_adapt(o);
    if (*fsm) return cmd_fsm_check(o);
    if (*oracle) return cmd_oracle_check(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
