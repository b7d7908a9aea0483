#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <list>
#include <string>
#include <vector>

#include "crrlab/cli.hpp"

namespace {

using crrlab::cli::ExperimentConfig;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Config file (key=value lines)");
  cmd->add_option("--set", args.sets, "Override one config key (key=value)")
      ->take_all();
}

ExperimentConfig build_config(const CommonArgs& args,
                              const crrlab::cli::KvMap& flag_overrides) {
  ExperimentConfig cfg = args.config_path.empty()
                             ? ExperimentConfig{}
                             : ExperimentConfig::from_file(args.config_path);
  cfg.apply(flag_overrides);
  for (const std::string& kv : args.sets) {
    auto pos = kv.find('=');
    if (pos == std::string::npos)
      throw crrlab::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, pos), kv.substr(pos + 1));
  }
  return cfg;
}

/// Convenience flags shared by several subcommands; stored as strings and
/// applied through the same path as --set so precedence is obvious
/// (config file, then flags, then --set).
class FlagSet {
 public:
  void add(CLI::App* cmd, const std::string& flag, const std::string& key,
           const std::string& help) {
    values_.push_back({key, ""});
    auto& slot = values_.back();
    cmd->add_option(flag, slot.second, help);
  }
  crrlab::cli::KvMap overrides() const {
    crrlab::cli::KvMap kv;
    for (const auto& [key, value] : values_)
      if (!value.empty()) kv[key] = value;
    return kv;
  }

 private:
  std::list<std::pair<std::string, std::string>> values_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "crrlab: offline RL laboratory (dataset generation, training, "
      "evaluation, tabular verification, bandit analysis)"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, verify_args, bandit_args;
  FlagSet gen_flags, train_flags, eval_flags, verify_flags;

  CLI::App* gen = app.add_subcommand("generate", "Generate a behavior dataset");
  add_common(gen, gen_args);
  gen_flags.add(gen, "--env", "env", "Environment: bandit|gridworld|pointmass");
  gen_flags.add(gen, "--episodes", "episodes", "Number of episodes");
  gen_flags.add(gen, "--seed", "seed", "Root seed");
  gen_flags.add(gen, "--eps", "eps", "Gridworld eps-greedy noise");
  gen_flags.add(gen, "--expert-frac", "expert_frac",
                "Pointmass expert episode fraction");
  gen_flags.add(gen, "--behavior", "behavior", "Behavior spec name");
  gen_flags.add(gen, "--out", "data", "Output dataset path");
  gen_flags.add(gen, "--format", "format", "Output format: data|tabular");

  CLI::App* train = app.add_subcommand("train", "Train a CRR/BC learner");
  add_common(train, train_args);
  train_flags.add(train, "--env", "env", "Environment name");
  train_flags.add(train, "--data", "data", "Input dataset path");
  train_flags.add(train, "--out", "out", "Output directory");
  train_flags.add(train, "--steps", "steps", "Learner updates");
  train_flags.add(train, "--filter", "filter",
                  "Filter: bc|binary|binary_max|exp");
  train_flags.add(train, "--advantage", "advantage",
                  "Advantage: mean|max|kstep|mc");
  train_flags.add(train, "--seed", "seed", "Root seed");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, eval_args);
  eval_flags.add(eval, "--env", "env", "Environment name");
  eval_flags.add(eval, "--checkpoint", "checkpoint", "Checkpoint path");
  eval_flags.add(eval, "--episodes", "eval_episodes", "Evaluation episodes");
  eval_flags.add(eval, "--seed", "seed", "Root seed");

  CLI::App* verify = app.add_subcommand(
      "verify-tabular", "Run the randomized tabular verification suite");
  add_common(verify, verify_args);
  verify_flags.add(verify, "--instances", "instances", "Random MDP instances");
  verify_flags.add(verify, "--iterations", "iterations",
                   "CRR iterations per instance");
  verify_flags.add(verify, "--seed", "seed", "Root seed");
  verify_flags.add(verify, "--out", "out", "Report output directory");

  CLI::App* bandit = app.add_subcommand(
      "bandit-report", "Closed-form analysis of the two-armed bandit");
  add_common(bandit, bandit_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return crrlab::cli::cmd_generate(
          build_config(gen_args, gen_flags.overrides()));
    if (train->parsed()) {
      crrlab::cli::cmd_train(build_config(train_args, train_flags.overrides()));
      return 0;
    }
    if (eval->parsed())
      return crrlab::cli::cmd_eval(
          build_config(eval_args, eval_flags.overrides()));
    if (verify->parsed())
      return crrlab::cli::cmd_verify_tabular(
          build_config(verify_args, verify_flags.overrides()));
    if (bandit->parsed())
      return crrlab::cli::cmd_bandit_report(build_config(bandit_args, {}));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
