#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crrlab/cli.hpp"

namespace cli = crrlab::cli;
namespace crr = crrlab::crr;
namespace fs = std::filesystem;
using crrlab::Vec;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("crrlab_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

// --- configuration ---------------------------------------------------------------

TEST(Config, ParsesFileAndOverrides) {
  TempDir tmp;
  {
    std::ofstream os(tmp.file("exp.cfg"));
    os << "# point-mass run\n"
       << "env=pointmass\n"
       << "steps=500\n"
       << "filter=binary\n"
       << "seed=9\n";
  }
  auto cfg = cli::ExperimentConfig::from_file(tmp.file("exp.cfg"));
  EXPECT_EQ(cfg.env, "pointmass");
  EXPECT_EQ(cfg.steps, 500);
  EXPECT_EQ(cfg.filter, "binary");
  EXPECT_EQ(cfg.seed, 9u);
  cfg.set("steps", "750");
  EXPECT_EQ(cfg.steps, 750);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  cli::ExperimentConfig cfg;
  EXPECT_THROW(cfg.set("batchsize", "8"), crrlab::ConfigError);
  EXPECT_THROW(cfg.set("steps", "many"), crrlab::ConfigError);
}

TEST(Config, AdvantageDefaultsFollowFilter) {
  cli::ExperimentConfig cfg;
  cfg.set("filter", "binary_max");
  EXPECT_EQ(cfg.advantage_spec().variant, crr::AdvantageVariant::Max);
  cfg.set("filter", "binary");
  EXPECT_EQ(cfg.advantage_spec().variant, crr::AdvantageVariant::Mean);
  cfg.set("advantage", "kstep");
  EXPECT_EQ(cfg.advantage_spec().variant, crr::AdvantageVariant::KStep);
}

TEST(Config, LearnerConfigValidation) {
  cli::ExperimentConfig cfg;
  cfg.set("discount", "1.5");
  EXPECT_THROW(cfg.learner_config(), crrlab::ConfigError);
}

// --- bandit analysis ---------------------------------------------------------------

TEST(BanditAnalysis, MatchesClosedForms) {
  auto a = cli::analyze_bandit({0.1, 1.0, 10.0}, 16);
  const double v = 2.0 / 3.0 * 0.5 + 1.0 / 3.0 * 0.9;
  EXPECT_DOUBLE_EQ(a.v, v);
  EXPECT_EQ(a.binary_pi2, 1.0);
  EXPECT_DOUBLE_EQ(a.bc_pi1, 2.0 / 3.0);

  for (const auto& row : a.rows) {
    // Exp-filtered MLE: mass ratio mu_a * min(exp((q_a - v)/beta), clip).
    double w1 = std::min(std::exp((0.5 - v) / row.beta), 20.0);
    double w2 = std::min(std::exp((0.9 - v) / row.beta), 20.0);
    double want = (1.0 / 3.0 * w2) / (2.0 / 3.0 * w1 + 1.0 / 3.0 * w2);
    EXPECT_NEAR(row.exp_pi2, want, 1e-12);
    EXPECT_GT(row.exp_pi2, 1.0 / 3.0);

    // Return-weighted MLE favors the stochastic arm at every temperature.
    double a1 = 2.0 / 3.0 * 0.5 *
                (std::exp((0.0 - v) / row.beta) + std::exp((1.0 - v) / row.beta));
    double a2 = 1.0 / 3.0 * std::exp((0.9 - v) / row.beta);
    EXPECT_NEAR(row.awr_pi1, a1 / (a1 + a2), 1e-12);
    EXPECT_GT(row.awr_pi1, row.awr_pi2);

    // CWP improves on the behavior share of arm 2.
    EXPECT_GT(row.cwp_freq2, 1.0 / 3.0);
  }
}

// --- generate ----------------------------------------------------------------------

TEST(CmdGenerate, DeterministicAcrossRuns) {
  TempDir tmp;
  cli::ExperimentConfig cfg;
  cfg.env = "bandit";
  cfg.episodes = 200;
  cfg.seed = 7;
  cfg.data = tmp.file("a.csv");
  EXPECT_EQ(cli::cmd_generate(cfg), 0);
  cfg.data = tmp.file("b.csv");
  EXPECT_EQ(cli::cmd_generate(cfg), 0);
  EXPECT_EQ(slurp(tmp.file("a.csv")), slurp(tmp.file("b.csv")));
  EXPECT_NE(slurp(tmp.file("a.csv")).find("version=1"), std::string::npos);
}

TEST(CmdGenerate, TabularFormatForDiscreteEnvs) {
  TempDir tmp;
  cli::ExperimentConfig cfg;
  cfg.env = "gridworld";
  cfg.behavior = "eps_optimal";
  cfg.eps = 0.2;
  cfg.episodes = 10;
  cfg.seed = 3;
  cfg.format = "tabular";
  cfg.data = tmp.file("grid.csv");
  EXPECT_EQ(cli::cmd_generate(cfg), 0);
  auto records = crrlab::tabular::load_tabular_dataset(tmp.file("grid.csv"));
  EXPECT_GT(records.size(), 0u);

  cfg.env = "pointmass";
  EXPECT_THROW(cli::cmd_generate(cfg), crrlab::ConfigError);
}

// --- train / eval --------------------------------------------------------------------

TEST(CmdTrain, ZeroStepsWritesHeaderOnlyMetricsAndInitialCheckpoint) {
  TempDir tmp;
  cli::ExperimentConfig cfg;
  cfg.env = "pointmass";
  cfg.episodes = 5;
  cfg.seed = 11;
  cfg.data = tmp.file("data.csv");
  cli::cmd_generate(cfg);

  cfg.steps = 0;
  cfg.hidden = 16;
  cfg.blocks = 1;
  cfg.components = 2;
  cfg.out = tmp.file("run");
  auto outputs = cli::cmd_train(cfg);
  EXPECT_EQ(slurp(outputs.metrics_path),
            "step,actor_loss,critic_loss,mean_weight,accept_frac,"
            "eval_return_mean,eval_return_std\n");

  // The checkpoint must hold the untouched initialization.
  auto nets = cli::load_nets(outputs.checkpoint_path);
  crr::LearnerConfig lc = cfg.learner_config();
  crr::ActorNet actor(2, 1, lc.hidden_width, lc.n_blocks, lc.mog_components);
  crr::CriticNet critic(2, 1, lc.hidden_width, lc.n_blocks, lc.grid);
  auto st = crr::init_learner(actor, critic, lc);
  EXPECT_EQ(nets.actor_params, st.actor_params);
  EXPECT_EQ(nets.critic_params, st.critic_params);
}

TEST(CmdTrain, MetricsRowsAndEvalColumns) {
  TempDir tmp;
  cli::ExperimentConfig cfg;
  cfg.env = "pointmass";
  cfg.episodes = 5;
  cfg.seed = 12;
  cfg.data = tmp.file("data.csv");
  cli::cmd_generate(cfg);

  cfg.steps = 6;
  cfg.batch = 8;
  cfg.hidden = 8;
  cfg.blocks = 1;
  cfg.components = 2;
  cfg.eval_period = 3;
  cfg.eval_episodes = 2;
  cfg.out = tmp.file("run");
  auto outputs = cli::cmd_train(cfg);

  std::istringstream metrics(slurp(outputs.metrics_path));
  std::string line;
  std::getline(metrics, line);  // header
  int rows = 0, eval_rows = 0;
  while (std::getline(metrics, line)) {
    ++rows;
    if (line.back() != ',') ++eval_rows;
  }
  EXPECT_EQ(rows, 6);
  EXPECT_EQ(eval_rows, 2);  // steps 3 and 6

  std::istringstream evals(slurp(outputs.eval_path));
  std::getline(evals, line);
  int n_eval_lines = 0;
  while (std::getline(evals, line)) ++n_eval_lines;
  EXPECT_EQ(n_eval_lines, 2 * 3);  // two eval points, three modes
}

TEST(CmdEval, ChecksEnvironmentDimensions) {
  TempDir tmp;
  cli::ExperimentConfig cfg;
  cfg.env = "pointmass";
  cfg.episodes = 5;
  cfg.seed = 13;
  cfg.data = tmp.file("data.csv");
  cli::cmd_generate(cfg);
  cfg.steps = 2;
  cfg.batch = 4;
  cfg.hidden = 8;
  cfg.blocks = 1;
  cfg.components = 2;
  cfg.eval_period = 0;
  cfg.out = tmp.file("run");
  auto outputs = cli::cmd_train(cfg);

  cfg.checkpoint = outputs.checkpoint_path;
  cfg.eval_episodes = 3;
  auto rows = cli::run_eval(cfg, outputs.checkpoint_path);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_TRUE(std::isfinite(r.mean));

  cfg.env = "gridworld";  // 25-dim one-hot vs 2-dim checkpoint
  EXPECT_THROW(cli::run_eval(cfg, outputs.checkpoint_path),
               crrlab::ValidationError);
}

TEST(CmdTrain, ExpertBcOnGridworldReachesGoal) {
  TempDir tmp;
  cli::ExperimentConfig cfg;
  cfg.env = "gridworld";
  cfg.behavior = "eps_optimal";
  cfg.eps = 0.0;
  cfg.episodes = 50;
  cfg.seed = 14;
  cfg.data = tmp.file("grid.csv");
  cli::cmd_generate(cfg);

  cfg.filter = "bc";
  cfg.steps = 1200;
  cfg.batch = 64;
  cfg.lr = 1e-3;
  cfg.hidden = 32;
  cfg.blocks = 2;
  cfg.components = 3;
  cfg.eval_period = 0;  // final evaluation only
  cfg.eval_episodes = 5;
  cfg.out = tmp.file("run");
  auto outputs = cli::cmd_train(cfg);
  ASSERT_TRUE(outputs.final_eval.has_value());
  EXPECT_EQ(outputs.final_eval->mean(), 1.0);
}

// --- verify-tabular -------------------------------------------------------------------

TEST(VerifyTabular, AllRowsPassOnDefaults) {
  cli::ExperimentConfig cfg;
  cfg.instances = 5;
  cfg.iterations = 5;
  cfg.seed = 15;
  auto res = cli::run_verify_tabular(cfg);
  EXPECT_TRUE(res.all_pass);
  EXPECT_EQ(res.rows.size(), 5u * 2 * 3 + 1);  // + the gap-trend row
}

TEST(VerifyTabular, CorruptHookFlipsExitStatus) {
  cli::ExperimentConfig cfg;
  cfg.instances = 2;
  cfg.iterations = 3;
  cfg.seed = 16;
  auto res = cli::run_verify_tabular(cfg, [](crrlab::tabular::TabularPolicy& p) {
    for (int s = 0; s < p.n_states; ++s)
      for (int a = 0; a < p.n_actions; ++a)
        p.at(s, a) = (p.at(s, a) + 0.02) / (1.0 + 0.02 * p.n_actions);
  });
  EXPECT_FALSE(res.all_pass);
}

// --- the installed binary --------------------------------------------------------------

TEST(CliBinary, GenerateIsByteDeterministic) {
  TempDir tmp;
  std::string base = std::string(CRRLAB_TOOL_PATH) +
                     " generate --env bandit --episodes 100 --seed 7 --out ";
  ASSERT_EQ(std::system((base + tmp.file("a.csv") + " > /dev/null").c_str()),
            0);
  ASSERT_EQ(std::system((base + tmp.file("b.csv") + " > /dev/null").c_str()),
            0);
  EXPECT_EQ(slurp(tmp.file("a.csv")), slurp(tmp.file("b.csv")));
}

TEST(CliBinary, BanditReportSucceeds) {
  std::string cmd = std::string(CRRLAB_TOOL_PATH) + " bandit-report > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
}

TEST(CliBinary, VerifyTabularExitsZero) {
  std::string cmd = std::string(CRRLAB_TOOL_PATH) +
                    " verify-tabular --instances 3 --seed 2 > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
}

TEST(CliBinary, UnknownEnvFails) {
  std::string cmd = std::string(CRRLAB_TOOL_PATH) +
                    " generate --env cartpole --out /tmp/x.csv 2> /dev/null";
  EXPECT_NE(std::system(cmd.c_str()), 0);
}
