#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crrlab/common.hpp"
#include "crrlab/crr.hpp"
#include "crrlab/data.hpp"
#include "crrlab/distributional.hpp"
#include "crrlab/envs.hpp"
#include "crrlab/nn.hpp"
#include "crrlab/tabular.hpp"

/// Experiment configuration and the command engines behind the crrlab tool:
/// dataset generation, training, evaluation, tabular verification and the
/// bandit analysis report. Everything an experiment emits is a deterministic
/// function of (config, seed); progress chatter goes to stderr only.
namespace crrlab::cli {

// ---------------------------------------------------------------------------
// Flat key=value configuration
// ---------------------------------------------------------------------------

using KvMap = std::map<std::string, std::string>;

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  return x;
}

inline long to_long(const std::string& key, const std::string& v) {
  char* end = nullptr;
  long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  return x;
}

}  // namespace detail

/// Everything one command needs, parsed from `key=value` lines plus
/// overrides. Unknown keys are rejected so typos surface immediately.
struct ExperimentConfig {
  // environment
  std::string env = "pointmass";
  int grid_width = 5;
  int grid_height = 5;
  int grid_step_limit = 50;
  int pm_horizon = 100;

  // behavior / generation
  std::string behavior;  // defaulted per environment when empty
  double eps = 0.3;
  double expert_frac = 0.5;
  int episodes = 200;
  std::string format = "data";  // generate output: data | tabular

  // paths
  std::string data;  // dataset file
  std::string out;   // output directory
  std::string checkpoint;

  // learner
  long steps = 20000;
  int batch = 16;
  double lr = 1e-4;
  int target_period = 100;
  double discount = 0.99;
  std::string filter = "exp";
  double beta = 1.0;
  double clip = 20.0;
  std::string advantage;  // defaulted from the filter when empty
  int m = 4;
  int k = 5;
  int cwp_n = 16;
  double cwp_beta = 1.0;
  int hidden = 64;
  int blocks = 4;
  int components = 5;
  int atoms = 21;
  double vmin = 0.0;
  double vmax = 100.0;
  std::uint64_t seed = 1;

  // evaluation
  int eval_episodes = 100;
  long eval_period = 2000;
  std::string eval_mode = "deterministic";

  // tabular verification
  int instances = 100;
  int iterations = 10;
  double epsilon = 0.5;

  void set(const std::string& key, const std::string& value) {
    using detail::to_double;
    using detail::to_long;
    if (key == "env") env = value;
    else if (key == "grid_width") grid_width = (int)to_long(key, value);
    else if (key == "grid_height") grid_height = (int)to_long(key, value);
    else if (key == "grid_step_limit") grid_step_limit = (int)to_long(key, value);
    else if (key == "pm_horizon") pm_horizon = (int)to_long(key, value);
    else if (key == "behavior") behavior = value;
    else if (key == "eps") eps = to_double(key, value);
    else if (key == "expert_frac") expert_frac = to_double(key, value);
    else if (key == "episodes") episodes = (int)to_long(key, value);
    else if (key == "format") format = value;
    else if (key == "data") data = value;
    else if (key == "out") out = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "steps") steps = to_long(key, value);
    else if (key == "batch") batch = (int)to_long(key, value);
    else if (key == "lr") lr = to_double(key, value);
    else if (key == "target_period") target_period = (int)to_long(key, value);
    else if (key == "discount") discount = to_double(key, value);
    else if (key == "filter") filter = value;
    else if (key == "beta") beta = to_double(key, value);
    else if (key == "clip") clip = to_double(key, value);
    else if (key == "advantage") advantage = value;
    else if (key == "m") m = (int)to_long(key, value);
    else if (key == "k") k = (int)to_long(key, value);
    else if (key == "cwp_n") cwp_n = (int)to_long(key, value);
    else if (key == "cwp_beta") cwp_beta = to_double(key, value);
    else if (key == "hidden") hidden = (int)to_long(key, value);
    else if (key == "blocks") blocks = (int)to_long(key, value);
    else if (key == "components") components = (int)to_long(key, value);
    else if (key == "atoms") atoms = (int)to_long(key, value);
    else if (key == "vmin") vmin = to_double(key, value);
    else if (key == "vmax") vmax = to_double(key, value);
    else if (key == "seed") seed = (std::uint64_t)to_long(key, value);
    else if (key == "eval_episodes") eval_episodes = (int)to_long(key, value);
    else if (key == "eval_period") eval_period = to_long(key, value);
    else if (key == "eval_mode") eval_mode = value;
    else if (key == "instances") instances = (int)to_long(key, value);
    else if (key == "iterations") iterations = (int)to_long(key, value);
    else if (key == "epsilon") epsilon = to_double(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }

  void apply(const KvMap& kv) {
    for (const auto& [k2, v] : kv) set(k2, v);
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "cannot open config file " + path);
    ExperimentConfig cfg;
    std::string line;
    long line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      auto pos = line.find('=');
      if (pos == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          " is not key=value: '" + line + "'");
      cfg.set(line.substr(0, pos), line.substr(pos + 1));
    }
    return cfg;
  }

  envs::EnvOptions env_options() const {
    return {grid_width, grid_height, grid_step_limit, pm_horizon};
  }

  std::unique_ptr<envs::Env> make_env() const {
    return envs::make_env(env, env_options());
  }

  envs::BehaviorSpec behavior_spec() const {
    envs::BehaviorSpec spec;
    spec.name = !behavior.empty()            ? behavior
                : env == "gridworld"         ? "eps_optimal"
                                             : "mixture";
    spec.eps = eps;
    spec.expert_frac = expert_frac;
    return spec;
  }

  crr::FilterSpec filter_spec() const {
    crr::FilterSpec f;
    if (filter == "bc") f.variant = crr::FilterVariant::BC;
    else if (filter == "binary") f.variant = crr::FilterVariant::Binary;
    else if (filter == "binary_max") f.variant = crr::FilterVariant::BinaryMax;
    else if (filter == "exp") f.variant = crr::FilterVariant::Exp;
    else throw ConfigError("unknown filter '" + filter + "'");
    f.beta = beta;
    f.clip = clip;
    return f;
  }

  crr::AdvantageSpec advantage_spec() const {
    crr::AdvantageSpec a;
    std::string name = advantage;
    if (name.empty()) name = filter == "binary_max" ? "max" : "mean";
    if (name == "mean") a.variant = crr::AdvantageVariant::Mean;
    else if (name == "max") a.variant = crr::AdvantageVariant::Max;
    else if (name == "kstep") a.variant = crr::AdvantageVariant::KStep;
    else if (name == "mc") a.variant = crr::AdvantageVariant::MonteCarlo;
    else throw ConfigError("unknown advantage estimator '" + name + "'");
    a.m = m;
    a.k = k;
    return a;
  }

  crr::LearnerConfig learner_config() const {
    crr::LearnerConfig lc;
    lc.batch_size = batch;
    lc.target_update_period = target_period;
    lc.learning_rate = lr;
    lc.n_updates = steps;
    lc.discount = discount;
    lc.seed = seed;
    lc.filter = filter_spec();
    lc.advantage = advantage_spec();
    lc.cwp_samples = cwp_n;
    lc.cwp_beta = cwp_beta;
    lc.hidden_width = hidden;
    lc.n_blocks = blocks;
    lc.mog_components = components;
    lc.grid = {atoms, vmin, vmax};
    lc.validate();
    return lc;
  }

  crr::ActionMode action_mode() const {
    if (eval_mode == "deterministic") return crr::ActionMode::Deterministic;
    if (eval_mode == "stochastic") return crr::ActionMode::Stochastic;
    if (eval_mode == "cwp") return crr::ActionMode::Cwp;
    throw ConfigError("unknown eval_mode '" + eval_mode + "'");
  }
};

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

inline int cmd_generate(const ExperimentConfig& cfg) {
  require_config(!cfg.data.empty(), "generate needs data=<output path>");
  require_config(cfg.episodes > 0, "generate needs episodes > 0");
  auto env = cfg.make_env();
  auto gen =
      envs::generate_dataset(*env, cfg.behavior_spec(), cfg.episodes, cfg.seed);
  if (cfg.format == "tabular") {
    require_config(env->discrete(),
                   "tabular output needs a discrete environment");
    tabular::save_tabular_dataset(cfg.data,
                                  envs::tabular_records(*env, gen.dataset));
  } else if (cfg.format == "data") {
    data::write_dataset(cfg.data, gen.dataset);
  } else {
    throw ConfigError("unknown format '" + cfg.format + "'");
  }
  std::cout << "episodes=" << cfg.episodes
            << " transitions=" << gen.dataset.size()
            << " mean_return=" << format_g17(gen.stats.mean())
            << " mean_discounted_return="
            << format_g17(data::mean_discounted_return(gen.dataset,
                                                       cfg.discount))
            << " out=" << cfg.data << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOutputs {
  std::string metrics_path;
  std::string eval_path;
  std::string checkpoint_path;
  std::optional<envs::RolloutStats> final_eval;  // configured eval mode
};

inline nn::Checkpoint make_checkpoint(const ExperimentConfig& cfg,
                                      const crr::ActorNet& actor,
                                      const crr::CriticNet& critic,
                                      const crr::LearnerState& st) {
  nn::Checkpoint ckpt;
  ckpt.meta = {
      {"env", cfg.env},
      {"obs_dim", std::to_string(actor.trunk.spec().input_dim)},
      {"act_dim", std::to_string(actor.action_dim)},
      {"hidden", std::to_string(actor.trunk.spec().hidden_width)},
      {"blocks", std::to_string(actor.trunk.spec().n_blocks)},
      {"components", std::to_string(actor.n_components)},
      {"atoms", std::to_string(critic.grid.n_atoms)},
      {"vmin", format_g17(critic.grid.v_min)},
      {"vmax", format_g17(critic.grid.v_max)},
  };
  ckpt.layout.append("actor.", actor.trunk.layout());
  ckpt.layout.append("critic.", critic.trunk.layout());
  ckpt.params = st.actor_params;
  ckpt.params.insert(ckpt.params.end(), st.critic_params.begin(),
                     st.critic_params.end());
  return ckpt;
}

struct LoadedNets {
  crr::ActorNet actor;
  crr::CriticNet critic;
  Vec actor_params;
  Vec critic_params;
  std::string env_name;
};

inline LoadedNets load_nets(const std::string& checkpoint_path) {
  nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_path);
  auto meta_int = [&](const std::string& key) {
    return (int)detail::to_long(key, nn::checkpoint_meta(ckpt, key));
  };
  int obs_dim = meta_int("obs_dim");
  int act_dim = meta_int("act_dim");
  int hidden = meta_int("hidden");
  int blocks = meta_int("blocks");
  int components = meta_int("components");
  distributional::AtomGrid grid{
      meta_int("atoms"),
      detail::to_double("vmin", nn::checkpoint_meta(ckpt, "vmin")),
      detail::to_double("vmax", nn::checkpoint_meta(ckpt, "vmax"))};
  crr::ActorNet actor(obs_dim, act_dim, hidden, blocks, components);
  crr::CriticNet critic(obs_dim, act_dim, hidden, blocks, grid);
  size_t na = actor.trunk.param_count();
  size_t nc = critic.trunk.param_count();
  require(ckpt.params.size() == na + nc, "checkpoint parameter count mismatch");
  LoadedNets nets{std::move(actor), std::move(critic),
                  Vec(ckpt.params.begin(), ckpt.params.begin() + na),
                  Vec(ckpt.params.begin() + na, ckpt.params.end()),
                  nn::checkpoint_meta(ckpt, "env")};
  return nets;
}

inline TrainOutputs cmd_train(const ExperimentConfig& cfg) {
  require_config(!cfg.data.empty(), "train needs data=<dataset path>");
  require_config(!cfg.out.empty(), "train needs out=<output directory>");
  auto env = cfg.make_env();
  data::Dataset raw = data::read_dataset(cfg.data);
  require(raw.obs_dim() == env->obs_dim() && raw.act_dim() == env->act_dim(),
          "dataset dimensions do not match environment '" + cfg.env + "'");
  data::Dataset ds = data::encode_observations(
      raw, env->encoded_obs_dim(),
      [&](std::span<const double> in, std::span<double> o) {
        env->encode_obs(in, o);
      });

  crr::LearnerConfig lc = cfg.learner_config();
  if (lc.advantage.variant == crr::AdvantageVariant::KStep)
    require_config(static_cast<size_t>(lc.advantage.k) <= ds.max_episode_len(),
                   "k-step horizon exceeds every episode in the dataset");

  crr::ActorNet actor(env->encoded_obs_dim(), raw.act_dim(), lc.hidden_width,
                      lc.n_blocks, lc.mog_components);
  crr::CriticNet critic(env->encoded_obs_dim(), raw.act_dim(), lc.hidden_width,
                        lc.n_blocks, lc.grid);
  crr::LearnerState st = crr::init_learner(actor, critic, lc);
  Rng data_rng = make_stream(lc.seed, "data");
  Rng adv_rng = make_stream(lc.seed, "advantage");

  std::filesystem::create_directories(cfg.out);
  TrainOutputs outputs;
  outputs.metrics_path = cfg.out + "/metrics.csv";
  outputs.eval_path = cfg.out + "/eval.csv";
  outputs.checkpoint_path = cfg.out + "/checkpoint.crr";

  std::ofstream metrics(outputs.metrics_path);
  require(metrics.good(), "cannot open " + outputs.metrics_path);
  metrics << "step,actor_loss,critic_loss,mean_weight,accept_frac,"
             "eval_return_mean,eval_return_std\n";
  std::ofstream evals(outputs.eval_path);
  require(evals.good(), "cannot open " + outputs.eval_path);
  evals << "step,mode,return_mean,return_std\n";

  const crr::ActionMode report_mode = cfg.action_mode();
  for (long step = 1; step <= lc.n_updates; ++step) {
    crr::StepMetrics sm =
        crr::learner_step(st, actor, critic, ds, lc, data_rng, adv_rng);
    bool eval_now = (cfg.eval_period > 0 && sm.step % cfg.eval_period == 0) ||
                    sm.step == lc.n_updates;
    std::string eval_mean, eval_std;
    if (eval_now) {
      for (crr::ActionMode mode :
           {crr::ActionMode::Stochastic, crr::ActionMode::Deterministic,
            crr::ActionMode::Cwp}) {
        envs::RolloutStats stats = crr::evaluate(
            actor, st.actor_params, &critic, st.critic_params, *env,
            cfg.eval_episodes, mode, lc.cwp_samples, lc.cwp_beta, lc.seed,
            std::string("eval/") + crr::to_string(mode));
        evals << sm.step << ',' << crr::to_string(mode) << ','
              << format_g17(stats.mean()) << ',' << format_g17(stats.stddev())
              << '\n';
        if (mode == report_mode) {
          eval_mean = format_g17(stats.mean());
          eval_std = format_g17(stats.stddev());
          if (sm.step == lc.n_updates) outputs.final_eval = stats;
        }
      }
    }
    metrics << sm.step << ',' << format_g17(sm.actor_loss) << ','
            << format_g17(sm.critic_loss) << ',' << format_g17(sm.mean_weight)
            << ',' << format_g17(sm.accept_frac) << ',' << eval_mean << ','
            << eval_std << '\n';
    if (sm.step % 1000 == 0)
      std::cerr << "step " << sm.step << "/" << lc.n_updates
                << " actor_loss=" << sm.actor_loss
                << " critic_loss=" << sm.critic_loss << "\n";
  }

  nn::save_checkpoint(outputs.checkpoint_path,
                      make_checkpoint(cfg, actor, critic, st));
  std::cout << "trained steps=" << lc.n_updates << " checkpoint="
            << outputs.checkpoint_path;
  if (outputs.final_eval)
    std::cout << " final_" << cfg.eval_mode << "_return="
              << format_g17(outputs.final_eval->mean());
  std::cout << "\n";
  return outputs;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalRow {
  std::string mode;
  double mean = 0.0;
  double stddev = 0.0;
};

inline std::vector<EvalRow> run_eval(const ExperimentConfig& cfg,
                                     const std::string& checkpoint_path) {
  LoadedNets nets = load_nets(checkpoint_path);
  auto env = cfg.make_env();
  require(env->encoded_obs_dim() == nets.actor.trunk.spec().input_dim &&
              env->act_dim() == nets.actor.action_dim,
          "checkpoint dimensions do not match environment '" + cfg.env + "'");
  std::vector<EvalRow> rows;
  for (crr::ActionMode mode :
       {crr::ActionMode::Stochastic, crr::ActionMode::Deterministic,
        crr::ActionMode::Cwp}) {
    envs::RolloutStats stats = crr::evaluate(
        nets.actor, nets.actor_params, &nets.critic, nets.critic_params, *env,
        cfg.eval_episodes, mode, cfg.cwp_n, cfg.cwp_beta, cfg.seed,
        std::string("eval/") + crr::to_string(mode));
    rows.push_back({crr::to_string(mode), stats.mean(), stats.stddev()});
  }
  return rows;
}

inline int cmd_eval(const ExperimentConfig& cfg) {
  require_config(!cfg.checkpoint.empty(), "eval needs checkpoint=<path>");
  for (const EvalRow& r : run_eval(cfg, cfg.checkpoint))
    std::cout << "mode=" << r.mode << " episodes=" << cfg.eval_episodes
              << " return_mean=" << format_g17(r.mean)
              << " return_std=" << format_g17(r.stddev) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify-tabular
// ---------------------------------------------------------------------------

struct VerifyResult {
  std::vector<tabular::PropositionRow> rows;
  bool all_pass = true;
};

inline VerifyResult run_verify_tabular(
    const ExperimentConfig& cfg,
    const std::function<void(tabular::TabularPolicy&)>& corrupt_hook =
        nullptr) {
  VerifyResult res;
  res.rows = tabular::proposition_sweep(cfg.seed, cfg.instances,
                                        cfg.iterations, cfg.epsilon, 1e-9,
                                        corrupt_hook);
  tabular::GapTrendResult trend = tabular::gap_trend_experiment(cfg.seed);
  std::string detail = "gaps=";
  for (size_t i = 0; i < trend.median_gaps.size(); ++i)
    detail += (i ? "|" : "") + format_g17(trend.median_gaps[i]);
  res.rows.push_back({cfg.seed, "prop4/gap_trend",
                      trend.inversions <= 1 && trend.shrink_ratio <= 0.1,
                      detail});
  for (const auto& r : res.rows) res.all_pass &= r.pass;
  return res;
}

inline int cmd_verify_tabular(const ExperimentConfig& cfg) {
  VerifyResult res = run_verify_tabular(cfg);
  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    std::ofstream os(cfg.out + "/propositions.csv");
    require(os.good(), "cannot open " + cfg.out + "/propositions.csv");
    tabular::write_proposition_report(os, res.rows);
  }
  tabular::write_proposition_report(std::cout, res.rows);
  return res.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bandit-report
// ---------------------------------------------------------------------------

/// Closed-form analysis of the two-armed bandit under the dataset mixture
/// (2/3, 1/3). Weighted maximum likelihood over a categorical policy puts
/// mass on each arm proportional to the arm's total filter weight in the
/// data distribution.
struct BanditBetaRow {
  double beta = 0.0;
  double exp_pi2 = 0.0;  // exp-filtered MLE, P(arm 2)
  double awr_pi1 = 0.0;  // return-weighted MLE, P(arm 1)
  double awr_pi2 = 0.0;
  double cwp_freq2 = 0.0;  // exact CWP selection probability of arm 2
};

struct BanditAnalysis {
  double mu1 = 2.0 / 3.0, mu2 = 1.0 / 3.0;
  double q1 = 0.5, q2 = 0.9;
  double v = 0.0;
  double binary_pi2 = 0.0;  // tabular CRR binary, P(arm 2)
  double bc_pi1 = 0.0, bc_pi2 = 0.0;
  std::vector<BanditBetaRow> rows;
};

inline BanditAnalysis analyze_bandit(const std::vector<double>& betas,
                                     int cwp_n, double clip = 20.0) {
  BanditAnalysis out;
  out.v = out.mu1 * out.q1 + out.mu2 * out.q2;
  out.bc_pi1 = out.mu1;
  out.bc_pi2 = out.mu2;

  // Idealized dataset with the exact count ratio and expected rewards.
  std::vector<tabular::TabularTransition> records = {
      {0, 0, 0, 0, out.q1, 1, true},
      {1, 0, 0, 0, out.q1, 1, true},
      {2, 0, 0, 1, out.q2, 1, true},
  };
  auto emp = tabular::build_empirical_mdp(records, 2, 2, 0.99);
  auto iterates = tabular::tabular_crr(emp, tabular::CrrVariant::binary(), 2);
  out.binary_pi2 = iterates.back().policy.at(0, 1);

  for (double beta : betas) {
    BanditBetaRow row;
    row.beta = beta;

    // Exp filter: weights from the exact advantages, clipped like the
    // learner's filter.
    double w1 = std::min(std::exp((out.q1 - out.v) / beta), clip);
    double w2 = std::min(std::exp((out.q2 - out.v) / beta), clip);
    row.exp_pi2 = out.mu2 * w2 / (out.mu1 * w1 + out.mu2 * w2);

    // Return-weighted stand-in: weights exp((R - V)/beta) from observed
    // returns; arm 1 pays 0 or 1 with equal probability, arm 2 pays 0.9.
    double a1 = out.mu1 * 0.5 *
                (std::exp((0.0 - out.v) / beta) + std::exp((1.0 - out.v) / beta));
    double a2 = out.mu2 * std::exp((out.q2 - out.v) / beta);
    row.awr_pi1 = a1 / (a1 + a2);
    row.awr_pi2 = a2 / (a1 + a2);

    // CWP over the behavior mixture with the exact critic: the number of
    // arm-2 draws among n is binomial, and given that count the resampling
    // probability is its normalized weight share, so the selection
    // probability enumerates exactly.
    double cw1 = std::exp(out.q1 / beta), cw2 = std::exp(out.q2 / beta);
    double freq2 = 0.0;
    double binom = std::pow(out.mu1, cwp_n);  // P(j = 0)
    for (int j = 1; j <= cwp_n; ++j) {
      binom *= out.mu2 / out.mu1 * (cwp_n - j + 1) / j;
      freq2 += binom * (j * cw2) / (j * cw2 + (cwp_n - j) * cw1);
    }
    row.cwp_freq2 = freq2;
    out.rows.push_back(row);
  }
  return out;
}

inline int cmd_bandit_report(const ExperimentConfig& cfg) {
  BanditAnalysis a = analyze_bandit({0.1, 1.0, 10.0}, cfg.cwp_n, cfg.clip);
  auto yn = [](bool b) { return b ? "yes" : "no"; };
  std::cout << "two-armed bandit: mu_B=(" << format_g17(a.mu1) << ","
            << format_g17(a.mu2) << ") Q=(" << format_g17(a.q1) << ","
            << format_g17(a.q2) << ") V=" << format_g17(a.v) << "\n";
  std::cout << "method,beta,pi(arm1),pi(arm2),prefers_arm2\n";
  std::cout << "bc,-," << format_g17(a.bc_pi1) << ',' << format_g17(a.bc_pi2)
            << ',' << yn(a.bc_pi2 > a.bc_pi1) << "\n";
  std::cout << "crr_binary,-," << format_g17(1.0 - a.binary_pi2) << ','
            << format_g17(a.binary_pi2) << ',' << yn(a.binary_pi2 > 0.5)
            << "\n";
  for (const auto& r : a.rows) {
    std::cout << "crr_exp_mle," << format_g17(r.beta) << ','
              << format_g17(1.0 - r.exp_pi2) << ',' << format_g17(r.exp_pi2)
              << ',' << yn(r.exp_pi2 > 1.0 / 3.0) << "\n";
    std::cout << "return_weighted_mle," << format_g17(r.beta) << ','
              << format_g17(r.awr_pi1) << ',' << format_g17(r.awr_pi2) << ','
              << yn(r.awr_pi2 > r.awr_pi1) << "\n";
    std::cout << "cwp," << format_g17(r.beta) << ','
              << format_g17(1.0 - r.cwp_freq2) << ',' << format_g17(r.cwp_freq2)
              << ',' << yn(r.cwp_freq2 > 1.0 / 3.0) << "\n";
  }
  return 0;
}

}  // namespace crrlab::cli
