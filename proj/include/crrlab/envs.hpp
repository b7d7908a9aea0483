#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crrlab/common.hpp"
#include "crrlab/data.hpp"
#include "crrlab/tabular.hpp"

/// Desk-scale environments and behavior-data generators: a two-armed bandit
/// with one stochastic and one deterministic arm, a deterministic grid world,
/// and a 1-D point-mass control task. All environments are episodic and every
/// episode ends with a terminal step, which is what the dataset format needs.
namespace crrlab::envs {

struct StepResult {
  Vec obs;
  double reward = 0.0;
  bool terminal = false;
};

/// Environments store raw observations (a state index for discrete tasks,
/// the physical state for continuous ones) and provide the encoding the
/// function-approximation learner consumes (one-hot for discrete tasks).
/// Actions arriving at step() are always the learner's continuous vectors;
/// discrete environments round them to the nearest valid action index.
class Env {
 public:
  virtual ~Env() = default;
  virtual std::string name() const = 0;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual bool discrete() const = 0;
  virtual int n_states() const { return 0; }   // discrete tasks only
  virtual int n_actions() const { return 0; }  // discrete tasks only
  virtual int encoded_obs_dim() const = 0;
  virtual void encode_obs(std::span<const double> raw,
                          std::span<double> out) const = 0;
  virtual Vec reset(Rng& rng) = 0;
  virtual StepResult step(std::span<const double> action, Rng& rng) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;
};

// ---------------------------------------------------------------------------
// Two-armed bandit: arm 0 pays 0 or 1 with equal probability, arm 1 pays a
// deterministic 0.9. One state, episode length 1.
// ---------------------------------------------------------------------------

class TwoArmedBandit final : public Env {
 public:
  std::string name() const override { return "bandit"; }
  int obs_dim() const override { return 1; }
  int act_dim() const override { return 1; }
  bool discrete() const override { return true; }
  int n_states() const override { return 1; }
  int n_actions() const override { return 2; }
  int encoded_obs_dim() const override { return 1; }
  void encode_obs(std::span<const double>, std::span<double> out) const override {
    out[0] = 1.0;
  }
  Vec reset(Rng&) override { return {0.0}; }
  StepResult step(std::span<const double> action, Rng& rng) override {
    int arm = action[0] < 0.5 ? 0 : 1;
    double reward;
    if (arm == 0) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      reward = unit(rng) < 0.5 ? 1.0 : 0.0;
    } else {
      reward = 0.9;
    }
    return {{0.0}, reward, true};
  }
  std::unique_ptr<Env> clone() const override {
    return std::make_unique<TwoArmedBandit>(*this);
  }

  /// The idealized bandit as a finite MDP: one decision state whose rewards
  /// are the arms' expected payoffs, plus the terminal state.
  static tabular::TabularMdp true_mdp(double discount) {
    auto m = tabular::TabularMdp::zeros(2, 2, discount);
    m.terminal[1] = 1;
    m.p(0, 0, 1) = 1.0;
    m.p(0, 1, 1) = 1.0;
    m.p(1, 0, 1) = 1.0;
    m.p(1, 1, 1) = 1.0;
    m.r(0, 0) = 0.5;
    m.r(0, 1) = 0.9;
    return m;
  }
};

// ---------------------------------------------------------------------------
// Grid world: deterministic moves on a width x height grid, walls clamp,
// reward 1 on reaching the goal (terminal). Hitting the step limit also ends
// the episode so that logged episodes always terminate.
// Actions: 0 = north (row-1), 1 = east (col+1), 2 = south (row+1), 3 = west.
// ---------------------------------------------------------------------------

class GridWorld final : public Env {
 public:
  GridWorld(int width = 5, int height = 5, int step_limit = 50)
      : width_(width), height_(height), step_limit_(step_limit) {
    require_config(width >= 2 && height >= 2, "grid must be at least 2x2");
    start_ = 0;
    goal_ = width_ * height_ - 1;
  }

  std::string name() const override { return "gridworld"; }
  int obs_dim() const override { return 1; }
  int act_dim() const override { return 1; }
  bool discrete() const override { return true; }
  int n_states() const override { return width_ * height_; }
  int n_actions() const override { return 4; }
  int encoded_obs_dim() const override { return width_ * height_; }
  void encode_obs(std::span<const double> raw,
                  std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    int cell = static_cast<int>(raw[0]);
    require(cell >= 0 && cell < n_states(), "grid cell out of range");
    out[cell] = 1.0;
  }

  Vec reset(Rng&) override {
    cell_ = start_;
    steps_ = 0;
    return {static_cast<double>(cell_)};
  }

  StepResult step(std::span<const double> action, Rng&) override {
    int a = std::clamp(static_cast<int>(std::lround(action[0])), 0, 3);
    int r = cell_ / width_, c = cell_ % width_;
    switch (a) {
      case 0: r = std::max(0, r - 1); break;
      case 1: c = std::min(width_ - 1, c + 1); break;
      case 2: r = std::min(height_ - 1, r + 1); break;
      case 3: c = std::max(0, c - 1); break;
    }
    cell_ = r * width_ + c;
    ++steps_;
    bool at_goal = cell_ == goal_;
    bool done = at_goal || steps_ >= step_limit_;
    return {{static_cast<double>(cell_)}, at_goal ? 1.0 : 0.0, done};
  }

  std::unique_ptr<Env> clone() const override {
    return std::make_unique<GridWorld>(*this);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int goal() const { return goal_; }

  /// Shortest-path action from a cell: move east until the goal column,
  /// then along the rows (and symmetric for cells past the goal).
  int optimal_action(int cell) const {
    int r = cell / width_, c = cell % width_;
    int gr = goal_ / width_, gc = goal_ % width_;
    if (c < gc) return 1;
    if (c > gc) return 3;
    if (r < gr) return 2;
    return 0;
  }

 private:
  int width_, height_, step_limit_;
  int start_ = 0, goal_ = 0;
  int cell_ = 0, steps_ = 0;
};

// ---------------------------------------------------------------------------
// 1-D point mass: state (x, v), action a in [-1, 1],
// x' = x + 0.05 v, v' = v + 0.05 a, reward exp(-x^2), fixed horizon.
// ---------------------------------------------------------------------------

class PointMass1D final : public Env {
 public:
  explicit PointMass1D(int horizon = 100) : horizon_(horizon) {}

  std::string name() const override { return "pointmass"; }
  int obs_dim() const override { return 2; }
  int act_dim() const override { return 1; }
  bool discrete() const override { return false; }
  int encoded_obs_dim() const override { return 2; }
  void encode_obs(std::span<const double> raw,
                  std::span<double> out) const override {
    out[0] = raw[0];
    out[1] = raw[1];
  }

  Vec reset(Rng& rng) override {
    std::uniform_real_distribution<double> start(-2.0, 2.0);
    x_ = start(rng);
    v_ = 0.0;
    steps_ = 0;
    return {x_, v_};
  }

  StepResult step(std::span<const double> action, Rng&) override {
    double a = std::clamp(action[0], -1.0, 1.0);
    x_ += 0.05 * v_;
    v_ += 0.05 * a;
    ++steps_;
    return {{x_, v_}, std::exp(-x_ * x_), steps_ >= horizon_};
  }

  std::unique_ptr<Env> clone() const override {
    return std::make_unique<PointMass1D>(*this);
  }

  /// The proportional controller used as the expert behavior.
  static double expert_action(double x, double v) {
    return std::clamp(-1.2 * x - 0.8 * v, -1.0, 1.0);
  }

 private:
  int horizon_;
  double x_ = 0.0, v_ = 0.0;
  int steps_ = 0;
};

struct EnvOptions {
  int grid_width = 5;
  int grid_height = 5;
  int grid_step_limit = 50;
  int pm_horizon = 100;
};

inline std::unique_ptr<Env> make_env(const std::string& name,
                                     const EnvOptions& opt = {}) {
  if (name == "bandit") return std::make_unique<TwoArmedBandit>();
  if (name == "gridworld")
    return std::make_unique<GridWorld>(opt.grid_width, opt.grid_height,
                                       opt.grid_step_limit);
  if (name == "pointmass") return std::make_unique<PointMass1D>(opt.pm_horizon);
  throw ConfigError("unknown environment '" + name + "'");
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

using ActionFn = std::function<Vec(std::span<const double> raw_obs, Rng&)>;

struct RolloutStats {
  Vec returns;
  double mean() const { return mean_of(returns); }
  double stddev() const { return stddev_of(returns); }
  double stderror() const {
    return returns.empty() ? 0.0
                           : stddev() / std::sqrt(double(returns.size()));
  }
};

/// Rolls whole episodes. Each episode draws from its own rng substream
/// (seed, stream, episode index), so any episode reproduces in isolation and
/// results do not depend on scheduling.
inline std::vector<data::EpisodeRecord> rollout_episodes(
    Env& env, const std::function<ActionFn(long)>& policy_for_episode,
    int n_episodes, std::uint64_t seed, std::string_view stream,
    RolloutStats* stats = nullptr) {
  std::vector<data::EpisodeRecord> episodes;
  episodes.reserve(n_episodes);
  for (long e = 0; e < n_episodes; ++e) {
    Rng rng = make_stream(seed, stream, static_cast<std::uint64_t>(e));
    ActionFn policy = policy_for_episode(e);
    data::EpisodeRecord ep;
    ep.episode_id = e;
    Vec obs = env.reset(rng);
    double ret = 0.0;
    while (true) {
      Vec action = policy(obs, rng);
      StepResult res = env.step(action, rng);
      ep.steps.push_back({obs, action, res.reward, res.terminal});
      ret += res.reward;
      obs = std::move(res.obs);
      if (res.terminal) break;
    }
    if (stats) stats->returns.push_back(ret);
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

inline std::vector<data::EpisodeRecord> rollout(
    Env& env, const ActionFn& policy, int n_episodes, std::uint64_t seed,
    std::string_view stream, RolloutStats* stats = nullptr) {
  return rollout_episodes(
      env, [&](long) { return policy; }, n_episodes, seed, stream, stats);
}

// ---------------------------------------------------------------------------
// Behavior policies and dataset generation
// ---------------------------------------------------------------------------

/// Named behavior specs:
///   bandit      "mixture":     fixed arm probabilities (2/3, 1/3)
///   gridworld   "eps_optimal": optimal action, uniform-random w.p. eps
///   gridworld   "mixed3":      eps cycles {0, 0.5, 1} across episodes
///   pointmass   "mixture":     expert episodes w.p. expert_frac, else
///                              uniform-random episodes
struct BehaviorSpec {
  std::string name = "mixture";
  double eps = 0.3;
  double expert_frac = 0.5;
};

inline std::function<ActionFn(long)> make_behavior(const Env& env,
                                                   const BehaviorSpec& spec,
                                                   std::uint64_t seed) {
  if (env.name() == "bandit") {
    require_config(spec.name == "mixture", "bandit behavior must be 'mixture'");
    return [](long) -> ActionFn {
      return [](std::span<const double>, Rng& rng) -> Vec {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        return {unit(rng) < 2.0 / 3.0 ? 0.0 : 1.0};
      };
    };
  }
  if (env.name() == "gridworld") {
    const auto* grid = &dynamic_cast<const GridWorld&>(env);
    auto eps_policy = [grid](double eps) -> ActionFn {
      return [grid, eps](std::span<const double> obs, Rng& rng) -> Vec {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        int a;
        if (unit(rng) < eps) {
          std::uniform_int_distribution<int> pick(0, 3);
          a = pick(rng);
        } else {
          a = grid->optimal_action(static_cast<int>(obs[0]));
        }
        return {static_cast<double>(a)};
      };
    };
    if (spec.name == "eps_optimal") {
      double eps = spec.eps;
      require_config(eps >= 0.0 && eps <= 1.0, "eps must lie in [0,1]");
      return [eps_policy, eps](long) { return eps_policy(eps); };
    }
    if (spec.name == "mixed3") {
      return [eps_policy](long episode) {
        const double levels[3] = {0.0, 0.5, 1.0};
        return eps_policy(levels[episode % 3]);
      };
    }
    throw ConfigError("unknown gridworld behavior '" + spec.name + "'");
  }
  if (env.name() == "pointmass") {
    require_config(spec.name == "mixture",
                   "pointmass behavior must be 'mixture'");
    double frac = spec.expert_frac;
    require_config(frac >= 0.0 && frac <= 1.0, "expert_frac must lie in [0,1]");
    return [frac, seed](long episode) -> ActionFn {
      Rng pick = make_stream(seed, "behavior-pick",
                             static_cast<std::uint64_t>(episode));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      bool expert = unit(pick) < frac;
      if (expert) {
        return [](std::span<const double> obs, Rng&) -> Vec {
          return {PointMass1D::expert_action(obs[0], obs[1])};
        };
      }
      return [](std::span<const double>, Rng& rng) -> Vec {
        std::uniform_real_distribution<double> act(-1.0, 1.0);
        return {act(rng)};
      };
    };
  }
  throw ConfigError("no behavior policies for environment '" + env.name() +
                    "'");
}

struct GeneratedDataset {
  data::Dataset dataset;
  RolloutStats stats;
};

inline GeneratedDataset generate_dataset(Env& env, const BehaviorSpec& spec,
                                         int n_episodes, std::uint64_t seed) {
  RolloutStats stats;
  auto episodes = rollout_episodes(env, make_behavior(env, spec, seed),
                                   n_episodes, seed, "behavior", &stats);
  data::Dataset ds(env.obs_dim(), env.act_dim(), env.discrete());
  for (const auto& ep : episodes) ds.add_episode(ep);
  return {std::move(ds), std::move(stats)};
}

// ---------------------------------------------------------------------------
// Discrete datasets as tabular records. Terminal steps route to one synthetic
// end state (index env.n_states()); terminal states are value-equivalent, so
// lumping them keeps every tabular quantity unchanged.
// ---------------------------------------------------------------------------

inline std::vector<tabular::TabularTransition> tabular_records(
    const Env& env, const data::Dataset& ds) {
  require(env.discrete() && ds.discrete(),
          "tabular records need a discrete environment and dataset");
  std::vector<tabular::TabularTransition> out;
  out.reserve(ds.size());
  const int end_state = env.n_states();
  for (size_t i = 0; i < ds.size(); ++i) {
    data::Transition t = ds.transition(i);
    tabular::TabularTransition rec;
    rec.episode = t.episode_id;
    rec.step = t.step_index;
    rec.s = static_cast<int>(t.obs[0]);
    rec.a = static_cast<int>(t.act[0]);
    rec.r = t.reward;
    rec.next_s = t.terminal ? end_state : static_cast<int>(t.next_obs[0]);
    rec.terminal = t.terminal;
    out.push_back(rec);
  }
  return out;
}

}  // namespace crrlab::envs
