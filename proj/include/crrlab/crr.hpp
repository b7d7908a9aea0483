#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crrlab/common.hpp"
#include "crrlab/data.hpp"
#include "crrlab/distributional.hpp"
#include "crrlab/envs.hpp"
#include "crrlab/nn.hpp"

/// The CRR learner: advantage-filtered behavior-cloning actor updates, a
/// categorical distributional critic trained against target networks, and
/// critic-weighted action selection at evaluation time.
namespace crrlab::crr {

// ---------------------------------------------------------------------------
// Filters and advantage estimators
// ---------------------------------------------------------------------------

enum class FilterVariant { BC, Binary, BinaryMax, Exp };

struct FilterSpec {
  FilterVariant variant = FilterVariant::Exp;
  double beta = 1.0;   // Exp temperature
  double clip = 20.0;  // Exp weight ceiling

  void validate() const {
    require_config(beta > 0.0, "filter beta must be positive");
    require_config(clip > 0.0, "filter clip must be positive");
  }
};

enum class AdvantageVariant { Mean, Max, KStep, MonteCarlo };

struct AdvantageSpec {
  AdvantageVariant variant = AdvantageVariant::Mean;
  int m = 4;  // policy samples per state value estimate
  int k = 5;  // horizon for KStep

  void validate() const {
    require_config(m >= 1, "advantage sample count must be >= 1");
    require_config(k >= 1, "k-step horizon must be >= 1");
  }
};

/// Weight placed on one behavior action. Monotone non-decreasing in the
/// advantage for every variant. Binary and BinaryMax share the strict
/// indicator; they differ only in which advantage estimate feeds them.
inline double filter_weight(const FilterSpec& spec, double advantage) {
  require_finite(advantage, "filter advantage");
  switch (spec.variant) {
    case FilterVariant::BC:
      return 1.0;
    case FilterVariant::Binary:
    case FilterVariant::BinaryMax:
      return advantage > 0.0 ? 1.0 : 0.0;
    case FilterVariant::Exp:
      return std::min(std::exp(advantage / spec.beta), spec.clip);
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

/// Residual trunk emitting mixture-of-Gaussians head parameters.
struct ActorNet {
  nn::ResidualMlp trunk;
  int action_dim;
  int n_components;

  ActorNet(int obs_dim, int act_dim, int hidden, int blocks, int components)
      : trunk(nn::ResidualMlpSpec{
            obs_dim, hidden, blocks,
            static_cast<int>(nn::mog_raw_size(components, act_dim))}),
        action_dim(act_dim),
        n_components(components) {}

  nn::MoGPolicy policy(std::span<const double> params,
                       std::span<const double> obs,
                       nn::ResidualMlp::Tape* tape = nullptr) const {
    Vec raw = trunk.forward(params, obs, tape);
    return nn::mog_from_raw(raw, n_components, action_dim);
  }
};

/// Residual trunk over [obs; action] emitting logits over the atom grid.
struct CriticNet {
  nn::ResidualMlp trunk;
  distributional::AtomGrid grid;

  CriticNet(int obs_dim, int act_dim, int hidden, int blocks,
            distributional::AtomGrid g = {})
      : trunk(nn::ResidualMlpSpec{obs_dim + act_dim, hidden, blocks,
                                  g.n_atoms}),
        grid(g) {
    grid.validate();
  }

  Vec logits(std::span<const double> params, std::span<const double> obs,
             std::span<const double> act,
             nn::ResidualMlp::Tape* tape = nullptr) const {
    Vec in(obs.size() + act.size());
    std::copy(obs.begin(), obs.end(), in.begin());
    std::copy(act.begin(), act.end(), in.begin() + obs.size());
    return trunk.forward(params, in, tape);
  }

  Vec distribution(std::span<const double> params, std::span<const double> obs,
                   std::span<const double> act) const {
    Vec l = logits(params, obs, act);
    softmax_inplace(l);
    return l;
  }

  double q_value(std::span<const double> params, std::span<const double> obs,
                 std::span<const double> act) const {
    return distributional::mean_value(grid, distribution(params, obs, act));
  }
};

// ---------------------------------------------------------------------------
// Advantage estimation
// ---------------------------------------------------------------------------

/// Scalar critic and policy views used by the advantage estimators. Bound to
/// real networks during training; tests may bind exact closed-form critics.
struct AdvantageContext {
  std::function<double(std::span<const double> obs, std::span<const double> act)>
      q;
  std::function<nn::MoGPolicy(std::span<const double> obs)> policy;
};

inline AdvantageContext make_advantage_context(
    const ActorNet& actor, std::span<const double> actor_params,
    const CriticNet& critic, std::span<const double> critic_params) {
  const ActorNet* a = &actor;
  const CriticNet* c = &critic;
  return {[c, critic_params](std::span<const double> obs,
                             std::span<const double> act) {
            return c->q_value(critic_params, obs, act);
          },
          [a, actor_params](std::span<const double> obs) {
            return a->policy(actor_params, obs);
          }};
}

/// V(s) estimated as the mean critic value over m fresh policy samples.
inline double state_value(const AdvantageContext& ctx,
                          std::span<const double> obs, int m, Rng& rng) {
  nn::MoGPolicy pol = ctx.policy(obs);
  double acc = 0.0;
  for (int j = 0; j < m; ++j) {
    Vec a = nn::mog_sample(pol, rng);
    acc += ctx.q(obs, a);
  }
  return acc / m;
}

/// Scalar advantage of the window's first action under the selected
/// estimator. Mean and Max are computed as means/extrema of per-sample
/// differences so a critic that ignores the action yields exactly zero.
inline double estimate_advantage(const AdvantageContext& ctx,
                                 const data::SequenceWindow& w,
                                 const AdvantageSpec& spec, double discount,
                                 Rng& rng) {
  switch (spec.variant) {
    case AdvantageVariant::Mean:
    case AdvantageVariant::Max: {
      nn::MoGPolicy pol = ctx.policy(w.obs[0]);
      double q_data = ctx.q(w.obs[0], w.act[0]);
      if (spec.variant == AdvantageVariant::Mean) {
        double acc = 0.0;
        for (int j = 0; j < spec.m; ++j) {
          Vec a = nn::mog_sample(pol, rng);
          acc += q_data - ctx.q(w.obs[0], a);
        }
        return acc / spec.m;
      }
      double adv = std::numeric_limits<double>::infinity();
      for (int j = 0; j < spec.m; ++j) {
        Vec a = nn::mog_sample(pol, rng);
        adv = std::min(adv, q_data - ctx.q(w.obs[0], a));
      }
      return adv;
    }
    case AdvantageVariant::KStep: {
      double partial = 0.0, g = 1.0;
      for (int i = 0; i < w.steps(); ++i) {
        partial += g * w.rewards[i];
        g *= discount;
      }
      double boot = 0.0;
      if (w.bootstrap_obs)
        boot = g * state_value(ctx, *w.bootstrap_obs, spec.m, rng);
      return partial + boot - state_value(ctx, w.obs[0], spec.m, rng);
    }
    case AdvantageVariant::MonteCarlo:
      return w.mc_return - state_value(ctx, w.obs[0], spec.m, rng);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

using Batch = std::vector<data::SequenceWindow>;

/// One filter weight per batch element. Fresh policy samples are drawn per
/// element from the advantage stream; BC consumes no randomness.
inline Vec compute_filter_weights(const AdvantageContext& ctx,
                                  const Batch& batch, const FilterSpec& filter,
                                  const AdvantageSpec& adv_spec,
                                  double discount, Rng& rng) {
  Vec w(batch.size(), 1.0);
  if (filter.variant == FilterVariant::BC) return w;
  for (size_t i = 0; i < batch.size(); ++i) {
    double adv = estimate_advantage(ctx, batch[i], adv_spec, discount, rng);
    w[i] = filter_weight(filter, adv);
  }
  return w;
}

struct WeightedNllResult {
  double loss = 0.0;
  Vec grad;
};

/// -(1/b) sum_i w_i log pi(a_i | s_i) and its actor-parameter gradient, with
/// the weights held fixed: no gradient flows through the filter.
inline WeightedNllResult weighted_log_prob_loss(
    const ActorNet& actor, std::span<const double> params, const Batch& batch,
    std::span<const double> weights) {
  require(!batch.empty(), "actor loss needs a nonempty batch");
  WeightedNllResult res;
  res.grad.assign(actor.trunk.param_count(), 0.0);
  const double b = static_cast<double>(batch.size());
  nn::ResidualMlp::Tape tape;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (weights[i] == 0.0) continue;
    Vec raw = actor.trunk.forward(params, batch[i].obs[0], &tape);
    nn::MoGPolicy pol =
        nn::mog_from_raw(raw, actor.n_components, actor.action_dim);
    res.loss += -weights[i] * nn::mog_log_prob(pol, batch[i].act[0]) / b;
    Vec draw = nn::mog_log_prob_grad_raw(pol, batch[i].act[0]);
    for (double& g : draw) g *= -weights[i] / b;
    actor.trunk.backward(params, tape, draw, res.grad);
  }
  return res;
}

struct ActorLossResult {
  double loss = 0.0;
  Vec grad;
  Vec weights;
  double mean_weight = 0.0;
  double accept_frac = 0.0;  // share of the batch with positive weight
};

inline ActorLossResult actor_loss(const ActorNet& actor,
                                  std::span<const double> actor_params,
                                  const CriticNet& critic,
                                  std::span<const double> critic_params,
                                  const Batch& batch, const FilterSpec& filter,
                                  const AdvantageSpec& adv_spec,
                                  double discount, Rng& rng) {
  AdvantageContext ctx =
      make_advantage_context(actor, actor_params, critic, critic_params);
  ActorLossResult res;
  res.weights =
      compute_filter_weights(ctx, batch, filter, adv_spec, discount, rng);
  auto nll = weighted_log_prob_loss(actor, actor_params, batch, res.weights);
  res.loss = nll.loss;
  res.grad = std::move(nll.grad);
  res.mean_weight = mean_of(res.weights);
  double accepted = 0.0;
  for (double w : res.weights) accepted += w > 0.0 ? 1.0 : 0.0;
  res.accept_frac = accepted / static_cast<double>(res.weights.size());
  return res;
}

struct CriticLossResult {
  double loss = 0.0;
  Vec grad;
};

/// Distributional TD loss of the windows' first transitions. Targets come
/// from the target networks: m next actions sampled from the target actor,
/// their target-critic distributions averaged, shifted by (reward, discount)
/// and projected onto the grid. Terminal transitions use discount 0.
inline CriticLossResult critic_loss(const CriticNet& critic,
                                    std::span<const double> critic_params,
                                    const ActorNet& actor,
                                    std::span<const double> target_actor_params,
                                    std::span<const double> target_critic_params,
                                    const Batch& batch, int m, double discount,
                                    Rng& rng) {
  require(!batch.empty(), "critic loss needs a nonempty batch");
  CriticLossResult res;
  res.grad.assign(critic.trunk.param_count(), 0.0);
  const double b = static_cast<double>(batch.size());
  nn::ResidualMlp::Tape tape;
  for (const data::SequenceWindow& w : batch) {
    data::Transition t = w.first_transition();
    Vec target;
    if (t.terminal) {
      Vec point(critic.grid.n_atoms, 0.0);
      point[0] = 1.0;
      target = distributional::project_target(critic.grid, t.reward, 0.0,
                                              point);
    } else {
      nn::MoGPolicy pol = actor.policy(target_actor_params, t.next_obs);
      std::vector<Vec> dists;
      dists.reserve(m);
      for (int j = 0; j < m; ++j) {
        Vec a = nn::mog_sample(pol, rng);
        dists.push_back(
            critic.distribution(target_critic_params, t.next_obs, a));
      }
      target = distributional::project_target(
          critic.grid, t.reward, discount, distributional::mixture_target(dists));
    }
    Vec logits = critic.logits(critic_params, t.obs, t.act, &tape);
    auto dv = distributional::divergence(logits, target);
    res.loss += dv.loss / b;
    for (double& g : dv.grad) g /= b;
    critic.trunk.backward(critic_params, tape, dv.grad, res.grad);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Optimizer: gradient descent with per-parameter first/second-moment
// adaptation (decay 0.9/0.999, epsilon 1e-8) and bias correction.
// ---------------------------------------------------------------------------

struct AdamState {
  Vec m;
  Vec v;
  long t = 0;
};

inline void adam_update(AdamState& st, std::span<double> params,
                        std::span<const double> grad, double lr,
                        double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8) {
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
  }
}

// ---------------------------------------------------------------------------
// Learner
// ---------------------------------------------------------------------------

struct LearnerConfig {
  int batch_size = 16;
  int target_update_period = 100;
  double learning_rate = 1e-4;  // separate Adam states for actor and critic
  long n_updates = 20000;
  double discount = 0.99;
  std::uint64_t seed = 1;
  FilterSpec filter;
  AdvantageSpec advantage;
  int cwp_samples = 16;
  double cwp_beta = 1.0;
  int hidden_width = 64;
  int n_blocks = 4;
  int mog_components = 5;
  distributional::AtomGrid grid;

  void validate() const {
    require_config(batch_size >= 1, "batch size must be >= 1");
    require_config(target_update_period >= 1, "target period must be >= 1");
    require_config(learning_rate > 0.0, "learning rate must be positive");
    require_config(n_updates >= 0, "n_updates must be >= 0");
    require_config(discount > 0.0 && discount < 1.0,
                   "discount must lie in (0,1)");
    require_config(cwp_samples >= 1, "cwp sample count must be >= 1");
    require_config(cwp_beta > 0.0, "cwp beta must be positive");
    filter.validate();
    advantage.validate();
    grid.validate();
  }
};

struct LearnerState {
  Vec actor_params;
  Vec critic_params;
  Vec target_actor_params;
  Vec target_critic_params;
  AdamState actor_opt;
  AdamState critic_opt;
  long step = 0;
};

inline LearnerState init_learner(const ActorNet& actor, const CriticNet& critic,
                                 const LearnerConfig& config) {
  LearnerState st;
  Rng init = make_stream(config.seed, "init");
  st.actor_params.assign(actor.trunk.param_count(), 0.0);
  actor.trunk.init_params(st.actor_params, init);
  st.critic_params.assign(critic.trunk.param_count(), 0.0);
  critic.trunk.init_params(st.critic_params, init);
  st.target_actor_params = st.actor_params;
  st.target_critic_params = st.critic_params;
  return st;
}

struct StepMetrics {
  long step = 0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_weight = 0.0;
  double accept_frac = 0.0;
};

/// One pass of the update loop: sample a batch, update the actor against the
/// current critic, update the critic against the target networks, and copy
/// the targets every target_update_period steps.
inline StepMetrics learner_step(LearnerState& st, const ActorNet& actor,
                                const CriticNet& critic,
                                const data::Dataset& dataset,
                                const LearnerConfig& config, Rng& data_rng,
                                Rng& adv_rng) {
  require(dataset.size() >= static_cast<size_t>(config.batch_size),
          "dataset smaller than one batch");
  const int k = config.advantage.variant == AdvantageVariant::KStep
                    ? config.advantage.k
                    : 1;
  Batch batch = dataset.sample_sequences(k, config.batch_size, config.discount,
                                         data_rng);

  auto al = actor_loss(actor, st.actor_params, critic, st.critic_params, batch,
                       config.filter, config.advantage, config.discount,
                       adv_rng);
  auto cl = critic_loss(critic, st.critic_params, actor,
                        st.target_actor_params, st.target_critic_params, batch,
                        config.advantage.m, config.discount, adv_rng);

  adam_update(st.actor_opt, st.actor_params, al.grad, config.learning_rate);
  adam_update(st.critic_opt, st.critic_params, cl.grad, config.learning_rate);

  ++st.step;
  if (st.step % config.target_update_period == 0) {
    st.target_actor_params = st.actor_params;
    st.target_critic_params = st.critic_params;
  }
  return {st.step, al.loss, cl.loss, al.mean_weight, al.accept_frac};
}

// ---------------------------------------------------------------------------
// Critic Weighted Policy
// ---------------------------------------------------------------------------

/// Draws n actions from the policy sampler, weights them by
/// exp(Q(s,a_i)/beta) with self-normalization (stabilized by subtracting the
/// max before exponentiation), and resamples one. With n = 1 the single draw
/// is returned directly and no selection randomness is consumed, so it is
/// interchangeable with plain stochastic sampling.
inline Vec cwp_select(
    const std::function<Vec(Rng&)>& sample_action,
    const std::function<double(std::span<const double>)>& q_value, int n,
    double beta, Rng& rng) {
  require_config(n >= 1, "cwp needs at least one sample");
  require_config(beta > 0.0, "cwp beta must be positive");
  if (n == 1) return sample_action(rng);
  std::vector<Vec> actions;
  actions.reserve(n);
  Vec scaled(n);
  for (int i = 0; i < n; ++i) {
    actions.push_back(sample_action(rng));
    scaled[i] = q_value(actions[i]) / beta;
  }
  softmax_inplace(scaled);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += scaled[i];
    if (u <= acc) return actions[i];
  }
  return actions.back();
}

// ---------------------------------------------------------------------------
// Evaluation against an environment
// ---------------------------------------------------------------------------

enum class ActionMode { Stochastic, Deterministic, Cwp };

inline const char* to_string(ActionMode m) {
  switch (m) {
    case ActionMode::Stochastic: return "stochastic";
    case ActionMode::Deterministic: return "deterministic";
    case ActionMode::Cwp: return "cwp";
  }
  return "?";
}

inline envs::ActionFn make_action_fn(const ActorNet& actor,
                                     std::span<const double> actor_params,
                                     const CriticNet* critic,
                                     std::span<const double> critic_params,
                                     const envs::Env& env, ActionMode mode,
                                     int cwp_n, double cwp_beta) {
  if (mode == ActionMode::Cwp)
    require_config(critic != nullptr, "cwp evaluation needs a critic");
  const envs::Env* e = &env;
  const ActorNet* a = &actor;
  return [=](std::span<const double> raw, Rng& rng) -> Vec {
    Vec enc(e->encoded_obs_dim(), 0.0);
    e->encode_obs(raw, enc);
    nn::MoGPolicy pol = a->policy(actor_params, enc);
    switch (mode) {
      case ActionMode::Stochastic:
        return nn::mog_sample(pol, rng);
      case ActionMode::Deterministic:
        return nn::mog_deterministic(pol);
      case ActionMode::Cwp:
        return cwp_select(
            [&](Rng& r) { return nn::mog_sample(pol, r); },
            [&](std::span<const double> act) {
              return critic->q_value(critic_params, enc, act);
            },
            cwp_n, cwp_beta, rng);
    }
    return nn::mog_deterministic(pol);
  };
}

inline envs::RolloutStats evaluate(const ActorNet& actor,
                                   std::span<const double> actor_params,
                                   const CriticNet* critic,
                                   std::span<const double> critic_params,
                                   envs::Env& env, int episodes,
                                   ActionMode mode, int cwp_n, double cwp_beta,
                                   std::uint64_t seed,
                                   std::string_view stream) {
  envs::RolloutStats stats;
  envs::rollout(env,
                make_action_fn(actor, actor_params, critic, critic_params, env,
                               mode, cwp_n, cwp_beta),
                episodes, seed, stream, &stats);
  return stats;
}

}  // namespace crrlab::crr
