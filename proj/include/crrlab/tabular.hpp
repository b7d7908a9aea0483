#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "crrlab/common.hpp"

/// Exact finite-MDP machinery: empirical MDPs built from transition counts
/// (with an absorbing sink for unseen state-action pairs), exact policy
/// evaluation by value iteration or a direct linear solve, the closed-form
/// tabular CRR policy updates, and machine checkers for their guarantees
/// (action-support containment, per-iterate policy improvement, and the
/// empirical-vs-true value gap).
namespace crrlab::tabular {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Row-stochastic policy table, indexed (state, action).
struct TabularPolicy {
  int n_states = 0;
  int n_actions = 0;
  Vec probs;  // row-major, n_states x n_actions

  double at(int s, int a) const { return probs[s * n_actions + a]; }
  double& at(int s, int a) { return probs[s * n_actions + a]; }

  static TabularPolicy uniform(int n_states, int n_actions) {
    TabularPolicy p{n_states, n_actions,
                    Vec(static_cast<size_t>(n_states) * n_actions,
                        1.0 / n_actions)};
    return p;
  }

  void validate(double tol = 1e-12) const {
    require(static_cast<int>(probs.size()) == n_states * n_actions,
            "policy table size mismatch");
    for (int s = 0; s < n_states; ++s) {
      double sum = 0.0;
      for (int a = 0; a < n_actions; ++a) {
        require(at(s, a) >= 0.0, "policy has a negative probability");
        sum += at(s, a);
      }
      require(std::abs(sum - 1.0) <= tol, "policy row does not sum to 1");
    }
  }
};

/// Action values q(s,a) and state values v(s) for one policy.
struct TabularValues {
  int n_states = 0;
  int n_actions = 0;
  Vec q;  // n_states x n_actions
  Vec v;  // n_states

  double q_at(int s, int a) const { return q[s * n_actions + a]; }
  double& q_at(int s, int a) { return q[s * n_actions + a]; }
};

/// Finite MDP with a dense transition tensor, deterministic rewards r(s,a)
/// and a set of absorbing terminal states (self-loop, reward 0).
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  Vec transition;  // (s, a, s') row-major
  Vec reward;      // (s, a)
  double discount = 0.99;
  std::vector<std::uint8_t> terminal;  // per state

  double p(int s, int a, int s2) const {
    return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& p(int s, int a, int s2) {
    return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
  }
  double r(int s, int a) const { return reward[s * n_actions + a]; }
  double& r(int s, int a) { return reward[s * n_actions + a]; }
  bool is_terminal(int s) const { return terminal[s] != 0; }

  static TabularMdp zeros(int n_states, int n_actions, double discount) {
    TabularMdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.transition.assign(
        static_cast<size_t>(n_states) * n_actions * n_states, 0.0);
    m.reward.assign(static_cast<size_t>(n_states) * n_actions, 0.0);
    m.discount = discount;
    m.terminal.assign(n_states, 0);
    return m;
  }

  void validate(double tol = 1e-12) const {
    require_config(discount > 0.0 && discount < 1.0,
                   "discount must lie in (0,1)");
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) {
        double sum = 0.0;
        for (int s2 = 0; s2 < n_states; ++s2) {
          require(p(s, a, s2) >= 0.0, "negative transition probability");
          sum += p(s, a, s2);
        }
        require(std::abs(sum - 1.0) <= tol,
                "transition row does not sum to 1");
        if (is_terminal(s)) {
          require(p(s, a, s) == 1.0 && r(s, a) == 0.0,
                  "terminal state must self-loop with reward 0");
        }
      }
    }
  }
};

/// One logged tabular step. `terminal` marks next_s as a terminal state.
struct TabularTransition {
  long episode = 0;
  long step = 0;
  int s = 0;
  int a = 0;
  double r = 0.0;
  int next_s = 0;
  bool terminal = false;
};

/// How build_empirical_mdp treats differing rewards observed for one (s,a).
/// Strict rejects them (deterministic-reward data contract); Average takes
/// the sample mean, which is what stochastic-reward sources such as the
/// two-armed bandit need before the tabular machinery applies.
enum class RewardMode { Strict, Average };

/// Finite MDP estimated from transition counts. States keep their dataset
/// indices; one synthetic absorbing sink (index n_states) receives all mass
/// from unseen (s,a) pairs and carries reward 0, so its values are 0.
struct EmpiricalMdp {
  int n_states = 0;   // original states; the sink is index n_states
  int n_actions = 0;
  std::vector<long> counts;          // (s, a, s') over original states
  std::vector<std::uint8_t> seen;    // (s, a) has at least one count
  TabularMdp mdp;                    // over n_states + 1 states
  TabularPolicy mu_b;                // empirical behavior policy, n_states + 1 rows
  Vec d_b;                           // state visit weights, n_states + 1 (sink 0)

  int sink() const { return n_states; }
  long count(int s, int a, int s2) const {
    return counts[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
  }
};

// ---------------------------------------------------------------------------
// Dataset coherence and empirical-MDP construction
// ---------------------------------------------------------------------------

/// A dataset is coherent when every non-terminal successor state also occurs
/// as a source state, so that values bootstrapped inside the empirical MDP
/// never depend on states the data says nothing about.
inline bool check_coherent(std::span<const std::tuple<int, int, int>> triples,
                           const std::set<int>& terminal_states, int n_states,
                           int n_actions) {
  std::vector<std::uint8_t> is_source(n_states, 0);
  for (const auto& [s, a, s2] : triples) {
    require(s >= 0 && s < n_states && s2 >= 0 && s2 < n_states,
            "state index out of range");
    require(a >= 0 && a < n_actions, "action index out of range");
    is_source[s] = 1;
  }
  for (const auto& [s, a, s2] : triples) {
    if (terminal_states.count(s2)) continue;
    if (!is_source[s2]) return false;
  }
  return true;
}

inline EmpiricalMdp build_empirical_mdp(
    const std::vector<TabularTransition>& data, int n_states, int n_actions,
    double discount, RewardMode reward_mode = RewardMode::Strict) {
  require_config(discount > 0.0 && discount < 1.0,
                 "discount must lie in (0,1)");
  require(n_states > 0 && n_actions > 0, "empty state or action space");

  std::vector<std::tuple<int, int, int>> triples;
  std::set<int> terminals;
  triples.reserve(data.size());
  for (const auto& t : data) {
    triples.emplace_back(t.s, t.a, t.next_s);
    if (t.terminal) terminals.insert(t.next_s);
  }
  require(check_coherent(triples, terminals, n_states, n_actions),
          "dataset is not coherent: a non-terminal successor never occurs "
          "as a source state");

  EmpiricalMdp emp;
  emp.n_states = n_states;
  emp.n_actions = n_actions;
  emp.counts.assign(static_cast<size_t>(n_states) * n_actions * n_states, 0);
  emp.seen.assign(static_cast<size_t>(n_states) * n_actions, 0);

  Vec reward_sum(static_cast<size_t>(n_states) * n_actions, 0.0);
  Vec reward_first(static_cast<size_t>(n_states) * n_actions, 0.0);
  std::vector<long> sa_count(static_cast<size_t>(n_states) * n_actions, 0);

  for (const auto& t : data) {
    size_t sa = static_cast<size_t>(t.s) * n_actions + t.a;
    emp.counts[(sa)*n_states + t.next_s] += 1;
    if (!emp.seen[sa]) {
      emp.seen[sa] = 1;
      reward_first[sa] = t.r;
    } else if (reward_mode == RewardMode::Strict &&
               t.r != reward_first[sa]) {
      throw ValidationError(
          "inconsistent rewards observed for state " + std::to_string(t.s) +
          ", action " + std::to_string(t.a) +
          " (deterministic-reward contract)");
    }
    reward_sum[sa] += t.r;
    sa_count[sa] += 1;
  }

  const int S1 = n_states + 1;  // + sink
  emp.mdp = TabularMdp::zeros(S1, n_actions, discount);
  emp.mdp.terminal.assign(S1, 0);
  emp.mdp.terminal[n_states] = 1;

  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      size_t sa = static_cast<size_t>(s) * n_actions + a;
      if (sa_count[sa] == 0) {
        emp.mdp.p(s, a, emp.sink()) = 1.0;  // unseen pair: absorb, reward 0
        continue;
      }
      for (int s2 = 0; s2 < n_states; ++s2) {
        long c = emp.counts[sa * n_states + s2];
        if (c > 0)
          emp.mdp.p(s, a, s2) =
              static_cast<double>(c) / static_cast<double>(sa_count[sa]);
      }
      emp.mdp.r(s, a) = reward_mode == RewardMode::Strict
                            ? reward_first[sa]
                            : reward_sum[sa] / static_cast<double>(sa_count[sa]);
    }
  }
  for (int a = 0; a < n_actions; ++a) emp.mdp.p(emp.sink(), a, emp.sink()) = 1.0;

  // Behavior policy: count ratios where the state was seen, else uniform.
  emp.mu_b = TabularPolicy::uniform(S1, n_actions);
  emp.d_b.assign(S1, 0.0);
  for (int s = 0; s < n_states; ++s) {
    long total = 0;
    for (int a = 0; a < n_actions; ++a)
      total += sa_count[static_cast<size_t>(s) * n_actions + a];
    if (total == 0) continue;
    for (int a = 0; a < n_actions; ++a)
      emp.mu_b.at(s, a) =
          static_cast<double>(sa_count[static_cast<size_t>(s) * n_actions + a]) /
          static_cast<double>(total);
    emp.d_b[s] =
        static_cast<double>(total) / static_cast<double>(data.size());
  }
  return emp;
}

// ---------------------------------------------------------------------------
// Policy evaluation
// ---------------------------------------------------------------------------

enum class EvalMethod { LinearSolve, ValueIteration };

/// Exact policy evaluation. LinearSolve inverts (I - discount * P_pi) with a
/// partial-pivot LU; ValueIteration sweeps Bellman backups until the sup-norm
/// change drops below tol. The two routes agree to ~1e-12 on well-conditioned
/// problems and are cross-checked in the test suite.
inline TabularValues evaluate_policy(const TabularMdp& mdp,
                                     const TabularPolicy& policy,
                                     double tol = 1e-12,
                                     EvalMethod method = EvalMethod::LinearSolve) {
  require_config(mdp.discount < 1.0, "discount must be < 1 for evaluation");
  require_config(mdp.discount > 0.0, "discount must be > 0");
  require(policy.n_states == mdp.n_states &&
              policy.n_actions == mdp.n_actions,
          "policy dimensions do not match the MDP");
  require(tol > 0.0, "evaluation tolerance must be positive");

  const int S = mdp.n_states;
  const int A = mdp.n_actions;
  const double g = mdp.discount;

  Vec v(S, 0.0);
  if (method == EvalMethod::LinearSolve) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(S, S);
    Eigen::VectorXd rpi(S);
    for (int s = 0; s < S; ++s) {
      double rs = 0.0;
      for (int a = 0; a < A; ++a) {
        double pa = policy.at(s, a);
        if (pa == 0.0) continue;
        rs += pa * mdp.r(s, a);
        for (int s2 = 0; s2 < S; ++s2)
          m(s, s2) -= g * pa * mdp.p(s, a, s2);
      }
      rpi(s) = rs;
    }
    Eigen::VectorXd sol = m.partialPivLu().solve(rpi);
    for (int s = 0; s < S; ++s) v[s] = sol(s);
  } else {
    Vec next(S, 0.0);
    // Contraction factor discount: bounded iteration count as a guard.
    const long max_iters =
        static_cast<long>(std::ceil(std::log(tol * (1.0 - g) / 1e3) /
                                    std::log(g))) +
        1000;
    for (long it = 0; it < max_iters; ++it) {
      double delta = 0.0;
      for (int s = 0; s < S; ++s) {
        double vs = 0.0;
        for (int a = 0; a < A; ++a) {
          double pa = policy.at(s, a);
          if (pa == 0.0) continue;
          double backup = mdp.r(s, a);
          for (int s2 = 0; s2 < S; ++s2)
            backup += g * mdp.p(s, a, s2) * v[s2];
          vs += pa * backup;
        }
        next[s] = vs;
        delta = std::max(delta, std::abs(vs - v[s]));
      }
      v.swap(next);
      if (delta < tol) break;
    }
  }

  TabularValues out;
  out.n_states = S;
  out.n_actions = A;
  out.q.assign(static_cast<size_t>(S) * A, 0.0);
  out.v = v;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double q = mdp.r(s, a);
      for (int s2 = 0; s2 < S; ++s2) q += g * mdp.p(s, a, s2) * v[s2];
      out.q_at(s, a) = q;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form CRR policy updates
// ---------------------------------------------------------------------------

/// Binary update: mass proportional to mu_b on actions whose value reaches
/// the state value, zero elsewhere.
///   pi(a|s) ~ 1[q(s,a) >= v(s)] * mu_b(a|s)
inline TabularPolicy crr_binary_update(const TabularValues& values,
                                       const TabularPolicy& mu_b) {
  require(values.n_states == mu_b.n_states &&
              values.n_actions == mu_b.n_actions,
          "values/policy dimension mismatch");
  const int S = values.n_states;
  const int A = values.n_actions;
  TabularPolicy pi{S, A, Vec(static_cast<size_t>(S) * A, 0.0)};
  for (int s = 0; s < S; ++s) {
    // v is a weighted average of supported q values, so the max supported q
    // passes the indicator; clamping v to that max removes the 1-ulp case
    // where the computed average lands just above it.
    double max_q = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a)
      if (mu_b.at(s, a) > 0.0) max_q = std::max(max_q, values.q_at(s, a));
    double vs = std::min(values.v[s], max_q);
    double z = 0.0;
    for (int a = 0; a < A; ++a) {
      if (mu_b.at(s, a) > 0.0 && values.q_at(s, a) >= vs) {
        pi.at(s, a) = mu_b.at(s, a);
        z += mu_b.at(s, a);
      }
    }
    assert(z > 0.0 && "binary update: no supported action passed the filter");
    for (int a = 0; a < A; ++a) pi.at(s, a) /= z;
  }
  return pi;
}

namespace detail {

/// pi_beta(a|s) ~ mu(a) * exp(q(a) / beta) over supp mu, via log-space
/// normalization; returns the policy row and its KL divergence from mu.
inline double exp_policy_row(std::span<const double> q,
                             std::span<const double> mu, double beta,
                             std::span<double> out) {
  const int A = static_cast<int>(q.size());
  Vec logits(A, -std::numeric_limits<double>::infinity());
  for (int a = 0; a < A; ++a)
    if (mu[a] > 0.0) logits[a] = std::log(mu[a]) + q[a] / beta;
  double lse = logsumexp(logits);
  double kl = 0.0;
  for (int a = 0; a < A; ++a) {
    if (mu[a] > 0.0) {
      double lp = logits[a] - lse;
      out[a] = std::exp(lp);
      if (out[a] > 0.0) kl += out[a] * (lp - std::log(mu[a]));
    } else {
      out[a] = 0.0;
    }
  }
  return kl;
}

}  // namespace detail

/// KL-constrained greedy update. Per state, returns the maximizer of
/// sum_a pi(a) q(s,a) subject to KL(pi || mu_b) <= epsilon:
/// pi(a|s) ~ mu_b(a|s) exp(q(s,a)/beta(s)) with beta(s) chosen by bisection
/// on log beta so the constraint binds, or the beta -> 0 greedy-in-support
/// limit when that limit already satisfies the budget. Ties among argmax
/// actions split proportionally to mu_b.
inline TabularPolicy crr_exp_update(const TabularValues& values,
                                    const TabularPolicy& mu_b,
                                    double epsilon) {
  require(values.n_states == mu_b.n_states &&
              values.n_actions == mu_b.n_actions,
          "values/policy dimension mismatch");
  require_config(epsilon > 0.0, "KL budget must be positive");
  const int S = values.n_states;
  const int A = values.n_actions;
  const double kKlTol = 1e-10;

  TabularPolicy pi{S, A, Vec(static_cast<size_t>(S) * A, 0.0)};
  Vec q_row(A), mu_row(A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      q_row[a] = values.q_at(s, a);
      mu_row[a] = mu_b.at(s, a);
    }

    // Greedy-in-support limit: mass on the supported argmax actions, split
    // proportionally to mu_b. Its KL from mu_b is -log(total argmax mass).
    double max_q = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a)
      if (mu_row[a] > 0.0) max_q = std::max(max_q, q_row[a]);
    double argmax_mass = 0.0;
    for (int a = 0; a < A; ++a)
      if (mu_row[a] > 0.0 && q_row[a] == max_q) argmax_mass += mu_row[a];
    double greedy_kl = -std::log(argmax_mass);
    if (greedy_kl <= epsilon) {
      for (int a = 0; a < A; ++a)
        pi.at(s, a) = (mu_row[a] > 0.0 && q_row[a] == max_q)
                          ? mu_row[a] / argmax_mass
                          : 0.0;
      continue;
    }

    // KL(pi_beta || mu) decreases monotonically in beta: bracket on log beta.
    double lo = std::log(1e-8), hi = std::log(1e8);
    Vec row(A);
    double kl_lo = detail::exp_policy_row(q_row, mu_row, std::exp(lo), row);
    double kl_hi = detail::exp_policy_row(q_row, mu_row, std::exp(hi), row);
    if (!(kl_lo >= epsilon && kl_hi <= epsilon))
      throw std::logic_error("crr_exp_update: KL bracket failed");
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      double kl = detail::exp_policy_row(q_row, mu_row, std::exp(mid), row);
      if (std::abs(kl - epsilon) <= kKlTol && kl <= epsilon) break;
      if (kl > epsilon)
        lo = mid;
      else
        hi = mid;
    }
    // Land on the feasible side of the constraint.
    double kl = detail::exp_policy_row(q_row, mu_row,
                                       std::exp(0.5 * (lo + hi)), row);
    if (kl > epsilon)
      detail::exp_policy_row(q_row, mu_row, std::exp(hi), row);
    for (int a = 0; a < A; ++a) pi.at(s, a) = row[a];
  }
  return pi;
}

// ---------------------------------------------------------------------------
// Tabular CRR iteration and checkers
// ---------------------------------------------------------------------------

struct CrrVariant {
  enum Kind { Binary, Exp } kind = Binary;
  double epsilon = 0.5;  // KL budget, Exp only

  static CrrVariant binary() { return {Binary, 0.0}; }
  static CrrVariant exp(double eps = 0.5) { return {Exp, eps}; }
};

struct CrrIterate {
  TabularPolicy policy;
  TabularValues values;
};

/// Policy iteration in the empirical MDP starting from the behavior policy.
/// Returns the full trajectory [(pi_0, Q^{pi_0}), ..., (pi_n, Q^{pi_n})].
/// `corrupt_hook` is a test hook applied to each updated policy before it is
/// recorded (used for negative controls in the verification command).
inline std::vector<CrrIterate> tabular_crr(
    const EmpiricalMdp& emp, const CrrVariant& variant, int iterations,
    const std::function<void(TabularPolicy&)>& corrupt_hook = nullptr) {
  require_config(iterations >= 1, "iterations must be >= 1");
  std::vector<CrrIterate> out;
  out.reserve(iterations + 1);
  TabularPolicy pi = emp.mu_b;
  out.push_back({pi, evaluate_policy(emp.mdp, pi)});
  for (int i = 0; i < iterations; ++i) {
    const TabularValues& vals = out.back().values;
    TabularPolicy next = variant.kind == CrrVariant::Binary
                             ? crr_binary_update(vals, emp.mu_b)
                             : crr_exp_update(vals, emp.mu_b, variant.epsilon);
    if (corrupt_hook) corrupt_hook(next);
    out.push_back({next, evaluate_policy(emp.mdp, next)});
  }
  return out;
}

/// True iff pi puts zero mass exactly wherever mu_b does. The updates build
/// their zeros by multiplication, so no tolerance is needed.
inline bool check_support_containment(const TabularPolicy& pi,
                                      const TabularPolicy& mu_b) {
  require(pi.n_states == mu_b.n_states && pi.n_actions == mu_b.n_actions,
          "policy dimension mismatch");
  for (int s = 0; s < pi.n_states; ++s)
    for (int a = 0; a < pi.n_actions; ++a)
      if (mu_b.at(s, a) == 0.0 && pi.at(s, a) != 0.0) return false;
  return true;
}

/// True iff Q^{pi_new} >= Q^{pi_old} - tol elementwise in the empirical MDP.
inline bool check_policy_improvement(const EmpiricalMdp& emp,
                                     const TabularPolicy& pi_old,
                                     const TabularPolicy& pi_new, double tol) {
  TabularValues q_old = evaluate_policy(emp.mdp, pi_old);
  TabularValues q_new = evaluate_policy(emp.mdp, pi_new);
  for (size_t i = 0; i < q_old.q.size(); ++i)
    if (q_new.q[i] < q_old.q[i] - tol) return false;
  return true;
}

/// sup |Q^pi - Q_B^pi| over visited states and supported actions. The policy
/// is given over the true MDP's states; inside the empirical MDP it is
/// extended with a uniform row at the sink (whose values are 0 regardless).
inline double epsilon_mdp_gap(const TabularMdp& true_mdp,
                              const EmpiricalMdp& emp,
                              const TabularPolicy& policy) {
  require(true_mdp.n_states == emp.n_states &&
              true_mdp.n_actions == emp.n_actions,
          "true/empirical MDP dimension mismatch");
  require(policy.n_states == true_mdp.n_states,
          "policy must be defined over the true MDP's states");

  TabularPolicy ext = TabularPolicy::uniform(emp.n_states + 1, emp.n_actions);
  for (int s = 0; s < emp.n_states; ++s)
    for (int a = 0; a < emp.n_actions; ++a) ext.at(s, a) = policy.at(s, a);

  TabularValues q_true = evaluate_policy(true_mdp, policy);
  TabularValues q_emp = evaluate_policy(emp.mdp, ext);

  double gap = 0.0;
  for (int s = 0; s < emp.n_states; ++s) {
    if (emp.d_b[s] <= 0.0) continue;
    for (int a = 0; a < emp.n_actions; ++a) {
      if (policy.at(s, a) <= 0.0) continue;
      gap = std::max(gap, std::abs(q_true.q_at(s, a) - q_emp.q_at(s, a)));
    }
  }
  return gap;
}

// ---------------------------------------------------------------------------
// Text dataset format: header `episode,step,s,a,r,s',terminal`, one record
// per line.
// ---------------------------------------------------------------------------

inline void save_tabular_dataset(std::ostream& os,
                                 const std::vector<TabularTransition>& data) {
  os << "episode,step,s,a,r,s',terminal\n";
  for (const auto& t : data) {
    os << t.episode << ',' << t.step << ',' << t.s << ',' << t.a << ','
       << format_g17(t.r) << ',' << t.next_s << ',' << (t.terminal ? 1 : 0)
       << '\n';
  }
}

inline void save_tabular_dataset(const std::string& path,
                                 const std::vector<TabularTransition>& data) {
  std::ofstream os(path);
  require(os.good(), "cannot open " + path + " for writing");
  save_tabular_dataset(os, data);
}

inline std::vector<TabularTransition> load_tabular_dataset(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)),
          "tabular dataset: missing header");
  require(line == "episode,step,s,a,r,s',terminal",
          "tabular dataset: unexpected header '" + line + "'");
  std::vector<TabularTransition> out;
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    TabularTransition t;
    char c;
    int term;
    if (!(ss >> t.episode >> c >> t.step >> c >> t.s >> c >> t.a >> c >>
          t.r >> c >> t.next_s >> c >> term)) {
      throw ValidationError("tabular dataset: parse error at line " +
                            std::to_string(line_no));
    }
    t.terminal = term != 0;
    out.push_back(t);
  }
  return out;
}

inline std::vector<TabularTransition> load_tabular_dataset(
    const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open " + path);
  return load_tabular_dataset(is);
}

// ---------------------------------------------------------------------------
// Randomized instances and proposition sweeps
// ---------------------------------------------------------------------------

/// Random episodic MDP: `n_states` regular states plus one terminal state
/// that every (s,a) reaches with probability in [0.05, 0.3], so sampled
/// episodes always end and datasets of whole episodes are coherent.
inline TabularMdp random_episodic_mdp(int n_states, int n_actions,
                                      double discount, Rng& rng) {
  const int S = n_states + 1;
  TabularMdp m = TabularMdp::zeros(S, n_actions, discount);
  m.terminal[n_states] = 1;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> term_p(0.05, 0.3);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double pt = term_p(rng);
      Vec w(n_states);
      double total = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        w[s2] = -std::log(1.0 - unit(rng));  // exponential weights
        total += w[s2];
      }
      for (int s2 = 0; s2 < n_states; ++s2)
        m.p(s, a, s2) = (1.0 - pt) * w[s2] / total;
      m.p(s, a, n_states) = pt;
      m.r(s, a) = unit(rng);
    }
  }
  for (int a = 0; a < n_actions; ++a) m.p(n_states, a, n_states) = 1.0;
  return m;
}

inline TabularPolicy random_policy(int n_states, int n_actions, Rng& rng) {
  TabularPolicy p{n_states, n_actions,
                  Vec(static_cast<size_t>(n_states) * n_actions, 0.0)};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < n_states; ++s) {
    double total = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      p.at(s, a) = 0.05 + unit(rng);
      total += p.at(s, a);
    }
    for (int a = 0; a < n_actions; ++a) p.at(s, a) /= total;
  }
  return p;
}

inline int sample_categorical(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

/// Rolls whole episodes under `behavior` until at least `min_transitions`
/// records exist. Episodes start uniformly over non-terminal states and end
/// when the MDP's terminal state is hit, so the result is always coherent.
inline std::vector<TabularTransition> sample_episodes(
    const TabularMdp& mdp, const TabularPolicy& behavior, long min_transitions,
    Rng& rng) {
  std::vector<TabularTransition> data;
  std::vector<int> starts;
  for (int s = 0; s < mdp.n_states; ++s)
    if (!mdp.is_terminal(s)) starts.push_back(s);
  require(!starts.empty(), "MDP has no non-terminal states");
  std::uniform_int_distribution<size_t> start_dist(0, starts.size() - 1);
  long episode = 0;
  const long step_cap = 100000;
  while (static_cast<long>(data.size()) < min_transitions) {
    int s = starts[start_dist(rng)];
    long step = 0;
    while (!mdp.is_terminal(s) && step < step_cap) {
      Vec row(mdp.n_actions);
      for (int a = 0; a < mdp.n_actions; ++a) row[a] = behavior.at(s, a);
      int a = sample_categorical(row, rng);
      Vec next_row(mdp.n_states);
      for (int s2 = 0; s2 < mdp.n_states; ++s2) next_row[s2] = mdp.p(s, a, s2);
      int s2 = sample_categorical(next_row, rng);
      data.push_back({episode, step, s, a, mdp.r(s, a), s2,
                      mdp.is_terminal(s2)});
      s = s2;
      ++step;
    }
    ++episode;
  }
  return data;
}

struct PropositionRow {
  std::uint64_t instance_seed = 0;
  std::string proposition;
  bool pass = false;
  std::string detail;
};

inline void write_proposition_report(std::ostream& os,
                                     const std::vector<PropositionRow>& rows) {
  os << "instance_seed,proposition,pass,detail\n";
  for (const auto& r : rows)
    os << r.instance_seed << ',' << r.proposition << ',' << (r.pass ? 1 : 0)
       << ',' << r.detail << '\n';
}

/// Runs `instances` randomized empirical MDPs through both tabular CRR
/// variants and checks, per variant: exact support containment of every
/// iterate, elementwise Q-improvement across iterates, and per-state
/// V-improvement. Emits one row per (instance, variant, check).
inline std::vector<PropositionRow> proposition_sweep(
    std::uint64_t seed, int instances, int iterations = 10,
    double epsilon = 0.5, double tol = 1e-9,
    const std::function<void(TabularPolicy&)>& corrupt_hook = nullptr) {
  std::vector<PropositionRow> rows;
  for (int i = 0; i < instances; ++i) {
    Rng rng = make_stream(seed, "tabular-sweep", static_cast<std::uint64_t>(i));
    std::uint64_t instance_seed = splitmix64(seed ^ (0x1349ull * (i + 1)));
    std::uniform_int_distribution<int> s_dist(2, 9);   // + terminal = |S| <= 10
    std::uniform_int_distribution<int> a_dist(2, 5);
    std::uniform_int_distribution<long> n_dist(20, 400);
    int ns = s_dist(rng), na = a_dist(rng);
    TabularMdp mdp = random_episodic_mdp(ns, na, 0.9, rng);
    TabularPolicy behavior = random_policy(mdp.n_states, na, rng);
    auto data = sample_episodes(mdp, behavior, n_dist(rng), rng);
    EmpiricalMdp emp =
        build_empirical_mdp(data, mdp.n_states, na, mdp.discount);

    for (CrrVariant variant : {CrrVariant::binary(), CrrVariant::exp(epsilon)}) {
      const char* vname = variant.kind == CrrVariant::Binary ? "binary" : "exp";
      auto iterates = tabular_crr(emp, variant, iterations, corrupt_hook);

      bool support_ok = true;
      for (size_t k = 1; k < iterates.size(); ++k)
        support_ok &= check_support_containment(iterates[k].policy, emp.mu_b);

      double worst_q = 0.0, worst_v = 0.0;
      for (size_t k = 1; k < iterates.size(); ++k) {
        const auto& qo = iterates[k - 1].values;
        const auto& qn = iterates[k].values;
        for (size_t j = 0; j < qo.q.size(); ++j)
          worst_q = std::max(worst_q, qo.q[j] - qn.q[j]);
        for (size_t j = 0; j < qo.v.size(); ++j)
          worst_v = std::max(worst_v, qo.v[j] - qn.v[j]);
      }

      rows.push_back({instance_seed, std::string(vname) + "/support",
                      support_ok, support_ok ? "" : "mass outside supp mu_B"});
      rows.push_back({instance_seed, std::string(vname) + "/q_improvement",
                      worst_q <= tol,
                      "max_decrease=" + format_g17(worst_q)});
      rows.push_back({instance_seed, std::string(vname) + "/v_improvement",
                      worst_v <= tol,
                      "max_decrease=" + format_g17(worst_v)});
    }
  }
  return rows;
}

struct GapTrendResult {
  std::vector<long> sizes;
  Vec median_gaps;
  int inversions = 0;       // steps where the median gap increased
  double shrink_ratio = 1;  // final / first
};

/// Empirical-vs-true Q gap on a fixed 6-state stochastic MDP as the dataset
/// grows. For each size, episodes are rolled under a fixed full-support
/// behavior policy; the reported gap is the median over `n_seeds` replicates
/// of the sup gap under that behavior policy.
inline GapTrendResult gap_trend_experiment(
    std::uint64_t seed, std::vector<long> sizes = {100, 1000, 10000, 100000},
    int n_seeds = 3) {
  Rng setup = make_stream(seed, "gap-trend-setup");
  TabularMdp mdp = random_episodic_mdp(5, 3, 0.9, setup);  // 6 states total
  TabularPolicy behavior = random_policy(mdp.n_states, mdp.n_actions, setup);
  // The gap compares values over the true MDP's full state space, so the
  // policy over the empirical states (without the extra sink) is behavior.
  GapTrendResult res;
  res.sizes = sizes;
  for (size_t i = 0; i < sizes.size(); ++i) {
    Vec gaps;
    for (int rep = 0; rep < n_seeds; ++rep) {
      Rng rng = make_stream(seed, "gap-trend",
                            static_cast<std::uint64_t>(i * 1000 + rep));
      auto data = sample_episodes(mdp, behavior, sizes[i], rng);
      EmpiricalMdp emp = build_empirical_mdp(data, mdp.n_states,
                                             mdp.n_actions, mdp.discount);
      gaps.push_back(epsilon_mdp_gap(mdp, emp, behavior));
    }
    std::sort(gaps.begin(), gaps.end());
    res.median_gaps.push_back(gaps[gaps.size() / 2]);
  }
  for (size_t i = 1; i < res.median_gaps.size(); ++i)
    if (res.median_gaps[i] > res.median_gaps[i - 1]) ++res.inversions;
  res.shrink_ratio = res.median_gaps.back() / res.median_gaps.front();
  return res;
}

}  // namespace crrlab::tabular
