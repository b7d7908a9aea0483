#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "crrlab/common.hpp"

namespace crrlab::distributional {

/// Fixed, uniformly spaced support for categorical value distributions.
struct AtomGrid {
  int n_atoms = 21;
  double v_min = 0.0;
  double v_max = 100.0;

  double spacing() const { return (v_max - v_min) / (n_atoms - 1); }
  double atom(int i) const { return v_min + spacing() * i; }

  void validate() const {
    require_config(n_atoms >= 2, "atom grid needs at least 2 atoms");
    require_config(v_max > v_min, "atom grid needs v_max > v_min");
  }
};

/// Probabilities over the atom grid. Callers own normalization; this checks it.
inline void validate_distribution(std::span<const double> p, double tol = 1e-10) {
  double s = 0.0;
  for (double x : p) {
    require(x >= 0.0, "distribution has a negative probability");
    s += x;
  }
  require(std::abs(s - 1.0) <= tol, "distribution does not sum to 1");
}

/// Scalar value of a distribution: sum_i p_i * z_i.
inline double mean_value(const AtomGrid& grid, std::span<const double> p) {
  double s = 0.0;
  for (int i = 0; i < grid.n_atoms; ++i) s += p[i] * grid.atom(i);
  return s;
}

/// Backup of a value distribution through one transition: shift each atom to
/// reward + discount * z_i and split its mass linearly between the two
/// neighboring grid atoms. Mass landing outside [v_min, v_max] goes to the
/// boundary atom. Total mass is conserved exactly up to rounding.
inline Vec project_target(const AtomGrid& grid, double reward, double discount,
                          std::span<const double> next_dist) {
  require_finite(reward, "project_target reward");
  const int n = grid.n_atoms;
  const double dz = grid.spacing();
  Vec out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double p = next_dist[i];
    if (p == 0.0) continue;
    double z = reward + discount * grid.atom(i);
    z = std::clamp(z, grid.v_min, grid.v_max);
    double pos = (z - grid.v_min) / dz;
    int lo = static_cast<int>(std::floor(pos));
    if (lo >= n - 1) {
      out[n - 1] += p;
      continue;
    }
    double frac = pos - lo;
    out[lo] += p * (1.0 - frac);
    out[lo + 1] += p * frac;
  }
  return out;
}

struct DivergenceResult {
  double loss = 0.0;
  Vec grad;  // with respect to the predicted logits
};

/// Cross-entropy between a target distribution and softmax(pred_logits).
/// The gradient with respect to the logits is softmax(pred) - target.
inline DivergenceResult divergence(std::span<const double> pred_logits,
                                   std::span<const double> target) {
  const size_t n = pred_logits.size();
  Vec p = softmax(pred_logits);
  double lse = logsumexp(pred_logits);
  DivergenceResult r;
  r.grad.resize(n);
  for (size_t i = 0; i < n; ++i) {
    if (target[i] > 0.0) r.loss -= target[i] * (pred_logits[i] - lse);
    r.grad[i] = p[i] - target[i];
  }
  return r;
}

/// Elementwise average of several distributions (expectation over sampled
/// next actions, taken before projection).
inline Vec mixture_target(const std::vector<Vec>& dists) {
  require(!dists.empty(), "mixture_target needs at least one distribution");
  const size_t n = dists.front().size();
  Vec out(n, 0.0);
  for (const Vec& d : dists) {
    require(d.size() == n, "mixture_target: distribution size mismatch");
    for (size_t i = 0; i < n; ++i) out[i] += d[i];
  }
  for (double& x : out) x /= static_cast<double>(dists.size());
  return out;
}

}  // namespace crrlab::distributional
