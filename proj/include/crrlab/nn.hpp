#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "crrlab/common.hpp"

/// Minimal differentiable network stack: linear layers, layer normalization,
/// rectifiers and residual blocks, with reverse-mode gradients written out by
/// hand and checked against central finite differences in the test suite.
namespace crrlab::nn {

constexpr double kLayerNormEps = 1e-5;
constexpr double kLogStdMin = -10.0;
constexpr double kLogStdMax = 4.0;
constexpr double kLogTwoPi = 1.8378770664093454836;

// ---------------------------------------------------------------------------
// Parameter layout
// ---------------------------------------------------------------------------

struct ParamEntry {
  std::string name;
  size_t offset = 0;
  int rows = 0;
  int cols = 0;
  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

/// Maps named tensors onto slices of one flat parameter vector. Entries tile
/// the vector exactly, in order, without overlap.
struct Layout {
  std::vector<ParamEntry> entries;
  size_t total = 0;

  size_t add(std::string name, int rows, int cols) {
    entries.push_back({std::move(name), total, rows, cols});
    total += entries.back().size();
    return entries.size() - 1;
  }

  const ParamEntry& find(std::string_view name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw ValidationError("no parameter named '" + std::string(name) + "'");
  }

  void append(const std::string& prefix, const Layout& other) {
    for (const auto& e : other.entries)
      add(prefix + e.name, e.rows, e.cols);
  }
};

// ---------------------------------------------------------------------------
// Dense kernels
// ---------------------------------------------------------------------------

inline void matvec(const double* w, int rows, int cols, const double* x,
                   double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

inline void matvec_t_acc(const double* w, int rows, int cols, const double* dy,
                         double* dx) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<size_t>(r) * cols;
    double g = dy[r];
    for (int c = 0; c < cols; ++c) dx[c] += g * wr[c];
  }
}

inline void outer_acc(double* dw, int rows, int cols, const double* dy,
                      const double* x) {
  for (int r = 0; r < rows; ++r) {
    double* dwr = dw + static_cast<size_t>(r) * cols;
    double g = dy[r];
    for (int c = 0; c < cols; ++c) dwr[c] += g * x[c];
  }
}

// ---------------------------------------------------------------------------
// Residual MLP
// ---------------------------------------------------------------------------

struct ResidualMlpSpec {
  int input_dim = 0;
  int hidden_width = 64;
  int n_blocks = 4;
  int output_dim = 0;

  void validate() const {
    require_config(input_dim > 0 && output_dim > 0, "mlp dims must be positive");
    require_config(hidden_width > 0, "hidden width must be positive");
    require_config(n_blocks >= 1, "need at least one residual block");
  }
};

/// Input linear layer, `n_blocks` residual blocks of
/// linear -> layer-norm -> relu added back onto the skip path, and an output
/// linear layer. Parameters live in a flat vector described by layout().
class ResidualMlp {
 public:
  struct Tape {
    Vec input;
    Vec h_in;                 // after the input linear
    std::vector<Vec> pre;     // per block, before layer-norm
    std::vector<Vec> xhat;    // per block, normalized
    std::vector<Vec> ln_out;  // per block, after the layer-norm affine
    Vec invstd;               // per block
    std::vector<Vec> h;       // per block, block output
  };

  explicit ResidualMlp(const ResidualMlpSpec& spec) : spec_(spec) {
    spec.validate();
    const int h = spec.hidden_width;
    layout_.add("in.w", h, spec.input_dim);
    layout_.add("in.b", h, 1);
    for (int k = 0; k < spec.n_blocks; ++k) {
      std::string p = "block" + std::to_string(k) + ".";
      layout_.add(p + "w", h, h);
      layout_.add(p + "b", h, 1);
      layout_.add(p + "ln.gain", h, 1);
      layout_.add(p + "ln.offset", h, 1);
    }
    layout_.add("out.w", spec.output_dim, h);
    layout_.add("out.b", spec.output_dim, 1);
  }

  const ResidualMlpSpec& spec() const { return spec_; }
  const Layout& layout() const { return layout_; }
  size_t param_count() const { return layout_.total; }

  /// Fan-in-scaled uniform weights, zero biases, unit layer-norm gains.
  void init_params(std::span<double> params, Rng& rng) const {
    for (const auto& e : layout_.entries) {
      double* p = params.data() + e.offset;
      if (e.name.ends_with(".w")) {
        double bound = 1.0 / std::sqrt(static_cast<double>(e.cols));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (size_t i = 0; i < e.size(); ++i) p[i] = u(rng);
      } else if (e.name.ends_with("ln.gain")) {
        std::fill(p, p + e.size(), 1.0);
      } else {
        std::fill(p, p + e.size(), 0.0);
      }
    }
  }

  Vec forward(std::span<const double> params, std::span<const double> input,
              Tape* tape = nullptr) const {
    require(static_cast<int>(input.size()) == spec_.input_dim,
            "mlp input dimension mismatch");
    require_finite(input, "mlp input");
    const int H = spec_.hidden_width;
    const int B = spec_.n_blocks;

    const double* p = params.data();
    Vec h(H);
    matvec(at(p, 0), H, spec_.input_dim, input.data(), h.data());
    add_bias(at(p, 1), h);

    if (tape) {
      tape->input.assign(input.begin(), input.end());
      tape->h_in = h;
      tape->pre.resize(B);
      tape->xhat.resize(B);
      tape->ln_out.resize(B);
      tape->invstd.assign(B, 0.0);
      tape->h.resize(B);
    }

    Vec pre(H), xhat(H), ln(H);
    for (int k = 0; k < B; ++k) {
      const size_t e = 2 + static_cast<size_t>(k) * 4;
      matvec(at(p, e), H, H, h.data(), pre.data());
      add_bias(at(p, e + 1), pre);

      double mu = 0.0;
      for (double x : pre) mu += x;
      mu /= H;
      double var = 0.0;
      for (double x : pre) var += (x - mu) * (x - mu);
      var /= H;
      double invstd = 1.0 / std::sqrt(var + kLayerNormEps);

      const double* gain = at(p, e + 2);
      const double* offset = at(p, e + 3);
      for (int i = 0; i < H; ++i) {
        xhat[i] = (pre[i] - mu) * invstd;
        ln[i] = gain[i] * xhat[i] + offset[i];
        h[i] += ln[i] > 0.0 ? ln[i] : 0.0;  // relu onto the skip path
      }
      if (tape) {
        tape->pre[k] = pre;
        tape->xhat[k] = xhat;
        tape->ln_out[k] = ln;
        tape->invstd[k] = invstd;
        tape->h[k] = h;
      }
    }

    Vec out(spec_.output_dim);
    const size_t eo = 2 + static_cast<size_t>(B) * 4;
    matvec(at(p, eo), spec_.output_dim, H, h.data(), out.data());
    add_bias(at(p, eo + 1), out);
    return out;
  }

  /// Accumulates d(loss)/d(params) into `dparams` given d(loss)/d(output);
  /// optionally also returns d(loss)/d(input).
  void backward(std::span<const double> params, const Tape& tape,
                std::span<const double> dout, std::span<double> dparams,
                Vec* dinput = nullptr) const {
    const int H = spec_.hidden_width;
    const int B = spec_.n_blocks;
    const int O = spec_.output_dim;
    require(static_cast<int>(dout.size()) == O, "output gradient size mismatch");

    const double* p = params.data();
    double* dp = dparams.data();

    const size_t eo = 2 + static_cast<size_t>(B) * 4;
    const Vec& h_last = B > 0 ? tape.h[B - 1] : tape.h_in;
    outer_acc(at_mut(dp, eo), O, H, dout.data(), h_last.data());
    acc(at_mut(dp, eo + 1), dout.data(), O);

    Vec dh(H, 0.0);
    matvec_t_acc(at(p, eo), O, H, dout.data(), dh.data());

    Vec drelu(H), dxhat(H), dpre(H);
    for (int k = B - 1; k >= 0; --k) {
      const size_t e = 2 + static_cast<size_t>(k) * 4;
      const double* gain = at(p, e + 2);
      const Vec& xhat = tape.xhat[k];
      const Vec& ln = tape.ln_out[k];
      for (int i = 0; i < H; ++i) drelu[i] = ln[i] > 0.0 ? dh[i] : 0.0;

      double* dgain = at_mut(dp, e + 2);
      double* doffset = at_mut(dp, e + 3);
      for (int i = 0; i < H; ++i) {
        dgain[i] += drelu[i] * xhat[i];
        doffset[i] += drelu[i];
        dxhat[i] = drelu[i] * gain[i];
      }

      double m_dx = 0.0, m_dxx = 0.0;
      for (int i = 0; i < H; ++i) {
        m_dx += dxhat[i];
        m_dxx += dxhat[i] * xhat[i];
      }
      m_dx /= H;
      m_dxx /= H;
      double invstd = tape.invstd[k];
      for (int i = 0; i < H; ++i)
        dpre[i] = invstd * (dxhat[i] - m_dx - xhat[i] * m_dxx);

      const Vec& block_in = k > 0 ? tape.h[k - 1] : tape.h_in;
      outer_acc(at_mut(dp, e), H, H, dpre.data(), block_in.data());
      acc(at_mut(dp, e + 1), dpre.data(), H);
      // dh flows through the skip path unchanged plus the branch.
      matvec_t_acc(at(p, e), H, H, dpre.data(), dh.data());
    }

    outer_acc(at_mut(dp, 0), H, spec_.input_dim, dh.data(),
              tape.input.data());
    acc(at_mut(dp, 1), dh.data(), H);
    if (dinput) {
      dinput->assign(spec_.input_dim, 0.0);
      matvec_t_acc(at(p, 0), H, spec_.input_dim, dh.data(), dinput->data());
    }
  }

 private:
  const double* at(const double* p, size_t entry) const {
    return p + layout_.entries[entry].offset;
  }
  double* at_mut(double* p, size_t entry) const {
    return p + layout_.entries[entry].offset;
  }
  static void add_bias(const double* b, Vec& v) {
    for (size_t i = 0; i < v.size(); ++i) v[i] += b[i];
  }
  static void acc(double* dst, const double* src, int n) {
    for (int i = 0; i < n; ++i) dst[i] += src[i];
  }

  ResidualMlpSpec spec_;
  Layout layout_;
};

// ---------------------------------------------------------------------------
// Mixture-of-diagonal-Gaussians policy head
// ---------------------------------------------------------------------------

/// A realized policy output. Raw head outputs map onto this via mog_from_raw
/// (which clamps log-stds); hand-built instances may carry any log-stds.
struct MoGPolicy {
  int n_components = 0;
  int action_dim = 0;
  Vec logits;    // K
  Vec weights;   // softmax(logits)
  Vec means;     // K x D
  Vec log_stds;  // K x D
  Vec stds;      // exp(log_stds)
  std::vector<std::uint8_t> clamped;  // K x D, raw log-std outside the range

  double mean_at(int k, int d) const { return means[k * action_dim + d]; }
  double std_at(int k, int d) const { return stds[k * action_dim + d]; }
};

inline size_t mog_raw_size(int n_components, int action_dim) {
  return static_cast<size_t>(n_components) * (1 + 2 * action_dim);
}

/// Interprets a raw head vector [logits | means | log_stds] as a policy.
/// Log-stds are clamped to [kLogStdMin, kLogStdMax]; clamped coordinates are
/// flagged so gradients stop there.
inline MoGPolicy mog_from_raw(std::span<const double> raw, int n_components,
                              int action_dim) {
  require(raw.size() == mog_raw_size(n_components, action_dim),
          "mog head output size mismatch");
  MoGPolicy p;
  p.n_components = n_components;
  p.action_dim = action_dim;
  p.logits.assign(raw.begin(), raw.begin() + n_components);
  p.weights = softmax(p.logits);
  const size_t kd = static_cast<size_t>(n_components) * action_dim;
  p.means.assign(raw.begin() + n_components, raw.begin() + n_components + kd);
  p.log_stds.resize(kd);
  p.stds.resize(kd);
  p.clamped.resize(kd);
  for (size_t i = 0; i < kd; ++i) {
    double s = raw[n_components + kd + i];
    p.clamped[i] = (s <= kLogStdMin || s >= kLogStdMax) ? 1 : 0;
    p.log_stds[i] = std::clamp(s, kLogStdMin, kLogStdMax);
    p.stds[i] = std::exp(p.log_stds[i]);
  }
  return p;
}

/// Builds a policy directly from mixture parameters, without clamping.
inline MoGPolicy mog_direct(Vec logits, Vec means, Vec log_stds,
                            int action_dim) {
  MoGPolicy p;
  p.n_components = static_cast<int>(logits.size());
  p.action_dim = action_dim;
  p.logits = std::move(logits);
  p.weights = softmax(p.logits);
  p.means = std::move(means);
  p.log_stds = std::move(log_stds);
  p.stds.resize(p.log_stds.size());
  p.clamped.assign(p.log_stds.size(), 0);
  for (size_t i = 0; i < p.log_stds.size(); ++i)
    p.stds[i] = std::exp(p.log_stds[i]);
  return p;
}

namespace detail {
inline Vec mog_component_log_densities(const MoGPolicy& p,
                                       std::span<const double> a) {
  Vec lk(p.n_components);
  for (int k = 0; k < p.n_components; ++k) {
    double l = std::log(p.weights[k]);
    for (int d = 0; d < p.action_dim; ++d) {
      double z = (a[d] - p.mean_at(k, d)) / p.std_at(k, d);
      l += -0.5 * kLogTwoPi - p.log_stds[k * p.action_dim + d] - 0.5 * z * z;
    }
    lk[k] = l;
  }
  return lk;
}
}  // namespace detail

/// log sum_k w_k N(action; mu_k, diag sigma_k^2), stabilized by log-sum-exp.
inline double mog_log_prob(const MoGPolicy& p, std::span<const double> action) {
  require(static_cast<int>(action.size()) == p.action_dim,
          "action dimension mismatch");
  require_finite(action, "mog action");
  return logsumexp(detail::mog_component_log_densities(p, action));
}

/// Gradient of mog_log_prob with respect to the raw head vector
/// [logits | means | log_stds]; clamped log-std coordinates get zero.
inline Vec mog_log_prob_grad_raw(const MoGPolicy& p,
                                 std::span<const double> action) {
  const int K = p.n_components;
  const int D = p.action_dim;
  Vec lk = detail::mog_component_log_densities(p, action);
  double lse = logsumexp(lk);
  Vec grad(mog_raw_size(K, D), 0.0);
  for (int k = 0; k < K; ++k) {
    double resp = std::exp(lk[k] - lse);
    grad[k] = resp - p.weights[k];
    for (int d = 0; d < D; ++d) {
      size_t i = static_cast<size_t>(k) * D + d;
      double z = (action[d] - p.means[i]) / p.stds[i];
      grad[K + i] = resp * z / p.stds[i];
      grad[K + K * static_cast<size_t>(D) + i] =
          p.clamped[i] ? 0.0 : resp * (z * z - 1.0);
    }
  }
  return grad;
}

/// Component drawn from the mixture weights, then a diagonal Gaussian draw.
inline Vec mog_sample(const MoGPolicy& p, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  int k = p.n_components - 1;
  double acc = 0.0;
  for (int j = 0; j < p.n_components; ++j) {
    acc += p.weights[j];
    if (u <= acc) {
      k = j;
      break;
    }
  }
  Vec a(p.action_dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int d = 0; d < p.action_dim; ++d)
    a[d] = p.mean_at(k, d) + p.std_at(k, d) * gauss(rng);
  return a;
}

/// Noise-free action: the mean of the highest-weight component
/// (ties resolved toward the lowest index).
inline Vec mog_deterministic(const MoGPolicy& p) {
  int best = 0;
  for (int k = 1; k < p.n_components; ++k)
    if (p.weights[k] > p.weights[best]) best = k;
  Vec a(p.action_dim);
  for (int d = 0; d < p.action_dim; ++d) a[d] = p.mean_at(best, d);
  return a;
}

// ---------------------------------------------------------------------------
// Checkpoints: plain-text layout manifest followed by the flat parameter
// vector as raw little-endian 64-bit floats.
// ---------------------------------------------------------------------------

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  Layout layout;
  Vec params;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  require(ckpt.params.size() == ckpt.layout.total,
          "checkpoint params/layout size mismatch");
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open " + path + " for writing");
  os << "crrlab-checkpoint 1\n";
  for (const auto& [k, v] : ckpt.meta) os << "meta " << k << ' ' << v << '\n';
  os << "params " << ckpt.layout.entries.size() << ' ' << ckpt.layout.total
     << '\n';
  for (const auto& e : ckpt.layout.entries)
    os << e.name << ' ' << e.offset << ' ' << e.rows << ' ' << e.cols << '\n';
  os << "end\n";
  os.write(reinterpret_cast<const char*>(ckpt.params.data()),
           static_cast<std::streamsize>(ckpt.params.size() * sizeof(double)));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) &&
              line == "crrlab-checkpoint 1",
          "not a crrlab checkpoint: " + path);
  Checkpoint ckpt;
  size_t n_entries = 0, total = 0;
  while (std::getline(is, line)) {
    if (line == "end") break;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "meta") {
      std::string k, v;
      ss >> k >> v;
      ckpt.meta.emplace_back(k, v);
    } else if (tag == "params") {
      ss >> n_entries >> total;
    } else {
      ParamEntry e;
      e.name = tag;
      ss >> e.offset >> e.rows >> e.cols;
      require(static_cast<bool>(ss), "checkpoint manifest parse error");
      ckpt.layout.entries.push_back(e);
    }
  }
  require(ckpt.layout.entries.size() == n_entries,
          "checkpoint manifest entry count mismatch");
  ckpt.layout.total = total;
  ckpt.params.resize(total);
  is.read(reinterpret_cast<char*>(ckpt.params.data()),
          static_cast<std::streamsize>(total * sizeof(double)));
  require(static_cast<size_t>(is.gcount()) == total * sizeof(double),
          "checkpoint payload truncated");
  return ckpt;
}

inline std::string checkpoint_meta(const Checkpoint& c, const std::string& key) {
  for (const auto& [k, v] : c.meta)
    if (k == key) return v;
  throw ValidationError("checkpoint missing meta key '" + key + "'");
}

}  // namespace crrlab::nn
