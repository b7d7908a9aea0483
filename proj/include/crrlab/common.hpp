#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace crrlab {

using Vec = std::vector<double>;

/// Bad user-supplied data (files, datasets, dimensions).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Bad experiment/learner configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

inline void require_config(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

inline void require_finite(std::span<const double> xs, const std::string& what) {
  for (double x : xs)
    if (!std::isfinite(x)) throw NumericError(what + ": non-finite value");
}

inline void require_finite(double x, const std::string& what) {
  if (!std::isfinite(x)) throw NumericError(what + ": non-finite value");
}

// ---------------------------------------------------------------------------
// Seeded random streams.
//
// Every source of randomness in the project is an mt19937_64 stream derived
// from one root seed and a stream name (plus an optional index, e.g. the
// episode number). Derivation is a 64-bit FNV-1a hash of the name mixed with
// the seed through splitmix64, so toggling one component of an experiment
// never shifts the draws seen by another.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline Rng make_stream(std::uint64_t root_seed, std::string_view name,
                       std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(root_seed ^ fnv1a64(name));
  s = splitmix64(s ^ (0x632be59bd9b4e019ull * (index + 1)));
  return Rng(s);
}

// ---------------------------------------------------------------------------
// Small numeric helpers shared across modules.
// ---------------------------------------------------------------------------

inline double logsumexp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline void softmax_inplace(std::span<double> xs) {
  double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double& x : xs) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : xs) x /= s;
}

inline Vec softmax(std::span<const double> xs) {
  Vec out(xs.begin(), xs.end());
  softmax_inplace(out);
  return out;
}

/// Formats a double with 17 significant digits; round-trips IEEE754 exactly.
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double stddev_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace crrlab
