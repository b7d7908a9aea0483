#pragma once

#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "crrlab/common.hpp"

/// Offline experience: immutable episode-structured datasets, the line-based
/// text interchange format, uniform transition sampling and K-step sequence
/// windows.
namespace crrlab::data {

struct Step {
  Vec obs;
  Vec act;
  double reward = 0.0;
  bool terminal = false;
};

struct EpisodeRecord {
  long episode_id = 0;
  std::vector<Step> steps;
};

/// View of one logged transition. `next_obs` is the following step's
/// observation and is empty on terminal transitions (the bootstrap horizon
/// ends there, so no successor observation is stored).
struct Transition {
  std::span<const double> obs;
  std::span<const double> act;
  double reward = 0.0;
  std::span<const double> next_obs;
  bool terminal = false;
  long episode_id = 0;
  long step_index = 0;
};

/// A K-step slice of one episode plus the remaining discounted return from
/// its first step. `bootstrap_obs` is present unless the window runs into
/// the episode's terminal step.
struct SequenceWindow {
  std::vector<Vec> obs;  // steps() entries
  std::vector<Vec> act;
  Vec rewards;
  std::optional<Vec> bootstrap_obs;
  double mc_return = 0.0;
  long episode_id = 0;
  long start_step = 0;

  int steps() const { return static_cast<int>(rewards.size()); }

  /// The window's first transition, for one-step critic targets.
  Transition first_transition() const {
    Transition t;
    t.obs = obs[0];
    t.act = act[0];
    t.reward = rewards[0];
    t.episode_id = episode_id;
    t.step_index = start_step;
    if (steps() > 1) {
      t.next_obs = obs[1];
      t.terminal = false;
    } else if (bootstrap_obs) {
      t.next_obs = *bootstrap_obs;
      t.terminal = false;
    } else {
      t.terminal = true;
    }
    return t;
  }
};

/// Episodes flattened into contiguous per-field arrays. Immutable once
/// loaded; concurrent readers are safe as long as each holds its own rng.
///
/// Every episode must end with a terminal step: the on-disk format stores one
/// observation per step, so a successor observation exists exactly for
/// non-terminal steps (it is the next line's observation).
class Dataset {
 public:
  Dataset(int obs_dim, int act_dim, bool discrete)
      : obs_dim_(obs_dim), act_dim_(act_dim), discrete_(discrete) {
    require(obs_dim > 0 && act_dim > 0, "dataset dims must be positive");
  }

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  bool discrete() const { return discrete_; }
  size_t size() const { return rewards_.size(); }
  size_t n_episodes() const { return episode_start_.size(); }

  void add_episode(const EpisodeRecord& ep) {
    require(!ep.steps.empty(), "episode has no steps");
    require(ep.steps.back().terminal,
            "episode " + std::to_string(ep.episode_id) +
                " does not end with a terminal step");
    for (size_t i = 0; i < ep.steps.size(); ++i) {
      const Step& st = ep.steps[i];
      require(static_cast<int>(st.obs.size()) == obs_dim_ &&
                  static_cast<int>(st.act.size()) == act_dim_,
              "episode step dimension mismatch");
      require(!st.terminal || i + 1 == ep.steps.size(),
              "terminal step must be the episode's last");
      require_finite(st.reward, "step reward");
      obs_.insert(obs_.end(), st.obs.begin(), st.obs.end());
      act_.insert(act_.end(), st.act.begin(), st.act.end());
      rewards_.push_back(st.reward);
      terminal_.push_back(st.terminal ? 1 : 0);
      episode_id_.push_back(ep.episode_id);
      step_index_.push_back(static_cast<long>(i));
    }
    episode_start_.push_back(rewards_.size() - ep.steps.size());
  }

  std::span<const double> obs_at(size_t i) const {
    return {obs_.data() + i * obs_dim_, static_cast<size_t>(obs_dim_)};
  }
  std::span<const double> act_at(size_t i) const {
    return {act_.data() + i * act_dim_, static_cast<size_t>(act_dim_)};
  }
  double reward_at(size_t i) const { return rewards_[i]; }
  bool terminal_at(size_t i) const { return terminal_[i] != 0; }
  long episode_id_at(size_t i) const { return episode_id_[i]; }
  long step_index_at(size_t i) const { return step_index_[i]; }

  Transition transition(size_t i) const {
    Transition t;
    t.obs = obs_at(i);
    t.act = act_at(i);
    t.reward = rewards_[i];
    t.terminal = terminal_[i] != 0;
    if (!t.terminal) t.next_obs = obs_at(i + 1);
    t.episode_id = episode_id_[i];
    t.step_index = step_index_[i];
    return t;
  }

  /// Uniform with replacement over all logged transitions.
  std::vector<Transition> sample_batch(int batch_size, Rng& rng) const {
    require(size() > 0, "cannot sample from an empty dataset");
    require(static_cast<size_t>(batch_size) <= size(),
            "batch size exceeds dataset size");
    std::uniform_int_distribution<size_t> dist(0, size() - 1);
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) batch.push_back(transition(dist(rng)));
    return batch;
  }

  size_t max_episode_len() const {
    size_t best = 0;
    for (size_t e = 0; e < episode_start_.size(); ++e)
      best = std::max(best, episode_len(e));
    return best;
  }

  /// Uniform over all window start positions. A window covers up to K steps
  /// of one episode; windows that run into the terminal step carry no
  /// bootstrap observation (the bootstrap horizon truncates there).
  std::vector<SequenceWindow> sample_sequences(int k, int batch_size,
                                               double discount,
                                               Rng& rng) const {
    require(size() > 0, "cannot sample from an empty dataset");
    require(k >= 1, "window length must be >= 1");
    require(static_cast<size_t>(k) <= max_episode_len(),
            "window length exceeds every episode length");
    std::uniform_int_distribution<size_t> dist(0, size() - 1);
    std::vector<SequenceWindow> batch;
    batch.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i)
      batch.push_back(window_at(dist(rng), k, discount));
    return batch;
  }

  SequenceWindow window_at(size_t start, int k, double discount) const {
    const size_t ep = episode_of(start);
    const size_t ep_begin = episode_start_[ep];
    const size_t ep_end = ep_begin + episode_len(ep);  // one past last step

    SequenceWindow w;
    w.episode_id = episode_id_[start];
    w.start_step = step_index_[start];
    size_t last = std::min(start + static_cast<size_t>(k), ep_end);
    for (size_t i = start; i < last; ++i) {
      w.obs.emplace_back(obs_at(i).begin(), obs_at(i).end());
      w.act.emplace_back(act_at(i).begin(), act_at(i).end());
      w.rewards.push_back(rewards_[i]);
    }
    if (!terminal_[last - 1])
      w.bootstrap_obs = Vec(obs_at(last).begin(), obs_at(last).end());

    double acc = 0.0, g = 1.0;
    for (size_t i = start; i < ep_end; ++i) {
      acc += g * rewards_[i];
      g *= discount;
    }
    w.mc_return = acc;
    return w;
  }

  std::vector<EpisodeRecord> episodes() const {
    std::vector<EpisodeRecord> out;
    for (size_t e = 0; e < episode_start_.size(); ++e) {
      EpisodeRecord ep;
      ep.episode_id = episode_id_[episode_start_[e]];
      for (size_t i = episode_start_[e]; i < episode_start_[e] + episode_len(e);
           ++i) {
        ep.steps.push_back({Vec(obs_at(i).begin(), obs_at(i).end()),
                            Vec(act_at(i).begin(), act_at(i).end()),
                            rewards_[i], terminal_[i] != 0});
      }
      out.push_back(std::move(ep));
    }
    return out;
  }

  bool operator==(const Dataset& other) const {
    return obs_dim_ == other.obs_dim_ && act_dim_ == other.act_dim_ &&
           discrete_ == other.discrete_ && obs_ == other.obs_ &&
           act_ == other.act_ && rewards_ == other.rewards_ &&
           terminal_ == other.terminal_ && episode_id_ == other.episode_id_ &&
           step_index_ == other.step_index_;
  }

 private:
  size_t episode_of(size_t i) const {
    // episode_start_ is increasing; binary search for the owning episode.
    size_t lo = 0, hi = episode_start_.size() - 1;
    while (lo < hi) {
      size_t mid = (lo + hi + 1) / 2;
      if (episode_start_[mid] <= i)
        lo = mid;
      else
        hi = mid - 1;
    }
    return lo;
  }
  size_t episode_len(size_t e) const {
    size_t end = e + 1 < episode_start_.size() ? episode_start_[e + 1]
                                               : rewards_.size();
    return end - episode_start_[e];
  }

  int obs_dim_;
  int act_dim_;
  bool discrete_;
  std::vector<double> obs_;
  std::vector<double> act_;
  Vec rewards_;
  std::vector<std::uint8_t> terminal_;
  std::vector<long> episode_id_;
  std::vector<long> step_index_;
  std::vector<size_t> episode_start_;
};

// ---------------------------------------------------------------------------
// On-disk format. Header `version=1,obs_dim=<n>,act_dim=<n>,discrete=<0|1>`,
// then one step per line: `episode_id,step_index,obs...,act...,reward,
// terminal`, reals with 17 significant digits (exact 64-bit round trip).
// ---------------------------------------------------------------------------

inline void write_dataset(std::ostream& os, const Dataset& d) {
  os << "version=1,obs_dim=" << d.obs_dim() << ",act_dim=" << d.act_dim()
     << ",discrete=" << (d.discrete() ? 1 : 0) << '\n';
  for (size_t i = 0; i < d.size(); ++i) {
    os << d.episode_id_at(i) << ',' << d.step_index_at(i);
    for (double x : d.obs_at(i)) os << ',' << format_g17(x);
    for (double x : d.act_at(i)) os << ',' << format_g17(x);
    os << ',' << format_g17(d.reward_at(i)) << ','
       << (d.terminal_at(i) ? 1 : 0) << '\n';
  }
}

inline void write_dataset(const std::string& path, const Dataset& d) {
  std::ofstream os(path);
  require(os.good(), "cannot open " + path + " for writing");
  write_dataset(os, d);
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_real(const std::string& s, long line_no) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ValidationError("dataset parse error at line " +
                          std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}
}  // namespace detail

inline Dataset read_dataset(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "dataset: missing header");
  int obs_dim = 0, act_dim = 0, discrete = 0, version = 0;
  if (std::sscanf(line.c_str(), "version=%d,obs_dim=%d,act_dim=%d,discrete=%d",
                  &version, &obs_dim, &act_dim, &discrete) != 4 ||
      version != 1)
    throw ValidationError("dataset: unexpected header '" + line + "'");

  Dataset d(obs_dim, act_dim, discrete != 0);
  EpisodeRecord ep;
  bool have_episode = false;
  long line_no = 1;
  const size_t n_fields = 2 + obs_dim + act_dim + 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv(line);
    if (fields.size() != n_fields)
      throw ValidationError("dataset parse error at line " +
                            std::to_string(line_no) + ": expected " +
                            std::to_string(n_fields) + " fields, got " +
                            std::to_string(fields.size()));
    long episode_id = std::strtol(fields[0].c_str(), nullptr, 10);
    if (have_episode && episode_id != ep.episode_id) {
      d.add_episode(ep);
      ep = EpisodeRecord{};
      have_episode = false;
    }
    if (!have_episode) {
      ep.episode_id = episode_id;
      have_episode = true;
    }
    Step st;
    size_t f = 2;
    st.obs.resize(obs_dim);
    for (int i = 0; i < obs_dim; ++i)
      st.obs[i] = detail::parse_real(fields[f++], line_no);
    st.act.resize(act_dim);
    for (int i = 0; i < act_dim; ++i)
      st.act[i] = detail::parse_real(fields[f++], line_no);
    st.reward = detail::parse_real(fields[f++], line_no);
    st.terminal = fields[f] == "1";
    ep.steps.push_back(std::move(st));
  }
  if (have_episode) d.add_episode(ep);
  return d;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open " + path);
  return read_dataset(is);
}

/// Mean over episodes of the discounted return from the first step. Unlike
/// the raw return sum this is sensitive to how fast sparse rewards arrive.
inline double mean_discounted_return(const Dataset& d, double discount) {
  if (d.size() == 0) return 0.0;
  double total = 0.0;
  long episodes = 0;
  double acc = 0.0, g = 1.0;
  for (size_t i = 0; i < d.size(); ++i) {
    acc += g * d.reward_at(i);
    g *= discount;
    if (d.terminal_at(i)) {
      total += acc;
      ++episodes;
      acc = 0.0;
      g = 1.0;
    }
  }
  return total / static_cast<double>(episodes);
}

/// Applies a per-step observation transform (e.g. one-hot encoding of a
/// discrete state index) and returns the transformed dataset.
inline Dataset encode_observations(
    const Dataset& d, int encoded_dim,
    const std::function<void(std::span<const double>, std::span<double>)>&
        encode) {
  Dataset out(encoded_dim, d.act_dim(), false);
  for (EpisodeRecord& ep : d.episodes()) {
    for (Step& st : ep.steps) {
      Vec enc(encoded_dim, 0.0);
      encode(st.obs, enc);
      st.obs = std::move(enc);
    }
    out.add_episode(ep);
  }
  return out;
}

}  // namespace crrlab::data
