#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "crrlab/data.hpp"

namespace data = crrlab::data;
using crrlab::Rng;
using crrlab::Vec;

namespace {

data::EpisodeRecord random_episode(long id, int n_steps, int obs_dim,
                                   int act_dim, Rng& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  data::EpisodeRecord ep;
  ep.episode_id = id;
  for (int i = 0; i < n_steps; ++i) {
    data::Step st;
    st.obs.resize(obs_dim);
    st.act.resize(act_dim);
    for (double& x : st.obs) x = u(rng);
    for (double& x : st.act) x = u(rng);
    st.reward = u(rng);
    st.terminal = i + 1 == n_steps;
    ep.steps.push_back(std::move(st));
  }
  return ep;
}

data::Dataset random_dataset(int episodes, int steps, Rng& rng,
                             int obs_dim = 2, int act_dim = 1) {
  data::Dataset d(obs_dim, act_dim, false);
  for (int e = 0; e < episodes; ++e)
    d.add_episode(random_episode(e, steps, obs_dim, act_dim, rng));
  return d;
}

std::string serialized(const data::Dataset& d) {
  std::stringstream ss;
  data::write_dataset(ss, d);
  return ss.str();
}

}  // namespace

// --- file format ---------------------------------------------------------------

TEST(DatasetIo, EmptyDatasetIsHeaderOnly) {
  data::Dataset d(2, 1, false);
  std::string text = serialized(d);
  EXPECT_EQ(text, "version=1,obs_dim=2,act_dim=1,discrete=0\n");
  std::stringstream ss(text);
  data::Dataset back = data::read_dataset(ss);
  EXPECT_EQ(back.size(), 0u);
  EXPECT_TRUE(back == d);
}

TEST(DatasetIo, SingleTransitionRoundTripsBitwise) {
  data::Dataset d(2, 1, false);
  data::EpisodeRecord ep;
  ep.episode_id = 0;
  ep.steps.push_back({{0.1, -1.0 / 3.0}, {0.7}, 1e-17, true});
  d.add_episode(ep);
  std::string text = serialized(d);
  std::stringstream ss(text);
  data::Dataset back = data::read_dataset(ss);
  EXPECT_TRUE(back == d);
  EXPECT_EQ(serialized(back), text);
}

TEST(DatasetIo, RandomDatasetRoundTripsBitwise) {
  Rng rng(1);
  data::Dataset d = random_dataset(20, 7, rng);
  std::stringstream ss(serialized(d));
  data::Dataset back = data::read_dataset(ss);
  EXPECT_TRUE(back == d);
  EXPECT_EQ(serialized(back), serialized(d));
}

TEST(DatasetIo, AwkwardRealsRoundTripExactly) {
  data::Dataset d(1, 1, false);
  data::EpisodeRecord ep;
  ep.episode_id = 3;
  Vec values = {1.0 / 3.0, 1e-300, -1e300, 5e-324, 0.1 + 0.2};
  for (size_t i = 0; i < values.size(); ++i)
    ep.steps.push_back(
        {{values[i]}, {-values[i]}, values[i], i + 1 == values.size()});
  d.add_episode(ep);
  std::stringstream ss(serialized(d));
  data::Dataset back = data::read_dataset(ss);
  EXPECT_TRUE(back == d);
}

TEST(DatasetIo, ParseErrorReportsLineNumber) {
  std::stringstream ss(
      "version=1,obs_dim=1,act_dim=1,discrete=0\n"
      "0,0,1.0,2.0,0.5,0\n"
      "0,1,not_a_number,2.0,0.5,1\n");
  try {
    data::read_dataset(ss);
    FAIL() << "expected parse error";
  } catch (const crrlab::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(DatasetIo, WrongFieldCountIsAnError) {
  std::stringstream ss(
      "version=1,obs_dim=2,act_dim=1,discrete=0\n"
      "0,0,1.0,2.0,0.5,1\n");  // missing one obs field
  EXPECT_THROW(data::read_dataset(ss), crrlab::ValidationError);
}

TEST(DatasetIo, RejectsUnknownHeader) {
  std::stringstream ss("version=2,obs_dim=1,act_dim=1,discrete=0\n");
  EXPECT_THROW(data::read_dataset(ss), crrlab::ValidationError);
}

TEST(Dataset, EpisodesMustEndTerminal) {
  data::Dataset d(1, 1, false);
  data::EpisodeRecord ep;
  ep.episode_id = 0;
  ep.steps.push_back({{0.0}, {0.0}, 0.0, false});
  EXPECT_THROW(d.add_episode(ep), crrlab::ValidationError);
}

TEST(Dataset, RejectsDimensionMismatch) {
  data::Dataset d(2, 1, false);
  data::EpisodeRecord ep;
  ep.episode_id = 0;
  ep.steps.push_back({{0.0}, {0.0}, 0.0, true});  // obs_dim should be 2
  EXPECT_THROW(d.add_episode(ep), crrlab::ValidationError);
}

// --- transitions ----------------------------------------------------------------

TEST(Dataset, TransitionsChainWithinEpisodes) {
  Rng rng(2);
  data::Dataset d = random_dataset(5, 6, rng);
  for (size_t i = 0; i < d.size(); ++i) {
    data::Transition t = d.transition(i);
    if (!t.terminal) {
      ASSERT_EQ(t.next_obs.size(), t.obs.size());
      EXPECT_EQ(t.episode_id, d.episode_id_at(i + 1));
    } else {
      EXPECT_TRUE(t.next_obs.empty());
    }
  }
}

// --- sampling -------------------------------------------------------------------

TEST(SampleBatch, SingleElementDataset) {
  Rng rng(3);
  data::Dataset d = random_dataset(1, 1, rng);
  Rng srng(4);
  auto batch = d.sample_batch(1, srng);
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch[0].episode_id, 0);
  EXPECT_EQ(batch[0].step_index, 0);
}

TEST(SampleBatch, UniformFrequencies) {
  Rng rng(5);
  data::Dataset d = random_dataset(10, 1, rng);  // 10 items
  Rng srng(6);
  const int n = 1000000;
  std::vector<long> counts(10, 0);
  auto batch = d.sample_batch(1, srng);
  for (int i = 0; i < n; ++i) {
    auto b = d.sample_batch(1, srng);
    ++counts[b[0].episode_id];
  }
  double sigma = std::sqrt(0.1 * 0.9 / n);
  for (long c : counts)
    EXPECT_NEAR(static_cast<double>(c) / n, 0.1, 3 * sigma);
}

TEST(SampleBatch, SeedReproducible) {
  Rng rng(7);
  data::Dataset d = random_dataset(8, 5, rng);
  Rng a(8), b(8);
  for (int i = 0; i < 50; ++i) {
    auto ba = d.sample_batch(4, a);
    auto bb = d.sample_batch(4, b);
    for (int j = 0; j < 4; ++j) {
      EXPECT_EQ(ba[j].episode_id, bb[j].episode_id);
      EXPECT_EQ(ba[j].step_index, bb[j].step_index);
    }
  }
}

TEST(SampleBatch, ErrorsOnEmptyOrOversized) {
  data::Dataset empty(1, 1, false);
  Rng rng(9);
  EXPECT_THROW(empty.sample_batch(1, rng), crrlab::ValidationError);
  data::Dataset d = random_dataset(1, 2, rng);
  EXPECT_THROW(d.sample_batch(3, rng), crrlab::ValidationError);
}

// --- sequence windows -------------------------------------------------------------

TEST(SequenceWindows, ExactlyOneFullWindowPerFullLengthEpisode) {
  Rng rng(10);
  data::Dataset d = random_dataset(1, 5, rng);
  int full = 0;
  for (size_t start = 0; start < d.size(); ++start) {
    auto w = d.window_at(start, 5, 0.9);
    if (w.steps() == 5) ++full;
    EXPECT_EQ(w.steps(), static_cast<int>(5 - start));
  }
  EXPECT_EQ(full, 1);
}

TEST(SequenceWindows, TerminalTruncatesBootstrap) {
  Rng rng(11);
  data::Dataset d = random_dataset(1, 5, rng);
  auto w = d.window_at(3, 5, 0.9);
  EXPECT_EQ(w.steps(), 2);
  EXPECT_FALSE(w.bootstrap_obs.has_value());
  auto w2 = d.window_at(0, 3, 0.9);
  EXPECT_EQ(w2.steps(), 3);
  ASSERT_TRUE(w2.bootstrap_obs.has_value());
}

TEST(SequenceWindows, McReturnMatchesBruteForce) {
  Rng rng(12);
  data::Dataset d = random_dataset(3, 9, rng);
  const double g = 0.93;
  Rng srng(13);
  auto windows = d.sample_sequences(4, 64, g, srng);
  for (const auto& w : windows) {
    // Recompute the remaining discounted return from the raw episode.
    size_t base = 0;
    while (d.episode_id_at(base) != w.episode_id) ++base;
    double want = 0.0, gp = 1.0;
    for (size_t i = base + w.start_step; i < d.size(); ++i) {
      want += gp * d.reward_at(i);
      gp *= g;
      if (d.terminal_at(i)) break;
    }
    EXPECT_NEAR(w.mc_return, want, 1e-12);
  }
}

TEST(SequenceWindows, NeverCrossEpisodes) {
  Rng rng(14);
  data::Dataset d = random_dataset(6, 4, rng);
  Rng srng(15);
  auto windows = d.sample_sequences(3, 200, 0.9, srng);
  for (const auto& w : windows) {
    EXPECT_LE(w.start_step + w.steps(), 4);
    // Window observations must match the episode's own steps.
    size_t base = 0;
    while (d.episode_id_at(base) != w.episode_id) ++base;
    for (int i = 0; i < w.steps(); ++i) {
      auto obs = d.obs_at(base + w.start_step + i);
      for (size_t j = 0; j < obs.size(); ++j) EXPECT_EQ(w.obs[i][j], obs[j]);
    }
  }
}

TEST(SequenceWindows, WindowLongerThanEveryEpisodeIsAnError) {
  Rng rng(16);
  data::Dataset d = random_dataset(3, 4, rng);
  Rng srng(17);
  EXPECT_THROW(d.sample_sequences(5, 2, 0.9, srng), crrlab::ValidationError);
}

TEST(SequenceWindows, FirstTransitionAgreesWithDataset) {
  Rng rng(18);
  data::Dataset d = random_dataset(4, 5, rng);
  for (size_t i = 0; i < d.size(); ++i) {
    auto w = d.window_at(i, 3, 0.9);
    data::Transition from_window = w.first_transition();
    data::Transition direct = d.transition(i);
    EXPECT_EQ(from_window.reward, direct.reward);
    EXPECT_EQ(from_window.terminal, direct.terminal);
    if (!direct.terminal) {
      ASSERT_EQ(from_window.next_obs.size(), direct.next_obs.size());
      for (size_t j = 0; j < direct.next_obs.size(); ++j)
        EXPECT_EQ(from_window.next_obs[j], direct.next_obs[j]);
    }
  }
}

// --- encoding -------------------------------------------------------------------

TEST(EncodeObservations, AppliesTransformPerStep) {
  data::Dataset d(1, 1, true);
  data::EpisodeRecord ep;
  ep.episode_id = 0;
  ep.steps.push_back({{2.0}, {1.0}, 0.0, false});
  ep.steps.push_back({{0.0}, {0.0}, 1.0, true});
  d.add_episode(ep);
  data::Dataset enc = data::encode_observations(
      d, 3, [](std::span<const double> in, std::span<double> out) {
        out[static_cast<int>(in[0])] = 1.0;
      });
  EXPECT_EQ(enc.obs_dim(), 3);
  EXPECT_EQ(enc.obs_at(0)[2], 1.0);
  EXPECT_EQ(enc.obs_at(1)[0], 1.0);
  EXPECT_EQ(enc.act_at(0)[0], 1.0);  // actions untouched
}
