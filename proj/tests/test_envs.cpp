#include <gtest/gtest.h>

#include <cmath>

#include "crrlab/envs.hpp"

namespace envs = crrlab::envs;
namespace tab = crrlab::tabular;
using crrlab::Rng;
using crrlab::Vec;

namespace {

envs::ActionFn constant_action(double a) {
  return [a](std::span<const double>, Rng&) -> Vec { return {a}; };
}

}  // namespace

// --- bandit ---------------------------------------------------------------------

TEST(Bandit, DeterministicArmPaysNinety) {
  envs::TwoArmedBandit env;
  envs::RolloutStats stats;
  envs::rollout(env, constant_action(1.0), 50, 1, "test", &stats);
  for (double r : stats.returns) EXPECT_EQ(r, 0.9);
}

TEST(Bandit, BehaviorMixtureMeanReturn) {
  envs::TwoArmedBandit env;
  auto gen = envs::generate_dataset(env, {"mixture"}, 10000, 2);
  EXPECT_NEAR(gen.stats.mean(), 2.0 / 3.0 * 0.5 + 1.0 / 3.0 * 0.9, 0.02);
}

TEST(Bandit, ArmCountsMatchMixture) {
  envs::TwoArmedBandit env;
  auto gen = envs::generate_dataset(env, {"mixture"}, 3000, 3);
  long arm0 = 0;
  for (size_t i = 0; i < gen.dataset.size(); ++i)
    if (gen.dataset.act_at(i)[0] < 0.5) ++arm0;
  double sigma = std::sqrt(3000.0 * (2.0 / 3.0) * (1.0 / 3.0));
  EXPECT_NEAR(static_cast<double>(arm0), 2000.0, 3 * sigma);
}

TEST(Bandit, EmpiricalMdpRecoversTrueValues) {
  envs::TwoArmedBandit env;
  auto gen = envs::generate_dataset(env, {"mixture"}, 10000, 5);
  auto records = envs::tabular_records(env, gen.dataset);
  // Arm 0 pays 0 or 1 at random: average the observed rewards.
  auto emp = tab::build_empirical_mdp(records, env.n_states() + 1, 2, 0.99,
                                      tab::RewardMode::Average);
  auto true_mdp = envs::TwoArmedBandit::true_mdp(0.99);
  auto behavior = tab::TabularPolicy{2, 2, {2.0 / 3.0, 1.0 / 3.0, 0.5, 0.5}};
  EXPECT_LT(tab::epsilon_mdp_gap(true_mdp, emp, behavior), 0.02);
}

// --- grid world -----------------------------------------------------------------

TEST(GridWorld, OptimalPolicyReachesGoalInManhattanDistance) {
  envs::GridWorld env;
  auto optimal = [&env](std::span<const double> obs, Rng&) -> Vec {
    return {static_cast<double>(env.optimal_action(static_cast<int>(obs[0])))};
  };
  envs::RolloutStats stats;
  auto episodes = envs::rollout(env, optimal, 5, 4, "test", &stats);
  for (const auto& ep : episodes) {
    EXPECT_EQ(ep.steps.size(), 8u);  // (0,0) -> (4,4)
    EXPECT_EQ(ep.steps.back().reward, 1.0);
  }
  EXPECT_EQ(stats.mean(), 1.0);
}

TEST(GridWorld, WallsClampMovement) {
  envs::GridWorld env;
  Rng rng(5);
  env.reset(rng);
  auto res = env.step(Vec{3.0}, rng);  // west from the corner
  EXPECT_EQ(res.obs[0], 0.0);
  EXPECT_FALSE(res.terminal);
}

TEST(GridWorld, StepLimitEndsEpisode) {
  envs::GridWorld env(5, 5, 10);
  Rng rng(6);
  env.reset(rng);
  envs::StepResult res{{0.0}, 0.0, false};
  for (int i = 0; i < 10; ++i) res = env.step(Vec{3.0}, rng);
  EXPECT_TRUE(res.terminal);
  EXPECT_EQ(res.reward, 0.0);
}

TEST(GridWorld, PureExpertDataIsOptimal) {
  envs::GridWorld env;
  envs::BehaviorSpec spec{"eps_optimal", 0.0, 0.0};
  auto gen = envs::generate_dataset(env, spec, 20, 7);
  EXPECT_EQ(gen.stats.mean(), 1.0);
  EXPECT_EQ(gen.dataset.size(), 20u * 8);
}

TEST(GridWorld, MixedDataLiesBetweenRandomAndOptimal) {
  // The raw goal-reached return saturates at small eps within the step
  // limit; the discounted return separates data quality.
  envs::GridWorld env;
  const double g = 0.99;
  auto optimal = envs::generate_dataset(env, {"eps_optimal", 0.0, 0.0}, 50, 8);
  auto random = envs::generate_dataset(env, {"eps_optimal", 1.0, 0.0}, 50, 9);
  auto mixed = envs::generate_dataset(env, {"eps_optimal", 0.3, 0.0}, 50, 10);
  double dr_optimal = crrlab::data::mean_discounted_return(optimal.dataset, g);
  double dr_random = crrlab::data::mean_discounted_return(random.dataset, g);
  double dr_mixed = crrlab::data::mean_discounted_return(mixed.dataset, g);
  EXPECT_GT(dr_mixed, dr_random);
  EXPECT_LT(dr_mixed, dr_optimal);
}

TEST(GridWorld, DatasetsAreCoherent) {
  envs::GridWorld env;
  for (auto spec : {envs::BehaviorSpec{"eps_optimal", 0.5, 0.0},
                    envs::BehaviorSpec{"mixed3", 0.0, 0.0}}) {
    auto gen = envs::generate_dataset(env, spec, 30, 11);
    auto records = envs::tabular_records(env, gen.dataset);
    std::vector<std::tuple<int, int, int>> triples;
    std::set<int> terminals = {env.n_states()};
    for (const auto& r : records) triples.emplace_back(r.s, r.a, r.next_s);
    EXPECT_TRUE(tab::check_coherent(triples, terminals, env.n_states() + 1, 4));
  }
}

TEST(GridWorld, OneHotEncoding) {
  envs::GridWorld env;
  Vec enc(env.encoded_obs_dim(), -1.0);
  env.encode_obs(Vec{7.0}, enc);
  for (int i = 0; i < 25; ++i) EXPECT_EQ(enc[i], i == 7 ? 1.0 : 0.0);
}

// --- point mass -----------------------------------------------------------------

TEST(PointMass, RewardBoundedAndEpisodeLengthFixed) {
  envs::PointMass1D env;
  auto gen = envs::generate_dataset(env, {"mixture", 0.0, 0.5}, 5, 12);
  EXPECT_EQ(gen.dataset.size(), 5u * 100);
  for (size_t i = 0; i < gen.dataset.size(); ++i) {
    double r = gen.dataset.reward_at(i);
    EXPECT_GT(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
}

TEST(PointMass, ExpertClearlyBeatsRandom) {
  envs::PointMass1D env;
  auto expert = envs::generate_dataset(env, {"mixture", 0.0, 1.0}, 50, 13);
  auto random = envs::generate_dataset(env, {"mixture", 0.0, 0.0}, 50, 14);
  EXPECT_GT(expert.stats.mean(), random.stats.mean() + 10.0);
}

TEST(PointMass, MixtureFractionControlsQuality) {
  envs::PointMass1D env;
  auto half = envs::generate_dataset(env, {"mixture", 0.0, 0.5}, 60, 15);
  auto expert = envs::generate_dataset(env, {"mixture", 0.0, 1.0}, 60, 15);
  auto random = envs::generate_dataset(env, {"mixture", 0.0, 0.0}, 60, 15);
  EXPECT_GT(half.stats.mean(), random.stats.mean());
  EXPECT_LT(half.stats.mean(), expert.stats.mean());
}

// --- generic --------------------------------------------------------------------

TEST(Envs, SeededRolloutsReproduceBitwise) {
  for (const char* name : {"bandit", "gridworld", "pointmass"}) {
    auto env1 = envs::make_env(name);
    auto env2 = envs::make_env(name);
    envs::BehaviorSpec spec = env1->name() == "gridworld"
                                  ? envs::BehaviorSpec{"eps_optimal", 0.4, 0.0}
                                  : envs::BehaviorSpec{"mixture", 0.0, 0.5};
    auto a = envs::generate_dataset(*env1, spec, 20, 42);
    auto b = envs::generate_dataset(*env2, spec, 20, 42);
    EXPECT_TRUE(a.dataset == b.dataset) << name;
    EXPECT_EQ(a.stats.returns, b.stats.returns) << name;
  }
}

TEST(Envs, TabularRecordsRouteTerminalsToEndState) {
  envs::TwoArmedBandit env;
  auto gen = envs::generate_dataset(env, {"mixture"}, 10, 16);
  auto records = envs::tabular_records(env, gen.dataset);
  ASSERT_EQ(records.size(), 10u);
  for (const auto& r : records) {
    EXPECT_EQ(r.s, 0);
    EXPECT_TRUE(r.terminal);
    EXPECT_EQ(r.next_s, env.n_states());
  }
}

TEST(Envs, UnknownNameIsConfigError) {
  EXPECT_THROW(envs::make_env("cartpole"), crrlab::ConfigError);
}
