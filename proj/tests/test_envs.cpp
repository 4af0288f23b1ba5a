#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "bpr/envs/bandit.hpp"
#include "bpr/envs/pointmass.hpp"
#include "bpr/envs/tabular.hpp"

using namespace bpr;
using namespace bpr::envs;

TEST(Bandit, RewardValues) {
  BanditSpec spec;
  EXPECT_DOUBLE_EQ(bandit_reward(spec, 0.8), 1.0);
  EXPECT_NEAR(bandit_reward(spec, 0.5), 0.91, 1e-15);
  EXPECT_LT(bandit_reward(spec, -0.5), bandit_reward(spec, 0.5));
  EXPECT_THROW(bandit_reward(spec, 1.01), DomainError);
  EXPECT_THROW(bandit_reward(spec, -1.5), DomainError);
}

TEST(Bandit, SpecValidation) {
  BanditSpec spec;
  spec.modes[0].weight = 0.7;
  EXPECT_THROW(spec.validate(), ConfigError);
  BanditSpec bad_std;
  bad_std.modes[1].std = 0.0;
  EXPECT_THROW(bad_std.validate(), ConfigError);
  BanditSpec bad_center;
  bad_center.modes[0].center = -1.0;
  EXPECT_THROW(bad_center.validate(), ConfigError);
  Rng rng(0);
  EXPECT_THROW(generate_bandit_dataset(BanditSpec{}, 1, rng), ConfigError);
}

TEST(Bandit, DegenerateMixtureCounts) {
  BanditSpec spec;
  spec.modes[0].std = 1e-12;
  spec.modes[1].std = 1e-12;
  Rng rng(11);
  const auto ds = generate_bandit_dataset(spec, 1000, rng);
  int pos = 0;
  for (std::size_t i = 0; i < ds.count(); ++i) {
    const float a = ds.at(i).a[0];
    ASSERT_TRUE(a == -0.5f || a == 0.5f) << a;
    pos += a > 0;
  }
  // Binomial(1000, 0.5): 4 standard deviations is about 63.
  EXPECT_NEAR(pos, 500, 63);
}

TEST(Bandit, ActionMeanNearZero) {
  Rng rng(12);
  const auto ds = generate_bandit_dataset(BanditSpec{}, 20000, rng);
  const auto b = ds.all<double>();
  const double mean = b.a.mean();
  const double sd = std::sqrt((b.a.array() - mean).square().mean());
  EXPECT_LE(std::abs(mean), 3 * sd / std::sqrt(double(ds.count())));
}

TEST(Bandit, RewardColumnConsistent) {
  BanditSpec spec;
  Rng rng(13);
  const auto ds = generate_bandit_dataset(spec, 500, rng);
  for (std::size_t i = 0; i < ds.count(); ++i) {
    const auto t = ds.at(i);
    EXPECT_EQ(t.r, static_cast<float>(bandit_reward(spec, t.a[0])));
    EXPECT_TRUE(t.done);
  }
}

TEST(PointMass, ZeroVelocityZeroActionStays) {
  PointMassEnv env;
  PointState s;
  s << 0.3, -0.2, 0.0, 0.0;
  const auto res = env.step(s, Vec2::Zero());
  EXPECT_EQ(res.next, s);
}

TEST(PointMass, DenseRewardArithmetic) {
  PointMassConfig cfg;
  cfg.goal = Vec2(1.0, 0.0);
  PointMassEnv env(cfg);
  PointState s;
  s << 0.0, 0.0, 1.0, 0.0;
  Rng rng(0);
  const auto res = pointmass_step(env, s, Vec2::Zero(), rng);
  EXPECT_NEAR(res.next[0], 0.1, 1e-15);
  EXPECT_EQ(res.next[1], 0.0);
  EXPECT_NEAR(res.reward, -0.9, 1e-15);
  EXPECT_FALSE(res.done);
}

TEST(PointMass, SparseGoalEntry) {
  PointMassConfig cfg;
  cfg.mode = RewardMode::sparse;
  PointMassEnv env(cfg);
  PointState s;
  s << cfg.goal[0] - 0.05, cfg.goal[1], 0.0, 0.0;
  const auto res = env.step(s, Vec2::Zero());
  EXPECT_EQ(res.reward, 1.0);
  EXPECT_TRUE(res.done);
  EXPECT_TRUE(res.success);
}

TEST(PointMass, ClippingAndHorizon) {
  PointMassConfig cfg;
  cfg.horizon = 3;
  PointMassEnv env(cfg);
  PointState s;
  s << 0.99, -0.99, 1.0, -1.0;
  auto res = env.step(s, Vec2(5.0, -5.0));
  EXPECT_EQ(res.next[0], 1.0);
  EXPECT_EQ(res.next[1], -1.0);
  EXPECT_EQ(res.next[2], 1.0);
  EXPECT_EQ(res.next[3], -1.0);
  res = env.step(res.next, Vec2::Zero());
  EXPECT_FALSE(res.done);
  res = env.step(res.next, Vec2::Zero());
  EXPECT_TRUE(res.done);
}

TEST(PointMass, DeterministicGivenSeed) {
  ScriptedBehavior medium(BehaviorKind::medium, PointMassConfig{}.goal);
  Rng a(4), b(4);
  const auto ra = behavior_rollout(PointMassEnv{}, medium, a);
  const auto rb = behavior_rollout(PointMassEnv{}, medium, b);
  EXPECT_EQ(ra.ret, rb.ret);
  EXPECT_EQ(ra.steps, rb.steps);
}

TEST(Behavior, ExpertAtGoalIsAtRest) {
  PointMassConfig cfg;
  PointState s;
  s << cfg.goal[0], cfg.goal[1], 0.0, 0.0;
  Rng rng(0);
  const Vec2 a = scripted_behavior(BehaviorKind::expert, s, cfg.goal, rng);
  EXPECT_LE(a.norm(), 1e-12);
}

TEST(Behavior, MediumIsNoisyHalfExpert) {
  PointMassConfig cfg;
  PointState s;
  s << 0.5, 0.6, 0.1, -0.2;
  Rng rng(21);
  const Vec2 expert = pd_action(s, cfg.goal);
  ASSERT_GT(expert.cwiseAbs().minCoeff(), 0.05);
  const int n = 10000;
  Vec2 sum = Vec2::Zero();
  for (int i = 0; i < n; ++i) sum += scripted_behavior(BehaviorKind::medium, s, cfg.goal, rng);
  const Vec2 mean = sum / n;
  const double se = 0.3 / std::sqrt(double(n));
  for (int d = 0; d < 2; ++d) EXPECT_NEAR(mean[d], 0.5 * expert[d], 3 * se);
}

TEST(Behavior, ExpertReachesGoal) {
  PointMassConfig cfg;
  cfg.mode = RewardMode::sparse;
  Rng rng(8);
  int successes = 0;
  for (int ep = 0; ep < 20; ++ep) {
    successes += behavior_rollout(PointMassEnv(cfg), ScriptedBehavior(BehaviorKind::expert, cfg.goal), rng).success;
  }
  EXPECT_EQ(successes, 20);
}

TEST(Behavior, StitchANeverReachesGoal) {
  PointMassConfig cfg;
  cfg.mode = RewardMode::sparse;
  Rng rng(99);
  int successes = 0;
  for (int ep = 0; ep < 100; ++ep) {
    successes += behavior_rollout(PointMassEnv(cfg), ScriptedBehavior(BehaviorKind::stitch_A, cfg.goal), rng).success;
  }
  EXPECT_EQ(successes, 0);
}

TEST(Behavior, StitchBReachesGoalFromWaypoint) {
  PointMassConfig cfg;
  cfg.mode = RewardMode::sparse;
  OfflineDataset ds(4, 2, "stitch");
  Rng rng(5);
  record_rollouts(ds, PointMassEnv(cfg), ScriptedBehavior(BehaviorKind::stitch_B, cfg.goal), 10, rng);
  int terminals = 0;
  for (std::size_t i = 0; i < ds.count(); ++i) terminals += ds.at(i).done;
  EXPECT_EQ(terminals, 10);
}

TEST(Behavior, RecordedNextActionsChain) {
  PointMassConfig cfg;
  OfflineDataset ds(4, 2, "pointmass");
  Rng rng(6);
  record_rollouts(ds, PointMassEnv(cfg), ScriptedBehavior(BehaviorKind::medium, cfg.goal), 2, rng);
  ASSERT_EQ(ds.count(), 2u * cfg.horizon);
  for (std::size_t i = 0; i + 1 < ds.count(); ++i) {
    if (i % cfg.horizon == std::size_t(cfg.horizon - 1)) continue;
    EXPECT_EQ(ds.at(i).a_next, ds.at(i + 1).a);
    EXPECT_EQ(ds.at(i).s_next, ds.at(i + 1).s);
    // Dense horizon truncation is not terminal.
    EXPECT_FALSE(ds.at(i).done);
  }
}

namespace {

std::map<int, double> read_golden(const std::string& path) {
  std::ifstream in(path);
  std::map<int, double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int seed;
    double ret;
    ls >> seed >> ret;
    out[seed] = ret;
  }
  return out;
}

}  // namespace

TEST(Behavior, ExpertDenseReturnGolden) {
  const auto golden = read_golden(std::string(BPR_TEST_DATA_DIR) + "/expert_return.golden");
  ASSERT_FALSE(golden.empty()) << "missing golden file";
  for (const auto& [seed, expected] : golden) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto st = behavior_rollout(PointMassEnv{}, ScriptedBehavior(BehaviorKind::expert, PointMassConfig{}.goal), rng);
    EXPECT_NEAR(st.ret, expected, 1e-9) << "seed " << seed << " got " << std::setprecision(17) << st.ret;
  }
}

TEST(Tabular, RejectsNonStochasticRows) {
  std::vector<Mat<double>> P{Mat<double>::Identity(2, 2)};
  P[0](0, 1) = 1e-9;
  EXPECT_THROW(TabularMDP(P, Mat<double>::Zero(2, 1), Vec<double>::Constant(2, 0.5), 0.9), ConfigError);
  std::vector<Mat<double>> ok{Mat<double>::Identity(2, 2)};
  EXPECT_THROW(TabularMDP(ok, Mat<double>::Zero(2, 1), Vec<double>::Constant(2, 0.5), 1.0), ConfigError);
  EXPECT_THROW(TabularMDP(ok, Mat<double>::Zero(2, 2), Vec<double>::Constant(2, 0.5), 0.5), ShapeError);
  EXPECT_THROW(TabularMDP(ok, Mat<double>::Zero(2, 1), Vec<double>::Constant(2, 0.4), 0.5), ConfigError);
  EXPECT_NO_THROW(TabularMDP(ok, Mat<double>::Zero(2, 1), Vec<double>::Constant(2, 0.5), 0.0));
}

TEST(Tabular, RandomMdpIsValidAndSeeded) {
  Rng a(3), b(3);
  const auto m1 = random_mdp(5, 3, 0.9, a);
  const auto m2 = random_mdp(5, 3, 0.9, b);
  EXPECT_EQ(m1.reward(), m2.reward());
  for (int act = 0; act < 3; ++act) {
    EXPECT_EQ(m1.transition(act), m2.transition(act));
    for (int s = 0; s < 5; ++s) EXPECT_NEAR(m1.transition(act).row(s).sum(), 1.0, 1e-12);
  }
  EXPECT_GE(m1.reward().minCoeff(), 0.0);
  EXPECT_LE(m1.reward().maxCoeff(), 1.0);
}
