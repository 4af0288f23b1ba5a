#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "bpr/trainer.hpp"

using namespace bpr;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny(long steps = 60) {
  TrainConfig c;
  c.steps = steps;
  c.ebm_steps = 30;
  c.batch_size = 16;
  c.ebm_batch = 16;
  c.ebm_negatives = 8;
  c.policy_hidden = {16, 16};
  c.critic_hidden = {16, 16};
  c.ebm_hidden = {16, 16};
  c.eval_every = 30;
  c.eval_episodes = 2;
  c.log_every = 10;
  c.checkpoint_every = 20;
  return c;
}

TaskSpec pm_task(int episodes = 4) {
  TaskSpec t;
  t.kind = TaskKind::pointmass_expert;
  t.episodes = episodes;
  return t;
}

TaskSpec bandit_task() {
  TaskSpec t;
  t.kind = TaskKind::bandit;
  t.bandit_samples = 2000;
  return t;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::path(testing::TempDir()) / ("bpr_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& sub) const { return (path / sub).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_of(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (std::size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

// Bandit EBM shared by the slower behavioral tests.
const EnergyModel<float>& bandit_ebm() {
  static const EnergyModel<float> m = [] {
    TrainConfig c;
    c.ebm_steps = 1500;
    return pretrain_ebm(c, make_task_dataset(bandit_task(), 0));
  }();
  return m;
}

}  // namespace

TEST(Trainer, ZeroStepsReturnsInitializedPolicy) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  const auto cfg = tiny(0);
  const auto art = train_bpr(cfg, ds, task);
  EXPECT_TRUE(art.completed);
  EXPECT_EQ(art.updates, 0);
  EXPECT_TRUE(art.metrics.empty());
  Rng init(derive_seed(cfg.seed, 3));
  PolicyArch pa;
  pa.hidden = cfg.policy_hidden;
  const auto fresh = TanhGaussianPolicy<float>::make(4, 2, pa, init);
  EXPECT_TRUE(art.policy.net() == fresh.net());
}

TEST(Trainer, SameSeedGivesIdenticalMetrics) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  TempDir a("det_a"), b("det_b");
  TrainHooks ha, hb;
  ha.run_dir = a / "run";
  hb.run_dir = b / "run";
  const auto ra = train_bpr(tiny(), ds, task, ha);
  const auto rb = train_bpr(tiny(), ds, task, hb);
  EXPECT_EQ(slurp(a / "run/metrics.csv"), slurp(b / "run/metrics.csv"));
  EXPECT_TRUE(ra.policy.net() == rb.policy.net());
  auto other = tiny();
  other.seed = 1;
  EXPECT_NE(metrics_csv(train_bpr(other, ds, task).metrics), metrics_csv(ra.metrics));
}

class ResumeTest : public testing::TestWithParam<Regime> {};

TEST_P(ResumeTest, InterruptedRunResumesToIdenticalResult) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  auto cfg = tiny();
  cfg.regime = GetParam();
  cfg.value_steps = 40;
  TempDir full("resume_full"), part("resume_part");
  TrainHooks hf;
  hf.run_dir = full / "run";
  const auto ref = train_bpr(cfg, ds, task, hf);

  TrainHooks hp;
  hp.run_dir = part / "run";
  hp.stop_after = 25;
  const auto cut = train_bpr(cfg, ds, task, hp);
  EXPECT_FALSE(cut.completed);
  EXPECT_EQ(cut.updates, 25);
  EXPECT_TRUE(fs::exists(part / "run/checkpoints/state.bin"));
  hp.stop_after = -1;
  hp.resume = true;
  const auto resumed = train_bpr(cfg, ds, task, hp);
  EXPECT_TRUE(resumed.completed);
  EXPECT_EQ(resumed.updates, ref.updates);
  EXPECT_EQ(slurp(full / "run/metrics.csv"), slurp(part / "run/metrics.csv"));
  EXPECT_TRUE(resumed.policy.net() == ref.policy.net());
}

INSTANTIATE_TEST_SUITE_P(Regimes, ResumeTest, testing::Values(Regime::off_policy, Regime::onestep, Regime::ensemble_lcb));

TEST(Trainer, ResumeRejectsChangedConfig) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  TempDir d("resume_cfg");
  TrainHooks h;
  h.run_dir = d / "run";
  h.stop_after = 10;
  train_bpr(tiny(), ds, task, h);
  auto changed = tiny();
  changed.lambda = 2.0;
  h.stop_after = -1;
  h.resume = true;
  EXPECT_THROW(train_bpr(changed, ds, task, h), ConfigError);
}

TEST(Trainer, CallOrderPerOffPolicyStep) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  CallLog log;
  TrainHooks h;
  h.calls = &log;
  train_bpr(tiny(3), ds, task, h);
  const std::vector<std::string> step{"sample_batch", "critic_target", "critic_update", "target_update", "pair_sample",
                                      "energy",       "energy",        "q",             "q",             "policy_update"};
  ASSERT_EQ(log.events.size(), 3 * step.size());
  for (std::size_t i = 0; i < log.events.size(); ++i) EXPECT_EQ(log.events[i], step[i % step.size()]) << "event " << i;
}

TEST(Trainer, OnestepPhaseOneNeverQueriesPolicy) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  for (Regime r : {Regime::onestep, Regime::ensemble_lcb}) {
    auto cfg = tiny(5);
    cfg.regime = r;
    cfg.value_steps = 20;
    CallLog log;
    TrainHooks h;
    h.calls = &log;
    const auto art = train_onestep(cfg, ds, task, h);
    EXPECT_EQ(art.phase1_policy_queries, 0);
    EXPECT_EQ(art.updates, 25);
    // Phase 1 is value-only: the first pair sample comes after all 20 value steps.
    int batches_before_pairs = 0;
    for (const auto& e : log.events) {
      if (e == "pair_sample") break;
      batches_before_pairs += e == "sample_batch" ? 1 : 0;
    }
    EXPECT_EQ(batches_before_pairs, 21);
  }
}

TEST(Trainer, OnestepRejectsOffPolicyRegime) {
  const auto task = pm_task();
  EXPECT_THROW(train_onestep(tiny(), make_task_dataset(task, 0), task), ConfigError);
}

TEST(Trainer, UntrainedEbmAbortsWithStepIndex) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  auto cfg = tiny();
  cfg.ebm_steps = 0;
  TempDir d("untrained");
  TrainHooks h;
  h.run_dir = d / "run";
  try {
    train_bpr(cfg, ds, task, h);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
  // The config snapshot is written before any update.
  EXPECT_TRUE(fs::exists(d / "run/config.json"));
}

TEST(Trainer, RejectsMismatchedDatasetAndEmptyDataset) {
  const auto ds = make_task_dataset(pm_task(), 0);
  EXPECT_THROW(train_bc(tiny(), ds, bandit_task()), ShapeError);
  EXPECT_THROW(train_bc(tiny(), OfflineDataset(4, 2, "pointmass-expert"), pm_task()), DatasetError);
}

TEST(Trainer, RunDirectoryLayout) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  TempDir d("layout");
  TrainHooks h;
  h.run_dir = d / "run";
  const auto art = train_bpr(tiny(), ds, task, h);
  for (const char* f : {"config.json", "metrics.csv", "summary.json", "plots/learning_curve.svg",
                        "checkpoints/policy.bprw", "checkpoints/critic_0.bprw", "checkpoints/critic_1.bprw",
                        "checkpoints/ebm.bprw", "checkpoints/state.bin"}) {
    EXPECT_TRUE(fs::exists(d / ("run/" + std::string(f)))) << f;
  }
  std::string role;
  const auto net = nn::load_checkpoint<float>(d / "run/checkpoints/policy.bprw", &role);
  EXPECT_EQ(role, "policy");
  EXPECT_TRUE(net == art.policy.net());
  const auto cfg = read_json_file(d / "run/config.json");
  EXPECT_EQ(cfg["algo"], "bpr");
  EXPECT_EQ(train_config_from_json(cfg["train"]).steps, 60);
}

TEST(Trainer, MetricRowsCarryStepsAndBlankMissingFields) {
  const auto task = pm_task();
  const auto art = train_bc(tiny(), make_task_dataset(task, 0), task);
  ASSERT_EQ(art.metrics.size(), 6u);
  for (std::size_t i = 0; i < art.metrics.size(); ++i) {
    EXPECT_EQ(art.metrics[i].step, static_cast<long>(10 * (i + 1)));
    EXPECT_TRUE(std::isnan(art.metrics[i].critic_loss));
    EXPECT_TRUE(std::isfinite(art.metrics[i].policy_loss));
  }
  EXPECT_TRUE(std::isfinite(art.metrics[2].eval_mean));
  EXPECT_TRUE(std::isnan(art.metrics[1].eval_mean));
  const std::string csv = metrics_csv(art.metrics);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,critic_loss,policy_loss,eval_mean,eval_std");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  EXPECT_EQ(line.substr(0, 4), "10,,");
  EXPECT_EQ(line.substr(line.size() - 2), ",,");
}

TEST(Trainer, BcSingleTransitionConvergesToAction) {
  OfflineDataset ds(1, 1, "bandit");
  Transition t;
  t.s = {0.0f};
  t.a = {0.6f};
  t.r = 1.0f;
  t.s_next = {0.0f};
  t.a_next = {0.0f};
  t.done = true;
  ds.append(t);
  auto cfg = tiny(3000);
  cfg.policy_lr = 3e-3;
  cfg.eval_every = 3000;
  cfg.log_every = 3000;
  const auto art = train_bc(cfg, ds, bandit_task());
  EXPECT_NEAR(art.policy.mean_action(Mat<float>::Zero(1, 1))(0, 0), 0.6, 0.01);
}

TEST(Trainer, BcOnExpertDataWithinTenPercentOfExpert) {
  const auto task = pm_task(50);
  const auto ds = make_task_dataset(task, 0);
  auto cfg = tiny(20000);
  cfg.batch_size = 64;
  cfg.policy_hidden = {64, 64};
  cfg.eval_every = 20000;
  cfg.log_every = 5000;
  cfg.eval_episodes = 10;
  const auto art = train_bc(cfg, ds, task);
  Rng rng(derive_seed(cfg.seed, 1000003 + 20000));
  const auto expert = evaluate_actor(task, expert_actor(task), 10, rng);
  EXPECT_LE(std::abs(art.final_eval.mean - expert.mean), 0.1 * std::abs(expert.mean))
      << "bc " << art.final_eval.mean << " expert " << expert.mean;
}

TEST(Trainer, ZeroCriticRegressesTowardBehaviorMode) {
  const auto task = bandit_task();
  const auto ds = make_task_dataset(task, 0);
  auto cfg = tiny(5000);
  cfg.batch_size = 64;
  cfg.policy_hidden = {64, 64};
  cfg.eval_every = 5000;
  cfg.log_every = 1000;
  TrainHooks h;
  h.ebm = &bandit_ebm();
  h.known_q = [](const Mat<float>&, const Mat<float>& A) { return RowVec<float>::Zero(A.cols()).eval(); };
  const auto art = train_bpr(cfg, ds, task, h);
  const double mean = art.policy.mean_action(Mat<float>::Zero(1, 1))(0, 0);
  EXPECT_NEAR(std::abs(mean), 0.5, 0.1) << "mean " << mean;
}

TEST(Evaluate, HorizonOneReturnsSingleReward) {
  const auto task = bandit_task();
  const auto ds = make_task_dataset(task, 0);
  Rng init(1);
  const auto pi = TanhGaussianPolicy<float>::make(1, 1, PolicyArch{{8}}, init);
  Rng rng(2);
  const auto r = evaluate(pi, ds, task, 1, rng);
  const double a = pi.mean_action(Mat<float>::Zero(1, 1))(0, 0);
  EXPECT_DOUBLE_EQ(r.mean, envs::bandit_reward(task.bandit, a));
  EXPECT_EQ(r.std, 0.0);
  EXPECT_EQ(r.episodes, 1);
}

TEST(Evaluate, RejectsDimensionMismatch) {
  Rng init(1);
  const auto pi = TanhGaussianPolicy<float>::make(1, 1, PolicyArch{{8}}, init);
  Rng rng(2);
  const auto task = pm_task();
  EXPECT_THROW(evaluate(pi, make_task_dataset(task, 0), task, 1, rng), ShapeError);
}

TEST(Evaluate, ScriptedExpertMatchesGoldenReturns) {
  std::ifstream in(std::string(BPR_TEST_DATA_DIR) + "/expert_return.golden");
  ASSERT_TRUE(in) << "missing golden file";
  const auto task = pm_task();
  std::string line;
  int checked = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int seed;
    double expected;
    ls >> seed >> expected;
    Rng rng(static_cast<std::uint64_t>(seed));
    EXPECT_NEAR(evaluate_actor(task, expert_actor(task), 1, rng).mean, expected, 1e-9) << "seed " << seed;
    ++checked;
  }
  EXPECT_GE(checked, 5);
}

TEST(Evaluate, SingleEpisodeHasZeroStd) {
  const auto task = pm_task();
  Rng act_rng(3), rng(4);
  const auto r = evaluate_actor(task, random_actor(task, act_rng), 1, rng);
  EXPECT_EQ(r.std, 0.0);
  EXPECT_THROW(evaluate_actor(task, random_actor(task, act_rng), 0, rng), ConfigError);
}

TEST(Ablation, SingleValueEqualsPlainRun) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  const auto rows = ablate_lambda(tiny(), {1.0}, ds, task, "");
  const auto art = train_bpr(tiny(), ds, task);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_EQ(rows[0].mean, art.final_eval.mean);
  EXPECT_EQ(rows[0].std, art.final_eval.std);
}

TEST(Ablation, DuplicateValuesGiveIdenticalRowsAcrossThreads) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  const auto rows = ablate_lambda(tiny(), {1.0, 1.0, 1.0}, ds, task, "", 2);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].mean, rows[1].mean);
  EXPECT_EQ(rows[1].mean, rows[2].mean);
  EXPECT_EQ(rows[0].std, rows[2].std);
}

TEST(Ablation, WritesCsvAndBarsAndRecordsFailures) {
  const auto task = pm_task();
  const auto ds = make_task_dataset(task, 0);
  TempDir d("ablate");
  const auto rows = ablate_lambda(tiny(), {0.5, 1.0, -1.0, 2.0}, ds, task, d / "sweep");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_FALSE(rows[2].error.empty());
  EXPECT_TRUE(rows[3].error.empty());
  const std::string csv = slurp(d / "sweep/ablation.csv");
  EXPECT_EQ(count_of(csv, "\n"), 5);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,mean,std,error");
  EXPECT_EQ(count_of(slurp(d / "sweep/ablation.svg"), "class=\"bar\""), 3);
  EXPECT_THROW(ablate_lambda(tiny(), {}, ds, task, ""), ConfigError);
}

TEST(Plot, IdenticalInputGivesIdenticalBytes) {
  const plot::Chart c{"t", "x", "y", {{"a", {0, 1, 2}, {1, 3, 2}}, {"b", {0, 1, 2}, {0, 0, 1}}}, false};
  EXPECT_EQ(plot::render(c), plot::render(c));
  EXPECT_EQ(count_of(plot::render(c), "class=\"series\""), 2);
}

TEST(Plot, SinglePointHasOneMarker) {
  const std::string svg = plot::render({"t", "x", "y", {{"only", {0.5}, {2.0}}}, false});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count_of(svg, "class=\"marker\""), 1);
}

TEST(Plot, OverlayHasThreeLabeledCurves) {
  std::vector<double> x{-1, 0, 1};
  const std::string svg = plot::render(
      {"overlay", "action", "value", {{"reward", x, {0, 1, 0}}, {"EBM density", x, {1, 0, 1}}, {"policy", x, {0, 0, 1}}},
       false});
  EXPECT_EQ(count_of(svg, "class=\"series\""), 3);
  EXPECT_EQ(count_of(svg, "class=\"label\""), 3);
  EXPECT_NE(svg.find(">EBM density<"), std::string::npos);
}

TEST(Plot, EmptyOrRaggedSeriesRejected) {
  EXPECT_THROW(plot::render({"t", "x", "y", {}, false}), ConfigError);
  EXPECT_THROW(plot::render({"t", "x", "y", {{"e", {}, {}}}, false}), ConfigError);
  EXPECT_THROW(plot::render({"t", "x", "y", {{"r", {0, 1}, {0}}}, false}), ConfigError);
}

TEST(Config, RunConfigRoundTripsAndRejectsUnknownKeys) {
  RunConfig rc;
  rc.task = TaskKind::stitch;
  rc.train.lambda = 1.5;
  rc.train.regime = Regime::ensemble_lcb;
  rc.train.mode = SamplingMode::reference;
  rc.train.policy_hidden = {32, 16};
  const json j = to_json(rc);
  EXPECT_EQ(to_json(run_config_from_json(j)), j);
  json bad = j;
  bad["colour"] = 1;
  EXPECT_THROW(run_config_from_json(bad), ConfigError);
  bad = j;
  bad["train"]["lamda"] = 1.0;
  EXPECT_THROW(run_config_from_json(bad), ConfigError);
  bad = j;
  bad["train"]["regime"] = "sometimes";
  EXPECT_THROW(run_config_from_json(bad), ConfigError);
  bad = j;
  bad["train"]["lambda"] = "one";
  EXPECT_THROW(run_config_from_json(bad), ConfigError);
}

TEST(Config, TaskPresetsAndFullFidelity) {
  const auto stitch = run_config_from_json({{"task", "stitch"}});
  EXPECT_EQ(stitch.train.gamma, 0.999);
  EXPECT_EQ(stitch.train.reward_scale, 100.0);
  EXPECT_EQ(stitch.train.eval_episodes, 100);
  const auto dense = run_config_from_json({{"task", "pointmass-mixed"}});
  EXPECT_EQ(dense.train.gamma, 0.99);
  EXPECT_EQ(dense.train.eval_episodes, 10);
  const auto full = run_config_from_json({{"full", true}, {"train", {{"seed", 3}}}});
  EXPECT_EQ(full.train.steps, 1000000);
  EXPECT_EQ(full.train.ebm_steps, 200000);
  EXPECT_EQ(full.train.seed, 3u);
  EXPECT_THROW(run_config_from_json({{"train", {{"lambda", 0.0}}}}), ConfigError);
}
