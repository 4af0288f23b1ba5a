#ifndef BPR_TASKS_HPP
#define BPR_TASKS_HPP

#include <cmath>
#include <functional>
#include <string>

#include "bpr/core.hpp"
#include "bpr/dataset.hpp"
#include "bpr/envs/bandit.hpp"
#include "bpr/envs/pointmass.hpp"

namespace bpr {

enum class TaskKind { bandit, pointmass_expert, pointmass_mixed, stitch };

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::bandit: return "bandit";
    case TaskKind::pointmass_expert: return "pointmass-expert";
    case TaskKind::pointmass_mixed: return "pointmass-mixed";
    case TaskKind::stitch: return "stitch";
  }
  return "?";
}

inline TaskKind parse_task(const std::string& s) {
  if (s == "bandit") return TaskKind::bandit;
  if (s == "pointmass-expert") return TaskKind::pointmass_expert;
  if (s == "pointmass-mixed") return TaskKind::pointmass_mixed;
  if (s == "stitch") return TaskKind::stitch;
  throw ConfigError("unknown task '" + s + "' (expected bandit, pointmass-expert, pointmass-mixed or stitch)");
}

/// Environment plus dataset recipe.
struct TaskSpec {
  TaskKind kind = TaskKind::bandit;
  std::size_t bandit_samples = 10000;
  int episodes = 50;  // point-mass tasks: behavior episodes recorded
  envs::BanditSpec bandit;
  envs::StitchLayout layout;

  bool sparse() const { return kind == TaskKind::stitch; }

  envs::PointMassConfig pointmass() const {
    envs::PointMassConfig c;
    c.mode = sparse() ? envs::RewardMode::sparse : envs::RewardMode::dense;
    return c;
  }

  int state_dim() const { return kind == TaskKind::bandit ? 1 : 4; }
  int action_dim() const { return kind == TaskKind::bandit ? 1 : 2; }
};

/// Expert and mixed: whole-route episodes (mixed is half expert, half medium).
/// Stitch: half stitch_A and half stitch_B episodes, sparse reward.
inline OfflineDataset generate_task_dataset(const TaskSpec& task, Rng& rng) {
  if (task.kind == TaskKind::bandit) return envs::generate_bandit_dataset(task.bandit, task.bandit_samples, rng);
  if (task.episodes < 2) throw ConfigError("generate_task_dataset: need at least two episodes");
  OfflineDataset ds(4, 2, to_string(task.kind));
  const envs::PointMassEnv env(task.pointmass());
  const envs::Vec2 goal = env.config().goal;
  const int half = task.episodes / 2;
  switch (task.kind) {
    case TaskKind::pointmass_expert:
      envs::record_rollouts(ds, env, envs::ScriptedBehavior(envs::BehaviorKind::expert, goal), task.episodes, rng);
      break;
    case TaskKind::pointmass_mixed:
      envs::record_rollouts(ds, env, envs::ScriptedBehavior(envs::BehaviorKind::expert, goal), half, rng);
      envs::record_rollouts(ds, env, envs::ScriptedBehavior(envs::BehaviorKind::medium, goal), task.episodes - half,
                            rng);
      break;
    case TaskKind::stitch:
      envs::record_rollouts(ds, env, envs::ScriptedBehavior(envs::BehaviorKind::stitch_A, goal, task.layout), half,
                            rng);
      envs::record_rollouts(ds, env, envs::ScriptedBehavior(envs::BehaviorKind::stitch_B, goal, task.layout),
                            task.episodes - half, rng);
      break;
    case TaskKind::bandit: break;
  }
  return ds;
}

/// Dataset from the data seed stream; point-mass states are standardized.
inline OfflineDataset make_task_dataset(const TaskSpec& task, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  OfflineDataset ds = generate_task_dataset(task, rng);
  if (task.kind != TaskKind::bandit) ds.normalize_states();
  return ds;
}

struct EpisodeResult {
  double ret = 0.0;
  bool success = false;
  int steps = 0;
};

/// Maps a raw environment observation to an action.
using ActFn = std::function<Vec<double>(const Vec<double>&)>;

/// One episode from the task's start distribution. Returns are in raw
/// environment reward units.
inline EpisodeResult run_episode(const TaskSpec& task, const ActFn& act, Rng& rng) {
  EpisodeResult out;
  if (task.kind == TaskKind::bandit) {
    const Vec<double> a = act(Vec<double>::Zero(1));
    if (a.size() != 1) throw ShapeError("run_episode: bandit action must be 1-D");
    out.ret = envs::bandit_reward(task.bandit, std::clamp(a[0], -1.0, 1.0));
    out.steps = 1;
    return out;
  }
  envs::PointMassEnv env(task.pointmass());
  envs::PointState s = env.reset(rng);
  for (;;) {
    const Vec<double> a = act(Vec<double>(s));
    if (a.size() != 2) throw ShapeError("run_episode: point-mass action must be 2-D");
    const auto res = env.step(s, envs::Vec2(a[0], a[1]));
    out.ret += res.reward;
    ++out.steps;
    out.success = out.success || res.success;
    if (res.done) break;
    s = res.next;
  }
  return out;
}

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;  // population std over episodes
  double success_rate = 0.0;
  int episodes = 0;
};

inline EvalResult evaluate_actor(const TaskSpec& task, const ActFn& act, int episodes, Rng& rng) {
  if (episodes < 1) throw ConfigError("evaluate: need at least one episode");
  EvalResult r;
  r.episodes = episodes;
  double sum = 0.0, sq = 0.0;
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    const auto ep = run_episode(task, act, rng);
    sum += ep.ret;
    sq += ep.ret * ep.ret;
    successes += ep.success ? 1 : 0;
  }
  r.mean = sum / episodes;
  r.std = std::sqrt(std::max(0.0, sq / episodes - r.mean * r.mean));
  if (episodes == 1) r.std = 0.0;
  r.success_rate = double(successes) / episodes;
  return r;
}

/// The scripted expert as an actor (point-mass tasks).
inline ActFn expert_actor(const TaskSpec& task) {
  const auto goal = task.pointmass().goal;
  return [goal](const Vec<double>& s) {
    const envs::PointState st(s[0], s[1], s[2], s[3]);
    return Vec<double>(envs::pd_action(st, goal));
  };
}

/// Uniform-random actor in the action box.
inline ActFn random_actor(const TaskSpec& task, Rng& rng) {
  const int ad = task.action_dim();
  return [ad, &rng](const Vec<double>&) {
    Vec<double> a(ad);
    for (int k = 0; k < ad; ++k) a[k] = uniform<double>(rng, -1.0, 1.0);
    return a;
  };
}

}  // namespace bpr

#endif  // BPR_TASKS_HPP
