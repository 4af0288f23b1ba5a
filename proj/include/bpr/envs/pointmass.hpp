#ifndef BPR_ENVS_POINTMASS_HPP
#define BPR_ENVS_POINTMASS_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include "bpr/core.hpp"
#include "bpr/dataset.hpp"

namespace bpr::envs {

using Vec2 = Eigen::Vector2d;
using PointState = Eigen::Vector4d;  // (x, y, vx, vy)

enum class RewardMode { dense, sparse };

struct PointMassConfig {
  double dt = 0.1;
  int horizon = 100;
  double v_max = 1.0;
  double goal_radius = 0.1;
  Vec2 goal{0.7, 0.7};
  Vec2 start{-0.7, -0.7};
  double start_noise = 0.05;
  RewardMode mode = RewardMode::dense;
};

struct StepResult {
  PointState next;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

/// 2-D point mass in the box [-1, 1]^2 driven by clipped accelerations.
class PointMassEnv {
 public:
  explicit PointMassEnv(PointMassConfig cfg = {}) : cfg_(std::move(cfg)) {}

  const PointMassConfig& config() const { return cfg_; }
  int t() const { return t_; }

  PointState reset(Rng& rng) {
    t_ = 0;
    PointState s = PointState::Zero();
    for (int d = 0; d < 2; ++d) {
      s[d] = std::clamp(cfg_.start[d] + uniform<double>(rng, -cfg_.start_noise, cfg_.start_noise), -1.0, 1.0);
    }
    return s;
  }

  PointState reset_to(const PointState& s) {
    t_ = 0;
    return s;
  }

  /// x' = clip(x + dt v), v' = clip(v + dt a). Dense reward is -|x' - goal|;
  /// sparse reward is 1 inside the goal ball, which also ends the episode.
  StepResult step(const PointState& s, const Vec2& action) {
    StepResult out;
    const Vec2 a = action.cwiseMax(-1.0).cwiseMin(1.0);
    for (int d = 0; d < 2; ++d) {
      out.next[d] = std::clamp(s[d] + cfg_.dt * s[d + 2], -1.0, 1.0);
      out.next[d + 2] = std::clamp(s[d + 2] + cfg_.dt * a[d], -cfg_.v_max, cfg_.v_max);
    }
    ++t_;
    const double dist = (out.next.head<2>() - cfg_.goal).norm();
    out.success = dist < cfg_.goal_radius;
    if (cfg_.mode == RewardMode::dense) {
      out.reward = -dist;
      out.done = t_ >= cfg_.horizon;
    } else {
      out.reward = out.success ? 1.0 : 0.0;
      out.done = out.success || t_ >= cfg_.horizon;
    }
    return out;
  }

 private:
  PointMassConfig cfg_;
  int t_ = 0;
};

inline StepResult pointmass_step(PointMassEnv& env, const PointState& s, const Vec2& a, Rng& /*rng*/) {
  return env.step(s, a);
}

enum class BehaviorKind { expert, medium, stitch_A, stitch_B };

inline std::string to_string(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::expert: return "expert";
    case BehaviorKind::medium: return "medium";
    case BehaviorKind::stitch_A: return "stitch_A";
    case BehaviorKind::stitch_B: return "stitch_B";
  }
  return "?";
}

/// Waypoints for the stitching task. stitch_A drives from the start region
/// to `waypoint` (or, with probability `p_dead_end`, to `dead_end`) and parks
/// there; stitch_B starts around `waypoint` and drives to the goal.
struct StitchLayout {
  Vec2 waypoint{0.7, -0.7};
  Vec2 dead_end{-0.7, 0.7};
  double p_dead_end = 0.0;
  double b_start_noise = 0.1;
};

struct PdGains {
  double kp = 2.0;
  double kd = 2.0;
};

inline Vec2 pd_action(const PointState& s, const Vec2& target, PdGains g = {}) {
  const Vec2 a = g.kp * (target - s.head<2>()) - g.kd * s.tail<2>();
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

/// Scripted behavior policy. Per-episode choices (the stitch_A branch) are
/// drawn in begin_episode().
class ScriptedBehavior {
 public:
  ScriptedBehavior(BehaviorKind kind, Vec2 goal, StitchLayout layout = {})
      : kind_(kind), goal_(std::move(goal)), layout_(std::move(layout)) {
    target_ = kind_ == BehaviorKind::stitch_A ? layout_.waypoint : goal_;
  }

  BehaviorKind kind() const { return kind_; }
  const Vec2& target() const { return target_; }

  void begin_episode(Rng& rng) {
    if (kind_ == BehaviorKind::stitch_A) {
      std::bernoulli_distribution dead(layout_.p_dead_end);
      target_ = dead(rng) ? layout_.dead_end : layout_.waypoint;
    }
  }

  /// Start state for one episode of this behavior.
  PointState start_state(const PointMassEnv& env, Rng& rng) const {
    PointState s = PointState::Zero();
    const Vec2 center = kind_ == BehaviorKind::stitch_B ? layout_.waypoint : env.config().start;
    const double noise = kind_ == BehaviorKind::stitch_B ? layout_.b_start_noise : env.config().start_noise;
    for (int d = 0; d < 2; ++d) s[d] = std::clamp(center[d] + uniform<double>(rng, -noise, noise), -1.0, 1.0);
    return s;
  }

  Vec2 act(const PointState& s, Rng& rng) const {
    switch (kind_) {
      case BehaviorKind::expert: return pd_action(s, goal_);
      case BehaviorKind::medium: {
        Vec2 a = 0.5 * pd_action(s, goal_);
        for (int d = 0; d < 2; ++d) a[d] += 0.3 * standard_normal<double>(rng);
        return a.cwiseMax(-1.0).cwiseMin(1.0);
      }
      case BehaviorKind::stitch_A:
      case BehaviorKind::stitch_B: return pd_action(s, target_);
    }
    return Vec2::Zero();
  }

 private:
  BehaviorKind kind_;
  Vec2 goal_;
  StitchLayout layout_;
  Vec2 target_;
};

inline Vec2 scripted_behavior(BehaviorKind kind, const PointState& s, const Vec2& goal, Rng& rng,
                              const StitchLayout& layout = {}) {
  ScriptedBehavior b(kind, goal, layout);
  return b.act(s, rng);
}

struct RolloutStats {
  double ret = 0.0;
  bool success = false;
  int steps = 0;
};

/// Records `episodes` behavior rollouts as transitions (with the next action
/// actually taken) into `ds`.
inline void record_rollouts(OfflineDataset& ds, PointMassEnv env, ScriptedBehavior behavior, int episodes, Rng& rng) {
  auto to_f = [](const auto& v) {
    std::vector<float> out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
  };
  for (int ep = 0; ep < episodes; ++ep) {
    behavior.begin_episode(rng);
    PointState s = env.reset_to(behavior.start_state(env, rng));
    Vec2 a = behavior.act(s, rng);
    for (;;) {
      const auto res = env.step(s, a);
      Vec2 a_next = Vec2::Zero();
      const bool terminal = res.done && res.success;
      if (!terminal) a_next = behavior.act(res.next, rng);
      Transition t;
      t.s = to_f(s);
      t.a = to_f(a);
      t.r = static_cast<float>(res.reward);
      t.s_next = to_f(res.next);
      t.a_next = to_f(a_next);
      // Horizon truncation is not a true terminal; only goal entry is.
      t.done = terminal;
      ds.append(t);
      if (res.done) break;
      s = res.next;
      a = a_next;
    }
  }
}

/// Return of one behavior episode from the env's configured start.
inline RolloutStats behavior_rollout(PointMassEnv env, ScriptedBehavior behavior, Rng& rng) {
  behavior.begin_episode(rng);
  PointState s = env.reset(rng);
  RolloutStats st;
  for (;;) {
    const auto res = env.step(s, behavior.act(s, rng));
    st.ret += res.reward;
    ++st.steps;
    st.success = st.success || res.success;
    if (res.done) break;
    s = res.next;
  }
  return st;
}

}  // namespace bpr::envs

#endif  // BPR_ENVS_POINTMASS_HPP
