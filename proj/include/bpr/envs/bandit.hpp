#ifndef BPR_ENVS_BANDIT_HPP
#define BPR_ENVS_BANDIT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "bpr/core.hpp"
#include "bpr/dataset.hpp"

namespace bpr::envs {

struct BehaviorMode {
  double center = 0.0;
  double std = 0.05;
  double weight = 0.5;
};

/// One-step, one-dimensional bandit on [-1, 1] with a two-mode behavior
/// policy. Reward r(a) = 1 - (a - peak)^2; the peak sits outside the
/// behavior support so the best in-support action is the +0.5 mode.
struct BanditSpec {
  std::array<BehaviorMode, 2> modes{{{-0.5, 0.05, 0.5}, {0.5, 0.05, 0.5}}};
  double reward_peak = 0.8;

  void validate() const {
    double total = 0.0;
    for (const auto& m : modes) {
      if (!(m.center > -1.0 && m.center < 1.0)) throw ConfigError("bandit: mode center must lie in (-1, 1)");
      if (!(m.std > 0.0)) throw ConfigError("bandit: mode std must be positive");
      if (m.weight < 0.0) throw ConfigError("bandit: negative mode weight");
      total += m.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("bandit: mode weights must sum to 1");
  }
};

inline double bandit_reward(const BanditSpec& spec, double a) {
  if (!(a >= -1.0 && a <= 1.0)) throw DomainError("bandit_reward: action " + std::to_string(a) + " outside [-1, 1]");
  const double d = a - spec.reward_peak;
  return 1.0 - d * d;
}

/// Single-step transitions (dummy zero state, done = true).
inline OfflineDataset generate_bandit_dataset(const BanditSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  if (n < 2) throw ConfigError("generate_bandit_dataset: need n >= 2");
  OfflineDataset ds(1, 1, "bandit");
  std::bernoulli_distribution second(spec.modes[1].weight);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& mode = spec.modes[second(rng) ? 1 : 0];
    std::normal_distribution<double> noise(0.0, 1.0);
    const double a = std::clamp(mode.center + mode.std * noise(rng), -1.0, 1.0);
    Transition t;
    t.s = {0.0f};
    t.a = {static_cast<float>(a)};
    t.r = static_cast<float>(bandit_reward(spec, static_cast<float>(a)));
    t.s_next = {0.0f};
    t.a_next = {0.0f};
    t.done = true;
    ds.append(t);
  }
  return ds;
}

}  // namespace bpr::envs

#endif  // BPR_ENVS_BANDIT_HPP
