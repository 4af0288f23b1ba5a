#ifndef BPR_CONFIG_HPP
#define BPR_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpr/core.hpp"
#include "bpr/critic.hpp"
#include "bpr/policy.hpp"
#include "bpr/tasks.hpp"

namespace bpr {

using json = nlohmann::ordered_json;

/// Hyperparameters for one training run. Defaults are desk scale; full()
/// restores the large networks and step counts.
struct TrainConfig {
  double lambda = 1.0;
  double alpha = 0.2;
  double gamma = 0.99;
  double tau = 0.005;
  double omega = 2.0;
  Regime regime = Regime::off_policy;
  SamplingMode mode = SamplingMode::self_play;
  double policy_lr = 3e-4;
  double critic_lr = 3e-4;
  double ebm_lr = 1e-3;
  int batch_size = 64;
  long steps = 100000;     // policy updates
  long value_steps = 0;    // onestep / ensemble value updates before the policy phase; 0 means `steps`
  long ebm_steps = 2000;
  int ebm_batch = 64;
  int ebm_negatives = 64;
  std::vector<int> policy_hidden{64, 64};
  std::vector<int> critic_hidden{64, 64};
  std::vector<int> ebm_hidden{64, 64};
  bool critic_layer_norm = true;
  long eval_every = 10000;
  int eval_episodes = 10;
  long log_every = 1000;
  long checkpoint_every = 10000;
  std::uint64_t seed = 0;
  double reward_scale = 1.0;

  static TrainConfig full() {
    TrainConfig c;
    c.steps = 1000000;
    c.ebm_steps = 200000;
    c.batch_size = 256;
    c.ebm_batch = 256;
    c.ebm_negatives = 256;
    c.ebm_lr = 3e-4;
    c.policy_hidden = {256, 256};
    c.critic_hidden = {256, 256};
    c.ebm_hidden = {512, 512, 512, 512};
    c.eval_every = 50000;
    c.log_every = 5000;
    c.checkpoint_every = 50000;
    return c;
  }

  long phase1_steps() const { return value_steps > 0 ? value_steps : steps; }

  CriticConfig critic() const {
    CriticConfig c;
    c.regime = regime;
    c.hidden = critic_hidden;
    c.layer_norm = critic_layer_norm;
    c.tau = tau;
    c.alpha = alpha;
    c.gamma = gamma;
    c.omega = omega;
    c.learning_rate = critic_lr;
    return c;
  }

  void validate() const {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(policy_lr > 0.0 && critic_lr > 0.0 && ebm_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (batch_size < 1 || ebm_batch < 1 || ebm_negatives < 1) throw ConfigError("batch sizes must be >= 1");
    if (steps < 0 || value_steps < 0 || ebm_steps < 0) throw ConfigError("step counts must be >= 0");
    if (eval_every < 1 || log_every < 1 || checkpoint_every < 1) throw ConfigError("intervals must be >= 1");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
    critic().validate();
  }
};

/// Per-task presets: the sparse task uses gamma 0.999, rewards x100 and 100
/// evaluation episodes; the one-step bandit needs a single deterministic episode.
inline void apply_task_defaults(TrainConfig& c, TaskKind task) {
  if (task == TaskKind::stitch) {
    c.gamma = 0.999;
    c.reward_scale = 100.0;
    c.eval_episodes = 100;
  } else if (task == TaskKind::bandit) {
    c.eval_episodes = 1;
  }
}

namespace detail {

template <class F>
void visit(TrainConfig& c, F&& f) {
  f("lambda", c.lambda);
  f("alpha", c.alpha);
  f("gamma", c.gamma);
  f("tau", c.tau);
  f("omega", c.omega);
  f("regime", c.regime);
  f("mode", c.mode);
  f("policy_lr", c.policy_lr);
  f("critic_lr", c.critic_lr);
  f("ebm_lr", c.ebm_lr);
  f("batch_size", c.batch_size);
  f("steps", c.steps);
  f("value_steps", c.value_steps);
  f("ebm_steps", c.ebm_steps);
  f("ebm_batch", c.ebm_batch);
  f("ebm_negatives", c.ebm_negatives);
  f("policy_hidden", c.policy_hidden);
  f("critic_hidden", c.critic_hidden);
  f("ebm_hidden", c.ebm_hidden);
  f("critic_layer_norm", c.critic_layer_norm);
  f("eval_every", c.eval_every);
  f("eval_episodes", c.eval_episodes);
  f("log_every", c.log_every);
  f("checkpoint_every", c.checkpoint_every);
  f("seed", c.seed);
  f("reward_scale", c.reward_scale);
}

template <class V>
json put(const V& v) {
  if constexpr (std::is_same_v<V, Regime> || std::is_same_v<V, SamplingMode> || std::is_same_v<V, TaskKind>) {
    return to_string(v);
  } else {
    return v;
  }
}

template <class V>
void get(const json& j, const std::string& key, V& out) {
  try {
    if constexpr (std::is_same_v<V, Regime>) {
      out = parse_regime(j.get<std::string>());
    } else if constexpr (std::is_same_v<V, SamplingMode>) {
      out = parse_sampling_mode(j.get<std::string>());
    } else if constexpr (std::is_same_v<V, TaskKind>) {
      out = parse_task(j.get<std::string>());
    } else {
      out = j.get<V>();
    }
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const TrainConfig& cfg) {
  json j = json::object();
  TrainConfig c = cfg;
  detail::visit(c, [&](const char* k, auto& v) { j[k] = detail::put(v); });
  return j;
}

/// Starts from `base` and overrides the keys present; unknown keys are rejected.
inline TrainConfig train_config_from_json(const json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  std::set<std::string> known;
  detail::visit(base, [&](const char* k, auto&) { known.insert(k); });
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  detail::visit(base, [&](const char* k, auto& v) {
    if (j.contains(k)) detail::get(j.at(k), k, v);
  });
  base.validate();
  return base;
}

/// Command-line run: task, optional dataset path, output directory and the
/// training hyperparameters.
struct RunConfig {
  TaskKind task = TaskKind::bandit;
  int episodes = 50;
  std::size_t bandit_samples = 10000;
  std::string dataset;
  std::string out = "runs/default";
  bool full = false;
  TrainConfig train;

  TaskSpec task_spec() const {
    TaskSpec t;
    t.kind = task;
    t.episodes = episodes;
    t.bandit_samples = bandit_samples;
    return t;
  }
};

inline json to_json(const RunConfig& rc) {
  json j = json::object();
  j["task"] = to_string(rc.task);
  j["episodes"] = rc.episodes;
  j["bandit_samples"] = rc.bandit_samples;
  j["dataset"] = rc.dataset;
  j["out"] = rc.out;
  j["full"] = rc.full;
  j["train"] = to_json(rc.train);
  return j;
}

inline RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  static const std::set<std::string> known{"task", "episodes", "bandit_samples", "dataset", "out", "full", "train"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  RunConfig rc;
  if (j.contains("full")) detail::get(j.at("full"), "full", rc.full);
  if (rc.full) rc.train = TrainConfig::full();
  if (j.contains("task")) detail::get(j.at("task"), "task", rc.task);
  apply_task_defaults(rc.train, rc.task);
  if (j.contains("episodes")) detail::get(j.at("episodes"), "episodes", rc.episodes);
  if (j.contains("bandit_samples")) detail::get(j.at("bandit_samples"), "bandit_samples", rc.bandit_samples);
  if (j.contains("dataset")) detail::get(j.at("dataset"), "dataset", rc.dataset);
  if (j.contains("out")) detail::get(j.at("out"), "out", rc.out);
  if (j.contains("train")) rc.train = train_config_from_json(j.at("train"), rc.train);
  rc.train.validate();
  return rc;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw Error("write failed: " + path);
}

}  // namespace bpr

#endif  // BPR_CONFIG_HPP
