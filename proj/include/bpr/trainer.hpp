#ifndef BPR_TRAINER_HPP
#define BPR_TRAINER_HPP

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bpr/binary_io.hpp"
#include "bpr/config.hpp"
#include "bpr/core.hpp"
#include "bpr/critic.hpp"
#include "bpr/dataset.hpp"
#include "bpr/ebm.hpp"
#include "bpr/nn/checkpoint.hpp"
#include "bpr/nn/optimizer.hpp"
#include "bpr/plot.hpp"
#include "bpr/policy.hpp"
#include "bpr/tasks.hpp"

namespace bpr {

namespace fs = std::filesystem;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One metrics.csv row. Missing values are NaN and written as empty fields.
struct MetricRow {
  long step = 0;
  double critic_loss = kNaN;
  double policy_loss = kNaN;
  double eval_mean = kNaN;
  double eval_std = kNaN;
};

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "step,critic_loss,policy_loss,eval_mean,eval_std\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + csv_number(r.critic_loss) + "," + csv_number(r.policy_loss) + "," +
           csv_number(r.eval_mean) + "," + csv_number(r.eval_std) + "\n";
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

/// Ordered record of pipeline calls, for checking the per-step call order.
struct CallLog {
  std::vector<std::string> events;
  void add(const char* e) { events.push_back(e); }
};

enum class Algo { bpr, bc };

inline std::string to_string(Algo a) { return a == Algo::bpr ? "bpr" : "bc"; }

struct TrainHooks {
  ScoreFn<float> known_q;                   // replaces the learned critic (the bandit's known reward)
  const EnergyModel<float>* ebm = nullptr;  // pretrained model; otherwise trained at run start
  CallLog* calls = nullptr;
  std::string run_dir;                      // empty: keep everything in memory
  bool resume = false;                      // continue from run_dir/checkpoints/state.bin if present
  long stop_after = -1;                     // stop early after this many updates (interrupted run)
};

struct RunArtifacts {
  json config;
  std::uint64_t seed = 0;
  std::string run_dir;
  std::vector<std::string> checkpoints;
  std::vector<MetricRow> metrics;
  double wall_seconds = 0.0;
  EvalResult final_eval;
  bool completed = false;
  long updates = 0;
  long phase1_policy_queries = 0;
  TanhGaussianPolicy<float> policy;
  std::optional<CriticSet<float>> critic;
  std::optional<EnergyModel<float>> ebm;
};

/// Deterministic tanh(mean) rollouts; raw observations are mapped through
/// the dataset's normalization stats.
inline EvalResult evaluate(const TanhGaussianPolicy<float>& policy, const OfflineDataset& ds, const TaskSpec& task,
                           int episodes, Rng& rng) {
  if (policy.state_dim() != task.state_dim() || policy.action_dim() != task.action_dim()) {
    throw ShapeError("evaluate: policy and environment dimensions differ");
  }
  ActFn act = [&](const Vec<double>& raw) {
    const Vec<float> obs = ds.normalize_observation<float>(raw.cast<float>().eval());
    return Vec<double>(policy.mean_action(obs).col(0).cast<double>());
  };
  return evaluate_actor(task, act, episodes, rng);
}

inline EbmConfig ebm_config(const TrainConfig& cfg) {
  EbmConfig e;
  e.steps = cfg.ebm_steps;
  e.batch_size = cfg.ebm_batch;
  e.negatives = cfg.ebm_negatives;
  e.learning_rate = cfg.ebm_lr;
  e.arch.hidden = cfg.ebm_hidden;
  e.seed = cfg.seed;
  return e;
}

/// EBM pretraining on its own seed stream, so runs sharing a seed share the model.
inline EnergyModel<float> pretrain_ebm(const TrainConfig& cfg, const OfflineDataset& ds, EbmTrace* trace = nullptr) {
  const EbmConfig e = ebm_config(cfg);
  Rng rng(derive_seed(cfg.seed, 2));
  auto model = EnergyModel<float>::make(ds.state_dim(), ds.action_dim(), e.arch, rng);
  return train_ebm(ds, e, std::move(model), rng, trace);
}

/// The bandit's reward as an exact critic (the task is one step long).
inline ScoreFn<float> bandit_known_q(const envs::BanditSpec& spec) {
  return [spec](const Mat<float>&, const Mat<float>& A) {
    RowVec<float> q(A.cols());
    for (Eigen::Index i = 0; i < A.cols(); ++i) {
      q[i] = static_cast<float>(envs::bandit_reward(spec, std::clamp(double(A(0, i)), -1.0, 1.0)));
    }
    return q;
  };
}

namespace detail {

class Run {
 public:
  Run(Algo algo, const TrainConfig& cfg, const OfflineDataset& ds, const TaskSpec& task, const TrainHooks& hooks)
      : algo_(algo), cfg_(cfg), ds_(ds), task_(task), hooks_(hooks), rng_(derive_seed(cfg.seed, 1)) {
    cfg_.validate();
    if (ds_.empty()) throw DatasetError("train: dataset is empty");
    if (ds_.state_dim() != task_.state_dim() || ds_.action_dim() != task_.action_dim()) {
      throw ShapeError("train: dataset dimensions do not match the task");
    }
    if (cfg_.reward_scale != 1.0) ds_.scale_rewards(static_cast<float>(cfg_.reward_scale));
    config_ = json::object();
    config_["algo"] = to_string(algo_);
    config_["task"] = to_string(task_.kind);
    config_["dataset_transitions"] = ds.count();
    config_["train"] = to_json(cfg_);

    Rng init(derive_seed(cfg_.seed, 3));
    PolicyArch pa;
    pa.hidden = cfg_.policy_hidden;
    policy_ = TanhGaussianPolicy<float>::make(ds_.state_dim(), ds_.action_dim(), pa, init);
    nn::AdamWConfig po;
    po.learning_rate = cfg_.policy_lr;
    popt_ = nn::AdamW<float>(po);
    if (algo_ == Algo::bpr && !hooks_.known_q) {
      critic_ = CriticSet<float>::make(ds_.state_dim(), ds_.action_dim(), cfg_.critic(), init);
    }
    phase1_ = (algo_ == Algo::bpr && critic_ && cfg_.regime != Regime::off_policy) ? cfg_.phase1_steps() : 0;
    total_ = phase1_ + cfg_.steps;
  }

  RunArtifacts execute() {
    const auto t0 = std::chrono::steady_clock::now();
    prepare_dir();
    bool resumed = false;
    if (hooks_.resume && !dir_.empty() && fs::exists(state_path())) {
      load_state();
      resumed = true;
    }
    if (!resumed && algo_ == Algo::bpr) {
      if (hooks_.ebm) {
        ebm_ = *hooks_.ebm;
      } else if (cfg_.ebm_steps > 0) {
        ebm_ = pretrain_ebm(cfg_, ds_);
      } else {
        Rng ebm_rng(derive_seed(cfg_.seed, 2));
        ebm_ = EnergyModel<float>::make(ds_.state_dim(), ds_.action_dim(), ebm_config(cfg_).arch, ebm_rng);
      }
    }

    RunArtifacts art;
    while (done_ < total_) {
      if (hooks_.stop_after >= 0 && done_ >= hooks_.stop_after) break;
      update();
      ++done_;
      after_update();
    }
    art.completed = done_ == total_;
    if (art.completed) {
      save_all();
      write_plots();
    }
    art.final_eval = last_eval_ ? *last_eval_ : run_eval();
    art.config = config_;
    art.seed = cfg_.seed;
    art.run_dir = dir_;
    art.checkpoints = checkpoint_paths_;
    art.metrics = rows_;
    art.updates = done_;
    art.phase1_policy_queries = phase1_queries_;
    art.policy = policy_;
    art.critic = critic_;
    art.ebm = ebm_;
    art.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!dir_.empty() && art.completed) write_summary(art);
    return art;
  }

 private:
  void log(const char* e) const {
    if (hooks_.calls) hooks_.calls->add(e);
  }

  bool in_phase1() const { return done_ < phase1_; }

  void update() {
    try {
      if (in_phase1()) {
        value_update_phase1();
      } else if (algo_ == Algo::bc) {
        bc_update();
      } else {
        bpr_update();
      }
    } catch (const Error& e) {
      throw_at_step(e);
    }
  }

  [[noreturn]] void throw_at_step(const Error& e) const {
    const std::string msg = "step " + std::to_string(done_) + ": " + e.what();
    if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
    if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
    if (dynamic_cast<const DatasetError*>(&e)) throw DatasetError(msg);
    if (dynamic_cast<const ShapeError*>(&e)) throw ShapeError(msg);
    throw Error(msg);
  }

  Batch<float> sample() {
    log("sample_batch");
    return ds_.sample_batch<float>(static_cast<std::size_t>(cfg_.batch_size), rng_);
  }

  void record_critic(const std::vector<double>& losses) {
    double m = 0.0;
    for (double l : losses) m += l;
    critic_acc_ += m / losses.size();
    ++critic_n_;
  }

  // Onestep / ensemble value training; the learned policy is never queried.
  void value_update_phase1() {
    const long before = policy_.queries();
    const auto b = sample();
    log("critic_target");
    const Mat<float> y = critic_->sarsa_target(b);
    log("critic_update");
    record_critic(critic_->update(b, y));
    log("target_update");
    critic_->target_soft_update();
    phase1_queries_ += policy_.queries() - before;
  }

  void bpr_update() {
    if (!ebm_ || !ebm_->trained()) throw ConfigError("bpr: energy model is untrained");
    const auto b = sample();
    if (critic_ && cfg_.regime == Regime::off_policy) {
      log("critic_target");
      const Mat<float> y = critic_->soft_bellman_target(b, policy_, rng_);
      log("critic_update");
      record_critic(critic_->update(b, y));
      log("target_update");
      critic_->target_soft_update();
    }
    ScoreFn<float> energy = [this](const Mat<float>& S, const Mat<float>& A) {
      log("energy");
      return ebm_->energies(S, A);
    };
    ScoreFn<float> q = [this](const Mat<float>& S, const Mat<float>& A) {
      log("q");
      return hooks_.known_q ? hooks_.known_q(S, A) : critic_->q_value(S, A);
    };
    log("pair_sample");
    const auto pairs = make_pairs(policy_, b.s, &b.a, cfg_.mode, energy, q, rng_);
    auto grads = policy_.net().zero_grads();
    BprLoss<float> loss;
    try {
      loss = bpr_objective(policy_, pairs, static_cast<float>(cfg_.lambda), &grads);
      log("policy_update");
      popt_.step(policy_.net(), grads);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + dump_batch(b));
    }
    policy_acc_ += double(loss.loss);
    ++policy_n_;
  }

  void bc_update() {
    const auto b = sample();
    auto grads = policy_.net().zero_grads();
    float loss = 0.0f;
    try {
      loss = bc_objective(policy_, b.s, b.a, &grads);
      log("policy_update");
      popt_.step(policy_.net(), grads);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + dump_batch(b));
    }
    policy_acc_ += double(loss);
    ++policy_n_;
  }

  std::string dump_batch(const Batch<float>& b) const {
    std::ostringstream msg;
    msg << " (batch of " << b.size() << ": |s| max " << b.s.cwiseAbs().maxCoeff() << ", |a| max "
        << b.a.cwiseAbs().maxCoeff() << ", r in [" << b.r.minCoeff() << ", " << b.r.maxCoeff() << "]";
    if (!dir_.empty()) {
      const std::string path = dir_ + "/failed_batch.csv";
      std::ofstream out(path);
      out << "index,r,done\n";
      for (Eigen::Index i = 0; i < b.size(); ++i) out << b.index[i] << "," << b.r[i] << "," << b.done[i] << "\n";
      msg << "; dumped to " << path;
    }
    msg << ")";
    return msg.str();
  }

  EvalResult run_eval() {
    Rng eval_rng(derive_seed(cfg_.seed, 1000003 + static_cast<std::uint64_t>(done_)));
    return evaluate(policy_, ds_, task_, cfg_.eval_episodes, eval_rng);
  }

  void after_update() {
    const bool last = done_ == total_;
    const bool policy_phase = done_ > phase1_;
    const bool eval = policy_phase && ((done_ - phase1_) % cfg_.eval_every == 0 || last);
    if (done_ % cfg_.log_every == 0 || eval || last) {
      MetricRow row;
      row.step = done_;
      if (critic_n_ > 0) row.critic_loss = critic_acc_ / critic_n_;
      if (policy_n_ > 0) row.policy_loss = policy_acc_ / policy_n_;
      if (eval) {
        last_eval_ = run_eval();
        row.eval_mean = last_eval_->mean;
        row.eval_std = last_eval_->std;
      }
      rows_.push_back(row);
      critic_acc_ = policy_acc_ = 0.0;
      critic_n_ = policy_n_ = 0;
    }
    const bool stopping = hooks_.stop_after >= 0 && done_ >= hooks_.stop_after;
    if (!last && (done_ % cfg_.checkpoint_every == 0 || stopping)) save_all();
  }

  // ---- run directory -------------------------------------------------------

  std::string state_path() const { return dir_ + "/checkpoints/state.bin"; }

  void prepare_dir() {
    if (hooks_.run_dir.empty()) return;
    dir_ = hooks_.run_dir;
    fs::create_directories(dir_ + "/checkpoints");
    fs::create_directories(dir_ + "/plots");
    const std::string cfg_path = dir_ + "/config.json";
    if (hooks_.resume && fs::exists(cfg_path)) {
      if (read_json_file(cfg_path) != config_) throw ConfigError("resume: config differs from " + cfg_path);
    } else {
      write_json_file(cfg_path, config_);
    }
  }

  void save_all() {
    if (dir_.empty()) return;
    checkpoint_paths_.clear();
    auto save = [&](const std::string& name, const nn::DenseNet<float>& net, const std::string& role) {
      const std::string path = dir_ + "/checkpoints/" + name;
      nn::save_checkpoint(path, net, role);
      checkpoint_paths_.push_back(path);
    };
    save("policy.bprw", policy_.net(), "policy");
    if (critic_) {
      for (int i = 0; i < critic_->size(); ++i) {
        save("critic_" + std::to_string(i) + ".bprw", critic_->member(i), "critic[" + std::to_string(i) + "]");
      }
    }
    if (ebm_) save("ebm.bprw", ebm_->net(), "ebm");
    save_state();
    checkpoint_paths_.push_back(state_path());
    write_text_file(dir_ + "/metrics.csv", metrics_csv(rows_));
  }

  void save_state() const {
    io::Writer w;
    w.magic("BPRS");
    w.u32(1);
    w.u64(static_cast<std::uint64_t>(done_));
    std::ostringstream rs;
    rs << rng_;
    w.string(rs.str());
    w.f64(critic_acc_);
    w.f64(policy_acc_);
    w.u64(static_cast<std::uint64_t>(critic_n_));
    w.u64(static_cast<std::uint64_t>(policy_n_));
    w.u64(static_cast<std::uint64_t>(phase1_queries_));
    w.u64(rows_.size());
    for (const auto& r : rows_) {
      w.u64(static_cast<std::uint64_t>(r.step));
      for (double v : {r.critic_loss, r.policy_loss, r.eval_mean, r.eval_std}) w.f64(v);
    }
    w.u8(last_eval_ ? 1 : 0);
    if (last_eval_) {
      for (double v : {last_eval_->mean, last_eval_->std, last_eval_->success_rate}) w.f64(v);
      w.u32(static_cast<std::uint32_t>(last_eval_->episodes));
    }
    nn::write_checkpoint(w, policy_.net(), "policy");
    popt_.write_state(w);
    w.u8(critic_ ? 1 : 0);
    if (critic_) {
      for (int i = 0; i < critic_->size(); ++i) {
        nn::write_checkpoint(w, critic_->member(i), "critic");
        nn::write_checkpoint(w, critic_->target(i), "target");
        critic_->optimizer(i).write_state(w);
      }
    }
    w.u8(ebm_ ? 1 : 0);
    if (ebm_) {
      w.u8(ebm_->trained() ? 1 : 0);
      nn::write_checkpoint(w, ebm_->net(), "ebm");
    }
    const std::string tmp = state_path() + ".tmp";
    w.save(tmp);
    fs::rename(tmp, state_path());
  }

  void load_state() {
    auto r = io::Reader::from_file(state_path());
    r.expect_magic("BPRS");
    if (r.u32() != 1) throw FormatError(state_path() + ": unsupported state version");
    done_ = static_cast<long>(r.u64());
    std::istringstream rs(r.string());
    rs >> rng_;
    critic_acc_ = r.f64();
    policy_acc_ = r.f64();
    critic_n_ = static_cast<long>(r.u64());
    policy_n_ = static_cast<long>(r.u64());
    phase1_queries_ = static_cast<long>(r.u64());
    rows_.resize(r.u64());
    for (auto& row : rows_) {
      row.step = static_cast<long>(r.u64());
      row.critic_loss = r.f64();
      row.policy_loss = r.f64();
      row.eval_mean = r.f64();
      row.eval_std = r.f64();
    }
    if (r.u8()) {
      EvalResult e;
      e.mean = r.f64();
      e.std = r.f64();
      e.success_rate = r.f64();
      e.episodes = static_cast<int>(r.u32());
      last_eval_ = e;
    }
    policy_ = TanhGaussianPolicy<float>(nn::read_checkpoint<float>(r), ds_.state_dim(), ds_.action_dim());
    popt_.read_state(r);
    if (r.u8()) {
      if (!critic_) throw FormatError(state_path() + ": state has critics but the run has none");
      for (int i = 0; i < critic_->size(); ++i) {
        critic_->member(i) = nn::read_checkpoint<float>(r);
        critic_->target(i) = nn::read_checkpoint<float>(r);
        critic_->optimizer(i).read_state(r);
      }
    }
    if (r.u8()) {
      const bool trained = r.u8() != 0;
      ebm_ = EnergyModel<float>(nn::read_checkpoint<float>(r), ds_.state_dim(), ds_.action_dim());
      ebm_->set_trained(trained);
    }
    if (done_ > total_) throw FormatError(state_path() + ": state is ahead of the configured step count");
  }

  void write_plots() const {
    if (dir_.empty()) return;
    plot::Series s{"eval return", {}, {}};
    for (const auto& r : rows_) {
      if (std::isnan(r.eval_mean)) continue;
      s.x.push_back(double(r.step));
      s.y.push_back(r.eval_mean);
    }
    if (s.x.empty()) return;
    plot::emit({to_string(algo_) + " on " + to_string(task_.kind), "update", "return", {s}, false},
               dir_ + "/plots/learning_curve.svg");
  }

  void write_summary(const RunArtifacts& art) const {
    json j = json::object();
    j["seed"] = art.seed;
    j["updates"] = art.updates;
    j["eval_mean"] = art.final_eval.mean;
    j["eval_std"] = art.final_eval.std;
    j["success_rate"] = art.final_eval.success_rate;
    j["eval_episodes"] = art.final_eval.episodes;
    j["wall_seconds"] = art.wall_seconds;
    write_json_file(dir_ + "/summary.json", j);
  }

  Algo algo_;
  TrainConfig cfg_;
  OfflineDataset ds_;
  TaskSpec task_;
  TrainHooks hooks_;
  json config_;
  Rng rng_;
  TanhGaussianPolicy<float> policy_;
  nn::AdamW<float> popt_;
  std::optional<CriticSet<float>> critic_;
  std::optional<EnergyModel<float>> ebm_;
  long phase1_ = 0;
  long total_ = 0;
  long done_ = 0;
  double critic_acc_ = 0.0;
  double policy_acc_ = 0.0;
  long critic_n_ = 0;
  long policy_n_ = 0;
  long phase1_queries_ = 0;
  std::vector<MetricRow> rows_;
  std::optional<EvalResult> last_eval_;
  std::string dir_;
  std::vector<std::string> checkpoint_paths_;
};

}  // namespace detail

/// Onestep or ensemble-LCB regime: SARSA value training, then policy updates
/// against the frozen critic.
inline RunArtifacts train_onestep(const TrainConfig& cfg, const OfflineDataset& ds, const TaskSpec& task,
                                  const TrainHooks& hooks = {}) {
  if (cfg.regime == Regime::off_policy) throw ConfigError("train_onestep: regime must be onestep or ensemble");
  return detail::Run(Algo::bpr, cfg, ds, task, hooks).execute();
}

/// BPR in any regime. Off-policy interleaves one critic update and one
/// policy update per step on the same batch; the other regimes run
/// train_onestep's two phases.
inline RunArtifacts train_bpr(const TrainConfig& cfg, const OfflineDataset& ds, const TaskSpec& task,
                              const TrainHooks& hooks = {}) {
  if (cfg.regime != Regime::off_policy && !hooks.known_q) return train_onestep(cfg, ds, task, hooks);
  return detail::Run(Algo::bpr, cfg, ds, task, hooks).execute();
}

/// Maximum-likelihood behavioral cloning with the same policy class and budget.
inline RunArtifacts train_bc(const TrainConfig& cfg, const OfflineDataset& ds, const TaskSpec& task,
                             const TrainHooks& hooks = {}) {
  return detail::Run(Algo::bc, cfg, ds, task, hooks).execute();
}

struct AblationRow {
  double lambda = 0.0;
  double mean = kNaN;
  double std = kNaN;
  std::string error;  // empty on success
};

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "lambda,mean,std,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ' ';
    out += csv_number(r.lambda) + "," + csv_number(r.mean) + "," + csv_number(r.std) + "," + err + "\n";
  }
  return out;
}

/// One train_bpr per lambda with a shared seed (and therefore a shared EBM).
/// Failed arms are recorded and the sweep continues. Arms run on up to
/// `threads` worker threads; results keep the input order.
inline std::vector<AblationRow> ablate_lambda(const TrainConfig& cfg, const std::vector<double>& values,
                                              const OfflineDataset& ds, const TaskSpec& task, const std::string& out_dir,
                                              int threads = 1, const TrainHooks& base = {}) {
  if (values.empty()) throw ConfigError("ablate_lambda: need at least one lambda value");
  std::optional<EnergyModel<float>> shared;
  TrainHooks hooks = base;
  if (!hooks.ebm && cfg.ebm_steps > 0) {
    shared = pretrain_ebm(cfg, ds);
    hooks.ebm = &*shared;
  }
  std::vector<AblationRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < values.size();) {
      rows[i].lambda = values[i];
      try {
        TrainConfig c = cfg;
        c.lambda = values[i];
        TrainHooks h = hooks;
        h.calls = nullptr;
        if (!out_dir.empty()) h.run_dir = out_dir + "/arms/" + std::to_string(i) + "_lambda_" + csv_number(values[i]);
        const auto art = train_bpr(c, ds, task, h);
        rows[i].mean = art.final_eval.mean;
        rows[i].std = art.final_eval.std;
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(values.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/ablation.csv", ablation_csv(rows));
    plot::Series s{"eval return", {}, {}};
    for (const auto& r : rows) {
      s.x.push_back(r.lambda);
      s.y.push_back(r.mean);
    }
    plot::emit({"lambda ablation on " + to_string(task.kind), "lambda", "return", {s}, true}, out_dir + "/ablation.svg");
  }
  return rows;
}

}  // namespace bpr

#endif  // BPR_TRAINER_HPP
