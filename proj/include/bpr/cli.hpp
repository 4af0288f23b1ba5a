#ifndef BPR_CLI_HPP
#define BPR_CLI_HPP

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpr/config.hpp"
#include "bpr/dataset.hpp"
#include "bpr/ebm.hpp"
#include "bpr/nn/checkpoint.hpp"
#include "bpr/oracle/suite.hpp"
#include "bpr/plot.hpp"
#include "bpr/tasks.hpp"
#include "bpr/trainer.hpp"

namespace bpr::cli {

/// A required input (dataset, run directory, config file) is absent.
class MissingInput : public Error {
 public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Flags shared by the subcommands. Unset optionals leave the config alone.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> lambda;
  std::optional<std::string> regime;
  std::optional<std::string> mode;
  std::optional<long> steps;
  bool full = false;
  std::optional<std::string> task;
  std::optional<int> episodes;
  std::string dataset;
  std::string ebm;
  std::string algo = "bpr";
  bool resume = false;
  std::string run;
  std::string values = "0.5,1,1.5,2";
  int instances = 100;
};

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw MissingInput(what + " is required");
  if (!std::filesystem::exists(path)) throw MissingInput(what + " not found: " + path);
}

/// Config file (if any) with the flags layered on top, parsed strictly.
/// `steps_key` is the TrainConfig field that --steps overrides.
inline RunConfig resolve(const Flags& f, const std::string& steps_key = "steps",
                         const std::optional<TaskKind>& task_from_data = std::nullopt) {
  json j = json::object();
  if (!f.config.empty()) {
    require_file(f.config, "--config");
    j = read_json_file(f.config);
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  }
  if (f.full) j["full"] = true;
  if (f.task) j["task"] = *f.task;
  if (task_from_data) {
    if (j.contains("task") && j["task"].is_string() && parse_task(j["task"].get<std::string>()) != *task_from_data) {
      throw ConfigError("task '" + j["task"].get<std::string>() + "' does not match the dataset (" +
                        to_string(*task_from_data) + ")");
    }
    j["task"] = to_string(*task_from_data);
  }
  if (f.episodes) j["episodes"] = *f.episodes;
  if (!f.dataset.empty()) j["dataset"] = f.dataset;
  if (f.out) j["out"] = *f.out;
  json& t = j["train"];
  if (t.is_null()) t = json::object();
  if (f.seed) t["seed"] = *f.seed;
  if (f.lambda) t["lambda"] = *f.lambda;
  if (f.regime) t["regime"] = *f.regime;
  if (f.mode) t["mode"] = *f.mode;
  if (f.steps) t[steps_key] = *f.steps;
  return run_config_from_json(j);
}

inline OfflineDataset load_dataset(const std::string& path) {
  require_file(path, "--dataset");
  return OfflineDataset::load(path);
}

inline TaskKind dataset_task(const OfflineDataset& ds) { return parse_task(ds.header().env_tag); }

inline EnergyModel<float> load_ebm(const std::string& path, const OfflineDataset& ds) {
  require_file(path, "--ebm");
  EnergyModel<float> m(nn::load_checkpoint<float>(path), static_cast<int>(ds.state_dim()),
                       static_cast<int>(ds.action_dim()));
  m.set_trained(true);
  return m;
}

inline TrainHooks task_hooks(const TaskSpec& task) {
  TrainHooks h;
  if (task.kind == TaskKind::bandit) h.known_q = bandit_known_q(task.bandit);
  return h;
}

inline std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--values: not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--values: empty list");
  return out;
}

inline int threads_from_env() {
  const char* v = std::getenv("BPR_THREADS");
  if (!v || !*v) return 1;
  try {
    return std::max(1, std::stoi(v));
  } catch (const std::exception&) {
    throw ConfigError(std::string("BPR_THREADS: not an integer: '") + v + "'");
  }
}

inline json eval_json(const EvalResult& r) {
  return {{"eval_mean", r.mean}, {"eval_std", r.std}, {"success_rate", r.success_rate}, {"episodes", r.episodes}};
}

inline int cmd_gen_data(const Flags& f, std::ostream& out) {
  const RunConfig rc = resolve(f);
  const OfflineDataset ds = make_task_dataset(rc.task_spec(), rc.train.seed);
  std::filesystem::create_directories(rc.out);
  const std::string path = rc.out + "/dataset.bprd";
  ds.save(path);
  write_json_file(rc.out + "/config.json", to_json(rc));
  out << json{{"dataset", path}, {"task", to_string(rc.task)}, {"transitions", ds.count()}}.dump() << "\n";
  return kExitOk;
}

/// Bandit action grid strictly inside (-1, 1).
inline Mat<float> action_grid(int n = 201) {
  Mat<float> g(1, n);
  for (int i = 0; i < n; ++i) g(0, i) = static_cast<float>(-0.995 + 1.99 * i / (n - 1));
  return g;
}

inline std::vector<double> to_std(const Mat<float>& row) {
  std::vector<double> v(row.cols());
  for (Eigen::Index i = 0; i < row.cols(); ++i) v[i] = row(0, i);
  return v;
}

/// Rescales to a peak of 1 so densities share the reward's axis.
inline std::vector<double> peak_normalized(std::vector<double> v) {
  double hi = 0.0;
  for (double x : v) hi = std::max(hi, x);
  if (hi > 0.0)
    for (double& x : v) x /= hi;
  return v;
}

inline std::vector<double> ebm_density(const EnergyModel<float>& m, const Mat<float>& grid) {
  const Vec<double> p = density_grid(m, Vec<float>::Zero(1), grid);
  return std::vector<double>(p.data(), p.data() + p.size());
}

inline std::vector<double> policy_density(const TanhGaussianPolicy<float>& pi, const Mat<float>& grid) {
  const RowVec<float> lp = pi.log_prob(Mat<float>::Zero(1, grid.cols()), grid);
  std::vector<double> v(lp.size());
  for (Eigen::Index i = 0; i < lp.size(); ++i) v[i] = std::exp(double(lp[i]));
  return v;
}

inline std::vector<double> reward_curve(const envs::BanditSpec& spec, const Mat<float>& grid) {
  std::vector<double> v(grid.cols());
  for (Eigen::Index i = 0; i < grid.cols(); ++i) v[i] = envs::bandit_reward(spec, grid(0, i));
  return v;
}

inline int cmd_train_ebm(const Flags& f, std::ostream& out) {
  const OfflineDataset ds = load_dataset(f.dataset);
  const RunConfig rc = resolve(f, "ebm_steps", dataset_task(ds));
  EbmTrace trace;
  const auto model = pretrain_ebm(rc.train, ds, &trace);
  std::filesystem::create_directories(rc.out + "/checkpoints");
  std::filesystem::create_directories(rc.out + "/plots");
  write_json_file(rc.out + "/config.json", to_json(rc));
  const std::string path = rc.out + "/checkpoints/ebm.bprw";
  nn::save_checkpoint(path, model.net(), "ebm");
  std::string csv = "step,loss\n";
  plot::Series s{"InfoNCE loss", {}, {}};
  for (std::size_t i = 0; i < trace.loss.size(); ++i) {
    csv += std::to_string(i) + "," + csv_number(trace.loss[i]) + "\n";
    s.x.push_back(double(i));
    s.y.push_back(trace.loss[i]);
  }
  write_text_file(rc.out + "/ebm_loss.csv", csv);
  if (!s.x.empty()) plot::emit({"EBM pretraining", "step", "loss", {s}, false}, rc.out + "/plots/ebm_loss.svg");
  if (rc.task == TaskKind::bandit) {
    const auto grid = action_grid();
    plot::emit({"EBM density", "action", "density", {{"softmax(-E)", to_std(grid), ebm_density(model, grid)}}, false},
               rc.out + "/plots/ebm_density.svg");
  }
  json j{{"ebm", path}, {"steps", rc.train.ebm_steps}};
  j["final_loss"] = trace.loss.empty() ? json(nullptr) : json(trace.loss.back());
  out << j.dump() << "\n";
  return kExitOk;
}

inline int cmd_train(const Flags& f, std::ostream& out) {
  const OfflineDataset ds = load_dataset(f.dataset);
  const RunConfig rc = resolve(f, "steps", dataset_task(ds));
  const TaskSpec task = rc.task_spec();
  TrainHooks hooks = task_hooks(task);
  hooks.run_dir = rc.out;
  hooks.resume = f.resume;
  std::optional<EnergyModel<float>> ebm;
  if (!f.ebm.empty()) {
    ebm = load_ebm(f.ebm, ds);
    hooks.ebm = &*ebm;
  }
  RunArtifacts art;
  if (f.algo == "bpr") {
    art = train_bpr(rc.train, ds, task, hooks);
  } else if (f.algo == "bc") {
    art = train_bc(rc.train, ds, task, hooks);
  } else {
    throw ConfigError("--algo must be bpr or bc, got '" + f.algo + "'");
  }
  json j{{"run_dir", art.run_dir}, {"algo", f.algo}, {"updates", art.updates}};
  j.update(eval_json(art.final_eval));
  j["wall_seconds"] = art.wall_seconds;
  out << j.dump() << "\n";
  return kExitOk;
}

inline int cmd_eval(const Flags& f, std::ostream& out) {
  if (f.run.empty()) throw MissingInput("--run is required");
  const std::string policy_path = f.run + "/checkpoints/policy.bprw";
  require_file(policy_path, "policy checkpoint");
  const OfflineDataset ds = load_dataset(f.dataset);
  const RunConfig rc = resolve(f, "steps", dataset_task(ds));
  const TaskSpec task = rc.task_spec();
  TanhGaussianPolicy<float> pi(nn::load_checkpoint<float>(policy_path), task.state_dim(), task.action_dim());
  Rng rng(derive_seed(rc.train.seed, 1000003));
  const int episodes = f.episodes ? *f.episodes : rc.train.eval_episodes;
  out << json(eval_json(evaluate(pi, ds, task, episodes, rng))).dump() << "\n";
  return kExitOk;
}

/// Generate, pretrain, train both sampling modes against the known reward,
/// then plot reward/behavior, each fitted policy, and an overlay.
inline int cmd_bandit(const Flags& f, std::ostream& out) {
  Flags g = f;
  g.task = "bandit";
  const RunConfig rc = resolve(g);
  const TaskSpec task = rc.task_spec();
  const OfflineDataset ds = make_task_dataset(task, rc.train.seed);
  std::filesystem::create_directories(rc.out + "/plots");
  ds.save(rc.out + "/dataset.bprd");
  write_json_file(rc.out + "/config.json", to_json(rc));
  const auto ebm = pretrain_ebm(rc.train, ds);
  nn::save_checkpoint(rc.out + "/ebm.bprw", ebm.net(), "ebm");

  json summary = json::object();
  std::vector<std::vector<double>> dens;
  for (SamplingMode mode : {SamplingMode::reference, SamplingMode::self_play}) {
    TrainConfig c = rc.train;
    c.mode = mode;
    TrainHooks h = task_hooks(task);
    h.ebm = &ebm;
    h.run_dir = rc.out + "/" + to_string(mode);
    const auto art = train_bpr(c, ds, task, h);
    const double mean = art.policy.mean_action(Mat<float>::Zero(1, 1))(0, 0);
    summary[to_string(mode)] = {{"policy_mean", mean}, {"reward", envs::bandit_reward(task.bandit, mean)}};
    dens.push_back(peak_normalized(policy_density(art.policy, action_grid())));
  }
  const auto grid = action_grid();
  const auto x = to_std(grid);
  const auto reward = reward_curve(task.bandit, grid);
  const auto behavior = peak_normalized(ebm_density(ebm, grid));
  plot::emit({"(a) reward and behavior", "action", "scaled value", {{"reward", x, reward}, {"EBM density", x, behavior}},
              false},
             rc.out + "/plots/a_reward_behavior.svg");
  plot::emit({"(b) reference sampling", "action", "scaled value", {{"reward", x, reward}, {"policy", x, dens[0]}}, false},
             rc.out + "/plots/b_reference.svg");
  plot::emit({"(c) self-play", "action", "scaled value", {{"reward", x, reward}, {"policy", x, dens[1]}}, false},
             rc.out + "/plots/c_self_play.svg");
  plot::emit({"bandit overlay", "action", "scaled value",
              {{"reward", x, reward}, {"EBM density", x, behavior}, {"self-play policy", x, dens[1]}}, false},
             rc.out + "/plots/overlay.svg");
  write_json_file(rc.out + "/summary.json", summary);
  out << "self-play policy mean " << summary["self-play"]["policy_mean"].get<double>() << ", reference policy mean "
      << summary["reference"]["policy_mean"].get<double>() << "\n";
  return kExitOk;
}

inline int cmd_ablate(const Flags& f, std::ostream& out) {
  const OfflineDataset ds = load_dataset(f.dataset);
  const RunConfig rc = resolve(f, "steps", dataset_task(ds));
  const TaskSpec task = rc.task_spec();
  const auto values = parse_values(f.values);
  std::filesystem::create_directories(rc.out);
  write_json_file(rc.out + "/config.json", to_json(rc));
  const auto rows = ablate_lambda(rc.train, values, ds, task, rc.out, threads_from_env(), task_hooks(task));
  int failed = 0;
  for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
  out << json{{"csv", rc.out + "/ablation.csv"}, {"svg", rc.out + "/ablation.svg"}, {"arms", rows.size()},
              {"failed_arms", failed}}
             .dump()
      << "\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

inline json suite_report(const std::vector<oracle::CheckResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    arr.push_back({{"check", r.check},
                   {"instances", r.instances},
                   {"violations", r.violations},
                   {"worst_slack", std::isfinite(r.worst_slack) ? json(r.worst_slack) : json(nullptr)}});
  }
  return arr;
}

inline int cmd_verify(const Flags& f, std::ostream& out) {
  if (f.instances < 1) throw ConfigError("--instances must be positive");
  oracle::SuiteOptions o;
  o.instances = f.instances;
  o.bulk_instances = 10 * f.instances;
  const std::uint64_t seed = f.seed.value_or(0);
  const auto results = oracle::run_suite(seed, o);
  const std::string dir = f.out.value_or("verify");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/verify_report.json";
  write_json_file(path, suite_report(results));
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed();
  out << json{{"report", path}, {"passed", ok}}.dump() << "\n";
  return ok ? kExitOk : kExitFailure;
}

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const MissingInput*>(&e)) return "missing_input";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DatasetError*>(&e)) return "dataset";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  return "runtime";
}

/// Parses argv (without the program name) and runs one subcommand. Errors
/// print one JSON line {"error", "kind"} to `err`.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Behavior preference regression: offline RL pipeline"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&f](CLI::App* s) {
    s->add_option("--config", f.config, "run config JSON");
    s->add_option("--seed", f.seed, "seed");
    s->add_option("--out", f.out, "output directory");
    s->add_option("--lambda", f.lambda, "preference temperature (default 1.0)");
    s->add_option("--regime", f.regime, "off-policy | onestep | ensemble");
    s->add_option("--mode", f.mode, "self-play | reference");
    s->add_option("--steps", f.steps, "policy steps (EBM steps for train-ebm)");
    s->add_flag("--full", f.full, "large networks and step counts");
  };
  auto* gen = app.add_subcommand("gen-data", "generate an offline dataset");
  common(gen);
  gen->add_option("--task", f.task, "bandit | pointmass-expert | pointmass-mixed | stitch");
  gen->add_option("--episodes", f.episodes, "behavior episodes (point-mass tasks)");
  auto* tebm = app.add_subcommand("train-ebm", "pretrain the energy model");
  common(tebm);
  tebm->add_option("--dataset", f.dataset, "dataset file");
  auto* train = app.add_subcommand("train", "train a policy");
  common(train);
  train->add_option("--dataset", f.dataset, "dataset file");
  train->add_option("--ebm", f.ebm, "pretrained EBM checkpoint");
  train->add_option("--algo", f.algo, "bpr | bc");
  train->add_flag("--resume", f.resume, "continue from the run directory's checkpoint");
  auto* ev = app.add_subcommand("eval", "evaluate a trained policy");
  common(ev);
  ev->add_option("--run", f.run, "run directory");
  ev->add_option("--dataset", f.dataset, "dataset file (observation statistics)");
  ev->add_option("--episodes", f.episodes, "evaluation episodes");
  auto* bandit = app.add_subcommand("bandit", "reference sampling vs self-play on the bandit");
  common(bandit);
  auto* abl = app.add_subcommand("ablate-lambda", "sweep lambda with a shared seed");
  common(abl);
  abl->add_option("--dataset", f.dataset, "dataset file");
  abl->add_option("--values", f.values, "comma-separated lambda values");
  auto* ver = app.add_subcommand("verify", "run the tabular oracle checks");
  ver->add_option("--seed", f.seed, "seed");
  ver->add_option("--out", f.out, "report directory");
  ver->add_option("--instances", f.instances, "random instances per check");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
    err << app.help();
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(f, out);
    if (tebm->parsed()) return cmd_train_ebm(f, out);
    if (train->parsed()) return cmd_train(f, out);
    if (ev->parsed()) return cmd_eval(f, out);
    if (bandit->parsed()) return cmd_bandit(f, out);
    if (abl->parsed()) return cmd_ablate(f, out);
    if (ver->parsed()) return cmd_verify(f, out);
  } catch (const MissingInput& e) {
    err << json{{"error", e.what()}, {"kind", "missing_input"}}.dump() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << json{{"error", e.what()}, {"kind", error_kind(e)}}.dump() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace bpr::cli

#endif  // BPR_CLI_HPP
