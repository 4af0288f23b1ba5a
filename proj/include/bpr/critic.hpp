#ifndef BPR_CRITIC_HPP
#define BPR_CRITIC_HPP

#include <cmath>
#include <string>
#include <vector>

#include "bpr/core.hpp"
#include "bpr/dataset.hpp"
#include "bpr/nn/dense_net.hpp"
#include "bpr/nn/optimizer.hpp"
#include "bpr/policy.hpp"

namespace bpr {

enum class Regime { off_policy, onestep, ensemble_lcb };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::off_policy: return "off-policy";
    case Regime::onestep: return "onestep";
    case Regime::ensemble_lcb: return "ensemble";
  }
  return "?";
}

inline Regime parse_regime(const std::string& s) {
  if (s == "off-policy" || s == "off_policy") return Regime::off_policy;
  if (s == "onestep") return Regime::onestep;
  if (s == "ensemble" || s == "ensemble_lcb" || s == "ensemble-lcb") return Regime::ensemble_lcb;
  throw ConfigError("unknown regime '" + s + "' (expected off-policy, onestep or ensemble)");
}

inline int default_member_count(Regime r) { return r == Regime::ensemble_lcb ? 4 : 2; }

struct CriticConfig {
  Regime regime = Regime::off_policy;
  int members = 0;  // 0: regime default (2 / 2 / 4)
  std::vector<int> hidden{256, 256};
  bool layer_norm = true;
  double tau = 0.005;
  double alpha = 0.2;
  double gamma = 0.99;
  double omega = 2.0;
  double learning_rate = 3e-4;

  int member_count() const { return members > 0 ? members : default_member_count(regime); }

  void validate() const {
    if (member_count() < 1) throw ConfigError("critic: need at least one member");
    if (regime == Regime::ensemble_lcb && member_count() < 2) throw ConfigError("critic: LCB needs >= 2 members");
    if (alpha < 0.0) throw ConfigError("critic: alpha must be >= 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("critic: gamma must lie in [0, 1)");
    if (omega < 0.0) throw ConfigError("critic: omega must be >= 0");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("critic: tau must lie in [0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("critic: learning rate must be positive");
  }
};

/// Q-network ensemble with target copies. Members map concat(s, a) -> Q.
template <class T>
class CriticSet {
 public:
  CriticSet() = default;

  static CriticSet make(int state_dim, int action_dim, const CriticConfig& cfg, Rng& rng) {
    cfg.validate();
    CriticSet cs;
    cs.cfg_ = cfg;
    cs.state_dim_ = state_dim;
    cs.action_dim_ = action_dim;
    nn::MlpOptions opt;
    opt.layer_norm = cfg.layer_norm;
    nn::AdamWConfig ocfg;
    ocfg.learning_rate = cfg.learning_rate;
    for (int i = 0; i < cfg.member_count(); ++i) {
      cs.members_.push_back(nn::DenseNet<T>::mlp(state_dim + action_dim, cfg.hidden, 1, opt, rng));
      cs.targets_.push_back(cs.members_.back());
      cs.opts_.emplace_back(ocfg);
    }
    return cs;
  }

  /// Wraps caller-built networks (e.g. one-hot tabular critics).
  static CriticSet from_members(std::vector<nn::DenseNet<T>> members, int state_dim, int action_dim,
                                const CriticConfig& cfg) {
    CriticConfig c = cfg;
    c.members = static_cast<int>(members.size());
    c.validate();
    CriticSet cs;
    cs.cfg_ = c;
    cs.state_dim_ = state_dim;
    cs.action_dim_ = action_dim;
    nn::AdamWConfig ocfg;
    ocfg.learning_rate = c.learning_rate;
    for (auto& m : members) {
      if (m.input_dim() != state_dim + action_dim || m.output_dim() != 1) throw ShapeError("critic member shape");
      cs.targets_.push_back(m);
      cs.members_.push_back(std::move(m));
      cs.opts_.emplace_back(ocfg);
    }
    return cs;
  }

  const CriticConfig& config() const { return cfg_; }
  Regime regime() const { return cfg_.regime; }
  int size() const { return static_cast<int>(members_.size()); }
  const nn::DenseNet<T>& member(int i) const { return members_[i]; }
  nn::DenseNet<T>& member(int i) { return members_[i]; }
  const nn::DenseNet<T>& target(int i) const { return targets_[i]; }
  nn::DenseNet<T>& target(int i) { return targets_[i]; }
  const nn::AdamW<T>& optimizer(int i) const { return opts_[i]; }
  nn::AdamW<T>& optimizer(int i) { return opts_[i]; }

  Mat<T> input(const Mat<T>& S, const Mat<T>& A) const {
    if (S.rows() != state_dim_ || A.rows() != action_dim_ || S.cols() != A.cols()) {
      throw ShapeError("critic: state/action shape mismatch");
    }
    Mat<T> x(state_dim_ + action_dim_, S.cols());
    x.topRows(state_dim_) = S;
    x.bottomRows(action_dim_) = A;
    return x;
  }

  /// size() x B matrix of member (or target) values.
  Mat<T> member_values(const Mat<T>& S, const Mat<T>& A, bool use_targets = false) const {
    const Mat<T> x = input(S, A);
    const auto& nets = use_targets ? targets_ : members_;
    Mat<T> out(nets.size(), S.cols());
    for (std::size_t i = 0; i < nets.size(); ++i) out.row(i) = nets[i].forward(x).row(0);
    return out;
  }

  /// mean_i Q_i - omega * Var_i Q_i with population variance.
  RowVec<T> q_lcb(const Mat<T>& S, const Mat<T>& A) const {
    if (size() < 2) throw ConfigError("q_lcb: need at least two members");
    return lcb_from_values(member_values(S, A), T(cfg_.omega));
  }

  static RowVec<T> lcb_from_values(const Mat<T>& v, T omega) {
    const RowVec<T> mean = v.colwise().mean();
    const RowVec<T> var = (v.rowwise() - mean).array().square().colwise().mean().matrix();
    return mean - omega * var;
  }

  /// Value consumed by the policy objective (no gradient).
  RowVec<T> q_value(const Mat<T>& S, const Mat<T>& A) const {
    if (cfg_.regime == Regime::ensemble_lcb) return q_lcb(S, A);
    return member_values(S, A).colwise().minCoeff();
  }

  /// Off-policy soft target: r + (1-done) gamma (min_i Qbar_i(s', a') - alpha log pi(a'|s')), a' ~ pi.
  Mat<T> soft_bellman_target(const Batch<T>& b, const TanhGaussianPolicy<T>& policy, Rng& rng) const {
    if (cfg_.regime != Regime::off_policy) throw ConfigError("soft_bellman_target: regime must be off-policy");
    const auto next = policy.sample(b.s_next, rng);
    const Mat<T> qn = member_values(b.s_next, next.action, true);
    return soft_target_from(b, qn.colwise().minCoeff(), next.log_prob);
  }

  /// Soft target from precomputed min target values and log-probabilities at s'.
  Mat<T> soft_target_from(const Batch<T>& b, const RowVec<T>& q_min_next, const RowVec<T>& log_prob_next) const {
    if (q_min_next.size() != b.size() || log_prob_next.size() != b.size()) throw ShapeError("soft target: shape mismatch");
    return finish_target(b, q_min_next - T(cfg_.alpha) * log_prob_next);
  }

  /// SARSA target on the stored next action. Onestep: min over targets.
  /// Ensemble: one row per member, each bootstrapping its own target.
  Mat<T> sarsa_target(const Batch<T>& b) const {
    if (cfg_.regime == Regime::off_policy) throw ConfigError("sarsa_target: regime must be onestep or ensemble");
    for (Eigen::Index c = 0; c < b.size(); ++c) {
      if (b.done[c] == T(0) && !b.a_next.col(c).allFinite()) {
        throw DatasetError("sarsa_target: missing next action on non-terminal row " + std::to_string(c));
      }
    }
    const Mat<T> qn = member_values(b.s_next, b.a_next, true);
    if (cfg_.regime == Regime::onestep) return finish_target(b, qn.colwise().minCoeff());
    Mat<T> y(qn.rows(), qn.cols());
    for (Eigen::Index i = 0; i < qn.rows(); ++i) y.row(i) = finish_target(b, qn.row(i));
    return y;
  }

  /// Dispatches to the regime's target op.
  Mat<T> target_for(const Batch<T>& b, const TanhGaussianPolicy<T>* policy, Rng& rng) const {
    if (cfg_.regime == Regime::off_policy) {
      if (!policy) throw ConfigError("off-policy target needs the policy");
      return soft_bellman_target(b, *policy, rng);
    }
    return sarsa_target(b);
  }

  /// One optimizer step per member on mean squared error to `y` (1 x B shared
  /// or size() x B per member). Returns per-member losses.
  std::vector<double> update(const Batch<T>& b, const Mat<T>& y) {
    if (y.cols() != b.size() || (y.rows() != 1 && y.rows() != size())) throw ShapeError("critic update: target shape");
    const Mat<T> x = input(b.s, b.a);
    std::vector<double> losses;
    for (int i = 0; i < size(); ++i) {
      nn::Tape<T> tape;
      const RowVec<T> q = members_[i].forward(x, tape).row(0);
      const RowVec<T> diff = q - y.row(y.rows() == 1 ? 0 : i);
      const T loss = diff.squaredNorm() / T(b.size());
      if (!std::isfinite(loss)) throw NumericError("critic update: non-finite loss for member " + std::to_string(i));
      auto grads = members_[i].zero_grads();
      members_[i].backward(tape, Mat<T>(diff * (T(2) / T(b.size()))), grads);
      opts_[i].step(members_[i], grads);
      members_[i].refresh_spectral(1);
      losses.push_back(double(loss));
    }
    return losses;
  }

  /// Mean squared error of member i against y without updating (for grad checks).
  T member_loss(int i, const Batch<T>& b, const Mat<T>& y, nn::Gradients<T>* grads) const {
    const Mat<T> x = input(b.s, b.a);
    nn::Tape<T> tape;
    const RowVec<T> q = grads ? members_[i].forward(x, tape).row(0) : members_[i].forward(x).row(0);
    const RowVec<T> diff = q - y.row(y.rows() == 1 ? 0 : i);
    if (grads) members_[i].backward(tape, Mat<T>(diff * (T(2) / T(b.size()))), *grads);
    return diff.squaredNorm() / T(b.size());
  }

  void target_soft_update() {
    for (int i = 0; i < size(); ++i) nn::soft_update(targets_[i], members_[i], T(cfg_.tau));
  }

 private:
  Mat<T> finish_target(const Batch<T>& b, const RowVec<T>& bootstrap) const {
    Mat<T> y(1, b.size());
    for (Eigen::Index c = 0; c < b.size(); ++c) {
      y(0, c) = b.r[c] + (T(1) - b.done[c]) * T(cfg_.gamma) * (b.done[c] != T(0) ? T(0) : bootstrap[c]);
      if (!std::isfinite(y(0, c))) {
        throw NumericError("critic target: non-finite value at row " + std::to_string(c) +
                           " (r=" + std::to_string(double(b.r[c])) + ", bootstrap=" +
                           std::to_string(double(bootstrap[c])) + ")");
      }
    }
    return y;
  }

  CriticConfig cfg_;
  int state_dim_ = 0;
  int action_dim_ = 0;
  std::vector<nn::DenseNet<T>> members_;
  std::vector<nn::DenseNet<T>> targets_;
  std::vector<nn::AdamW<T>> opts_;
};

}  // namespace bpr

#endif  // BPR_CRITIC_HPP
