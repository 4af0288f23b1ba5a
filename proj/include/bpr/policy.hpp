#ifndef BPR_POLICY_HPP
#define BPR_POLICY_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "bpr/core.hpp"
#include "bpr/nn/dense_net.hpp"
#include "bpr/nn/optimizer.hpp"

namespace bpr {

struct PolicyArch {
  std::vector<int> hidden{256, 256};
  bool layer_norm = false;
};

/// Squashed-Gaussian actor. The network emits (mean, raw log-std); the
/// log-std is squashed smoothly into [kLogStdMin, kLogStdMax].
template <class T>
class TanhGaussianPolicy {
 public:
  static constexpr T kLogStdMin = T(-5);
  static constexpr T kLogStdMax = T(2);
  static constexpr T kActionClip = T(1) - T(1e-6);

  TanhGaussianPolicy() = default;
  TanhGaussianPolicy(nn::DenseNet<T> net, int state_dim, int action_dim)
      : net_(std::move(net)), state_dim_(state_dim), action_dim_(action_dim) {
    if (net_.input_dim() != state_dim || net_.output_dim() != 2 * action_dim) {
      throw ShapeError("TanhGaussianPolicy: network must map state to 2 * action_dim outputs");
    }
  }

  static TanhGaussianPolicy make(int state_dim, int action_dim, const PolicyArch& arch, Rng& rng) {
    nn::MlpOptions opt;
    opt.layer_norm = arch.layer_norm;
    return TanhGaussianPolicy(nn::DenseNet<T>::mlp(state_dim, arch.hidden, 2 * action_dim, opt, rng), state_dim,
                              action_dim);
  }

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const nn::DenseNet<T>& net() const { return net_; }
  nn::DenseNet<T>& net() { return net_; }

  /// Number of sample / log-prob / action evaluations so far.
  long queries() const { return queries_; }
  void reset_queries() { queries_ = 0; }

  static T squash_log_std(T raw) { return kLogStdMin + T(0.5) * (kLogStdMax - kLogStdMin) * (std::tanh(raw) + T(1)); }

  /// log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)).
  static T log_jacobian(T u) {
    const T x = T(-2) * u;
    const T softplus = x > T(20) ? x : std::log1p(std::exp(x));
    return T(2) * (T(std::log(2.0)) - u - softplus);
  }

  struct Dist {
    Mat<T> mean;
    Mat<T> log_std;
    Mat<T> raw;
    nn::Tape<T> tape;
  };

  Dist dist(const Mat<T>& S, bool record) const {
    if (S.rows() != state_dim_) throw ShapeError("policy: state dim mismatch");
    Dist d;
    const Mat<T> out = record ? net_.forward(S, d.tape) : net_.forward(S);
    d.mean = out.topRows(action_dim_);
    d.raw = out.bottomRows(action_dim_);
    d.log_std = d.raw.unaryExpr([](T r) { return squash_log_std(r); });
    return d;
  }

  struct Sample {
    Mat<T> action;  // tanh(u)
    Mat<T> pre;     // u
    RowVec<T> log_prob;
  };

  /// u ~ N(mean, std^2), a = tanh(u). No gradient path through the sample.
  Sample sample(const Mat<T>& S, Rng& rng) const {
    ++queries_;
    const Dist d = dist(S, false);
    Sample out;
    out.pre.resize(action_dim_, S.cols());
    for (Eigen::Index c = 0; c < S.cols(); ++c)
      for (int k = 0; k < action_dim_; ++k)
        out.pre(k, c) = d.mean(k, c) + std::exp(d.log_std(k, c)) * standard_normal<T>(rng);
    out.action = out.pre.array().tanh().matrix();
    out.log_prob = log_prob_pre(d, out.pre);
    return out;
  }

  /// Joint log-density at pre-squash points u given the distribution.
  static RowVec<T> log_prob_pre(const Dist& d, const Mat<T>& U) {
    const T half_log_2pi = T(0.5 * std::log(2.0 * std::numbers::pi));
    RowVec<T> lp = RowVec<T>::Zero(U.cols());
    for (Eigen::Index c = 0; c < U.cols(); ++c) {
      T acc = T(0);
      for (Eigen::Index k = 0; k < U.rows(); ++k) {
        const T z = (U(k, c) - d.mean(k, c)) * std::exp(-d.log_std(k, c));
        acc += T(-0.5) * z * z - d.log_std(k, c) - half_log_2pi - log_jacobian(U(k, c));
      }
      lp[c] = acc;
    }
    return lp;
  }

  static Mat<T> pre_squash(const Mat<T>& A) {
    return A.unaryExpr([](T a) { return std::atanh(std::clamp(a, -kActionClip, kActionClip)); });
  }

  RowVec<T> log_prob(const Mat<T>& S, const Mat<T>& A) const {
    ++queries_;
    if (A.rows() != action_dim_ || A.cols() != S.cols()) throw ShapeError("log_prob: action shape mismatch");
    return log_prob_pre(dist(S, false), pre_squash(A));
  }

  /// Deterministic evaluation action tanh(mean).
  Mat<T> mean_action(const Mat<T>& S) const {
    ++queries_;
    return dist(S, false).mean.array().tanh().matrix();
  }

  /// Differentiable log-density evaluation: one forward pass over the states,
  /// any number of action sets, then a single backward pass.
  class LogProbEval {
   public:
    LogProbEval(const TanhGaussianPolicy& p, const Mat<T>& S) : policy_(p), d_(p.dist(S, true)) {
      ++p.queries_;
      dmean_ = Mat<T>::Zero(d_.mean.rows(), d_.mean.cols());
      dlog_std_ = Mat<T>::Zero(d_.mean.rows(), d_.mean.cols());
    }

    const Dist& dist() const { return d_; }

    RowVec<T> log_prob(const Mat<T>& A) const { return log_prob_pre(d_, pre_squash(A)); }

    /// Adds coef[c] * d log pi(A[:, c] | s_c) to the pending output gradient.
    void accumulate(const Mat<T>& A, const RowVec<T>& coef) {
      const Mat<T> U = pre_squash(A);
      for (Eigen::Index c = 0; c < U.cols(); ++c)
        for (Eigen::Index k = 0; k < U.rows(); ++k) {
          const T inv_var = std::exp(T(-2) * d_.log_std(k, c));
          const T diff = U(k, c) - d_.mean(k, c);
          dmean_(k, c) += coef[c] * diff * inv_var;
          dlog_std_(k, c) += coef[c] * (diff * diff * inv_var - T(1));
        }
    }

    void backward(nn::Gradients<T>& grads) const {
      const Eigen::Index ad = d_.mean.rows();
      Mat<T> g(2 * ad, d_.mean.cols());
      g.topRows(ad) = dmean_;
      const T half_range = T(0.5) * (kLogStdMax - kLogStdMin);
      g.bottomRows(ad) =
          (dlog_std_.array() * half_range * (T(1) - d_.raw.array().tanh().square())).matrix();
      policy_.net().backward(d_.tape, g, grads);
    }

   private:
    const TanhGaussianPolicy& policy_;
    Dist d_;
    Mat<T> dmean_;
    Mat<T> dlog_std_;
  };

 private:
  nn::DenseNet<T> net_;
  int state_dim_ = 0;
  int action_dim_ = 0;
  mutable long queries_ = 0;
};

enum class SamplingMode { self_play, reference };

inline std::string to_string(SamplingMode m) { return m == SamplingMode::self_play ? "self-play" : "reference"; }

inline SamplingMode parse_sampling_mode(const std::string& s) {
  if (s == "self-play" || s == "self_play") return SamplingMode::self_play;
  if (s == "reference") return SamplingMode::reference;
  throw ConfigError("unknown sampling mode '" + s + "' (expected self-play or reference)");
}

/// Per-sample BPR residual:
/// (E2 - E1) - lambda * ((logpi1 - Q1) - (logpi2 - Q2)).
template <class T>
T bpr_residual(T e1, T e2, T q1, T q2, T lp1, T lp2, T lambda) {
  return (e2 - e1) - lambda * ((lp1 - q1) - (lp2 - q2));
}

/// Action pairs with their no-gradient energy and value evaluations.
template <class T>
struct PairBatch {
  Mat<T> states;
  Mat<T> a1;
  Mat<T> a2;
  RowVec<T> e1, e2, q1, q2;
};

/// Scalar fields evaluated without gradient: (states, actions) -> row of values.
template <class T>
using ScoreFn = std::function<RowVec<T>(const Mat<T>&, const Mat<T>&)>;

/// Draws (a1, a2) per the sampling mode and evaluates E and Q on both.
/// In reference mode `dataset_actions` supplies a1.
template <class T>
PairBatch<T> make_pairs(const TanhGaussianPolicy<T>& policy, const std::type_identity_t<Mat<T>>& states,
                        const std::type_identity_t<Mat<T>>* dataset_actions, SamplingMode mode,
                        const std::type_identity_t<ScoreFn<T>>& energy, const std::type_identity_t<ScoreFn<T>>& q,
                        Rng& rng) {
  PairBatch<T> pb;
  pb.states = states;
  if (mode == SamplingMode::reference) {
    if (!dataset_actions) throw ConfigError("reference sampling needs dataset actions");
    pb.a1 = *dataset_actions;
    pb.a2 = policy.sample(states, rng).action;
  } else {
    // One policy query produces both samples.
    Mat<T> S2(states.rows(), 2 * states.cols());
    S2 << states, states;
    const Mat<T> a = policy.sample(S2, rng).action;
    pb.a1 = a.leftCols(states.cols());
    pb.a2 = a.rightCols(states.cols());
  }
  pb.e1 = energy(states, pb.a1);
  pb.e2 = energy(states, pb.a2);
  pb.q1 = q(states, pb.a1);
  pb.q2 = q(states, pb.a2);
  return pb;
}

template <class T>
struct BprLoss {
  T loss = T(0);
  RowVec<T> residual;
};

/// Mean squared residual; accumulates policy gradients (through log pi only)
/// when `grads` is non-null.
template <class T>
BprLoss<T> bpr_objective(const TanhGaussianPolicy<T>& policy, const PairBatch<T>& pb, std::type_identity_t<T> lambda,
                         std::type_identity_t<nn::Gradients<T>>* grads) {
  if (!(lambda > T(0))) throw ConfigError("bpr: lambda must be positive");
  typename TanhGaussianPolicy<T>::LogProbEval eval(policy, pb.states);
  const RowVec<T> lp1 = eval.log_prob(pb.a1);
  const RowVec<T> lp2 = eval.log_prob(pb.a2);
  const Eigen::Index B = pb.states.cols();
  BprLoss<T> out;
  out.residual.resize(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    out.residual[i] = bpr_residual(pb.e1[i], pb.e2[i], pb.q1[i], pb.q2[i], lp1[i], lp2[i], lambda);
  }
  out.loss = out.residual.squaredNorm() / T(B);
  if (!std::isfinite(out.loss)) throw NumericError("bpr: non-finite loss");
  if (grads) {
    const RowVec<T> d = out.residual * (T(2) * lambda / T(B));
    eval.accumulate(pb.a1, -d);
    eval.accumulate(pb.a2, d);
    eval.backward(*grads);
  }
  return out;
}

/// Negative mean log-likelihood of dataset actions (behavioral cloning).
template <class T>
T bc_objective(const TanhGaussianPolicy<T>& policy, const std::type_identity_t<Mat<T>>& S,
               const std::type_identity_t<Mat<T>>& A, std::type_identity_t<nn::Gradients<T>>* grads) {
  typename TanhGaussianPolicy<T>::LogProbEval eval(policy, S);
  const RowVec<T> lp = eval.log_prob(A);
  const T loss = -lp.mean();
  if (!std::isfinite(loss)) throw NumericError("bc: non-finite loss");
  if (grads) {
    eval.accumulate(A, RowVec<T>::Constant(S.cols(), T(-1) / T(S.cols())));
    eval.backward(*grads);
  }
  return loss;
}

}  // namespace bpr

#endif  // BPR_POLICY_HPP
