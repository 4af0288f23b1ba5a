#ifndef BPR_EBM_HPP
#define BPR_EBM_HPP

#include <cmath>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "bpr/core.hpp"
#include "bpr/dataset.hpp"
#include "bpr/nn/dense_net.hpp"
#include "bpr/nn/optimizer.hpp"

namespace bpr {

struct EbmArch {
  std::vector<int> hidden{512, 512, 512, 512};
  bool layer_norm = true;
  bool spectral_norm = true;
};

/// Implicit behavior model: E(s, a) with density proportional to exp(-E).
template <class T>
class EnergyModel {
 public:
  EnergyModel() = default;
  EnergyModel(nn::DenseNet<T> net, int state_dim, int action_dim)
      : net_(std::move(net)), state_dim_(state_dim), action_dim_(action_dim) {
    if (net_.input_dim() != state_dim + action_dim || net_.output_dim() != 1) {
      throw ShapeError("EnergyModel: network must map state+action to a scalar");
    }
  }

  static EnergyModel make(int state_dim, int action_dim, const EbmArch& arch, Rng& rng) {
    nn::MlpOptions opt;
    opt.layer_norm = arch.layer_norm;
    opt.spectral_norm = arch.spectral_norm;
    return EnergyModel(nn::DenseNet<T>::mlp(state_dim + action_dim, arch.hidden, 1, opt, rng), state_dim, action_dim);
  }

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  T action_low() const { return T(-1); }
  T action_high() const { return T(1); }
  bool trained() const { return trained_; }
  void set_trained(bool on) { trained_ = on; }
  const nn::DenseNet<T>& net() const { return net_; }
  nn::DenseNet<T>& net() { return net_; }

  /// Energies for paired columns of S and A.
  RowVec<T> energies(const Mat<T>& S, const Mat<T>& A) const {
    check(S, A);
    return net_.forward(concat(S, A)).row(0);
  }

  T energy(const Vec<T>& s, const Vec<T>& a) const {
    if (s.size() != state_dim_ || a.size() != action_dim_) throw ShapeError("energy: state/action dim mismatch");
    return energies(s, a)[0];
  }

  Mat<T> concat(const Mat<T>& S, const Mat<T>& A) const {
    Mat<T> x(state_dim_ + action_dim_, S.cols());
    x.topRows(state_dim_) = S;
    x.bottomRows(action_dim_) = A;
    return x;
  }

  void check(const Mat<T>& S, const Mat<T>& A) const {
    if (S.rows() != state_dim_ || A.rows() != action_dim_ || S.cols() != A.cols()) {
      throw ShapeError("EnergyModel: expected " + std::to_string(state_dim_) + "x B states and " +
                       std::to_string(action_dim_) + "x B actions");
    }
  }

 private:
  nn::DenseNet<T> net_;
  int state_dim_ = 0;
  int action_dim_ = 0;
  bool trained_ = false;
};

/// -log softmax(-E)[0] over the energies (positive first), max-subtracted.
template <class T>
T infonce_from_energies(const Vec<T>& e) {
  const T lowest = e.minCoeff();
  T sum = T(0);
  for (Eigen::Index j = 0; j < e.size(); ++j) sum += std::exp(lowest - e[j]);
  return e[0] - lowest + std::log(sum);
}

template <class T>
T infonce_loss(const EnergyModel<T>& m, const std::type_identity_t<Vec<T>>& s, const std::type_identity_t<Vec<T>>& a_pos,
               const std::vector<std::type_identity_t<Vec<T>>>& negatives) {
  if (negatives.empty()) throw ConfigError("infonce_loss: need at least one negative");
  Mat<T> S = s.replicate(1, negatives.size() + 1);
  Mat<T> A(m.action_dim(), negatives.size() + 1);
  A.col(0) = a_pos;
  for (std::size_t j = 0; j < negatives.size(); ++j) A.col(j + 1) = negatives[j];
  return infonce_from_energies<T>(m.energies(S, A).transpose());
}

/// Batch of B positives with K negatives each. Column layout of the evaluated
/// block: [pos_1..pos_B, neg_{1,1}..neg_{1,B}, ..., neg_{K,B}].
template <class T>
struct InfoNceBatch {
  Mat<T> states;     // state_dim x B
  Mat<T> positives;  // action_dim x B
  Mat<T> negatives;  // action_dim x (K*B), negative k for sample i at column k*B + i
  int k = 0;
};

template <class T>
InfoNceBatch<T> make_infonce_batch(const EnergyModel<T>& m, const std::type_identity_t<Mat<T>>& S,
                                   const std::type_identity_t<Mat<T>>& A, int negatives, Rng& rng) {
  if (negatives < 1) throw ConfigError("infonce: need at least one negative");
  InfoNceBatch<T> b;
  b.states = S;
  b.positives = A;
  b.k = negatives;
  b.negatives.resize(m.action_dim(), Eigen::Index(negatives) * S.cols());
  for (Eigen::Index i = 0; i < b.negatives.size(); ++i) {
    b.negatives.data()[i] = uniform<T>(rng, m.action_low(), m.action_high());
  }
  return b;
}

/// Mean InfoNCE loss over the batch; accumulates parameter gradients when
/// `grads` is non-null.
template <class T>
T infonce_batch_loss(const EnergyModel<T>& m, const InfoNceBatch<T>& b, std::type_identity_t<nn::Gradients<T>>* grads) {
  const Eigen::Index B = b.states.cols();
  const Eigen::Index K = b.k;
  Mat<T> S = b.states.replicate(1, K + 1);
  Mat<T> A(m.action_dim(), B * (K + 1));
  A.leftCols(B) = b.positives;
  A.rightCols(B * K) = b.negatives;
  nn::Tape<T> tape;
  const Mat<T> x = m.concat(S, A);
  const Mat<T> E = grads ? m.net().forward(x, tape) : m.net().forward(x);
  // Row i of the (K+1) x B view holds energies for slot i.
  Mat<T> view = Eigen::Map<const Mat<T>>(E.data(), B, K + 1).transpose();
  T total = T(0);
  Mat<T> dview(K + 1, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const Vec<T> e = view.col(i);
    const T lowest = e.minCoeff();
    Vec<T> p = (lowest - e.array()).exp().matrix();
    const T z = p.sum();
    total += e[0] - lowest + std::log(z);
    p /= z;
    dview.col(i) = -p;
    dview(0, i) += T(1);
  }
  const T loss = total / T(B);
  if (!std::isfinite(loss)) throw NumericError("infonce: non-finite loss");
  if (grads) {
    Mat<T> dview_t = dview.transpose() / T(B);
    Mat<T> dE = Eigen::Map<Mat<T>>(dview_t.data(), 1, B * (K + 1));
    m.net().backward(tape, dE, *grads);
  }
  return loss;
}

struct EbmConfig {
  long steps = 20000;
  int batch_size = 256;
  int negatives = 256;
  double learning_rate = 3e-4;
  EbmArch arch;
  std::uint64_t seed = 0;
};

struct EbmTrace {
  std::vector<double> loss;  // one entry per step
};

/// InfoNCE with uniform box negatives. Throws NumericError (with step index)
/// on a divergent loss.
template <class T>
EnergyModel<T> train_ebm(const OfflineDataset& ds, const EbmConfig& cfg, EnergyModel<T> model, Rng& rng,
                         EbmTrace* trace = nullptr,
                         const std::function<void(long, double)>& on_step = {}) {
  if (ds.empty()) throw DatasetError("train_ebm: dataset is empty");
  nn::AdamWConfig ocfg;
  ocfg.learning_rate = cfg.learning_rate;
  nn::AdamW<T> opt(ocfg);
  for (long step = 0; step < cfg.steps; ++step) {
    const auto batch = ds.sample_batch<T>(cfg.batch_size, rng);
    const auto nb = make_infonce_batch(model, batch.s, batch.a, cfg.negatives, rng);
    auto grads = model.net().zero_grads();
    T loss;
    try {
      loss = infonce_batch_loss(model, nb, &grads);
    } catch (const NumericError& e) {
      throw NumericError("train_ebm: step " + std::to_string(step) + ": " + e.what());
    }
    opt.step(model.net(), grads);
    model.net().refresh_spectral(1);
    if (trace) trace->loss.push_back(double(loss));
    if (on_step) on_step(step, double(loss));
  }
  if (cfg.steps > 0) model.set_trained(true);
  return model;
}

/// softmax(-e), max-subtracted.
inline Vec<double> softmax_neg(const Vec<double>& e) {
  const double lowest = e.minCoeff();
  Vec<double> p = (lowest - e.array()).exp().matrix();
  return p / p.sum();
}

/// softmax(-E) over the grid actions at state s.
template <class T>
Vec<double> density_grid(const EnergyModel<T>& m, const std::type_identity_t<Vec<T>>& s,
                         const std::type_identity_t<Mat<T>>& grid) {
  if (grid.cols() < 1) throw ConfigError("density_grid: empty grid");
  const RowVec<T> e = m.energies(s.replicate(1, grid.cols()), grid);
  return softmax_neg(e.transpose().template cast<double>().eval());
}

}  // namespace bpr

#endif  // BPR_EBM_HPP
