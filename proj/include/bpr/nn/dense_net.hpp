#ifndef BPR_NN_DENSE_NET_HPP
#define BPR_NN_DENSE_NET_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bpr/core.hpp"
#include "bpr/nn/activation.hpp"
#include "bpr/nn/spectral.hpp"

namespace bpr::nn {

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
  bool layer_norm = false;
  bool spectral_norm = false;
};

template <class T>
struct Layer {
  LayerSpec spec;
  Mat<T> weight;   // out x in
  Vec<T> bias;     // out
  Vec<T> ln_gain;  // out, only when layer_norm
  Vec<T> ln_shift;
  Vec<T> sn_u;  // out, only when spectral_norm
  Vec<T> sn_v;  // in

  T sigma() const {
    if (!spec.spectral_norm) return T(1);
    const T s = sn_u.dot(weight * sn_v);
    return s == T(0) ? T(1) : s;
  }
  Mat<T> effective_weight() const {
    return spec.spectral_norm ? Mat<T>(weight / sigma()) : weight;
  }
};

template <class T>
struct LayerGrad {
  Mat<T> weight;
  Vec<T> bias;
  Vec<T> ln_gain;
  Vec<T> ln_shift;
};

template <class T>
using Gradients = std::vector<LayerGrad<T>>;

template <class T>
struct ParamRef {
  std::string name;
  std::span<T> values;
};

/// Intermediate values recorded by a training-mode forward pass; enough to
/// replay the computation backwards for exact parameter gradients.
template <class T>
struct Tape {
  struct Entry {
    Mat<T> input;
    Mat<T> eff_weight;
    T sigma = T(1);
    Mat<T> normalized;  // layer-norm output before the affine, when enabled
    RowVec<T> inv_std;
    Mat<T> preact;
  };
  std::vector<Entry> entries;
};

struct MlpOptions {
  Activation hidden_act = Activation::gelu;
  bool layer_norm = false;
  bool spectral_norm = false;
};

template <class T>
class DenseNet {
 public:
  static constexpr T kLayerNormEps = T(1e-5);

  DenseNet() = default;

  /// Fan-in uniform weights, zero biases; spectral vectors warmed up with
  /// 50 power iterations.
  static DenseNet make(const std::vector<LayerSpec>& specs, Rng& rng) {
    if (specs.empty()) throw ShapeError("DenseNet needs at least one layer");
    DenseNet net;
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const auto& s = specs[k];
      if (s.in <= 0 || s.out <= 0) throw ShapeError("DenseNet: layer dims must be positive");
      if (k > 0 && specs[k - 1].out != s.in) {
        throw ShapeError("DenseNet: layer " + std::to_string(k) + " input dim " + std::to_string(s.in) +
                         " does not chain with previous output " + std::to_string(specs[k - 1].out));
      }
      Layer<T> layer;
      layer.spec = s;
      const T bound = T(1) / std::sqrt(T(s.in));
      layer.weight.resize(s.out, s.in);
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = uniform<T>(rng, -bound, bound);
      layer.bias = Vec<T>::Zero(s.out);
      if (s.layer_norm) {
        layer.ln_gain = Vec<T>::Ones(s.out);
        layer.ln_shift = Vec<T>::Zero(s.out);
      }
      if (s.spectral_norm) {
        layer.sn_u.resize(s.out);
        for (int i = 0; i < s.out; ++i) layer.sn_u[i] = standard_normal<T>(rng);
        if (layer.sn_u.norm() == T(0)) layer.sn_u.setOnes();
        layer.sn_u.normalize();
        layer.sn_v = Vec<T>::Zero(s.in);
      }
      net.layers_.push_back(std::move(layer));
    }
    net.refresh_spectral(50);
    return net;
  }

  static DenseNet mlp(int in, const std::vector<int>& hidden, int out, MlpOptions opt, Rng& rng) {
    std::vector<LayerSpec> specs;
    int prev = in;
    for (int h : hidden) {
      specs.push_back({prev, h, opt.hidden_act, opt.layer_norm, opt.spectral_norm});
      prev = h;
    }
    specs.push_back({prev, out, Activation::identity, false, false});
    return make(specs, rng);
  }

  int input_dim() const { return layers_.front().spec.in; }
  int output_dim() const { return layers_.back().spec.out; }
  std::size_t layer_count() const { return layers_.size(); }
  const Layer<T>& layer(std::size_t k) const { return layers_[k]; }
  Layer<T>& layer(std::size_t k) { return layers_[k]; }
  const std::vector<Layer<T>>& layers() const { return layers_; }

  bool trainable() const { return trainable_; }
  void set_trainable(bool on) { trainable_ = on; }

  Mat<T> forward(const Mat<T>& x) const {
    check_input(x);
    Mat<T> h = x;
    for (const auto& layer : layers_) {
      Mat<T> z = layer.effective_weight() * h;
      z.colwise() += layer.bias;
      if (layer.spec.layer_norm) layer_norm_forward(layer, z, nullptr, nullptr);
      apply_activation(layer.spec.act, z);
      h = std::move(z);
    }
    return h;
  }

  Vec<T> forward_one(const Vec<T>& x) const {
    Mat<T> m = x;
    return forward(m).col(0);
  }

  /// Training-mode forward: same result as forward(x), plus a tape.
  Mat<T> forward(const Mat<T>& x, Tape<T>& tape) const {
    check_input(x);
    tape.entries.clear();
    tape.entries.reserve(layers_.size());
    Mat<T> h = x;
    for (const auto& layer : layers_) {
      typename Tape<T>::Entry e;
      e.sigma = layer.sigma();
      e.eff_weight = layer.spec.spectral_norm ? Mat<T>(layer.weight / e.sigma) : layer.weight;
      Mat<T> z = e.eff_weight * h;
      z.colwise() += layer.bias;
      if (layer.spec.layer_norm) layer_norm_forward(layer, z, &e.normalized, &e.inv_std);
      e.preact = z;
      apply_activation(layer.spec.act, z);
      e.input = std::move(h);
      h = std::move(z);
      tape.entries.push_back(std::move(e));
    }
    return h;
  }

  Gradients<T> zero_grads() const {
    Gradients<T> g(layers_.size());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      g[k].weight = Mat<T>::Zero(l.weight.rows(), l.weight.cols());
      g[k].bias = Vec<T>::Zero(l.bias.size());
      g[k].ln_gain = Vec<T>::Zero(l.ln_gain.size());
      g[k].ln_shift = Vec<T>::Zero(l.ln_shift.size());
    }
    return g;
  }

  /// Reverse pass. Accumulates parameter gradients into `grads` (skipped when
  /// the net is not trainable) and returns the gradient w.r.t. the input.
  Mat<T> backward(const Tape<T>& tape, const Mat<T>& grad_out, Gradients<T>& grads) const {
    if (tape.entries.size() != layers_.size()) throw ShapeError("backward: tape does not match network");
    if (grad_out.rows() != output_dim()) throw ShapeError("backward: output gradient has wrong rows");
    if (!all_finite(grad_out)) throw NumericError("backward: non-finite loss gradient at network output");
    Mat<T> g = grad_out;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& layer = layers_[k];
      const auto& e = tape.entries[k];
      activation_backward(layer.spec.act, e.preact, g);
      if (!all_finite(g)) {
        throw NumericError("backward: non-finite gradient in " + std::string(to_string(layer.spec.act)) +
                           " of layer " + std::to_string(k));
      }
      if (layer.spec.layer_norm) {
        if (trainable_) {
          grads[k].ln_gain += (g.array() * e.normalized.array()).rowwise().sum().matrix();
          grads[k].ln_shift += g.rowwise().sum();
        }
        const T n = T(g.rows());
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
          auto col = g.col(c);
          const auto xhat = e.normalized.col(c);
          col.array() *= layer.ln_gain.array();
          const T mean_dn = col.sum() / n;
          const T mean_dn_n = col.dot(xhat) / n;
          col.array() = (col.array() - mean_dn - xhat.array() * mean_dn_n) * e.inv_std[c];
        }
        if (!all_finite(g)) throw NumericError("backward: non-finite gradient in layer_norm of layer " + std::to_string(k));
      }
      if (trainable_) {
        Mat<T> dw = g * e.input.transpose();
        if (layer.spec.spectral_norm) {
          const T inner = (dw.array() * e.eff_weight.array()).sum();
          dw = (dw - inner * layer.sn_u * layer.sn_v.transpose()) / e.sigma;
        }
        grads[k].weight += dw;
        grads[k].bias += g.rowwise().sum();
      }
      g = e.eff_weight.transpose() * g;
    }
    return g;
  }

  /// One or more power iterations on every spectrally normalized layer.
  void refresh_spectral(int iters) {
    for (auto& layer : layers_) {
      if (!layer.spec.spectral_norm) continue;
      auto r = spectral_normalize<T>(layer.weight, layer.sn_u, iters);
      layer.sn_u = std::move(r.u);
      layer.sn_v = std::move(r.v);
    }
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      auto& l = layers_[k];
      const std::string p = "layer" + std::to_string(k) + ".";
      out.push_back({p + "weight", {l.weight.data(), std::size_t(l.weight.size())}});
      out.push_back({p + "bias", {l.bias.data(), std::size_t(l.bias.size())}});
      if (l.spec.layer_norm) {
        out.push_back({p + "ln_gain", {l.ln_gain.data(), std::size_t(l.ln_gain.size())}});
        out.push_back({p + "ln_shift", {l.ln_shift.data(), std::size_t(l.ln_shift.size())}});
      }
    }
    return out;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (auto& p : params()) n += p.values.size();
    return n;
  }

  bool params_finite() const {
    for (const auto& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
      if (l.spec.layer_norm && (!l.ln_gain.allFinite() || !l.ln_shift.allFinite())) return false;
    }
    return true;
  }

  template <class U>
  DenseNet<U> cast() const {
    DenseNet<U> out;
    for (const auto& l : layers_) {
      Layer<U> c;
      c.spec = l.spec;
      c.weight = l.weight.template cast<U>();
      c.bias = l.bias.template cast<U>();
      c.ln_gain = l.ln_gain.template cast<U>();
      c.ln_shift = l.ln_shift.template cast<U>();
      c.sn_u = l.sn_u.template cast<U>();
      c.sn_v = l.sn_v.template cast<U>();
      out.push_layer(std::move(c));
    }
    out.set_trainable(trainable_);
    return out;
  }

  void push_layer(Layer<T> layer) { layers_.push_back(std::move(layer)); }

  bool operator==(const DenseNet& o) const {
    if (layers_.size() != o.layers_.size()) return false;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& a = layers_[k];
      const auto& b = o.layers_[k];
      if (a.spec.in != b.spec.in || a.spec.out != b.spec.out || a.spec.act != b.spec.act ||
          a.spec.layer_norm != b.spec.layer_norm || a.spec.spectral_norm != b.spec.spectral_norm)
        return false;
      if (a.weight != b.weight || a.bias != b.bias || a.ln_gain != b.ln_gain || a.ln_shift != b.ln_shift ||
          a.sn_u != b.sn_u || a.sn_v != b.sn_v)
        return false;
    }
    return true;
  }

 private:
  void check_input(const Mat<T>& x) const {
    if (layers_.empty()) throw ShapeError("forward on an empty network");
    if (x.rows() != input_dim()) {
      throw ShapeError("forward: input has " + std::to_string(x.rows()) + " features, network expects " +
                       std::to_string(input_dim()));
    }
  }

  static void layer_norm_forward(const Layer<T>& layer, Mat<T>& z, Mat<T>* normalized, RowVec<T>* inv_std_out) {
    const T n = T(z.rows());
    RowVec<T> inv_std(z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      auto col = z.col(c);
      col.array() -= col.sum() / n;
      inv_std[c] = T(1) / std::sqrt(col.squaredNorm() / n + kLayerNormEps);
      col *= inv_std[c];
    }
    if (normalized) *normalized = z;
    if (inv_std_out) *inv_std_out = std::move(inv_std);
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      z.col(c).array() = z.col(c).array() * layer.ln_gain.array() + layer.ln_shift.array();
    }
  }

  std::vector<Layer<T>> layers_;
  bool trainable_ = true;
};

/// theta_target <- (1 - tau) * theta_target + tau * theta_online.
template <class T>
void soft_update(DenseNet<T>& target, DenseNet<T>& online, T tau) {
  auto dst = target.params();
  auto src = online.params();
  if (dst.size() != src.size()) throw ShapeError("soft_update: network structures differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].values.size() != src[i].values.size()) throw ShapeError("soft_update: parameter shapes differ");
    if (tau == T(1)) {
      std::copy(src[i].values.begin(), src[i].values.end(), dst[i].values.begin());
      continue;
    }
    if (tau == T(0)) continue;
    for (std::size_t j = 0; j < dst[i].values.size(); ++j) {
      dst[i].values[j] = (T(1) - tau) * dst[i].values[j] + tau * src[i].values[j];
    }
  }
  for (std::size_t k = 0; k < target.layer_count(); ++k) {
    if (target.layer(k).spec.spectral_norm) {
      target.layer(k).sn_u = online.layer(k).sn_u;
      target.layer(k).sn_v = online.layer(k).sn_v;
    }
  }
}

template <class T>
std::vector<ParamRef<T>> grad_refs(Gradients<T>& g) {
  std::vector<ParamRef<T>> out;
  for (std::size_t k = 0; k < g.size(); ++k) {
    auto& l = g[k];
    const std::string p = "layer" + std::to_string(k) + ".";
    out.push_back({p + "weight", {l.weight.data(), std::size_t(l.weight.size())}});
    out.push_back({p + "bias", {l.bias.data(), std::size_t(l.bias.size())}});
    if (l.ln_gain.size() > 0) {
      out.push_back({p + "ln_gain", {l.ln_gain.data(), std::size_t(l.ln_gain.size())}});
      out.push_back({p + "ln_shift", {l.ln_shift.data(), std::size_t(l.ln_shift.size())}});
    }
  }
  return out;
}

}  // namespace bpr::nn

#endif  // BPR_NN_DENSE_NET_HPP
