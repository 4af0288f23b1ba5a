#ifndef BPR_NN_OPTIMIZER_HPP
#define BPR_NN_OPTIMIZER_HPP

#include <cmath>
#include <span>
#include <vector>

#include "bpr/binary_io.hpp"
#include "bpr/core.hpp"
#include "bpr/nn/dense_net.hpp"

namespace bpr::nn {

struct AdamWConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with decoupled weight decay: p <- p - lr*wd*p - lr*m_hat/(sqrt(v_hat)+eps).
template <class T>
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) { validate(); }

  const AdamWConfig& config() const { return cfg_; }
  AdamWConfig& config() { return cfg_; }
  long step_count() const { return step_; }

  /// Updates `params` in place. Throws NumericError naming the first
  /// non-finite gradient; nothing is modified in that case.
  void step(const std::vector<ParamRef<T>>& params, const std::vector<ParamRef<T>>& grads) {
    if (params.size() != grads.size()) throw ShapeError("AdamW: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].values.size() != grads[i].values.size()) {
        throw ShapeError("AdamW: gradient shape mismatch for " + params[i].name);
      }
      for (T g : grads[i].values) {
        if (!std::isfinite(g)) throw NumericError("AdamW: non-finite gradient for parameter " + params[i].name);
      }
    }
    if (first_.empty()) {
      for (const auto& p : params) {
        first_.emplace_back(p.values.size(), T(0));
        second_.emplace_back(p.values.size(), T(0));
      }
    } else if (first_.size() != params.size()) {
      throw ShapeError("AdamW: parameter set changed between steps");
    }
    ++step_;
    const T lr = T(cfg_.learning_rate);
    const T b1 = T(cfg_.beta1);
    const T b2 = T(cfg_.beta2);
    const T eps = T(cfg_.epsilon);
    const T decay = T(1) - lr * T(cfg_.weight_decay);
    const T c1 = T(1) - std::pow(b1, T(step_));
    const T c2 = T(1) - std::pow(b2, T(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].values;
      auto g = grads[i].values;
      auto& m = first_[i];
      auto& v = second_[i];
      if (m.size() != p.size()) throw ShapeError("AdamW: moment buffer mismatch for " + params[i].name);
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = b1 * m[j] + (T(1) - b1) * g[j];
        v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
        const T m_hat = m[j] / c1;
        const T v_hat = v[j] / c2;
        p[j] = p[j] * decay - lr * m_hat / (std::sqrt(v_hat) + eps);
      }
    }
  }

  /// Step count and moment buffers (float32 on disk).
  void write_state(io::Writer& w) const {
    w.u64(static_cast<std::uint64_t>(step_));
    w.u32(static_cast<std::uint32_t>(first_.size()));
    for (std::size_t i = 0; i < first_.size(); ++i) {
      w.u64(first_[i].size());
      for (T x : first_[i]) w.f32(static_cast<float>(x));
      for (T x : second_[i]) w.f32(static_cast<float>(x));
    }
  }

  void read_state(io::Reader& r) {
    step_ = static_cast<long>(r.u64());
    first_.assign(r.u32(), {});
    second_.assign(first_.size(), {});
    for (std::size_t i = 0; i < first_.size(); ++i) {
      const auto n = r.u64();
      first_[i].resize(n);
      second_[i].resize(n);
      for (auto& x : first_[i]) x = T(r.f32());
      for (auto& x : second_[i]) x = T(r.f32());
    }
  }

  void step(DenseNet<T>& net, Gradients<T>& grads) {
    step(net.params(), grad_refs(grads));
    if (!net.params_finite()) throw NumericError("AdamW: parameters became non-finite");
  }

 private:
  void validate() const {
    if (!(cfg_.learning_rate > 0)) throw ConfigError("AdamW: learning rate must be positive");
    if (!(cfg_.beta1 > 0 && cfg_.beta1 < 1) || !(cfg_.beta2 > 0 && cfg_.beta2 < 1)) {
      throw ConfigError("AdamW: betas must lie in (0, 1)");
    }
    if (!(cfg_.epsilon > 0) || cfg_.weight_decay < 0) throw ConfigError("AdamW: bad epsilon / weight decay");
  }

  AdamWConfig cfg_;
  long step_ = 0;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
};

}  // namespace bpr::nn

#endif  // BPR_NN_OPTIMIZER_HPP
