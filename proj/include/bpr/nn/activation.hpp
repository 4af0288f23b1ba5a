#ifndef BPR_NN_ACTIVATION_HPP
#define BPR_NN_ACTIVATION_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include <unsupported/Eigen/SpecialFunctions>

#include "bpr/core.hpp"

namespace bpr::nn {

enum class Activation : std::uint8_t { identity = 0, gelu = 1, tanh = 2 };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::gelu: return "gelu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

// Exact GELU: x * Phi(x).
template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <class T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
  return cdf + x * pdf;
}

template <class T>
void apply_activation(Activation a, Mat<T>& z) {
  switch (a) {
    case Activation::identity: break;
    case Activation::gelu:
      z.array() = T(0.5) * z.array() * (T(1) + (z.array() * T(1 / std::numbers::sqrt2)).erf());
      break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
  }
}

/// Multiplies `grad` in place by the activation derivative at pre-activation `z`.
template <class T>
void activation_backward(Activation a, const Mat<T>& z, Mat<T>& grad) {
  switch (a) {
    case Activation::identity: break;
    case Activation::gelu:
      grad.array() *= T(0.5) * (T(1) + (z.array() * T(1 / std::numbers::sqrt2)).erf()) +
                       z.array() * (T(-0.5) * z.array().square()).exp() * T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
      break;
    case Activation::tanh:
      grad.array() *= (T(1) - z.array().tanh().square());
      break;
  }
}

}  // namespace bpr::nn

#endif  // BPR_NN_ACTIVATION_HPP
