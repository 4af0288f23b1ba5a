#ifndef BPR_NN_SPECTRAL_HPP
#define BPR_NN_SPECTRAL_HPP

#include <stdexcept>

#include "bpr/core.hpp"

namespace bpr::nn {

template <class T>
struct SpectralResult {
  Mat<T> weight;  // effective (normalized) weight
  Vec<T> u;       // left power-iteration vector, persisted by the caller
  Vec<T> v;
  T sigma;
};

/// Runs `n_iters` rounds of power iteration starting from `u` and returns
/// weight / sigma_hat. A zero matrix is returned unchanged with sigma = 1.
template <class T>
SpectralResult<T> spectral_normalize(const Mat<T>& weight, Vec<T> u, int n_iters) {
  if (n_iters < 1) throw std::invalid_argument("spectral_normalize: n_iters must be >= 1");
  if (u.size() != weight.rows()) throw ShapeError("spectral_normalize: pi vector length != rows");
  if (u.norm() == T(0)) throw std::invalid_argument("spectral_normalize: pi vector must be nonzero");
  if (weight.cwiseAbs().maxCoeff() == T(0)) {
    return {weight, u, Vec<T>::Zero(weight.cols()), T(1)};
  }
  Vec<T> v(weight.cols());
  for (int i = 0; i < n_iters; ++i) {
    v = weight.transpose() * u;
    T nv = v.norm();
    if (nv == T(0)) {
      // u is orthogonal to the row space; restart from a fixed direction.
      u = Vec<T>::Ones(weight.rows()).normalized();
      v = weight.transpose() * u;
      nv = v.norm();
    }
    v /= nv;
    u = weight * v;
    u /= u.norm();
  }
  const T sigma = u.dot(weight * v);
  return {weight / sigma, u, v, sigma};
}

/// Power-iteration estimate of the largest singular value (fresh start).
template <class T>
T spectral_norm_estimate(const Mat<T>& weight, int n_iters = 50) {
  if (weight.cwiseAbs().maxCoeff() == T(0)) return T(0);
  Vec<T> u = Vec<T>::Ones(weight.rows()).normalized();
  auto r = spectral_normalize<T>(weight, u, n_iters);
  return r.sigma;
}

}  // namespace bpr::nn

#endif  // BPR_NN_SPECTRAL_HPP
