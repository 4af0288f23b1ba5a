#ifndef BPR_CORE_HPP
#define BPR_CORE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace bpr {

// Column-major batches: one sample per column.
template <class T> using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T> using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T> using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input dimensions disagree with what a network or dataset expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Derives an independent stream from a parent seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <class T>
T standard_normal(Rng& rng) {
  std::normal_distribution<T> dist(T(0), T(1));
  return dist(rng);
}

template <class T>
T uniform(Rng& rng, T lo, T hi) {
  std::uniform_real_distribution<T> dist(lo, hi);
  return dist(rng);
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  // A finite sum rules out NaN/Inf cheaply; overflow falls back to the full scan.
  return std::isfinite(m.sum()) || m.allFinite();
}

}  // namespace bpr

#endif  // BPR_CORE_HPP
