#ifndef BPR_ENVS_TABULAR_HPP
#define BPR_ENVS_TABULAR_HPP

#include <cmath>
#include <string>
#include <vector>

#include "bpr/core.hpp"

namespace bpr::envs {

/// Finite MDP {S, A, R, P, p0, gamma}. P(s, a) is a distribution over next
/// states, stored as the row `transition[a](s, :)`.
class TabularMDP {
 public:
  TabularMDP(std::vector<Mat<double>> transition, Mat<double> reward, Vec<double> p0, double gamma)
      : transition_(std::move(transition)), reward_(std::move(reward)), p0_(std::move(p0)), gamma_(gamma) {
    validate();
  }

  int n_states() const { return static_cast<int>(reward_.rows()); }
  int n_actions() const { return static_cast<int>(reward_.cols()); }
  double gamma() const { return gamma_; }
  const Mat<double>& reward() const { return reward_; }
  const Vec<double>& p0() const { return p0_; }
  /// |S| x |S| matrix of P(s' | s, a) for a fixed action.
  const Mat<double>& transition(int a) const { return transition_[a]; }
  double p(int s, int a, int s_next) const { return transition_[a](s, s_next); }

 private:
  void validate() const {
    const auto n = reward_.rows();
    if (n < 1 || reward_.cols() < 1) throw ConfigError("TabularMDP: need at least one state and action");
    if (static_cast<Eigen::Index>(transition_.size()) != reward_.cols()) {
      throw ShapeError("TabularMDP: one transition matrix per action required");
    }
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ConfigError("TabularMDP: gamma must lie in [0, 1)");
    if (p0_.size() != n) throw ShapeError("TabularMDP: p0 length != n_states");
    if (p0_.minCoeff() < 0.0 || std::abs(p0_.sum() - 1.0) > 1e-12) throw ConfigError("TabularMDP: p0 is not a distribution");
    if (!reward_.allFinite()) throw ConfigError("TabularMDP: non-finite reward");
    for (std::size_t a = 0; a < transition_.size(); ++a) {
      const auto& P = transition_[a];
      if (P.rows() != n || P.cols() != n) throw ShapeError("TabularMDP: transition matrix must be |S| x |S|");
      if (P.minCoeff() < 0.0) throw ConfigError("TabularMDP: negative transition probability");
      for (Eigen::Index s = 0; s < n; ++s) {
        if (std::abs(P.row(s).sum() - 1.0) > 1e-12) {
          throw ConfigError("TabularMDP: P(.|s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                            ") does not sum to 1");
        }
      }
    }
  }

  std::vector<Mat<double>> transition_;
  Mat<double> reward_;  // |S| x |A|
  Vec<double> p0_;
  double gamma_;
};

/// Random MDP: Dirichlet(1) transition rows, U[0, 1] rewards, Dirichlet(1) p0.
inline TabularMDP random_mdp(int n_states, int n_actions, double gamma, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto dirichlet_row = [&](int n) {
    Vec<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = expo(rng);
    return Vec<double>(v / v.sum());
  };
  std::vector<Mat<double>> P(n_actions, Mat<double>(n_states, n_states));
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states; ++s) {
      Vec<double> row = dirichlet_row(n_states);
      // Renormalize in long double so rows sum to 1 well inside 1e-12.
      long double total = 0;
      for (int j = 0; j < n_states; ++j) total += row[j];
      for (int j = 0; j < n_states; ++j) P[a](s, j) = static_cast<double>(row[j] / total);
    }
  Mat<double> R(n_states, n_actions);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = unit(rng);
  Vec<double> p0 = dirichlet_row(n_states);
  return TabularMDP(std::move(P), std::move(R), std::move(p0), gamma);
}

}  // namespace bpr::envs

#endif  // BPR_ENVS_TABULAR_HPP
