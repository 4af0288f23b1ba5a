#ifndef BPR_ORACLE_ORACLE_HPP
#define BPR_ORACLE_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bpr/core.hpp"
#include "bpr/envs/tabular.hpp"

// Exact tabular machinery: Bellman solves, occupancy measures and the
// implicit-Q / soft-preference checks built on top of them.

namespace bpr::oracle {

using envs::TabularMDP;
using envs::random_mdp;

/// Stochastic policy: |S| x |A|, rows sum to one.
using Policy = Mat<double>;
/// Deterministic policy: one action index per state.
using DetPolicy = std::vector<int>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline Policy to_matrix(const DetPolicy& pi, int n_actions) {
  Policy m = Policy::Zero(static_cast<Eigen::Index>(pi.size()), n_actions);
  for (std::size_t s = 0; s < pi.size(); ++s) m(static_cast<Eigen::Index>(s), pi[s]) = 1.0;
  return m;
}

inline void check_policy(const TabularMDP& mdp, const Policy& pi) {
  if (pi.rows() != mdp.n_states() || pi.cols() != mdp.n_actions()) throw ShapeError("policy must be |S| x |A|");
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    if (pi.row(s).minCoeff() < 0.0 || std::abs(pi.row(s).sum() - 1.0) > 1e-9) {
      throw ConfigError("policy row " + std::to_string(s) + " is not a distribution");
    }
  }
}

/// P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
inline Mat<double> state_transition(const TabularMDP& mdp, const Policy& pi) {
  Mat<double> P = Mat<double>::Zero(mdp.n_states(), mdp.n_states());
  for (int a = 0; a < mdp.n_actions(); ++a) P += pi.col(a).asDiagonal() * mdp.transition(a);
  return P;
}

inline Vec<double> policy_reward(const TabularMDP& mdp, const Policy& pi) {
  return (mdp.reward().array() * pi.array()).rowwise().sum().matrix();
}

/// Q = R + gamma * P V, column by column.
inline Mat<double> q_from_v(const TabularMDP& mdp, const Vec<double>& V) {
  Mat<double> Q(mdp.n_states(), mdp.n_actions());
  for (int a = 0; a < mdp.n_actions(); ++a) Q.col(a) = mdp.reward().col(a) + mdp.gamma() * mdp.transition(a) * V;
  return Q;
}

/// Solves V = R_pi + gamma P_pi V.
inline Vec<double> evaluate_policy(const TabularMDP& mdp, const Policy& pi) {
  check_policy(mdp, pi);
  const auto n = mdp.n_states();
  Mat<double> A = Mat<double>::Identity(n, n) - mdp.gamma() * state_transition(mdp, pi);
  Eigen::PartialPivLU<Mat<double>> lu(A);
  Vec<double> V = lu.solve(policy_reward(mdp, pi));
  if (!V.allFinite()) throw NumericError("evaluate_policy: singular Bellman system");
  return V;
}

inline Mat<double> policy_q(const TabularMDP& mdp, const Policy& pi) { return q_from_v(mdp, evaluate_policy(mdp, pi)); }

/// Row-wise argmax; -inf entries are never chosen while a finite entry exists.
inline DetPolicy greedy(const Mat<double>& Q) {
  DetPolicy pi(Q.rows());
  for (Eigen::Index s = 0; s < Q.rows(); ++s) {
    Eigen::Index best = 0;
    Q.row(s).maxCoeff(&best);
    pi[s] = static_cast<int>(best);
  }
  return pi;
}

/// Optimal Q via value iteration (sup-norm change <= tol), polished by exact
/// policy iteration on the greedy policy.
inline Mat<double> value_iteration(const TabularMDP& mdp, double tol = 1e-12, int max_iter = 100000) {
  Mat<double> Q = mdp.reward();
  for (int it = 0; it < max_iter; ++it) {
    const Vec<double> V = Q.rowwise().maxCoeff();
    Mat<double> next = q_from_v(mdp, V);
    const double change = (next - Q).cwiseAbs().maxCoeff();
    Q = std::move(next);
    if (change <= tol) break;
  }
  DetPolicy pi = greedy(Q);
  for (int it = 0; it < 1000; ++it) {
    Mat<double> Qpi = policy_q(mdp, to_matrix(pi, mdp.n_actions()));
    DetPolicy next = greedy(Qpi);
    bool stable = true;
    for (std::size_t s = 0; s < pi.size(); ++s) {
      // Only switch on a strict improvement so ties cannot cycle.
      if (next[s] != pi[s] && Qpi(s, next[s]) > Qpi(s, pi[s]) + 1e-14) {
        pi[s] = next[s];
        stable = false;
      }
    }
    Q = std::move(Qpi);
    if (stable) break;
  }
  return Q;
}

inline double bellman_residual(const TabularMDP& mdp, const Mat<double>& Q) {
  return (q_from_v(mdp, Q.rowwise().maxCoeff()) - Q).cwiseAbs().maxCoeff();
}

inline double exact_return(const TabularMDP& mdp, const Policy& pi) { return mdp.p0().dot(evaluate_policy(mdp, pi)); }

inline double exact_return(const TabularMDP& mdp, const DetPolicy& pi) {
  return exact_return(mdp, to_matrix(pi, mdp.n_actions()));
}

/// Discounted state occupancy rho = (I - gamma P_pi^T)^-1 p0; sums to 1/(1-gamma).
inline Vec<double> occupancy(const TabularMDP& mdp, const Policy& pi) {
  check_policy(mdp, pi);
  const auto n = mdp.n_states();
  Mat<double> A = Mat<double>::Identity(n, n) - mdp.gamma() * state_transition(mdp, pi).transpose();
  return Eigen::PartialPivLU<Mat<double>>(A).solve(mdp.p0());
}

inline Vec<double> occupancy(const TabularMDP& mdp, const DetPolicy& pi) {
  return occupancy(mdp, to_matrix(pi, mdp.n_actions()));
}

/// Performance-difference identity residual:
/// |(eta(pi1) - eta(pi2)) - sum_s rho_pi1(s) E_{a~pi1}[Q_pi2(s,a) - V_pi2(s)]|.
inline double pdl_check(const TabularMDP& mdp, const Policy& pi1, const Policy& pi2) {
  const Vec<double> V2 = evaluate_policy(mdp, pi2);
  const Mat<double> Q2 = q_from_v(mdp, V2);
  const Vec<double> rho1 = occupancy(mdp, pi1);
  const Vec<double> adv = (pi1.array() * Q2.array()).rowwise().sum().matrix() - V2;
  const double lhs = exact_return(mdp, pi1) - mdp.p0().dot(V2);
  return std::abs(lhs - rho1.dot(adv));
}

/// Entropy-regularized evaluation: Q = R + gamma P E_{a'~pi}[Q(s',a') - alpha log pi(a'|s')].
inline Mat<double> soft_policy_evaluation(const TabularMDP& mdp, const Policy& pi, double alpha) {
  check_policy(mdp, pi);
  Vec<double> entropy_bonus = Vec<double>::Zero(mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a)
      if (pi(s, a) > 0.0) entropy_bonus[s] -= alpha * pi(s, a) * std::log(pi(s, a));
  // Soft V satisfies V = R_pi + H_alpha + gamma P_pi V.
  const auto n = mdp.n_states();
  Mat<double> A = Mat<double>::Identity(n, n) - mdp.gamma() * state_transition(mdp, pi);
  const Vec<double> V = Eigen::PartialPivLU<Mat<double>>(A).solve(policy_reward(mdp, pi) + entropy_bonus);
  return q_from_v(mdp, V);
}

/// Q~(s,a) = Q(s,a) + (1/lambda) log pi_beta(a|s); -inf where pi_beta is zero.
inline Mat<double> implicit_q(const Mat<double>& Q, const Policy& pi_beta, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("implicit_q: lambda must be positive");
  if (Q.rows() != pi_beta.rows() || Q.cols() != pi_beta.cols()) throw ShapeError("implicit_q: shape mismatch");
  Mat<double> out(Q.rows(), Q.cols());
  for (Eigen::Index i = 0; i < Q.size(); ++i) {
    const double p = pi_beta.data()[i];
    out.data()[i] = p > 0.0 ? Q.data()[i] + std::log(p) / lambda : kNegInf;
  }
  return out;
}

/// P(s, a1, a2) = Q~(s, a1) - Q~(s, a2).
inline double soft_preference(const Mat<double>& Qt, int s, int a1, int a2) {
  if (a1 == a2) return 0.0;
  return Qt(s, a1) - Qt(s, a2);
}

struct PreferenceViolation {
  int s;
  int a1;
  int a2;
  double preference;
};

/// Every ordered (s, a1, a2) with pi_beta(a1|s) >= pi_beta(a2|s) but
/// P(s, a1, a2) < -1e-12.
inline std::vector<PreferenceViolation> assumption1_check(const Mat<double>& Qt, const Policy& pi_beta) {
  std::vector<PreferenceViolation> out;
  for (int s = 0; s < Qt.rows(); ++s)
    for (int a1 = 0; a1 < Qt.cols(); ++a1)
      for (int a2 = 0; a2 < Qt.cols(); ++a2) {
        if (a1 == a2 || pi_beta(s, a1) < pi_beta(s, a2)) continue;
        const double p = soft_preference(Qt, s, a1, a2);
        // -inf - -inf is NaN: both actions lie outside the support; no preference.
        if (std::isnan(p)) continue;
        if (p < -1e-12) out.push_back({s, a1, a2, p});
      }
  return out;
}

/// Deterministic mode of a stochastic policy (lowest index on ties).
inline DetPolicy mode_policy(const Policy& pi) { return greedy(pi); }

struct Prop1Report {
  bool surrogate_nonnegative = false;
  double surrogate = 0.0;
  double eta_gap = 0.0;  // eta(pi~) - eta(pi_beta mode)
  DetPolicy improved;
};

/// Builds Q~ from the exact Q*, takes pi~ = greedy(Q~) and reports the
/// occupancy-weighted surrogate sum_s rho_beta(s) [Q~(s, pi~(s)) - Q~(s, pi_beta(s))].
inline Prop1Report prop1_check(const TabularMDP& mdp, const Policy& pi_beta, double lambda) {
  check_policy(mdp, pi_beta);
  const DetPolicy beta = mode_policy(pi_beta);
  const Mat<double> Qt = implicit_q(value_iteration(mdp), pi_beta, lambda);
  Prop1Report r;
  r.improved = greedy(Qt);
  const Vec<double> rho = occupancy(mdp, beta);
  for (int s = 0; s < mdp.n_states(); ++s) r.surrogate += rho[s] * (Qt(s, r.improved[s]) - Qt(s, beta[s]));
  r.surrogate_nonnegative = r.surrogate >= 0.0;
  r.eta_gap = exact_return(mdp, r.improved) - exact_return(mdp, beta);
  return r;
}

struct NoiseSpec {
  double eps = 0.0;        // bound at behavior actions
  double eps_tilde = 0.0;  // bound at every other action
  std::uint64_t seed = 0;
};

struct Prop2Report {
  double slack = 0.0;
  bool holds = false;
  double occupancy_mismatch = 0.0;  // max_s |rho_pi~(s) - rho_beta(s)|
  double rho_max = 0.0;
  double surrogate = 0.0;
  double eta_gap = 0.0;
  double max_noise_behavior = 0.0;
  double max_noise_improved = 0.0;
  DetPolicy improved;
};

/// Noisy variant: Q~- = Q~ + delta with |delta| <= eps at behavior actions and
/// <= eps_tilde elsewhere; slack = surrogate(Q~-) + 2 rho_max (eps~ + eps) - eta gap.
inline Prop2Report prop2_check(const TabularMDP& mdp, const Policy& pi_beta, double lambda, const NoiseSpec& noise) {
  if (noise.eps < 0.0 || noise.eps_tilde < 0.0) throw ConfigError("prop2_check: noise bounds must be nonnegative");
  check_policy(mdp, pi_beta);
  const DetPolicy beta = mode_policy(pi_beta);
  Mat<double> Qt = implicit_q(value_iteration(mdp), pi_beta, lambda);
  Rng rng(noise.seed);
  const double at_beta = std::min(noise.eps, noise.eps_tilde);
  Mat<double> delta = Mat<double>::Zero(Qt.rows(), Qt.cols());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double bound = a == beta[s] ? at_beta : noise.eps_tilde;
      delta(s, a) = bound > 0.0 ? uniform<double>(rng, -bound, bound) : 0.0;
    }
  const Mat<double> noisy = Qt + delta;
  Prop2Report r;
  r.improved = greedy(noisy);
  for (int s = 0; s < mdp.n_states(); ++s) {
    r.max_noise_behavior = std::max(r.max_noise_behavior, std::abs(delta(s, beta[s])));
    r.max_noise_improved = std::max(r.max_noise_improved, std::abs(delta(s, r.improved[s])));
  }
  if (r.max_noise_behavior > noise.eps + 1e-15 || r.max_noise_improved > noise.eps_tilde + 1e-15) {
    throw NumericError("prop2_check: injected noise exceeds its bound");
  }
  const Vec<double> rho_beta = occupancy(mdp, beta);
  const Vec<double> rho_improved = occupancy(mdp, r.improved);
  r.rho_max = rho_beta.maxCoeff();
  r.occupancy_mismatch = (rho_improved - rho_beta).cwiseAbs().maxCoeff();
  for (int s = 0; s < mdp.n_states(); ++s) r.surrogate += rho_beta[s] * (noisy(s, r.improved[s]) - noisy(s, beta[s]));
  r.eta_gap = exact_return(mdp, r.improved) - exact_return(mdp, beta);
  r.slack = r.surrogate + 2.0 * r.rho_max * (noise.eps_tilde + noise.eps) - r.eta_gap;
  r.holds = r.slack >= -1e-9;
  return r;
}

struct RhoBoundsReport {
  bool holds = false;
  double rho_max = 0.0;
  double lower = 0.0;  // 1 / (N (1 - gamma))
  double upper = 0.0;  // 1 / (1 - gamma)
};

inline RhoBoundsReport rho_bounds_check(const TabularMDP& mdp, const Policy& pi_beta) {
  RhoBoundsReport r;
  const Vec<double> rho = occupancy(mdp, pi_beta);
  r.rho_max = rho.maxCoeff();
  r.upper = 1.0 / (1.0 - mdp.gamma());
  r.lower = r.upper / mdp.n_states();
  const double tol = 1e-9 * r.upper;
  r.holds = r.rho_max >= r.lower - tol && r.rho_max <= r.upper + tol;
  return r;
}

/// Total variation distance as the largest event-probability gap,
/// max_{A subset X} |u(A) - v(A)|, by subset enumeration (|X| <= 20).
inline double tvd_event_max(const Vec<double>& u, const Vec<double>& v) {
  if (u.size() != v.size()) throw ShapeError("tvd: size mismatch");
  if (u.size() > 20) throw ConfigError("tvd_event_max: enumeration limited to 20 outcomes");
  const auto n = u.size();
  double best = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << n); ++mask) {
    double gap = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (std::uint64_t(1) << i)) gap += u[i] - v[i];
    best = std::max(best, std::abs(gap));
  }
  return best;
}

inline double tvd_half_l1(const Vec<double>& u, const Vec<double>& v) {
  if (u.size() != v.size()) throw ShapeError("tvd: size mismatch");
  return 0.5 * (u - v).cwiseAbs().sum();
}

/// Random stochastic policy with Dirichlet(1) rows.
inline Policy random_policy(int n_states, int n_actions, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Policy pi(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) pi(s, a) = expo(rng);
    pi.row(s) /= pi.row(s).sum();
  }
  return pi;
}

inline DetPolicy random_det_policy(int n_states, int n_actions, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, n_actions - 1);
  DetPolicy pi(n_states);
  for (auto& a : pi) a = pick(rng);
  return pi;
}

}  // namespace bpr::oracle

#endif  // BPR_ORACLE_ORACLE_HPP
