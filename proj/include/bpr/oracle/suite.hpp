#ifndef BPR_ORACLE_SUITE_HPP
#define BPR_ORACLE_SUITE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bpr/oracle/oracle.hpp"

namespace bpr::oracle {

/// Outcome of one property over a batch of random instances. `worst_slack`
/// is the smallest margin seen (negative means the property failed there).
struct CheckResult {
  std::string check;
  int instances = 0;
  int violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();

  bool passed() const { return violations == 0; }

  void record(double slack) {
    ++instances;
    worst_slack = std::min(worst_slack, slack);
    if (slack < 0.0) ++violations;
  }
};

struct SuiteOptions {
  int instances = 100;     // PDL, occupancy, Prop. 1, Prop. 2
  int bulk_instances = 1000;  // rho bounds
  int n_states = 5;
  int n_actions = 3;
  double gamma = 0.9;
  double lambda = 1.0;
  double eps = 0.1;
  double eps_tilde = 0.1;
  double mismatch_fraction = 0.05;  // Prop. 2 applies when D <= fraction / (1 - gamma)
  double pdl_tol = 1e-10;
  double mass_tol = 1e-9;
};

/// Each check draws from its own seed stream.
inline std::vector<CheckResult> run_suite(std::uint64_t seed, const SuiteOptions& o = {}) {
  std::vector<CheckResult> out;
  const int S = o.n_states, A = o.n_actions;
  {
    CheckResult r{"pdl_residual"};
    Rng rng(derive_seed(seed, 101));
    for (int i = 0; i < o.instances; ++i) {
      const auto mdp = random_mdp(S, A, o.gamma, rng);
      const Policy p1 = random_policy(S, A, rng), p2 = random_policy(S, A, rng);
      r.record(o.pdl_tol - pdl_check(mdp, p1, p2));
    }
    out.push_back(r);
  }
  {
    CheckResult r{"occupancy_mass"};
    Rng rng(derive_seed(seed, 102));
    for (int i = 0; i < o.instances; ++i) {
      const auto mdp = random_mdp(S, A, o.gamma, rng);
      const double mass = occupancy(mdp, random_policy(S, A, rng)).sum();
      r.record(o.mass_tol - std::abs(mass - 1.0 / (1.0 - o.gamma)));
    }
    out.push_back(r);
  }
  {
    CheckResult r{"rho_bounds"};
    Rng rng(derive_seed(seed, 103));
    for (int i = 0; i < o.bulk_instances; ++i) {
      const auto mdp = random_mdp(S, A, o.gamma, rng);
      const auto b = rho_bounds_check(mdp, random_policy(S, A, rng));
      r.record(std::min(b.rho_max - b.lower, b.upper - b.rho_max) + 1e-12);
    }
    out.push_back(r);
  }
  {
    CheckResult r{"prop1_surrogate"};
    Rng rng(derive_seed(seed, 104));
    for (int i = 0; i < o.instances; ++i) {
      const auto mdp = random_mdp(S, A, o.gamma, rng);
      r.record(prop1_check(mdp, random_policy(S, A, rng), o.lambda).surrogate);
    }
    out.push_back(r);
  }
  {
    CheckResult r{"prop2_bound"};
    Rng rng(derive_seed(seed, 105));
    for (int i = 0; i < o.instances; ++i) {
      const auto mdp = random_mdp(S, A, o.gamma, rng);
      const Policy pb = random_policy(S, A, rng);
      const auto rep = prop2_check(mdp, pb, o.lambda, NoiseSpec{o.eps, o.eps_tilde, derive_seed(seed, 1000 + i)});
      if (rep.occupancy_mismatch > o.mismatch_fraction / (1.0 - o.gamma)) continue;
      r.record(rep.slack + 1e-9);
    }
    out.push_back(r);
  }
  {
    CheckResult r{"tvd_identity"};
    Rng rng(derive_seed(seed, 106));
    for (int i = 0; i < o.instances; ++i) {
      const Policy uv = random_policy(2, 6, rng);
      const Vec<double> u = uv.row(0).transpose(), v = uv.row(1).transpose();
      r.record(1e-12 - std::abs(tvd_event_max(u, v) - tvd_half_l1(u, v)));
    }
    out.push_back(r);
  }
  return out;
}

/// Behavior policy that prefers low-value actions: softmax(-k_s Q*(s, .) + noise)
/// with a per-state temperature k_s ~ U[0.25, 4] and N(0, 0.25^2) logit noise.
inline Policy anti_aligned_behavior(const Mat<double>& Q, Rng& rng) {
  Policy pb(Q.rows(), Q.cols());
  for (Eigen::Index s = 0; s < Q.rows(); ++s) {
    const double k = uniform<double>(rng, 0.25, 4.0);
    Eigen::ArrayXd logits(Q.cols());
    for (Eigen::Index a = 0; a < Q.cols(); ++a) logits[a] = -k * Q(s, a) + 0.25 * standard_normal<double>(rng);
    const Eigen::ArrayXd w = (logits - logits.maxCoeff()).exp();
    pb.row(s) = (w / w.sum()).transpose().matrix();
  }
  return pb;
}

struct LambdaSweep {
  std::vector<double> lambdas;
  std::vector<std::vector<int>> counts;  // per instance, violation count per lambda
  int non_increasing = 0;                // instances whose counts never rise along the grid
};

/// Assumption 1 violation counts along a lambda grid on random MDPs with
/// anti-aligned behavior (Q = Q*).
inline LambdaSweep assumption1_sweep(int instances, std::uint64_t seed, const std::vector<double>& lambdas,
                                     int n_states = 5, int n_actions = 3, double gamma = 0.9) {
  LambdaSweep sw;
  sw.lambdas = lambdas;
  Rng rng(derive_seed(seed, 107));
  for (int i = 0; i < instances; ++i) {
    const auto mdp = random_mdp(n_states, n_actions, gamma, rng);
    const Mat<double> Q = value_iteration(mdp);
    const Policy pb = anti_aligned_behavior(Q, rng);
    std::vector<int> c;
    for (double lam : lambdas) c.push_back(static_cast<int>(assumption1_check(implicit_q(Q, pb, lam), pb).size()));
    bool ok = true;
    for (std::size_t k = 1; k < c.size(); ++k) ok = ok && c[k] <= c[k - 1];
    sw.non_increasing += ok ? 1 : 0;
    sw.counts.push_back(std::move(c));
  }
  return sw;
}

}  // namespace bpr::oracle

#endif  // BPR_ORACLE_SUITE_HPP
