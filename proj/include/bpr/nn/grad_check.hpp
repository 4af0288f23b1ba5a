#ifndef BPR_NN_GRAD_CHECK_HPP
#define BPR_NN_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bpr/core.hpp"
#include "bpr/nn/dense_net.hpp"

namespace bpr::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int probes = 0;
};

/// |a - n| / max(|a|, |n|, floor); exact zero when both are zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares `analytic` against central differences of `loss_fn` on
/// `probe_count` randomly chosen scalar parameters. `loss_fn` must be
/// deterministic and read the parameters through the spans in `params`.
template <class LossFn>
GradCheckReport grad_check(LossFn&& loss_fn, const std::vector<ParamRef<double>>& params,
                           const std::vector<ParamRef<double>>& analytic, int probe_count, Rng& rng,
                           double step = 1e-6) {
  if (params.size() != analytic.size()) throw ShapeError("grad_check: parameter/gradient count mismatch");
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values.size() != analytic[i].values.size()) throw ShapeError("grad_check: shape mismatch");
    for (std::size_t j = 0; j < params[i].values.size(); ++j) index.emplace_back(i, j);
  }
  GradCheckReport report;
  if (index.empty()) return report;
  std::uniform_int_distribution<std::size_t> pick(0, index.size() - 1);
  for (int p = 0; p < probe_count; ++p) {
    const auto [i, j] = index[pick(rng)];
    double& x = params[i].values[j];
    const double saved = x;
    x = saved + step;
    const double up = loss_fn();
    x = saved - step;
    const double down = loss_fn();
    x = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(analytic[i].values[j], numeric);
    ++report.probes;
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_param = params[i].name + "[" + std::to_string(j) + "]";
    }
  }
  return report;
}

}  // namespace bpr::nn

#endif  // BPR_NN_GRAD_CHECK_HPP
