#include <gtest/gtest.h>

#include <cmath>

#include "bpr/ebm.hpp"
#include "bpr/envs/bandit.hpp"
#include "bpr/nn/grad_check.hpp"

using namespace bpr;

namespace {

EbmArch small_arch() {
  EbmArch a;
  a.hidden = {16, 16};
  return a;
}

EbmArch desk_arch() {
  EbmArch a;
  a.hidden = {64, 64};
  return a;
}

Mat<double> grid_1d(int n) {
  Mat<double> g(1, n);
  for (int i = 0; i < n; ++i) g(0, i) = -1.0 + 2.0 * i / (n - 1);
  return g;
}

// Zeroes the output layer so every input maps to the same energy.
template <class T>
void flatten(EnergyModel<T>& m) {
  auto& out = m.net().layer(m.net().layer_count() - 1);
  out.weight.setZero();
  out.bias.setConstant(T(0.7));
}

}  // namespace

TEST(Ebm, DeterministicGivenSeed) {
  Rng r1(3), r2(3);
  auto a = EnergyModel<double>::make(2, 1, small_arch(), r1);
  auto b = EnergyModel<double>::make(2, 1, small_arch(), r2);
  Mat<double> S(2, 3), A(1, 3);
  S << 0.1, 0.2, 0.3, -0.1, 0.0, 0.5;
  A << 0.5, -0.5, 0.0;
  EXPECT_EQ(a.energies(S, A), b.energies(S, A));
}

TEST(Ebm, DimensionMismatchThrows) {
  Rng rng(1);
  auto m = EnergyModel<double>::make(2, 1, small_arch(), rng);
  EXPECT_THROW(m.energies(Mat<double>::Zero(3, 2), Mat<double>::Zero(1, 2)), ShapeError);
  EXPECT_THROW(m.energies(Mat<double>::Zero(2, 2), Mat<double>::Zero(2, 2)), ShapeError);
  EXPECT_THROW(m.energies(Mat<double>::Zero(2, 2), Mat<double>::Zero(1, 3)), ShapeError);
  EXPECT_THROW(m.energy(Vec<double>::Zero(1), Vec<double>::Zero(1)), ShapeError);
}

TEST(Ebm, ConstantEnergyGivesUniformGrid) {
  Rng rng(2);
  auto m = EnergyModel<double>::make(1, 1, small_arch(), rng);
  flatten(m);
  const auto p = density_grid(m, Vec<double>::Zero(1), grid_1d(101));
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], 1.0 / 101, 1e-12);
}

TEST(Ebm, InfoNceEqualEnergies) {
  Vec<double> e2(2);
  e2 << 1.3, 1.3;
  EXPECT_NEAR(infonce_from_energies(e2), std::log(2.0), 1e-12);
  Vec<double> e(9);
  e.setConstant(-4.0);
  EXPECT_NEAR(infonce_from_energies(e), std::log(9.0), 1e-12);
}

TEST(Ebm, InfoNceHandExample) {
  Vec<double> e(2);
  e << 0.0, std::log(3.0);
  EXPECT_NEAR(infonce_from_energies(e), std::log(4.0 / 3.0), 1e-12);
}

TEST(Ebm, InfoNceFlatNetwork) {
  Rng rng(4);
  auto m = EnergyModel<double>::make(1, 1, small_arch(), rng);
  flatten(m);
  std::vector<Vec<double>> negs(7, Vec<double>::Constant(1, 0.3));
  EXPECT_NEAR(infonce_loss(m, Vec<double>::Zero(1), Vec<double>::Constant(1, 0.1), negs), std::log(8.0), 1e-12);
  EXPECT_THROW(infonce_loss(m, Vec<double>::Zero(1), Vec<double>::Zero(1), {}), ConfigError);
}

TEST(Ebm, InfoNceLargeEnergiesStayFinite) {
  Vec<double> e(3);
  e << 1e4, 1e4 + 1.0, 1e4 + 2.0;
  const double expect = std::log(1.0 + std::exp(-1.0) + std::exp(-2.0));
  EXPECT_NEAR(infonce_from_energies(e), expect, 1e-9);
}

TEST(Ebm, SoftmaxHandExample) {
  Vec<double> e(2);
  e << 0.0, std::log(2.0);
  const auto p = softmax_neg(e);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-12);
}

TEST(Ebm, DensityShiftInvariant) {
  Vec<double> e(4);
  e << 0.5, -1.0, 2.0, 0.25;
  const auto p = softmax_neg(e);
  const auto q = softmax_neg((e.array() + 8.0).matrix().eval());
  EXPECT_TRUE(p.isApprox(q, 1e-14));
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}

TEST(Ebm, BatchLossMatchesPerSampleLoss) {
  Rng rng(5);
  auto m = EnergyModel<double>::make(2, 1, small_arch(), rng);
  Mat<double> S = Mat<double>::Random(2, 4);
  Mat<double> A = Mat<double>::Random(1, 4);
  const auto b = make_infonce_batch(m, S, A, 5, rng);
  double expect = 0.0;
  for (int i = 0; i < 4; ++i) {
    std::vector<Vec<double>> negs;
    for (int k = 0; k < 5; ++k) negs.push_back(b.negatives.col(k * 4 + i));
    expect += infonce_loss(m, Vec<double>(S.col(i)), Vec<double>(A.col(i)), negs);
  }
  EXPECT_NEAR(infonce_batch_loss(m, b, nullptr), expect / 4, 1e-12);
}

TEST(Ebm, NegativesInsideActionBox) {
  Rng rng(6);
  auto m = EnergyModel<double>::make(1, 2, small_arch(), rng);
  const auto b = make_infonce_batch(m, Mat<double>::Zero(1, 50), Mat<double>::Zero(2, 50), 20, rng);
  EXPECT_EQ(b.negatives.cols(), 1000);
  EXPECT_LE(b.negatives.maxCoeff(), 1.0);
  EXPECT_GE(b.negatives.minCoeff(), -1.0);
}

TEST(Ebm, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  auto m = EnergyModel<double>::make(2, 1, small_arch(), rng);
  Mat<double> S = Mat<double>::Random(2, 6);
  Mat<double> A = Mat<double>::Random(1, 6);
  const auto b = make_infonce_batch(m, S, A, 4, rng);
  auto g = m.net().zero_grads();
  infonce_batch_loss(m, b, &g);
  const auto report = nn::grad_check([&] { return infonce_batch_loss(m, b, nullptr); }, m.net().params(),
                                     nn::grad_refs(g), 200, rng);
  EXPECT_LE(report.max_rel_error, 1e-4) << report.worst_param;
}

TEST(Ebm, ZeroStepsLeavesModelUnchanged) {
  Rng rng(8);
  auto ds = envs::generate_bandit_dataset({}, 100, rng);
  auto m = EnergyModel<float>::make(1, 1, small_arch(), rng);
  EbmConfig cfg;
  cfg.steps = 0;
  const auto out = train_ebm(ds, cfg, m, rng);
  EXPECT_TRUE(out.net() == m.net());
  EXPECT_FALSE(out.trained());
}

TEST(Ebm, EmptyDatasetThrows) {
  Rng rng(9);
  OfflineDataset ds(1, 1, "bandit");
  auto m = EnergyModel<float>::make(1, 1, small_arch(), rng);
  EXPECT_THROW(train_ebm(ds, EbmConfig{}, m, rng), DatasetError);
}

TEST(Ebm, RecoversBanditModes) {
  Rng rng(10);
  auto ds = envs::generate_bandit_dataset({}, 10000, rng);
  EbmConfig cfg;
  cfg.steps = 1500;
  cfg.batch_size = 64;
  cfg.negatives = 64;
  cfg.learning_rate = 1e-3;
  cfg.arch = desk_arch();
  EbmTrace trace;
  auto m = train_ebm(ds, cfg, EnergyModel<float>::make(1, 1, cfg.arch, rng), rng, &trace);
  ASSERT_TRUE(m.trained());
  ASSERT_EQ(trace.loss.size(), 1500u);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 50; ++i) {
    head += trace.loss[i];
    tail += trace.loss[trace.loss.size() - 1 - i];
  }
  EXPECT_LT(tail, head);

  const Mat<double> grid = grid_1d(401);
  const auto p = density_grid(m, Vec<float>::Zero(1), Mat<float>(grid.cast<float>()));
  // Highest density on each half of the grid.
  Eigen::Index neg = 0, pos = 0;
  p.head(200).maxCoeff(&neg);
  p.tail(200).maxCoeff(&pos);
  EXPECT_NEAR(grid(0, neg), -0.5, 0.05);
  EXPECT_NEAR(grid(0, 201 + pos), 0.5, 0.05);
  EXPECT_GT(p[neg], 20 * p[200]);
}
