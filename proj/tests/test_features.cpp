#include "mrf/features.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace mrf;

namespace {

DenseMatrix toy_g(Eigen::Index points, Eigen::Index nodes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DenseMatrix g(points, nodes);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = u(rng);
  return g;
}

}  // namespace

TEST(AssembleMrf, FullVariantIsExhaustiveSum) {
  const DenseMatrix g = toy_g(6, 200, 1);
  const auto phi = assemble_mrf_full(g);
  EXPECT_EQ(phi.m, 200u);
  EXPECT_DOUBLE_EQ(phi.kappa, 1.0 / 200.0);
  for (std::size_t x = 0; x < 6; ++x)
    for (std::size_t y = 0; y < 6; ++y) {
      double sum = 0.0;
      for (Eigen::Index w = 0; w < 200; ++w) sum += g(static_cast<Eigen::Index>(x), w) * g(static_cast<Eigen::Index>(y), w);
      EXPECT_NEAR(phi.dot(x, y), sum, 1e-12 * sum);
    }
}

TEST(AssembleMrf, SampledVariantIsUnbiased) {
  const DenseMatrix g = toy_g(3, 50, 2);
  const double full = assemble_mrf_full(g).dot(0, 1);
  const auto density = uniform_density(50);
  const int seeds = 2000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < seeds; ++k) {
    const double v = assemble_mrf_sampled(g, density, 5, static_cast<std::uint64_t>(k)).dot(0, 1);
    s += v;
    s2 += v * v;
  }
  const double mean = s / seeds;
  const double se = std::sqrt((s2 / seeds - mean * mean) / (seeds - 1));
  EXPECT_LT(std::abs(mean - full), 3.0 * se);
}

TEST(AssembleMrf, SampledVarianceScalesWithAnchors) {
  const DenseMatrix g = toy_g(2, 40, 3);
  const auto density = uniform_density(40);
  auto variance = [&](std::size_t m) {
    const int seeds = 3000;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < seeds; ++k) {
      const double v = assemble_mrf_sampled(g, density, m, 1000 + static_cast<std::uint64_t>(k)).dot(0, 1);
      s += v;
      s2 += v * v;
    }
    return (s2 - s * s / seeds) / (seeds - 1);
  };
  const double ratio = variance(4) / variance(16);
  EXPECT_GT(ratio, 3.0);
  EXPECT_LT(ratio, 5.0);
}

TEST(AssembleMrf, SingleAnchor) {
  const DenseMatrix g = toy_g(4, 5, 4);
  std::vector<double> density{0.1, 0.2, 0.3, 0.25, 0.15};
  const auto phi = assemble_mrf_with_anchors(g, density, {2});
  ASSERT_EQ(phi.values.cols(), 1);
  EXPECT_LT((phi.values.col(0) - g.col(2) / std::sqrt(0.3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AssembleMrf, Errors) {
  const DenseMatrix g = toy_g(2, 3, 5);
  std::vector<double> density{0.5, 0.5, 0.0};
  EXPECT_MRF_ERROR(assemble_mrf_with_anchors(g, density, {2}), ErrorCode::density);
  EXPECT_MRF_ERROR(assemble_mrf_sampled(g, std::vector<double>{0.5, 0.6, 0.1}, 2, 1), ErrorCode::density);
  DenseMatrix neg = g;
  neg(0, 0) = -1.0;
  EXPECT_MRF_ERROR(assemble_mrf_full(neg), ErrorCode::invalid_argument);
}

TEST(Rescale, Constant) {
  EXPECT_NEAR(rescale_constant(2, 0.2, 5), std::sqrt(2.0 * std::numbers::pi * 0.04) * 5.0, 1e-14);
  EXPECT_NEAR(rescale_constant(2, 0.2, 5), 2.5066, 1e-4);
  double prev = 0.0;
  for (std::size_t n = 5; n <= 105; n += 10) {
    const double c = rescale_constant(3, 0.2, n);
    EXPECT_GT(c, prev);
    prev = c;
  }
}

TEST(Rescale, Bilinearity) {
  const GridGraph grid(5, 2);
  const auto phi = run_grf_all(grid.graph(), heat_modulation(0.5), {0.2, 20, 7});
  const auto psi = rescale_signatures(phi, 2, 0.2, 5);
  const double c = rescale_constant(2, 0.2, 5);
  EXPECT_NEAR(psi[3].dot(psi[8]), c * c * phi[3].dot(phi[8]), 1e-12 * std::max(1.0, psi[3].dot(psi[8])));
}

TEST(Align, ScalarMultiple) {
  const DenseMatrix k = toy_g(5, 5, 6);
  const auto a = frobenius_align(2.0 * k, k);
  EXPECT_DOUBLE_EQ(a.alpha, 0.5);
  EXPECT_LT((a.aligned - k).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(frobenius_align(k, k).alpha, 1.0);
}

TEST(Align, NormMatchAndIdempotence) {
  const DenseMatrix est = toy_g(7, 7, 7), gt = 3.7 * toy_g(7, 7, 8);
  const auto a = frobenius_align(est, gt);
  EXPECT_NEAR(a.aligned.norm(), gt.norm(), 1e-12 * gt.norm());
  EXPECT_NEAR(frobenius_align(a.aligned, gt).alpha, 1.0, 1e-12);
}

TEST(Align, ZeroEstimate) {
  EXPECT_MRF_ERROR(frobenius_align(DenseMatrix::Zero(2, 2), DenseMatrix::Identity(2, 2)), ErrorCode::alignment_undefined);
}

TEST(RelativeMse, Cases) {
  const Vector y = Vector::LinSpaced(5, 1.0, 5.0);
  std::vector<Vector> same{y}, doubled{2.0 * y};
  EXPECT_EQ(relative_mse<Vector>(same, y), 0.0);
  EXPECT_DOUBLE_EQ(relative_mse<Vector>(doubled, y), 1.0);
  std::vector<Vector> mixed{y, 2.0 * y};
  EXPECT_DOUBLE_EQ(relative_mse<Vector>(mixed, y), 0.5);
  EXPECT_MRF_ERROR(relative_mse<Vector>(same, Vector::Zero(5)), ErrorCode::zero_truth);
}

TEST(KernelMetrics, Identity) {
  const DenseMatrix k = toy_g(6, 6, 9);
  const auto m = kernel_metrics(k, k, 0.1);
  EXPECT_DOUBLE_EQ(m.r2, 1.0);
  EXPECT_EQ(m.mean_re, 0.0);
  EXPECT_EQ(m.median_re, 0.0);
  EXPECT_EQ(m.mse, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
}

TEST(KernelMetrics, ConstantShift) {
  const DenseMatrix k = toy_g(8, 8, 10);
  const double c = 0.01;
  const auto m = kernel_metrics(k.array() + c, k, 0.1);
  const double ss_tot = (k.array() - k.mean()).square().sum();
  EXPECT_NEAR(m.mse, c * c, 1e-15);
  EXPECT_NEAR(m.rmse, c, 1e-13);
  EXPECT_NEAR(m.r2, 1.0 - c * c * 64.0 / ss_tot, 1e-13);
}

TEST(KernelMetrics, ClampedRelativeError) {
  DenseMatrix gt(1, 2), est(1, 2);
  gt << 0.05, 1.0;
  est << 0.15, 0.9;
  const auto m = kernel_metrics(est, gt, 0.1);
  EXPECT_NEAR(m.mean_re, 0.55, 1e-12);
  EXPECT_NEAR(m.median_re, 0.55, 1e-12);
}

TEST(KernelMetrics, ConstantTruthRejected) {
  EXPECT_MRF_ERROR(kernel_metrics(DenseMatrix::Ones(3, 3), DenseMatrix::Ones(3, 3), 0.1), ErrorCode::r2_undefined);
}
