#include "mrf/checks.hpp"
#include "mrf/grf.hpp"
#include "mrf/manifolds.hpp"
#include "mrf/oracles.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>
#include <numbers>

using namespace mrf;

TEST(Eigen, Identity) {
  const auto e = eigendecompose_symmetric(DenseMatrix::Identity(4, 4));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(e.eigenvalues(i), 1.0, 1e-14);
}

TEST(Eigen, DiagonalWithAxisVectors) {
  DenseMatrix m = DenseMatrix::Zero(3, 3);
  m.diagonal() << 3, 1, 2;
  const auto e = eigendecompose_symmetric(m);
  EXPECT_NEAR(e.eigenvalues(0), 1.0, 1e-14);
  EXPECT_NEAR(e.eigenvalues(1), 2.0, 1e-14);
  EXPECT_NEAR(e.eigenvalues(2), 3.0, 1e-14);
  EXPECT_NEAR(std::abs(e.eigenvectors(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.eigenvectors(2, 1)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.eigenvectors(0, 2)), 1.0, 1e-14);
}

TEST(Eigen, SwapMatrix) {
  DenseMatrix m(2, 2);
  m << 0, 1, 1, 0;
  const auto e = eigendecompose_symmetric(m);
  EXPECT_NEAR(e.eigenvalues(0), -1.0, 1e-14);
  EXPECT_NEAR(e.eigenvalues(1), 1.0, 1e-14);
}

TEST(Eigen, ReconstructionAndOrthonormality) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  DenseMatrix a(300, 300);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  const DenseMatrix m = a + a.transpose();
  const auto e = eigendecompose_symmetric(m);
  EXPECT_LT((e.reconstruct() - m).norm() / m.norm(), 1e-8);
  EXPECT_LT((e.eigenvectors.transpose() * e.eigenvectors - DenseMatrix::Identity(300, 300)).cwiseAbs().maxCoeff(), 1e-10);
  for (Eigen::Index i = 1; i < 300; ++i) EXPECT_LE(e.eigenvalues(i - 1), e.eigenvalues(i));
}

TEST(Eigen, AsymmetricRejected) {
  DenseMatrix m(2, 2);
  m << 0, 1, 0, 0;
  EXPECT_MRF_ERROR(eigendecompose_symmetric(m), ErrorCode::asymmetric_input);
}

TEST(HeatKernel, SmallTimeIsIdentity) {
  const GridGraph g(6, 1);
  const DenseMatrix k = spectral_heat_kernel(rescaled_random_walk_laplacian(g), {1e-14, HeatKernelParams::Sign::laplacian});
  EXPECT_LT((k - DenseMatrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(HeatKernel, SwapMatrixMatchesSeries) {
  DenseMatrix w(2, 2);
  w << 0, 1, 1, 0;
  const DenseMatrix k = spectral_heat_kernel(w, {1.0, HeatKernelParams::Sign::affinity});
  EXPECT_LT((k - exact_kernel_series(w, heat_alpha(1.0))).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(k(0, 1), std::sinh(1.0), 1e-12);
}

TEST(HeatKernel, RowSumsOfRandomWalkLaplacianKernel) {
  const GridGraph g(5, 2);
  const DenseMatrix k = spectral_heat_kernel(rescaled_random_walk_laplacian(g), {0.01, HeatKernelParams::Sign::laplacian});
  for (Eigen::Index i = 0; i < k.rows(); ++i) EXPECT_NEAR(k.row(i).sum(), 1.0, 1e-10);
}

TEST(HeatKernel, NonPositiveTimeRejected) {
  EXPECT_MRF_ERROR(spectral_heat_kernel(DenseMatrix::Identity(2, 2), {0.0, HeatKernelParams::Sign::laplacian}),
                   ErrorCode::invalid_argument);
}

TEST(SphereKernel, LongTimeLimit) {
  const double x[3] = {1, 0, 0}, y[3] = {0, 0.6, 0.8};
  EXPECT_NEAR(sphere_heat_kernel(x, y, 50.0, 50), 1.0 / (4.0 * std::numbers::pi), 1e-15);
}

TEST(SphereKernel, TruncationSelfConsistency) {
  const double x[3] = {0, 0, 1};
  EXPECT_NEAR(sphere_heat_kernel(x, x, 0.25, 50), sphere_heat_kernel(x, x, 0.25, 100), 1e-8);
}

TEST(SphereKernel, NonUnitInputRejected) {
  const double x[3] = {2, 0, 0}, y[3] = {1, 0, 0};
  EXPECT_MRF_ERROR(sphere_heat_kernel(x, y, 0.25, 50), ErrorCode::non_unit_input);
}

TEST(SphereKernel, IntegratesToOne) {
  const PointCloud pts(fibonacci_sphere(4000));
  const DenseMatrix k = sphere_heat_kernel_matrix(pts, 0.25, 50);
  for (Eigen::Index i : {0, 1234, 3999}) EXPECT_NEAR(4.0 * std::numbers::pi / 4000.0 * k.row(i).sum(), 1.0, 0.02);
  EXPECT_LT((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  const std::vector<double> ri{pts.point(17)(0), pts.point(17)(1), pts.point(17)(2)};
  const std::vector<double> rj{pts.point(2001)(0), pts.point(2001)(1), pts.point(2001)(2)};
  EXPECT_NEAR(k(17, 2001), sphere_heat_kernel(ri, rj, 0.25, 50), 1e-13);
}

TEST(Gaussian, Values) {
  const double x[2] = {0.3, -0.1}, y[2] = {0.3 + 0.2 * std::sqrt(2.0), -0.1};
  EXPECT_DOUBLE_EQ(gaussian_kernel(x, x, 0.2), 1.0);
  EXPECT_NEAR(gaussian_kernel(x, y, 0.2), std::exp(-1.0), 1e-14);
  EXPECT_DOUBLE_EQ(gaussian_kernel(x, y, 0.2), gaussian_kernel(y, x, 0.2));
  const double z[3] = {0, 0, 0};
  EXPECT_MRF_ERROR(gaussian_kernel(x, z, 0.2), ErrorCode::dimension_mismatch);
}

TEST(GSigma, PeakValue) {
  const double x[3] = {0.1, 0.2, 0.3};
  EXPECT_NEAR(g_sigma(x, x, 0.2), std::pow(2.0 / (std::numbers::pi * 0.04), 0.75), 1e-12);
}

TEST(GSigma, QuadratureReproducesGaussian) {
  for (double dx : {0.0, 0.1, 0.3, 0.6}) {
    const double x[1] = {0.2}, y[1] = {0.2 + dx};
    EXPECT_NEAR(feature_quadrature_1d(0.2, 0.2 + dx, 0.2, 1e-3), gaussian_kernel(x, y, 0.2), 1e-6) << dx;
  }
}

TEST(GSigma, MidpointIdentity) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    double x[3], y[3], w[3];
    for (int c = 0; c < 3; ++c) {
      x[c] = normal(rng);
      y[c] = normal(rng);
      w[c] = normal(rng);
    }
    EXPECT_NEAR(midpoint_identity_residual(x, y, w), 0.0, 1e-12);
  }
}

TEST(PeriodizedGaussian, SymmetricAndAboveBase) {
  const double x[2] = {0.1, 0.7}, y[2] = {0.8, 0.2};
  EXPECT_DOUBLE_EQ(periodized_gaussian(x, y, 0.3), periodized_gaussian(y, x, 0.3));
  EXPECT_GE(periodized_gaussian(x, y, 0.3), gaussian_kernel(x, y, 0.3));
}

TEST(PeriodizedGaussian, NarrowBandwidthHasNoImages) {
  const double x[1] = {0.3}, y[1] = {0.4};
  EXPECT_NEAR(periodized_gaussian(x, y, 0.05, 3), periodized_gaussian(x, y, 0.05, 0), 1e-12);
}

TEST(PeriodizedGaussian, WrapAround) {
  const double x[1] = {0.01}, y[1] = {0.99}, near[1] = {0.03};
  EXPECT_NEAR(periodized_gaussian(x, y, 0.1), gaussian_kernel(x, near, 0.1), 1e-12);
}

TEST(PeriodizedGaussian, RingLimitImproves) {
  const double e16 = periodized_limit_error(16, 0.2), e32 = periodized_limit_error(32, 0.2),
               e64 = periodized_limit_error(64, 0.2);
  EXPECT_LT(e32, e16);
  EXPECT_LT(e64, e32);
}

TEST(Kronecker, OneDimensionIsRingKernel) {
  const auto k = kronecker_heat_grid(7, 1, 0.1);
  const DenseMatrix direct = spectral_heat_kernel(rescaled_random_walk_laplacian(GridGraph(7, 1)),
                                                  {0.1, HeatKernelParams::Sign::laplacian});
  EXPECT_LT((k.dense() - direct).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Kronecker, TwoDimensionsMatchFullEigendecomposition) {
  const auto k = kronecker_heat_grid(8, 2, 0.02);
  const DenseMatrix full = spectral_heat_kernel(rescaled_random_walk_laplacian(GridGraph(8, 2)),
                                                {0.02, HeatKernelParams::Sign::laplacian});
  EXPECT_LT((k.dense() - full).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Kronecker, ConstantDiagonal) {
  const DenseMatrix d = kronecker_heat_grid(5, 3, 0.05).dense();
  for (Eigen::Index i = 1; i < d.rows(); ++i) EXPECT_NEAR(d(i, i), d(0, 0), 1e-13);
}
