#include "mrf/interp.hpp"
#include "mrf/manifolds.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace mrf;

namespace {

DenseMatrix random_field(Eigen::Index rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  DenseMatrix f(rows, 3);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = normal(rng);
  return f;
}

DenseMatrix small_mesh_affinity(std::size_t nu, std::size_t nv) {
  const Mesh m = torus_mesh(nu, nv);
  const auto n = static_cast<Eigen::Index>(m.num_vertices());
  DenseMatrix w = DenseMatrix::Zero(n, n);
  for (const auto& [a, b] : mesh_edges(m)) w(a, b) = w(b, a) = 1.0;
  return w;
}

}  // namespace

TEST(Mask, ZeroFractionLeavesFieldUnchanged) {
  const DenseMatrix f = random_field(10, 1);
  const auto m = mask_field(f, 0.0, 1);
  EXPECT_TRUE(m.masked.empty());
  EXPECT_TRUE(m.values == f);
}

TEST(Mask, CountAndDeterminism) {
  const DenseMatrix f = random_field(100, 2);
  const auto a = mask_field(f, 0.8, 3), b = mask_field(f, 0.8, 3);
  EXPECT_EQ(a.masked.size(), 80u);
  EXPECT_EQ(a.masked, b.masked);
  for (auto i : a.masked) EXPECT_EQ(a.values.row(i).norm(), 0.0);
  EXPECT_EQ(a.observed_indicator().sum(), 20.0);
}

TEST(Mask, Errors) {
  const DenseMatrix f = random_field(1, 4);
  EXPECT_MRF_ERROR(mask_field(f, 1.0, 1), ErrorCode::invalid_argument);
  EXPECT_MRF_ERROR(mask_field(f, -0.1, 1), ErrorCode::invalid_argument);
}

TEST(Normals, IdentityKernel) {
  DenseMatrix f = random_field(20, 5);
  f.rowwise().normalize();
  const auto m = mask_field(f, 0.5, 6);
  const auto r = interpolate_normals(KernelOperator::dense(DenseMatrix::Identity(20, 20)), m, f);
  EXPECT_EQ(r.zero_rows, m.masked);
  for (Eigen::Index i = 0; i < 20; ++i)
    if (m.mask[static_cast<std::size_t>(i)]) { EXPECT_LT((r.predictions.row(i) - f.row(i)).norm(), 1e-15); }
  EXPECT_EQ(r.score, 0.0);
}

TEST(Normals, AllOnesKernelSpreadsSingleObservation) {
  DenseMatrix f = DenseMatrix::Zero(6, 3);
  f.row(2) << 0.0, 0.6, 0.8;
  MaskedField m{f, {0, 0, 1, 0, 0, 0}, {0, 1, 3, 4, 5}};
  const auto r = interpolate_normals(KernelOperator::dense(DenseMatrix::Ones(6, 6)), m, DenseMatrix());
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_LT((r.predictions.row(i) - f.row(2)).norm(), 1e-15);
  EXPECT_TRUE(r.zero_rows.empty());
}

TEST(Normals, ExactFactorMatchesDenseKernel) {
  const DenseMatrix w = small_mesh_affinity(12, 8);
  const auto eig = eigendecompose_symmetric(symmetric_normalized_affinity(w));
  const DenseMatrix k = spectral_heat_kernel(eig, {20.0, HeatKernelParams::Sign::affinity});
  const DenseMatrix phi = exact_heat_factor(eig, 20.0);
  DenseMatrix f = random_field(w.rows(), 7);
  f.rowwise().normalize();
  const auto m = mask_field(f, 0.8, 8);
  const auto a = interpolate_normals(KernelOperator::dense(k), m, f);
  const auto b = interpolate_normals(KernelOperator::factored(phi), m, f);
  EXPECT_LT((a.predictions - b.predictions).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index i = 0; i < a.predictions.rows(); ++i) EXPECT_NEAR(a.predictions.row(i).norm(), 1.0, 1e-10);
  EXPECT_TRUE(k.isApprox(full_heat_kernel(w, 20.0), 1e-12));
}

TEST(Velocity, ConstantFieldReproduced) {
  const DenseMatrix w = small_mesh_affinity(10, 6);
  const DenseMatrix k = full_heat_kernel(w, 20.0);
  DenseMatrix c(w.rows(), 3);
  c.rowwise() = Eigen::RowVector3d(0.3, -1.2, 2.0);
  for (double frac : {0.05, 0.5, 0.9}) {
    const auto m = mask_field(c, frac, 9);
    const auto r = interpolate_velocity_normalized(KernelOperator::dense(k), c, m.mask);
    EXPECT_LT((r.predictions - c).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Velocity, ScaleInvariance) {
  const DenseMatrix w = small_mesh_affinity(10, 6);
  const DenseMatrix k = full_heat_kernel(w, 5.0);
  const DenseMatrix f = random_field(w.rows(), 10);
  const auto m = mask_field(f, 0.3, 11);
  const auto a = interpolate_velocity_normalized(KernelOperator::dense(k), f, m.mask);
  const auto b = interpolate_velocity_normalized(KernelOperator::dense(2.0 * k), f, m.mask);
  EXPECT_LT((a.predictions - b.predictions).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Velocity, FullMaskRowStochastic) {
  DenseMatrix k = DenseMatrix::Random(5, 5).cwiseAbs();
  for (Eigen::Index i = 0; i < 5; ++i) k.row(i) /= k.row(i).sum();
  const DenseMatrix u = random_field(5, 12);
  const std::vector<std::uint8_t> all(5, 1);
  const auto r = interpolate_velocity_normalized(KernelOperator::dense(k), u, all);
  EXPECT_LT((r.predictions - k * u).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Velocity, UnreachableNode) {
  const DenseMatrix u = random_field(2, 13);
  const std::vector<std::uint8_t> mask{1, 0};
  EXPECT_MRF_ERROR(interpolate_velocity_normalized(KernelOperator::dense(DenseMatrix::Identity(2, 2)), u, mask),
                   ErrorCode::unreachable_node);
}

TEST(Velocity, ExactFactorAgrees) {
  const DenseMatrix w = small_mesh_affinity(9, 7);
  const auto eig = eigendecompose_symmetric(symmetric_normalized_affinity(w));
  const DenseMatrix f = random_field(w.rows(), 14);
  const auto m = mask_field(f, 0.05, 15);
  const auto a = interpolate_velocity_normalized(
      KernelOperator::dense(spectral_heat_kernel(eig, {20.0, HeatKernelParams::Sign::affinity})), f, m.mask);
  const auto b = interpolate_velocity_normalized(KernelOperator::factored(exact_heat_factor(eig, 20.0)), f, m.mask);
  EXPECT_LT((a.predictions - b.predictions).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Scores, CosineAndRelativeError) {
  DenseMatrix t(2, 3), p(2, 3);
  t << 1, 0, 0, 0, 1, 0;
  p << 1, 0, 0, 1, 0, 0;
  EXPECT_DOUBLE_EQ(mean_cosine(p, t, {}), 0.5);
  EXPECT_DOUBLE_EQ(mean_cosine(p, t, {0}), 1.0);
  EXPECT_DOUBLE_EQ(masked_relative_error(p, t, {1}), std::sqrt(2.0));
  EXPECT_EQ(masked_relative_error(p, t, {}), 0.0);
}

TEST(KernelOperatorTest, ShapeChecks) {
  EXPECT_MRF_ERROR(KernelOperator::dense(DenseMatrix::Zero(2, 3)), ErrorCode::dimension_mismatch);
  EXPECT_MRF_ERROR(KernelOperator::dense(DenseMatrix::Identity(2, 2)).apply(DenseMatrix::Zero(3, 1)),
                   ErrorCode::dimension_mismatch);
}
