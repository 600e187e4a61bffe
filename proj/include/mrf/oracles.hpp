#pragma once

// Ground-truth kernels used to validate the estimators.

#include "mrf/common.hpp"
#include "mrf/graph.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace mrf {

struct SpectralDecomposition {
  Vector eigenvalues;        // ascending
  DenseMatrix eigenvectors;  // orthonormal columns

  DenseMatrix reconstruct() const { return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose(); }

  // V diag(map(lambda)) V^T.
  template <typename Map>
  DenseMatrix apply_function(Map&& map) const {
    Vector mapped = eigenvalues.unaryExpr(std::forward<Map>(map));
    DenseMatrix scaled = eigenvectors * mapped.asDiagonal();
    return scaled * eigenvectors.transpose();
  }
};

// Dense symmetric eigendecomposition (tridiagonalization + implicit QR).
inline SpectralDecomposition eigendecompose_symmetric(const DenseMatrix& m) {
  require(m.rows() == m.cols(), ErrorCode::dimension_mismatch, "matrix must be square");
  require(m.allFinite(), ErrorCode::invalid_argument, "matrix has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (m.size() > 0)
    require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, ErrorCode::asymmetric_input,
            "matrix is not symmetric");
  SpectralDecomposition out;
  if (m.rows() == 0) return out;
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::ComputeEigenvectors);
  require(solver.info() == Eigen::Success, ErrorCode::no_convergence, "symmetric eigensolver did not converge");
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  return out;
}

struct HeatKernelParams {
  // exp(-t M) for a Laplacian-like M, exp(+t M) for an affinity like W_f.
  enum class Sign { laplacian, affinity };
  double t = 1.0;
  Sign sign = Sign::laplacian;
};

inline DenseMatrix spectral_heat_kernel(const SpectralDecomposition& eig, HeatKernelParams params) {
  require(params.t > 0.0, ErrorCode::invalid_argument, "diffusion time must be positive");
  const double s = params.sign == HeatKernelParams::Sign::laplacian ? -params.t : params.t;
  return eig.apply_function([s](double lambda) { return std::exp(s * lambda); });
}

inline DenseMatrix spectral_heat_kernel(const DenseMatrix& m, HeatKernelParams params) {
  return spectral_heat_kernel(eigendecompose_symmetric(m), params);
}

// ---------------------------------------------------------------------------
// Sphere

// P_0..P_lmax at z by the three-term recurrence.
inline std::vector<double> legendre_values(double z, std::size_t lmax) {
  std::vector<double> p(lmax + 1);
  p[0] = 1.0;
  if (lmax >= 1) p[1] = z;
  for (std::size_t l = 2; l <= lmax; ++l) {
    const double ld = static_cast<double>(l);
    p[l] = ((2.0 * ld - 1.0) * z * p[l - 1] - (ld - 1.0) * p[l - 2]) / ld;
  }
  return p;
}

// sum_{l<=lmax} (2l+1)/(4 pi) exp(-l(l+1)t) P_l(<x,y>) on the unit sphere S^2.
inline double sphere_heat_kernel(std::span<const double> x, std::span<const double> y, double t, std::size_t lmax) {
  require(x.size() == 3 && y.size() == 3, ErrorCode::dimension_mismatch, "sphere points must be in R^3");
  require(t > 0.0, ErrorCode::invalid_argument, "diffusion time must be positive");
  const double nx = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  const double ny = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
  require(std::abs(nx - 1.0) <= 1e-9 && std::abs(ny - 1.0) <= 1e-9, ErrorCode::non_unit_input,
          "sphere points must have unit norm");
  const double z = std::clamp(x[0] * y[0] + x[1] * y[1] + x[2] * y[2], -1.0, 1.0);
  const auto p = legendre_values(z, lmax);
  double sum = 0.0;
  for (std::size_t l = 0; l <= lmax; ++l) {
    const double ld = static_cast<double>(l);
    sum += (2.0 * ld + 1.0) * std::exp(-ld * (ld + 1.0) * t) * p[l];
  }
  return sum / (4.0 * std::numbers::pi);
}

// Analytic sphere kernel over all pairs of a unit-sphere point cloud.
inline DenseMatrix sphere_heat_kernel_matrix(const PointCloud& points, double t, std::size_t lmax,
                                             std::size_t threads = 1) {
  require(points.dim() == 3, ErrorCode::dimension_mismatch, "sphere points must be in R^3");
  const auto n = static_cast<Eigen::Index>(points.size());
  DenseMatrix k(n, n);
  std::vector<double> weight(lmax + 1);
  for (std::size_t l = 0; l <= lmax; ++l) {
    const double ld = static_cast<double>(l);
    weight[l] = (2.0 * ld + 1.0) * std::exp(-ld * (ld + 1.0) * t) / (4.0 * std::numbers::pi);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    require(std::abs(points.coords().row(i).norm() - 1.0) <= 1e-9, ErrorCode::non_unit_input,
            "sphere points must have unit norm");
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t ii, std::size_t) {
    const auto i = static_cast<Eigen::Index>(ii);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double z = std::clamp(points.coords().row(i).dot(points.coords().row(j)), -1.0, 1.0);
      double pm = 1.0, pc = z, sum = weight[0];
      if (lmax >= 1) sum += weight[1] * z;
      for (std::size_t l = 2; l <= lmax; ++l) {
        const double ld = static_cast<double>(l);
        const double pn = ((2.0 * ld - 1.0) * z * pc - (ld - 1.0) * pm) / ld;
        pm = pc;
        pc = pn;
        sum += weight[l] * pn;
      }
      k(i, j) = sum;
    }
  });
  return k;
}

// ---------------------------------------------------------------------------
// Euclidean Gaussian kernels

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::dimension_mismatch, "vectors differ in dimension");
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) s += (x[c] - y[c]) * (x[c] - y[c]);
  return s;
}

// exp(-|x - y|^2 / (2 sigma^2)).
inline double gaussian_kernel(std::span<const double> x, std::span<const double> y, double sigma) {
  require(sigma > 0.0, ErrorCode::invalid_argument, "sigma must be positive");
  return std::exp(-squared_distance(x, y) / (2.0 * sigma * sigma));
}

// Positive bounded feature of the Gaussian kernel:
// (2 / (pi sigma^2))^{d/4} exp(-|x - w|^2 / sigma^2), d = dim(x).
inline double g_sigma(std::span<const double> x, std::span<const double> omega, double sigma) {
  require(sigma > 0.0, ErrorCode::invalid_argument, "sigma must be positive");
  const double d = static_cast<double>(x.size());
  return std::pow(2.0 / (std::numbers::pi * sigma * sigma), d / 4.0) *
         std::exp(-squared_distance(x, omega) / (sigma * sigma));
}

namespace detail {

// Calls visit(shift) for every integer shift with |shift|_inf <= k_max.
template <typename Visit>
void for_each_image(std::size_t dim, int k_max, Visit&& visit) {
  std::vector<int> shift(dim, -k_max);
  while (true) {
    visit(std::span<const int>(shift));
    std::size_t c = 0;
    while (c < dim && shift[c] == k_max) shift[c++] = -k_max;
    if (c == dim) break;
    ++shift[c];
  }
}

}  // namespace detail

// sum over integer shifts k (|k|_inf <= k_max) of exp(-|x - y + k|^2 / (2 sigma^2)).
inline double periodized_gaussian(std::span<const double> x, std::span<const double> y, double sigma, int k_max = 3) {
  require(x.size() == y.size(), ErrorCode::dimension_mismatch, "vectors differ in dimension");
  require(sigma > 0.0, ErrorCode::invalid_argument, "sigma must be positive");
  require(k_max >= 0, ErrorCode::invalid_argument, "k_max must be >= 0");
  double sum = 0.0;
  detail::for_each_image(x.size(), k_max, [&](std::span<const int> shift) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double diff = x[c] - y[c] + shift[c];
      s += diff * diff;
    }
    sum += std::exp(-s / (2.0 * sigma * sigma));
  });
  return sum;
}

// Heat density on the unit torus at time sigma^2/2:
// (2 pi sigma^2)^{-d/2} periodized_gaussian(x, y, sigma).
inline double periodized_heat_density(std::span<const double> x, std::span<const double> y, double sigma,
                                      int k_max = 3) {
  const double d = static_cast<double>(x.size());
  return std::pow(2.0 * std::numbers::pi * sigma * sigma, -d / 2.0) * periodized_gaussian(x, y, sigma, k_max);
}

// Periodized g_sigma on the torus (sum of feature images).
inline double periodized_g_sigma(std::span<const double> x, std::span<const double> omega, double sigma,
                                 int k_max = 3) {
  require(x.size() == omega.size(), ErrorCode::dimension_mismatch, "vectors differ in dimension");
  double sum = 0.0;
  std::vector<double> shifted(omega.begin(), omega.end());
  detail::for_each_image(x.size(), k_max, [&](std::span<const int> shift) {
    for (std::size_t c = 0; c < x.size(); ++c) shifted[c] = omega[c] - shift[c];
    sum += g_sigma(x, shifted, sigma);
  });
  return sum;
}

// ---------------------------------------------------------------------------
// Tensorized grid heat kernel

// exp(-t L_n) on the n^d wrap-around grid. The rescaled random-walk Laplacian
// is a Kronecker sum of 1D ring Laplacians, so every entry is a product of
// 1D ring heat-kernel entries.
class KroneckerHeatGrid {
 public:
  KroneckerHeatGrid(std::size_t side, std::size_t dim, double t) : grid_(side, 1), dim_(dim), t_(t) {
    require(dim >= 1, ErrorCode::invalid_argument, "dimension must be >= 1");
    require(t > 0.0, ErrorCode::invalid_argument, "diffusion time must be positive");
    ring_ = spectral_heat_kernel(rescaled_random_walk_laplacian(grid_), {t, HeatKernelParams::Sign::laplacian});
  }

  std::size_t side() const { return grid_.side(); }
  std::size_t dim() const { return dim_; }
  double t() const { return t_; }
  const DenseMatrix& ring_kernel() const { return ring_; }

  // Entry between two multi-indices.
  double entry(std::span<const std::size_t> a, std::span<const std::size_t> b) const {
    require(a.size() == dim_ && b.size() == dim_, ErrorCode::dimension_mismatch, "multi-index size differs from d");
    double v = 1.0;
    for (std::size_t c = 0; c < dim_; ++c) v *= ring_(static_cast<Eigen::Index>(a[c]), static_cast<Eigen::Index>(b[c]));
    return v;
  }

  // Entry between flattened node ids (same ordering as GridGraph).
  double entry(std::size_t u, std::size_t v) const {
    double out = 1.0;
    const auto n = side();
    for (std::size_t c = 0; c < dim_; ++c) {
      out *= ring_(static_cast<Eigen::Index>(u % n), static_cast<Eigen::Index>(v % n));
      u /= n;
      v /= n;
    }
    return out;
  }

  DenseMatrix dense() const {
    std::size_t count = 1;
    for (std::size_t c = 0; c < dim_; ++c) count *= side();
    const auto n = static_cast<Eigen::Index>(count);
    DenseMatrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) k(i, j) = entry(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return k;
  }

 private:
  GridGraph grid_;
  std::size_t dim_;
  double t_;
  DenseMatrix ring_;
};

inline KroneckerHeatGrid kronecker_heat_grid(std::size_t side, std::size_t dim, double t) {
  return KroneckerHeatGrid(side, dim, t);
}

}  // namespace mrf
