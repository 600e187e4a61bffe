#pragma once

// Numerical checks of the continuum limits and identities behind the estimators.

#include "mrf/common.hpp"
#include "mrf/graph.hpp"
#include "mrf/grf.hpp"
#include "mrf/manifolds.hpp"
#include "mrf/features.hpp"
#include "mrf/oracles.hpp"
#include "mrf/pipeline.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace mrf {

// sup |L_n f - 4 pi^2 d f| for f = prod_j sin(2 pi x_j) on the n^d grid.
inline double laplacian_sup_error(std::size_t n, std::size_t d) {
  GridGraph grid(n, d);
  const DenseMatrix l = rescaled_random_walk_laplacian(grid);
  Vector f(static_cast<Eigen::Index>(grid.num_nodes()));
  for (std::size_t v = 0; v < grid.num_nodes(); ++v) {
    double prod = 1.0;
    for (double x : grid.position(v)) prod *= std::sin(2.0 * std::numbers::pi * x);
    f(static_cast<Eigen::Index>(v)) = prod;
  }
  const double eigen = 4.0 * std::numbers::pi * std::numbers::pi * static_cast<double>(d);
  return (l * f - eigen * f).cwiseAbs().maxCoeff();
}

// max_{x,y} |n exp(-(sigma^2/2) L_n)(x, y) - p(x, y)| on the 1D ring, p the periodized heat density.
inline double periodized_limit_error(std::size_t n, double sigma, int k_max = 3) {
  KroneckerHeatGrid k(n, 1, 0.5 * sigma * sigma);
  double worst = 0.0;
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x[1] = {static_cast<double>(i) * h}, y[1] = {static_cast<double>(j) * h};
      const double est = static_cast<double>(n) * k.ring_kernel()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      worst = std::max(worst, std::abs(est - periodized_heat_density(x, y, sigma, k_max)));
    }
  return worst;
}

// Trapezoid rule for int g(x, w) g(y, w) dw over [m - 6 sigma, m + 6 sigma], m = (x+y)/2, in d = 1.
inline double feature_quadrature_1d(double x, double y, double sigma, double step) {
  const double mid = 0.5 * (x + y);
  const double lo = mid - 6.0 * sigma, hi = mid + 6.0 * sigma;
  const auto intervals = static_cast<std::size_t>(std::llround((hi - lo) / step));
  const double h = (hi - lo) / static_cast<double>(intervals);
  double sum = 0.0;
  for (std::size_t k = 0; k <= intervals; ++k) {
    const double w[1] = {lo + h * static_cast<double>(k)};
    const double xs[1] = {x}, ys[1] = {y};
    const double v = g_sigma(xs, w, sigma) * g_sigma(ys, w, sigma);
    sum += (k == 0 || k == intervals) ? 0.5 * v : v;
  }
  return sum * h;
}

// |x-w|^2 + |y-w|^2 - 2|w-m|^2 - |x-y|^2/2 with m the midpoint.
inline double midpoint_identity_residual(std::span<const double> x, std::span<const double> y,
                                         std::span<const double> w) {
  std::vector<double> m(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) m[c] = 0.5 * (x[c] + y[c]);
  return squared_distance(x, w) + squared_distance(y, w) - 2.0 * squared_distance(w, m) -
         0.5 * squared_distance(x, y);
}

struct SphereConsistency {
  double r2 = 0.0;
  double alpha = 0.0;
};

// Graph heat kernel exp(-t L) on a Fibonacci sphere against the truncated analytic kernel, after alignment.
inline SphereConsistency sphere_oracle_consistency(std::size_t n, std::size_t knn, double t, std::size_t lmax,
                                                   std::size_t threads = 1) {
  const PointCloud points(fibonacci_sphere(n));
  const auto graph = build_knn_graph(points, knn, Bandwidth::median(), threads);
  const DenseMatrix k_graph =
      spectral_heat_kernel(surface_graph_laplacian(graph.graph, points), {t, HeatKernelParams::Sign::laplacian});
  const DenseMatrix k_true = sphere_heat_kernel_matrix(points, t, lmax, threads);
  const Alignment al = frobenius_align(k_graph, k_true);
  return {kernel_metrics(al.aligned, k_true, 0.1).r2, al.alpha};
}

struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string relation;  // how value is compared with tolerance
  bool pass = false;
};

// Every oracle-level check; cheap enough to run in seconds.
inline std::vector<CheckResult> run_selfchecks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto add = [&](std::string name, double value, double tol, std::string rel, bool pass) {
    out.push_back({std::move(name), value, tol, std::move(rel), pass});
  };

  for (std::size_t d : {1u, 2u}) {
    const double ratio = laplacian_sup_error(16, d) / laplacian_sup_error(32, d);
    add("laplacian_ratio_d" + std::to_string(d), ratio, 0.0, "in [3.2, 4.8]", ratio >= 3.2 && ratio <= 4.8);
    add("laplacian_order_d" + std::to_string(d), std::log2(ratio), 1.8, ">=", std::log2(ratio) >= 1.8);
  }

  {
    const double e16 = periodized_limit_error(16, 0.2), e32 = periodized_limit_error(32, 0.2),
                 e64 = periodized_limit_error(64, 0.2);
    add("periodized_limit_16_32_64", e64, e32, "e64 < e32 < e16", e32 < e16 && e64 < e32);
  }

  std::mt19937_64 rng(seed);
  {
    std::uniform_real_distribution<double> pos(0.0, 1.0), gap(-0.6, 0.6);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double x = pos(rng), y = x + gap(rng);
      const double xs[1] = {x}, ys[1] = {y};
      worst = std::max(worst, std::abs(feature_quadrature_1d(x, y, 0.2, 0.2 / 50.0) - gaussian_kernel(xs, ys, 0.2)));
    }
    add("feature_quadrature", worst, 1e-6, "<", worst < 1e-6);
  }

  {
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      std::vector<double> x(3), y(3), w(3);
      for (int c = 0; c < 3; ++c) x[c] = normal(rng), y[c] = normal(rng), w[c] = normal(rng);
      worst = std::max(worst, std::abs(midpoint_identity_residual(x, y, w)));
    }
    add("midpoint_identity", worst, 1e-12, "<", worst < 1e-12);
  }

  {
    const double p[3] = {0.0, 0.0, 1.0};
    const double gap = std::abs(sphere_heat_kernel(p, p, 0.25, 50) - sphere_heat_kernel(p, p, 0.25, 100));
    add("legendre_truncation", gap, 1e-8, "<", gap < 1e-8);
  }

  {
    const PointCloud cloud(fibonacci_sphere(4000));
    double worst = 0.0;
    for (std::size_t i : {0u, 1000u, 2345u, 3999u}) {
      double sum = 0.0;
      const std::vector<double> x{cloud.point(i)(0), cloud.point(i)(1), cloud.point(i)(2)};
      for (std::size_t j = 0; j < cloud.size(); ++j) {
        const std::vector<double> y{cloud.point(j)(0), cloud.point(j)(1), cloud.point(j)(2)};
        sum += sphere_heat_kernel(x, y, 0.25, 50);
      }
      worst = std::max(worst, std::abs(4.0 * std::numbers::pi / 4000.0 * sum - 1.0));
    }
    add("sphere_kernel_mass", worst, 0.02, "<=", worst <= 0.02);
  }

  {
    double worst = 0.0;
    for (double t : {0.02, 1.0, 10.0}) {
      const auto alpha = heat_alpha(t, 30);
      const auto conv = self_convolve(deconvolve_alpha(alpha));
      for (std::size_t k = 0; k < alpha.values.size(); ++k)
        worst = std::max(worst, std::abs(conv[k] - alpha[k]) / std::abs(alpha[k]));
    }
    add("deconvolution_identity", worst, 1e-12, "<", worst < 1e-12);
  }

  {
    const KroneckerHeatGrid tensor(8, 2, 0.01);
    const DenseMatrix full =
        spectral_heat_kernel(rescaled_random_walk_laplacian(GridGraph(8, 2)), {0.01, HeatKernelParams::Sign::laplacian});
    const double gap = (tensor.dense() - full).cwiseAbs().maxCoeff();
    add("kronecker_tensorization", gap, 1e-10, "<", gap < 1e-10);
  }

  {
    DenseMatrix w(2, 2);
    w << 0, 1, 1, 0;
    const DenseMatrix series = exact_kernel_series(w, heat_alpha(1.0));
    const DenseMatrix spectral = spectral_heat_kernel(w, {1.0, HeatKernelParams::Sign::affinity});
    const double gap = (series - spectral).cwiseAbs().maxCoeff();
    add("series_vs_spectral", gap, 1e-10, "<", gap < 1e-10);
  }
  {
    const auto sc = sphere_oracle_consistency(1000, 8, 0.25, 50);
    add("sphere_graph_vs_analytic_r2", sc.r2, 0.95, ">=", sc.r2 >= 0.95);
  }
  return out;
}

}  // namespace mrf
