#pragma once

// Feature assembly from g-values, grid rescaling, Frobenius alignment and error metrics.

#include "mrf/common.hpp"
#include "mrf/grf.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace mrf {

struct MrfFeatureMap {
  enum class Variant { full, sampled };
  Variant variant = Variant::full;
  std::vector<NodeId> anchors;
  DenseMatrix values;            // points x m, non-negative
  std::size_t m = 0;
  double kappa = 1.0;
  std::vector<double> density;   // p(omega_l) per drawn anchor

  double dot(std::size_t x, std::size_t y) const {
    return values.row(static_cast<Eigen::Index>(x)).dot(values.row(static_cast<Eigen::Index>(y)));
  }
  DenseMatrix gram() const { return values * values.transpose(); }
};

namespace detail {

inline void require_non_negative(const DenseMatrix& g) {
  require(g.allFinite(), ErrorCode::numeric, "g-values must be finite");
  require(g.size() == 0 || g.minCoeff() >= 0.0, ErrorCode::invalid_argument, "g-values must be non-negative");
}

inline MrfFeatureMap sampled_from_anchors(const DenseMatrix& g, std::span<const double> density,
                                          std::vector<NodeId> anchors) {
  MrfFeatureMap out;
  out.variant = MrfFeatureMap::Variant::sampled;
  out.m = anchors.size();
  out.kappa = 1.0;
  out.values.resize(g.rows(), static_cast<Eigen::Index>(out.m));
  for (std::size_t l = 0; l < out.m; ++l) {
    require(anchors[l] < density.size(), ErrorCode::invalid_argument, "anchor outside the discretization");
    const double p = density[anchors[l]];
    require(p > 0.0, ErrorCode::density, "zero density at anchor " + std::to_string(anchors[l]));
    out.density.push_back(p);
    out.values.col(static_cast<Eigen::Index>(l)) =
        g.col(anchors[l]) / std::sqrt(static_cast<double>(out.m) * out.kappa * p);
  }
  out.anchors = std::move(anchors);
  return out;
}

}  // namespace detail

// Every node is an anchor with p = 1 and kappa = 1/m, so features are the g-values themselves.
inline MrfFeatureMap assemble_mrf_full(const DenseMatrix& g) {
  detail::require_non_negative(g);
  MrfFeatureMap out;
  out.variant = MrfFeatureMap::Variant::full;
  out.m = static_cast<std::size_t>(g.cols());
  out.kappa = out.m == 0 ? 1.0 : 1.0 / static_cast<double>(out.m);
  out.anchors.resize(out.m);
  for (std::size_t l = 0; l < out.m; ++l) out.anchors[l] = static_cast<NodeId>(l);
  out.density.assign(out.m, 1.0);
  out.values = g;  // g / sqrt(m * (1/m) * 1)
  return out;
}

// m anchors drawn iid from the probability vector `density` over the columns of g.
inline MrfFeatureMap assemble_mrf_sampled(const DenseMatrix& g, std::span<const double> density, std::size_t m,
                                          std::uint64_t seed) {
  detail::require_non_negative(g);
  require(density.size() == static_cast<std::size_t>(g.cols()), ErrorCode::dimension_mismatch,
          "density must have one entry per node");
  require(m >= 1, ErrorCode::invalid_argument, "need at least one anchor");
  double total = 0.0;
  for (double p : density) {
    require(p >= 0.0 && std::isfinite(p), ErrorCode::density, "density entries must be finite and non-negative");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::density, "density must sum to one");
  std::discrete_distribution<std::size_t> draw(density.begin(), density.end());
  std::mt19937_64 rng(seed);
  std::vector<NodeId> anchors(m);
  for (auto& a : anchors) a = static_cast<NodeId>(draw(rng));
  return detail::sampled_from_anchors(g, density, std::move(anchors));
}

// Sampled variant with caller-chosen anchors (raises on zero density).
inline MrfFeatureMap assemble_mrf_with_anchors(const DenseMatrix& g, std::span<const double> density,
                                               std::vector<NodeId> anchors) {
  detail::require_non_negative(g);
  require(!anchors.empty(), ErrorCode::invalid_argument, "need at least one anchor");
  return detail::sampled_from_anchors(g, density, std::move(anchors));
}

inline std::vector<double> uniform_density(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

// (2 pi sigma^2)^{d/4} n^{d/2}
inline double rescale_constant(std::size_t d, double sigma, std::size_t n) {
  require(sigma > 0.0, ErrorCode::invalid_argument, "sigma must be positive");
  const double dd = static_cast<double>(d);
  return std::pow(2.0 * std::numbers::pi * sigma * sigma, dd / 4.0) * std::pow(static_cast<double>(n), dd / 2.0);
}

inline std::vector<SignatureVector> rescale_signatures(std::span<const SignatureVector> phi, std::size_t d,
                                                       double sigma, std::size_t n) {
  const double c = rescale_constant(d, sigma, n);
  std::vector<SignatureVector> out(phi.begin(), phi.end());
  for (auto& s : out)
    for (auto& e : s.entries) e.second *= c;
  return out;
}

struct Alignment {
  double alpha = 1.0;
  DenseMatrix aligned;
};

inline Alignment frobenius_align(const DenseMatrix& k_est, const DenseMatrix& k_gt) {
  require(k_est.rows() == k_gt.rows() && k_est.cols() == k_gt.cols(), ErrorCode::dimension_mismatch,
          "kernels differ in shape");
  const double est = k_est.norm();
  require(est > 0.0 && std::isfinite(est), ErrorCode::alignment_undefined, "estimate has zero Frobenius norm");
  Alignment out;
  out.alpha = k_gt.norm() / est;
  out.aligned = out.alpha * k_est;
  return out;
}

// ||x - y||^2 / ||y||^2 over flattened entries.
template <typename A, typename B>
double relative_squared_error(const A& estimate, const B& truth) {
  require(estimate.size() == truth.size(), ErrorCode::dimension_mismatch, "estimate and truth differ in size");
  const double denom = truth.squaredNorm();
  require(denom > 0.0, ErrorCode::zero_truth, "truth has zero norm");
  return (estimate - truth).squaredNorm() / denom;
}

// Mean of the squared-norm ratio over repetitions.
template <typename M>
double relative_mse(std::span<const M> estimates, const M& truth) {
  require(!estimates.empty(), ErrorCode::invalid_argument, "need at least one repetition");
  double sum = 0.0;
  for (const auto& e : estimates) sum += relative_squared_error(e, truth);
  return sum / static_cast<double>(estimates.size());
}

inline double clamped_relative_error(double pred, double target, double eps) {
  require(eps > 0.0, ErrorCode::invalid_argument, "eps must be positive");
  return std::abs(pred - target) / std::max(target, eps);
}

struct KernelMetrics {
  double r2 = 0.0;
  double mean_re = 0.0;
  double median_re = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  bool diagonal_included = true;
};

// Entrywise metrics over all entries, diagonal included.
inline KernelMetrics kernel_metrics(const DenseMatrix& k_est, const DenseMatrix& k_gt, double eps) {
  require(k_est.rows() == k_gt.rows() && k_est.cols() == k_gt.cols(), ErrorCode::dimension_mismatch,
          "kernels differ in shape");
  require(k_gt.size() > 0, ErrorCode::invalid_argument, "empty kernels");
  const double count = static_cast<double>(k_gt.size());
  const double mean = k_gt.sum() / count;
  const double ss_tot = (k_gt.array() - mean).square().sum();
  require(ss_tot > 0.0, ErrorCode::r2_undefined, "ground truth has zero variance");
  const double ss_res = (k_est - k_gt).squaredNorm();
  std::vector<double> re(static_cast<std::size_t>(k_gt.size()));
  for (Eigen::Index i = 0; i < k_gt.size(); ++i)
    re[static_cast<std::size_t>(i)] = clamped_relative_error(k_est.data()[i], k_gt.data()[i], eps);
  KernelMetrics out;
  out.r2 = 1.0 - ss_res / ss_tot;
  double total = 0.0;
  for (double r : re) total += r;
  out.mean_re = total / count;
  out.median_re = detail::median_of(re);
  out.mse = ss_res / count;
  out.rmse = std::sqrt(out.mse);
  return out;
}

}  // namespace mrf
