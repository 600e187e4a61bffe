#pragma once

// Kernel-based field interpolation: masked normals and normalized velocity.

#include "mrf/common.hpp"
#include "mrf/graph.hpp"
#include "mrf/oracles.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace mrf {

struct MaskedField {
  DenseMatrix values;                // masked rows zeroed
  std::vector<std::uint8_t> mask;    // 1 = observed, 0 = masked
  std::vector<NodeId> masked;        // sorted

  Vector observed_indicator() const {
    Vector m(static_cast<Eigen::Index>(mask.size()));
    for (std::size_t i = 0; i < mask.size(); ++i) m(static_cast<Eigen::Index>(i)) = mask[i];
    return m;
  }
};

// Hides floor(fraction * rows) rows chosen uniformly without replacement.
inline MaskedField mask_field(const DenseMatrix& field, double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction < 1.0, ErrorCode::invalid_argument, "mask fraction must lie in [0, 1)");
  const auto n = static_cast<std::size_t>(field.rows());
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  require(n > count, ErrorCode::mask, "mask leaves no observed rows");
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  MaskedField out{field, std::vector<std::uint8_t>(n, 1), {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count)}};
  std::sort(out.masked.begin(), out.masked.end());
  for (auto i : out.masked) {
    out.mask[i] = 0;
    out.values.row(i).setZero();
  }
  return out;
}

// Either a dense K or a factor Phi with K = Phi Phi^T.
class KernelOperator {
 public:
  static KernelOperator dense(DenseMatrix k) {
    require(k.rows() == k.cols(), ErrorCode::dimension_mismatch, "dense kernel must be square");
    KernelOperator op;
    op.matrix_ = std::move(k);
    return op;
  }
  static KernelOperator factored(DenseMatrix phi) {
    KernelOperator op;
    op.factored_ = true;
    op.matrix_ = std::move(phi);
    return op;
  }

  bool is_factored() const { return factored_; }
  std::size_t size() const { return static_cast<std::size_t>(matrix_.rows()); }
  const DenseMatrix& matrix() const { return matrix_; }

  DenseMatrix apply(const DenseMatrix& x) const {
    require(x.rows() == matrix_.rows(), ErrorCode::dimension_mismatch, "field rows do not match the kernel");
    if (!factored_) return matrix_ * x;
    const DenseMatrix inner = matrix_.transpose() * x;
    return matrix_ * inner;
  }

 private:
  DenseMatrix matrix_;
  bool factored_ = false;
};

struct InterpolationReport {
  DenseMatrix predictions;
  double score = 0.0;
  std::vector<NodeId> zero_rows;
  double preprocess_seconds = 0.0;
  double interpolate_seconds = 0.0;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Mean of <truth_i, pred_i> over `rows` (all rows when empty); zero rows count as 0.
inline double mean_cosine(const DenseMatrix& pred, const DenseMatrix& truth, const std::vector<NodeId>& rows) {
  require(pred.rows() == truth.rows() && pred.cols() == truth.cols(), ErrorCode::dimension_mismatch,
          "prediction and truth differ in shape");
  double sum = 0.0;
  std::size_t count = 0;
  auto add = [&](Eigen::Index i) {
    sum += pred.row(i).dot(truth.row(i));
    ++count;
  };
  if (rows.empty())
    for (Eigen::Index i = 0; i < pred.rows(); ++i) add(i);
  else
    for (auto i : rows) add(static_cast<Eigen::Index>(i));
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

// ||pred - truth|| / ||truth|| over the listed rows (0 when none).
inline double masked_relative_error(const DenseMatrix& pred, const DenseMatrix& truth,
                                    const std::vector<NodeId>& rows) {
  double num = 0.0, den = 0.0;
  for (auto i : rows) {
    num += (pred.row(i) - truth.row(i)).squaredNorm();
    den += truth.row(i).squaredNorm();
  }
  if (rows.empty()) return 0.0;
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// K applied to the masked normals, then unit rows; score against `truth` on the masked set.
inline InterpolationReport interpolate_normals(const KernelOperator& k, const MaskedField& masked,
                                               const DenseMatrix& truth) {
  require(k.size() == static_cast<std::size_t>(masked.values.rows()), ErrorCode::dimension_mismatch,
          "masked field does not match the kernel");
  InterpolationReport out;
  const auto t0 = std::chrono::steady_clock::now();
  out.predictions = k.apply(masked.values);
  for (Eigen::Index i = 0; i < out.predictions.rows(); ++i) {
    const double len = out.predictions.row(i).norm();
    if (len > 0.0 && std::isfinite(len)) {
      out.predictions.row(i) /= len;
    } else {
      out.predictions.row(i).setZero();
      out.zero_rows.push_back(static_cast<NodeId>(i));
    }
  }
  out.interpolate_seconds = seconds_since(t0);
  if (truth.size() > 0) out.score = mean_cosine(out.predictions, truth, masked.masked);
  return out;
}

// K (m . U) / K m row-wise, from a single application to the stacked [m, m . U].
inline InterpolationReport interpolate_velocity_normalized(const KernelOperator& k, const DenseMatrix& field,
                                                           std::span<const std::uint8_t> mask) {
  const auto n = field.rows();
  require(k.size() == static_cast<std::size_t>(n) && mask.size() == static_cast<std::size_t>(n),
          ErrorCode::dimension_mismatch, "field and mask must match the kernel");
  InterpolationReport out;
  const auto t0 = std::chrono::steady_clock::now();
  DenseMatrix rhs(n, field.cols() + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = mask[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    rhs(i, 0) = m;
    rhs.row(i).tail(field.cols()) = m * field.row(i);
  }
  const DenseMatrix both = k.apply(rhs);
  out.predictions.resize(n, field.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    require(both(i, 0) > 0.0, ErrorCode::unreachable_node,
            "zero kernel mass from observed nodes at row " + std::to_string(i));
    out.predictions.row(i) = both.row(i).tail(field.cols()) / both(i, 0);
  }
  out.interpolate_seconds = seconds_since(t0);
  std::vector<NodeId> masked;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) masked.push_back(static_cast<NodeId>(i));
  out.score = masked_relative_error(out.predictions, field, masked);
  return out;
}

// exp(tau W_f) for the dense affinity W.
inline DenseMatrix full_heat_kernel(const DenseMatrix& w, double tau) {
  return spectral_heat_kernel(symmetric_normalized_affinity(w), {tau, HeatKernelParams::Sign::affinity});
}

// V diag(exp(tau lambda / 2)): an exact factor of exp(tau W_f).
inline DenseMatrix exact_heat_factor(const SpectralDecomposition& eig, double tau) {
  Vector scale = (0.5 * tau * eig.eigenvalues.array()).exp();
  return eig.eigenvectors * scale.asDiagonal();
}

}  // namespace mrf
