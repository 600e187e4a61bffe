#pragma once

// Training triples from signatures and a small ReLU MLP g(x, w, d_geo) fitted with Adam.

#include "mrf/common.hpp"
#include "mrf/features.hpp"
#include "mrf/graph.hpp"
#include "mrf/grf.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace mrf {

struct TrainingTriple {
  std::vector<double> x;
  std::vector<double> omega;
  double geodesic = 0.0;
  double target = 0.0;
};

// Rows are [x, omega, geodesic]; one target per row.
struct Dataset {
  std::size_t point_dim = 0;
  DenseMatrix inputs;
  Vector targets;
  std::vector<std::pair<NodeId, NodeId>> pairs;  // (start, omega) node ids when built from signatures

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
  std::size_t input_dim() const { return 2 * point_dim + 1; }

  TrainingTriple triple(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    const auto d = static_cast<Eigen::Index>(point_dim);
    TrainingTriple t;
    for (Eigen::Index c = 0; c < d; ++c) {
      t.x.push_back(inputs(r, c));
      t.omega.push_back(inputs(r, d + c));
    }
    t.geodesic = inputs(r, 2 * d);
    t.target = targets(r);
    return t;
  }

  static Dataset from_triples(std::span<const TrainingTriple> triples) {
    require(!triples.empty(), ErrorCode::dataset_empty, "no training triples");
    Dataset ds;
    ds.point_dim = triples.front().x.size();
    ds.inputs.resize(static_cast<Eigen::Index>(triples.size()), static_cast<Eigen::Index>(ds.input_dim()));
    ds.targets.resize(static_cast<Eigen::Index>(triples.size()));
    for (std::size_t i = 0; i < triples.size(); ++i) {
      const auto& t = triples[i];
      require(t.x.size() == ds.point_dim && t.omega.size() == ds.point_dim, ErrorCode::dimension_mismatch,
              "triples differ in dimension");
      require(t.target >= 0.0 && t.geodesic >= 0.0, ErrorCode::invalid_argument,
              "targets and geodesics must be non-negative");
      const auto r = static_cast<Eigen::Index>(i);
      for (std::size_t c = 0; c < ds.point_dim; ++c) {
        ds.inputs(r, static_cast<Eigen::Index>(c)) = t.x[c];
        ds.inputs(r, static_cast<Eigen::Index>(ds.point_dim + c)) = t.omega[c];
      }
      ds.inputs(r, static_cast<Eigen::Index>(2 * ds.point_dim)) = t.geodesic;
      ds.targets(r) = t.target;
    }
    return ds;
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.point_dim = point_dim;
    out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
    out.targets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
      out.targets(static_cast<Eigen::Index>(i)) = targets(static_cast<Eigen::Index>(rows[i]));
      if (!pairs.empty()) out.pairs.push_back(pairs[rows[i]]);
    }
    return out;
  }
};

struct DatasetConfig {
  double keep_threshold = 0.1;
  double retain_prob = 0.025;
  std::uint64_t rng_seed = 0;
  std::size_t anchors_per_start = 0;  // 0: every node is a candidate anchor
};

// geodesics[s] holds distances from signatures[s].start_node to every node.
inline Dataset build_dataset(std::span<const SignatureVector> signatures, const PointCloud& points,
                             std::span<const std::vector<double>> geodesics, const DatasetConfig& config) {
  require(config.retain_prob >= 0.0 && config.retain_prob <= 1.0, ErrorCode::invalid_argument,
          "retain_prob must lie in [0, 1]");
  require(geodesics.size() == signatures.size(), ErrorCode::dimension_mismatch, "one geodesic row per start");
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  std::mt19937_64 rng(config.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> candidates(n);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::vector<double> targets;
  for (std::size_t s = 0; s < signatures.size(); ++s) {
    const auto& sig = signatures[s];
    require(sig.num_nodes == n, ErrorCode::dimension_mismatch, "signature universe differs from point count");
    require(geodesics[s].size() == n, ErrorCode::dimension_mismatch, "geodesic row has wrong length");
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    std::size_t count = n;
    if (config.anchors_per_start != 0 && config.anchors_per_start < n) {
      // partial Fisher-Yates: uniform sample without replacement, then restore node order
      for (std::size_t i = 0; i < config.anchors_per_start; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(candidates[i], candidates[pick(rng)]);
      }
      count = config.anchors_per_start;
      std::sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count));
    }
    const Vector dense = sig.to_dense();
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t w = candidates[c];
      const double target = dense(static_cast<Eigen::Index>(w));
      const bool keep = target >= config.keep_threshold || unit(rng) < config.retain_prob;
      if (!keep) continue;
      const double geo = geodesics[s][w];
      require(std::isfinite(geo), ErrorCode::invalid_argument,
              "missing geodesic for pair (" + std::to_string(sig.start_node) + ", " + std::to_string(w) + ")");
      pairs.emplace_back(sig.start_node, static_cast<NodeId>(w));
      targets.push_back(target);
    }
  }
  require(!targets.empty(), ErrorCode::dataset_empty, "no training triples survived filtering");
  Dataset ds;
  ds.point_dim = d;
  ds.pairs = std::move(pairs);
  ds.inputs.resize(static_cast<Eigen::Index>(targets.size()), static_cast<Eigen::Index>(2 * d + 1));
  ds.targets = Eigen::Map<const Vector>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  std::size_t geo_row = 0;
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const auto [x, w] = ds.pairs[i];
    while (signatures[geo_row].start_node != x) ++geo_row;  // pairs are grouped by start in input order
    const auto r = static_cast<Eigen::Index>(i);
    ds.inputs.row(r).head(static_cast<Eigen::Index>(d)) = points.point(x);
    ds.inputs.row(r).segment(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) = points.point(w);
    ds.inputs(r, static_cast<Eigen::Index>(2 * d)) = geodesics[geo_row][w];
  }
  return ds;
}

// ---------------------------------------------------------------------------
// MLP

inline constexpr std::size_t kHiddenWidth = 128;

struct SurrogateParams {
  // layer l maps rows of activations: z = a W^T + b
  DenseMatrix w1, w2, w3;
  Vector b1, b2, b3;
  Vector input_mean, input_scale;  // standardization, fitted on the training split
  double output_scale = 1.0;

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }

  static SurrogateParams zeros(std::size_t input_dim, std::size_t hidden = kHiddenWidth) {
    SurrogateParams p;
    const auto in = static_cast<Eigen::Index>(input_dim), h = static_cast<Eigen::Index>(hidden);
    p.w1 = DenseMatrix::Zero(h, in);
    p.w2 = DenseMatrix::Zero(h, h);
    p.w3 = DenseMatrix::Zero(1, h);
    p.b1 = Vector::Zero(h);
    p.b2 = Vector::Zero(h);
    p.b3 = Vector::Zero(1);
    p.input_mean = Vector::Zero(in);
    p.input_scale = Vector::Ones(in);
    return p;
  }

  // Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  static SurrogateParams glorot(std::size_t input_dim, std::uint64_t seed, std::size_t hidden = kHiddenWidth) {
    SurrogateParams p = zeros(input_dim, hidden);
    std::mt19937_64 rng(seed);
    auto fill = [&](DenseMatrix& w) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    };
    fill(p.w1);
    fill(p.w2);
    fill(p.w3);
    return p;
  }

  bool all_finite() const {
    return w1.allFinite() && w2.allFinite() && w3.allFinite() && b1.allFinite() && b2.allFinite() &&
           b3.allFinite() && input_mean.allFinite() && input_scale.allFinite() && std::isfinite(output_scale);
  }

  bool operator==(const SurrogateParams& o) const {
    return w1 == o.w1 && w2 == o.w2 && w3 == o.w3 && b1 == o.b1 && b2 == o.b2 && b3 == o.b3 &&
           input_mean == o.input_mean && input_scale == o.input_scale && output_scale == o.output_scale;
  }
};

enum class ForwardMode { train, inference };

struct ForwardCache {
  DenseMatrix x, z1, h1, z2, h2;
  Vector raw;
};

inline ForwardCache mlp_forward_batch(const SurrogateParams& p, const DenseMatrix& inputs) {
  require(static_cast<std::size_t>(inputs.cols()) == p.input_dim(), ErrorCode::dimension_mismatch,
          "input dimension does not match the network");
  ForwardCache c;
  c.x = (inputs.rowwise() - p.input_mean.transpose()).array().rowwise() / p.input_scale.transpose().array();
  c.z1 = c.x * p.w1.transpose();
  c.z1.rowwise() += p.b1.transpose();
  c.h1 = c.z1.cwiseMax(0.0);
  c.z2 = c.h1 * p.w2.transpose();
  c.z2.rowwise() += p.b2.transpose();
  c.h2 = c.z2.cwiseMax(0.0);
  c.raw = p.output_scale * ((c.h2 * p.w3.transpose()).col(0).array() + p.b3(0)).matrix();
  require(c.raw.allFinite(), ErrorCode::numeric, "non-finite network output");
  return c;
}

inline Vector mlp_predict(const SurrogateParams& p, const DenseMatrix& inputs, ForwardMode mode) {
  Vector raw = mlp_forward_batch(p, inputs).raw;
  if (mode == ForwardMode::inference) raw = raw.cwiseMax(0.0);
  return raw;
}

inline double mlp_forward(const SurrogateParams& p, std::span<const double> x, std::span<const double> omega,
                          double geodesic, ForwardMode mode) {
  require(x.size() == omega.size() && 2 * x.size() + 1 == p.input_dim(), ErrorCode::dimension_mismatch,
          "input dimension does not match the network");
  DenseMatrix in(1, static_cast<Eigen::Index>(p.input_dim()));
  for (std::size_t c = 0; c < x.size(); ++c) {
    in(0, static_cast<Eigen::Index>(c)) = x[c];
    in(0, static_cast<Eigen::Index>(x.size() + c)) = omega[c];
  }
  in(0, static_cast<Eigen::Index>(2 * x.size())) = geodesic;
  return mlp_predict(p, in, mode)(0);
}

inline double clamped_relative_loss(double pred, double target, double eps) {
  return clamped_relative_error(pred, target, eps);
}

struct Gradients {
  DenseMatrix w1, w2, w3;
  Vector b1, b2, b3;
};

// Mean clamped relative loss over the batch and its exact gradient (unclamped outputs).
inline double loss_and_gradient(const SurrogateParams& p, const DenseMatrix& inputs, const Vector& targets, double eps,
                                Gradients* grad) {
  const ForwardCache c = mlp_forward_batch(p, inputs);
  const auto b = c.raw.size();
  const double inv_b = 1.0 / static_cast<double>(b);
  Vector d_raw(b);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double denom = std::max(targets(i), eps);
    const double diff = c.raw(i) - targets(i);
    loss += std::abs(diff) / denom;
    d_raw(i) = (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0) / denom * inv_b;
  }
  loss *= inv_b;
  if (!grad) return loss;
  const Vector d_z3 = p.output_scale * d_raw;
  grad->w3 = d_z3.transpose() * c.h2;
  grad->b3 = Vector::Constant(1, d_z3.sum());
  DenseMatrix d_z2 = (d_z3 * p.w3).cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
  grad->w2 = d_z2.transpose() * c.h1;
  grad->b2 = d_z2.colwise().sum().transpose();
  DenseMatrix d_z1 = (d_z2 * p.w2).cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
  grad->w1 = d_z1.transpose() * c.x;
  grad->b1 = d_z1.colwise().sum().transpose();
  return loss;
}

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32768;
  std::size_t epochs = 1000;
  double eps = 0.1;
  double val_split = 0.2;
  std::uint64_t rng_seed = 0;

  void validate() const {
    require(learning_rate > 0.0, ErrorCode::invalid_argument, "learning_rate must be positive");
    require(batch_size >= 1, ErrorCode::invalid_argument, "batch_size must be positive");
    require(eps > 0.0, ErrorCode::invalid_argument, "eps must be positive");
    require(val_split >= 0.0 && val_split < 1.0, ErrorCode::invalid_argument, "val_split must lie in [0, 1)");
  }
};

struct EpochLoss {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  SurrogateParams params;
  std::vector<EpochLoss> history;
  std::vector<std::size_t> train_rows, val_rows;
};

namespace detail {

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  Gradients m, v;

  explicit AdamState(const SurrogateParams& p) {
    m.w1 = DenseMatrix::Zero(p.w1.rows(), p.w1.cols());
    m.w2 = DenseMatrix::Zero(p.w2.rows(), p.w2.cols());
    m.w3 = DenseMatrix::Zero(p.w3.rows(), p.w3.cols());
    m.b1 = Vector::Zero(p.b1.size());
    m.b2 = Vector::Zero(p.b2.size());
    m.b3 = Vector::Zero(p.b3.size());
    v = m;
  }

  template <typename P, typename G, typename S>
  void update(P& param, const G& grad, S& m_t, S& v_t, double lr, double c1, double c2) const {
    m_t = beta1 * m_t + (1.0 - beta1) * grad;
    v_t = beta2 * v_t + (1.0 - beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m_t.array() / c1) / ((v_t.array() / c2).sqrt() + eps);
  }

  void apply(SurrogateParams& p, const Gradients& g, double lr) {
    ++step;
    const double s = static_cast<double>(step);
    const double c1 = 1.0 - std::pow(beta1, s), c2 = 1.0 - std::pow(beta2, s);
    update(p.w1, g.w1, m.w1, v.w1, lr, c1, c2);
    update(p.w2, g.w2, m.w2, v.w2, lr, c1, c2);
    update(p.w3, g.w3, m.w3, v.w3, lr, c1, c2);
    update(p.b1, g.b1, m.b1, v.b1, lr, c1, c2);
    update(p.b2, g.b2, m.b2, v.b2, lr, c1, c2);
    update(p.b3, g.b3, m.b3, v.b3, lr, c1, c2);
  }
};

inline double mean_inference_loss(const SurrogateParams& p, const Dataset& ds, double eps) {
  const Vector pred = mlp_predict(p, ds.inputs, ForwardMode::inference);
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) total += clamped_relative_error(pred(i), ds.targets(i), eps);
  return total / static_cast<double>(pred.size());
}

}  // namespace detail

// Standardization from the training rows, output scale = mean training target.
inline SurrogateParams initial_params(const Dataset& train, std::uint64_t seed) {
  SurrogateParams p = SurrogateParams::glorot(train.input_dim(), seed);
  const double rows = static_cast<double>(train.size());
  p.input_mean = train.inputs.colwise().mean().transpose();
  for (Eigen::Index c = 0; c < train.inputs.cols(); ++c) {
    const double var = (train.inputs.col(c).array() - p.input_mean(c)).square().sum() / rows;
    p.input_scale(c) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  const double mean_target = train.targets.mean();
  p.output_scale = mean_target > 0.0 ? mean_target : 1.0;
  return p;
}

inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::size_t n, double val_split,
                                                                                std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(val_split * static_cast<double>(n)));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return {std::move(train), std::move(val)};
}

inline TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  require(dataset.size() > 0, ErrorCode::dataset_empty, "empty dataset");
  std::mt19937_64 rng(config.rng_seed);
  TrainResult out;
  std::tie(out.train_rows, out.val_rows) = split_rows(dataset.size(), config.val_split, rng);
  require(!out.train_rows.empty(), ErrorCode::invalid_argument, "validation split leaves no training rows");
  const Dataset train_set = dataset.subset(out.train_rows);
  const Dataset val_set = dataset.subset(out.val_rows);
  out.params = initial_params(train_set, rng());
  detail::AdamState adam(out.params);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients grad;
  DenseMatrix batch_x;
  Vector batch_y;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto rows = static_cast<Eigen::Index>(end - start);
      batch_x.resize(rows, train_set.inputs.cols());
      batch_y.resize(rows);
      for (std::size_t i = start; i < end; ++i) {
        batch_x.row(static_cast<Eigen::Index>(i - start)) = train_set.inputs.row(static_cast<Eigen::Index>(order[i]));
        batch_y(static_cast<Eigen::Index>(i - start)) = train_set.targets(static_cast<Eigen::Index>(order[i]));
      }
      double loss;
      try {
        loss = loss_and_gradient(out.params, batch_x, batch_y, config.eps, &grad);
      } catch (const Error& e) {
        throw Error(ErrorCode::training_divergence, "epoch " + std::to_string(epoch) + ": " + e.what());
      }
      require(std::isfinite(loss), ErrorCode::training_divergence,
              "non-finite loss at epoch " + std::to_string(epoch));
      weighted += loss * static_cast<double>(rows);
      adam.apply(out.params, grad, config.learning_rate);
    }
    require(out.params.all_finite(), ErrorCode::training_divergence,
            "non-finite parameters at epoch " + std::to_string(epoch));
    EpochLoss rec;
    rec.epoch = epoch;
    rec.train_loss = weighted / static_cast<double>(order.size());
    if (val_set.size() > 0) rec.val_loss = detail::mean_inference_loss(out.params, val_set, config.eps);
    out.history.push_back(rec);
  }
  return out;
}

inline void write_loss_history_csv(std::ostream& out, std::span<const EpochLoss> history) {
  out << "epoch,train_loss,val_loss\n" << std::setprecision(17);
  for (const auto& h : history) out << h.epoch << ',' << h.train_loss << ',' << h.val_loss << '\n';
}

struct GradientCheck {
  double w1 = 0, b1 = 0, w2 = 0, b2 = 0, w3 = 0, b3 = 0;
  double worst() const { return std::max({w1, b1, w2, b2, w3, b3}); }
};

// Relative norm gap between backprop and central differences, per parameter tensor.
inline GradientCheck gradient_check(const SurrogateParams& p, const Dataset& ds, double eps, double step = 1e-5) {
  Gradients g;
  loss_and_gradient(p, ds.inputs, ds.targets, eps, &g);
  auto fd = [&](auto member) {
    SurrogateParams q = p;
    auto& tensor = q.*member;
    using T = std::decay_t<decltype(tensor)>;
    T numeric(tensor.rows(), tensor.cols());
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      const double keep = tensor.data()[i];
      tensor.data()[i] = keep + step;
      const double up = loss_and_gradient(q, ds.inputs, ds.targets, eps, nullptr);
      tensor.data()[i] = keep - step;
      const double down = loss_and_gradient(q, ds.inputs, ds.targets, eps, nullptr);
      tensor.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    return numeric;
  };
  auto rel = [](const auto& a, const auto& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-300});
    return (a - b).norm() / scale;
  };
  GradientCheck out;
  out.w1 = rel(g.w1, fd(&SurrogateParams::w1));
  out.b1 = rel(g.b1, fd(&SurrogateParams::b1));
  out.w2 = rel(g.w2, fd(&SurrogateParams::w2));
  out.b2 = rel(g.b2, fd(&SurrogateParams::b2));
  out.w3 = rel(g.w3, fd(&SurrogateParams::w3));
  out.b3 = rel(g.b3, fd(&SurrogateParams::b3));
  return out;
}

// Phi(i, l) = max(g(x_i, w_l, d(i, l)), 0) / sqrt(n_rf).
inline DenseMatrix predict_feature_matrix(const SurrogateParams& p, const PointCloud& eval_points,
                                          const PointCloud& anchors, const DenseMatrix& geodesics,
                                          std::size_t threads = 1) {
  const auto n = static_cast<Eigen::Index>(eval_points.size());
  const auto m = static_cast<Eigen::Index>(anchors.size());
  const auto d = static_cast<Eigen::Index>(eval_points.dim());
  require(anchors.dim() == eval_points.dim() && static_cast<std::size_t>(2 * d + 1) == p.input_dim(),
          ErrorCode::dimension_mismatch, "points do not match the network input");
  require(geodesics.rows() == n && geodesics.cols() == m, ErrorCode::dimension_mismatch,
          "geodesic matrix must be eval x anchors");
  require(geodesics.allFinite(), ErrorCode::invalid_argument, "missing geodesic for some (point, anchor) pair");
  require(m > 0, ErrorCode::invalid_argument, "need at least one anchor");
  DenseMatrix phi(n, m);
  const double norm = 1.0 / std::sqrt(static_cast<double>(m));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t ii, std::size_t) {
    const auto i = static_cast<Eigen::Index>(ii);
    DenseMatrix in(m, 2 * d + 1);
    for (Eigen::Index l = 0; l < m; ++l) {
      in.row(l).head(d) = eval_points.point(static_cast<std::size_t>(i));
      in.row(l).segment(d, d) = anchors.point(static_cast<std::size_t>(l));
      in(l, 2 * d) = geodesics(i, l);
    }
    phi.row(i) = norm * mlp_predict(p, in, ForwardMode::inference).transpose();
  });
  return phi;
}

// ---------------------------------------------------------------------------
// Params IO: text tensor dump with a header line of layer sizes.

inline void write_params(std::ostream& out, const SurrogateParams& p) {
  out << "mrf-mlp " << p.w1.cols() << ' ' << p.w1.rows() << ' ' << p.w2.rows() << ' ' << p.w3.rows() << '\n';
  out << std::setprecision(17);
  auto dump = [&](const char* name, const auto& t) {
    out << name << ' ' << t.rows() << ' ' << t.cols();
    for (Eigen::Index i = 0; i < t.size(); ++i) out << ' ' << t.data()[i];
    out << '\n';
  };
  dump("w1", p.w1);
  dump("b1", p.b1);
  dump("w2", p.w2);
  dump("b2", p.b2);
  dump("w3", p.w3);
  dump("b3", p.b3);
  dump("input_mean", p.input_mean);
  dump("input_scale", p.input_scale);
  out << "output_scale " << p.output_scale << '\n';
}

inline SurrogateParams read_params(std::istream& in) {
  std::string magic;
  std::size_t in_dim = 0, h1 = 0, h2 = 0, out_dim = 0;
  require(static_cast<bool>(in >> magic >> in_dim >> h1 >> h2 >> out_dim) && magic == "mrf-mlp", ErrorCode::parse,
          "not a parameter file");
  require(h1 == h2 && out_dim == 1, ErrorCode::parse, "unsupported layer sizes");
  SurrogateParams p = SurrogateParams::zeros(in_dim, h1);
  auto load = [&](const char* name, auto& t) {
    std::string tag;
    Eigen::Index rows = 0, cols = 0;
    require(static_cast<bool>(in >> tag >> rows >> cols) && tag == name, ErrorCode::parse,
            std::string("expected tensor ") + name);
    require(rows == t.rows() && cols == t.cols(), ErrorCode::parse, std::string("bad shape for ") + name);
    for (Eigen::Index i = 0; i < t.size(); ++i)
      require(static_cast<bool>(in >> t.data()[i]), ErrorCode::parse, std::string("truncated tensor ") + name);
  };
  load("w1", p.w1);
  load("b1", p.b1);
  load("w2", p.w2);
  load("b2", p.b2);
  load("w3", p.w3);
  load("b3", p.b3);
  load("input_mean", p.input_mean);
  load("input_scale", p.input_scale);
  std::string tag;
  require(static_cast<bool>(in >> tag >> p.output_scale) && tag == "output_scale", ErrorCode::parse,
          "missing output scale");
  require(p.all_finite(), ErrorCode::parse, "non-finite parameters");
  return p;
}

}  // namespace mrf
