#pragma once

// End-to-end MRF pipeline pieces shared by the experiments: walks on W_f,
// geodesic supervision, surrogate training and feature matrices.

#include "mrf/common.hpp"
#include "mrf/config.hpp"
#include "mrf/graph.hpp"
#include "mrf/grf.hpp"
#include "mrf/interp.hpp"
#include "mrf/surrogate.hpp"

#include <chrono>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace mrf {

// k distinct ids from [0, n), sorted.
inline std::vector<NodeId> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed) {
  require(k <= n, ErrorCode::invalid_argument, "cannot sample more nodes than exist");
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct SurrogateSetup {
  double tau = 20.0;
  WalkConfig walk{0.01, 10000, 0, 1e-15};
  DatasetConfig data;
  TrainConfig train;
  std::size_t threads = 1;
};

struct SurrogateFit {
  std::vector<NodeId> starts;
  std::vector<SignatureVector> signatures;
  std::vector<std::vector<double>> geodesics;
  Dataset dataset;
  TrainResult training;
  double walk_seconds = 0.0;
  double geodesic_seconds = 0.0;
  double train_seconds = 0.0;

  double total_seconds() const { return walk_seconds + geodesic_seconds + train_seconds; }
};

// Signatures of exp(tau/2 W_f) from `starts`, geodesic targets on `graph`, then training.
inline SurrogateFit fit_surrogate(const PointCloud& points, const WeightedGraph& graph, std::span<const NodeId> starts,
                                  const SurrogateSetup& setup) {
  SurrogateFit fit;
  fit.starts.assign(starts.begin(), starts.end());
  auto t0 = std::chrono::steady_clock::now();
  const WeightedGraph wf = normalized_affinity_graph(graph);
  fit.signatures = run_grf(wf, heat_modulation(setup.tau), setup.walk, starts, setup.threads);
  fit.walk_seconds = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  fit.geodesics = geodesic_rows(graph, points, starts, setup.threads);
  fit.geodesic_seconds = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  fit.dataset = build_dataset(fit.signatures, points, fit.geodesics, setup.data);
  fit.training = train(fit.dataset, setup.train);
  fit.train_seconds = seconds_since(t0);
  return fit;
}

// distances(i, l) between eval_nodes[i] and anchors[l] along `graph`.
inline DenseMatrix geodesic_matrix(const WeightedGraph& graph, const PointCloud& points,
                                   std::span<const NodeId> eval_nodes, std::span<const NodeId> anchors,
                                   std::size_t threads = 1) {
  DenseMatrix out(static_cast<Eigen::Index>(eval_nodes.size()), static_cast<Eigen::Index>(anchors.size()));
  if (anchors.size() <= eval_nodes.size()) {
    const auto rows = geodesic_rows(graph, points, anchors, threads);
    for (std::size_t l = 0; l < anchors.size(); ++l)
      for (std::size_t i = 0; i < eval_nodes.size(); ++i)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = rows[l][eval_nodes[i]];
  } else {
    const auto rows = geodesic_rows(graph, points, eval_nodes, threads);
    for (std::size_t i = 0; i < eval_nodes.size(); ++i)
      for (std::size_t l = 0; l < anchors.size(); ++l)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = rows[i][anchors[l]];
  }
  return out;
}

inline PointCloud select_points(const PointCloud& points, std::span<const NodeId> ids) {
  DenseMatrix out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(points.dim()));
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points.point(ids[i]);
  return PointCloud(std::move(out));
}

// Phi(i, l) = max(g(x_i, w_l, d(i, l)), 0) / sqrt(#anchors).
inline DenseMatrix surrogate_features(const SurrogateParams& params, const PointCloud& points,
                                      const WeightedGraph& graph, std::span<const NodeId> eval_nodes,
                                      std::span<const NodeId> anchors, std::size_t threads = 1) {
  const DenseMatrix geo = geodesic_matrix(graph, points, eval_nodes, anchors, threads);
  return predict_feature_matrix(params, select_points(points, eval_nodes), select_points(points, anchors), geo,
                                threads);
}

// Off-graph points attached to their nearest node: d(x, w) ~ |x - p_j| + d(j, w).
struct AttachedPoints {
  PointCloud points;
  std::vector<NodeId> nearest;
  std::vector<double> offset;
};

inline AttachedPoints attach_points(const PointCloud& cloud, const DenseMatrix& queries, std::size_t threads = 1) {
  require(static_cast<std::size_t>(queries.cols()) == cloud.dim(), ErrorCode::dimension_mismatch,
          "query points differ in dimension");
  AttachedPoints out{PointCloud(queries), std::vector<NodeId>(static_cast<std::size_t>(queries.rows())),
                     std::vector<double>(static_cast<std::size_t>(queries.rows()))};
  parallel_for(static_cast<std::size_t>(queries.rows()), threads, [&](std::size_t q, std::size_t) {
    double best = std::numeric_limits<double>::infinity();
    NodeId arg = 0;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      const double d2 = (cloud.point(j) - queries.row(static_cast<Eigen::Index>(q))).squaredNorm();
      if (d2 < best) best = d2, arg = static_cast<NodeId>(j);
    }
    out.nearest[q] = arg;
    out.offset[q] = std::sqrt(best);
  });
  return out;
}

// Features of off-graph points against anchor nodes of the discretization.
inline DenseMatrix attached_features(const SurrogateParams& params, const PointCloud& cloud, const WeightedGraph& graph,
                                     const AttachedPoints& attached, std::span<const NodeId> anchors,
                                     std::size_t threads = 1) {
  DenseMatrix geo = geodesic_matrix(graph, cloud, attached.nearest, anchors, threads);
  for (std::size_t q = 0; q < attached.nearest.size(); ++q)
    geo.row(static_cast<Eigen::Index>(q)).array() += attached.offset[q];
  return predict_feature_matrix(params, attached.points, select_points(cloud, anchors), geo, threads);
}

// Weighted mean squared edge length sum w d^2 / sum w over stored edges.
inline double weighted_mean_squared_edge(const WeightedGraph& graph, const PointCloud& points) {
  double num = 0.0, den = 0.0;
  for (const auto& e : graph.undirected_edges()) {
    num += e.weight * points.squared_distance(e.i, e.j);
    den += e.weight;
  }
  require(den > 0.0, ErrorCode::invalid_argument, "graph has no edges");
  return num / den;
}

// (4 / msd) (I - W_f): a graph Laplacian scaled to approximate -Delta on a sampled 2-manifold.
inline DenseMatrix surface_graph_laplacian(const WeightedGraph& graph, const PointCloud& points) {
  const double msd = weighted_mean_squared_edge(graph, points);
  const DenseMatrix wf = symmetric_normalized_affinity(graph.to_dense());
  const auto n = wf.rows();
  return (4.0 / msd) * (DenseMatrix::Identity(n, n) - wf);
}

}  // namespace mrf
