#pragma once

// Graph construction on discretized manifolds: kNN graphs, wrap-around grids,
// Laplacians, normalized affinities and shortest-path geodesics.

#include "mrf/common.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace mrf {

// Finite set of points in R^D, one point per row.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(DenseMatrix coords) : coords_(std::move(coords)) {
    require(coords_.allFinite(), ErrorCode::invalid_argument, "point cloud has non-finite coordinates");
  }

  std::size_t size() const { return static_cast<std::size_t>(coords_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(coords_.cols()); }
  bool empty() const { return coords_.rows() == 0; }

  const DenseMatrix& coords() const { return coords_; }
  auto point(std::size_t i) const { return coords_.row(static_cast<Eigen::Index>(i)); }

  double squared_distance(std::size_t i, std::size_t j) const {
    return (point(i) - point(j)).squaredNorm();
  }
  double distance(std::size_t i, std::size_t j) const { return std::sqrt(squared_distance(i, j)); }

 private:
  DenseMatrix coords_;
};

struct Edge {
  NodeId to;
  double weight;
};

struct WeightedEdge {
  NodeId i;
  NodeId j;
  double weight;
};

// Undirected weighted graph in compressed adjacency form. Neighbor lists are
// sorted by node id; every stored edge has a mirror with the same weight.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  // Builds from undirected edges (each listed once, either orientation).
  // Zero-weight edges are dropped; duplicates and negative weights rejected.
  static WeightedGraph from_edges(std::size_t num_nodes, std::span<const WeightedEdge> edges,
                                  bool allow_self_loops = false) {
    require(num_nodes <= std::numeric_limits<NodeId>::max(), ErrorCode::size_overflow,
            "node count exceeds index type");
    std::vector<std::size_t> counts(num_nodes, 0);
    for (const auto& e : edges) {
      require(e.i < num_nodes && e.j < num_nodes, ErrorCode::invalid_argument, "edge endpoint out of range");
      require(std::isfinite(e.weight) && e.weight >= 0.0, ErrorCode::invalid_argument,
              "edge weights must be finite and non-negative");
      require(allow_self_loops || e.i != e.j, ErrorCode::invalid_argument, "self-loop not allowed");
      if (e.weight == 0.0) continue;
      ++counts[e.i];
      if (e.i != e.j) ++counts[e.j];
    }
    WeightedGraph g;
    g.offsets_.assign(num_nodes + 1, 0);
    for (std::size_t i = 0; i < num_nodes; ++i) g.offsets_[i + 1] = g.offsets_[i] + counts[i];
    g.edges_.resize(g.offsets_.back());
    std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (const auto& e : edges) {
      if (e.weight == 0.0) continue;
      g.edges_[cursor[e.i]++] = {e.j, e.weight};
      if (e.i != e.j) g.edges_[cursor[e.j]++] = {e.i, e.weight};
    }
    for (std::size_t i = 0; i < num_nodes; ++i) {
      auto begin = g.edges_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]);
      auto end = g.edges_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]);
      std::sort(begin, end, [](const Edge& a, const Edge& b) { return a.to < b.to; });
      require(std::adjacent_find(begin, end, [](const Edge& a, const Edge& b) { return a.to == b.to; }) == end,
              ErrorCode::invalid_argument, "duplicate edge");
    }
    return g;
  }

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  // Number of undirected edges (self-loops count once).
  std::size_t num_edges() const {
    std::size_t loops = 0;
    for (std::size_t i = 0; i < num_nodes(); ++i)
      for (const auto& e : neighbors(i)) loops += (e.to == i);
    return (edges_.size() - loops) / 2 + loops;
  }

  std::span<const Edge> neighbors(std::size_t i) const {
    return {edges_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  // Unweighted degree: number of stored neighbors.
  std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }

  double weighted_degree(std::size_t i) const {
    double s = 0.0;
    for (const auto& e : neighbors(i)) s += e.weight;
    return s;
  }

  // Weight of edge (i, j), zero when absent.
  double weight(std::size_t i, std::size_t j) const {
    const auto nb = neighbors(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), j, [](const Edge& e, std::size_t v) { return e.to < v; });
    return (it != nb.end() && it->to == j) ? it->weight : 0.0;
  }

  std::vector<WeightedEdge> undirected_edges() const {
    std::vector<WeightedEdge> out;
    out.reserve(edges_.size() / 2 + 1);
    for (std::size_t i = 0; i < num_nodes(); ++i)
      for (const auto& e : neighbors(i))
        if (i <= e.to) out.push_back({static_cast<NodeId>(i), e.to, e.weight});
    return out;
  }

  DenseMatrix to_dense() const {
    const auto n = static_cast<Eigen::Index>(num_nodes());
    DenseMatrix w = DenseMatrix::Zero(n, n);
    for (std::size_t i = 0; i < num_nodes(); ++i)
      for (const auto& e : neighbors(i)) w(static_cast<Eigen::Index>(i), e.to) = e.weight;
    return w;
  }

  // Connected-component label per node, labels numbered from zero.
  std::vector<std::size_t> component_labels() const {
    constexpr auto unset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> label(num_nodes(), unset);
    std::size_t next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < num_nodes(); ++s) {
      if (label[s] != unset) continue;
      label[s] = next;
      stack.assign(1, s);
      while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (const auto& e : neighbors(v))
          if (label[e.to] == unset) {
            label[e.to] = next;
            stack.push_back(e.to);
          }
      }
      ++next;
    }
    return label;
  }

  bool is_connected() const {
    const auto labels = component_labels();
    return std::all_of(labels.begin(), labels.end(), [](std::size_t l) { return l == 0; });
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Edge> edges_;
};

// ---------------------------------------------------------------------------
// kNN graphs

struct Bandwidth {
  enum class Mode { median_edge, fixed };
  Mode mode = Mode::median_edge;
  double sigma2 = 0.0;

  static Bandwidth median() { return {}; }
  static Bandwidth fixed(double sigma2) { return {Mode::fixed, sigma2}; }
};

struct KnnGraph {
  WeightedGraph graph;
  double sigma2 = 0.0;
  // Set when the symmetrized graph has more than one component.
  bool disconnected = false;
};

namespace detail {

inline double median_of(std::vector<double> values) {
  require(!values.empty(), ErrorCode::invalid_argument, "median of empty set");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace detail

// Gaussian-weighted graph over the given point pairs, w = exp(-|xi - xj|^2 / sigma2).
inline KnnGraph gaussian_graph_from_pairs(const PointCloud& points, std::vector<std::pair<NodeId, NodeId>> pairs,
                                          Bandwidth bandwidth) {
  std::vector<double> sq(pairs.size());
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    sq[e] = points.squared_distance(pairs[e].first, pairs[e].second);
    require(sq[e] > 0.0, ErrorCode::duplicate_point,
            "points " + std::to_string(pairs[e].first) + " and " + std::to_string(pairs[e].second) + " coincide");
  }
  double sigma2 = bandwidth.sigma2;
  if (bandwidth.mode == Bandwidth::Mode::median_edge) {
    sigma2 = detail::median_of(sq);
  } else {
    require(sigma2 > 0.0, ErrorCode::invalid_argument, "fixed bandwidth requires sigma2 > 0");
  }
  std::vector<WeightedEdge> edges(pairs.size());
  for (std::size_t e = 0; e < pairs.size(); ++e) edges[e] = {pairs[e].first, pairs[e].second, std::exp(-sq[e] / sigma2)};
  KnnGraph out;
  out.graph = WeightedGraph::from_edges(points.size(), edges);
  out.sigma2 = sigma2;
  out.disconnected = !out.graph.is_connected();
  return out;
}

// Exact kNN lists; ties at equal distance go to the lower node index.
inline std::vector<std::vector<NodeId>> knn_lists(const PointCloud& points, std::size_t k, std::size_t threads = 1) {
  const std::size_t n = points.size();
  require(n > 0, ErrorCode::invalid_argument, "empty point cloud");
  require(k >= 1 && k < n, ErrorCode::invalid_argument, "k must satisfy 1 <= k < N");
  std::vector<std::vector<NodeId>> lists(n);
  const auto& x = points.coords();
  parallel_for(n, threads, [&](std::size_t i, std::size_t) {
    std::vector<std::pair<double, NodeId>> cand;
    cand.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.emplace_back((x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm(),
                        static_cast<NodeId>(j));
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    lists[i].reserve(k);
    for (std::size_t r = 0; r < k; ++r) lists[i].push_back(cand[r].second);
  });
  return lists;
}

// Symmetrized kNN graph (edge union) with Gaussian weights.
inline KnnGraph build_knn_graph(const PointCloud& points, std::size_t k, Bandwidth bandwidth = Bandwidth::median(),
                                std::size_t threads = 1) {
  const auto lists = knn_lists(points, k, threads);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(points.size() * k);
  for (std::size_t i = 0; i < lists.size(); ++i)
    for (NodeId j : lists[i]) pairs.emplace_back(std::min<NodeId>(static_cast<NodeId>(i), j), std::max<NodeId>(static_cast<NodeId>(i), j));
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return gaussian_graph_from_pairs(points, std::move(pairs), bandwidth);
}

// ---------------------------------------------------------------------------
// Wrap-around grids on the unit torus

// n^d grid with 2d wrap-around neighbors and unit weights. Node ids are the
// row-major flattening of the multi-index (last coordinate fastest).
class GridGraph {
 public:
  GridGraph(std::size_t side, std::size_t dim) : side_(side), dim_(dim) {
    require(side >= 3, ErrorCode::invalid_argument, "grid side must be >= 3");
    require(dim >= 1, ErrorCode::invalid_argument, "grid dimension must be >= 1");
    std::size_t count = 1;
    for (std::size_t c = 0; c < dim; ++c) {
      require(count <= std::numeric_limits<NodeId>::max() / side, ErrorCode::size_overflow,
              "n^d overflows the node index type");
      count *= side;
    }
    num_nodes_ = count;
    std::vector<WeightedEdge> edges;
    edges.reserve(count * dim);
    std::vector<std::size_t> idx(dim);
    for (std::size_t v = 0; v < count; ++v) {
      unflatten(v, idx);
      for (std::size_t c = 0; c < dim; ++c) {
        const auto saved = idx[c];
        idx[c] = (saved + 1) % side;
        edges.push_back({static_cast<NodeId>(v), static_cast<NodeId>(flatten(idx)), 1.0});
        idx[c] = saved;
      }
    }
    graph_ = WeightedGraph::from_edges(count, edges);
  }

  const WeightedGraph& graph() const { return graph_; }
  std::size_t side() const { return side_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_nodes() const { return num_nodes_; }
  double spacing() const { return 1.0 / static_cast<double>(side_); }

  std::vector<std::size_t> multi_index(std::size_t node) const {
    std::vector<std::size_t> idx(dim_);
    unflatten(node, idx);
    return idx;
  }

  std::size_t node(std::span<const std::size_t> idx) const { return flatten(idx); }

  // Coordinates k/n of a node in [0,1)^d.
  std::vector<double> position(std::size_t node) const {
    const auto idx = multi_index(node);
    std::vector<double> x(dim_);
    for (std::size_t c = 0; c < dim_; ++c) x[c] = static_cast<double>(idx[c]) * spacing();
    return x;
  }

  // Node at multi-index (n/2, ..., n/2).
  std::size_t center() const {
    std::vector<std::size_t> idx(dim_, side_ / 2);
    return flatten(idx);
  }

 private:
  std::size_t flatten(std::span<const std::size_t> idx) const {
    std::size_t v = 0;
    for (std::size_t c = 0; c < dim_; ++c) v = v * side_ + idx[c];
    return v;
  }
  void unflatten(std::size_t v, std::span<std::size_t> idx) const {
    for (std::size_t c = dim_; c-- > 0;) {
      idx[c] = v % side_;
      v /= side_;
    }
  }

  std::size_t side_;
  std::size_t dim_;
  std::size_t num_nodes_ = 0;
  WeightedGraph graph_;
};

inline GridGraph build_grid_graph(std::size_t side, std::size_t dim) { return GridGraph(side, dim); }

// L_n = (2d / h^2)(I - T_n) with T_n the average over the 2d grid neighbors
// and h = 1/n. Throws contract_violation if `graph` is not the n^d torus grid.
inline DenseMatrix rescaled_random_walk_laplacian(const WeightedGraph& graph, std::size_t side, std::size_t dim) {
  const GridGraph reference(side, dim);
  require(graph.num_nodes() == reference.num_nodes(), ErrorCode::contract_violation,
          "graph size does not match n^d");
  for (std::size_t v = 0; v < graph.num_nodes(); ++v) {
    const auto a = graph.neighbors(v);
    const auto b = reference.graph().neighbors(v);
    require(a.size() == b.size(), ErrorCode::contract_violation, "node degree differs from 2d");
    for (std::size_t e = 0; e < a.size(); ++e)
      require(a[e].to == b[e].to && a[e].weight == 1.0, ErrorCode::contract_violation,
              "adjacency differs from the wrap-around grid");
  }
  const double h = 1.0 / static_cast<double>(side);
  const double scale = 2.0 * static_cast<double>(dim) / (h * h);
  const double inv_deg = 1.0 / (2.0 * static_cast<double>(dim));
  const auto n = static_cast<Eigen::Index>(graph.num_nodes());
  DenseMatrix lap = DenseMatrix::Identity(n, n) * scale;
  for (std::size_t v = 0; v < graph.num_nodes(); ++v)
    for (const auto& e : graph.neighbors(v)) lap(static_cast<Eigen::Index>(v), e.to) -= scale * inv_deg;
  return lap;
}

inline DenseMatrix rescaled_random_walk_laplacian(const GridGraph& grid) {
  return rescaled_random_walk_laplacian(grid.graph(), grid.side(), grid.dim());
}

// ---------------------------------------------------------------------------
// Normalized affinities

// W_f = D^{-1/2} W D^{-1/2}.
inline DenseMatrix symmetric_normalized_affinity(const DenseMatrix& w) {
  require(w.rows() == w.cols(), ErrorCode::dimension_mismatch, "affinity must be square");
  require((w.array() >= 0.0).all(), ErrorCode::invalid_argument, "affinity must be non-negative");
  const double tol = 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff());
  require((w - w.transpose()).cwiseAbs().maxCoeff() <= tol, ErrorCode::asymmetric_input, "affinity must be symmetric");
  const Vector deg = w.rowwise().sum();
  for (Eigen::Index i = 0; i < deg.size(); ++i)
    require(deg(i) > 0.0, ErrorCode::isolated_node, "node " + std::to_string(i) + " has zero degree");
  const Vector s = deg.cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * w * s.asDiagonal();
}

// Sparse counterpart of symmetric_normalized_affinity; keeps the edge set.
inline WeightedGraph normalized_affinity_graph(const WeightedGraph& graph) {
  std::vector<double> inv_sqrt(graph.num_nodes());
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    const double d = graph.weighted_degree(i);
    require(d > 0.0, ErrorCode::isolated_node, "node " + std::to_string(i) + " has zero degree");
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  auto edges = graph.undirected_edges();
  for (auto& e : edges) e.weight *= inv_sqrt[e.i] * inv_sqrt[e.j];
  return WeightedGraph::from_edges(graph.num_nodes(), edges, true);
}

// ---------------------------------------------------------------------------
// Geodesics

// Dijkstra distances with Euclidean edge lengths taken from `points`.
// Unreachable nodes get +infinity.
inline std::vector<double> geodesic_distances(const WeightedGraph& graph, const PointCloud& points, std::size_t source) {
  require(source < graph.num_nodes(), ErrorCode::invalid_source, "source " + std::to_string(source) + " out of range");
  require(points.size() == graph.num_nodes(), ErrorCode::dimension_mismatch, "point count differs from node count");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(graph.num_nodes(), inf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, static_cast<NodeId>(source));
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (const auto& e : graph.neighbors(v)) {
      const double nd = d + points.distance(v, e.to);
      if (nd < dist[e.to]) {
        dist[e.to] = nd;
        heap.emplace(nd, e.to);
      }
    }
  }
  return dist;
}

// One geodesic row per source, computed in parallel.
inline std::vector<std::vector<double>> geodesic_rows(const WeightedGraph& graph, const PointCloud& points,
                                                     std::span<const NodeId> sources, std::size_t threads = 1) {
  std::vector<std::vector<double>> rows(sources.size());
  parallel_for(sources.size(), threads,
               [&](std::size_t r, std::size_t) { rows[r] = geodesic_distances(graph, points, sources[r]); });
  return rows;
}

// ---------------------------------------------------------------------------
// Text formats

// Header `N M`, then one `i j w` line per undirected edge with i <= j.
inline void write_graph(std::ostream& out, const WeightedGraph& graph) {
  const auto edges = graph.undirected_edges();
  out << graph.num_nodes() << ' ' << edges.size() << '\n';
  out.precision(17);
  for (const auto& e : edges) out << e.i << ' ' << e.j << ' ' << e.weight << '\n';
}

inline WeightedGraph read_graph(std::istream& in) {
  std::size_t n = 0, m = 0;
  require(static_cast<bool>(in >> n >> m), ErrorCode::parse, "missing graph header");
  std::vector<WeightedEdge> edges(m);
  for (auto& e : edges) {
    long long i = 0, j = 0;
    require(static_cast<bool>(in >> i >> j >> e.weight), ErrorCode::parse, "truncated edge list");
    require(i >= 0 && j >= 0, ErrorCode::parse, "negative node id");
    e.i = static_cast<NodeId>(i);
    e.j = static_cast<NodeId>(j);
  }
  return WeightedGraph::from_edges(n, edges, true);
}

inline void write_point_cloud_csv(std::ostream& out, const PointCloud& cloud) {
  out.precision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t c = 0; c < cloud.dim(); ++c) {
      if (c) out << ',';
      out << cloud.coords()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    }
    out << '\n';
  }
}

// Reads D-column numeric CSV; blank lines and lines starting with '#' are skipped.
inline PointCloud read_point_cloud_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::parse, "bad number on line " + std::to_string(lineno));
      }
    }
    require(rows.empty() || rows.front().size() == row.size(), ErrorCode::parse,
            "inconsistent column count on line " + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  DenseMatrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  return PointCloud(std::move(m));
}

}  // namespace mrf
