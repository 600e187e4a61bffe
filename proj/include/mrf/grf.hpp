#pragma once

// Graph random features: power-series kernel coefficients, modulation
// functions obtained by deconvolution, the random-walk signature estimator and
// the exact power-series oracle it is checked against.

#include "mrf/common.hpp"
#include "mrf/graph.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mrf {

// Coefficients alpha_0..alpha_K of K_alpha(W) = sum_k alpha_k W^k.
struct AlphaCoefficients {
  std::vector<double> values;

  std::size_t truncation() const { return values.empty() ? 0 : values.size() - 1; }
  double operator[](std::size_t k) const { return k < values.size() ? values[k] : 0.0; }
};

// Sequence f(0..K) whose discrete self-convolution reproduces alpha. Values
// past the stored support are zero.
struct ModulationFunction {
  std::vector<double> values;

  std::size_t support() const { return values.size(); }
  double operator()(std::size_t k) const { return k < values.size() ? values[k] : 0.0; }
};

inline constexpr double kCoefficientCutoff = 1e-300;

// alpha_k = exp(log_scale) t^k / k!, i.e. the coefficients of exp(log_scale) exp(tW).
// Stops at k = max_terms or at the first k past the peak (k > t) where alpha_k
// falls below 1e-300.
inline AlphaCoefficients heat_alpha(double t, std::size_t max_terms = 100000, double log_scale = 0.0) {
  require(t > 0.0 && std::isfinite(t), ErrorCode::invalid_argument, "diffusion time must be positive");
  const double log_cut = std::log(kCoefficientCutoff);
  const double log_t = std::log(t);
  AlphaCoefficients alpha;
  double log_a = log_scale;
  for (std::size_t k = 0;; ++k) {
    if (k > 0) log_a += log_t - std::log(static_cast<double>(k));
    if (static_cast<double>(k) > t && log_a < log_cut) break;
    alpha.values.push_back(std::exp(log_a));
    if (k == max_terms) break;
  }
  return alpha;
}

// Closed-form square root of heat_alpha(t, ., log_scale): f(k) = exp(log_scale/2) (t/2)^k / k!.
inline ModulationFunction heat_modulation(double t, std::size_t max_terms = 100000, double log_scale = 0.0) {
  require(t > 0.0 && std::isfinite(t), ErrorCode::invalid_argument, "diffusion time must be positive");
  const double log_cut = std::log(kCoefficientCutoff);
  const double log_half_t = std::log(0.5 * t);
  ModulationFunction f;
  double log_f = 0.5 * log_scale;
  for (std::size_t k = 0;; ++k) {
    if (k > 0) log_f += log_half_t - std::log(static_cast<double>(k));
    if (static_cast<double>(k) > 0.5 * t && log_f < log_cut) break;
    f.values.push_back(std::exp(log_f));
    if (k == max_terms) break;
  }
  return f;
}

namespace detail {
#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
using wide_real = __float128;
#else
using wide_real = long double;
#endif
}  // namespace detail

// Forward recursion f(0) = sqrt(alpha_0),
// f(k) = (alpha_k - sum_{p=1}^{k-1} f(p) f(k-p)) / (2 f(0)).
// Carried in quad precision where available.
inline ModulationFunction deconvolve_alpha(const AlphaCoefficients& alpha) {
  require(!alpha.values.empty() && alpha.values[0] > 0.0, ErrorCode::deconvolution_undefined,
          "alpha_0 must be positive");
  using R = detail::wide_real;
  const std::size_t n = alpha.values.size();
  std::vector<R> f(n);
  R f0 = static_cast<R>(std::sqrt(alpha.values[0]));
  const R a0 = static_cast<R>(alpha.values[0]);
  for (int it = 0; it < 3; ++it) f0 = (f0 + a0 / f0) / 2;
  f[0] = f0;
  for (std::size_t k = 1; k < n; ++k) {
    R acc = static_cast<R>(alpha.values[k]);
    for (std::size_t p = 1; p < k; ++p) acc -= f[p] * f[k - p];
    f[k] = acc / (2 * f0);
  }
  ModulationFunction out;
  out.values.reserve(n);
  for (const auto& v : f) out.values.push_back(static_cast<double>(v));
  return out;
}

// Discrete self-convolution (f * f)_k for k < f.support().
inline AlphaCoefficients self_convolve(const ModulationFunction& f) {
  AlphaCoefficients a;
  a.values.assign(f.support(), 0.0);
  for (std::size_t k = 0; k < f.support(); ++k)
    for (std::size_t p = 0; p <= k; ++p) a.values[k] += f.values[k - p] * f.values[p];
  return a;
}

// ---------------------------------------------------------------------------
// Random-walk signature estimator

struct WalkConfig {
  double p_halt = 0.1;
  std::size_t num_walks = 1000;
  std::uint64_t rng_seed = 0;
  // A walk stops early once no future deposit can exceed this fraction of the
  // largest possible single deposit. Zero disables the cut.
  double tail_tolerance = 1e-15;

  void validate() const {
    require(p_halt > 0.0 && p_halt < 1.0, ErrorCode::invalid_argument, "p_halt must lie in (0,1)");
    require(num_walks >= 1, ErrorCode::invalid_argument, "num_walks must be >= 1");
    require(tail_tolerance >= 0.0, ErrorCode::invalid_argument, "tail_tolerance must be >= 0");
  }
};

// Sparse non-negative vector phi_f(i) over the node universe, sorted by node.
struct SignatureVector {
  NodeId start_node = 0;
  std::size_t num_nodes = 0;
  std::vector<std::pair<NodeId, double>> entries;

  double at(NodeId node) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), node,
                               [](const auto& e, NodeId v) { return e.first < v; });
    return (it != entries.end() && it->first == node) ? it->second : 0.0;
  }

  double dot(const SignatureVector& other) const {
    require(num_nodes == other.num_nodes, ErrorCode::dimension_mismatch, "signature node universes differ");
    double s = 0.0;
    auto a = entries.begin();
    auto b = other.entries.begin();
    while (a != entries.end() && b != other.entries.end()) {
      if (a->first < b->first) {
        ++a;
      } else if (b->first < a->first) {
        ++b;
      } else {
        s += a->second * b->second;
        ++a;
        ++b;
      }
    }
    return s;
  }

  Vector to_dense() const {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(num_nodes));
    for (const auto& [node, value] : entries) v(node) = value;
    return v;
  }
};

namespace detail {

inline std::mt19937_64 walker_stream(std::uint64_t seed, NodeId start) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(start), 0x6d72u};
  return std::mt19937_64(seq);
}

// tail[k] >= max_{j>=0} gamma^j f(k+j): bound on any deposit from step k on,
// per unit of load.
inline std::vector<double> tail_bound(const ModulationFunction& f, double gamma) {
  std::vector<double> tail(f.support() + 1, 0.0);
  for (std::size_t k = f.support(); k-- > 0;)
    tail[k] = std::min(std::max(std::abs(f.values[k]), gamma * tail[k + 1]), std::numeric_limits<double>::max());
  return tail;
}

}  // namespace detail

// phi_f(i) for every start node from m random walks. A walk deposits load * f(length)
// at its node, moves to a uniform neighbor, scales load by deg(cur) / (1 - p_halt) * W(cur, next)
// and halts with probability p_halt. RNG streams are per start node: (seed, start).
inline std::vector<SignatureVector> run_grf(const WeightedGraph& graph, const ModulationFunction& f,
                                            const WalkConfig& config, std::span<const NodeId> start_nodes,
                                            std::size_t threads = 1) {
  config.validate();
  const std::size_t n = graph.num_nodes();
  for (NodeId s : start_nodes) require(s < n, ErrorCode::invalid_source, "start node out of range");
  require(f.support() > 0, ErrorCode::invalid_argument, "empty modulation function");

  double gamma = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double wmax = 0.0;
    for (const auto& e : graph.neighbors(i)) wmax = std::max(wmax, e.weight);
    gamma = std::max(gamma, static_cast<double>(graph.degree(i)) * wmax);
  }
  gamma /= (1.0 - config.p_halt);
  const auto tail = detail::tail_bound(f, gamma);
  const bool use_tail = config.tail_tolerance > 0.0 && std::isfinite(tail[0]) && tail[0] > 0.0;
  const double cutoff = use_tail ? config.tail_tolerance * tail[0] : 0.0;

  const double halt_threshold = config.p_halt * 18446744073709551616.0;  // 2^64
  const auto halt_bits = static_cast<std::uint64_t>(halt_threshold);
  const double inv_m = 1.0 / static_cast<double>(config.num_walks);
  const double step_gain = 1.0 / (1.0 - config.p_halt);

  const std::size_t workers = worker_count(start_nodes.size(), threads);
  std::vector<std::vector<double>> scratch(workers);
  std::vector<std::vector<std::uint8_t>> seen(workers);
  std::vector<std::vector<NodeId>> touched(workers);

  std::vector<SignatureVector> out(start_nodes.size());
  parallel_for(start_nodes.size(), workers, [&](std::size_t s, std::size_t w) {
    auto& acc = scratch[w];
    auto& mark = seen[w];
    auto& list = touched[w];
    if (acc.size() != n) {
      acc.assign(n, 0.0);
      mark.assign(n, 0);
    }
    list.clear();
    const NodeId start = start_nodes[s];
    auto rng = detail::walker_stream(config.rng_seed, start);

    for (std::size_t walk = 0; walk < config.num_walks; ++walk) {
      double load = 1.0;
      NodeId cur = start;
      std::size_t length = 0;
      while (length < f.support()) {
        if (use_tail && load * tail[length] < cutoff) break;
        if (!mark[cur]) {
          mark[cur] = 1;
          list.push_back(cur);
        }
        acc[cur] += load * f.values[length];
        ++length;
        const auto nb = graph.neighbors(cur);
        if (nb.empty()) throw Error(ErrorCode::walker_stuck, "node " + std::to_string(cur) + " has no neighbors");
        const auto deg = nb.size();
        const auto pick = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * deg) >> 64);
        load *= static_cast<double>(deg) * step_gain * nb[pick].weight;
        cur = nb[pick].to;
        if (rng() < halt_bits) break;
      }
    }

    std::sort(list.begin(), list.end());
    SignatureVector sig;
    sig.start_node = start;
    sig.num_nodes = n;
    sig.entries.reserve(list.size());
    for (NodeId v : list) {
      if (acc[v] != 0.0) sig.entries.emplace_back(v, acc[v] * inv_m);
      acc[v] = 0.0;
      mark[v] = 0;
    }
    out[s] = std::move(sig);
  });
  return out;
}

inline std::vector<SignatureVector> run_grf_all(const WeightedGraph& graph, const ModulationFunction& f,
                                                const WalkConfig& config, std::size_t threads = 1) {
  std::vector<NodeId> starts(graph.num_nodes());
  std::iota(starts.begin(), starts.end(), NodeId{0});
  return run_grf(graph, f, config, starts, threads);
}

// K_hat(i, j) = <phi(i), phi'(j)>. Rows and columns should come from walk sets
// with independent seeds when unbiasedness matters.
inline DenseMatrix estimate_kernel(std::span<const SignatureVector> rows, std::span<const SignatureVector> cols,
                                   std::size_t threads = 1) {
  if (!rows.empty() && !cols.empty())
    require(rows.front().num_nodes == cols.front().num_nodes, ErrorCode::dimension_mismatch,
            "signature sets use different node universes");
  for (const auto& r : rows)
    require(r.num_nodes == rows.front().num_nodes, ErrorCode::dimension_mismatch, "mixed node universes");
  for (const auto& c : cols)
    require(c.num_nodes == cols.front().num_nodes, ErrorCode::dimension_mismatch, "mixed node universes");
  DenseMatrix k(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  parallel_for(rows.size(), threads, [&](std::size_t i, std::size_t) {
    for (std::size_t j = 0; j < cols.size(); ++j)
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].dot(cols[j]);
  });
  return k;
}

// Stacks signatures as rows of a dense matrix (rows x num_nodes).
inline DenseMatrix signature_matrix(std::span<const SignatureVector> sigs) {
  const std::size_t n = sigs.empty() ? 0 : sigs.front().num_nodes;
  DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(sigs.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < sigs.size(); ++r) {
    require(sigs[r].num_nodes == n, ErrorCode::dimension_mismatch, "mixed node universes");
    for (const auto& [node, value] : sigs[r].entries) m(static_cast<Eigen::Index>(r), node) = value;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Exact oracle

// sum_k alpha_k W^k by repeated multiplication. The final retained term must
// be below 1e-16 of the accumulated max-norm; otherwise the truncated series
// has not converged and series_divergence is raised.
inline DenseMatrix exact_kernel_series(const DenseMatrix& w, const AlphaCoefficients& alpha) {
  require(w.rows() == w.cols(), ErrorCode::dimension_mismatch, "W must be square");
  require(!alpha.values.empty(), ErrorCode::invalid_argument, "empty coefficient sequence");
  const auto n = w.rows();
  DenseMatrix power = DenseMatrix::Identity(n, n);
  DenseMatrix acc = alpha.values[0] * power;
  double last_term = acc.cwiseAbs().maxCoeff();
  for (std::size_t k = 1; k < alpha.values.size(); ++k) {
    power = power * w;
    require(power.allFinite(), ErrorCode::series_divergence, "matrix power overflowed at k=" + std::to_string(k));
    const double a = alpha.values[k];
    if (a != 0.0) acc.noalias() += a * power;
    last_term = std::abs(a) * power.cwiseAbs().maxCoeff();
    require(std::isfinite(last_term) && acc.allFinite(), ErrorCode::series_divergence,
            "series terms overflowed at k=" + std::to_string(k));
  }
  if (alpha.values.size() > 1) {
    const double scale = acc.cwiseAbs().maxCoeff();
    require(last_term < 1e-16 * scale || last_term == 0.0, ErrorCode::series_divergence,
            "last retained term is not negligible; coefficients truncated before convergence");
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Signature dumps

inline void write_signatures_csv(std::ostream& out, std::span<const SignatureVector> sigs) {
  out << "start_node,node,value\n";
  out.precision(17);
  for (const auto& s : sigs)
    for (const auto& [node, value] : s.entries) out << s.start_node << ',' << node << ',' << value << '\n';
}

inline std::vector<SignatureVector> read_signatures_csv(std::istream& in, std::size_t num_nodes) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse, "missing signature header");
  std::vector<SignatureVector> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    unsigned long start = 0, node = 0;
    double value = 0.0;
    char c1 = 0, c2 = 0;
    require(static_cast<bool>(ss >> start >> c1 >> node >> c2 >> value) && c1 == ',' && c2 == ',', ErrorCode::parse,
            "bad signature row on line " + std::to_string(lineno));
    require(node < num_nodes, ErrorCode::parse, "node id out of range on line " + std::to_string(lineno));
    if (out.empty() || out.back().start_node != start) {
      out.push_back({static_cast<NodeId>(start), num_nodes, {}});
    }
    out.back().entries.emplace_back(static_cast<NodeId>(node), value);
  }
  for (auto& s : out) std::sort(s.entries.begin(), s.entries.end());
  return out;
}

}  // namespace mrf
