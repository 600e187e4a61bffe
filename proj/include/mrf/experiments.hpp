#pragma once

// Experiment drivers. Each run writes a manifest plus CSV/JSON outputs into ctx.out_dir.
// Wall-clock numbers go only to timing*.csv and the JSON reports.

#include "mrf/checks.hpp"
#include "mrf/common.hpp"
#include "mrf/config.hpp"
#include "mrf/features.hpp"
#include "mrf/graph.hpp"
#include "mrf/grf.hpp"
#include "mrf/interp.hpp"
#include "mrf/manifolds.hpp"
#include "mrf/oracles.hpp"
#include "mrf/pipeline.hpp"
#include "mrf/surrogate.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace mrf {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

namespace detail {

inline void log(const RunContext& ctx, const std::string& msg) {
  if (!ctx.quiet) std::cerr << "[mrf] " << msg << std::endl;
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace detail

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::invalid_argument, "need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// ===========================================================================
// Gaussian convergence on wrap-around grids

struct GaussianConvergenceParams {
  std::size_t d = 2;
  double sigma = 0.2;
  double p_halt = 0.005;
  std::size_t walks = 20000;
  std::size_t reps = 5;
  std::vector<std::size_t> n_ladder{5, 15, 25};
  std::size_t kmax = 3;
  double tail_tolerance = 1e-15;
  double max_walk_steps = 2e10;
  std::vector<std::size_t> oracle_dims{2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30, 32};
  std::size_t oracle_pairs = 256;

  static GaussianConvergenceParams preset(Scale s) {
    GaussianConvergenceParams p;
    if (s == Scale::paper) {
      p.walks = 100000;
      p.reps = 30;
      p.n_ladder = {5, 15, 25, 35, 45, 55, 65, 75, 85, 95, 105};
      p.max_walk_steps = 1e12;
    }
    return p;
  }

  void bind(ParamTable& t) {
    t.add("d", d).add("sigma", sigma).add("p_halt", p_halt).add("walks", walks).add("reps", reps);
    t.add("n_ladder", n_ladder).add("kmax", kmax).add("tail_tolerance", tail_tolerance);
    t.add("max_walk_steps", max_walk_steps).add("oracle_dims", oracle_dims).add("oracle_pairs", oracle_pairs);
  }
};

struct GaussianConvergenceRow {
  std::size_t n = 0;
  std::size_t num_nodes = 0;
  double c = 0.0;
  double field_rel_mse = 0.0, field_rel_mse_sd = 0.0;
  double kernel_rel_mse = 0.0, kernel_rel_mse_sd = 0.0;
  double kernel_exact_rel_err = 0.0;  // discretization floor, no Monte Carlo
};

// Expected walk length bound (1 - (1-p)^S) / p for modulation support S.
inline double expected_walk_steps(double p_halt, std::size_t support) {
  return (1.0 - std::pow(1.0 - p_halt, static_cast<double>(support))) / p_halt;
}

inline std::vector<GaussianConvergenceRow> run_gaussian_convergence(const GaussianConvergenceParams& p,
                                                                    const RunContext& ctx) {
  require(p.d >= 1 && p.sigma > 0 && p.reps >= 1, ErrorCode::config, "invalid gaussian-convergence parameters");
  const double t = 0.5 * p.sigma * p.sigma;
  const int kmax = static_cast<int>(p.kmax);
  const double dd = static_cast<double>(p.d);

  // walk budget check before any work
  double total_steps = 0.0;
  for (std::size_t n : p.n_ladder) {
    const double nodes = std::pow(static_cast<double>(n), dd);
    const double nn = static_cast<double>(n * n);
    const auto f = heat_modulation(nn * t, 100000, -2.0 * dd * nn * t);
    total_steps += nodes * static_cast<double>(p.walks) * static_cast<double>(p.reps) *
                   expected_walk_steps(p.p_halt, f.support());
  }
  require(total_steps <= p.max_walk_steps, ErrorCode::budget,
          "estimated " + std::to_string(total_steps) + " walk steps exceed max_walk_steps=" +
              std::to_string(p.max_walk_steps));

  std::vector<GaussianConvergenceRow> rows;
  auto field_out = open_output(ctx, "fields.csv");
  field_out << "n,node";
  for (std::size_t c = 0; c < p.d; ++c) field_out << ",x" << c;
  field_out << ",phi,psi_scaled,g_sigma,residual\n";

  for (std::size_t n : p.n_ladder) {
    detail::log(ctx, "gaussian-convergence n=" + std::to_string(n));
    GridGraph grid(n, p.d);
    const std::size_t nodes = grid.num_nodes();
    const double nn = static_cast<double>(n * n);
    const auto f = heat_modulation(nn * t, 100000, -2.0 * dd * nn * t);
    const double c = rescale_constant(p.d, p.sigma, n);
    const double field_scale = std::pow(static_cast<double>(n), dd / 2.0) * c;

    std::vector<std::vector<double>> pos(nodes);
    for (std::size_t v = 0; v < nodes; ++v) pos[v] = grid.position(v);
    const std::size_t center = grid.center();
    Vector g_ref(static_cast<Eigen::Index>(nodes));
    for (std::size_t v = 0; v < nodes; ++v)
      g_ref(static_cast<Eigen::Index>(v)) = periodized_g_sigma(pos[center], pos[v], p.sigma, kmax);
    DenseMatrix k_ref(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(nodes));
    parallel_for(nodes, ctx.threads, [&](std::size_t i, std::size_t) {
      for (std::size_t j = 0; j < nodes; ++j)
        k_ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            periodized_gaussian(pos[i], pos[j], p.sigma, kmax);
    });

    std::vector<double> field_err, kernel_err;
    for (std::size_t r = 0; r < p.reps; ++r) {
      WalkConfig walk{p.p_halt, p.walks, derive_seed(ctx.seed, 1000 * n + r), p.tail_tolerance};
      const auto sigs = run_grf_all(grid.graph(), f, walk, ctx.threads);
      const Vector field = field_scale * sigs[center].to_dense();
      field_err.push_back(relative_squared_error(field, g_ref));
      const DenseMatrix s = signature_matrix(sigs);
      const DenseMatrix k_est = (c * c) * (s * s.transpose());
      kernel_err.push_back(relative_squared_error(k_est, k_ref));
      if (r == 0) {
        for (std::size_t v = 0; v < nodes; ++v) {
          field_out << n << ',' << v;
          for (double x : pos[v]) field_out << ',' << x;
          const double phi = sigs[center].at(static_cast<NodeId>(v));
          field_out << ',' << phi << ',' << field(static_cast<Eigen::Index>(v)) << ','
                    << g_ref(static_cast<Eigen::Index>(v)) << ','
                    << field(static_cast<Eigen::Index>(v)) - g_ref(static_cast<Eigen::Index>(v)) << '\n';
        }
      }
    }
    auto mean_sd = [](const std::vector<double>& v) {
      double m = 0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double s = 0;
      for (double x : v) s += (x - m) * (x - m);
      return std::pair{m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
    };
    GaussianConvergenceRow row;
    row.n = n;
    row.num_nodes = nodes;
    row.c = c;
    std::tie(row.field_rel_mse, row.field_rel_mse_sd) = mean_sd(field_err);
    std::tie(row.kernel_rel_mse, row.kernel_rel_mse_sd) = mean_sd(kernel_err);
    if (nodes <= 4096) {
      const KroneckerHeatGrid exact(n, p.d, t);
      row.kernel_exact_rel_err = relative_squared_error(
          (std::pow(2.0 * std::numbers::pi * p.sigma * p.sigma, dd / 2.0) * std::pow(static_cast<double>(n), dd)) *
              exact.dense(),
          k_ref);
    } else {
      row.kernel_exact_rel_err = kNaN;
    }
    rows.push_back(row);
  }

  auto out = open_output(ctx, "gaussian_convergence.csv");
  out << "n,d,num_nodes,walks,reps,c,field_rel_mse,field_rel_mse_sd,kernel_rel_mse,kernel_rel_mse_sd,"
         "kernel_exact_rel_err\n";
  for (const auto& r : rows)
    out << r.n << ',' << p.d << ',' << r.num_nodes << ',' << p.walks << ',' << p.reps << ',' << r.c << ','
        << r.field_rel_mse << ',' << r.field_rel_mse_sd << ',' << r.kernel_rel_mse << ',' << r.kernel_rel_mse_sd << ','
        << r.kernel_exact_rel_err << '\n';

  // Exact discrete kernels on high-dimensional grids through 1D tensor factors.
  auto dims = open_output(ctx, "oracle_dimensions.csv");
  dims << "d,n,pairs,rel_sq_error\n";
  std::mt19937_64 rng(derive_seed(ctx.seed, 77));
  for (std::size_t n : p.n_ladder) {
    const KroneckerHeatGrid ring(n, 1, t);
    const double h = 1.0 / static_cast<double>(n);
    const auto reach = static_cast<long long>(std::ceil(2.0 * p.sigma * static_cast<double>(n)));
    std::uniform_int_distribution<long long> offset(-reach, reach);
    for (std::size_t d : p.oracle_dims) {
      double num = 0.0, den = 0.0;
      for (std::size_t q = 0; q < p.oracle_pairs; ++q) {
        double est = 1.0, truth = 1.0;
        for (std::size_t c = 0; c < d; ++c) {
          const long long o = offset(rng);
          const auto j = static_cast<std::size_t>(((o % static_cast<long long>(n)) + static_cast<long long>(n)) %
                                                  static_cast<long long>(n));
          const double x[1] = {0.0}, y[1] = {static_cast<double>(j) * h};
          est *= static_cast<double>(n) * ring.ring_kernel()(0, static_cast<Eigen::Index>(j));
          truth *= periodized_heat_density(x, y, p.sigma, kmax);
        }
        num += (est - truth) * (est - truth);
        den += truth * truth;
      }
      dims << d << ',' << n << ',' << p.oracle_pairs << ',' << num / den << '\n';
    }
  }
  return rows;
}

// ===========================================================================
// Manifold surrogate

struct ManifoldParams {
  std::string surface = "sphere";
  std::size_t n_points = 500;
  std::size_t knn = 0;  // 0: 24 for the Moebius strip, 8 otherwise
  double sigma2 = 20.0;  // kNN bandwidth; 0 selects the median rule
  double a = 1.0, b = 1.3, c = 0.7, width = 0.4, major = 2.0, minor = 0.7;
  double tau = 20.0;
  double p_halt = 0.01;
  std::size_t walks = 20000;
  std::size_t num_starts = 200;
  std::size_t num_val = 100;
  double keep_threshold = 0.1;
  double retain_prob = 0.025;
  std::size_t anchors_per_start = 0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 300;
  double eps = 0.1;
  double val_split = 0.2;
  double t_analytical = 0.25;
  std::size_t lmax = 50;
  std::size_t out_of_sample = 512;
  std::size_t n_rf = 256;
  std::size_t dump_fields = 3;

  static ManifoldParams preset(Scale s) {
    ManifoldParams p;
    if (s == Scale::paper) {
      p.n_points = 4000;
      p.walks = 100000;
      p.num_starts = 1000;
      p.num_val = 512;
      p.batch_size = 32768;
      p.epochs = 1000;
    }
    return p;
  }

  void bind(ParamTable& t) {
    t.add("surface", surface).add("n_points", n_points).add("knn", knn).add("sigma2", sigma2);
    t.add("ellipsoid_a", a).add("ellipsoid_b", b).add("ellipsoid_c", c).add("mobius_width", width);
    t.add("torus_R", major).add("torus_r", minor).add("tau", tau).add("p_halt", p_halt).add("walks", walks);
    t.add("num_starts", num_starts).add("num_val", num_val).add("keep_threshold", keep_threshold);
    t.add("retain_prob", retain_prob).add("anchors_per_start", anchors_per_start);
    t.add("learning_rate", learning_rate).add("batch_size", batch_size).add("epochs", epochs).add("eps", eps);
    t.add("val_split", val_split).add("t_analytical", t_analytical).add("lmax", lmax);
    t.add("out_of_sample", out_of_sample).add("n_rf", n_rf).add("dump_fields", dump_fields);
  }

  SurfaceSpec spec() const {
    SurfaceSpec s;
    s.kind = parse_surface_kind(surface);
    s.a = a, s.b = b, s.c = c, s.width = width, s.major = major, s.minor = minor;
    return s;
  }

  std::size_t neighbors() const {
    if (knn != 0) return knn;
    return parse_surface_kind(surface) == SurfaceSpec::Kind::mobius ? 24 : 8;
  }
};

struct ManifoldResult {
  std::size_t num_points = 0;
  bool disconnected = false;
  KernelMetrics metrics;         // surrogate kernel vs spectral exp(tau W_f) on validation nodes
  double alpha = 0.0;
  KernelMetrics analytic;        // sphere only: surrogate kernel vs analytic heat kernel
  double analytic_alpha = kNaN;
  std::size_t dataset_size = 0;
  double min_feature = 0.0;
  GradientCheck gradient;
  std::vector<EpochLoss> history;
  std::map<std::string, double> timings;
};

// Uniform random points on the surface (off the discretization).
inline DenseMatrix random_surface_points(const SurfaceSpec& spec, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DenseMatrix out(static_cast<Eigen::Index>(count), 3);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < count; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    switch (spec.kind) {
      case SurfaceSpec::Kind::sphere:
      case SurfaceSpec::Kind::ellipsoid: {
        Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
        v.normalize();
        if (spec.kind == SurfaceSpec::Kind::ellipsoid) v = v.cwiseProduct(Eigen::Vector3d(spec.a, spec.b, spec.c));
        out.row(r) = v.transpose();
        break;
      }
      case SurfaceSpec::Kind::torus:
        out.row(r) = torus_point(two_pi * unit(rng), two_pi * unit(rng), spec.major, spec.minor).transpose();
        break;
      case SurfaceSpec::Kind::mobius:
        out.row(r) = mobius_point(two_pi * unit(rng), spec.width * (2.0 * unit(rng) - 1.0)).transpose();
        break;
      case SurfaceSpec::Kind::hypercube_grid:
        throw Error(ErrorCode::config, "hypercube grids are not supported by manifold-surrogate");
    }
  }
  return out;
}

inline ManifoldResult run_manifold_surrogate(const ManifoldParams& p, const RunContext& ctx) {
  using clock = std::chrono::steady_clock;
  ManifoldResult res;
  const SurfaceSpec spec = p.spec();
  const PointCloud points = sample_surface(spec, p.n_points);
  const std::size_t n = points.size();
  res.num_points = n;
  const auto knn = build_knn_graph(points, p.neighbors(), p.sigma2 > 0 ? Bandwidth::fixed(p.sigma2) : Bandwidth::median(),
                                   ctx.threads);
  res.disconnected = knn.disconnected;
  if (knn.disconnected) detail::log(ctx, "warning: kNN graph is disconnected");

  // starts and validation nodes come from the largest component
  const auto labels = knn.graph.component_labels();
  std::map<std::size_t, std::size_t> sizes;
  for (auto l : labels) ++sizes[l];
  std::size_t main_label = 0, main_size = 0;
  for (auto [l, s] : sizes)
    if (s > main_size) main_label = l, main_size = s;
  std::vector<NodeId> pool;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] == main_label) pool.push_back(static_cast<NodeId>(i));
  require(pool.size() >= p.num_starts + p.num_val, ErrorCode::contract_violation,
          "the training component is too small for the requested start and validation nodes");
  const auto picks = sample_without_replacement(pool.size(), p.num_starts + p.num_val, derive_seed(ctx.seed, 1));
  std::vector<NodeId> chosen;
  for (auto i : picks) chosen.push_back(pool[i]);
  std::shuffle(chosen.begin(), chosen.end(), std::mt19937_64(derive_seed(ctx.seed, 2)));
  std::vector<NodeId> starts(chosen.begin(), chosen.begin() + static_cast<std::ptrdiff_t>(p.num_starts));
  std::vector<NodeId> val(chosen.begin() + static_cast<std::ptrdiff_t>(p.num_starts), chosen.end());
  std::sort(starts.begin(), starts.end());
  std::sort(val.begin(), val.end());

  SurrogateSetup setup;
  setup.tau = p.tau;
  setup.walk = WalkConfig{p.p_halt, p.walks, derive_seed(ctx.seed, 3), 1e-15};
  setup.data = DatasetConfig{p.keep_threshold, p.retain_prob, derive_seed(ctx.seed, 4), p.anchors_per_start};
  setup.train = TrainConfig{p.learning_rate, p.batch_size, p.epochs, p.eps, p.val_split, derive_seed(ctx.seed, 5)};
  setup.threads = ctx.threads;
  detail::log(ctx, "manifold-surrogate: walks from " + std::to_string(starts.size()) + " starts");
  const SurrogateFit fit = fit_surrogate(points, knn.graph, starts, setup);
  res.dataset_size = fit.dataset.size();
  res.history = fit.training.history;
  res.timings["walks"] = fit.walk_seconds;
  res.timings["geodesics"] = fit.geodesic_seconds;
  res.timings["training"] = fit.train_seconds;

  // spectral baseline: dense W_f, eigendecomposition, kernel formation
  auto t0 = clock::now();
  const DenseMatrix wf = symmetric_normalized_affinity(knn.graph.to_dense());
  const SpectralDecomposition eig = eigendecompose_symmetric(wf);
  const DenseMatrix k_full = spectral_heat_kernel(eig, {p.tau, HeatKernelParams::Sign::affinity});
  res.timings["spectral_baseline"] = seconds_since(t0);

  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), NodeId{0});
  const DenseMatrix phi = surrogate_features(fit.training.params, points, knn.graph, val, all, ctx.threads);
  res.min_feature = phi.size() ? phi.minCoeff() : 0.0;
  const DenseMatrix k_est = phi * phi.transpose();
  DenseMatrix k_gt(static_cast<Eigen::Index>(val.size()), static_cast<Eigen::Index>(val.size()));
  for (std::size_t i = 0; i < val.size(); ++i)
    for (std::size_t j = 0; j < val.size(); ++j)
      k_gt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k_full(val[i], val[j]);
  const Alignment al = frobenius_align(k_est, k_gt);
  res.alpha = al.alpha;
  res.metrics = kernel_metrics(al.aligned, k_gt, p.eps);

  if (spec.kind == SurfaceSpec::Kind::sphere) {
    const PointCloud vp = select_points(points, val);
    const DenseMatrix k_an = sphere_heat_kernel_matrix(vp, p.t_analytical, p.lmax, ctx.threads);
    const Alignment aa = frobenius_align(k_est, k_an);
    res.analytic_alpha = aa.alpha;
    res.analytic = kernel_metrics(aa.aligned, k_an, p.eps);
  } else {
    res.analytic = KernelMetrics{kNaN, kNaN, kNaN, kNaN, kNaN, true};
  }

  {
    std::vector<std::size_t> rows(std::min<std::size_t>(10, fit.dataset.size()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    res.gradient = gradient_check(fit.training.params, fit.dataset.subset(rows), p.eps);
  }

  // out-of-sample kernel evaluation timing
  {
    const DenseMatrix queries = random_surface_points(spec, p.out_of_sample, derive_seed(ctx.seed, 6));
    const auto anchors = sample_without_replacement(n, std::min(p.n_rf, n), derive_seed(ctx.seed, 7));
    t0 = clock::now();
    const AttachedPoints attached = attach_points(points, queries, ctx.threads);
    const DenseMatrix oos = attached_features(fit.training.params, points, knn.graph, attached, anchors, ctx.threads);
    const DenseMatrix k_oos = oos * oos.transpose();
    res.timings["mrf_out_of_sample"] = seconds_since(t0);
    res.timings["mrf_out_of_sample_checksum"] = k_oos.sum() * 0.0;  // keeps the product alive
  }

  // outputs
  const std::string name = surface_name(spec.kind);
  {
    auto out = open_output(ctx, "metrics.csv");
    out << "manifold,N,n,d,R2,mean_RE,median_RE,MSE,RMSE,alpha,diagonal_included,dataset_size,final_train_loss,"
           "final_val_loss,analytic_R2,analytic_mean_RE,analytic_median_RE,min_feature,gradcheck_max_rel\n";
    const auto& last = res.history.empty() ? EpochLoss{} : res.history.back();
    out << name << ',' << n << ",0,2," << res.metrics.r2 << ',' << res.metrics.mean_re << ',' << res.metrics.median_re
        << ',' << res.metrics.mse << ',' << res.metrics.rmse << ',' << res.alpha << ",1," << res.dataset_size << ','
        << last.train_loss << ',' << last.val_loss << ',' << res.analytic.r2 << ',' << res.analytic.mean_re << ','
        << res.analytic.median_re << ',' << res.min_feature << ',' << res.gradient.worst() << '\n';
  }
  {
    auto out = open_output(ctx, "loss_history.csv");
    write_loss_history_csv(out, res.history);
  }
  {
    auto out = open_output(ctx, "params.txt");
    write_params(out, fit.training.params);
  }
  {
    auto out = open_output(ctx, "timing.csv");
    out << "stage,seconds\n";
    for (const auto& [k, v] : res.timings)
      if (k != "mrf_out_of_sample_checksum") out << k << ',' << v << '\n';
  }
  {
    // learned g(x, .) against exp(tau/2 W_f)(x, .) for a few validation nodes
    const DenseMatrix half = spectral_heat_kernel(eig, {0.5 * p.tau, HeatKernelParams::Sign::affinity});
    auto out = open_output(ctx, "fields.csv");
    out << "start,node,x,y,z,predicted,ground_truth,residual\n";
    const std::size_t dumps = std::min(p.dump_fields, val.size());
    for (std::size_t s = 0; s < dumps; ++s) {
      const NodeId x = val[s];
      const std::vector<NodeId> one{x};
      const DenseMatrix g = std::sqrt(static_cast<double>(n)) *
                            surrogate_features(fit.training.params, points, knn.graph, one, all, ctx.threads);
      for (std::size_t w = 0; w < n; ++w) {
        const double pred = g(0, static_cast<Eigen::Index>(w));
        const double truth = half(x, static_cast<Eigen::Index>(w));
        const auto pt = points.point(w);
        out << x << ',' << w << ',' << pt(0) << ',' << pt(1) << ',' << pt(2) << ',' << pred << ',' << truth << ','
            << pred - truth << '\n';
      }
    }
  }
  {
    nlohmann::json j;
    j["manifold"] = name;
    j["N"] = n;
    j["disconnected"] = res.disconnected;
    j["R2"] = res.metrics.r2;
    j["mean_RE"] = res.metrics.mean_re;
    j["median_RE"] = res.metrics.median_re;
    j["MSE"] = res.metrics.mse;
    j["RMSE"] = res.metrics.rmse;
    j["alpha"] = res.alpha;
    j["diagonal_included"] = true;
    j["analytic_R2"] = detail::finite_or_null(res.analytic.r2);
    j["dataset_size"] = res.dataset_size;
    j["min_feature"] = res.min_feature;
    j["gradcheck_max_rel"] = res.gradient.worst();
    for (const auto& [k, v] : res.timings)
      if (k != "mrf_out_of_sample_checksum") j["timings"][k] = v;
    auto out = open_output(ctx, "metrics.json");
    out << j.dump(2) << '\n';
  }
  return res;
}

// ===========================================================================
// Mesh interpolation

struct TimingRow {
  std::string method;
  std::size_t size = 0;
  double preprocess_seconds = kNaN;
  double interpolate_seconds = kNaN;
  bool censored = false;
};

// Runs every method at every size (smallest first) after one warm-up pass on
// the smallest size. A run whose total time exceeds the method budget is kept
// but flagged, and every larger size of that method is recorded as censored.
template <typename Run>
std::vector<TimingRow> timing_harness(const std::vector<std::string>& methods, std::span<const std::size_t> sizes,
                                      const std::map<std::string, double>& budgets, Run&& run, bool warmup = true) {
  require(!sizes.empty(), ErrorCode::invalid_argument, "empty size ladder");
  require(std::is_sorted(sizes.begin(), sizes.end()), ErrorCode::invalid_argument, "size ladder must be monotone");
  if (warmup)
    for (const auto& m : methods) (void)run(m, sizes.front(), true);
  std::vector<TimingRow> rows;
  std::map<std::string, bool> stopped;
  for (std::size_t s : sizes)
    for (const auto& m : methods) {
      TimingRow row;
      row.method = m;
      row.size = s;
      if (stopped[m]) {
        row.censored = true;
      } else {
        const auto [pre, inter] = run(m, s, false);
        row.preprocess_seconds = pre;
        row.interpolate_seconds = inter;
        const auto b = budgets.find(m);
        if (b != budgets.end() && pre + inter > b->second) {
          row.censored = true;
          stopped[m] = true;
        }
      }
      rows.push_back(row);
    }
  return rows;
}

inline void write_timing_csv(std::ostream& out, std::span<const TimingRow> rows) {
  out << "method,size,preprocess_seconds,interpolate_seconds,censored\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.size << ',' << r.preprocess_seconds << ',' << r.interpolate_seconds << ','
        << (r.censored ? 1 : 0) << '\n';
}

struct MeshMrfParams {
  double tau = 20.0;
  std::size_t n_rf = 256;
  std::size_t knn = 16;
  std::size_t n_dense_min = 5000;
  std::size_t num_starts = 200;
  std::size_t walks = 2000;
  double p_halt = 0.01;
  double keep_threshold = 0.1;
  double retain_prob = 0.025;
  std::size_t anchors_per_start = 500;
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  std::size_t epochs = 200;
  double eps = 0.1;
  double val_split = 0.2;

  void paper() {
    num_starts = 1000;
    walks = 10000;
    anchors_per_start = 0;
    batch_size = 32768;
    epochs = 1000;
  }

  void bind(ParamTable& t) {
    t.add("tau", tau).add("n_rf", n_rf).add("knn", knn).add("n_dense_min", n_dense_min);
    t.add("num_starts", num_starts).add("walks", walks).add("p_halt", p_halt);
    t.add("keep_threshold", keep_threshold).add("retain_prob", retain_prob).add("anchors_per_start", anchors_per_start);
    t.add("learning_rate", learning_rate).add("batch_size", batch_size).add("epochs", epochs).add("eps", eps);
    t.add("val_split", val_split);
  }

  SurrogateSetup setup(std::uint64_t seed, std::size_t threads) const {
    SurrogateSetup s;
    s.tau = tau;
    s.walk = WalkConfig{p_halt, walks, derive_seed(seed, 11), 1e-15};
    s.data = DatasetConfig{keep_threshold, retain_prob, derive_seed(seed, 12), anchors_per_start};
    s.train = TrainConfig{learning_rate, batch_size, epochs, eps, val_split, derive_seed(seed, 13)};
    s.threads = threads;
    return s;
  }
};

struct MrfFactor {
  DenseMatrix phi;  // eval rows x n_rf
  std::size_t dataset_size = 0;
  double final_train_loss = kNaN;
  double seconds = 0.0;
};

// Surrogate trained on a kNN graph over `cloud` with starts among the first
// `start_pool` points; features for the first `eval_count` points.
inline MrfFactor build_mrf_factor(const PointCloud& cloud, std::size_t start_pool, std::size_t eval_count,
                                  const MeshMrfParams& p, std::uint64_t seed, std::size_t threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto knn = build_knn_graph(cloud, p.knn, Bandwidth::median(), threads);
  const auto starts = sample_without_replacement(start_pool, std::min(p.num_starts, start_pool), derive_seed(seed, 14));
  const SurrogateFit fit = fit_surrogate(cloud, knn.graph, starts, p.setup(seed, threads));
  const auto anchors = sample_without_replacement(cloud.size(), std::min(p.n_rf, cloud.size()), derive_seed(seed, 15));
  std::vector<NodeId> eval(eval_count);
  std::iota(eval.begin(), eval.end(), NodeId{0});
  MrfFactor out;
  out.phi = surrogate_features(fit.training.params, cloud, knn.graph, eval, anchors, threads);
  out.dataset_size = fit.dataset.size();
  if (!fit.training.history.empty()) out.final_train_loss = fit.training.history.back().train_loss;
  out.seconds = seconds_since(t0);
  return out;
}

// Dense affinity over mesh edges with the median bandwidth.
inline DenseMatrix mesh_affinity(const Mesh& mesh) {
  auto edges = mesh_edges(mesh);
  return gaussian_graph_from_pairs(mesh.vertices, std::move(edges), Bandwidth::median()).graph.to_dense();
}

struct NormalsParams {
  std::string mesh;  // OBJ path; empty selects the synthetic torus ladder
  std::vector<std::size_t> sizes{500, 1000, 2000, 4000};
  double major = 2.0, minor = 0.7;
  double mask = 0.8;
  std::string method = "both";
  double budget_fk = 900.0, budget_mrf = 900.0;
  bool warmup = true;
  MeshMrfParams mrf;

  static NormalsParams preset(Scale s) {
    NormalsParams p;
    if (s == Scale::paper) p.mrf.paper();
    return p;
  }

  void bind(ParamTable& t) {
    t.add("mesh", mesh).add("sizes", sizes).add("torus_R", major).add("torus_r", minor).add("mask", mask);
    t.add("method", method).add("budget_fk", budget_fk).add("budget_mrf", budget_mrf).add("warmup", warmup);
    mrf.bind(t);
  }
};

struct NormalsRow {
  std::size_t size = 0;  // requested ladder size (vertex count for a file mesh)
  std::size_t vertices = 0, faces = 0;
  std::string method;
  double cosine = kNaN;
  std::size_t zero_rows = 0;
  std::size_t dataset_size = 0;
};

struct NormalsResult {
  std::vector<NormalsRow> accuracy;
  std::vector<TimingRow> timing;
};

inline std::vector<std::string> method_list(const std::string& method) {
  if (method == "both") return {"fk", "mrf"};
  if (method == "fk" || method == "mrf") return {method};
  throw Error(ErrorCode::config, "method must be fk, mrf or both");
}

inline NormalsResult run_mesh_normals(const NormalsParams& p, const RunContext& ctx) {
  using clock = std::chrono::steady_clock;
  const auto methods = method_list(p.method);
  std::map<std::size_t, Mesh> meshes;
  std::vector<std::size_t> sizes;
  if (!p.mesh.empty()) {
    MeshLoadStats stats;
    Mesh m = load_mesh(p.mesh, {}, &stats);
    detail::log(ctx, "loaded " + p.mesh + ": |V|=" + std::to_string(stats.vertices) +
                         " |F|=" + std::to_string(stats.faces) + " dropped=" + std::to_string(stats.degenerate_dropped));
    sizes.push_back(m.num_vertices());
    meshes.emplace(m.num_vertices(), std::move(m));
  } else {
    sizes = p.sizes;
    std::sort(sizes.begin(), sizes.end());
    std::filesystem::create_directories(ctx.out_dir / "meshes");
    for (std::size_t s : sizes) {
      Mesh m = torus_mesh_with_vertices(s, p.major, p.minor);
      std::ofstream obj(ctx.out_dir / "meshes" / ("torus_" + std::to_string(s) + ".obj"));
      write_obj(obj, m);
      meshes.emplace(s, std::move(m));
    }
  }

  NormalsResult res;
  std::map<std::string, double> budgets{{"fk", p.budget_fk}, {"mrf", p.budget_mrf}};
  auto run = [&](const std::string& method, std::size_t size, bool warm) -> std::pair<double, double> {
    const Mesh& mesh = meshes.at(size);
    const std::uint64_t seed = derive_seed(ctx.seed, 100 + size);
    const VertexNormals truth = vertex_normals(mesh);
    const MaskedField masked = mask_field(truth.normals, p.mask, derive_seed(seed, 1));
    NormalsRow row;
    row.size = size;
    row.vertices = mesh.num_vertices();
    row.faces = mesh.num_faces();
    row.method = method;
    double pre = 0.0;
    KernelOperator op;
    if (method == "fk") {
      detail::log(ctx, "mesh-normals fk |V|=" + std::to_string(mesh.num_vertices()));
      const auto t0 = clock::now();
      op = KernelOperator::dense(full_heat_kernel(mesh_affinity(mesh), p.mrf.tau));
      pre = seconds_since(t0);
    } else {
      detail::log(ctx, "mesh-normals mrf |V|=" + std::to_string(mesh.num_vertices()));
      const auto t0 = clock::now();
      const std::size_t n_dense = std::max(mesh.num_vertices(), p.mrf.n_dense_min);
      const DensifiedCloud cloud = densify_mesh(mesh, n_dense, derive_seed(seed, 2));
      const MrfFactor factor =
          build_mrf_factor(cloud.points, mesh.num_vertices(), mesh.num_vertices(), p.mrf, seed, ctx.threads);
      op = KernelOperator::factored(factor.phi);
      pre = seconds_since(t0);
      row.dataset_size = factor.dataset_size;
    }
    const InterpolationReport rep = interpolate_normals(op, masked, truth.normals);
    row.cosine = rep.score;
    row.zero_rows = rep.zero_rows.size();
    if (!warm) res.accuracy.push_back(row);
    return {pre, rep.interpolate_seconds};
  };
  res.timing = timing_harness(methods, sizes, budgets, run, p.warmup);

  {
    auto out = open_output(ctx, "normals.csv");
    out << "size,vertices,faces,method,cosine,zero_rows,dataset_size\n";
    for (const auto& r : res.accuracy)
      out << r.size << ',' << r.vertices << ',' << r.faces << ',' << r.method << ',' << r.cosine << ',' << r.zero_rows
          << ',' << r.dataset_size << '\n';
  }
  {
    auto out = open_output(ctx, "timing.csv");
    write_timing_csv(out, res.timing);
  }
  {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : res.accuracy)
      j.push_back({{"size", r.size}, {"vertices", r.vertices}, {"method", r.method},
                   {"mean_cosine", detail::finite_or_null(r.cosine)}, {"zero_rows", r.zero_rows}});
    nlohmann::json t = nlohmann::json::array();
    for (const auto& r : res.timing)
      t.push_back({{"method", r.method}, {"size", r.size},
                   {"preprocess_seconds", detail::finite_or_null(r.preprocess_seconds)},
                   {"interpolate_seconds", detail::finite_or_null(r.interpolate_seconds)}, {"censored", r.censored}});
    auto out = open_output(ctx, "report.json");
    out << nlohmann::json{{"accuracy", j}, {"timing", t}}.dump(2) << '\n';
  }
  return res;
}

struct VelocityParams {
  std::size_t flag_nx = 40, flag_ny = 25;
  std::vector<std::size_t> n_dense{2000, 3000};
  double mask = 0.05;
  std::string method = "both";
  double budget_fk = 900.0, budget_mrf = 900.0;
  bool warmup = true;
  MeshMrfParams mrf;

  static VelocityParams preset(Scale s) {
    VelocityParams p;
    p.mrf.n_dense_min = 0;
    if (s == Scale::paper) {
      p.mrf.paper();
      p.n_dense = {5000, 10000, 20000};
    }
    return p;
  }

  void bind(ParamTable& t) {
    t.add("flag_nx", flag_nx).add("flag_ny", flag_ny).add("n_dense", n_dense).add("mask", mask);
    t.add("method", method).add("budget_fk", budget_fk).add("budget_mrf", budget_mrf).add("warmup", warmup);
    mrf.bind(t);
  }
};

struct VelocityRow {
  std::size_t n_dense = 0;
  std::string method;
  double masked_rel_error = kNaN;      // vs the exact velocity
  double agreement_rel_error = kNaN;   // MRF vs FK predictions on masked nodes
};

struct VelocityResult {
  std::vector<VelocityRow> accuracy;
  std::vector<TimingRow> timing;
};

inline VelocityResult run_mesh_velocity(const VelocityParams& p, const RunContext& ctx) {
  using clock = std::chrono::steady_clock;
  const auto methods = method_list(p.method);
  FlagParams fp;
  fp.nx = p.flag_nx;
  fp.ny = p.flag_ny;
  const Mesh flag = flag_mesh(fp);
  {
    std::filesystem::create_directories(ctx.out_dir);
    std::ofstream obj(ctx.out_dir / "flag.obj");
    write_obj(obj, flag);
  }
  std::vector<std::size_t> sizes = p.n_dense;
  std::sort(sizes.begin(), sizes.end());
  for (std::size_t s : sizes)
    require(s >= flag.num_vertices(), ErrorCode::config, "n_dense must be at least the flag vertex count");

  VelocityResult res;
  std::map<std::size_t, DenseMatrix> fk_predictions;
  std::map<std::string, double> budgets{{"fk", p.budget_fk}, {"mrf", p.budget_mrf}};
  auto run = [&](const std::string& method, std::size_t size, bool warm) -> std::pair<double, double> {
    const std::uint64_t seed = derive_seed(ctx.seed, 200 + size);
    const DensifiedCloud cloud = densify_mesh(flag, size, derive_seed(seed, 1));
    const DenseMatrix field = transfer_field(cloud, flag.velocities);
    const MaskedField masked = mask_field(field, p.mask, derive_seed(seed, 2));
    double pre = 0.0;
    KernelOperator op;
    detail::log(ctx, "mesh-velocity " + method + " n_dense=" + std::to_string(size));
    if (method == "fk") {
      const auto t0 = clock::now();
      const auto knn = build_knn_graph(cloud.points, p.mrf.knn, Bandwidth::median(), ctx.threads);
      op = KernelOperator::dense(full_heat_kernel(knn.graph.to_dense(), p.mrf.tau));
      pre = seconds_since(t0);
    } else {
      const auto t0 = clock::now();
      const MrfFactor factor = build_mrf_factor(cloud.points, cloud.points.size(), cloud.points.size(), p.mrf, seed,
                                                ctx.threads);
      op = KernelOperator::factored(factor.phi);
      pre = seconds_since(t0);
    }
    const InterpolationReport rep = interpolate_velocity_normalized(op, field, masked.mask);
    if (!warm) {
      VelocityRow row;
      row.n_dense = size;
      row.method = method;
      row.masked_rel_error = rep.score;
      if (method == "fk") fk_predictions[size] = rep.predictions;
      const auto it = fk_predictions.find(size);
      if (method == "mrf" && it != fk_predictions.end())
        row.agreement_rel_error = masked_relative_error(rep.predictions, it->second, masked.masked);
      res.accuracy.push_back(row);
    }
    return {pre, rep.interpolate_seconds};
  };
  res.timing = timing_harness(methods, sizes, budgets, run, p.warmup);

  {
    auto out = open_output(ctx, "velocity.csv");
    out << "n_dense,method,masked_rel_error,mrf_vs_fk_rel_error\n";
    for (const auto& r : res.accuracy)
      out << r.n_dense << ',' << r.method << ',' << r.masked_rel_error << ',' << r.agreement_rel_error << '\n';
  }
  {
    auto out = open_output(ctx, "timing.csv");
    write_timing_csv(out, res.timing);
  }
  {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : res.accuracy)
      j.push_back({{"n_dense", r.n_dense}, {"method", r.method},
                   {"masked_rel_error", detail::finite_or_null(r.masked_rel_error)},
                   {"mrf_vs_fk_rel_error", detail::finite_or_null(r.agreement_rel_error)}});
    nlohmann::json t = nlohmann::json::array();
    for (const auto& r : res.timing)
      t.push_back({{"method", r.method}, {"size", r.size},
                   {"preprocess_seconds", detail::finite_or_null(r.preprocess_seconds)},
                   {"interpolate_seconds", detail::finite_or_null(r.interpolate_seconds)}, {"censored", r.censored}});
    auto out = open_output(ctx, "report.json");
    out << nlohmann::json{{"accuracy", j}, {"timing", t}}.dump(2) << '\n';
  }
  return res;
}

// ===========================================================================
// Oracle self-check

struct SelfcheckParams {
  void bind(ParamTable&) {}
  static SelfcheckParams preset(Scale) { return {}; }
};

inline std::vector<CheckResult> run_selfcheck(const SelfcheckParams&, const RunContext& ctx) {
  const auto checks = run_selfchecks(ctx.seed);
  auto csv = open_output(ctx, "selfcheck.csv");
  csv << "check,value,tolerance,relation,pass\n";
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : checks) {
    csv << c.name << ',' << c.value << ',' << c.tolerance << ',' << c.relation << ',' << (c.pass ? 1 : 0) << '\n';
    j.push_back({{"check", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"relation", c.relation},
                 {"pass", c.pass}});
  }
  auto out = open_output(ctx, "selfcheck.json");
  out << j.dump(2) << '\n';
  return checks;
}

// ===========================================================================
// Signature dump

struct GrfDumpParams {
  std::string graph;  // text graph path; empty builds one from `source`
  std::string source = "grid";  // grid | sphere | ellipsoid | mobius | torus
  std::size_t grid_side = 5, grid_dim = 2;
  std::size_t n_points = 200;
  std::size_t knn = 8;
  double t = 1.0;
  double p_halt = 0.1;
  std::size_t walks = 1000;
  std::string starts;  // comma list; empty = all nodes

  static GrfDumpParams preset(Scale) { return {}; }

  void bind(ParamTable& tb) {
    tb.add("graph", graph).add("source", source).add("grid_side", grid_side).add("grid_dim", grid_dim);
    tb.add("n_points", n_points).add("knn", knn).add("t", t).add("p_halt", p_halt).add("walks", walks);
    tb.add("starts", starts);
  }
};

inline std::vector<SignatureVector> run_grf_dump(const GrfDumpParams& p, const RunContext& ctx) {
  WeightedGraph graph;
  if (!p.graph.empty()) {
    std::ifstream in(p.graph);
    require(static_cast<bool>(in), ErrorCode::io, "cannot open graph '" + p.graph + "'");
    graph = read_graph(in);
  } else if (p.source == "grid") {
    graph = GridGraph(p.grid_side, p.grid_dim).graph();
  } else {
    SurfaceSpec spec;
    spec.kind = parse_surface_kind(p.source);
    const PointCloud pts = sample_surface(spec, p.n_points);
    graph = build_knn_graph(pts, p.knn, Bandwidth::median(), ctx.threads).graph;
    auto pc = open_output(ctx, "points.csv");
    write_point_cloud_csv(pc, pts);
  }
  {
    auto g = open_output(ctx, "graph.txt");
    write_graph(g, graph);
  }
  std::vector<NodeId> starts;
  if (p.starts.empty()) {
    starts.resize(graph.num_nodes());
    std::iota(starts.begin(), starts.end(), NodeId{0});
  } else {
    for (auto s : detail::parse_list<std::size_t>("starts", p.starts)) starts.push_back(static_cast<NodeId>(s));
  }
  const WalkConfig walk{p.p_halt, p.walks, ctx.seed, 1e-15};
  const auto sigs = run_grf(graph, heat_modulation(p.t), walk, starts, ctx.threads);
  auto out = open_output(ctx, "signatures.csv");
  write_signatures_csv(out, sigs);
  return sigs;
}

}  // namespace mrf
