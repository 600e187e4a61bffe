// mrf: experiment driver.
//
// Exit status: 0 on success, 1 when an experiment with a declared tolerance
// fails it, 2 on errors (bad config, IO, numerical failures).

#include "mrf/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string scale = "desk";
  std::string out_dir = "out";
  std::string config;
  bool quiet = false;
};

// Per-subcommand flags that map onto config keys, plus generic --set key=value.
struct Overrides {
  std::map<std::string, std::string> flags;
  std::vector<std::string> sets;

  void flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(name, [this, key](const std::string& v) { flags[key] = v; }, help);
  }

  void apply(mrf::ParamTable& table) const {
    for (const auto& [k, v] : flags) table.set(k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      mrf::require(eq != std::string::npos, mrf::ErrorCode::config, "--set expects key=value, got '" + s + "'");
      table.set(mrf::detail::trim(s.substr(0, eq)), mrf::detail::trim(s.substr(eq + 1)));
    }
  }
};

mrf::RunContext context(const Globals& g) {
  mrf::RunContext ctx;
  ctx.seed = g.seed;
  ctx.threads = mrf::resolve_threads(g.threads);
  ctx.scale = mrf::parse_scale(g.scale);
  ctx.out_dir = g.out_dir;
  ctx.quiet = g.quiet;
  return ctx;
}

// Preset for the scale, then config file, then flags, then --set.
template <typename Params, typename Body>
int run_command(const std::string& name, const Globals& g, const Overrides& o, Body&& body) {
  const mrf::RunContext ctx = context(g);
  Params p = Params::preset(ctx.scale);
  mrf::ParamTable table;
  p.bind(table);
  if (!g.config.empty()) table.apply(mrf::read_config_file(g.config));
  o.apply(table);
  mrf::write_manifest(ctx, name, table.to_json());
  return body(p, ctx);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold and graph random features: experiments and oracles"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master RNG seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)")->capture_default_str();
  app.add_option("--scale", g.scale, "Parameter preset")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--config", g.config, "key=value config file");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");
  app.set_version_flag("--version", std::string(mrf::kVersion));

  std::map<std::string, Overrides> over;
  std::function<int()> action;
  auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--set", over[name].sets, "Override any config key (key=value, repeatable)");
    return s;
  };

  // gaussian-convergence
  {
    CLI::App* s = sub("gaussian-convergence", "Grid GRF estimates of the Gaussian kernel across resolutions");
    auto& o = over["gaussian-convergence"];
    o.flag(s, "--p-halt", "p_halt", "Walk halting probability");
    o.flag(s, "--walks", "walks", "Walks per node");
    o.flag(s, "--sigma", "sigma", "Gaussian bandwidth");
    o.flag(s, "--dim", "d", "Grid dimension");
    o.flag(s, "--n-ladder", "n_ladder", "Comma list of grid sides");
    o.flag(s, "--reps", "reps", "Independent repetitions");
    o.flag(s, "--kmax", "kmax", "Periodization image count");
    s->callback([&] {
      action = [&] {
        return run_command<mrf::GaussianConvergenceParams>(
            "gaussian-convergence", g, over["gaussian-convergence"], [](const auto& p, const auto& ctx) {
              const auto rows = mrf::run_gaussian_convergence(p, ctx);
              bool ok = true;
              for (std::size_t i = 1; i < rows.size(); ++i)
                ok = ok && rows[i].field_rel_mse < rows[i - 1].field_rel_mse &&
                     rows[i].kernel_rel_mse < rows[i - 1].kernel_rel_mse;
              if (!ok) std::cerr << "gaussian-convergence: relative MSE is not strictly decreasing in n\n";
              return ok ? 0 : 1;
            });
      };
    });
  }

  // manifold-surrogate
  {
    CLI::App* s = sub("manifold-surrogate", "Train the surrogate on a sampled surface and score its kernel");
    auto& o = over["manifold-surrogate"];
    o.flag(s, "--surface", "surface", "sphere | ellipsoid | mobius | torus");
    o.flag(s, "--n-points", "n_points", "Discretization size");
    o.flag(s, "--p-halt", "p_halt", "Walk halting probability");
    o.flag(s, "--walks", "walks", "Walks per start node");
    o.flag(s, "--tau", "tau", "Heat time on W_f");
    o.flag(s, "--epochs", "epochs", "Training epochs");
    o.flag(s, "--num-starts", "num_starts", "Start nodes");
    o.flag(s, "--t", "t_analytical", "Analytic sphere heat time");
    o.flag(s, "--lmax", "lmax", "Legendre truncation");
    s->callback([&] {
      action = [&] {
        return run_command<mrf::ManifoldParams>("manifold-surrogate", g, over["manifold-surrogate"],
                                                [](const auto& p, const auto& ctx) {
                                                  const auto r = mrf::run_manifold_surrogate(p, ctx);
                                                  std::cout << "R2=" << r.metrics.r2 << '\n';
                                                  return 0;
                                                });
      };
    });
  }

  // mesh-normals
  {
    CLI::App* s = sub("mesh-normals", "Masked vertex-normal interpolation: full kernel vs MRF features");
    auto& o = over["mesh-normals"];
    o.flag(s, "--mesh", "mesh", "OBJ mesh (default: synthetic torus ladder)");
    o.flag(s, "--sizes", "sizes", "Comma list of synthetic vertex counts");
    o.flag(s, "--mask-frac", "mask", "Fraction of vertices hidden");
    o.flag(s, "--tau", "tau", "Heat time on W_f");
    o.flag(s, "--method", "method", "fk | mrf | both");
    o.flag(s, "--n-dense", "n_dense_min", "Minimum densified point count");
    s->callback([&] {
      action = [&] {
        return run_command<mrf::NormalsParams>("mesh-normals", g, over["mesh-normals"],
                                               [](const auto& p, const auto& ctx) {
                                                 (void)mrf::run_mesh_normals(p, ctx);
                                                 return 0;
                                               });
      };
    });
  }

  // mesh-velocity
  {
    CLI::App* s = sub("mesh-velocity", "Normalized velocity interpolation on a densified flag");
    auto& o = over["mesh-velocity"];
    o.flag(s, "--n-dense", "n_dense", "Comma list of densified sizes");
    o.flag(s, "--mask-frac", "mask", "Fraction of points hidden");
    o.flag(s, "--tau", "tau", "Heat time on W_f");
    o.flag(s, "--method", "method", "fk | mrf | both");
    s->callback([&] {
      action = [&] {
        return run_command<mrf::VelocityParams>("mesh-velocity", g, over["mesh-velocity"],
                                                [](const auto& p, const auto& ctx) {
                                                  (void)mrf::run_mesh_velocity(p, ctx);
                                                  return 0;
                                                });
      };
    });
  }

  // selfcheck
  {
    sub("selfcheck", "Numerical checks of the continuum limits and identities")->callback([&] {
      action = [&] {
        return run_command<mrf::SelfcheckParams>("selfcheck", g, over["selfcheck"],
                                                 [](const auto& p, const auto& ctx) {
                                                   bool ok = true;
                                                   for (const auto& c : mrf::run_selfcheck(p, ctx)) {
                                                     std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ' '
                                                               << c.value << ' ' << c.relation << ' ' << c.tolerance
                                                               << '\n';
                                                     ok = ok && c.pass;
                                                   }
                                                   return ok ? 0 : 1;
                                                 });
      };
    });
  }

  // grf-dump
  {
    CLI::App* s = sub("grf-dump", "Write GRF signature vectors as CSV");
    auto& o = over["grf-dump"];
    o.flag(s, "--graph", "graph", "Text graph file (N M, then i j w)");
    o.flag(s, "--source", "source", "grid | sphere | ellipsoid | mobius | torus when no graph is given");
    o.flag(s, "--p-halt", "p_halt", "Walk halting probability");
    o.flag(s, "--walks", "walks", "Walks per start node");
    o.flag(s, "--t", "t", "Heat coefficient time");
    o.flag(s, "--starts", "starts", "Comma list of start nodes");
    o.flag(s, "--n-points", "n_points", "Surface sample size");
    s->callback([&] {
      action = [&] {
        return run_command<mrf::GrfDumpParams>("grf-dump", g, over["grf-dump"], [](const auto& p, const auto& ctx) {
          (void)mrf::run_grf_dump(p, ctx);
          return 0;
        });
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    return action ? action() : 2;
  } catch (const mrf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
