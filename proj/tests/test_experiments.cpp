#include "mrf/experiments.hpp"
#include "test_util.hpp"

#include <cstdlib>
#include <json.hpp>
#include <sstream>

using namespace mrf;
using mrf::testing::read_file;
using mrf::testing::temp_dir;

namespace {

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string(MRF_CLI_PATH) + " --quiet " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesKeyValueLines) {
  std::istringstream in("# comment\n walks = 10 \n\nsigma=0.3 # trailing\nn_ladder = 5, 9\n");
  const auto kv = parse_config(in);
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"walks", "10"}));
  GaussianConvergenceParams p;
  ParamTable t;
  p.bind(t);
  t.apply(kv);
  EXPECT_EQ(p.walks, 10u);
  EXPECT_DOUBLE_EQ(p.sigma, 0.3);
  EXPECT_EQ(p.n_ladder, (std::vector<std::size_t>{5, 9}));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  GaussianConvergenceParams p;
  ParamTable t;
  p.bind(t);
  EXPECT_MRF_ERROR(t.set("no_such_key", "1"), ErrorCode::config);
  EXPECT_MRF_ERROR(t.set("walks", "ten"), ErrorCode::config);
  EXPECT_MRF_ERROR(t.set("sigma", "0.2x"), ErrorCode::config);
  EXPECT_MRF_ERROR(t.set("n_ladder", ","), ErrorCode::config);
  std::istringstream bad("walks 10\n");
  EXPECT_MRF_ERROR(parse_config(bad), ErrorCode::config);
  EXPECT_MRF_ERROR(read_config_file("/nonexistent/config.txt"), ErrorCode::io);
}

TEST(Config, ScalesAndSeeds) {
  EXPECT_EQ(parse_scale("paper"), Scale::paper);
  EXPECT_MRF_ERROR(parse_scale("huge"), ErrorCode::config);
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(Presets, PaperPresetValues) {
  const auto g = GaussianConvergenceParams::preset(Scale::paper);
  EXPECT_EQ(g.walks, 100000u);
  EXPECT_EQ(g.reps, 30u);
  EXPECT_DOUBLE_EQ(g.p_halt, 0.005);
  EXPECT_EQ(g.n_ladder.front(), 5u);
  EXPECT_EQ(g.n_ladder.back(), 105u);
  const auto m = ManifoldParams::preset(Scale::paper);
  EXPECT_EQ(m.n_points, 4000u);
  EXPECT_EQ(m.num_starts, 1000u);
  EXPECT_EQ(m.epochs, 1000u);
  EXPECT_EQ(m.batch_size, 32768u);
  EXPECT_DOUBLE_EQ(m.tau, 20.0);
  EXPECT_EQ(m.n_rf, 256u);
}

TEST(Slope, PowerLaw) {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 24, 192, 1536};
  EXPECT_NEAR(loglog_slope(x, y), 3.0, 1e-12);
}

TEST(TimingHarness, WarmupAndCensoring) {
  std::vector<std::pair<std::string, std::size_t>> calls;
  const std::vector<std::size_t> sizes{10, 20, 40};
  const auto rows = timing_harness(
      {"fk", "mrf"}, sizes, {{"fk", 1.0}},
      [&](const std::string& m, std::size_t s, bool warm) {
        if (!warm) calls.emplace_back(m, s);
        const double t = m == "fk" ? static_cast<double>(s) / 20.0 : 0.1;
        return std::pair{t, 0.0};
      });
  ASSERT_EQ(rows.size(), 6u);
  // fk at 20 takes 1.0 s (not over), at 40 takes 2.0 s (over budget, flagged)
  EXPECT_FALSE(rows[2].censored);
  EXPECT_TRUE(rows[4].censored);
  EXPECT_DOUBLE_EQ(rows[4].preprocess_seconds, 2.0);
  EXPECT_FALSE(rows[5].censored);
  EXPECT_EQ(calls.size(), 6u);
  std::ostringstream out;
  write_timing_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "method,size,preprocess_seconds,interpolate_seconds,censored");
}

TEST(TimingHarness, LargerSizesCensoredAfterBudget) {
  const std::vector<std::size_t> sizes{1, 2, 3};
  int runs = 0;
  const auto rows = timing_harness(
      {"fk"}, sizes, {{"fk", 0.5}},
      [&](const std::string&, std::size_t, bool) {
        ++runs;
        return std::pair{1.0, 0.0};
      },
      false);
  EXPECT_EQ(runs, 1);
  for (const auto& r : rows) EXPECT_TRUE(r.censored);
  EXPECT_TRUE(std::isnan(rows[2].preprocess_seconds));
}

TEST(GaussianConvergence, BudgetGuard) {
  auto p = GaussianConvergenceParams::preset(Scale::desk);
  p.max_walk_steps = 10.0;
  RunContext ctx;
  ctx.quiet = true;
  ctx.out_dir = temp_dir("budget");
  EXPECT_MRF_ERROR(run_gaussian_convergence(p, ctx), ErrorCode::budget);
}

TEST(Cli, GrfDumpFromGraphFile) {
  const auto dir = temp_dir("cli_dump");
  {
    std::ofstream g(dir / "in.txt");
    g << "3 2\n0 1 0.5\n1 2 0.5\n";
  }
  ASSERT_EQ(run_cli("grf-dump --graph " + (dir / "in.txt").string() + " --walks 50 --starts 0,2 --out-dir " +
                        (dir / "out").string(),
                    dir / "log"),
            0)
      << read_file(dir / "log");
  std::ifstream in(dir / "out" / "signatures.csv");
  const auto sigs = read_signatures_csv(in, 3);
  ASSERT_EQ(sigs.size(), 2u);
  EXPECT_EQ(sigs[0].start_node, 0u);
  EXPECT_EQ(sigs[1].start_node, 2u);
  EXPECT_GE(sigs[0].at(0), 1.0);
  const auto manifest = nlohmann::json::parse(read_file(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["experiment"], "grf-dump");
  EXPECT_EQ(manifest["config"]["walks"], 50);
}

TEST(Cli, UnknownConfigKeyExitsWithError) {
  const auto dir = temp_dir("cli_badcfg");
  {
    std::ofstream c(dir / "cfg.txt");
    c << "walks = 10\nbogus = 3\n";
  }
  EXPECT_EQ(run_cli("grf-dump --config " + (dir / "cfg.txt").string() + " --out-dir " + (dir / "out").string(),
                    dir / "log"),
            2);
  EXPECT_NE(read_file(dir / "log").find("unknown config key 'bogus'"), std::string::npos);
}

TEST(Cli, ConfigFileAndSetOverride) {
  const auto dir = temp_dir("cli_cfg");
  {
    std::ofstream c(dir / "cfg.txt");
    c << "walks = 10\ngrid_side = 4\n";
  }
  ASSERT_EQ(run_cli("grf-dump --config " + (dir / "cfg.txt").string() + " --set walks=7 --out-dir " +
                        (dir / "out").string(),
                    dir / "log"),
            0);
  const auto manifest = nlohmann::json::parse(read_file(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["walks"], 7);
  EXPECT_EQ(manifest["config"]["grid_side"], 4);
}

TEST(Cli, BadUsage) {
  const auto dir = temp_dir("cli_usage");
  EXPECT_NE(run_cli("", dir / "log"), 0);
  EXPECT_EQ(run_cli("grf-dump --scale huge", dir / "log"), 2);
  EXPECT_EQ(run_cli("grf-dump --graph /nonexistent/g.txt --out-dir " + (dir / "o").string(), dir / "log"), 2);
}

TEST(Cli, GaussianConvergenceSmall) {
  const auto dir = temp_dir("cli_gauss");
  ASSERT_EQ(run_cli("gaussian-convergence --n-ladder 5,9 --walks 2000 --reps 2 --p-halt 0.05 --out-dir " +
                        (dir / "out").string(),
                    dir / "log"),
            0)
      << read_file(dir / "log");
  const auto csv = read_file(dir / "out" / "gaussian_convergence.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "n,d,num_nodes,walks,reps,c,field_rel_mse,field_rel_mse_sd,kernel_rel_mse,kernel_rel_mse_sd,"
            "kernel_exact_rel_err");
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "fields.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "oracle_dimensions.csv"));
}

TEST(Cli, ManifoldSurrogateSmallIsDeterministic) {
  const auto dir = temp_dir("cli_manifold");
  const std::string args =
      "manifold-surrogate --surface torus --n-points 200 --walks 300 --num-starts 20 --epochs 5 --set num_val=20 "
      "--set out_of_sample=16 --set n_rf=32 --seed 3 --threads 1 --out-dir ";
  ASSERT_EQ(run_cli(args + (dir / "a").string(), dir / "log"), 0) << read_file(dir / "log");
  ASSERT_EQ(run_cli(args + (dir / "b").string(), dir / "log"), 0) << read_file(dir / "log");
  for (const char* f : {"metrics.csv", "loss_history.csv", "params.txt", "fields.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  }
}

TEST(Cli, MeshVelocitySmall) {
  const auto dir = temp_dir("cli_velocity");
  ASSERT_EQ(run_cli("mesh-velocity --n-dense 1200 --method fk --out-dir " + (dir / "out").string(), dir / "log"), 0)
      << read_file(dir / "log");
  const auto csv = read_file(dir / "out" / "velocity.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n_dense,method,masked_rel_error,mrf_vs_fk_rel_error");
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "flag.obj"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "report.json"));
}

TEST(Cli, MeshNormalsFromObj) {
  const auto dir = temp_dir("cli_normals");
  {
    std::ofstream m(dir / "torus.obj");
    write_obj(m, torus_mesh(24, 10));
  }
  ASSERT_EQ(run_cli("mesh-normals --mesh " + (dir / "torus.obj").string() + " --method fk --out-dir " +
                        (dir / "out").string(),
                    dir / "log"),
            0)
      << read_file(dir / "log");
  std::ifstream in(dir / "out" / "normals.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "size,vertices,faces,method,cosine,zero_rows,dataset_size");
  EXPECT_EQ(row.substr(0, row.find(',', row.find(',') + 1)), "240,240");
}
