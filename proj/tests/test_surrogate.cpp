#include "mrf/config.hpp"
#include "mrf/manifolds.hpp"
#include "mrf/pipeline.hpp"
#include "mrf/surrogate.hpp"
#include "test_util.hpp"

#include <cmath>
#include <sstream>

using namespace mrf;

namespace {

Dataset random_dataset(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingTriple> triples;
  for (std::size_t i = 0; i < rows; ++i)
    triples.push_back({{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}, u(rng), 0.05 + u(rng)});
  return Dataset::from_triples(triples);
}

struct LineFixture {
  PointCloud points;
  std::vector<SignatureVector> sigs;
  std::vector<std::vector<double>> geo;
};

// three collinear nodes; start 0 sees targets (1.0, 0.5, 0.01), start 2 sees (0.2, 0.3, 0.9)
LineFixture line_fixture() {
  DenseMatrix m(3, 1);
  m << 0.0, 1.0, 2.0;
  LineFixture f{PointCloud(m), {}, {}};
  f.sigs.push_back({0, 3, {{0, 1.0}, {1, 0.5}, {2, 0.01}}});
  f.sigs.push_back({2, 3, {{0, 0.2}, {1, 0.3}, {2, 0.9}}});
  f.geo = {{0.0, 1.0, 2.0}, {2.0, 1.0, 0.0}};
  return f;
}

}  // namespace

TEST(Dataset, KeepsAllWhenRetainProbIsOne) {
  const auto f = line_fixture();
  const auto ds = build_dataset(f.sigs, f.points, f.geo, {0.1, 1.0, 3, 0});
  EXPECT_EQ(ds.size(), 6u);
  EXPECT_EQ(ds.input_dim(), 3u);
  const auto t = ds.triple(5);
  EXPECT_DOUBLE_EQ(t.x[0], 2.0);
  EXPECT_DOUBLE_EQ(t.omega[0], 2.0);
  EXPECT_DOUBLE_EQ(t.geodesic, 0.0);
  EXPECT_DOUBLE_EQ(t.target, 0.9);
}

TEST(Dataset, ThresholdAlwaysKept) {
  const auto f = line_fixture();
  const auto ds = build_dataset(f.sigs, f.points, f.geo, {0.1, 0.0, 3, 0});
  EXPECT_EQ(ds.size(), 5u);
  for (Eigen::Index i = 0; i < ds.targets.size(); ++i) EXPECT_GE(ds.targets(i), 0.1);
}

TEST(Dataset, SizeIndependentOfSeedAboveThreshold) {
  const auto f = line_fixture();
  const auto a = build_dataset(f.sigs, f.points, f.geo, {0.005, 0.025, 1, 0});
  const auto b = build_dataset(f.sigs, f.points, f.geo, {0.005, 0.025, 99, 0});
  EXPECT_EQ(a.size(), 6u);
  EXPECT_EQ(b.size(), 6u);
}

TEST(Dataset, RetainProbabilityIsHonoured) {
  const std::size_t n = 20000;
  DenseMatrix m(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
  SignatureVector sig{0, n, {{0, 1.0}}};
  std::vector<SignatureVector> sigs{sig};
  std::vector<std::vector<double>> geo{std::vector<double>(n, 1.0)};
  const auto ds = build_dataset(sigs, PointCloud(m), geo, {0.1, 0.025, 4, 0});
  const double frac = static_cast<double>(ds.size() - 1) / static_cast<double>(n - 1);
  EXPECT_NEAR(frac, 0.025, 3.0 * std::sqrt(0.025 * 0.975 / static_cast<double>(n - 1)));
}

TEST(Dataset, EmptyAndMissingGeodesic) {
  auto f = line_fixture();
  EXPECT_MRF_ERROR(build_dataset(f.sigs, f.points, f.geo, {5.0, 0.0, 1, 0}), ErrorCode::dataset_empty);
  f.geo[0][1] = std::numeric_limits<double>::infinity();
  EXPECT_MRF_ERROR(build_dataset(f.sigs, f.points, f.geo, {0.1, 1.0, 1, 0}), ErrorCode::invalid_argument);
}

TEST(Mlp, ZeroParamsGiveZero) {
  const auto p = SurrogateParams::zeros(7);
  const double x[3] = {1, 2, 3}, w[3] = {-1, 0, 4};
  EXPECT_EQ(mlp_forward(p, x, w, 2.0, ForwardMode::train), 0.0);
  EXPECT_EQ(mlp_forward(p, x, w, 2.0, ForwardMode::inference), 0.0);
}

TEST(Mlp, InferenceClampsNegativeOutput) {
  auto p = SurrogateParams::zeros(7);
  const double x[3] = {0, 0, 0};
  p.b3(0) = -0.5;
  EXPECT_DOUBLE_EQ(mlp_forward(p, x, x, 0.0, ForwardMode::train), -0.5);
  EXPECT_EQ(mlp_forward(p, x, x, 0.0, ForwardMode::inference), 0.0);
  p.b3(0) = 0.7;
  EXPECT_DOUBLE_EQ(mlp_forward(p, x, x, 0.0, ForwardMode::train), 0.7);
  EXPECT_DOUBLE_EQ(mlp_forward(p, x, x, 0.0, ForwardMode::inference), 0.7);
}

TEST(Mlp, DimensionMismatch) {
  const auto p = SurrogateParams::zeros(7);
  const double x[2] = {0, 0};
  EXPECT_MRF_ERROR(mlp_forward(p, x, x, 0.0, ForwardMode::train), ErrorCode::dimension_mismatch);
}

TEST(Loss, Examples) {
  EXPECT_EQ(clamped_relative_loss(0.3, 0.3, 0.1), 0.0);
  EXPECT_NEAR(clamped_relative_loss(0.15, 0.05, 0.1), 1.0, 1e-15);
  EXPECT_NEAR(clamped_relative_loss(0.9, 1.0, 0.1), 0.1, 1e-15);
}

TEST(Training, GradientMatchesFiniteDifferences) {
  const auto ds = random_dataset(10, 1);
  auto p = initial_params(ds, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1(i) = u(rng);
  for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2(i) = u(rng);
  const auto check = gradient_check(p, ds, 0.1);
  EXPECT_LT(check.worst(), 1e-4) << check.w1 << ' ' << check.b1 << ' ' << check.w2 << ' ' << check.b2 << ' '
                                 << check.w3 << ' ' << check.b3;
}

TEST(Training, MemorizesRepeatedTriple) {
  std::vector<TrainingTriple> triples(64, TrainingTriple{{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, 0.7, 0.8});
  const auto ds = Dataset::from_triples(triples);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-4;
  cfg.epochs = 200;
  cfg.val_split = 0.0;
  cfg.rng_seed = 4;
  const auto r = train(ds, cfg);
  ASSERT_EQ(r.history.size(), 200u);
  EXPECT_LT(r.history.back().train_loss, 1e-3);
}

TEST(Training, ZeroEpochsReturnInitialization) {
  const auto ds = random_dataset(20, 5);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.val_split = 0.25;
  cfg.rng_seed = 6;
  const auto r = train(ds, cfg);
  EXPECT_TRUE(r.history.empty());
  std::mt19937_64 rng(6);
  const auto [train_rows, val_rows] = split_rows(ds.size(), 0.25, rng);
  EXPECT_EQ(val_rows.size(), 5u);
  EXPECT_TRUE(r.params == initial_params(ds.subset(train_rows), rng()));
}

TEST(Training, DeterministicHistory) {
  const auto ds = random_dataset(200, 7);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.rng_seed = 8;
  const auto a = train(ds, cfg), b = train(ds, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
  }
  EXPECT_TRUE(a.params == b.params);
}

TEST(Training, InvalidConfig) {
  const auto ds = random_dataset(4, 9);
  TrainConfig cfg;
  cfg.val_split = 1.0;
  EXPECT_MRF_ERROR(train(ds, cfg), ErrorCode::invalid_argument);
}

TEST(Features, ZeroParamsGiveZeroMatrix) {
  DenseMatrix m(4, 3);
  m << 0, 0, 1, 0, 1, 0, 1, 0, 0, 0, 0, -1;
  const PointCloud pts(m);
  const auto phi = predict_feature_matrix(SurrogateParams::zeros(7), pts, pts, DenseMatrix::Ones(4, 4));
  EXPECT_EQ(phi.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Features, NonNegativeGram) {
  const auto ds = random_dataset(30, 10);
  const auto p = initial_params(ds, 11);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DenseMatrix a(12, 3), b(256, 3), geo(12, 256);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < geo.size(); ++i) geo.data()[i] = u(rng);
  const DenseMatrix phi = predict_feature_matrix(p, PointCloud(a), PointCloud(b), geo);
  EXPECT_GE(phi.minCoeff(), 0.0);
  const DenseMatrix gram = phi * phi.transpose();
  EXPECT_GE(gram.minCoeff(), 0.0);
  geo(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_MRF_ERROR(predict_feature_matrix(p, PointCloud(a), PointCloud(b), geo), ErrorCode::invalid_argument);
}

TEST(Params, TextRoundTrip) {
  const auto p = initial_params(random_dataset(15, 13), 14);
  std::stringstream ss;
  write_params(ss, p);
  EXPECT_TRUE(read_params(ss) == p);
  std::stringstream bad("nonsense 1 2 3");
  EXPECT_MRF_ERROR(read_params(bad), ErrorCode::parse);
}

TEST(Pipeline, SphereTrainingLossDecreases) {
  const PointCloud pts = sample_surface(SurfaceSpec::sphere(), 300);
  const auto g = build_knn_graph(pts, 8, Bandwidth::median());
  const auto starts = sample_without_replacement(pts.size(), 30, 15);
  SurrogateSetup setup;
  setup.walk = {0.01, 500, 16, 1e-15};
  setup.data = {0.1, 0.025, 17, 0};
  setup.train.batch_size = 256;
  setup.train.epochs = 200;
  setup.train.rng_seed = 18;
  const auto fit = fit_surrogate(pts, g.graph, starts, setup);
  ASSERT_EQ(fit.training.history.size(), 200u);
  auto ema = [&](std::size_t upto) {
    double e = fit.training.history[0].train_loss;
    for (std::size_t i = 1; i < upto; ++i) e = 0.9 * e + 0.1 * fit.training.history[i].train_loss;
    return e;
  };
  EXPECT_LT(ema(200), ema(1));
  const auto anchors = sample_without_replacement(pts.size(), 64, 19);
  const DenseMatrix phi = surrogate_features(fit.training.params, pts, g.graph, starts, anchors);
  EXPECT_GE(phi.minCoeff(), 0.0);
}

TEST(Pipeline, SampleWithoutReplacement) {
  const auto ids = sample_without_replacement(50, 20, 1);
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
  EXPECT_EQ(ids, sample_without_replacement(50, 20, 1));
  EXPECT_MRF_ERROR(sample_without_replacement(3, 4, 1), ErrorCode::invalid_argument);
}

TEST(Pipeline, AttachPointsToNearestNode) {
  DenseMatrix m(3, 2), q(2, 2);
  m << 0, 0, 1, 0, 2, 0;
  q << 0.9, 0.1, 2.0, -0.5;
  const auto a = attach_points(PointCloud(m), q);
  EXPECT_EQ(a.nearest[0], 1u);
  EXPECT_EQ(a.nearest[1], 2u);
  EXPECT_NEAR(a.offset[0], std::sqrt(0.02), 1e-15);
  EXPECT_NEAR(a.offset[1], 0.5, 1e-15);
}
