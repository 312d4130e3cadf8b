#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "feature_oracle.hpp"
#include "mlsq/error.hpp"
#include "mlsq/features.hpp"
#include "test_util.hpp"

using namespace mlsq;
using mlsq::fixtures::random_cloud;

namespace {

PointCloud noisy_wall(std::size_t n, std::uint64_t seed) {
  // Vertical plane y = 0.3 x with millimetre jitter across it.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::normal_distribution<double> g(0.0, 0.002);
  PointCloud cloud;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = u(rng), z = u(rng), off = g(rng);
    cloud.points.push_back({s - 0.3 * off, 0.3 * s + off, z});
  }
  return cloud;
}

PointCloud gaussian_blob(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  PointCloud cloud;
  for (std::size_t i = 0; i < n; ++i) cloud.points.push_back({g(rng), g(rng), g(rng)});
  return cloud;
}

void expect_features_near(const FeatureVector& got, const std::array<double, kFeatureCount>& want, double rel) {
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    EXPECT_NEAR(got[f], want[f], rel * std::max(1.0, std::abs(want[f]))) << kFeatureNames[f];
  }
}

}  // namespace

TEST(Eigen, CollinearPointsHaveOneNonZeroEigenvalue) {
  std::vector<Point3> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({1.0 * i, 2.0 * i, -0.5 * i});
  const auto e = eigen_decompose(pts);
  EXPECT_GT(e.values[0], 0.0);
  EXPECT_EQ(e.values[1], 0.0);
  EXPECT_EQ(e.values[2], 0.0);
}

TEST(Eigen, PlaneNormalIsTheSmallestDirection) {
  std::vector<Point3> pts;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) pts.push_back({0.1 * i, 0.2 * j, 3.0});
  const auto e = eigen_decompose(pts);
  EXPECT_EQ(e.values[2], 0.0);
  EXPECT_NEAR(std::abs(e.normal[2]), 1.0, 1e-12);
}

TEST(Eigen, MatchesClosedFormSolution) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PointCloud cloud = random_cloud(30, 100 + seed, 3.0);
    const auto e = eigen_decompose(cloud.points);
    const auto want = oracle::eigenvalues(oracle::covariance(cloud.points));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.values[i], want[i], 1e-12 * want[0]);
    // A * n = lambda3 * n
    const auto c = oracle::covariance(cloud.points);
    const auto& n = e.normal;
    EXPECT_NEAR(c.xx * n[0] + c.xy * n[1] + c.xz * n[2], e.values[2] * n[0], 1e-12);
    EXPECT_NEAR(c.xy * n[0] + c.yy * n[1] + c.yz * n[2], e.values[2] * n[1], 1e-12);
    EXPECT_NEAR(c.xz * n[0] + c.yz * n[1] + c.zz * n[2], e.values[2] * n[2], 1e-12);
  }
}

TEST(Eigen, TooFewPointsIsRejected) {
  const std::vector<Point3> two{{0, 0, 0}, {1, 1, 1}};
  EXPECT_THROW(eigen_decompose(two), Error);
}

TEST(Eigenentropy, KnownValues) {
  EXPECT_EQ(eigenentropy({1, 0, 0}), 0.0);
  EXPECT_NEAR(eigenentropy({1, 1, 1}), std::log(3.0), 1e-15);
  EXPECT_NEAR(eigenentropy({2, 2, 0}), std::log(2.0), 1e-15);
  EXPECT_EQ(eigenentropy({0, 0, 0}), 0.0);
}

TEST(OptN, LinePicksTheSmallestCandidate) {
  PointCloud line;
  for (int i = 0; i < 60; ++i) line.points.push_back({0.1 * i, 0.0, 0.0});
  const auto index = build_index(line);
  const NeighborhoodParams p{10, 40, 1};
  for (double e : entropy_curve(30, index, p)) EXPECT_NEAR(e, 0.0, 1e-6);
  EXPECT_EQ(optimal_k(30, index, p), 10);
}

TEST(OptN, IsotropicBlobApproachesMaximumEntropy) {
  const PointCloud blob = gaussian_blob(2000, 31);
  const auto index = build_index(blob);
  const auto curve = entropy_curve(0, index, NeighborhoodParams{10, 100, 1});
  EXPECT_GT(curve.back(), std::log(3.0) - 0.1);
  for (double e : curve) EXPECT_LE(e, std::log(3.0) + 1e-12);
}

TEST(OptN, CurveHonoursTheStep) {
  const PointCloud cloud = random_cloud(200, 32);
  const auto curve = entropy_curve(5, build_index(cloud), NeighborhoodParams{10, 100, 7});
  EXPECT_EQ(curve.size(), 13u);  // 10, 17, ..., 94
}

TEST(OptN, MatchesExhaustiveArgmin) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const PointCloud cloud = seed % 2 ? noisy_wall(300, 40 + seed) : random_cloud(300, 40 + seed, 2.0);
    const auto index = build_index(cloud, 8);
    for (std::size_t i = 0; i < cloud.size(); i += 37) {
      EXPECT_EQ(optimal_k(i, index, NeighborhoodParams{10, 60, 1}), oracle::optimal_k(cloud, i, 10, 60))
          << "seed " << seed << " point " << i;
    }
  }
}

TEST(OptN, CollapsedNeighborhoodIsDegenerate) {
  PointCloud cloud;
  for (int i = 0; i < 20; ++i) cloud.points.push_back({1, 1, 1});
  for (int i = 0; i < 20; ++i) cloud.points.push_back({5.0 + i, 0, 0});
  try {
    optimal_k(0, build_index(cloud), NeighborhoodParams{3, 15, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    EXPECT_NE(std::string(e.what()).find("degenerate neighborhood"), std::string::npos);
  }
}

TEST(OptN, KMaxBeyondCloudIsRejected) {
  const PointCloud cloud = random_cloud(50, 33);
  EXPECT_THROW(optimal_k(0, build_index(cloud), NeighborhoodParams{10, 50, 1}), Error);
  EXPECT_THROW(optimal_k(0, build_index(cloud), NeighborhoodParams{2, 20, 1}), Error);
}

TEST(Features, CanonicalNeighborhoods) {
  PointCloud line;
  for (int i = 0; i < 40; ++i) line.points.push_back({0.05 * i, 0.0, 1.0});
  PointCloud plane;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) plane.points.push_back({0.1 * i, 0.1 * j, 0.0 + 1e-7 * ((i * 7 + j) % 5)});
  const PointCloud blob = gaussian_blob(500, 34);

  auto features_of = [](const PointCloud& c, std::size_t i, int k) {
    return extract_features(i, c, build_index(c), build_index_2d(c), build_acc_map(c), k);
  };
  const auto fl = features_of(line, 20, 10);
  EXPECT_NEAR(fl[kLinearity], 1.0, 1e-6);
  const auto fp = features_of(plane, 24, 25);
  EXPECT_NEAR(fp[kPlanarity], 1.0, 1e-3);
  EXPECT_NEAR(fp[kVerticality], 0.0, 1e-6);
  const auto fb = features_of(blob, 0, 200);
  EXPECT_GT(fb[kSphericity], 0.5);
  EXPECT_GT(fb[kEigenentropy], 1.0);
}

TEST(Features, VerticalWallMatchesIndependentFormulas) {
  const PointCloud wall = noisy_wall(33, 35);
  const auto index = build_index(wall);
  const auto index_2d = build_index_2d(wall);
  const auto acc = build_acc_map(wall, 0.25);
  for (std::size_t i = 0; i < wall.size(); ++i) {
    for (int k : {5, 12, 33}) {
      expect_features_near(extract_features(i, wall, index, index_2d, acc, k), oracle::features(wall, i, k, 0.25),
                           1e-8);
    }
  }
  const auto f = extract_features(0, wall, index, index_2d, acc, 20);
  EXPECT_GT(f[kVerticality], 0.99);
  EXPECT_LT(f[kSphericity], 0.01);
}

TEST(Features, RandomCloudsMatchIndependentFormulas) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const PointCloud cloud = random_cloud(400, 50 + seed, 4.0);
    const auto index = build_index(cloud);
    const auto index_2d = build_index_2d(cloud);
    const auto acc = build_acc_map(cloud, 0.5);
    for (std::size_t i = 0; i < cloud.size(); i += 29) {
      const int k = 10 + static_cast<int>(i % 50);
      expect_features_near(extract_features(i, cloud, index, index_2d, acc, k), oracle::features(cloud, i, k, 0.5),
                           1e-8);
    }
  }
}

TEST(Features, ExtractorAgreesWithTheParts) {
  const PointCloud cloud = noisy_wall(500, 36);
  FeatureParams params;
  const FeatureExtractor ex(cloud, params);
  const std::vector<std::size_t> request{0, 17, 250, 499};
  const auto batch = ex.compute_all(request, 2);
  ASSERT_EQ(batch.kept.size(), 4u);
  for (std::size_t j = 0; j < request.size(); ++j) {
    const auto& pf = batch.features[j];
    EXPECT_EQ(pf.opt_n, optimal_k(request[j], build_index(cloud), params.neighborhood));
    expect_features_near(pf.values, oracle::features(cloud, request[j], pf.opt_n, 0.25), 1e-8);
  }
}

TEST(Features, BatchDropsDegeneratePoints) {
  PointCloud cloud = random_cloud(300, 37);
  for (int i = 0; i < 120; ++i) cloud.points.push_back({50, 50, 50});
  const FeatureExtractor ex(cloud, FeatureParams{});
  const std::vector<std::size_t> request{0, 300, 1, 350};
  const auto batch = ex.compute_all(request, 1);
  EXPECT_EQ(batch.kept, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(batch.dropped, (std::vector<std::size_t>{1, 3}));
}

TEST(Features, ZeroRadiusIsDegenerate) {
  PointCloud cloud;
  for (int i = 0; i < 5; ++i) cloud.points.push_back({0, 0, 0});
  cloud.points.push_back({1, 0, 0});
  cloud.points.push_back({0, 1, 0});
  cloud.points.push_back({0, 0, 1});
  try {
    extract_features(0, cloud, build_index(cloud), build_index_2d(cloud), build_acc_map(cloud), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
  }
}

TEST(Features, RigidMotionAndScale) {
  const PointCloud cloud = random_cloud(400, 38, 3.0);
  const double a = 0.7, c = std::cos(a), s = std::sin(a);
  const Point3 t{12.5, -40.25, 3.0};
  PointCloud rotated, scaled;
  for (const auto& p : cloud.points) {
    rotated.points.push_back({c * p.x - s * p.y + t.x, s * p.x + c * p.y + t.y, p.z + t.z});
    scaled.points.push_back({2.5 * p.x, 2.5 * p.y, 2.5 * p.z});
  }
  auto run = [](const PointCloud& pc, std::size_t i, int k) {
    return extract_features(i, pc, build_index(pc), build_index_2d(pc), build_acc_map(pc), k);
  };
  for (std::size_t i = 0; i < cloud.size(); i += 50) {
    const auto f0 = run(cloud, i, 25);
    const auto fr = run(rotated, i, 25);
    const auto fs = run(scaled, i, 25);
    for (std::size_t f = 0; f <= kRadius2D; ++f) {
      if (f == kZVals) continue;
      EXPECT_NEAR(f0[f], fr[f], 1e-9 * std::max(1.0, std::abs(f0[f]))) << kFeatureNames[f];
    }
    EXPECT_NEAR(fr[kZVals], f0[kZVals] + 3.0, 1e-12);
    EXPECT_NEAR(f0[kDensity2D], fr[kDensity2D], 1e-9 * f0[kDensity2D]);
    EXPECT_NEAR(f0[kRatioEigenvalues2D], fr[kRatioEigenvalues2D], 1e-9);
    for (std::size_t f : {kLinearity, kPlanarity, kSphericity, kOmnivariance, kAnisotropy, kEigenentropy,
                          kChangeCurvature, kVerticality, kRatioEigenvalues2D}) {
      EXPECT_NEAR(f0[f], fs[f], 1e-9) << kFeatureNames[f];
    }
    EXPECT_NEAR(fs[kRadius3D], 2.5 * f0[kRadius3D], 1e-12);
    EXPECT_NEAR(fs[kSumEigenvalues], 6.25 * f0[kSumEigenvalues], 1e-9 * fs[kSumEigenvalues]);
    EXPECT_NEAR(fs[kDensity], f0[kDensity] / 15.625, 1e-9 * fs[kDensity]);
  }
}

TEST(AccumulationMap, TwoPointsInOneBin) {
  const PointCloud cloud({{0.0, 0.0, 0.0}, {0.1, 0.1, 1.0}});
  const auto map = build_acc_map(cloud, 0.25);
  ASSERT_EQ(map.bin_count(), 1u);
  const auto& b = map.bin_of_point(0);
  EXPECT_EQ(b.count, 2u);
  EXPECT_EQ(b.z_max - b.z_min, 1.0);
  EXPECT_EQ(b.z_std, 0.5);
}

TEST(AccumulationMap, MatchesGrouping) {
  const PointCloud cloud = random_cloud(3000, 39, 5.0);
  const auto map = build_acc_map(cloud, 0.7);
  std::size_t total = 0;
  for (const auto& [id, bin] : map.bins()) total += bin.count;
  EXPECT_EQ(total, cloud.size());
  for (std::size_t i = 0; i < cloud.size(); i += 97) {
    const auto want = oracle::features(cloud, i, 5, 0.7);
    const auto& b = map.bin_of_point(i);
    EXPECT_EQ(static_cast<double>(b.count), want[kFrequencyAccMap]);
    EXPECT_EQ(b.z_max - b.z_min, want[kDeltaZAccMap]);
    EXPECT_NEAR(b.z_std, want[kStdZAccMap], 1e-12);
  }
}

TEST(AccumulationMap, NonPositiveBinIsRejected) {
  EXPECT_THROW(build_acc_map(random_cloud(5, 1), 0.0), Error);
}

TEST(Standardizer, TwoValues) {
  Matrix m(2, 1);
  m(0, 0) = 1;
  m(1, 0) = 3;
  const auto s = Standardizer::fit(m);
  const auto z = s.apply(m);
  EXPECT_EQ(z(0, 0), -1.0);
  EXPECT_EQ(z(1, 0), 1.0);
  Matrix unseen(1, 1, 5.0);
  EXPECT_EQ(s.apply(unseen)(0, 0), 3.0);
}

TEST(Standardizer, ColumnsHaveZeroMeanUnitVariance) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(10.0, 4.0);
  Matrix m(500, 6);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = g(rng) * double(c + 1);
  const auto z = Standardizer::fit(m).apply(m);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mean = 0, var = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) mean += z(r, c);
    mean /= 500;
    for (std::size_t r = 0; r < m.rows(); ++r) var += (z(r, c) - mean) * (z(r, c) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / 500, 1.0, 1e-12);
  }
}

TEST(Standardizer, ConstantColumnIsCenteredOnly) {
  Matrix m(3, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    m(r, 0) = 7.0;
    m(r, 1) = double(r);
  }
  const auto s = Standardizer::fit(m);
  EXPECT_TRUE(s.constant()[0]);
  EXPECT_FALSE(s.constant()[1]);
  Matrix q(1, 2);
  q(0, 0) = 9.0;
  EXPECT_EQ(s.apply(q)(0, 0), 2.0);
}

TEST(Standardizer, TestRowsDoNotLeakIntoStatistics) {
  const PointCloud cloud = random_cloud(200, 42);
  Matrix train, test;
  for (std::size_t i = 0; i < 200; ++i) {
    const std::array<double, 3> row{cloud[i].x, cloud[i].y, cloud[i].z};
    (i < 150 ? train : test).append_row(row);
  }
  const auto before = Standardizer::fit(train);
  const auto z_before = before.apply(test);
  for (std::size_t r = 0; r < test.rows(); ++r) test(r, 0) += 1000.0;
  const auto after = Standardizer::fit(train);
  EXPECT_EQ(before.mean(), after.mean());
  EXPECT_EQ(before.stddev(), after.stddev());
  EXPECT_NEAR(after.apply(test)(0, 0) - z_before(0, 0), 1000.0 / before.stddev()[0], 1e-9);
}

TEST(Standardizer, ArityMismatchIsRejected) {
  const auto s = Standardizer::fit(Matrix(3, 2, 1.0));
  EXPECT_THROW(s.apply(Matrix(1, 3)), Error);
  EXPECT_THROW(Standardizer::fit(Matrix(1, 2)), Error);
}
