#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "mlsq/cloud_io.hpp"
#include "mlsq/config.hpp"
#include "mlsq/error.hpp"
#include "mlsq/feature_table.hpp"
#include "test_util.hpp"

using namespace mlsq;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(CloudIo, ReadsXyz) {
  const auto dir = fixtures::scratch_dir("xyz");
  const auto cloud = read_cloud(write_file(dir / "a.xyz", "0 0 0\n1 2 3\n"));
  ASSERT_EQ(cloud.size(), 2u);
  EXPECT_EQ(cloud[1], (Point3{1, 2, 3}));
}

TEST(CloudIo, XyzSkipsCommentsAndBlankLines) {
  const auto dir = fixtures::scratch_dir("xyz_comments");
  const auto cloud = read_cloud(write_file(dir / "a.txt", "# header\n\n1\t2   3\n  # another\n4 5 6 # trailing\n"));
  ASSERT_EQ(cloud.size(), 2u);
  EXPECT_EQ(cloud[1], (Point3{4, 5, 6}));
}

TEST(CloudIo, XyzErrorsCarryLineNumbers) {
  const auto dir = fixtures::scratch_dir("xyz_bad");
  const auto bad_count = write_file(dir / "a.xyz", "0 0 0\n1 2\n");
  EXPECT_NE(error_of([&] { read_cloud(bad_count); }).find("a.xyz:2:"), std::string::npos);
  const auto bad_number = write_file(dir / "b.xyz", "0 0 0\n0 0 0\n1 x 3\n");
  EXPECT_NE(error_of([&] { read_cloud(bad_number); }).find("b.xyz:3:"), std::string::npos);
}

TEST(CloudIo, MissingFileIsAnIoError) {
  try {
    read_cloud("/nonexistent/cloud.xyz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(CloudIo, ReadsAsciiPlyWithFloatProperties) {
  const auto dir = fixtures::scratch_dir("ply_ascii");
  const auto path = write_file(dir / "a.ply",
                               "ply\nformat ascii 1.0\nelement vertex 1\n"
                               "property float x\nproperty float y\nproperty float z\nend_header\n1 1 1\n");
  const auto cloud = read_cloud(path);
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_EQ(cloud[0], (Point3{1, 1, 1}));
  EXPECT_EQ(detect_format(path), CloudFileFormat::PlyAscii);
}

TEST(CloudIo, PlySkipsExtraPropertiesAndOtherElements) {
  const auto dir = fixtures::scratch_dir("ply_extra");
  const auto path = write_file(dir / "a.ply",
                               "ply\nformat ascii 1.0\ncomment made by hand\nelement camera 1\nproperty float f\n"
                               "element vertex 2\nproperty uchar red\nproperty double z\nproperty double x\n"
                               "property double y\nelement face 1\nproperty list uchar int vertex_indices\n"
                               "end_header\n3.5\n255 3 1 2\n0 6 4 5\n3 0 1 1\n");
  const auto cloud = read_cloud(path);
  ASSERT_EQ(cloud.size(), 2u);
  EXPECT_EQ(cloud[0], (Point3{1, 2, 3}));
  EXPECT_EQ(cloud[1], (Point3{4, 5, 6}));
}

TEST(CloudIo, UnsupportedPropertyTypeNamesTheProperty) {
  const auto dir = fixtures::scratch_dir("ply_type");
  const auto path = write_file(dir / "a.ply",
                               "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                               "property quad intensity\nproperty float z\nend_header\n1 1 1 1\n");
  const auto msg = error_of([&] { read_cloud(path); });
  EXPECT_NE(msg.find("intensity"), std::string::npos) << msg;
}

TEST(CloudIo, PlyElementCountMismatchIsReported) {
  const auto dir = fixtures::scratch_dir("ply_short");
  const auto path = write_file(dir / "a.ply",
                               "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                               "property float z\nend_header\n1 1 1\n2 2 2\n");
  const auto msg = error_of([&] { read_cloud(path); });
  EXPECT_NE(msg.find(":10:"), std::string::npos) << msg;
}

TEST(CloudIo, BinaryPlyRoundTripIsBitExact) {
  const auto dir = fixtures::scratch_dir("ply_binary");
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  PointCloud cloud;
  for (int i = 0; i < 10000; ++i) cloud.points.push_back({u(rng), u(rng), u(rng)});
  write_cloud(cloud, dir / "a.ply", CloudFileFormat::PlyBinaryLe);
  EXPECT_EQ(detect_format(dir / "a.ply"), CloudFileFormat::PlyBinaryLe);
  const auto back = read_cloud(dir / "a.ply");
  ASSERT_EQ(back.size(), cloud.size());
  EXPECT_EQ(std::memcmp(back.points.data(), cloud.points.data(), cloud.size() * sizeof(Point3)), 0);
}

TEST(CloudIo, TextFormatsRoundTripExactly) {
  const auto dir = fixtures::scratch_dir("text_rt");
  const auto cloud = fixtures::random_cloud(500, 18, 123.456);
  write_cloud(cloud, dir / "a.xyz", CloudFileFormat::XyzAscii);
  write_cloud(cloud, dir / "a.ply", CloudFileFormat::PlyAscii);
  EXPECT_EQ(read_cloud(dir / "a.xyz"), cloud);
  EXPECT_EQ(read_cloud(dir / "a.ply"), cloud);
}

TEST(CloudIo, BinaryPlyWithFloat32AndSkippedProperties) {
  const auto dir = fixtures::scratch_dir("ply_f32");
  std::string text = "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\n"
                     "property float y\nproperty float z\nproperty ushort intensity\nend_header\n";
  auto put = [&](const void* p, std::size_t n) { text.append(static_cast<const char*>(p), n); };
  for (float base : {1.5f, -2.25f}) {
    const float xyz[3] = {base, base * 2, base * 4};
    const std::uint16_t intensity = 7;
    put(xyz, sizeof(xyz));
    put(&intensity, sizeof(intensity));
  }
  const auto cloud = read_cloud(write_file(dir / "a.ply", text));
  ASSERT_EQ(cloud.size(), 2u);
  EXPECT_EQ(cloud[1], (Point3{-2.25, -4.5, -9.0}));
}

namespace {

FeatureTable sample_table(std::size_t rows) {
  FeatureTable t;
  t.has_features = t.has_c2c = t.has_label = t.has_fold = t.has_cell = true;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (std::size_t r = 0; r < rows; ++r) {
    FeatureRow row;
    row.point_index = static_cast<std::int64_t>(r * 7);
    for (double& v : row.features) v = u(rng) * std::pow(10.0, static_cast<double>(r % 7) - 3.0);
    row.opt_n = 10 + static_cast<int>(r % 90);
    row.c2c = std::abs(u(rng)) * 1e-4;
    row.label = static_cast<int>(r % 2);
    row.fold = static_cast<int>(r % 5);
    row.cell = static_cast<std::int64_t>(r * 13);
    t.rows.push_back(row);
  }
  return t;
}

std::size_t line_count(const fs::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(FeatureTable, EmptyTableIsHeaderOnly) {
  const auto dir = fixtures::scratch_dir("table_empty");
  FeatureTable t = sample_table(0);
  write_feature_table(t, dir / "t.csv");
  EXPECT_EQ(line_count(dir / "t.csv"), 1u);
  const auto back = read_feature_table(dir / "t.csv");
  EXPECT_TRUE(back.rows.empty());
  EXPECT_EQ(back.header(), t.header());
}

TEST(FeatureTable, SingleRowIsTwoLines) {
  const auto dir = fixtures::scratch_dir("table_one");
  write_feature_table(sample_table(1), dir / "t.csv");
  EXPECT_EQ(line_count(dir / "t.csv"), 2u);
}

TEST(FeatureTable, HeaderUsesCanonicalOrder) {
  const auto header = sample_table(0).header();
  ASSERT_EQ(header.size(), 1 + kFeatureCount + 5);
  EXPECT_EQ(header[0], "point_index");
  for (std::size_t i = 0; i < kFeatureCount; ++i) EXPECT_EQ(header[1 + i], kFeatureNames[i]);
  EXPECT_EQ(header[22], "OptN");
  EXPECT_EQ(header[23], "c2c");
  EXPECT_EQ(header[24], "label");
  EXPECT_EQ(header[25], "fold");
  EXPECT_EQ(header[26], "cell");
}

TEST(FeatureTable, RoundTripWithinRenderingPrecision) {
  const auto dir = fixtures::scratch_dir("table_rt");
  const FeatureTable t = sample_table(500);
  write_feature_table(t, dir / "t.csv");
  const FeatureTable back = read_feature_table(dir / "t.csv");
  ASSERT_EQ(back.rows.size(), t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const FeatureRow& a = t.rows[r];
    const FeatureRow& b = back.rows[r];
    EXPECT_EQ(a.point_index, b.point_index);
    EXPECT_EQ(a.opt_n, b.opt_n);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.fold, b.fold);
    EXPECT_EQ(a.cell, b.cell);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      EXPECT_LE(std::abs(a.features[f] - b.features[f]), 1e-7 * std::abs(a.features[f]));
    }
    EXPECT_LE(std::abs(a.c2c - b.c2c), 1e-7 * a.c2c);
  }
}

TEST(FeatureTable, OptionalGroupsRoundTrip) {
  const auto dir = fixtures::scratch_dir("table_groups");
  FeatureTable t = sample_table(3);
  t.has_features = false;
  t.has_cell = false;
  write_feature_table(t, dir / "t.csv");
  const auto back = read_feature_table(dir / "t.csv");
  EXPECT_FALSE(back.has_features);
  EXPECT_TRUE(back.has_c2c && back.has_label && back.has_fold);
  EXPECT_FALSE(back.has_cell);
  EXPECT_EQ(back.rows[2].fold, t.rows[2].fold);
}

TEST(FeatureTable, UnknownColumnIsListed) {
  const auto dir = fixtures::scratch_dir("table_unknown");
  const auto path = write_file(dir / "t.csv", "point_index,c2c,colour,label\n0,0.1,3,1\n");
  const auto msg = error_of([&] { read_feature_table(path); });
  EXPECT_NE(msg.find("colour"), std::string::npos) << msg;
}

TEST(FeatureTable, RaggedRowReportsLine) {
  const auto dir = fixtures::scratch_dir("table_ragged");
  const auto path = write_file(dir / "t.csv", "point_index,c2c,label\n0,0.1,1\n1,0.2\n");
  const auto msg = error_of([&] { read_feature_table(path); });
  EXPECT_NE(msg.find("t.csv:3:"), std::string::npos) << msg;
}

TEST(FeatureTable, OutOfOrderColumnsAreRejected) {
  const auto dir = fixtures::scratch_dir("table_order");
  const auto path = write_file(dir / "t.csv", "point_index,label,c2c\n0,1,0.1\n");
  EXPECT_THROW(read_feature_table(path), Error);
}

TEST(Config, DefaultsCarryTheReferenceSettings) {
  const RunConfig c;
  EXPECT_EQ(c.cutoff, 0.100);
  EXPECT_EQ(c.threshold, 0.020);
  EXPECT_EQ(c.n_folds, 5);
  EXPECT_EQ(c.rf.n_estimators, 100);
  EXPECT_EQ(c.rf.max_depth, 20);
  EXPECT_EQ(c.rf.max_samples, 0.5);
  EXPECT_TRUE(c.rf.balanced_class_weight);
  EXPECT_EQ(c.gbt.max_depth, 8);
  EXPECT_EQ(c.gbt.eta, 0.05);
  EXPECT_EQ(c.gbt.subsample, 0.8);
  EXPECT_EQ(c.gbt.colsample_bytree, 0.8);
  EXPECT_EQ(c.gbt.num_boost_round, 1000);
  EXPECT_EQ(c.gbt.early_stopping_rounds, 50);
  EXPECT_FALSE(c.gbt.scale_pos_weight.has_value());
}

TEST(Config, JsonRoundTripIsLossless) {
  RunConfig c;
  c.cutoff = 0.08;
  c.rf.n_estimators = 17;
  c.gbt.scale_pos_weight = 2.5;
  c.scene.walls.pop_back();
  c.error.sigma0 = 0.1 / 3.0;
  c.seed = 0xffffffffffffULL;
  const Json a = config_to_json(c);
  const Json b = config_to_json(config_from_json(a));
  EXPECT_EQ(a, b);
  EXPECT_EQ(Json::parse(a.dump()), a);
}

TEST(Config, TopLevelKeys) {
  const Json doc = config_to_json(RunConfig{});
  std::vector<std::string> keys;
  for (auto it = doc.begin(); it != doc.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"labeling", "features", "folds", "rf", "gbt", "eval", "seed", "synth"}));
}

TEST(Config, PartialDocumentKeepsDefaults) {
  const RunConfig c = config_from_json(Json::parse(R"({"rf": {"n_estimators": 7}, "seed": 3})"));
  EXPECT_EQ(c.rf.n_estimators, 7);
  EXPECT_EQ(c.rf.max_depth, 20);
  EXPECT_EQ(c.seed, 3u);
}

TEST(Config, UnknownAndMistypedKeysAreRejected) {
  EXPECT_NE(error_of([] { config_from_json(Json::parse(R"({"rf": {"trees": 7}})")); }).find("rf.trees"),
            std::string::npos);
  EXPECT_NE(error_of([] { config_from_json(Json::parse(R"({"rf": {"n_estimators": 2.5}})")); }).find("rf.n_estimators"),
            std::string::npos);
  EXPECT_THROW(config_from_json(Json::parse(R"({"labeling": {"threshold": 0.2}})")), Error);
}

TEST(Config, OverridesAreTypedFromTheirText) {
  Json doc = Json::object();
  apply_override(doc, "rf.n_estimators", "50");
  apply_override(doc, "gbt.scale_pos_weight", "1.5");
  apply_override(doc, "rf.class_weight", "none");
  apply_override(doc, "synth.error.sigma0", "0.01");
  apply_override(doc, "seed", "9");
  const RunConfig c = config_from_json(doc);
  EXPECT_EQ(c.rf.n_estimators, 50);
  EXPECT_EQ(c.gbt.scale_pos_weight, 1.5);
  EXPECT_FALSE(c.rf.balanced_class_weight);
  EXPECT_EQ(c.error.sigma0, 0.01);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_THROW(apply_override(doc, "rf.bogus", "1"), Error);
  EXPECT_THROW(apply_override(doc, "seed.x", "1"), Error);
}
