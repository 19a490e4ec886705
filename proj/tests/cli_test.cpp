#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "clft/fixtures.hpp"
#include "clft/io.hpp"
#include "test_support.hpp"

using namespace clft;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string dir_bytes(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += std::filesystem::relative(f, root).string() + "\n" + read_file(f);
  return all;
}

}  // namespace

TEST(CliTest, UnknownFlagIsAUsageError) {
  const Result r = run_cli({"eval", "--pred-dir", "a", "--gt-dir", "b", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"train"}).code, 1);
  EXPECT_EQ(run_cli({"init", "--config", "giant", "--out", "x"}).code, 1);
}

TEST(CliTest, BinaryExitCodes) {
  EXPECT_EQ(WEXITSTATUS(std::system(CLFT_BINARY " --bogus 2>/dev/null")), 1);
  EXPECT_EQ(WEXITSTATUS(std::system(CLFT_BINARY " --help >/dev/null")), 0);
}

TEST(CliTest, MissingModalityIsAUsageError) {
  const Result r = run_cli({"infer", "--checkpoint", "c", "--mode", "camera", "--lidar", "l", "--out", "m.pgm"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--camera"), std::string::npos);
  EXPECT_EQ(run_cli({"infer", "--checkpoint", "c", "--mode", "fusion", "--camera", "x", "--out", "m.pgm"}).code, 1);
}

TEST(CliTest, EvalHandExample) {
  clft::testing::TempDir dir("cli_eval");
  std::filesystem::create_directories(dir / "pred");
  std::filesystem::create_directories(dir / "gt");
  Mask pred(2, 2), gt(2, 2);
  pred.labels = {1, 1, 0, 2};
  gt.labels = {1, 0, 0, 2};
  write_mask_pgm(dir.path() / "pred" / "f.pgm", pred);
  write_mask_pgm(dir.path() / "gt" / "f.pgm", gt);
  const std::string p = (dir / "pred").string(), g = (dir / "gt").string();

  Result r = run_cli({"eval", "--pred-dir", p, "--gt-dir", g, "--format", "tsv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("vehicle\t50.00\t50.00\t100.00\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("cyclist\tNA\tNA\tNA\n"), std::string::npos) << r.out;

  r = run_cli({"eval", "--pred-dir", p, "--gt-dir", g, "--classes", "sign,vehicle"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(r.out.find("sign"), r.out.find("vehicle"));
  EXPECT_EQ(r.out.find("pedestrian"), std::string::npos);
  EXPECT_NE(r.out.find("—"), std::string::npos);

  EXPECT_EQ(run_cli({"eval", "--pred-dir", p, "--gt-dir", g, "--classes", "tree"}).code, 1);

  write_mask_pgm(dir.path() / "gt" / "g.pgm", gt);
  r = run_cli({"eval", "--pred-dir", p, "--gt-dir", g});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("g.pgm"), std::string::npos);
}

TEST(CliTest, GradcheckExitCodes) {
  Result r = run_cli({"gradcheck", "--tolerance", "1e-4"});
  EXPECT_EQ(r.code, 0) << r.out;
  for (const char* op : {"linear", "softmax", "gelu", "layer_norm", "sdpa"}) {
    EXPECT_NE(r.out.find(op), std::string::npos) << op;
  }
  EXPECT_EQ(run_cli({"gradcheck", "--tolerance", "0"}).code, 3);
  EXPECT_EQ(run_cli({"gradcheck", "--tolerance", "-1"}).code, 1);
}

TEST(CliTest, ProjectWritesRasterAndRejectsBadCalibration) {
  clft::testing::TempDir dir("cli_project");
  CalibrationFile calib;
  calib.calib.fx = calib.calib.fy = 100;
  calib.calib.cx = calib.calib.cy = 192;
  calib.height = calib.width = 384;
  write_calibration(dir / "calib.json", calib);
  write_pointcloud(dir / "one.clpc", PointCloud{{{0.0f, 0.0f, 10.0f}}});
  write_pointcloud(dir / "none.clpc", PointCloud{});

  Result r = run_cli({"project", "--lidar", (dir / "one.clpc").string(), "--calib", (dir / "calib.json").string(),
                      "--out", (dir / "r.clt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  Tensor raster = load_raster(dir / "r.clt");
  EXPECT_EQ(raster.shape(), (Shape{3, 384, 384}));
  EXPECT_EQ(raster.at(2, 192, 192), 10.0f);

  r = run_cli({"project", "--lidar", (dir / "none.clpc").string(), "--calib", (dir / "calib.json").string(), "--out",
               (dir / "z.clt").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(load_raster(dir / "z.clt"), Tensor({3, 384, 384}));

  calib.calib.extrinsic[0] = 3.0;
  write_calibration(dir / "bad.json", calib);
  r = run_cli({"project", "--lidar", (dir / "one.clpc").string(), "--calib", (dir / "bad.json").string(), "--out",
               (dir / "b.clt").string()});
  EXPECT_EQ(r.code, 2);
  write_file(dir / "trunc.clpc", read_file(dir / "one.clpc").substr(0, 19));
  r = run_cli({"project", "--lidar", (dir / "trunc.clpc").string(), "--calib", (dir / "calib.json").string(), "--out",
               (dir / "t.clt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("truncated"), std::string::npos);
}

TEST(CliTest, FixturesAreDeterministic) {
  clft::testing::TempDir dir("cli_fixtures");
  const std::string a = (dir / "a").string(), b = (dir / "b").string(), c = (dir / "c").string();
  ASSERT_EQ(run_cli({"make-fixtures", "--out", a, "--seed", "4", "--frames", "2"}).code, 0);
  ASSERT_EQ(run_cli({"make-fixtures", "--out", b, "--seed", "4", "--frames", "2"}).code, 0);
  ASSERT_EQ(run_cli({"make-fixtures", "--out", c, "--seed", "5", "--frames", "2"}).code, 0);
  EXPECT_EQ(dir_bytes(a), dir_bytes(b));
  EXPECT_NE(dir_bytes(a), dir_bytes(c));
  for (const char* sub : {"camera/frame_001.ppm", "lidar/frame_001.clpc", "calib/frame_001.json", "gt/frame_001.pgm"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / ("a/" + std::string(sub)))) << sub;
  }
}

TEST(CliTest, InferRejectsMismatchedCheckpoint) {
  clft::testing::TempDir dir("cli_infer");
  write_fixtures(dir / "fx", FixtureOptions{1, 0, 384, 384});
  const NamedTensor junk{"camera.embed.projection", Tensor({3, 3})};
  save_checkpoint(dir / "bad.ckpt", std::span<const NamedTensor>(&junk, 1));
  const Result r = run_cli({"infer", "--checkpoint", (dir / "bad.ckpt").string(), "--config", "base", "--mode",
                            "camera", "--camera", (dir / "fx/camera/frame_000.ppm").string(), "--out",
                            (dir / "m.pgm").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("camera.embed.projection"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(dir / "m.pgm"));
}
