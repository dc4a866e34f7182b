#include "support.hpp"

#include "lumiparam/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace lumiparam;
using namespace lumiparam::testing;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run_cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err).exit_code;
  return {code, out.str(), err.str()};
}

std::string read_text(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<fs::path> listing(const fs::path &dir) {
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(dir)) files.push_back(e.path().filename());
  std::sort(files.begin(), files.end());
  return files;
}

} // namespace

TEST(Cli, ExtractWritesLightSet) {
  TempDir dir;
  const EnvironmentMap map =
      disc_panorama(128, 64, {{from_angles(-50, 15), 10, {80, 80, 80}}, {from_angles(60, 5), 10, {60, 50, 40}}});
  save_image(map, dir / "pano.hdr");
  save_depthmap(DepthMap(128, 64, 2.0), dir / "depth.pfm");
  const CliRun r = run_cli({"extract", (dir / "pano.hdr").string(), "--depth", (dir / "depth.pfm").string(), "-o",
                         (dir / "lights.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const LightSet set = load_lightset(dir / "lights.json");
  ASSERT_EQ(set.size(), 2u);
  EXPECT_NEAR(set.lights[0].distance, 2.0, 1e-6);
}

TEST(Cli, ProjectThenExtractRecoversLight) {
  TempDir dir;
  LightSet set;
  set.lights.push_back({from_angles(30, 20), 3, 0.05, {40, 30, 20}});
  save_lightset(set, dir / "in.json");
  ASSERT_EQ(run_cli({"project", (dir / "in.json").string(), "--size", "256x128", "-o", (dir / "map.pfm").string()}).code, 0);
  ASSERT_EQ(run_cli({"extract", (dir / "map.pfm").string(), "-o", (dir / "out.json").string()}).code, 0);
  const LightSet out = load_lightset(dir / "out.json");
  // Region growing splits a smooth lobe into concentric rings; all of them
  // must describe the one planted source.
  ASSERT_GE(out.size(), 1u);
  for (const Light &l : out.lights) EXPECT_LT(degrees(angle_between(l.direction, set.lights[0].direction)), 2.0);
}

TEST(Cli, MissingInputIsDataError) {
  TempDir dir;
  const CliRun r = run_cli({"fit", (dir / "missing.hdr").string(), "--n", "3", "-o", (dir / "x.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.hdr"), std::string::npos);
  EXPECT_TRUE(listing(dir.path()).empty());
}

TEST(Cli, UnknownFlagIsUsageError) {
  const CliRun r = run_cli({"extract", "a.hdr", "-o", "b.json", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_NE(r.err.find("extract"), std::string::npos);
}

TEST(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run_cli({}).code, 1); }

TEST(Cli, HelpExitsZero) {
  const CliRun r = run_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("relocate"), std::string::npos);
}

TEST(Cli, BadSizeIsUsageError) {
  TempDir dir;
  save_lightset(LightSet{}, dir / "in.json");
  EXPECT_EQ(run_cli({"project", (dir / "in.json").string(), "--size", "100x100", "-o", (dir / "m.pfm").string()}).code, 1);
  EXPECT_EQ(run_cli({"project", (dir / "in.json").string(), "--size", "abc", "-o", (dir / "m.pfm").string()}).code, 1);
}

TEST(Cli, RelocateAcceptsNegativeTranslation) {
  TempDir dir;
  LightSet set;
  set.lights.push_back({{0, 0, 1}, 2, 0.1, {1, 1, 1}});
  save_lightset(set, dir / "in.json");
  const CliRun r = run_cli({"relocate", (dir / "in.json").string(), "--t", "-1,0,0", "-o", (dir / "out.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Light l = load_lightset(dir / "out.json").lights[0];
  EXPECT_NEAR(l.direction.x, 1 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(l.distance, std::sqrt(5.0), 1e-12);
}

TEST(Cli, EvaluateWritesCsv) {
  TempDir dir;
  LightSet set;
  set.lights.push_back({from_angles(20, 30), 2, 0.3, {5, 4, 3}});
  set.ambient = {0.1, 0.1, 0.1};
  save_lightset(set, dir / "l.json");
  save_image(project_lightset(set, 128, 64, true), dir / "gt.pfm");
  save_depthmap(DepthMap(128, 64, 2.0), dir / "d.pfm");
  const CliRun r = run_cli({"evaluate", (dir / "l.json").string(), (dir / "gt.pfm").string(), "--depth",
                         (dir / "d.pfm").string(), "--offsets", "0,0,0;0.5,0,0", "--res", "16", "-o",
                         (dir / "r.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(read_text(dir / "r.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "offset_x,offset_y,offset_z,rmse,si_rmse");
  EXPECT_EQ(lines[1].rfind("0,0,0,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("0.5,0,0,", 0), 0u);
}

TEST(Cli, FitWritesTrace) {
  TempDir dir;
  LightSet set;
  set.lights.push_back({from_angles(10, 10), 3, 0.5, {5, 5, 5}});
  save_image(project_lightset(set, 64, 32, false), dir / "t.pfm");
  const CliRun r = run_cli({"fit", (dir / "t.pfm").string(), "--n", "1", "--iters", "20", "-o",
                         (dir / "f.json").string(), "--trace", (dir / "trace.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_lightset(dir / "f.json").size(), 1u);
  std::istringstream csv(read_text(dir / "trace.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "iteration,loss");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_GE(rows, 20);
}

TEST(Cli, FailedRunLeavesNoPartialFiles) {
  TempDir dir;
  std::ofstream(dir / "bad.json") << "{\"version\": 7}";
  save_image(EnvironmentMap(64, 32, Rgb{1, 1, 1}), dir / "pano.pfm");
  const CliRun r = run_cli({"render", (dir / "bad.json").string(), "-o", (dir / "p.pfm").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.json"), std::string::npos);
  EXPECT_EQ(listing(dir.path()), (std::vector<fs::path>{"bad.json", "pano.pfm"}));
}

TEST(Cli, RenderAndCropProduceImages) {
  TempDir dir;
  save_image(EnvironmentMap(64, 32, Rgb{1, 1, 1}), dir / "pano.pfm");
  ASSERT_EQ(run_cli({"render", (dir / "pano.pfm").string(), "--res", "16", "-o", (dir / "probe.pfm").string(), "--png",
                     (dir / "probe.png").string()})
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir / "probe.png"));
  const auto probe = detail::read_pfm(dir / "probe.pfm");
  EXPECT_EQ(probe.width, 16);
  EXPECT_EQ(probe.height, 16);
  EXPECT_NEAR(probe.values[3 * (8 * 16 + 8)], 1.0, 0.01);
  ASSERT_EQ(run_cli({"crop", (dir / "pano.pfm").string(), "--az", "-30", "--size", "40x30", "-o",
                     (dir / "crop.pfm").string()})
                .code,
            0);
}

TEST(Cli, WarpRequiresDepth) {
  TempDir dir;
  save_image(EnvironmentMap(64, 32, Rgb{1, 1, 1}), dir / "pano.pfm");
  EXPECT_EQ(run_cli({"warp", (dir / "pano.pfm").string(), "--t", "1,0,0", "-o", (dir / "w.pfm").string()}).code, 1);
  save_depthmap(DepthMap(64, 32, 3.0), dir / "d.pfm");
  EXPECT_EQ(run_cli({"warp", (dir / "pano.pfm").string(), "--depth", (dir / "d.pfm").string(), "--t", "1,0,0", "-o",
                     (dir / "w.pfm").string()})
                .code,
            0);
}
