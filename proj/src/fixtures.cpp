#include "clft/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "clft/rng.hpp"

namespace clft {

namespace {

constexpr double kFocal = 400.0;
constexpr double kCameraHeight = 1.6;
constexpr double kMaxRange = 80.0;

enum class Outline { kBox, kEllipse, kDiamond };

struct Body {
  std::uint8_t label;
  Outline outline;
  double width_m;
  double height_m;
  double lift_m;  // gap between ground and the lowest point
  std::array<int, 3> colour;
};

// index = label - 1
constexpr std::array<Body, 4> kBodies = {{
    {1, Outline::kBox, 4.0, 1.5, 0.0, {200, 40, 40}},
    {2, Outline::kBox, 0.6, 1.8, 0.0, {40, 190, 60}},
    {3, Outline::kEllipse, 1.7, 1.7, 0.0, {40, 70, 220}},
    {4, Outline::kDiamond, 0.9, 0.9, 1.6, {235, 215, 30}},
}};

struct Placed {
  const Body* body;
  double depth;
  double cu, cv;  // centre pixel
  double hu, hv;  // half extents in pixels
  std::array<int, 3> colour;

  bool covers(double u, double v) const {
    const double du = std::abs(u - cu) / hu, dv = std::abs(v - cv) / hv;
    switch (body->outline) {
      case Outline::kBox: return du <= 1.0 && dv <= 1.0;
      case Outline::kEllipse: return du * du + dv * dv <= 1.0;
      case Outline::kDiamond: return du + dv <= 1.0;
    }
    return false;
  }
};

std::uint8_t clamp_byte(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

CameraCalib fixture_calib(int rows, int cols) {
  CameraCalib c;
  c.fx = kFocal;
  c.fy = kFocal;
  c.cx = cols / 2.0;
  c.cy = rows / 2.0;
  // LiDAR axes x forward, y left, z up; camera x right, y down, z forward.
  c.extrinsic = {0, -1, 0, 0.05,
                 0, 0, -1, -0.30,
                 1, 0, 0, 0.10,
                 0, 0, 0, 1};
  return c;
}

}  // namespace

std::string frame_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03d", index);
  return buf;
}

FixtureFrame make_fixture_frame(const FixtureOptions& options, int index) {
  const int rows = options.rows, cols = options.cols;
  if (rows < 8 || cols < 8) throw std::invalid_argument("fixture frames must be at least 8x8");
  Rng rng(derive_seed(options.seed, frame_stem(index)));
  const CameraCalib calib = fixture_calib(rows, cols);
  const auto h = static_cast<std::size_t>(rows), w = static_cast<std::size_t>(cols);

  std::vector<Placed> objects;
  const int count = 3 + static_cast<int>(rng.below(3));
  for (int k = 0; k < count; ++k) {
    Placed p;
    p.body = &kBodies[rng.below(kBodies.size())];
    p.depth = rng.uniform(4.0, 18.0);
    const double ground_v = calib.cy + calib.fy * kCameraHeight / p.depth;
    p.hu = 0.5 * calib.fx * p.body->width_m / p.depth;
    p.hv = 0.5 * calib.fy * p.body->height_m / p.depth;
    p.cv = ground_v - calib.fy * p.body->lift_m / p.depth - p.hv;
    p.cu = rng.uniform(0.1 * cols, 0.9 * cols);
    for (std::size_t ch = 0; ch < 3; ++ch) p.colour[ch] = p.body->colour[ch] + static_cast<int>(rng.below(31)) - 15;
    objects.push_back(p);
  }
  std::sort(objects.begin(), objects.end(), [](const Placed& a, const Placed& b) { return a.depth > b.depth; });

  FixtureFrame f;
  f.calib = CalibrationFile{calib, rows, cols};
  f.camera = Tensor({3, h, w});
  Mask labels(h, w, 0);
  std::vector<double> depth(h * w, std::numeric_limits<double>::infinity());

  for (std::size_t y = 0; y < h; ++y) {
    const double v = static_cast<double>(y);
    for (std::size_t x = 0; x < w; ++x) {
      const double u = static_cast<double>(x);
      std::array<int, 3> rgb;
      if (v > calib.cy) {
        depth[y * w + x] = calib.fy * kCameraHeight / (v - calib.cy);
        rgb = {95, 95, 100};
      } else {
        const int t = static_cast<int>(60.0 * v / calib.cy);
        rgb = {120 + t, 170 + t / 2, 235};
      }
      for (const Placed& p : objects) {
        if (p.covers(u, v) && p.depth < depth[y * w + x]) {
          depth[y * w + x] = p.depth;
          labels.at(y, x) = p.body->label;
          rgb = p.colour;
        }
      }
      const int noise = static_cast<int>(rng.below(17)) - 8;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        f.camera.at(ch, y, x) = static_cast<float>(clamp_byte(rgb[ch] + noise)) / 255.0f;
      }
    }
  }

  // Outline pixels are ambiguous and left out of scoring.
  f.gt = labels;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::uint8_t l = labels.at(y, x);
      const bool edge = (x > 0 && labels.at(y, x - 1) != l) || (x + 1 < w && labels.at(y, x + 1) != l) ||
                        (y > 0 && labels.at(y - 1, x) != l) || (y + 1 < h && labels.at(y + 1, x) != l);
      if (edge) f.gt.at(y, x) = kVoidLabel;
    }
  }

  // Scan rows every third pixel row, every second column, with dropouts.
  const auto& e = calib.extrinsic;
  for (std::size_t y = 0; y < h; y += 3) {
    for (std::size_t x = 0; x < w; x += 2) {
      const double z = depth[y * w + x];
      if (!(z <= kMaxRange) || rng.uniform() < 0.1) continue;
      const double cam[3] = {(static_cast<double>(x) - calib.cx) * z / calib.fx,
                             (static_cast<double>(y) - calib.cy) * z / calib.fy, z};
      double d[3];
      for (int i = 0; i < 3; ++i) d[i] = cam[i] - e[static_cast<std::size_t>(i * 4 + 3)];
      Point3 pt;
      // Inverse rotation is the transpose.
      pt.x = static_cast<float>(e[0] * d[0] + e[4] * d[1] + e[8] * d[2]);
      pt.y = static_cast<float>(e[1] * d[0] + e[5] * d[1] + e[9] * d[2]);
      pt.z = static_cast<float>(e[2] * d[0] + e[6] * d[1] + e[10] * d[2]);
      f.cloud.points.push_back(pt);
    }
  }
  return f;
}

std::vector<std::string> write_fixtures(const std::filesystem::path& out_dir, const FixtureOptions& options) {
  if (options.frames < 1) throw std::invalid_argument("need at least one fixture frame");
  for (const char* sub : {"camera", "lidar", "calib", "gt"}) std::filesystem::create_directories(out_dir / sub);
  std::vector<std::string> stems;
  for (int i = 0; i < options.frames; ++i) {
    const FixtureFrame f = make_fixture_frame(options, i);
    const std::string stem = frame_stem(i);
    write_image_ppm(out_dir / "camera" / (stem + ".ppm"), f.camera);
    write_pointcloud(out_dir / "lidar" / (stem + ".clpc"), f.cloud);
    write_calibration(out_dir / "calib" / (stem + ".json"), f.calib);
    write_mask_pgm(out_dir / "gt" / (stem + ".pgm"), f.gt);
    stems.push_back(stem);
  }
  return stems;
}

}  // namespace clft
