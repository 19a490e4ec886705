#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clft/io.hpp"
#include "clft/lidar_projection.hpp"
#include "clft/metrics.hpp"
#include "clft/tensor.hpp"

namespace clft {

/// One synthetic street-like scene: flat ground, open sky, and a few
/// class-coloured objects at known depths. The cloud is back-projected from
/// pixel centres through the calibration, so every point projects back onto
/// the pixel it came from.
struct FixtureFrame {
  Tensor camera;  // 3×h×w in [0, 1], multiples of 1/255
  PointCloud cloud;
  CalibrationFile calib;
  Mask gt;  // labels 0..4, 255 on object outlines
};

struct FixtureOptions {
  int frames = 8;
  std::uint64_t seed = 0;
  int rows = 384;
  int cols = 384;
};

FixtureFrame make_fixture_frame(const FixtureOptions& options, int index);

/// frame_000, frame_001, ... under camera/ (.ppm), lidar/ (.clpc),
/// calib/ (.json) and gt/ (.pgm). Returns the frame stems.
std::vector<std::string> write_fixtures(const std::filesystem::path& out_dir, const FixtureOptions& options);

std::string frame_stem(int index);

}  // namespace clft
