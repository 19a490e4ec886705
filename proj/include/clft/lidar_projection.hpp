#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "clft/tensor.hpp"

namespace clft {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pinhole intrinsics plus the rigid LiDAR→camera transform (4×4,
/// row-major). The camera looks down +Z with +X right and +Y down.
struct CameraCalib {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  std::array<double, 16> extrinsic = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

  /// Throws CalibrationError unless fx, fy > 0, the rotation block is
  /// orthonormal within 1e-5 with determinant +1, and the last row is 0 0 0 1.
  void validate() const;
};

struct Point3 {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  friend bool operator==(const Point3&, const Point3&) = default;
};

struct PointCloud {
  std::vector<Point3> points;
  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Rasterizes `cloud` into a 3×h×w image of camera-frame (X, Y, Z).
/// Each point is moved into the camera frame; points with Z ≤ 0 are dropped;
/// the pixel is (u, v) = (round(fx·X/Z + cx), round(fy·Y/Z + cy)) with
/// halves rounded away from zero; pixels outside the image are dropped.
/// When several points land on one pixel the smallest Z wins (first one on
/// ties). Pixels without a point stay zero.
Tensor project(const PointCloud& cloud, const CameraCalib& calib, int h, int w);

/// Camera-frame coordinates of a LiDAR-frame point.
std::array<double, 3> to_camera_frame(const CameraCalib& calib, const Point3& p);

}  // namespace clft
