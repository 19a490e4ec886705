#include "clft/lidar_projection.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace clft {

void CameraCalib::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw CalibrationError("focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw CalibrationError("principal point must be finite");
  for (double v : extrinsic) {
    if (!std::isfinite(v)) throw CalibrationError("extrinsic holds a non-finite value");
  }
  auto r = [this](int i, int j) { return extrinsic[static_cast<std::size_t>(i * 4 + j)]; };
  constexpr double kTol = 1e-5;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += r(i, k) * r(j, k);
      if (std::abs(dot - (i == j ? 1.0 : 0.0)) > kTol) {
        throw CalibrationError("extrinsic rotation is not orthonormal (row " + std::to_string(i) + " · row " +
                               std::to_string(j) + " = " + std::to_string(dot) + ")");
      }
    }
  }
  const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                     r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                     r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
  if (std::abs(det - 1.0) > kTol) throw CalibrationError("extrinsic rotation has determinant " + std::to_string(det));
  if (r(3, 0) != 0.0 || r(3, 1) != 0.0 || r(3, 2) != 0.0 || r(3, 3) != 1.0) {
    throw CalibrationError("extrinsic last row must be 0 0 0 1");
  }
}

std::array<double, 3> to_camera_frame(const CameraCalib& calib, const Point3& p) {
  const auto& e = calib.extrinsic;
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = e[i * 4 + 0] * p.x + e[i * 4 + 1] * p.y + e[i * 4 + 2] * p.z + e[i * 4 + 3];
  }
  return out;
}

Tensor project(const PointCloud& cloud, const CameraCalib& calib, int h, int w) {
  if (h < 1 || w < 1) throw std::invalid_argument("projection size must be positive");
  calib.validate();
  const auto hh = static_cast<std::size_t>(h), ww = static_cast<std::size_t>(w);
  Tensor raster({3, hh, ww});
  std::vector<float> depth(hh * ww, std::numeric_limits<float>::infinity());
  for (const Point3& p : cloud.points) {
    const auto cam = to_camera_frame(calib, p);
    const double z = cam[2];
    if (!(z > 0.0)) continue;
    const double u = std::round(calib.fx * cam[0] / z + calib.cx);
    const double v = std::round(calib.fy * cam[1] / z + calib.cy);
    if (!(u >= 0.0 && u < w && v >= 0.0 && v < h)) continue;
    const auto px = static_cast<std::size_t>(u), py = static_cast<std::size_t>(v);
    const auto zf = static_cast<float>(z);
    float& best = depth[py * ww + px];
    if (zf < best) {
      best = zf;
      raster.at(0, py, px) = static_cast<float>(cam[0]);
      raster.at(1, py, px) = static_cast<float>(cam[1]);
      raster.at(2, py, px) = zf;
    }
  }
  return raster;
}

}  // namespace clft
