#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "clft/lidar_projection.hpp"
#include "clft/metrics.hpp"
#include "clft/tensor.hpp"

namespace clft {

// Wire formats. Multibyte integers are little-endian u32, floats IEEE-754
// binary32 little-endian.
//
// Checkpoint / tensor file:
//   "CLFT" | version=1 | entry count
//   per entry: name length | name (utf-8) | ndim | dims... | dtype (u8, 0=f32) | data
// Point cloud:
//   "CLPC" | point count | count × (x, y, z)
// LiDAR raster: a checkpoint holding exactly one entry named "raster".
// Images: binary PPM (P6, maxval 255), read as channel-planar floats in [0, 1].
// Masks: binary PGM (P5, maxval 255) holding raw labels, 255 = void.
// Calibration: JSON object {"fx", "fy", "cx", "cy", "extrinsic": [16 numbers,
//   row-major LiDAR→camera], "image_size": [height, width]}.

enum class FormatErrorCode {
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kTrailingData,
  kUnknownDtype,
  kDuplicateName,
  kBadHeader,
  kUnsupportedMaxval,
  kBadValue,
};

std::string_view format_error_name(FormatErrorCode code);

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorCode code, const std::string& what);
  FormatErrorCode code() const { return code_; }

 private:
  FormatErrorCode code_;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Borrowed view of an entry, for writing without copying tensors.
struct NamedTensorRef {
  std::string_view name;
  const Tensor* tensor = nullptr;
};

/// Writes a checkpoint one entry at a time, for files too large to hold in
/// memory at once. Exactly `count` entries must follow.
class CheckpointWriter {
 public:
  CheckpointWriter(std::ostream& out, std::size_t count);
  void write(std::string_view name, const Tensor& tensor);
  /// Throws unless all announced entries were written.
  void close();

 private:
  std::ostream& out_;
  std::size_t remaining_;
  std::set<std::string, std::less<>> seen_;
};

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> entries);
void write_checkpoint(std::ostream& out, std::span<const NamedTensorRef> entries);
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensorRef> entries);
std::vector<NamedTensor> read_checkpoint(std::istream& in);
std::string encode_checkpoint(std::span<const NamedTensor> entries);
std::vector<NamedTensor> decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> entries);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

void save_raster(const std::filesystem::path& path, const Tensor& raster);
Tensor load_raster(const std::filesystem::path& path);
Tensor decode_raster(std::string_view bytes);

Tensor decode_ppm(std::string_view bytes);
std::string encode_ppm(const Tensor& image);
Tensor read_image_ppm(const std::filesystem::path& path);
/// Values are clamped to [0, 1] and rounded to the nearest byte.
void write_image_ppm(const std::filesystem::path& path, const Tensor& image);

Mask decode_pgm(std::string_view bytes);
std::string encode_pgm(const Mask& mask);
Mask read_mask_pgm(const std::filesystem::path& path);
void write_mask_pgm(const std::filesystem::path& path, const Mask& mask);

PointCloud decode_pointcloud(std::string_view bytes);
std::string encode_pointcloud(const PointCloud& cloud);
PointCloud read_pointcloud(const std::filesystem::path& path);
void write_pointcloud(const std::filesystem::path& path, const PointCloud& cloud);

struct CalibrationFile {
  CameraCalib calib;
  int height = 0;
  int width = 0;
};

/// Parses and validates; malformed JSON or missing keys raise FormatError,
/// an invalid rotation raises CalibrationError.
CalibrationFile parse_calibration(std::string_view json);
std::string format_calibration(const CalibrationFile& calib);
CalibrationFile read_calibration(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path, const CalibrationFile& calib);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace clft
