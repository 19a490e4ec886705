#include "clft/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <streambuf>

#include "json.hpp"

namespace clft {

std::string_view format_error_name(FormatErrorCode code) {
  switch (code) {
    case FormatErrorCode::kBadMagic: return "bad magic";
    case FormatErrorCode::kUnsupportedVersion: return "unsupported version";
    case FormatErrorCode::kTruncated: return "truncated stream";
    case FormatErrorCode::kTrailingData: return "trailing data";
    case FormatErrorCode::kUnknownDtype: return "unknown dtype";
    case FormatErrorCode::kDuplicateName: return "duplicate name";
    case FormatErrorCode::kBadHeader: return "malformed header";
    case FormatErrorCode::kUnsupportedMaxval: return "unsupported maxval";
    case FormatErrorCode::kBadValue: return "invalid value";
  }
  return "format error";
}

FormatError::FormatError(FormatErrorCode code, const std::string& what)
    : std::runtime_error(std::string(format_error_name(code)) + ": " + what), code_(code) {}

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'L', 'F', 'T'};
constexpr char kCloudMagic[4] = {'C', 'L', 'P', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::size_t kMaxNameLength = 1u << 16;
constexpr std::size_t kReadChunk = 1u << 20;

class MemoryBuffer : public std::streambuf {
 public:
  explicit MemoryBuffer(std::string_view bytes) {
    char* p = const_cast<char*>(bytes.data());
    setg(p, p, p + bytes.size());
  }
};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

void put_floats(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
}

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(FormatErrorCode::kTruncated, std::string("stream ended inside ") + what);
  }
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void fix_endianness(std::span<float> values) {
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : values) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
  }
}

// Reads `count` floats in bounded chunks so a corrupt count cannot force a
// huge allocation before the truncation is noticed.
std::vector<float> get_floats(std::istream& in, std::size_t count, const char* what) {
  std::vector<float> out;
  while (out.size() < count) {
    const std::size_t n = std::min(kReadChunk, count - out.size());
    const std::size_t at = out.size();
    out.resize(at + n);
    read_exact(in, reinterpret_cast<char*>(out.data() + at), n * sizeof(float), what);
  }
  fix_endianness(out);
  return out;
}

void expect_end(std::istream& in, const char* what) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(FormatErrorCode::kTrailingData, std::string("bytes after the end of ") + what);
  }
}

void expect_magic(std::istream& in, const char (&magic)[4], const char* what) {
  char got[4];
  in.read(got, 4);
  if (in.gcount() != 4) throw FormatError(FormatErrorCode::kTruncated, std::string(what) + " shorter than its magic");
  if (std::memcmp(got, magic, 4) != 0) {
    throw FormatError(FormatErrorCode::kBadMagic, std::string(what) + " does not start with \"" +
                                                      std::string(magic, 4) + "\"");
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

// Checkpoints -----------------------------------------------------------------

CheckpointWriter::CheckpointWriter(std::ostream& out, std::size_t count) : out_(out), remaining_(count) {
  out_.write(kCheckpointMagic, 4);
  put_u32(out_, kCheckpointVersion);
  put_u32(out_, static_cast<std::uint32_t>(count));
}

void CheckpointWriter::write(std::string_view name, const Tensor& tensor) {
  if (remaining_ == 0) throw std::logic_error("checkpoint writer: more entries than announced");
  if (!seen_.emplace(name).second) throw FormatError(FormatErrorCode::kDuplicateName, std::string(name));
  --remaining_;
  put_u32(out_, static_cast<std::uint32_t>(name.size()));
  out_.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out_, static_cast<std::uint32_t>(tensor.ndim()));
  for (std::size_t d : tensor.shape()) put_u32(out_, static_cast<std::uint32_t>(d));
  out_.put(static_cast<char>(kDtypeF32));
  put_floats(out_, tensor.data());
}

void CheckpointWriter::close() {
  if (remaining_ != 0) throw std::logic_error("checkpoint writer: " + std::to_string(remaining_) + " entries missing");
}

void write_checkpoint(std::ostream& out, std::span<const NamedTensorRef> entries) {
  std::set<std::string_view> seen;
  for (const NamedTensorRef& e : entries) {
    if (!seen.insert(e.name).second) throw FormatError(FormatErrorCode::kDuplicateName, std::string(e.name));
  }
  CheckpointWriter writer(out, entries.size());
  for (const NamedTensorRef& e : entries) writer.write(e.name, *e.tensor);
  writer.close();
}

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> entries) {
  std::vector<NamedTensorRef> refs;
  refs.reserve(entries.size());
  for (const NamedTensor& e : entries) refs.push_back({e.name, &e.tensor});
  write_checkpoint(out, std::span<const NamedTensorRef>(refs));
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  expect_magic(in, kCheckpointMagic, "checkpoint");
  const std::uint32_t version = get_u32(in, "header");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorCode::kUnsupportedVersion, "checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(in, "header");
  std::vector<NamedTensor> entries;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in, "entry name length");
    if (name_len > kMaxNameLength) {
      throw FormatError(FormatErrorCode::kBadValue, "entry name length " + std::to_string(name_len));
    }
    std::string name(name_len, '\0');
    read_exact(in, name.data(), name_len, "entry name");
    if (!seen.insert(name).second) throw FormatError(FormatErrorCode::kDuplicateName, name);
    const std::uint32_t ndim = get_u32(in, "entry rank");
    if (ndim == 0 || ndim > 8) throw FormatError(FormatErrorCode::kBadValue, name + ": rank " + std::to_string(ndim));
    Shape shape(ndim);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = get_u32(in, "entry shape");
      if (d == 0) throw FormatError(FormatErrorCode::kBadValue, name + ": zero-sized dimension");
      numel *= d;
    }
    char dtype = 0;
    read_exact(in, &dtype, 1, "entry dtype");
    if (static_cast<std::uint8_t>(dtype) != kDtypeF32) {
      throw FormatError(FormatErrorCode::kUnknownDtype,
                        name + ": dtype " + std::to_string(static_cast<unsigned>(static_cast<std::uint8_t>(dtype))));
    }
    std::vector<float> data = get_floats(in, numel, "tensor data");
    entries.push_back(NamedTensor{std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  expect_end(in, "checkpoint");
  return entries;
}

std::string encode_checkpoint(std::span<const NamedTensor> entries) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint(os, entries);
  return std::move(os).str();
}

std::vector<NamedTensor> decode_checkpoint(std::string_view bytes) {
  MemoryBuffer buf(bytes);
  std::istream in(&buf);
  return read_checkpoint(in);
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> entries) {
  auto out = open_out(path);
  write_checkpoint(out, entries);
  finish(out, path);
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensorRef> entries) {
  auto out = open_out(path);
  write_checkpoint(out, entries);
  finish(out, path);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_checkpoint(in);
}

namespace {

Tensor raster_from_entries(std::vector<NamedTensor> entries) {
  if (entries.size() != 1 || entries[0].name != "raster") {
    throw FormatError(FormatErrorCode::kBadValue, "raster file must hold exactly one entry named \"raster\"");
  }
  if (entries[0].tensor.ndim() != 3) {
    throw FormatError(FormatErrorCode::kBadValue,
                      "raster must be C×H×W, got " + shape_to_string(entries[0].tensor.shape()));
  }
  return std::move(entries[0].tensor);
}

}  // namespace

void save_raster(const std::filesystem::path& path, const Tensor& raster) {
  const NamedTensor entry{"raster", raster};
  save_checkpoint(path, std::span<const NamedTensor>(&entry, 1));
}

Tensor load_raster(const std::filesystem::path& path) { return raster_from_entries(load_checkpoint(path)); }

Tensor decode_raster(std::string_view bytes) { return raster_from_entries(decode_checkpoint(bytes)); }

// Netpbm ----------------------------------------------------------------------

namespace {

struct NetpbmHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm(std::string_view bytes, std::string_view magic) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != magic) {
    throw FormatError(FormatErrorCode::kBadMagic, "expected \"" + std::string(magic) + "\" netpbm file");
  }
  std::size_t pos = 2;
  auto skip_space = [&] {
    for (;;) {
      if (pos >= bytes.size()) throw FormatError(FormatErrorCode::kBadHeader, "header ends early");
      const char ch = bytes[pos];
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos;
      } else {
        return;
      }
    }
  };
  auto read_number = [&](const char* field) -> std::size_t {
    if (pos >= bytes.size()) throw FormatError(FormatErrorCode::kBadHeader, "header ends early");
    if (!std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#') {
      throw FormatError(FormatErrorCode::kBadHeader, std::string("expected whitespace before ") + field);
    }
    skip_space();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw FormatError(FormatErrorCode::kBadHeader, std::string(field) + " too large");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw FormatError(FormatErrorCode::kBadHeader, std::string("missing ") + field);
    return v;
  };
  NetpbmHeader h;
  h.width = read_number("width");
  h.height = read_number("height");
  const std::size_t maxval = read_number("maxval");
  if (h.width == 0 || h.height == 0) throw FormatError(FormatErrorCode::kBadHeader, "zero image size");
  if (maxval != 255) throw FormatError(FormatErrorCode::kUnsupportedMaxval, "maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(FormatErrorCode::kBadHeader, "missing whitespace after maxval");
  }
  h.data_offset = pos + 1;
  return h;
}

void check_payload(std::string_view bytes, const NetpbmHeader& h, std::size_t expected) {
  const std::size_t available = bytes.size() - h.data_offset;
  if (available < expected) {
    throw FormatError(FormatErrorCode::kTruncated,
                      std::to_string(available) + " pixel bytes, expected " + std::to_string(expected));
  }
  if (available > expected) {
    throw FormatError(FormatErrorCode::kTrailingData, std::to_string(available - expected) + " extra bytes");
  }
}

}  // namespace

Tensor decode_ppm(std::string_view bytes) {
  const NetpbmHeader h = parse_netpbm(bytes, "P6");
  check_payload(bytes, h, h.width * h.height * 3);
  Tensor image({3, h.height, h.width});
  const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
  for (std::size_t y = 0; y < h.height; ++y) {
    for (std::size_t x = 0; x < h.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        image.at(c, y, x) = static_cast<float>(px[(y * h.width + x) * 3 + c]) / 255.0f;
      }
    }
  }
  return image;
}

std::string encode_ppm(const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ShapeError("PPM images must be 3×H×W, got " + shape_to_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + h * w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        out[header + (y * w + x) * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
      }
    }
  }
  return out;
}

Tensor read_image_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

void write_image_ppm(const std::filesystem::path& path, const Tensor& image) { write_file(path, encode_ppm(image)); }

Mask decode_pgm(std::string_view bytes) {
  const NetpbmHeader h = parse_netpbm(bytes, "P5");
  check_payload(bytes, h, h.width * h.height);
  Mask mask(h.height, h.width);
  std::memcpy(mask.labels.data(), bytes.data() + h.data_offset, mask.labels.size());
  return mask;
}

std::string encode_pgm(const Mask& mask) {
  if (mask.height == 0 || mask.width == 0 || mask.labels.size() != mask.height * mask.width) {
    throw ShapeError("mask size does not match its label buffer");
  }
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(mask.labels.data()), mask.labels.size());
  return out;
}

Mask read_mask_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask) { write_file(path, encode_pgm(mask)); }

// Point clouds ----------------------------------------------------------------

PointCloud decode_pointcloud(std::string_view bytes) {
  MemoryBuffer buf(bytes);
  std::istream in(&buf);
  expect_magic(in, kCloudMagic, "point cloud");
  const std::uint32_t count = get_u32(in, "point count");
  const std::vector<float> xyz = get_floats(in, static_cast<std::size_t>(count) * 3, "point data");
  expect_end(in, "point cloud");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) cloud.points.push_back({xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]});
  return cloud;
}

std::string encode_pointcloud(const PointCloud& cloud) {
  std::ostringstream os(std::ios::binary);
  os.write(kCloudMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(cloud.points.size()));
  std::vector<float> xyz;
  xyz.reserve(cloud.points.size() * 3);
  for (const Point3& p : cloud.points) xyz.insert(xyz.end(), {p.x, p.y, p.z});
  put_floats(os, xyz);
  return std::move(os).str();
}

PointCloud read_pointcloud(const std::filesystem::path& path) { return decode_pointcloud(read_file(path)); }

void write_pointcloud(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file(path, encode_pointcloud(cloud));
}

// Calibration -----------------------------------------------------------------

CalibrationFile parse_calibration(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw FormatError(FormatErrorCode::kBadHeader, std::string("calibration is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError(FormatErrorCode::kBadHeader, "calibration must be a JSON object");
  auto number = [&](const char* key) -> double {
    if (!doc.contains(key) || !doc[key].is_number()) {
      throw FormatError(FormatErrorCode::kBadValue, std::string("calibration needs numeric \"") + key + "\"");
    }
    return doc[key].get<double>();
  };
  CalibrationFile out;
  out.calib.fx = number("fx");
  out.calib.fy = number("fy");
  out.calib.cx = number("cx");
  out.calib.cy = number("cy");
  const auto& ext = doc.contains("extrinsic") ? doc["extrinsic"] : json();
  if (!ext.is_array() || ext.size() != 16) {
    throw FormatError(FormatErrorCode::kBadValue, "calibration \"extrinsic\" must hold 16 numbers");
  }
  for (std::size_t i = 0; i < 16; ++i) {
    if (!ext[i].is_number()) throw FormatError(FormatErrorCode::kBadValue, "extrinsic entries must be numbers");
    out.calib.extrinsic[i] = ext[i].get<double>();
  }
  const auto& size = doc.contains("image_size") ? doc["image_size"] : json();
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() || !size[1].is_number_integer() ||
      size[0].get<long long>() < 1 || size[1].get<long long>() < 1 || size[0].get<long long>() > (1 << 16) ||
      size[1].get<long long>() > (1 << 16)) {
    throw FormatError(FormatErrorCode::kBadValue, "calibration \"image_size\" must be [height, width] > 0");
  }
  out.height = size[0].get<int>();
  out.width = size[1].get<int>();
  out.calib.validate();
  return out;
}

std::string format_calibration(const CalibrationFile& calib) {
  nlohmann::ordered_json doc;
  doc["fx"] = calib.calib.fx;
  doc["fy"] = calib.calib.fy;
  doc["cx"] = calib.calib.cx;
  doc["cy"] = calib.calib.cy;
  doc["extrinsic"] = calib.calib.extrinsic;
  doc["image_size"] = {calib.height, calib.width};
  return doc.dump(2) + "\n";
}

CalibrationFile read_calibration(const std::filesystem::path& path) { return parse_calibration(read_file(path)); }

void write_calibration(const std::filesystem::path& path, const CalibrationFile& calib) {
  write_file(path, format_calibration(calib));
}

// Files -----------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return std::move(os).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  auto out = open_out(path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(out, path);
}

}  // namespace clft
