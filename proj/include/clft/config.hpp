#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace clft {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Variant { kBase, kLarge, kHuge, kHybrid };

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

/// How the decoder folds the class token into the patch tokens.
enum class ReadoutMode { kIgnore, kAdd, kProject };

std::string_view readout_name(ReadoutMode m);
std::optional<ReadoutMode> parse_readout(std::string_view name);

/// Where a decoder stage takes its features from: the output of a
/// transformer layer (1-based), or a residual-stem stage of the hybrid
/// backbone (1 = stride-4 map, 2 = stride-8 map).
struct TapSource {
  enum class Kind { kLayer, kStem };
  Kind kind = Kind::kLayer;
  int index = 0;

  static constexpr TapSource layer(int i) { return {Kind::kLayer, i}; }
  static constexpr TapSource stem(int i) { return {Kind::kStem, i}; }
  bool is_layer() const { return kind == Kind::kLayer; }
  friend bool operator==(const TapSource&, const TapSource&) = default;
};

/// Bottleneck residual stem used by the hybrid variant. Stage widths are
/// the ResNet50 widths divided by `width_divisor`; block counts follow
/// ResNet50 up to stride 16.
struct StemConfig {
  int width_divisor = 4;
  std::array<int, 3> blocks = {3, 4, 6};

  int stem_channels() const { return 64 / width_divisor; }
  int mid_channels(int stage) const { return (64 << stage) / width_divisor; }
  int out_channels(int stage) const { return 4 * mid_channels(stage); }
};

inline const std::vector<std::string>& default_classes() {
  static const std::vector<std::string> kClasses = {"background", "vehicle", "pedestrian", "cyclist", "sign"};
  return kClasses;
}

struct ClftConfig {
  Variant variant = Variant::kBase;
  int layers = 12;
  int dim = 768;
  int heads = 12;
  int head_dim = 64;
  int mlp_dim = 3072;
  std::array<TapSource, 4> taps{};
  std::array<int, 4> scales = {4, 8, 16, 32};
  int fusion_dim = 256;
  std::vector<std::string> classes = default_classes();
  int patch = 16;
  int rows = 384;
  int cols = 384;
  ReadoutMode readout = ReadoutMode::kProject;
  StemConfig stem{};
  float ln_eps = 1e-6f;

  bool hybrid() const { return variant == Variant::kHybrid; }
  int num_classes() const { return static_cast<int>(classes.size()); }
  int grid_rows() const { return rows / patch; }
  int grid_cols() const { return cols / patch; }
  int num_tokens() const { return grid_rows() * grid_cols(); }
  /// Width of one token before projection: p·p·3, or the stem output width.
  int token_dim() const { return hybrid() ? stem.out_channels(2) : patch * patch * 3; }
  /// Transformer layers whose output feeds the decoder, ascending.
  std::vector<int> tap_layers() const;
};

/// The four table configurations at 384×384 with d_k = 64.
ClftConfig make_config(Variant v);

/// Structural checks: heads·head_dim == dim, four taps and scales, every
/// layer tap within range, sizes divisible by patch and scales, stem taps
/// only for the hybrid variant. Throws ConfigError.
void validate(const ClftConfig& cfg);

/// True when (variant, layers, dim) is one of the table rows.
bool matches_variant_table(const ClftConfig& cfg);

}  // namespace clft
