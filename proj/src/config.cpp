#include "clft/config.hpp"

#include <algorithm>

namespace clft {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kBase: return "base";
    case Variant::kLarge: return "large";
    case Variant::kHuge: return "huge";
    case Variant::kHybrid: return "hybrid";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : {Variant::kBase, Variant::kLarge, Variant::kHuge, Variant::kHybrid}) {
    if (variant_name(v) == name) return v;
  }
  return std::nullopt;
}

std::string_view readout_name(ReadoutMode m) {
  switch (m) {
    case ReadoutMode::kIgnore: return "ignore";
    case ReadoutMode::kAdd: return "add";
    case ReadoutMode::kProject: return "project";
  }
  return "unknown";
}

std::optional<ReadoutMode> parse_readout(std::string_view name) {
  for (ReadoutMode m : {ReadoutMode::kIgnore, ReadoutMode::kAdd, ReadoutMode::kProject}) {
    if (readout_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<int> ClftConfig::tap_layers() const {
  std::vector<int> out;
  for (const TapSource& t : taps) {
    if (t.is_layer()) out.push_back(t.index);
  }
  return out;
}

ClftConfig make_config(Variant v) {
  ClftConfig cfg;
  cfg.variant = v;
  switch (v) {
    case Variant::kBase:
      cfg.layers = 12;
      cfg.dim = 768;
      cfg.taps = {TapSource::layer(3), TapSource::layer(6), TapSource::layer(9), TapSource::layer(12)};
      break;
    case Variant::kLarge:
      cfg.layers = 24;
      cfg.dim = 1024;
      cfg.taps = {TapSource::layer(5), TapSource::layer(12), TapSource::layer(18), TapSource::layer(24)};
      break;
    case Variant::kHuge:
      // No tap layers are given for this size; spread evenly like the others.
      cfg.layers = 32;
      cfg.dim = 1280;
      cfg.taps = {TapSource::layer(8), TapSource::layer(16), TapSource::layer(24), TapSource::layer(32)};
      break;
    case Variant::kHybrid:
      cfg.layers = 12;
      cfg.dim = 768;
      cfg.taps = {TapSource::stem(1), TapSource::stem(2), TapSource::layer(9), TapSource::layer(12)};
      break;
  }
  cfg.head_dim = 64;
  cfg.heads = cfg.dim / cfg.head_dim;
  cfg.mlp_dim = 4 * cfg.dim;
  return cfg;
}

void validate(const ClftConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (cfg.layers < 1 || cfg.dim < 1 || cfg.heads < 1 || cfg.head_dim < 1 || cfg.mlp_dim < 1) {
    fail("sizes must be positive");
  }
  if (cfg.heads * cfg.head_dim != cfg.dim) fail("heads * head_dim must equal dim");
  if (cfg.fusion_dim < 2 || cfg.fusion_dim % 2 != 0) fail("fusion_dim must be even and >= 2");
  if (cfg.classes.empty() || cfg.classes.size() > 255) fail("class list must hold 1..255 names");
  if (cfg.patch < 1 || cfg.rows % cfg.patch != 0 || cfg.cols % cfg.patch != 0) {
    fail("input size must be divisible by the patch size");
  }
  int prev_layer = 0;
  for (std::size_t i = 0; i < cfg.taps.size(); ++i) {
    const TapSource& t = cfg.taps[i];
    if (t.is_layer()) {
      if (t.index < 1 || t.index > cfg.layers) fail("tap layer out of range");
      if (t.index <= prev_layer) fail("tap layers must be strictly ascending");
      prev_layer = t.index;
    } else {
      if (!cfg.hybrid()) fail("stem taps require the hybrid variant");
      if (t.index < 1 || t.index > 2) fail("stem tap index must be 1 or 2");
      if (prev_layer > 0) fail("stem taps must precede layer taps");
    }
    const int s = cfg.scales[i];
    if (s < 1 || cfg.rows % s != 0 || cfg.cols % s != 0) fail("input size must be divisible by every scale");
    if (i > 0 && s != 2 * cfg.scales[i - 1]) fail("scales must double from stage to stage");
  }
  if (cfg.hybrid() && cfg.patch != 16) fail("hybrid stem has a fixed stride of 16");
}

bool matches_variant_table(const ClftConfig& cfg) {
  switch (cfg.variant) {
    case Variant::kBase: return cfg.layers == 12 && cfg.dim == 768;
    case Variant::kLarge: return cfg.layers == 24 && cfg.dim == 1024;
    case Variant::kHuge: return cfg.layers == 32 && cfg.dim == 1280;
    case Variant::kHybrid: return cfg.layers == 12 && cfg.dim == 768;
  }
  return false;
}

}  // namespace clft
