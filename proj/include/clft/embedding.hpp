#pragma once

#include <optional>
#include <vector>

#include "clft/config.hpp"
#include "clft/feature_map.hpp"
#include "clft/tensor.hpp"

namespace clft {

struct PatchGrid {
  int rows = 0;
  int cols = 0;
  int patch = 0;
  int token_dim = 0;

  int tokens() const { return rows * cols; }
  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

/// Transformer input sequence: row 0 is the class token, rows 1..n the
/// patch tokens in row-major grid order.
struct TokenMatrix {
  Tensor tokens;
  PatchGrid grid;
};

struct EmbeddingWeights {
  Tensor projection;   // token_dim × D
  Tensor positional;   // (n+1) × D
  Tensor class_token;  // 1 × D
};

/// Splits image[C×r×c] into non-overlapping p×p patches. Row k of the result
/// is patch k (row-major over the grid) flattened channel-major, then row,
/// then column: index = (ch·p + dy)·p + dx.
Tensor patchify(const Tensor& image, int patch);

/// Exact inverse of patchify.
Tensor unpatchify(const Tensor& patches, int channels, int rows, int cols, int patch);

PatchGrid patch_grid_for(const ClftConfig& cfg);

/// tokens = [class_token; patches·E] + positional.
TokenMatrix embed(const Tensor& patches, const EmbeddingWeights& w, const PatchGrid& grid);

// Hybrid residual stem ------------------------------------------------------

struct ConvWeights {
  Tensor weight;  // F×C×kh×kw
  Tensor bias;    // F
};

struct BottleneckWeights {
  ConvWeights reduce;                     // 1×1
  ConvWeights spatial;                    // 3×3, carries the block stride
  ConvWeights expand;                     // 1×1
  std::optional<ConvWeights> projection;  // 1×1 shortcut when shape changes
  int stride = 1;
};

struct ResidualStemWeights {
  ConvWeights stem;  // 7×7 stride 2, followed by 3×3 stride-2 max pooling
  std::vector<std::vector<BottleneckWeights>> stages;
};

struct StemOutput {
  Tensor tokens;                      // n × token_dim, row-major grid order
  PatchGrid grid;
  std::vector<FeatureMap> stage_maps;  // stride-4 and stride-8 stage outputs
};

/// Builds zero-filled stem weights with the shapes `stem` prescribes.
ResidualStemWeights allocate_stem(const StemConfig& stem);

/// Bottleneck-residual stem (strides 4, 8, 16). The stride-16 output is
/// flattened into tokens; the two shallower stage outputs are returned.
StemOutput hybrid_stem(const Tensor& image, const ResidualStemWeights& stem);

}  // namespace clft
