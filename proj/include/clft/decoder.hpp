#pragma once

#include <array>

#include "clft/config.hpp"
#include "clft/embedding.hpp"
#include "clft/feature_map.hpp"
#include "clft/tensor.hpp"

namespace clft {

struct ReadoutWeights {
  Tensor weight;  // 2D × D
  Tensor bias;    // D
};

/// Channel projection (1×1 conv, C → D̂) followed by an optional spatial
/// conv: a transposed conv (kernel = stride = f) to upsample by f, or a 3×3
/// stride-f conv (pad 1) to downsample. Empty spatial weights mean the map
/// already has the stage resolution.
struct ResampleWeights {
  ConvWeights project;
  ConvWeights spatial;
};

/// Pre-activation residual unit: out = x + conv2(relu(conv1(relu(x)))).
/// The convs carry no bias, so a zero map passes through unchanged.
struct RcuWeights {
  ConvWeights conv1;  // D̂×D̂×3×3
  ConvWeights conv2;
};

struct FusionStageWeights {
  std::array<RcuWeights, 2> camera;
  std::array<RcuWeights, 2> lidar;
  RcuWeights merge;
};

struct HeadWeights {
  ConvWeights deconv;      // D̂ × D̂/2 × 2 × 2, stride 2
  ConvWeights classifier;  // classes × D̂/2 × 1 × 1
};

/// Removes the class token (row 0) according to `mode`:
///   ignore  → rows 1..n
///   add     → rows 1..n plus row 0
///   project → GELU([row k, row 0] · W + b)
/// `w` is only read in project mode.
Tensor readout(const TokenMatrix& tokens, ReadoutMode mode, const ReadoutWeights* w = nullptr);

/// Token k becomes pixel (k / cols, k % cols) of a D×rows×cols map.
FeatureMap reassemble(const Tensor& spatial, const PatchGrid& grid);

/// Inverse of reassemble: C×H×W map to (H·W)×C tokens.
Tensor flatten_tokens(const FeatureMap& map);

/// Brings `map` to D̂ × (r/scale) × (c/scale). The spatial operator is picked
/// from the ratio between the map's height and the target height.
FeatureMap resample_stage(const FeatureMap& map, int scale, const ClftConfig& cfg, const ResampleWeights& w);

/// Zero resample weights for a map of in_channels×in_h×in_w going to stage `scale`.
ResampleWeights allocate_resample(int in_channels, int in_h, int in_w, int scale, const ClftConfig& cfg);

FeatureMap rcu(const FeatureMap& map, const RcuWeights& w);

/// One cross-fusion stage. Each present branch goes through its two RCUs;
/// the branch outputs and the 2× bilinearly upsampled previous stage (when
/// present) are summed and passed through the merge RCU. Absent inputs
/// contribute nothing. At least one of cam/lid must be present.
FeatureMap fuse_stage(const FeatureMap* cam, const FeatureMap* lid, const FeatureMap* prev,
                      const FusionStageWeights& w);

/// deconv (×2) → ReLU → 1×1 classifier → bilinear resize to rows×cols.
Tensor segmentation_head(const FeatureMap& fused, const HeadWeights& w, int classes, int rows, int cols);

}  // namespace clft
