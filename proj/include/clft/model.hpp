#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clft/config.hpp"
#include "clft/decoder.hpp"
#include "clft/embedding.hpp"
#include "clft/encoder.hpp"
#include "clft/io.hpp"
#include "clft/metrics.hpp"

namespace clft {

enum class ModalityMode { kCameraOnly, kLidarOnly, kCrossFusion };

/// CLI spelling: camera, lidar, fusion.
std::string_view modality_name(ModalityMode m);
std::optional<ModalityMode> parse_modality(std::string_view name);

/// Everything one modality owns: embedding, optional residual stem,
/// transformer layers, and the per-stage readout/resample front of the
/// decoder. Readout weights are empty for stem-fed stages.
struct BranchWeights {
  EmbeddingWeights embedding;
  std::optional<ResidualStemWeights> stem;
  std::vector<EncoderLayerWeights> layers;
  std::array<ReadoutWeights, 4> readout;
  std::array<ResampleWeights, 4> resample;
};

/// Camera and LiDAR branches never share weights; they meet only in the
/// fusion stages. fusion[i] handles stage i (shallow to deep, scale s_i).
struct ModelWeights {
  BranchWeights camera;
  BranchWeights lidar;
  std::array<FusionStageWeights, 4> fusion;
  HeadWeights head;
};

enum class ParamKind { kWeight, kBias, kNormScale, kNormShift, kEmbedding };

/// Every parameter of the model with the right shape: zero weights and
/// biases, unit layer-norm scales.
ModelWeights allocate_model(const ClftConfig& cfg);

/// Seeded deterministic init: weights from a normal(0, 0.02²) truncated at
/// two sigma, positional and class embeddings from normal(0, 0.02²), biases
/// and norm shifts zero, norm scales one. Each tensor draws from its own
/// stream keyed by (seed, parameter name).
ModelWeights init_model(const ClftConfig& cfg, std::uint64_t seed);

/// Visits parameters in checkpoint order with their stable names.
void for_each_parameter(const ModelWeights& w, const std::function<void(const std::string&, const Tensor&, ParamKind)>& f);
void for_each_parameter(ModelWeights& w, const std::function<void(const std::string&, Tensor&, ParamKind)>& f);

std::size_t parameter_count(const ModelWeights& w);

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamKind kind;
};

/// Names, shapes and kinds in checkpoint order, without materializing the
/// encoder weights.
std::vector<ParamSpec> parameter_specs(const ClftConfig& cfg);

/// Fills `t` the way init_model fills the parameter called `name`.
void init_parameter(const std::string& name, ParamKind kind, std::uint64_t seed, Tensor& t);

/// Same bytes as save_model(path, init_model(cfg, seed)) but generated one
/// tensor at a time, so the largest variants fit in memory.
void write_initialized_model(const std::filesystem::path& path, const ClftConfig& cfg, std::uint64_t seed);

void save_model(const std::filesystem::path& path, const ModelWeights& w);
std::string encode_model(const ModelWeights& w);

/// Matches checkpoint entries against the parameters cfg requires. Missing,
/// unexpected, or mis-shaped entries raise ConfigError.
ModelWeights model_from_entries(std::vector<NamedTensor> entries, const ClftConfig& cfg);
ModelWeights load_model(const std::filesystem::path& path, const ClftConfig& cfg);

struct BranchTrace {
  Shape patches;
  Shape tokens;
  Shape head_q;
  Shape head_k;
  Shape head_v;
  std::vector<Shape> taps;
  std::vector<Shape> reassembled;
  std::vector<Shape> resampled;
};

/// Intermediate shapes of one forward pass, for inspection.
struct ForwardTrace {
  BranchTrace camera;
  BranchTrace lidar;
  std::vector<Shape> fused;  // deepest stage first
  Shape logits;
};

/// Per-stage decoder inputs (after resampling) of one modality.
std::array<FeatureMap, 4> branch_features(const Tensor& image, const BranchWeights& w, const ClftConfig& cfg,
                                          BranchTrace* trace = nullptr);

/// Full network. Inputs are 3×rows×cols; the ones the mode does not use
/// may be null and are ignored. Returns classes×rows×cols logits.
Tensor clft_forward(const Tensor* camera, const Tensor* lidar, ModalityMode mode, const ModelWeights& w,
                    const ClftConfig& cfg, ForwardTrace* trace = nullptr);

/// Per-pixel argmax over classes; ties go to the lowest class index.
Mask predict_mask(const Tensor& logits);

}  // namespace clft
