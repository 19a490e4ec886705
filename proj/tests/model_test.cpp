#include <gtest/gtest.h>

#include <set>

#include "clft/model.hpp"
#include "test_support.hpp"

using namespace clft;
using clft::testing::random_tensor;
using clft::testing::tiny_config;

namespace {

std::vector<NamedTensor> entries_of(const ModelWeights& m) {
  std::vector<NamedTensor> out;
  for_each_parameter(m, [&](const std::string& name, const Tensor& t, ParamKind) { out.push_back({name, t}); });
  return out;
}

void zero_resample(BranchWeights& b) {
  for (auto& r : b.resample) {
    for (ConvWeights* c : {&r.project, &r.spatial}) {
      for (float& v : c->weight.data()) v = 0.0f;
      for (float& v : c->bias.data()) v = 0.0f;
    }
  }
}

}  // namespace

TEST(ModalityTest, NamesRoundTrip) {
  for (auto m : {ModalityMode::kCameraOnly, ModalityMode::kLidarOnly, ModalityMode::kCrossFusion}) {
    EXPECT_EQ(parse_modality(modality_name(m)), m);
  }
  EXPECT_FALSE(parse_modality("radar").has_value());
}

TEST(ModelParamsTest, NamesAreUniqueAndBranchesSeparate) {
  const ModelWeights m = allocate_model(tiny_config());
  std::set<std::string> names;
  std::size_t camera = 0, lidar = 0;
  for_each_parameter(m, [&](const std::string& name, const Tensor& t, ParamKind) {
    EXPECT_TRUE(names.insert(name).second) << name;
    EXPECT_FALSE(t.empty()) << name;
    camera += name.starts_with("camera.");
    lidar += name.starts_with("lidar.");
  });
  EXPECT_EQ(camera, lidar);
  EXPECT_TRUE(names.contains("camera.encoder.layer4.attn.q.weight"));
  EXPECT_TRUE(names.contains("fusion.stage0.merge.conv2.weight"));
  EXPECT_TRUE(names.contains("head.classifier.bias"));
}

TEST(ModelParamsTest, SpecsDescribeTheAllocatedModel) {
  for (Variant v : {Variant::kBase, Variant::kHybrid}) {
    const ClftConfig cfg = tiny_config(v);
    const ModelWeights m = allocate_model(cfg);
    const auto specs = parameter_specs(cfg);
    std::size_t i = 0;
    for_each_parameter(m, [&](const std::string& name, const Tensor& t, ParamKind kind) {
      ASSERT_LT(i, specs.size());
      EXPECT_EQ(specs[i].name, name);
      EXPECT_EQ(specs[i].shape, t.shape()) << name;
      EXPECT_EQ(specs[i].kind, kind) << name;
      ++i;
    });
    EXPECT_EQ(i, specs.size());
  }
}

TEST(ModelParamsTest, BaseParameterBudget) {
  // Per branch: embedding, 12 layers of 12·D² + 13·D, readouts, resamples.
  const ClftConfig cfg = make_config(Variant::kBase);
  std::size_t total = 0, layer1 = 0;
  for (const ParamSpec& s : parameter_specs(cfg)) {
    total += shape_numel(s.shape);
    if (s.name.starts_with("camera.encoder.layer1.")) layer1 += shape_numel(s.shape);
  }
  EXPECT_EQ(layer1, 12u * 768 * 768 + 13u * 768);
  EXPECT_GT(total, 2u * 12 * layer1);
  EXPECT_LT(total, 260'000'000u);
}

TEST(ModelInitTest, SeededAndDistributed) {
  const ClftConfig cfg = tiny_config();
  const ModelWeights a = init_model(cfg, 42), b = init_model(cfg, 42), c = init_model(cfg, 43);
  EXPECT_EQ(encode_model(a), encode_model(b));
  EXPECT_NE(encode_model(a), encode_model(c));
  for_each_parameter(a, [](const std::string& name, const Tensor& t, ParamKind kind) {
    switch (kind) {
      case ParamKind::kWeight:
        for (float v : t.data()) ASSERT_LE(std::abs(v), 0.04f) << name;
        break;
      case ParamKind::kBias:
      case ParamKind::kNormShift:
        for (float v : t.data()) ASSERT_EQ(v, 0.0f) << name;
        break;
      case ParamKind::kNormScale:
        for (float v : t.data()) ASSERT_EQ(v, 1.0f) << name;
        break;
      case ParamKind::kEmbedding:
        break;
    }
  });
  // Sample moments of one large weight against the ±2σ truncated normal.
  const Tensor& w = a.camera.layers[0].mlp_w1;
  double m1 = 0.0, m2 = 0.0;
  for (float v : w.data()) {
    m1 += v;
    m2 += static_cast<double>(v) * v;
  }
  m1 /= static_cast<double>(w.numel());
  m2 /= static_cast<double>(w.numel());
  EXPECT_NEAR(m1, 0.0, 1e-3);
  EXPECT_NEAR(std::sqrt(m2), 0.02 * 0.8796, 1e-3);
}

TEST(ModelInitTest, StreamingWriterMatchesInMemoryModel) {
  clft::testing::TempDir dir("model");
  for (Variant v : {Variant::kBase, Variant::kHybrid}) {
    const ClftConfig cfg = tiny_config(v);
    write_initialized_model(dir / "m.ckpt", cfg, 9);
    EXPECT_EQ(read_file(dir / "m.ckpt"), encode_model(init_model(cfg, 9)));
  }
}

TEST(ModelCheckpointTest, RoundTripAndStrictMatching) {
  const ClftConfig cfg = tiny_config();
  const ModelWeights m = init_model(cfg, 1);
  const std::string bytes = encode_model(m);
  const ModelWeights back = model_from_entries(decode_checkpoint(bytes), cfg);
  EXPECT_EQ(encode_model(back), bytes);

  auto entries = entries_of(m);
  auto missing = entries;
  missing.pop_back();
  EXPECT_THROW(model_from_entries(missing, cfg), ConfigError);

  auto extra = entries;
  extra.push_back({"camera.encoder.layer99.ln1.gamma", Tensor({32}, 1.0f)});
  EXPECT_THROW(model_from_entries(extra, cfg), ConfigError);

  auto reshaped = entries;
  reshaped[0].tensor = Tensor({1, reshaped[0].tensor.numel()});
  EXPECT_THROW(model_from_entries(reshaped, cfg), ConfigError);

  ClftConfig wider = cfg;
  wider.dim = 64;
  wider.heads = 4;
  EXPECT_THROW(model_from_entries(entries, wider), ConfigError);
  EXPECT_THROW(model_from_entries(entries, tiny_config(Variant::kHybrid)), ConfigError);
}

TEST(ModelForwardTest, TraceRecordsTheShapeChain) {
  const ClftConfig cfg = tiny_config();
  const ModelWeights m = init_model(cfg, 2);
  Rng rng(3);
  Tensor cam = random_tensor({3, 64, 64}, rng, 0, 1), lid = random_tensor({3, 64, 64}, rng, -5, 5);
  ForwardTrace trace;
  Tensor logits = clft_forward(&cam, &lid, ModalityMode::kCrossFusion, m, cfg, &trace);
  EXPECT_EQ(logits.shape(), (Shape{5, 64, 64}));
  EXPECT_EQ(trace.logits, logits.shape());
  for (const BranchTrace* b : {&trace.camera, &trace.lidar}) {
    EXPECT_EQ(b->patches, (Shape{16, 768}));
    EXPECT_EQ(b->tokens, (Shape{17, 32}));
    EXPECT_EQ(b->head_q, (Shape{17, 16}));
    EXPECT_EQ(b->taps.size(), 4u);
    EXPECT_EQ(b->reassembled.front(), (Shape{32, 4, 4}));
    EXPECT_EQ(b->resampled, (std::vector<Shape>{{16, 16, 16}, {16, 8, 8}, {16, 4, 4}, {16, 2, 2}}));
  }
  EXPECT_EQ(trace.fused, (std::vector<Shape>{{16, 2, 2}, {16, 4, 4}, {16, 8, 8}, {16, 16, 16}}));
  EXPECT_EQ(clft_forward(&cam, &lid, ModalityMode::kCrossFusion, m, cfg), logits);
}

TEST(ModelForwardTest, HybridTakesShallowStagesFromTheStem) {
  const ClftConfig cfg = tiny_config(Variant::kHybrid);
  const ModelWeights m = init_model(cfg, 2);
  Rng rng(4);
  Tensor cam = random_tensor({3, 64, 64}, rng, 0, 1);
  ForwardTrace trace;
  Tensor logits = clft_forward(&cam, nullptr, ModalityMode::kCameraOnly, m, cfg, &trace);
  EXPECT_EQ(logits.shape(), (Shape{5, 64, 64}));
  EXPECT_EQ(trace.camera.patches, (Shape{16, 256}));
  EXPECT_EQ(trace.camera.taps.size(), 2u);
  EXPECT_EQ(trace.camera.reassembled,
            (std::vector<Shape>{{64, 16, 16}, {128, 8, 8}, {32, 4, 4}, {32, 4, 4}}));
  EXPECT_TRUE(trace.lidar.tokens.empty());
}

TEST(ModelForwardTest, CameraOnlyEqualsFusionWithSilencedLidar) {
  const ClftConfig cfg = tiny_config();
  ModelWeights m = init_model(cfg, 5);
  Rng rng(6);
  Tensor cam = random_tensor({3, 64, 64}, rng, 0, 1), lid = random_tensor({3, 64, 64}, rng, -5, 5);
  const Tensor camera_only = clft_forward(&cam, nullptr, ModalityMode::kCameraOnly, m, cfg);
  zero_resample(m.lidar);
  const Tensor fused = clft_forward(&cam, &lid, ModalityMode::kCrossFusion, m, cfg);
  EXPECT_LE(max_abs_diff(camera_only, fused), 1e-5);
}

TEST(ModelForwardTest, MissingModalityOrWrongSizeRejected) {
  const ClftConfig cfg = tiny_config();
  const ModelWeights m = allocate_model(cfg);
  Tensor cam({3, 64, 64});
  EXPECT_THROW(clft_forward(nullptr, &cam, ModalityMode::kCameraOnly, m, cfg), std::invalid_argument);
  EXPECT_THROW(clft_forward(&cam, nullptr, ModalityMode::kCrossFusion, m, cfg), std::invalid_argument);
  Tensor small({3, 32, 64});
  EXPECT_THROW(clft_forward(&small, nullptr, ModalityMode::kCameraOnly, m, cfg), ShapeError);
}

TEST(PredictMaskTest, ArgmaxWithLowestIndexOnTies) {
  Tensor logits({3, 1, 3}, std::vector<float>{1, 5, 2,  //
                                              1, 5, 7,  //
                                              0, 4, 7});
  const Mask mask = predict_mask(logits);
  EXPECT_EQ(mask.labels, (std::vector<std::uint8_t>{0, 0, 1}));
}

TEST(PredictMaskTest, InvariantToPerPixelShift) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    // Small integers keep the shifted values exact, so ties survive.
    Tensor logits({4, 6, 5});
    for (float& v : logits.data()) v = static_cast<float>(rng.below(7));
    Tensor shifted = logits;
    for (std::size_t p = 0; p < 30; ++p) {
      const float c = static_cast<float>(rng.below(2001)) - 1000.0f;
      for (std::size_t k = 0; k < 4; ++k) shifted[k * 30 + p] += c;
    }
    EXPECT_EQ(predict_mask(shifted), predict_mask(logits));
  }
}
