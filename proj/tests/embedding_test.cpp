#include <gtest/gtest.h>

#include "clft/embedding.hpp"
#include "clft/model.hpp"
#include "clft/ops.hpp"
#include "test_support.hpp"

using namespace clft;
using clft::testing::random_tensor;

TEST(PatchifyTest, BaseImageGivesGridOfFlattenedPatches) {
  Rng rng(1);
  Tensor image = random_tensor({3, 384, 384}, rng);
  Tensor p = patchify(image, 16);
  ASSERT_EQ(p.shape(), (Shape{576, 768}));
  // Row k is grid cell (k / 24, k % 24); column (ch·16 + dy)·16 + dx.
  for (std::size_t k : {0ul, 1ul, 23ul, 24ul, 300ul, 575ul}) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t dy : {0ul, 7ul, 15ul}) {
        for (std::size_t dx : {0ul, 9ul, 15ul}) {
          EXPECT_EQ(p.at(k, (ch * 16 + dy) * 16 + dx), image.at(ch, (k / 24) * 16 + dy, (k % 24) * 16 + dx));
        }
      }
    }
  }
}

TEST(PatchifyTest, UnpatchifyInvertsExactly) {
  Rng rng(2);
  Tensor image = random_tensor({3, 48, 32}, rng);
  EXPECT_EQ(unpatchify(patchify(image, 16), 3, 48, 32, 16), image);
  EXPECT_THROW(patchify(random_tensor({3, 40, 32}, rng), 16), ShapeError);
}

TEST(EmbedTest, PrependsClassTokenAndAddsPositions) {
  Rng rng(3);
  const PatchGrid grid{2, 3, 4, 12};
  EmbeddingWeights w{random_tensor({12, 5}, rng), random_tensor({7, 5}, rng), random_tensor({1, 5}, rng)};
  Tensor patches = random_tensor({6, 12}, rng);
  TokenMatrix t = embed(patches, w, grid);
  ASSERT_EQ(t.tokens.shape(), (Shape{7, 5}));
  EXPECT_EQ(t.grid, grid);
  Tensor projected = matmul(patches, w.projection);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_FLOAT_EQ(t.tokens.at(0, j), w.class_token[j] + w.positional.at(0, j));
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_FLOAT_EQ(t.tokens.at(i + 1, j), projected.at(i, j) + w.positional.at(i + 1, j));
    }
  }
  EXPECT_THROW(embed(random_tensor({5, 12}, rng), w, grid), ShapeError);
}

TEST(HybridStemTest, ProducesStrideSixteenTokensAndTwoShallowMaps) {
  const ClftConfig cfg = make_config(Variant::kHybrid);
  const ModelWeights m = init_model(clft::testing::tiny_config(Variant::kHybrid), 5);
  Rng rng(4);
  const StemOutput out = hybrid_stem(random_tensor({3, 384, 384}, rng, 0.0, 1.0), *m.camera.stem);
  EXPECT_EQ(out.tokens.shape(), (Shape{576, 256}));
  EXPECT_EQ(out.grid.rows, 24);
  EXPECT_EQ(out.grid.cols, 24);
  EXPECT_EQ(out.grid.token_dim, cfg.token_dim());
  ASSERT_EQ(out.stage_maps.size(), 2u);
  EXPECT_EQ(out.stage_maps[0].shape(), (Shape{64, 96, 96}));
  EXPECT_EQ(out.stage_maps[1].shape(), (Shape{128, 48, 48}));
  EXPECT_TRUE(out.tokens.all_finite());
}

TEST(HybridStemTest, BlockLayoutFollowsTheStemConfig) {
  const ResidualStemWeights stem = allocate_stem(StemConfig{});
  ASSERT_EQ(stem.stages.size(), 3u);
  EXPECT_EQ(stem.stages[0].size(), 3u);
  EXPECT_EQ(stem.stages[1].size(), 4u);
  EXPECT_EQ(stem.stages[2].size(), 6u);
  EXPECT_EQ(stem.stem.weight.shape(), (Shape{16, 3, 7, 7}));
  EXPECT_EQ(stem.stages[0][0].stride, 1);
  EXPECT_EQ(stem.stages[1][0].stride, 2);
  EXPECT_TRUE(stem.stages[0][0].projection.has_value());
  EXPECT_FALSE(stem.stages[0][1].projection.has_value());
  EXPECT_EQ(stem.stages[2][5].expand.weight.shape(), (Shape{256, 64, 1, 1}));
}
