#include <gtest/gtest.h>

#include "clft/config.hpp"

using namespace clft;

TEST(ConfigTest, VariantTable) {
  struct Row {
    Variant v;
    int layers, dim, heads;
  };
  const Row table[] = {{Variant::kBase, 12, 768, 12},
                       {Variant::kLarge, 24, 1024, 16},
                       {Variant::kHuge, 32, 1280, 20},
                       {Variant::kHybrid, 12, 768, 12}};
  for (const Row& r : table) {
    const ClftConfig cfg = make_config(r.v);
    EXPECT_EQ(cfg.layers, r.layers);
    EXPECT_EQ(cfg.dim, r.dim);
    EXPECT_EQ(cfg.heads, r.heads);
    EXPECT_EQ(cfg.head_dim, 64);
    EXPECT_EQ(cfg.mlp_dim, 4 * r.dim);
    EXPECT_EQ(cfg.fusion_dim, 256);
    EXPECT_EQ(cfg.num_tokens(), 576);
    EXPECT_TRUE(matches_variant_table(cfg));
    EXPECT_NO_THROW(validate(cfg));
    EXPECT_EQ(parse_variant(variant_name(r.v)), r.v);
  }
  EXPECT_FALSE(parse_variant("giant").has_value());
}

TEST(ConfigTest, TapsPerVariant) {
  EXPECT_EQ(make_config(Variant::kBase).tap_layers(), (std::vector<int>{3, 6, 9, 12}));
  EXPECT_EQ(make_config(Variant::kLarge).tap_layers(), (std::vector<int>{5, 12, 18, 24}));
  EXPECT_EQ(make_config(Variant::kHuge).tap_layers(), (std::vector<int>{8, 16, 24, 32}));
  const ClftConfig hybrid = make_config(Variant::kHybrid);
  EXPECT_EQ(hybrid.tap_layers(), (std::vector<int>{9, 12}));
  EXPECT_EQ(hybrid.taps[0], TapSource::stem(1));
  EXPECT_EQ(hybrid.token_dim(), 256);
  EXPECT_EQ(make_config(Variant::kBase).token_dim(), 768);
}

TEST(ConfigTest, ValidateRejectsInconsistentConfigs) {
  ClftConfig cfg = make_config(Variant::kBase);
  cfg.heads = 10;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = make_config(Variant::kBase);
  cfg.taps[3] = TapSource::layer(13);
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = make_config(Variant::kBase);
  std::swap(cfg.taps[0], cfg.taps[1]);
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = make_config(Variant::kBase);
  cfg.taps[0] = TapSource::stem(1);
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = make_config(Variant::kBase);
  cfg.rows = 380;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = make_config(Variant::kBase);
  cfg.classes.clear();
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = make_config(Variant::kBase);
  cfg.dim = 512;
  cfg.heads = 8;
  EXPECT_NO_THROW(validate(cfg));
  EXPECT_FALSE(matches_variant_table(cfg));
}

TEST(ConfigTest, ReadoutNames) {
  for (auto m : {ReadoutMode::kIgnore, ReadoutMode::kAdd, ReadoutMode::kProject}) {
    EXPECT_EQ(parse_readout(readout_name(m)), m);
  }
  EXPECT_EQ(make_config(Variant::kLarge).readout, ReadoutMode::kProject);
}
