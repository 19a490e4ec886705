#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clft/encoder.hpp"
#include "clft/model.hpp"
#include "clft/ops.hpp"
#include "test_support.hpp"

using namespace clft;
using clft::testing::random_tensor;

namespace {

AttentionWeights random_attention(std::size_t d, Rng& rng) {
  AttentionWeights w;
  for (Tensor* t : {&w.w_q, &w.w_k, &w.w_v, &w.w_o}) *t = random_tensor({d, d}, rng, -0.5, 0.5);
  for (Tensor* t : {&w.b_q, &w.b_k, &w.b_v, &w.b_o}) *t = random_tensor({d}, rng, -0.5, 0.5);
  return w;
}

// Brute-force multi-head attention in float64, one head at a time.
std::vector<double> brute_mha(const Tensor& x, const AttentionWeights& w, int heads) {
  const std::size_t t = x.dim(0), d = x.dim(1), dk = d / static_cast<std::size_t>(heads);
  auto proj = [&](const Tensor& wm, const Tensor& b) {
    std::vector<double> out(t * d);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = b[j];
        for (std::size_t k = 0; k < d; ++k) s += static_cast<double>(x.at(i, k)) * wm.at(k, j);
        out[i * d + j] = s;
      }
    return out;
  };
  const auto q = proj(w.w_q, w.b_q), k = proj(w.w_k, w.b_k), v = proj(w.w_v, w.b_v);
  std::vector<double> concat(t * d, 0.0);
  for (std::size_t h = 0; h < static_cast<std::size_t>(heads); ++h) {
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> score(t);
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dk; ++c) s += q[i * d + h * dk + c] * k[j * d + h * dk + c];
        score[j] = s / std::sqrt(static_cast<double>(dk));
      }
      const double mx = *std::max_element(score.begin(), score.end());
      double z = 0.0;
      for (double& s : score) z += (s = std::exp(s - mx));
      for (std::size_t c = 0; c < dk; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < t; ++j) acc += score[j] / z * v[j * d + h * dk + c];
        concat[i * d + h * dk + c] = acc;
      }
    }
  }
  std::vector<double> out(t * d);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = w.b_o[j];
      for (std::size_t k2 = 0; k2 < d; ++k2) s += concat[i * d + k2] * w.w_o.at(k2, j);
      out[i * d + j] = s;
    }
  return out;
}

class CountingObserver : public AttentionObserver {
 public:
  void on_head(int layer, int head, const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& a) override {
    ++calls;
    last_layer = layer;
    max_head = std::max(max_head, head);
    q_shape = q.shape();
    k_shape = k.shape();
    v_shape = v.shape();
    for (std::size_t i = 0; i < a.dim(0); ++i) {
      double s = 0.0;
      for (float e : a.row(i)) s += e;
      worst_row_error = std::max(worst_row_error, std::abs(s - 1.0));
    }
  }
  int calls = 0;
  int last_layer = 0;
  int max_head = -1;
  Shape q_shape, k_shape, v_shape;
  double worst_row_error = 0.0;
};

}  // namespace

TEST(AttentionTest, SingleTokenReturnsValueExactly) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor q = random_tensor({1, 8}, rng, -5, 5), k = random_tensor({1, 8}, rng, -5, 5);
    Tensor v = random_tensor({1, 6}, rng, -5, 5);
    EXPECT_EQ(scaled_dot_product_attention(q, k, v), v);
  }
}

TEST(AttentionTest, WeightsAreRowStochastic) {
  Rng rng(2);
  Tensor a = attention_weights(random_tensor({9, 16}, rng, -3, 3), random_tensor({11, 16}, rng, -3, 3));
  ASSERT_EQ(a.shape(), (Shape{9, 11}));
  for (std::size_t i = 0; i < 9; ++i) {
    double s = 0.0;
    for (float e : a.row(i)) {
      EXPECT_GE(e, 0.0f);
      s += e;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(AttentionTest, UniformScoresAverageValues) {
  Tensor q({3, 4}), k({5, 4});
  Tensor v({5, 2});
  for (std::size_t j = 0; j < 5; ++j) {
    v.at(j, 0) = static_cast<float>(j);
    v.at(j, 1) = 1.0f;
  }
  Tensor out = scaled_dot_product_attention(q, k, v);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_FLOAT_EQ(out.at(i, 0), 2.0f);
    EXPECT_FLOAT_EQ(out.at(i, 1), 1.0f);
  }
}

TEST(MultiHeadTest, MatchesBruteForce) {
  Rng rng(3);
  for (int heads : {1, 2, 4}) {
    Tensor x = random_tensor({7, 16}, rng);
    AttentionWeights w = random_attention(16, rng);
    Tensor got = multi_head_attention(x, w, heads);
    const auto want = brute_mha(x, w, heads);
    for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 2e-5) << heads << " " << i;
  }
}

TEST(MultiHeadTest, PermutingTokensPermutesOutputs) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({5, 24}, rng);
    AttentionWeights w = random_attention(24, rng);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 4; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Tensor px({5, 24});
    for (std::size_t i = 0; i < 5; ++i) std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), px.row(i).begin());
    Tensor y = multi_head_attention(x, w, 3), py = multi_head_attention(px, w, 3);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 24; ++j) EXPECT_NEAR(py.at(i, j), y.at(perm[i], j), 1e-5);
  }
}

TEST(MultiHeadTest, HeadSliceTakesColumnBlocks) {
  Tensor m({2, 6}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  EXPECT_EQ(head_slice(m, 1, 2), Tensor({2, 2}, std::vector<float>{2, 3, 8, 9}));
  EXPECT_THROW(head_slice(m, 3, 2), ShapeError);
}

TEST(MultiHeadTest, IndivisibleHeadsRejected) {
  Rng rng(5);
  EXPECT_THROW(multi_head_attention(random_tensor({3, 10}, rng), random_attention(10, rng), 3), ShapeError);
}

TEST(EncoderTest, ZeroBlocksLeaveTokensUnchanged) {
  // With every projection zero both residual branches add exactly zero.
  const ClftConfig cfg = clft::testing::tiny_config();
  const ModelWeights m = allocate_model(cfg);
  Rng rng(6);
  Tensor x = random_tensor({17, 32}, rng);
  EXPECT_EQ(encoder_layer(x, m.camera.layers[0], cfg.heads, cfg.ln_eps), x);
}

TEST(EncoderTest, TapsAndObserverSeeEveryLayer) {
  const ClftConfig cfg = clft::testing::tiny_config();
  const ModelWeights m = init_model(cfg, 3);
  Rng rng(7);
  TokenMatrix x{random_tensor({17, 32}, rng), PatchGrid{4, 4, 16, 768}};
  CountingObserver obs;
  EncoderTaps taps = encoder_forward(x, m.camera.layers, cfg, &obs);
  EXPECT_EQ(taps.layers, (std::vector<int>{1, 2, 3, 4}));
  ASSERT_EQ(taps.taps.size(), 4u);
  for (const auto& t : taps.taps) EXPECT_EQ(t.tokens.shape(), (Shape{17, 32}));
  EXPECT_EQ(obs.calls, cfg.layers * cfg.heads);
  EXPECT_EQ(obs.last_layer, 4);
  EXPECT_EQ(obs.max_head, 1);
  EXPECT_EQ(obs.q_shape, (Shape{17, 16}));
  EXPECT_EQ(obs.v_shape, (Shape{17, 16}));
  EXPECT_LE(obs.worst_row_error, 1e-6);

  std::vector<EncoderLayerWeights> short_stack(m.camera.layers.begin(), m.camera.layers.begin() + 2);
  EXPECT_THROW(encoder_forward(x, short_stack, cfg), ConfigError);
}

TEST(EncoderTest, LayerMatchesPreNormComposition) {
  const ClftConfig cfg = clft::testing::tiny_config();
  const ModelWeights m = init_model(cfg, 11);
  const EncoderLayerWeights& w = m.camera.layers[0];
  Rng rng(8);
  Tensor x = random_tensor({9, 32}, rng);
  Tensor h = add(x, multi_head_attention(layer_norm(x, w.ln1_gamma, w.ln1_beta, cfg.ln_eps), w.attention, cfg.heads));
  Tensor want = add(h, linear(gelu(linear(layer_norm(h, w.ln2_gamma, w.ln2_beta, cfg.ln_eps), w.mlp_w1, w.mlp_b1)),
                              w.mlp_w2, w.mlp_b2));
  EXPECT_LE(max_abs_diff(encoder_layer(x, w, cfg.heads, cfg.ln_eps), want), 1e-6);
}
