#include "clft/encoder.hpp"

#include <cmath>
#include <string>

#include "clft/ops.hpp"

namespace clft {

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  if (q.ndim() != 2 || k.ndim() != 2 || q.dim(1) != k.dim(1)) {
    throw ShapeError("attention: Q " + shape_to_string(q.shape()) + " and K " + shape_to_string(k.shape()) +
                     " must share d_k");
  }
  const float inv_sqrt_dk = 1.0f / std::sqrt(static_cast<float>(q.dim(1)));
  return softmax(scale(matmul_nt(q, k), inv_sqrt_dk), -1);
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (v.ndim() != 2 || v.dim(0) != k.dim(0)) {
    throw ShapeError("attention: K " + shape_to_string(k.shape()) + " and V " + shape_to_string(v.shape()) +
                     " must share the token count");
  }
  return matmul(attention_weights(q, k), v);
}

Tensor head_slice(const Tensor& m, int head, int width) {
  const std::size_t rows = m.dim(0), w = static_cast<std::size_t>(width),
                    off = static_cast<std::size_t>(head) * w;
  if (off + w > m.dim(1)) throw ShapeError("head slice out of range for " + shape_to_string(m.shape()));
  Tensor out({rows, w});
  for (std::size_t i = 0; i < rows; ++i) {
    auto src = m.row(i).subspan(off, w);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

namespace {

void check_attention_weights(const AttentionWeights& w, std::size_t d) {
  const Shape square{d, d};
  for (const Tensor* t : {&w.w_q, &w.w_k, &w.w_v, &w.w_o}) {
    if (t->shape() != square) {
      throw ShapeError("attention projection " + shape_to_string(t->shape()) + " does not match model dim " +
                       std::to_string(d));
    }
  }
}

}  // namespace

Tensor multi_head_attention(const Tensor& x, const AttentionWeights& w, int heads, AttentionObserver* observer,
                            int layer) {
  if (x.ndim() != 2) throw ShapeError("multi_head_attention expects t×D tokens");
  const std::size_t d = x.dim(1);
  check_attention_weights(w, d);
  if (heads < 1 || d % static_cast<std::size_t>(heads) != 0) {
    throw ShapeError("model dim " + std::to_string(d) + " not divisible into " + std::to_string(heads) + " heads");
  }
  const int head_dim = static_cast<int>(d) / heads;
  const Tensor q = linear(x, w.w_q, w.b_q);
  const Tensor k = linear(x, w.w_k, w.b_k);
  const Tensor v = linear(x, w.w_v, w.b_v);

  Tensor concat({x.dim(0), d});
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = head_slice(q, h, head_dim);
    const Tensor kh = head_slice(k, h, head_dim);
    const Tensor vh = head_slice(v, h, head_dim);
    const Tensor a = attention_weights(qh, kh);
    const Tensor out = matmul(a, vh);
    if (observer) observer->on_head(layer, h, qh, kh, vh, a);
    const auto off = static_cast<std::size_t>(h * head_dim);
    for (std::size_t i = 0; i < out.dim(0); ++i) {
      auto src = out.row(i);
      std::copy(src.begin(), src.end(), concat.row(i).begin() + static_cast<std::ptrdiff_t>(off));
    }
  }
  return linear(concat, w.w_o, w.b_o);
}

TokenMatrix multi_head_attention(const TokenMatrix& x, const AttentionWeights& w, const ClftConfig& cfg) {
  if (x.tokens.ndim() != 2 || x.tokens.dim(1) != static_cast<std::size_t>(cfg.dim)) {
    throw ShapeError("token width " + shape_to_string(x.tokens.shape()) + " does not match config dim " +
                     std::to_string(cfg.dim));
  }
  return TokenMatrix{multi_head_attention(x.tokens, w, cfg.heads), x.grid};
}

Tensor encoder_layer(const Tensor& x, const EncoderLayerWeights& w, int heads, float ln_eps,
                     AttentionObserver* observer, int layer) {
  Tensor h = add(x, multi_head_attention(layer_norm(x, w.ln1_gamma, w.ln1_beta, ln_eps), w.attention, heads,
                                         observer, layer));
  const Tensor hidden = gelu(linear(layer_norm(h, w.ln2_gamma, w.ln2_beta, ln_eps), w.mlp_w1, w.mlp_b1));
  return add(h, linear(hidden, w.mlp_w2, w.mlp_b2));
}

EncoderTaps encoder_forward(const TokenMatrix& x, std::span<const EncoderLayerWeights> weights,
                            const ClftConfig& cfg, AttentionObserver* observer) {
  if (weights.size() != static_cast<std::size_t>(cfg.layers)) {
    throw ConfigError("encoder has " + std::to_string(weights.size()) + " layers of weights, config expects " +
                      std::to_string(cfg.layers));
  }
  if (x.tokens.ndim() != 2 || x.tokens.dim(1) != static_cast<std::size_t>(cfg.dim)) {
    throw ShapeError("encoder input " + shape_to_string(x.tokens.shape()) + " does not match config dim " +
                     std::to_string(cfg.dim));
  }
  EncoderTaps taps;
  taps.layers = cfg.tap_layers();
  std::size_t next = 0;
  Tensor h = x.tokens;
  for (int l = 1; l <= cfg.layers && next < taps.layers.size(); ++l) {
    h = encoder_layer(h, weights[static_cast<std::size_t>(l - 1)], cfg.heads, cfg.ln_eps, observer, l);
    if (taps.layers[next] == l) {
      taps.taps.push_back(TokenMatrix{h, x.grid});
      ++next;
    }
  }
  return taps;
}

}  // namespace clft
