#pragma once

#include <span>
#include <vector>

#include "clft/config.hpp"
#include "clft/embedding.hpp"
#include "clft/tensor.hpp"

namespace clft {

/// Per-head projections are stored stacked: head i of w_q/w_k/w_v owns
/// columns [i·d_k, (i+1)·d_k), i.e. a d_m×d_k block. w_o maps the
/// concatenated heads (heads·d_v) back to d_m.
struct AttentionWeights {
  Tensor w_q, w_k, w_v;  // D × D
  Tensor b_q, b_k, b_v;  // D
  Tensor w_o;            // D × D
  Tensor b_o;            // D
};

struct EncoderLayerWeights {
  Tensor ln1_gamma, ln1_beta;
  AttentionWeights attention;
  Tensor ln2_gamma, ln2_beta;
  Tensor mlp_w1, mlp_b1;  // D × hidden, hidden
  Tensor mlp_w2, mlp_b2;  // hidden × D, D
};

/// Receives every head's projected inputs and attention matrix.
class AttentionObserver {
 public:
  virtual ~AttentionObserver() = default;
  virtual void on_head(int layer, int head, const Tensor& q, const Tensor& k, const Tensor& v,
                       const Tensor& attention) = 0;
};

struct EncoderTaps {
  std::vector<int> layers;  // ascending
  std::vector<TokenMatrix> taps;
};

/// softmax(Q·Kᵀ/√d_k), rows sum to one.
Tensor attention_weights(const Tensor& q, const Tensor& k);

/// softmax(Q·Kᵀ/√d_k)·V.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Column block [head·width, (head+1)·width) of a t×(heads·width) matrix.
Tensor head_slice(const Tensor& m, int head, int width);

/// Multi-head self-attention over the rows of x[t×D]: each head attends with
/// its own projections, heads are concatenated side by side, then projected
/// by w_o. `layer` is only forwarded to the observer.
Tensor multi_head_attention(const Tensor& x, const AttentionWeights& w, int heads,
                            AttentionObserver* observer = nullptr, int layer = 0);
TokenMatrix multi_head_attention(const TokenMatrix& x, const AttentionWeights& w, const ClftConfig& cfg);

/// One pre-norm block: x += MHSA(LN(x)); x += MLP(LN(x)).
Tensor encoder_layer(const Tensor& x, const EncoderLayerWeights& w, int heads, float ln_eps,
                     AttentionObserver* observer = nullptr, int layer = 0);

/// Runs every layer and snapshots the output after each layer listed in
/// cfg.tap_layers().
EncoderTaps encoder_forward(const TokenMatrix& x, std::span<const EncoderLayerWeights> weights,
                            const ClftConfig& cfg, AttentionObserver* observer = nullptr);

}  // namespace clft
