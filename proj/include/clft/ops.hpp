#pragma once

#include <cstddef>

#include "clft/tensor.hpp"

namespace clft {

// Dense kernels. All functions are pure: inputs are never modified and the
// result depends only on the arguments.

/// c = a · b for a[m×k], b[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// c = a · bᵀ for a[m×k], b[n×k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// x · w + bias for x[n×in], w[in×out], bias[out] (bias may be empty).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor relu(const Tensor& x);

/// Numerically stable softmax along `axis` (max subtracted per slice).
Tensor softmax(const Tensor& x, int axis);

/// Normalizes each slice along the last axis, then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-6f);

/// Exact GELU, x·Φ(x) with Φ evaluated through erf.
Tensor gelu(const Tensor& x);

/// Cross-correlation of x[C×H×W] with w[F×C×kh×kw]; zero padding.
/// Output is F×H'×W' with H' = (H + 2·pad − kh)/stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride = 1, int pad = 0);

/// Transposed convolution of x[C×H×W] with w[C×F×kh×kw] (the same layout a
/// conv2d F→C would use), no padding. Output is F×((H−1)·stride+kh)×((W−1)·stride+kw).
/// With an empty bias this is exactly the adjoint of conv2d(·, w, stride, 0).
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride);

/// k×k max pooling with implicit −∞ padding.
Tensor max_pool2d(const Tensor& x, int kernel, int stride, int pad);

/// Bilinear resize of x[C×H×W] using half-pixel centers (align_corners=false):
///   src = (dst + 0.5) · in/out − 0.5, clamped to [0, in − 1],
/// interpolating between floor(src) and floor(src)+1 (clamped).
Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

}  // namespace clft
