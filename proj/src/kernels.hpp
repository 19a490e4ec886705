#pragma once

// Scalar forward kernels shared by the float32 tensor ops and the float64
// gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace clft::detail {

template <typename T>
T gelu_value(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

// Softmax over n values spaced `stride` apart. Accumulates in double.
template <typename T>
void softmax_slice(const T* in, T* out, std::size_t n, std::size_t stride) {
  T max_v = in[0];
  for (std::size_t i = 1; i < n; ++i) max_v = std::max(max_v, in[i * stride]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T e = std::exp(in[i * stride] - max_v);
    out[i * stride] = e;
    sum += static_cast<double>(e);
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < n; ++i) {
    out[i * stride] = static_cast<T>(static_cast<double>(out[i * stride]) * inv);
  }
}

// Biased-variance normalization of one row, then affine.
template <typename T>
void layer_norm_row(const T* x, const T* gamma, const T* beta, std::size_t d, double eps,
                    T* out) {
  double mean = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double c = x[i] - mean;
    var += c * c;
  }
  var /= static_cast<double>(d);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = static_cast<T>((x[i] - mean) * inv_std * gamma[i] + beta[i]);
  }
}

}  // namespace clft::detail
