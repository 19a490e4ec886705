#include "clft/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"
#include "kernels.hpp"

namespace clft {
namespace {

void require_ndim(const Tensor& t, std::size_t n, const char* what) {
  if (t.ndim() != n) {
    throw ShapeError(std::string(what) + " expects a " + std::to_string(n) + "-D tensor, got " +
                     shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

void add_channel_bias(Tensor& out, const Tensor& bias) {
  if (bias.empty()) return;
  const std::size_t channels = out.dim(0);
  if (bias.numel() != channels) {
    throw ShapeError("bias " + shape_to_string(bias.shape()) + " does not match " +
                     std::to_string(channels) + " output channels");
  }
  const std::size_t plane = out.numel() / channels;
  float* o = out.data().data();
  for (std::size_t c = 0; c < channels; ++c) {
    const float b = bias[c];
    for (std::size_t i = 0; i < plane; ++i) o[c * plane + i] += b;
  }
}

std::size_t conv_out_size(std::size_t in, std::size_t k, int stride, int pad) {
  const long span = static_cast<long>(in) + 2L * pad - static_cast<long>(k);
  if (span < 0) return 0;
  return static_cast<std::size_t>(span / stride + 1);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_ndim(a, 2, "matmul");
  require_ndim(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  detail::sgemm(m, n, k, a.data().data(), k, false, b.data().data(), n, false, c.data().data());
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_ndim(a, 2, "matmul_nt");
  require_ndim(b, 2, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()) + "^T");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor c({m, n});
  detail::sgemm(m, n, k, a.data().data(), k, false, b.data().data(), k, true, c.data().data());
  return c;
}

Tensor transpose(const Tensor& a) {
  require_ndim(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  Tensor y = matmul(x, w);
  if (bias.empty()) return y;
  const std::size_t out = y.dim(1);
  if (bias.numel() != out) {
    throw ShapeError("linear bias " + shape_to_string(bias.shape()) + " does not match output width " +
                     std::to_string(out));
  }
  for (std::size_t i = 0; i < y.dim(0); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < out; ++j) r[j] += bias[j];
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

Tensor scale(const Tensor& a, float factor) {
  Tensor out = a;
  for (float& v : out.data()) v *= factor;
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data()) v = std::max(v, 0.0f);
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  const int nd = static_cast<int>(x.ndim());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for " + shape_to_string(x.shape()));
  }
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < nd; ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Tensor out(s);
  const float* in = x.data().data();
  float* o = out.data().data();
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      const std::size_t base = a * n * inner + b;
      detail::softmax_slice(in + base, o + base, n, inner);
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  if (x.ndim() == 0) throw ShapeError("layer_norm on scalar");
  if (!(eps > 0.0f)) throw std::invalid_argument("layer_norm eps must be positive");
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layer_norm: last dimension " + std::to_string(d) + " vs gamma " +
                     shape_to_string(gamma.shape()) + ", beta " + shape_to_string(beta.shape()));
  }
  Tensor out(x.shape());
  const std::size_t rows = x.numel() / d;
  for (std::size_t r = 0; r < rows; ++r) {
    detail::layer_norm_row(x.data().data() + r * d, gamma.data().data(), beta.data().data(), d,
                           static_cast<double>(eps), out.data().data() + r * d);
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data()) v = detail::gelu_value(v);
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  require_ndim(x, 3, "conv2d input");
  require_ndim(w, 4, "conv2d weight");
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d needs stride >= 1 and pad >= 0");
  const std::size_t c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != c) {
    throw ShapeError("conv2d: weight " + shape_to_string(w.shape()) + " does not match input " +
                     shape_to_string(x.shape()));
  }
  const std::size_t oh = conv_out_size(h, kh, stride, pad);
  const std::size_t ow = conv_out_size(wd, kw, stride, pad);
  if (oh == 0 || ow == 0) {
    throw ShapeError("conv2d: kernel " + shape_to_string(w.shape()) + " yields empty output on " +
                     shape_to_string(x.shape()));
  }
  Tensor out({f, oh, ow});
  const std::size_t ckk = c * kh * kw;
  const std::size_t npix = oh * ow;

  if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
    detail::sgemm(f, npix, c, w.data().data(), c, false, x.data().data(), npix, false,
                  out.data().data());
  } else {
    std::vector<float> cols(ckk * npix, 0.0f);
    const float* in = x.data().data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t ki = 0; ki < kh; ++ki) {
        for (std::size_t kj = 0; kj < kw; ++kj) {
          float* dst = cols.data() + ((ch * kh + ki) * kw + kj) * npix;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const long iy = static_cast<long>(oy * stride + ki) - pad;
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            const float* src_row = in + (ch * h + static_cast<std::size_t>(iy)) * wd;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const long ix = static_cast<long>(ox * stride + kj) - pad;
              if (ix >= 0 && ix < static_cast<long>(wd)) dst[oy * ow + ox] = src_row[ix];
            }
          }
        }
      }
    }
    detail::sgemm(f, npix, ckk, w.data().data(), ckk, false, cols.data(), npix, false,
                  out.data().data());
  }
  add_channel_bias(out, bias);
  return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride) {
  require_ndim(x, 3, "conv_transpose2d input");
  require_ndim(w, 4, "conv_transpose2d weight");
  if (stride < 1) throw std::invalid_argument("conv_transpose2d needs stride >= 1");
  const std::size_t c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  if (w.dim(0) != c) {
    throw ShapeError("conv_transpose2d: weight " + shape_to_string(w.shape()) + " does not match input " +
                     shape_to_string(x.shape()));
  }
  const std::size_t f = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (h - 1) * stride + kh;
  const std::size_t ow = (wd - 1) * stride + kw;
  const std::size_t fkk = f * kh * kw;
  const std::size_t npix = h * wd;

  // cols[(f,ki,kj) × (y,x)] = Σ_c w[c,(f,ki,kj)] · x[c,(y,x)]
  std::vector<float> cols(fkk * npix);
  detail::sgemm(fkk, npix, c, w.data().data(), fkk, true, x.data().data(), npix, false, cols.data());

  Tensor out({f, oh, ow});
  float* o = out.data().data();
  for (std::size_t ch = 0; ch < f; ++ch) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const float* src = cols.data() + ((ch * kh + ki) * kw + kj) * npix;
        for (std::size_t y = 0; y < h; ++y) {
          float* dst_row = o + (ch * oh + y * stride + ki) * ow + kj;
          for (std::size_t xx = 0; xx < wd; ++xx) dst_row[xx * stride] += src[y * wd + xx];
        }
      }
    }
  }
  add_channel_bias(out, bias);
  return out;
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride, int pad) {
  require_ndim(x, 3, "max_pool2d");
  if (kernel < 1 || stride < 1 || pad < 0) throw std::invalid_argument("max_pool2d: bad geometry");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = conv_out_size(h, kernel, stride, pad);
  const std::size_t ow = conv_out_size(w, kernel, stride, pad);
  if (oh == 0 || ow == 0) throw ShapeError("max_pool2d: empty output for " + shape_to_string(x.shape()));
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        float m = -std::numeric_limits<float>::infinity();
        for (int ki = 0; ki < kernel; ++ki) {
          const long iy = static_cast<long>(oy * stride) + ki - pad;
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (int kj = 0; kj < kernel; ++kj) {
            const long ix = static_cast<long>(ox * stride) + kj - pad;
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            m = std::max(m, x.at(ch, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)));
          }
        }
        out.at(ch, oy, ox) = m;
      }
    }
  }
  return out;
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  float frac;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[d] = {lo, std::min(lo + 1, in - 1), static_cast<float>(src - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_ndim(x, 3, "resize_bilinear");
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("resize_bilinear: target size must be positive");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h == out_h && w == out_w) return x;
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  Tensor out({c, out_h, out_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& yt = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& xt = tx[ox];
        const float a = x.at(ch, yt.lo, xt.lo);
        const float b = x.at(ch, yt.lo, xt.hi);
        const float cc = x.at(ch, yt.hi, xt.lo);
        const float d = x.at(ch, yt.hi, xt.hi);
        const float top = a + xt.frac * (b - a);
        const float bottom = cc + xt.frac * (d - cc);
        out.at(ch, oy, ox) = top + yt.frac * (bottom - top);
      }
    }
  }
  return out;
}

}  // namespace clft
