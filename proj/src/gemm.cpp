#include "gemm.hpp"

#include <algorithm>
#include <cstring>
#include <memory>
#include <new>

namespace clft::detail {
namespace {

using vfloat = float __attribute__((vector_size(64)));
constexpr std::size_t kLanes = 16;
constexpr std::size_t kMr = 8;
constexpr std::size_t kNr = 2 * kLanes;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 128;
constexpr std::size_t kNc = 2048;

struct AlignedDelete {
  void operator()(float* p) const { ::operator delete[](p, std::align_val_t(64)); }
};
using AlignedBuffer = std::unique_ptr<float[], AlignedDelete>;

AlignedBuffer make_buffer(std::size_t n) {
  return AlignedBuffer(static_cast<float*>(::operator new[](n * sizeof(float), std::align_val_t(64))));
}

// Packs A[mc×kc] into kMr-row slivers, each stored k-major, zero-padded.
void pack_a(std::size_t mc, std::size_t kc, const float* a, std::size_t lda, bool transposed,
            float* out) {
  for (std::size_t i0 = 0; i0 < mc; i0 += kMr) {
    const std::size_t rows = std::min(kMr, mc - i0);
    for (std::size_t p = 0; p < kc; ++p) {
      float* dst = out + p * kMr;
      if (transposed) {
        std::memcpy(dst, a + p * lda + i0, rows * sizeof(float));
      } else {
        for (std::size_t i = 0; i < rows; ++i) dst[i] = a[(i0 + i) * lda + p];
      }
      for (std::size_t i = rows; i < kMr; ++i) dst[i] = 0.0f;
    }
    out += kc * kMr;
  }
}

// Packs B[kc×nc] into kNr-column slivers, each stored k-major, zero-padded.
void pack_b(std::size_t kc, std::size_t nc, const float* b, std::size_t ldb, bool transposed,
            float* out) {
  for (std::size_t j0 = 0; j0 < nc; j0 += kNr) {
    const std::size_t cols = std::min(kNr, nc - j0);
    for (std::size_t p = 0; p < kc; ++p) {
      float* dst = out + p * kNr;
      if (transposed) {
        for (std::size_t j = 0; j < cols; ++j) dst[j] = b[(j0 + j) * ldb + p];
      } else {
        std::memcpy(dst, b + p * ldb + j0, cols * sizeof(float));
      }
      for (std::size_t j = cols; j < kNr; ++j) dst[j] = 0.0f;
    }
    out += kc * kNr;
  }
}

// acc[kMr×kNr] = Σ_p a_sliver[p] ⊗ b_sliver[p].
inline void micro_kernel(std::size_t kc, const float* __restrict ap, const float* __restrict bp,
                         float* __restrict tile) {
  vfloat c0[kMr] = {};
  vfloat c1[kMr] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    vfloat b0;
    vfloat b1;
    std::memcpy(&b0, bp, sizeof(vfloat));
    std::memcpy(&b1, bp + kLanes, sizeof(vfloat));
    for (std::size_t i = 0; i < kMr; ++i) {
      const float av = ap[i];
      c0[i] += av * b0;
      c1[i] += av * b1;
    }
    ap += kMr;
    bp += kNr;
  }
  for (std::size_t i = 0; i < kMr; ++i) {
    std::memcpy(tile + i * kNr, &c0[i], sizeof(vfloat));
    std::memcpy(tile + i * kNr + kLanes, &c1[i], sizeof(vfloat));
  }
}

}  // namespace

void sgemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
           bool a_transposed, const float* b, std::size_t ldb, bool b_transposed, float* c) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    std::fill(c, c + m * n, 0.0f);
    return;
  }
  const std::size_t kc_max = std::min(k, kKc);
  const std::size_t nc_max = std::min(n, kNc);
  const std::size_t mc_max = std::min(m, kMc);
  auto packed_b = make_buffer(kc_max * ((nc_max + kNr - 1) / kNr) * kNr);
  auto packed_a = make_buffer(kc_max * ((mc_max + kMr - 1) / kMr) * kMr);
  alignas(64) float tile[kMr * kNr];

  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = std::min(kNc, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      const float* b_block = b_transposed ? b + jc * ldb + pc : b + pc * ldb + jc;
      pack_b(kc, nc, b_block, ldb, b_transposed, packed_b.get());
      for (std::size_t ic = 0; ic < m; ic += kMc) {
        const std::size_t mc = std::min(kMc, m - ic);
        const float* a_block = a_transposed ? a + pc * lda + ic : a + ic * lda + pc;
        pack_a(mc, kc, a_block, lda, a_transposed, packed_a.get());
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          const std::size_t cols = std::min(kNr, nc - jr);
          const float* bp = packed_b.get() + (jr / kNr) * kc * kNr;
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            const std::size_t rows = std::min(kMr, mc - ir);
            micro_kernel(kc, packed_a.get() + (ir / kMr) * kc * kMr, bp, tile);
            float* c_tile = c + (ic + ir) * n + jc + jr;
            for (std::size_t i = 0; i < rows; ++i) {
              float* dst = c_tile + i * n;
              const float* src = tile + i * kNr;
              if (pc == 0) {
                std::memcpy(dst, src, cols * sizeof(float));
              } else {
                for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace clft::detail
