#pragma once

#include <cstddef>

namespace clft::detail {

/// C[m×n] = A[m×k] · B[k×n], row-major. When `a_transposed` is set, A is
/// stored k×m (leading dimension `lda`), otherwise m×k. When `b_transposed`
/// is set, B is stored n×k, otherwise k×n. C is overwritten (leading dimension n).
///
/// Every output element accumulates over k in the same order regardless of
/// its position, so permuting rows of A permutes rows of C bit-exactly.
void sgemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
           bool a_transposed, const float* b, std::size_t ldb, bool b_transposed, float* c);

}  // namespace clft::detail
