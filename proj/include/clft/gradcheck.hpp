#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clft {

enum class GradOp { kLinear, kSoftmax, kGelu, kLayerNorm, kSdpa };

inline constexpr std::array<GradOp, 5> kAllGradOps = {GradOp::kLinear, GradOp::kSoftmax, GradOp::kGelu,
                                                      GradOp::kLayerNorm, GradOp::kSdpa};

std::string_view grad_op_name(GradOp op);
std::optional<GradOp> parse_grad_op(std::string_view name);

struct GradReport {
  std::string op_name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool pass = false;
};

/// Compares the hand-derived backward pass of `op` with central finite
/// differences (step 1e-3, float64) on seeded random inputs no larger than
/// 8×8. The scalar loss is Σ c⊙y over the op output y, where c is all ones
/// except for softmax, whose outputs always sum to one per row; there c is a
/// seeded random cotangent.
///
/// max_rel_error is the worst normwise error ‖a − n‖∞ / max(‖a‖∞, ‖n‖∞) over
/// every differentiated input; pass is max_rel_error ≤ tolerance.
/// Throws std::invalid_argument for a negative or NaN tolerance.
GradReport grad_check(GradOp op, std::uint64_t seed, double tolerance);

namespace grad {

/// Row-major float64 matrix used by the reference backward passes.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

Matrix linear_forward(const Matrix& x, const Matrix& w, const Matrix& b);
struct LinearGrads {
  Matrix dx, dw, db;
};
LinearGrads linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy);

Matrix softmax_forward(const Matrix& x);
Matrix softmax_backward(const Matrix& y, const Matrix& dy);

Matrix gelu_forward(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

Matrix layer_norm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, double eps);
struct LayerNormGrads {
  Matrix dx, dgamma, dbeta;
};
LayerNormGrads layer_norm_backward(const Matrix& x, const Matrix& gamma, const Matrix& dy, double eps);

Matrix sdpa_forward(const Matrix& q, const Matrix& k, const Matrix& v);
struct SdpaGrads {
  Matrix dq, dk, dv;
};
SdpaGrads sdpa_backward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& dout);

}  // namespace grad
}  // namespace clft
