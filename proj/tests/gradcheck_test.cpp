#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "clft/encoder.hpp"
#include "clft/gradcheck.hpp"
#include "clft/ops.hpp"
#include "test_support.hpp"

using namespace clft;

namespace {

grad::Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  grad::Matrix m(r, c);
  for (double& v : m.v) v = rng.uniform(-2.0, 2.0);
  return m;
}

Tensor to_tensor(const grad::Matrix& m) {
  Tensor t({m.rows, m.cols});
  for (std::size_t i = 0; i < m.v.size(); ++i) t[i] = static_cast<float>(m.v[i]);
  return t;
}

}  // namespace

TEST(GradCheckTest, EveryOpPassesAtTheDefaultToleranceOverTenSeeds) {
  const auto start = std::chrono::steady_clock::now();
  for (GradOp op : kAllGradOps) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const GradReport r = grad_check(op, seed, 1e-4);
      EXPECT_TRUE(r.pass) << r.op_name << " seed " << seed << " rel " << r.max_rel_error;
      EXPECT_GT(r.max_rel_error, 0.0) << r.op_name;
    }
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);
}

TEST(GradCheckTest, ZeroToleranceFailsAndNegativeIsRejected) {
  bool any_fail = false;
  for (GradOp op : kAllGradOps) any_fail = any_fail || !grad_check(op, 0, 0.0).pass;
  EXPECT_TRUE(any_fail);
  EXPECT_THROW(grad_check(GradOp::kGelu, 0, -1.0), std::invalid_argument);
  EXPECT_THROW(grad_check(GradOp::kGelu, 0, std::nan("")), std::invalid_argument);
}

TEST(GradCheckTest, OpNamesRoundTrip) {
  for (GradOp op : kAllGradOps) EXPECT_EQ(parse_grad_op(grad_op_name(op)), op);
  EXPECT_FALSE(parse_grad_op("conv").has_value());
}

// The backward passes checked above must differentiate the same functions
// the float kernels compute.
TEST(GradCheckTest, ReferenceForwardsMatchFloatKernels) {
  Rng rng(3);
  grad::Matrix x = random_matrix(5, 8, rng), w = random_matrix(8, 3, rng), b = random_matrix(1, 3, rng);
  Tensor bias({3});
  for (std::size_t i = 0; i < 3; ++i) bias[i] = static_cast<float>(b.v[i]);
  auto close = [](const grad::Matrix& m, const Tensor& t, double tol) {
    return max_abs_diff(to_tensor(m), t) <= tol;
  };
  EXPECT_TRUE(close(grad::linear_forward(x, w, b), linear(to_tensor(x), to_tensor(w), bias), 1e-5));
  EXPECT_TRUE(close(grad::softmax_forward(x), softmax(to_tensor(x), -1), 1e-6));
  EXPECT_TRUE(close(grad::gelu_forward(x), gelu(to_tensor(x)), 1e-6));
  grad::Matrix gamma = random_matrix(1, 8, rng), beta = random_matrix(1, 8, rng);
  Tensor g({8}), be({8});
  for (std::size_t i = 0; i < 8; ++i) {
    g[i] = static_cast<float>(gamma.v[i]);
    be[i] = static_cast<float>(beta.v[i]);
  }
  EXPECT_TRUE(close(grad::layer_norm_forward(x, gamma, beta, 1e-5), layer_norm(to_tensor(x), g, be, 1e-5f), 1e-5));
  grad::Matrix q = random_matrix(4, 6, rng), k = random_matrix(5, 6, rng), v = random_matrix(5, 2, rng);
  EXPECT_TRUE(close(grad::sdpa_forward(q, k, v),
                    scaled_dot_product_attention(to_tensor(q), to_tensor(k), to_tensor(v)), 1e-5));
}

// Independent oracle: the softmax Jacobian is diag(y) − y·yᵀ per row.
TEST(GradCheckTest, SoftmaxBackwardMatchesExplicitJacobian) {
  Rng rng(4);
  grad::Matrix x = random_matrix(3, 6, rng), dy = random_matrix(3, 6, rng);
  grad::Matrix y = grad::softmax_forward(x);
  grad::Matrix dx = grad::softmax_backward(y, dy);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      double want = 0.0;
      for (std::size_t k = 0; k < 6; ++k) want += dy(i, k) * ((j == k ? y(i, j) : 0.0) - y(i, j) * y(i, k));
      EXPECT_NEAR(dx(i, j), want, 1e-12);
    }
  }
}

// Linear gradients in closed form: dx = dy·wᵀ, dw = xᵀ·dy, db = column sums.
TEST(GradCheckTest, LinearBackwardMatchesMatrixCalculus) {
  Rng rng(5);
  grad::Matrix x = random_matrix(4, 3, rng), w = random_matrix(3, 2, rng), dy = random_matrix(4, 2, rng);
  const auto g = grad::linear_backward(x, w, dy);
  const Tensor dx = matmul(to_tensor(dy), transpose(to_tensor(w)));
  const Tensor dw = matmul(transpose(to_tensor(x)), to_tensor(dy));
  EXPECT_LE(max_abs_diff(to_tensor(g.dx), dx), 1e-5);
  EXPECT_LE(max_abs_diff(to_tensor(g.dw), dw), 1e-5);
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += dy(i, j);
    EXPECT_NEAR(g.db.v[j], s, 1e-12);
  }
}
