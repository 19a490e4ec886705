#include "clft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "clft/rng.hpp"
#include "kernels.hpp"

namespace clft {

std::string_view grad_op_name(GradOp op) {
  switch (op) {
    case GradOp::kLinear: return "linear";
    case GradOp::kSoftmax: return "softmax";
    case GradOp::kGelu: return "gelu";
    case GradOp::kLayerNorm: return "layer_norm";
    case GradOp::kSdpa: return "sdpa";
  }
  return "unknown";
}

std::optional<GradOp> parse_grad_op(std::string_view name) {
  for (GradOp op : kAllGradOps) {
    if (grad_op_name(op) == name) return op;
  }
  return std::nullopt;
}

namespace grad {
namespace {

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t t = 0; t < a.cols; ++t)
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += a(i, t) * b(t, j);
  return c;
}

Matrix transposed(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix scaled(Matrix a, double s) {
  for (double& x : a.v) x *= s;
  return a;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

Matrix linear_forward(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += b.v[j];
  return y;
}

LinearGrads linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy) {
  LinearGrads g;
  g.dx = matmul(dy, transposed(w));
  g.dw = matmul(transposed(x), dy);
  g.db = Matrix(1, dy.cols);
  for (std::size_t i = 0; i < dy.rows; ++i)
    for (std::size_t j = 0; j < dy.cols; ++j) g.db.v[j] += dy(i, j);
  return g;
}

Matrix softmax_forward(const Matrix& x) {
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) detail::softmax_slice(&x.v[i * x.cols], &y.v[i * x.cols], x.cols, 1);
  return y;
}

Matrix softmax_backward(const Matrix& y, const Matrix& dy) {
  Matrix dx(y.rows, y.cols);
  for (std::size_t i = 0; i < y.rows; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols; ++j) dot += dy(i, j) * y(i, j);
    for (std::size_t j = 0; j < y.cols; ++j) dx(i, j) = y(i, j) * (dy(i, j) - dot);
  }
  return dx;
}

Matrix gelu_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.v) v = detail::gelu_value(v);
  return y;
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  Matrix dx(x.rows, x.cols);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const double xv = x.v[i];
    dx.v[i] = dy.v[i] * (normal_cdf(xv) + xv * normal_pdf(xv));
  }
  return dx;
}

Matrix layer_norm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, double eps) {
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    detail::layer_norm_row(&x.v[i * x.cols], gamma.v.data(), beta.v.data(), x.cols, eps, &y.v[i * x.cols]);
  }
  return y;
}

LayerNormGrads layer_norm_backward(const Matrix& x, const Matrix& gamma, const Matrix& dy, double eps) {
  const std::size_t d = x.cols;
  LayerNormGrads g{Matrix(x.rows, d), Matrix(1, d), Matrix(1, d)};
  std::vector<double> xhat(d), dxhat(d);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += x(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      xhat[j] = (x(i, j) - mean) * inv_std;
      dxhat[j] = dy(i, j) * gamma.v[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xhat[j];
      g.dgamma.v[j] += dy(i, j) * xhat[j];
      g.dbeta.v[j] += dy(i, j);
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      g.dx(i, j) = inv_std * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
    }
  }
  return g;
}

Matrix sdpa_forward(const Matrix& q, const Matrix& k, const Matrix& v) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols));
  return matmul(softmax_forward(scaled(matmul(q, transposed(k)), inv_sqrt_dk)), v);
}

SdpaGrads sdpa_backward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& dout) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols));
  const Matrix p = softmax_forward(scaled(matmul(q, transposed(k)), inv_sqrt_dk));
  SdpaGrads g;
  g.dv = matmul(transposed(p), dout);
  const Matrix dp = matmul(dout, transposed(v));
  const Matrix ds = scaled(softmax_backward(p, dp), inv_sqrt_dk);
  g.dq = matmul(ds, k);
  g.dk = matmul(transposed(ds), q);
  return g;
}

}  // namespace grad

namespace {

using grad::Matrix;

constexpr double kStep = 1e-3;

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& x : m.v) x = rng.uniform(lo, hi);
  return m;
}

double weighted_sum(const Matrix& y, const Matrix& cot) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * cot.v[i];
  return s;
}

// Central differences of loss() with respect to every entry of `param`.
Matrix numeric_gradient(Matrix& param, const std::function<double()>& loss) {
  Matrix g(param.rows, param.cols);
  for (std::size_t i = 0; i < param.v.size(); ++i) {
    const double orig = param.v[i];
    param.v[i] = orig + kStep;
    const double plus = loss();
    param.v[i] = orig - kStep;
    const double minus = loss();
    param.v[i] = orig;
    g.v[i] = (plus - minus) / (2.0 * kStep);
  }
  return g;
}

struct Errors {
  double rel = 0.0;
  double abs = 0.0;

  void include(const Matrix& analytic, const Matrix& numeric) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.v.size(); ++i) {
      diff = std::max(diff, std::abs(analytic.v[i] - numeric.v[i]));
      scale = std::max({scale, std::abs(analytic.v[i]), std::abs(numeric.v[i])});
    }
    abs = std::max(abs, diff);
    if (diff > 0.0) rel = std::max(rel, scale > 0.0 ? diff / scale : INFINITY);
  }
};

Errors check_linear(Rng& rng) {
  Matrix x = random_matrix(rng, 4, 6), w = random_matrix(rng, 6, 5), b = random_matrix(rng, 1, 5);
  const Matrix cot(4, 5, 1.0);
  auto loss = [&] { return weighted_sum(grad::linear_forward(x, w, b), cot); };
  const auto g = grad::linear_backward(x, w, cot);
  Errors e;
  e.include(g.dx, numeric_gradient(x, loss));
  e.include(g.dw, numeric_gradient(w, loss));
  e.include(g.db, numeric_gradient(b, loss));
  return e;
}

Errors check_softmax(Rng& rng) {
  Matrix x = random_matrix(rng, 5, 7, -2.0, 2.0);
  const Matrix cot = random_matrix(rng, 5, 7);
  auto loss = [&] { return weighted_sum(grad::softmax_forward(x), cot); };
  Errors e;
  e.include(grad::softmax_backward(grad::softmax_forward(x), cot), numeric_gradient(x, loss));
  return e;
}

Errors check_gelu(Rng& rng) {
  Matrix x = random_matrix(rng, 6, 6, -3.0, 3.0);
  const Matrix cot(6, 6, 1.0);
  auto loss = [&] { return weighted_sum(grad::gelu_forward(x), cot); };
  Errors e;
  e.include(grad::gelu_backward(x, cot), numeric_gradient(x, loss));
  return e;
}

Errors check_layer_norm(Rng& rng) {
  constexpr double kEps = 1e-5;
  Matrix x = random_matrix(rng, 5, 8, -2.0, 2.0);
  Matrix gamma = random_matrix(rng, 1, 8, 0.5, 1.5);
  Matrix beta = random_matrix(rng, 1, 8);
  const Matrix cot(5, 8, 1.0);
  auto loss = [&] { return weighted_sum(grad::layer_norm_forward(x, gamma, beta, kEps), cot); };
  const auto g = grad::layer_norm_backward(x, gamma, cot, kEps);
  Errors e;
  e.include(g.dx, numeric_gradient(x, loss));
  e.include(g.dgamma, numeric_gradient(gamma, loss));
  e.include(g.dbeta, numeric_gradient(beta, loss));
  return e;
}

Errors check_sdpa(Rng& rng) {
  Matrix q = random_matrix(rng, 5, 4), k = random_matrix(rng, 5, 4), v = random_matrix(rng, 5, 3);
  const Matrix cot(5, 3, 1.0);
  auto loss = [&] { return weighted_sum(grad::sdpa_forward(q, k, v), cot); };
  const auto g = grad::sdpa_backward(q, k, v, cot);
  Errors e;
  e.include(g.dq, numeric_gradient(q, loss));
  e.include(g.dk, numeric_gradient(k, loss));
  e.include(g.dv, numeric_gradient(v, loss));
  return e;
}

}  // namespace

GradReport grad_check(GradOp op, std::uint64_t seed, double tolerance) {
  if (!(tolerance >= 0.0)) throw std::invalid_argument("grad_check tolerance must be non-negative");
  Rng rng(derive_seed(seed, grad_op_name(op)));
  Errors e;
  switch (op) {
    case GradOp::kLinear: e = check_linear(rng); break;
    case GradOp::kSoftmax: e = check_softmax(rng); break;
    case GradOp::kGelu: e = check_gelu(rng); break;
    case GradOp::kLayerNorm: e = check_layer_norm(rng); break;
    case GradOp::kSdpa: e = check_sdpa(rng); break;
    default: throw std::invalid_argument("unknown gradient-check op");
  }
  return GradReport{std::string(grad_op_name(op)), e.rel, e.abs, e.rel <= tolerance};
}

}  // namespace clft
