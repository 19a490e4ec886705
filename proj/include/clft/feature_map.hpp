#pragma once

#include "clft/tensor.hpp"

namespace clft {

/// Image-like C×H×W activation.
struct FeatureMap {
  Tensor data;

  FeatureMap() = default;
  explicit FeatureMap(Tensor t) : data(std::move(t)) {
    if (data.ndim() != 3) throw ShapeError("feature map must be C×H×W, got " + shape_to_string(data.shape()));
  }

  std::size_t channels() const { return data.dim(0); }
  std::size_t height() const { return data.dim(1); }
  std::size_t width() const { return data.dim(2); }
  const Shape& shape() const { return data.shape(); }
};

}  // namespace clft
