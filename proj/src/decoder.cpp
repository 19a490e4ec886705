#include "clft/decoder.hpp"

#include <string>

#include "clft/ops.hpp"

namespace clft {

Tensor readout(const TokenMatrix& tokens, ReadoutMode mode, const ReadoutWeights* w) {
  const Tensor& t = tokens.tokens;
  if (t.ndim() != 2 || t.dim(0) < 2) {
    throw ShapeError("readout needs a class token row plus patch rows, got " + shape_to_string(t.shape()));
  }
  const std::size_t n = t.dim(0) - 1, d = t.dim(1);
  if (tokens.grid.tokens() > 0 && static_cast<std::size_t>(tokens.grid.tokens()) != n) {
    throw ShapeError("readout: " + std::to_string(t.dim(0)) + " rows do not hold a class token plus " +
                     std::to_string(tokens.grid.tokens()) + " patch tokens");
  }
  auto cls = t.row(0);
  switch (mode) {
    case ReadoutMode::kIgnore:
    case ReadoutMode::kAdd: {
      Tensor out({n, d});
      for (std::size_t i = 0; i < n; ++i) {
        auto src = t.row(i + 1);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < d; ++j) dst[j] = mode == ReadoutMode::kAdd ? src[j] + cls[j] : src[j];
      }
      return out;
    }
    case ReadoutMode::kProject: {
      if (w == nullptr) throw std::invalid_argument("project readout needs weights");
      if (w->weight.shape() != Shape{2 * d, d}) {
        throw ShapeError("readout projection " + shape_to_string(w->weight.shape()) + " expected [" +
                         std::to_string(2 * d) + "x" + std::to_string(d) + "]");
      }
      Tensor cat({n, 2 * d});
      for (std::size_t i = 0; i < n; ++i) {
        auto src = t.row(i + 1);
        auto dst = cat.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
        std::copy(cls.begin(), cls.end(), dst.begin() + static_cast<std::ptrdiff_t>(d));
      }
      return gelu(linear(cat, w->weight, w->bias));
    }
  }
  throw std::invalid_argument("unknown readout mode");
}

FeatureMap reassemble(const Tensor& spatial, const PatchGrid& grid) {
  const auto n = static_cast<std::size_t>(grid.tokens());
  if (spatial.ndim() != 2 || spatial.dim(0) != n) {
    throw ShapeError("reassemble: " + shape_to_string(spatial.shape()) + " does not hold " + std::to_string(n) +
                     " tokens for a " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " grid");
  }
  const std::size_t d = spatial.dim(1);
  return FeatureMap(transpose(spatial).reshaped(
      {d, static_cast<std::size_t>(grid.rows), static_cast<std::size_t>(grid.cols)}));
}

Tensor flatten_tokens(const FeatureMap& map) {
  return transpose(map.data.reshaped({map.channels(), map.height() * map.width()}));
}

namespace {

struct StageGeometry {
  std::size_t target_h;
  std::size_t target_w;
  enum class Op { kNone, kUp, kDown } op;
  int factor;
};

StageGeometry stage_geometry(std::size_t in_h, std::size_t in_w, int scale, const ClftConfig& cfg) {
  if (scale < 1 || cfg.rows % scale != 0 || cfg.cols % scale != 0) {
    throw ShapeError("scale " + std::to_string(scale) + " gives a non-integral target size for " +
                     std::to_string(cfg.rows) + "x" + std::to_string(cfg.cols));
  }
  StageGeometry g{static_cast<std::size_t>(cfg.rows / scale), static_cast<std::size_t>(cfg.cols / scale),
                  StageGeometry::Op::kNone, 1};
  auto ratio = [](std::size_t big, std::size_t small) -> int {
    return big % small == 0 ? static_cast<int>(big / small) : 0;
  };
  if (in_h == g.target_h && in_w == g.target_w) return g;
  if (in_h < g.target_h) {
    const int f = ratio(g.target_h, in_h);
    if (f == 0 || ratio(g.target_w, in_w) != f) {
      throw ShapeError("cannot upsample " + std::to_string(in_h) + "x" + std::to_string(in_w) + " to " +
                       std::to_string(g.target_h) + "x" + std::to_string(g.target_w) + " by an integer factor");
    }
    g.op = StageGeometry::Op::kUp;
    g.factor = f;
  } else {
    const int f = ratio(in_h, g.target_h);
    if (f == 0 || ratio(in_w, g.target_w) != f) {
      throw ShapeError("cannot downsample " + std::to_string(in_h) + "x" + std::to_string(in_w) + " to " +
                       std::to_string(g.target_h) + "x" + std::to_string(g.target_w) + " by an integer factor");
    }
    g.op = StageGeometry::Op::kDown;
    g.factor = f;
  }
  return g;
}

bool is_scale_of(const ClftConfig& cfg, int scale) {
  for (int s : cfg.scales) {
    if (s == scale) return true;
  }
  return false;
}

}  // namespace

ResampleWeights allocate_resample(int in_channels, int in_h, int in_w, int scale, const ClftConfig& cfg) {
  const auto dhat = static_cast<std::size_t>(cfg.fusion_dim);
  const auto g = stage_geometry(static_cast<std::size_t>(in_h), static_cast<std::size_t>(in_w), scale, cfg);
  ResampleWeights w;
  w.project = ConvWeights{Tensor({dhat, static_cast<std::size_t>(in_channels), 1, 1}), Tensor({dhat})};
  const auto f = static_cast<std::size_t>(g.factor);
  if (g.op == StageGeometry::Op::kUp) {
    w.spatial = ConvWeights{Tensor({dhat, dhat, f, f}), Tensor({dhat})};
  } else if (g.op == StageGeometry::Op::kDown) {
    w.spatial = ConvWeights{Tensor({dhat, dhat, 3, 3}), Tensor({dhat})};
  }
  return w;
}

FeatureMap resample_stage(const FeatureMap& map, int scale, const ClftConfig& cfg, const ResampleWeights& w) {
  if (!is_scale_of(cfg, scale)) throw ShapeError("scale " + std::to_string(scale) + " is not a configured stage");
  const auto g = stage_geometry(map.height(), map.width(), scale, cfg);
  Tensor x = conv2d(map.data, w.project.weight, w.project.bias, 1, 0);
  switch (g.op) {
    case StageGeometry::Op::kNone:
      if (!w.spatial.weight.empty()) throw ShapeError("resample: unexpected spatial weights for a same-size stage");
      break;
    case StageGeometry::Op::kUp:
      x = conv_transpose2d(x, w.spatial.weight, w.spatial.bias, g.factor);
      break;
    case StageGeometry::Op::kDown:
      x = conv2d(x, w.spatial.weight, w.spatial.bias, g.factor, 1);
      break;
  }
  FeatureMap out(std::move(x));
  if (out.channels() != static_cast<std::size_t>(cfg.fusion_dim) || out.height() != g.target_h ||
      out.width() != g.target_w) {
    throw ShapeError("resample produced " + shape_to_string(out.shape()) + " for scale " + std::to_string(scale));
  }
  return out;
}

FeatureMap rcu(const FeatureMap& map, const RcuWeights& w) {
  if (w.conv1.weight.ndim() != 4 || w.conv1.weight.dim(1) != map.channels() ||
      w.conv2.weight.ndim() != 4 || w.conv2.weight.dim(0) != map.channels()) {
    throw ShapeError("rcu: weights " + shape_to_string(w.conv1.weight.shape()) + " do not match map " +
                     shape_to_string(map.shape()));
  }
  Tensor y = conv2d(relu(map.data), w.conv1.weight, w.conv1.bias, 1, 1);
  y = conv2d(relu(y), w.conv2.weight, w.conv2.bias, 1, 1);
  return FeatureMap(add(map.data, y));
}

FeatureMap fuse_stage(const FeatureMap* cam, const FeatureMap* lid, const FeatureMap* prev,
                      const FusionStageWeights& w) {
  if (cam == nullptr && lid == nullptr) throw std::invalid_argument("fuse_stage needs a camera or LiDAR map");
  if (cam && lid && cam->shape() != lid->shape()) {
    throw ShapeError("fuse_stage: camera " + shape_to_string(cam->shape()) + " vs LiDAR " +
                     shape_to_string(lid->shape()));
  }
  const Shape& stage = cam ? cam->shape() : lid->shape();

  Tensor sum;
  auto accumulate = [&sum](const Tensor& t) { sum = sum.empty() ? t : add(sum, t); };
  if (cam) accumulate(rcu(rcu(*cam, w.camera[0]), w.camera[1]).data);
  if (lid) accumulate(rcu(rcu(*lid, w.lidar[0]), w.lidar[1]).data);
  if (prev) {
    if (prev->channels() != stage[0] || 2 * prev->height() != stage[1] || 2 * prev->width() != stage[2]) {
      throw ShapeError("fuse_stage: previous stage " + shape_to_string(prev->shape()) +
                       " is not half the resolution of " + shape_to_string(stage));
    }
    accumulate(resize_bilinear(prev->data, stage[1], stage[2]));
  }
  return rcu(FeatureMap(std::move(sum)), w.merge);
}

Tensor segmentation_head(const FeatureMap& fused, const HeadWeights& w, int classes, int rows, int cols) {
  if (rows < 1 || cols < 1 || fused.height() * 4 != static_cast<std::size_t>(rows) ||
      fused.width() * 4 != static_cast<std::size_t>(cols)) {
    throw ShapeError("segmentation_head: fused map " + shape_to_string(fused.shape()) +
                     " is not at stride 4 of " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (w.classifier.weight.ndim() != 4 || w.classifier.weight.dim(0) != static_cast<std::size_t>(classes)) {
    throw ShapeError("segmentation_head: classifier " + shape_to_string(w.classifier.weight.shape()) +
                     " does not produce " + std::to_string(classes) + " classes");
  }
  Tensor x = relu(conv_transpose2d(fused.data, w.deconv.weight, w.deconv.bias, 2));
  x = conv2d(x, w.classifier.weight, w.classifier.bias, 1, 0);
  return resize_bilinear(x, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
}

}  // namespace clft
