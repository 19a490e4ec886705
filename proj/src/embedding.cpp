#include "clft/embedding.hpp"

#include <string>

#include "clft/ops.hpp"

namespace clft {

Tensor patchify(const Tensor& image, int patch) {
  if (image.ndim() != 3) throw ShapeError("patchify expects C×H×W, got " + shape_to_string(image.shape()));
  if (patch < 1) throw std::invalid_argument("patch size must be positive");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto p = static_cast<std::size_t>(patch);
  if (h % p != 0 || w % p != 0) {
    throw ShapeError("image " + shape_to_string(image.shape()) + " is not divisible into " +
                     std::to_string(patch) + "x" + std::to_string(patch) + " patches");
  }
  const std::size_t gr = h / p, gc = w / p;
  Tensor out({gr * gc, c * p * p});
  for (std::size_t py = 0; py < gr; ++py) {
    for (std::size_t px = 0; px < gc; ++px) {
      auto row = out.row(py * gc + px);
      std::size_t idx = 0;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx) row[idx++] = image.at(ch, py * p + dy, px * p + dx);
    }
  }
  return out;
}

Tensor unpatchify(const Tensor& patches, int channels, int rows, int cols, int patch) {
  const auto c = static_cast<std::size_t>(channels), h = static_cast<std::size_t>(rows),
             w = static_cast<std::size_t>(cols), p = static_cast<std::size_t>(patch);
  if (p == 0 || h % p != 0 || w % p != 0) throw ShapeError("unpatchify: size not divisible by patch");
  const std::size_t gr = h / p, gc = w / p;
  if (patches.shape() != Shape{gr * gc, c * p * p}) {
    throw ShapeError("unpatchify: patches " + shape_to_string(patches.shape()) + " do not match " +
                     std::to_string(channels) + "x" + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor image({c, h, w});
  for (std::size_t py = 0; py < gr; ++py) {
    for (std::size_t px = 0; px < gc; ++px) {
      auto row = patches.row(py * gc + px);
      std::size_t idx = 0;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx) image.at(ch, py * p + dy, px * p + dx) = row[idx++];
    }
  }
  return image;
}

PatchGrid patch_grid_for(const ClftConfig& cfg) {
  return PatchGrid{cfg.grid_rows(), cfg.grid_cols(), cfg.patch, cfg.token_dim()};
}

TokenMatrix embed(const Tensor& patches, const EmbeddingWeights& w, const PatchGrid& grid) {
  const auto n = static_cast<std::size_t>(grid.tokens());
  if (patches.ndim() != 2 || patches.dim(0) != n || patches.dim(1) != static_cast<std::size_t>(grid.token_dim)) {
    throw ShapeError("embed: patches " + shape_to_string(patches.shape()) + " do not match a " +
                     std::to_string(n) + "-token grid of width " + std::to_string(grid.token_dim));
  }
  if (w.projection.ndim() != 2 || w.projection.dim(0) != patches.dim(1)) {
    throw ShapeError("embed: projection " + shape_to_string(w.projection.shape()) + " does not accept tokens of width " +
                     std::to_string(patches.dim(1)));
  }
  const std::size_t d = w.projection.dim(1);
  if (w.class_token.numel() != d || w.positional.shape() != Shape{n + 1, d}) {
    throw ShapeError("embed: class token " + shape_to_string(w.class_token.shape()) + " / positional " +
                     shape_to_string(w.positional.shape()) + " inconsistent with " + std::to_string(n + 1) + "x" +
                     std::to_string(d));
  }
  const Tensor projected = matmul(patches, w.projection);
  Tensor tokens({n + 1, d});
  auto first = tokens.row(0);
  for (std::size_t j = 0; j < d; ++j) first[j] = w.class_token[j] + w.positional.at(0, j);
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = tokens.row(i + 1);
    auto src = projected.row(i);
    auto pos = w.positional.row(i + 1);
    for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] + pos[j];
  }
  return TokenMatrix{std::move(tokens), grid};
}

namespace {

ConvWeights zero_conv(int out, int in, int k) {
  const auto o = static_cast<std::size_t>(out), i = static_cast<std::size_t>(in), kk = static_cast<std::size_t>(k);
  return ConvWeights{Tensor({o, i, kk, kk}), Tensor({o})};
}

Tensor apply(const ConvWeights& c, const Tensor& x, int stride, int pad) {
  return conv2d(x, c.weight, c.bias, stride, pad);
}

Tensor bottleneck(const Tensor& x, const BottleneckWeights& b) {
  Tensor y = relu(apply(b.reduce, x, 1, 0));
  y = relu(apply(b.spatial, y, b.stride, 1));
  y = apply(b.expand, y, 1, 0);
  const Tensor shortcut = b.projection ? apply(*b.projection, x, b.stride, 0) : x;
  return relu(add(y, shortcut));
}

}  // namespace

ResidualStemWeights allocate_stem(const StemConfig& stem) {
  ResidualStemWeights w;
  w.stem = zero_conv(stem.stem_channels(), 3, 7);
  int in = stem.stem_channels();
  for (int s = 0; s < 3; ++s) {
    std::vector<BottleneckWeights> blocks;
    const int mid = stem.mid_channels(s), out = stem.out_channels(s);
    for (int b = 0; b < stem.blocks[static_cast<std::size_t>(s)]; ++b) {
      BottleneckWeights bw;
      bw.stride = (b == 0 && s > 0) ? 2 : 1;
      bw.reduce = zero_conv(mid, in, 1);
      bw.spatial = zero_conv(mid, mid, 3);
      bw.expand = zero_conv(out, mid, 1);
      if (in != out || bw.stride != 1) bw.projection = zero_conv(out, in, 1);
      blocks.push_back(std::move(bw));
      in = out;
    }
    w.stages.push_back(std::move(blocks));
  }
  return w;
}

StemOutput hybrid_stem(const Tensor& image, const ResidualStemWeights& stem) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ShapeError("hybrid_stem expects a 3×H×W image, got " + shape_to_string(image.shape()));
  }
  if (image.dim(1) % 16 != 0 || image.dim(2) % 16 != 0) {
    throw ShapeError("hybrid_stem needs H and W divisible by 16, got " + shape_to_string(image.shape()));
  }
  if (stem.stages.size() != 3) throw ShapeError("hybrid_stem expects three residual stages");
  if (stem.stem.weight.ndim() != 4 || stem.stem.weight.dim(1) != 3) {
    throw ShapeError("hybrid_stem: stem conv " + shape_to_string(stem.stem.weight.shape()) + " does not take RGB");
  }

  Tensor x = relu(apply(stem.stem, image, 2, 3));
  x = max_pool2d(x, 3, 2, 1);
  StemOutput out;
  for (std::size_t s = 0; s < stem.stages.size(); ++s) {
    for (const auto& block : stem.stages[s]) x = bottleneck(x, block);
    if (s + 1 < stem.stages.size()) out.stage_maps.emplace_back(x);
  }
  const std::size_t c = x.dim(0), gh = x.dim(1), gw = x.dim(2);
  out.tokens = transpose(std::move(x).reshaped({c, gh * gw}));
  out.grid = PatchGrid{static_cast<int>(gh), static_cast<int>(gw), 16, static_cast<int>(c)};
  return out;
}

}  // namespace clft
