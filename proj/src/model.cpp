#include "clft/model.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "clft/ops.hpp"
#include "clft/rng.hpp"

namespace clft {

std::string_view modality_name(ModalityMode m) {
  switch (m) {
    case ModalityMode::kCameraOnly: return "camera";
    case ModalityMode::kLidarOnly: return "lidar";
    case ModalityMode::kCrossFusion: return "fusion";
  }
  return "?";
}

std::optional<ModalityMode> parse_modality(std::string_view name) {
  if (name == "camera") return ModalityMode::kCameraOnly;
  if (name == "lidar") return ModalityMode::kLidarOnly;
  if (name == "fusion") return ModalityMode::kCrossFusion;
  return std::nullopt;
}

namespace {

template <class T>
using Visitor = std::function<void(const std::string&, T&, ParamKind)>;

template <class T, class C>
void visit_conv(const std::string& prefix, C& c, const Visitor<T>& f) {
  f(prefix + ".weight", c.weight, ParamKind::kWeight);
  if (!c.bias.empty()) f(prefix + ".bias", c.bias, ParamKind::kBias);
}

template <class T, class B>
void visit_branch(const std::string& p, B& b, const Visitor<T>& f) {
  f(p + ".embed.projection", b.embedding.projection, ParamKind::kWeight);
  f(p + ".embed.positional", b.embedding.positional, ParamKind::kEmbedding);
  f(p + ".embed.class_token", b.embedding.class_token, ParamKind::kEmbedding);
  if (b.stem) {
    visit_conv<T>(p + ".stem.conv", b.stem->stem, f);
    for (std::size_t s = 0; s < b.stem->stages.size(); ++s) {
      for (std::size_t k = 0; k < b.stem->stages[s].size(); ++k) {
        auto& block = b.stem->stages[s][k];
        const std::string q = p + ".stem.stage" + std::to_string(s) + ".block" + std::to_string(k);
        visit_conv<T>(q + ".reduce", block.reduce, f);
        visit_conv<T>(q + ".spatial", block.spatial, f);
        visit_conv<T>(q + ".expand", block.expand, f);
        if (block.projection) visit_conv<T>(q + ".shortcut", *block.projection, f);
      }
    }
  }
  for (std::size_t l = 0; l < b.layers.size(); ++l) {
    auto& w = b.layers[l];
    const std::string q = p + ".encoder.layer" + std::to_string(l + 1);
    f(q + ".ln1.gamma", w.ln1_gamma, ParamKind::kNormScale);
    f(q + ".ln1.beta", w.ln1_beta, ParamKind::kNormShift);
    f(q + ".attn.q.weight", w.attention.w_q, ParamKind::kWeight);
    f(q + ".attn.q.bias", w.attention.b_q, ParamKind::kBias);
    f(q + ".attn.k.weight", w.attention.w_k, ParamKind::kWeight);
    f(q + ".attn.k.bias", w.attention.b_k, ParamKind::kBias);
    f(q + ".attn.v.weight", w.attention.w_v, ParamKind::kWeight);
    f(q + ".attn.v.bias", w.attention.b_v, ParamKind::kBias);
    f(q + ".attn.out.weight", w.attention.w_o, ParamKind::kWeight);
    f(q + ".attn.out.bias", w.attention.b_o, ParamKind::kBias);
    f(q + ".ln2.gamma", w.ln2_gamma, ParamKind::kNormScale);
    f(q + ".ln2.beta", w.ln2_beta, ParamKind::kNormShift);
    f(q + ".mlp.fc1.weight", w.mlp_w1, ParamKind::kWeight);
    f(q + ".mlp.fc1.bias", w.mlp_b1, ParamKind::kBias);
    f(q + ".mlp.fc2.weight", w.mlp_w2, ParamKind::kWeight);
    f(q + ".mlp.fc2.bias", w.mlp_b2, ParamKind::kBias);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string q = p + ".stage" + std::to_string(i);
    if (!b.readout[i].weight.empty()) {
      f(q + ".readout.weight", b.readout[i].weight, ParamKind::kWeight);
      f(q + ".readout.bias", b.readout[i].bias, ParamKind::kBias);
    }
    visit_conv<T>(q + ".resample.project", b.resample[i].project, f);
    if (!b.resample[i].spatial.weight.empty()) visit_conv<T>(q + ".resample.spatial", b.resample[i].spatial, f);
  }
}

template <class T, class M>
void visit_model(M& m, const Visitor<T>& f) {
  visit_branch<T>("camera", m.camera, f);
  visit_branch<T>("lidar", m.lidar, f);
  for (std::size_t i = 0; i < 4; ++i) {
    auto& s = m.fusion[i];
    const std::string q = "fusion.stage" + std::to_string(i);
    for (std::size_t j = 0; j < 2; ++j) {
      visit_conv<T>(q + ".camera_rcu" + std::to_string(j) + ".conv1", s.camera[j].conv1, f);
      visit_conv<T>(q + ".camera_rcu" + std::to_string(j) + ".conv2", s.camera[j].conv2, f);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      visit_conv<T>(q + ".lidar_rcu" + std::to_string(j) + ".conv1", s.lidar[j].conv1, f);
      visit_conv<T>(q + ".lidar_rcu" + std::to_string(j) + ".conv2", s.lidar[j].conv2, f);
    }
    visit_conv<T>(q + ".merge.conv1", s.merge.conv1, f);
    visit_conv<T>(q + ".merge.conv2", s.merge.conv2, f);
  }
  visit_conv<T>("head.deconv", m.head.deconv, f);
  visit_conv<T>("head.classifier", m.head.classifier, f);
}

Tensor vec(int n, float fill = 0.0f) { return Tensor({static_cast<std::size_t>(n)}, fill); }
Tensor mat(int r, int c) { return Tensor({static_cast<std::size_t>(r), static_cast<std::size_t>(c)}); }

RcuWeights allocate_rcu(int c) {
  const auto cc = static_cast<std::size_t>(c);
  return RcuWeights{ConvWeights{Tensor({cc, cc, 3, 3}), Tensor()}, ConvWeights{Tensor({cc, cc, 3, 3}), Tensor()}};
}

EncoderLayerWeights allocate_layer(const ClftConfig& cfg) {
  const int d = cfg.dim;
  EncoderLayerWeights w;
  w.ln1_gamma = vec(d, 1.0f);
  w.ln1_beta = vec(d);
  for (Tensor* t : {&w.attention.w_q, &w.attention.w_k, &w.attention.w_v, &w.attention.w_o}) *t = mat(d, d);
  for (Tensor* t : {&w.attention.b_q, &w.attention.b_k, &w.attention.b_v, &w.attention.b_o}) *t = vec(d);
  w.ln2_gamma = vec(d, 1.0f);
  w.ln2_beta = vec(d);
  w.mlp_w1 = mat(d, cfg.mlp_dim);
  w.mlp_b1 = vec(cfg.mlp_dim);
  w.mlp_w2 = mat(cfg.mlp_dim, d);
  w.mlp_b2 = vec(d);
  return w;
}

// Without `with_layers` the encoder layers are left empty (shape-only use).
BranchWeights allocate_branch(const ClftConfig& cfg, bool with_layers) {
  const int d = cfg.dim;
  BranchWeights b;
  b.embedding.projection = mat(cfg.token_dim(), d);
  b.embedding.positional = mat(cfg.num_tokens() + 1, d);
  b.embedding.class_token = mat(1, d);
  if (cfg.hybrid()) b.stem = allocate_stem(cfg.stem);
  b.layers.resize(static_cast<std::size_t>(cfg.layers));
  if (with_layers) {
    for (auto& w : b.layers) w = allocate_layer(cfg);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const TapSource& tap = cfg.taps[i];
    int channels = d, h = cfg.grid_rows(), w = cfg.grid_cols();
    if (tap.is_layer()) {
      b.readout[i] = ReadoutWeights{mat(2 * d, d), vec(d)};
    } else {
      const int stride = 4 << (tap.index - 1);
      channels = cfg.stem.out_channels(tap.index - 1);
      h = cfg.rows / stride;
      w = cfg.cols / stride;
    }
    b.resample[i] = allocate_resample(channels, h, w, cfg.scales[i], cfg);
  }
  return b;
}

ModelWeights allocate_model_impl(const ClftConfig& cfg, bool with_layers) {
  validate(cfg);
  ModelWeights m;
  m.camera = allocate_branch(cfg, with_layers);
  m.lidar = allocate_branch(cfg, with_layers);
  const int dhat = cfg.fusion_dim;
  for (auto& s : m.fusion) {
    s.camera = {allocate_rcu(dhat), allocate_rcu(dhat)};
    s.lidar = {allocate_rcu(dhat), allocate_rcu(dhat)};
    s.merge = allocate_rcu(dhat);
  }
  const auto dh = static_cast<std::size_t>(dhat);
  m.head.deconv = ConvWeights{Tensor({dh, dh / 2, 2, 2}), Tensor({dh / 2})};
  m.head.classifier =
      ConvWeights{Tensor({static_cast<std::size_t>(cfg.num_classes()), dh / 2, 1, 1}), vec(cfg.num_classes())};
  return m;
}

}  // namespace

void for_each_parameter(const ModelWeights& w, const std::function<void(const std::string&, const Tensor&, ParamKind)>& f) {
  visit_model<const Tensor>(w, f);
}

void for_each_parameter(ModelWeights& w, const std::function<void(const std::string&, Tensor&, ParamKind)>& f) {
  visit_model<Tensor>(w, f);
}

std::size_t parameter_count(const ModelWeights& w) {
  std::size_t n = 0;
  for_each_parameter(w, [&n](const std::string&, const Tensor& t, ParamKind) { n += t.numel(); });
  return n;
}

ModelWeights allocate_model(const ClftConfig& cfg) { return allocate_model_impl(cfg, true); }

void init_parameter(const std::string& name, ParamKind kind, std::uint64_t seed, Tensor& t) {
  Rng rng(derive_seed(seed, name));
  switch (kind) {
    case ParamKind::kWeight:
      for (float& v : t.data()) v = static_cast<float>(rng.truncated_normal(0.02));
      break;
    case ParamKind::kEmbedding:
      for (float& v : t.data()) v = static_cast<float>(0.02 * rng.normal());
      break;
    case ParamKind::kBias:
    case ParamKind::kNormShift:
      std::fill(t.data().begin(), t.data().end(), 0.0f);
      break;
    case ParamKind::kNormScale:
      std::fill(t.data().begin(), t.data().end(), 1.0f);
      break;
  }
}

ModelWeights init_model(const ClftConfig& cfg, std::uint64_t seed) {
  ModelWeights m = allocate_model(cfg);
  for_each_parameter(m, [seed](const std::string& name, Tensor& t, ParamKind kind) {
    init_parameter(name, kind, seed, t);
  });
  return m;
}

std::vector<ParamSpec> parameter_specs(const ClftConfig& cfg) {
  const ModelWeights skeleton = allocate_model_impl(cfg, false);
  // Shapes of one encoder layer, keyed by the name suffix after "layerN".
  BranchWeights proto;
  proto.layers.push_back(allocate_layer(cfg));
  std::map<std::string, Shape> layer_shapes;
  visit_branch<const Tensor>("", proto, [&](const std::string& name, const Tensor& t, ParamKind) {
    const std::string key = ".encoder.layer1.";
    if (name.starts_with(key)) layer_shapes[name.substr(key.size())] = t.shape();
  });

  std::vector<ParamSpec> specs;
  for_each_parameter(skeleton, [&](const std::string& name, const Tensor& t, ParamKind kind) {
    if (!t.empty()) {
      specs.push_back({name, t.shape(), kind});
      return;
    }
    const auto at = name.find(".encoder.layer");
    const auto dot = name.find('.', at + 14);
    specs.push_back({name, layer_shapes.at(name.substr(dot + 1)), kind});
  });
  return specs;
}

void write_initialized_model(const std::filesystem::path& path, const ClftConfig& cfg, std::uint64_t seed) {
  const auto specs = parameter_specs(cfg);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  CheckpointWriter writer(out, specs.size());
  for (const ParamSpec& spec : specs) {
    Tensor t(spec.shape);
    init_parameter(spec.name, spec.kind, seed, t);
    writer.write(spec.name, t);
  }
  writer.close();
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

std::vector<NamedTensorRef> model_refs(const ModelWeights& w, std::vector<std::string>& names) {
  std::vector<const Tensor*> tensors;
  for_each_parameter(w, [&](const std::string& name, const Tensor& t, ParamKind) {
    names.push_back(name);
    tensors.push_back(&t);
  });
  std::vector<NamedTensorRef> refs;
  refs.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) refs.push_back({names[i], tensors[i]});
  return refs;
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelWeights& w) {
  std::vector<std::string> names;
  const auto refs = model_refs(w, names);
  save_checkpoint(path, std::span<const NamedTensorRef>(refs));
}

std::string encode_model(const ModelWeights& w) {
  std::vector<std::string> names;
  const auto refs = model_refs(w, names);
  std::ostringstream out;
  write_checkpoint(out, std::span<const NamedTensorRef>(refs));
  return std::move(out).str();
}

ModelWeights model_from_entries(std::vector<NamedTensor> entries, const ClftConfig& cfg) {
  ModelWeights m = allocate_model(cfg);
  std::map<std::string, Tensor*> slots;
  for_each_parameter(m, [&slots](const std::string& name, Tensor& t, ParamKind) { slots[name] = &t; });
  for (NamedTensor& e : entries) {
    auto it = slots.find(e.name);
    if (it == slots.end()) {
      throw ConfigError("checkpoint entry '" + e.name + "' is not a parameter of the " +
                        std::string(variant_name(cfg.variant)) + " configuration");
    }
    if (it->second == nullptr) throw ConfigError("checkpoint entry '" + e.name + "' appears twice");
    if (e.tensor.shape() != it->second->shape()) {
      throw ConfigError("checkpoint entry '" + e.name + "' has shape " + shape_to_string(e.tensor.shape()) +
                        ", the " + std::string(variant_name(cfg.variant)) + " configuration expects " +
                        shape_to_string(it->second->shape()));
    }
    *it->second = std::move(e.tensor);
    it->second = nullptr;
  }
  for (const auto& [name, slot] : slots) {
    if (slot != nullptr) {
      throw ConfigError("checkpoint lacks parameter '" + name + "' required by the " +
                        std::string(variant_name(cfg.variant)) + " configuration");
    }
  }
  return m;
}

ModelWeights load_model(const std::filesystem::path& path, const ClftConfig& cfg) {
  return model_from_entries(load_checkpoint(path), cfg);
}

namespace {

class ShapeRecorder : public AttentionObserver {
 public:
  explicit ShapeRecorder(BranchTrace* trace) : trace_(trace) {}
  void on_head(int layer, int head, const Tensor& q, const Tensor& k, const Tensor& v, const Tensor&) override {
    if (layer != 1 || head != 0) return;
    trace_->head_q = q.shape();
    trace_->head_k = k.shape();
    trace_->head_v = v.shape();
  }

 private:
  BranchTrace* trace_;
};

}  // namespace

std::array<FeatureMap, 4> branch_features(const Tensor& image, const BranchWeights& w, const ClftConfig& cfg,
                                          BranchTrace* trace) {
  const Shape expected{3, static_cast<std::size_t>(cfg.rows), static_cast<std::size_t>(cfg.cols)};
  if (image.shape() != expected) {
    throw ShapeError("branch input " + shape_to_string(image.shape()) + ", expected " + shape_to_string(expected));
  }
  if (cfg.hybrid() != w.stem.has_value()) throw ConfigError("branch weights do not match the configuration");

  std::optional<StemOutput> stem;
  TokenMatrix tokens;
  if (cfg.hybrid()) {
    stem = hybrid_stem(image, *w.stem);
    if (trace) trace->patches = stem->tokens.shape();
    tokens = embed(stem->tokens, w.embedding, stem->grid);
  } else {
    const Tensor patches = patchify(image, cfg.patch);
    if (trace) trace->patches = patches.shape();
    tokens = embed(patches, w.embedding, patch_grid_for(cfg));
  }
  if (trace) trace->tokens = tokens.tokens.shape();

  std::optional<ShapeRecorder> recorder;
  if (trace) recorder.emplace(trace);
  const EncoderTaps taps = encoder_forward(tokens, w.layers, cfg, recorder ? &*recorder : nullptr);

  std::array<FeatureMap, 4> out;
  std::size_t next_tap = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const TapSource& src = cfg.taps[i];
    FeatureMap map;
    if (src.is_layer()) {
      const TokenMatrix& tap = taps.taps.at(next_tap++);
      if (trace) trace->taps.push_back(tap.tokens.shape());
      map = reassemble(readout(tap, cfg.readout, &w.readout[i]), tap.grid);
    } else {
      map = stem->stage_maps.at(static_cast<std::size_t>(src.index - 1));
    }
    if (trace) trace->reassembled.push_back(map.shape());
    out[i] = resample_stage(map, cfg.scales[i], cfg, w.resample[i]);
    if (trace) trace->resampled.push_back(out[i].shape());
  }
  return out;
}

Tensor clft_forward(const Tensor* camera, const Tensor* lidar, ModalityMode mode, const ModelWeights& w,
                    const ClftConfig& cfg, ForwardTrace* trace) {
  const bool use_camera = mode != ModalityMode::kLidarOnly;
  const bool use_lidar = mode != ModalityMode::kCameraOnly;
  if (use_camera && camera == nullptr) throw std::invalid_argument("mode " + std::string(modality_name(mode)) + " needs a camera image");
  if (use_lidar && lidar == nullptr) throw std::invalid_argument("mode " + std::string(modality_name(mode)) + " needs a LiDAR raster");

  std::optional<std::array<FeatureMap, 4>> cam, lid;
  if (use_camera) cam = branch_features(*camera, w.camera, cfg, trace ? &trace->camera : nullptr);
  if (use_lidar) lid = branch_features(*lidar, w.lidar, cfg, trace ? &trace->lidar : nullptr);

  std::optional<FeatureMap> prev;
  for (int i = 3; i >= 0; --i) {
    const auto s = static_cast<std::size_t>(i);
    FeatureMap fused = fuse_stage(cam ? &(*cam)[s] : nullptr, lid ? &(*lid)[s] : nullptr, prev ? &*prev : nullptr,
                                  w.fusion[s]);
    if (trace) trace->fused.push_back(fused.shape());
    prev = std::move(fused);
  }
  Tensor logits = segmentation_head(*prev, w.head, cfg.num_classes(), cfg.rows, cfg.cols);
  if (trace) trace->logits = logits.shape();
  return logits;
}

Mask predict_mask(const Tensor& logits) {
  if (logits.ndim() != 3 || logits.dim(0) == 0) {
    throw ShapeError("predict_mask expects classes×H×W logits, got " + shape_to_string(logits.shape()));
  }
  const std::size_t c = logits.dim(0), h = logits.dim(1), wd = logits.dim(2);
  if (c >= kVoidLabel) throw ShapeError("too many classes for an 8-bit mask: " + std::to_string(c));
  Mask mask(h, wd);
  const auto data = logits.data();
  for (std::size_t p = 0; p < h * wd; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k) {
      if (data[k * h * wd + p] > data[best * h * wd + p]) best = k;
    }
    mask.labels[p] = static_cast<std::uint8_t>(best);
  }
  return mask;
}

}  // namespace clft
