#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "clft/config.hpp"
#include "clft/encoder.hpp"
#include "clft/gradcheck.hpp"
#include "clft/io.hpp"
#include "clft/lidar_projection.hpp"
#include "clft/metrics.hpp"
#include "clft/model.hpp"
#include "clft/ops.hpp"

namespace py = pybind11;
using namespace clft;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor& t) {
  FloatArray a(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

Mask to_mask(const LabelArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("mask must be 2-D");
  Mask m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.labels.begin());
  return m;
}

LabelArray from_mask(const Mask& m) {
  LabelArray a({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
  std::copy(m.labels.begin(), m.labels.end(), a.mutable_data());
  return a;
}

ModalityMode mode_of(const std::string& name) {
  const auto m = parse_modality(name);
  if (!m) throw std::invalid_argument("unknown mode '" + name + "' (camera, lidar, fusion)");
  return *m;
}

}  // namespace

PYBIND11_MODULE(_clft, m) {
  m.doc() = "camera-LiDAR fusion transformer";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_ValueError);

  m.def("matmul", [](const FloatArray& a, const FloatArray& b) { return to_array(matmul(to_tensor(a), to_tensor(b))); });
  m.def("softmax", [](const FloatArray& x, int axis) { return to_array(softmax(to_tensor(x), axis)); },
        py::arg("x"), py::arg("axis") = -1);
  m.def("gelu", [](const FloatArray& x) { return to_array(gelu(to_tensor(x))); });
  m.def("layer_norm",
        [](const FloatArray& x, const FloatArray& g, const FloatArray& b, float eps) {
          return to_array(layer_norm(to_tensor(x), to_tensor(g), to_tensor(b), eps));
        },
        py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("eps") = 1e-6f);
  m.def("attention",
        [](const FloatArray& q, const FloatArray& k, const FloatArray& v) {
          return to_array(scaled_dot_product_attention(to_tensor(q), to_tensor(k), to_tensor(v)));
        },
        "softmax(q k^T / sqrt(d_k)) v");

  m.def("grad_check",
        [](const std::string& op, std::uint64_t seed, double tol) {
          const auto g = parse_grad_op(op);
          if (!g) throw std::invalid_argument("unknown op '" + op + "'");
          const GradReport r = grad_check(*g, seed, tol);
          return py::make_tuple(r.pass, r.max_rel_error);
        },
        py::arg("op"), py::arg("seed") = 0, py::arg("tolerance") = 1e-4,
        "(pass, max relative error) of the analytic gradient against finite differences");

  m.def("project",
        [](const FloatArray& points, double fx, double fy, double cx, double cy, std::array<double, 16> extrinsic,
           int height, int width) {
          if (points.ndim() != 2 || points.shape(1) != 3) throw std::invalid_argument("points must be N×3");
          PointCloud cloud;
          for (py::ssize_t i = 0; i < points.shape(0); ++i)
            cloud.points.push_back({points.at(i, 0), points.at(i, 1), points.at(i, 2)});
          CameraCalib c{fx, fy, cx, cy, extrinsic};
          return to_array(project(cloud, c, height, width));
        },
        py::arg("points"), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"),
        py::arg("extrinsic") = std::array<double, 16>{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1},
        py::arg("height"), py::arg("width"));

  m.def("confusion",
        [](const LabelArray& pred, const LabelArray& gt, std::size_t classes) {
          ConfusionCounts c(classes);
          accumulate(to_mask(pred), to_mask(gt), c);
          py::list out;
          for (const ClassCounts& k : c.classes) out.append(py::make_tuple(k.tp, k.fp, k.fn));
          return out;
        },
        "per-class (tp, fp, fn); 255 marks void ground truth");
  m.def("metrics",
        [](const LabelArray& pred, const LabelArray& gt, std::size_t classes) {
          ConfusionCounts c(classes);
          accumulate(to_mask(pred), to_mask(gt), c);
          py::list out;
          for (const ClassMetrics& r : report(c).classes) out.append(py::make_tuple(r.iou, r.precision, r.recall));
          return out;
        },
        "per-class (iou, precision, recall); None where undefined");

  m.def("save_checkpoint", [](const std::filesystem::path& path, const std::vector<std::pair<std::string, FloatArray>>& entries) {
    std::vector<NamedTensor> named;
    for (const auto& [name, a] : entries) named.push_back({name, to_tensor(a)});
    save_checkpoint(path, named);
  });
  m.def("load_checkpoint", [](const std::filesystem::path& path) {
    std::vector<std::pair<std::string, FloatArray>> out;
    for (const NamedTensor& e : load_checkpoint(path)) out.emplace_back(e.name, to_array(e.tensor));
    return out;
  });

  py::class_<ClftConfig>(m, "Config")
      .def(py::init([](const std::string& variant) {
             const auto v = parse_variant(variant);
             if (!v) throw std::invalid_argument("unknown variant '" + variant + "'");
             return make_config(*v);
           }),
           py::arg("variant") = "base")
      .def_readwrite("layers", &ClftConfig::layers)
      .def_readwrite("dim", &ClftConfig::dim)
      .def_readwrite("heads", &ClftConfig::heads)
      .def_readwrite("head_dim", &ClftConfig::head_dim)
      .def_readwrite("mlp_dim", &ClftConfig::mlp_dim)
      .def_readwrite("fusion_dim", &ClftConfig::fusion_dim)
      .def_readwrite("rows", &ClftConfig::rows)
      .def_readwrite("cols", &ClftConfig::cols)
      .def_readwrite("classes", &ClftConfig::classes)
      .def_property_readonly("variant", [](const ClftConfig& c) { return std::string(variant_name(c.variant)); })
      .def_property(
          "tap_layers", [](const ClftConfig& c) { return c.tap_layers(); },
          [](ClftConfig& c, const std::vector<int>& layers) {
            // Replaces the layer-fed taps in order, leaving stem taps alone.
            std::size_t k = 0;
            for (TapSource& t : c.taps) {
              if (!t.is_layer()) continue;
              if (k >= layers.size()) throw std::invalid_argument("too few tap layers");
              t = TapSource::layer(layers[k++]);
            }
            if (k != layers.size()) throw std::invalid_argument("too many tap layers");
          })
      .def("validate", [](const ClftConfig& c) { validate(c); });

  py::class_<ModelWeights>(m, "Model")
      .def_static("init", &init_model, py::arg("config"), py::arg("seed") = 0)
      .def_static("load", &load_model, py::arg("path"), py::arg("config"))
      .def("save", [](const ModelWeights& w, const std::filesystem::path& p) { save_model(p, w); })
      .def_property_readonly("parameter_count", &parameter_count)
      .def(
          "forward",
          [](const ModelWeights& w, const ClftConfig& cfg, std::optional<FloatArray> camera,
             std::optional<FloatArray> lidar, const std::string& mode) {
            std::optional<Tensor> cam, lid;
            if (camera) cam = to_tensor(*camera);
            if (lidar) lid = to_tensor(*lidar);
            Tensor logits;
            {
              py::gil_scoped_release release;
              logits = clft_forward(cam ? &*cam : nullptr, lid ? &*lid : nullptr, mode_of(mode), w, cfg);
            }
            return to_array(logits);
          },
          py::arg("config"), py::arg("camera") = py::none(), py::arg("lidar") = py::none(),
          py::arg("mode") = "fusion", "classes×rows×cols logits");

  m.def("predict_mask", [](const FloatArray& logits) { return from_mask(predict_mask(to_tensor(logits))); });
}
