#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "clft/config.hpp"
#include "clft/fixtures.hpp"
#include "clft/gradcheck.hpp"
#include "clft/io.hpp"
#include "clft/lidar_projection.hpp"
#include "clft/metrics.hpp"
#include "clft/model.hpp"
#include "clft/ops.hpp"

namespace clft::cli {

namespace {

// Bad flag combinations that CLI11 cannot express on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int kGradSeeds = 10;

struct Options {
  std::string config = "base";
  std::string mode = "fusion";
  std::string checkpoint;
  std::string camera;
  std::string lidar;
  std::string calib;
  std::string out;
  std::string logits;
  std::string pred_dir;
  std::string gt_dir;
  std::vector<std::string> classes;
  std::uint64_t seed = 0;
  int frames = 8;
  double tolerance = 1e-4;
  std::string format = "table";
};

ClftConfig config_for(const std::string& name) {
  return make_config(*parse_variant(name));
}

int cmd_init(const Options& o, std::ostream& out) {
  const ClftConfig cfg = config_for(o.config);
  write_initialized_model(o.out, cfg, o.seed);
  out << "wrote " << o.config << " checkpoint (" << cfg.layers << " layers, dim " << cfg.dim << ", seed " << o.seed
      << ") to " << o.out << "\n";
  return kOk;
}

int cmd_project(const Options& o, std::ostream& out) {
  const CalibrationFile calib = read_calibration(o.calib);
  const PointCloud cloud = read_pointcloud(o.lidar);
  const Tensor raster = project(cloud, calib.calib, calib.height, calib.width);
  save_raster(o.out, raster);
  std::size_t hits = 0;
  const auto z = raster.data().subspan(2 * raster.dim(1) * raster.dim(2));
  for (float v : z) hits += v != 0.0f;
  out << "projected " << cloud.points.size() << " points onto " << hits << " pixels of a " << calib.height << "x"
      << calib.width << " raster\n";
  return kOk;
}

Tensor fit_to(const Tensor& t, const ClftConfig& cfg) {
  const auto r = static_cast<std::size_t>(cfg.rows), c = static_cast<std::size_t>(cfg.cols);
  if (t.dim(1) == r && t.dim(2) == c) return t;
  return resize_bilinear(t, r, c);
}

int cmd_infer(const Options& o, std::ostream& out) {
  const ModalityMode mode = *parse_modality(o.mode);
  const bool need_camera = mode != ModalityMode::kLidarOnly;
  const bool need_lidar = mode != ModalityMode::kCameraOnly;
  if (need_camera && o.camera.empty()) throw UsageError("--mode " + o.mode + " needs --camera");
  if (need_lidar && o.lidar.empty()) throw UsageError("--mode " + o.mode + " needs --lidar");

  const ClftConfig cfg = config_for(o.config);
  std::optional<Tensor> camera, lidar;
  if (need_camera) camera = read_image_ppm(o.camera);
  if (need_lidar) {
    lidar = load_raster(o.lidar);
    if (lidar->dim(0) != 3) throw ShapeError("LiDAR raster must have 3 channels, got " + shape_to_string(lidar->shape()));
  }
  if (camera && lidar && (camera->dim(1) != lidar->dim(1) || camera->dim(2) != lidar->dim(2))) {
    throw ShapeError("camera " + shape_to_string(camera->shape()) + " and LiDAR " + shape_to_string(lidar->shape()) +
                     " sizes differ");
  }
  const Tensor& ref = camera ? *camera : *lidar;
  const std::size_t rows = ref.dim(1), cols = ref.dim(2);

  const ModelWeights weights = load_model(o.checkpoint, cfg);
  std::optional<Tensor> cam_in, lid_in;
  if (camera) cam_in = fit_to(*camera, cfg);
  if (lidar) lid_in = fit_to(*lidar, cfg);
  Tensor logits = clft_forward(cam_in ? &*cam_in : nullptr, lid_in ? &*lid_in : nullptr, mode, weights, cfg);
  if (logits.dim(1) != rows || logits.dim(2) != cols) logits = resize_bilinear(logits, rows, cols);

  const Mask mask = predict_mask(logits);
  write_mask_pgm(o.out, mask);
  if (!o.logits.empty()) {
    const NamedTensor entry{"logits", std::move(logits)};
    save_checkpoint(o.logits, std::span<const NamedTensor>(&entry, 1));
  }
  out << "wrote " << mask.height << "x" << mask.width << " mask (" << o.config << ", " << o.mode << ") to " << o.out
      << "\n";
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto& names = default_classes();
  std::vector<std::size_t> rows;
  if (o.classes.empty()) {
    for (std::size_t i = 0; i < names.size(); ++i) rows.push_back(i);
  } else {
    for (const std::string& c : o.classes) {
      const auto it = std::find(names.begin(), names.end(), c);
      if (it == names.end()) throw UsageError("unknown class '" + c + "'");
      rows.push_back(static_cast<std::size_t>(it - names.begin()));
    }
  }
  const DirectoryEvaluation ev = evaluate_directory(o.pred_dir, o.gt_dir, names.size());
  out << format_report(ev.report, names, rows, o.format == "tsv" ? ReportFormat::kTsv : ReportFormat::kTable);
  return kOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  if (!(o.tolerance >= 0.0)) throw UsageError("--tolerance must be non-negative");
  const bool tsv = o.format == "tsv";
  bool all_pass = true;
  if (tsv) out << "op\tmax_rel_error\tmax_abs_error\tresult\n";
  for (GradOp op : kAllGradOps) {
    double worst_rel = 0.0, worst_abs = 0.0;
    bool pass = true;
    for (int s = 0; s < kGradSeeds; ++s) {
      const GradReport r = grad_check(op, o.seed + static_cast<std::uint64_t>(s), o.tolerance);
      worst_rel = std::max(worst_rel, r.max_rel_error);
      worst_abs = std::max(worst_abs, r.max_abs_error);
      pass = pass && r.pass;
    }
    all_pass = all_pass && pass;
    char line[160];
    if (tsv) {
      std::snprintf(line, sizeof line, "%s\t%.3e\t%.3e\t%s\n", std::string(grad_op_name(op)).c_str(), worst_rel,
                    worst_abs, pass ? "pass" : "FAIL");
    } else {
      std::snprintf(line, sizeof line, "%-12s max rel %.3e  max abs %.3e  %s\n", std::string(grad_op_name(op)).c_str(),
                    worst_rel, worst_abs, pass ? "pass" : "FAIL");
    }
    out << line;
  }
  if (!tsv) {
    out << (all_pass ? "all" : "not all") << " gradient checks within tolerance " << o.tolerance << " over "
        << kGradSeeds << " seeds\n";
  }
  return all_pass ? kOk : kCheckFailed;
}

int cmd_make_fixtures(const Options& o, std::ostream& out) {
  FixtureOptions fo;
  fo.frames = o.frames;
  fo.seed = o.seed;
  const auto stems = write_fixtures(o.out, fo);
  out << "wrote " << stems.size() << " fixture frames to " << o.out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Camera-LiDAR fusion transformer: init, project, infer, eval, gradcheck, make-fixtures", "clft"};
  app.require_subcommand(1, 1);
  const std::vector<std::string> variants = {"base", "large", "huge", "hybrid"};

  auto* init = app.add_subcommand("init", "Write a seeded, randomly initialized checkpoint");
  init->add_option("--config", o.config, "Model variant")->check(CLI::IsMember(variants));
  init->add_option("--seed", o.seed, "Initialization seed");
  init->add_option("--out", o.out, "Checkpoint path")->required();

  auto* proj = app.add_subcommand("project", "Rasterize a point cloud into the camera image plane");
  proj->add_option("--lidar", o.lidar, "Point cloud (.clpc)")->required();
  proj->add_option("--calib", o.calib, "Calibration JSON")->required();
  proj->add_option("--out", o.out, "Raster tensor file")->required();

  auto* infer = app.add_subcommand("infer", "Predict a segmentation mask");
  infer->add_option("--checkpoint", o.checkpoint, "Checkpoint path")->required();
  infer->add_option("--config", o.config, "Model variant")->check(CLI::IsMember(variants));
  infer->add_option("--mode", o.mode, "Modalities to use")->check(CLI::IsMember({"camera", "lidar", "fusion"}));
  infer->add_option("--camera", o.camera, "Camera image (.ppm)");
  infer->add_option("--lidar", o.lidar, "Projected LiDAR raster");
  infer->add_option("--out", o.out, "Output mask (.pgm)")->required();
  infer->add_option("--logits", o.logits, "Also write the logits tensor here");

  auto* eval = app.add_subcommand("eval", "Score predicted masks against ground truth");
  eval->add_option("--pred-dir", o.pred_dir, "Directory of predicted .pgm masks")->required();
  eval->add_option("--gt-dir", o.gt_dir, "Directory of ground-truth .pgm masks")->required();
  eval->add_option("--classes", o.classes, "Comma-separated classes to report")->delimiter(',');
  eval->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"table", "tsv"}));

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  grad->add_option("--tolerance", o.tolerance, "Largest accepted relative error");
  grad->add_option("--seed", o.seed, "First of the ten seeds");
  grad->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"table", "tsv"}));

  auto* fix = app.add_subcommand("make-fixtures", "Generate a synthetic scene set");
  fix->add_option("--out", o.out, "Output directory")->required();
  fix->add_option("--seed", o.seed, "Scene seed");
  fix->add_option("--frames", o.frames, "Number of frames")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (init->parsed()) return cmd_init(o, out);
    if (proj->parsed()) return cmd_project(o, out);
    if (infer->parsed()) return cmd_infer(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (grad->parsed()) return cmd_gradcheck(o, out);
    if (fix->parsed()) return cmd_make_fixtures(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace clft::cli
