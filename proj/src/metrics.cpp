#include "clft/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "clft/io.hpp"

namespace clft {

void ConfusionCounts::merge(const ConfusionCounts& other) {
  if (other.size() != size()) throw std::invalid_argument("cannot merge counts over different class lists");
  for (std::size_t i = 0; i < size(); ++i) {
    classes[i].tp += other.classes[i].tp;
    classes[i].fp += other.classes[i].fp;
    classes[i].fn += other.classes[i].fn;
  }
}

void accumulate(const Mask& pred, const Mask& gt, ConfusionCounts& counts) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw std::invalid_argument("prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                                " and ground truth " + std::to_string(gt.height) + "x" + std::to_string(gt.width) +
                                " differ in size");
  }
  const std::size_t num_classes = counts.size();
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const std::uint8_t g = gt.labels[i];
    if (g == kVoidLabel) continue;
    const std::uint8_t p = pred.labels[i];
    if (g >= num_classes || p >= num_classes) {
      throw std::out_of_range("label " + std::to_string(std::max(g, p)) + " outside the " +
                              std::to_string(num_classes) + "-class list");
    }
    if (p == g) {
      ++counts.classes[g].tp;
    } else {
      ++counts.classes[p].fp;
      ++counts.classes[g].fn;
    }
  }
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassReport report(const ConfusionCounts& counts) {
  ClassReport r;
  r.classes.reserve(counts.size());
  for (const ClassCounts& c : counts.classes) {
    r.classes.push_back({ratio(c.tp, c.tp + c.fp + c.fn), ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn)});
  }
  return r;
}

namespace {

std::map<std::string, std::filesystem::path> list_masks(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw EvaluationError("not a directory: " + dir.string());
  std::map<std::string, std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      files.emplace(entry.path().filename().string(), entry.path());
    }
  }
  return files;
}

}  // namespace

DirectoryEvaluation evaluate_directory(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                       std::size_t num_classes) {
  const auto preds = list_masks(pred_dir);
  const auto gts = list_masks(gt_dir);
  for (const auto& [name, path] : preds) {
    if (!gts.contains(name)) throw EvaluationError("prediction " + name + " has no ground truth");
  }
  for (const auto& [name, path] : gts) {
    if (!preds.contains(name)) throw EvaluationError("ground truth " + name + " has no prediction");
  }
  if (gts.empty()) throw EvaluationError("no masks found in " + gt_dir.string());

  DirectoryEvaluation eval;
  eval.total = ConfusionCounts(num_classes);
  for (const auto& [name, gt_path] : gts) {
    FrameResult frame{name, ConfusionCounts(num_classes)};
    const Mask pred = read_mask_pgm(preds.at(name));
    const Mask gt = read_mask_pgm(gt_path);
    try {
      accumulate(pred, gt, frame.counts);
    } catch (const std::exception& e) {
      throw EvaluationError(name + ": " + e.what());
    }
    eval.total.merge(frame.counts);
    eval.frames.push_back(std::move(frame));
  }
  eval.report = report(eval.total);
  return eval;
}

namespace {

std::string cell(const std::optional<double>& v, ReportFormat format) {
  if (!v) return format == ReportFormat::kTable ? "—" : "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

// Pads by displayed characters; "—" is one column but three bytes.
std::string pad(const std::string& s, std::size_t width) {
  std::size_t shown = 0;
  for (unsigned char ch : s) shown += (ch & 0xC0) != 0x80;
  return s + std::string(width > shown ? width - shown : 0, ' ');
}

}  // namespace

std::string format_report(const ClassReport& report, std::span<const std::string> names,
                          std::span<const std::size_t> rows, ReportFormat format) {
  std::ostringstream os;
  if (format == ReportFormat::kTsv) {
    os << "class\tiou\tprecision\trecall\n";
    for (std::size_t r : rows) {
      const ClassMetrics& m = report.classes.at(r);
      os << names[r] << '\t' << cell(m.iou, format) << '\t' << cell(m.precision, format) << '\t'
         << cell(m.recall, format) << '\n';
    }
    return os.str();
  }
  std::size_t name_w = 5;
  for (std::size_t r : rows) name_w = std::max(name_w, names[r].size());
  name_w += 2;
  constexpr std::size_t kCol = 11;
  os << pad("Class", name_w) << pad("IoU", kCol) << pad("Precision", kCol) << "Recall\n";
  os << std::string(name_w + 2 * kCol + 6, '-') << '\n';
  for (std::size_t r : rows) {
    const ClassMetrics& m = report.classes.at(r);
    os << pad(names[r], name_w) << pad(cell(m.iou, format), kCol) << pad(cell(m.precision, format), kCol)
       << cell(m.recall, format) << '\n';
  }
  return os.str();
}

}  // namespace clft
