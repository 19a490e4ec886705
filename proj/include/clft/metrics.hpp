#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace clft {

/// Label of pixels that fall outside the class list; skipped by evaluation.
inline constexpr std::uint8_t kVoidLabel = 255;

struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;  // row-major

  Mask() = default;
  Mask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), labels(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  friend bool operator==(const Mask&, const Mask&) = default;
};

struct ClassCounts {
  std::uint64_t tp = 0;  // predicted L, labelled L
  std::uint64_t fp = 0;  // predicted L, labelled other
  std::uint64_t fn = 0;  // predicted other, labelled L
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Per-class pixel tallies. Merging is associative and commutative.
struct ConfusionCounts {
  std::vector<ClassCounts> classes;

  ConfusionCounts() = default;
  explicit ConfusionCounts(std::size_t num_classes) : classes(num_classes) {}
  std::size_t size() const { return classes.size(); }
  void merge(const ConfusionCounts& other);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Adds one frame to `counts`. Pixels whose ground truth is kVoidLabel are
/// skipped whatever the prediction holds there. Every other label, in both
/// masks, must be below counts.size().
void accumulate(const Mask& pred, const Mask& gt, ConfusionCounts& counts);

/// Undefined ratios (zero denominator) are empty, never 0 or NaN.
struct ClassMetrics {
  std::optional<double> iou;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct ClassReport {
  std::vector<ClassMetrics> classes;
};

/// iou = tp/(tp+fp+fn), precision = tp/(tp+fp), recall = tp/(tp+fn).
ClassReport report(const ConfusionCounts& counts);

struct FrameResult {
  std::string name;
  ConfusionCounts counts;
};

struct DirectoryEvaluation {
  std::vector<FrameResult> frames;  // sorted by file name
  ConfusionCounts total;            // pooled over every frame
  ClassReport report;               // from the pooled counts
};

/// Pairs every *.pgm mask in `pred_dir` with the same file name in `gt_dir`
/// and pools the counts (micro-average). Throws EvaluationError for unpaired
/// files; read errors propagate from the mask reader.
DirectoryEvaluation evaluate_directory(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                       std::size_t num_classes);

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReportFormat { kTable, kTsv };

/// One row per selected class: IoU, precision and recall as percentages
/// with two decimals. Undefined cells render as "—" (table) or "NA" (tsv).
std::string format_report(const ClassReport& report, std::span<const std::string> names,
                          std::span<const std::size_t> rows, ReportFormat format);

}  // namespace clft
