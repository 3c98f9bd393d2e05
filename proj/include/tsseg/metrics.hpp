#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsseg/annotation.hpp"

namespace tsseg {

/// A maximal run of one label; frames are 0-based, `end` inclusive.
struct Segment {
  int label = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

using SegmentList = std::vector<Segment>;

SegmentList segments_from_labels(std::span<const int> labels);
Labels labels_from_segments(const SegmentList& segments);

/// Percentage of frames where pred == gt.
double accuracy(std::span<const int> pred, std::span<const int> gt);

/// 100 * (1 - levenshtein(segment classes) / max(#pred, #gt)), floored at 0.
/// Segments of `ignore_label` (if set) are dropped first.
double edit_score(std::span<const int> pred, std::span<const int> gt,
                  std::optional<int> ignore_label = std::nullopt);

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  F1Counts& operator+=(const F1Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  /// 200 TP / (2 TP + FP + FN), 0 when the denominator is 0.
  double f1() const;
};

/// Greedy segment matching: each predicted segment in order takes the
/// unmatched same-class ground-truth segment of highest IoU (lowest index on
/// ties) when that IoU >= threshold.
F1Counts f1_counts(std::span<const int> pred, std::span<const int> gt, double threshold,
                   std::optional<int> ignore_label = std::nullopt);

double f1_at(std::span<const int> pred, std::span<const int> gt, double threshold,
             std::optional<int> ignore_label = std::nullopt);

inline constexpr std::array<double, 3> kF1Thresholds = {0.10, 0.25, 0.50};

struct MetricReport {
  double acc = 0;
  double edit = 0;
  std::array<double, 3> f1 = {0, 0, 0};  // at kF1Thresholds
  std::size_t videos = 0;
};

/// Dataset-level aggregation: Acc and Edit are averaged over videos; F1
/// pools TP/FP/FN across videos.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::optional<int> ignore_label = std::nullopt) : ignore_(ignore_label) {}
  void add(std::span<const int> pred, std::span<const int> gt);
  MetricReport report() const;

 private:
  std::optional<int> ignore_;
  double acc_sum_ = 0;
  double edit_sum_ = 0;
  std::array<F1Counts, 3> counts_{};
  std::size_t videos_ = 0;
};

/// Plain-text table.
void write_report_table(std::ostream& out, const std::string& split, const MetricReport& r);

/// One `metric,value` line per metric, prefixed with the split name.
void write_report_csv(std::ostream& out, const std::string& split, const MetricReport& r);

}  // namespace tsseg
