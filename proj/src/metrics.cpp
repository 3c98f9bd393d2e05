#include "tsseg/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>

#include "tsseg/errors.hpp"

namespace tsseg {
namespace {

void check_lengths(std::span<const int> pred, std::span<const int> gt, const char* op) {
  if (pred.size() != gt.size())
    throw ShapeError(std::string(op) + ": prediction has " + std::to_string(pred.size()) +
                     " frames, ground truth " + std::to_string(gt.size()));
}

SegmentList filtered(std::span<const int> labels, std::optional<int> ignore) {
  SegmentList segs = segments_from_labels(labels);
  if (ignore) std::erase_if(segs, [&](const Segment& s) { return s.label == *ignore; });
  return segs;
}

std::size_t levenshtein(const SegmentList& a, const SegmentList& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1].label == b[j - 1].label ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

SegmentList segments_from_labels(std::span<const int> labels) {
  SegmentList out;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (out.empty() || out.back().label != labels[t])
      out.push_back({labels[t], t, t});
    else
      out.back().end = t;
  }
  return out;
}

Labels labels_from_segments(const SegmentList& segments) {
  Labels out;
  for (const auto& s : segments) out.insert(out.end(), s.length(), s.label);
  return out;
}

double accuracy(std::span<const int> pred, std::span<const int> gt) {
  check_lengths(pred, gt, "accuracy");
  if (gt.empty()) return 0;
  std::size_t hit = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) hit += pred[t] == gt[t];
  return 100.0 * static_cast<double>(hit) / static_cast<double>(gt.size());
}

double edit_score(std::span<const int> pred, std::span<const int> gt, std::optional<int> ignore_label) {
  check_lengths(pred, gt, "edit_score");
  const SegmentList p = filtered(pred, ignore_label), g = filtered(gt, ignore_label);
  const std::size_t longest = std::max(p.size(), g.size());
  if (longest == 0) return 100.0;
  const double d = static_cast<double>(levenshtein(p, g));
  return std::max(0.0, 100.0 * (1.0 - d / static_cast<double>(longest)));
}

double F1Counts::f1() const {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 200.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

F1Counts f1_counts(std::span<const int> pred, std::span<const int> gt, double threshold,
                   std::optional<int> ignore_label) {
  check_lengths(pred, gt, "f1_at");
  const SegmentList p = filtered(pred, ignore_label), g = filtered(gt, ignore_label);
  std::vector<bool> matched(g.size(), false);
  F1Counts c;
  for (const Segment& ps : p) {
    double best = -1;
    std::size_t best_idx = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (matched[j] || g[j].label != ps.label) continue;
      const std::size_t inter_lo = std::max(ps.start, g[j].start), inter_hi = std::min(ps.end, g[j].end);
      const std::size_t inter = inter_hi >= inter_lo ? inter_hi - inter_lo + 1 : 0;
      const std::size_t uni = ps.length() + g[j].length() - inter;
      const double iou = static_cast<double>(inter) / static_cast<double>(uni);
      if (iou > best) {
        best = iou;
        best_idx = j;
      }
    }
    if (best >= threshold) {
      ++c.tp;
      matched[best_idx] = true;
    } else {
      ++c.fp;
    }
  }
  c.fn = static_cast<std::size_t>(std::count(matched.begin(), matched.end(), false));
  return c;
}

double f1_at(std::span<const int> pred, std::span<const int> gt, double threshold,
             std::optional<int> ignore_label) {
  return f1_counts(pred, gt, threshold, ignore_label).f1();
}

void MetricAccumulator::add(std::span<const int> pred, std::span<const int> gt) {
  acc_sum_ += accuracy(pred, gt);
  edit_sum_ += edit_score(pred, gt, ignore_);
  for (std::size_t k = 0; k < kF1Thresholds.size(); ++k)
    counts_[k] += f1_counts(pred, gt, kF1Thresholds[k], ignore_);
  ++videos_;
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.videos = videos_;
  if (videos_ == 0) return r;
  r.acc = acc_sum_ / static_cast<double>(videos_);
  r.edit = edit_sum_ / static_cast<double>(videos_);
  for (std::size_t k = 0; k < counts_.size(); ++k) r.f1[k] = counts_[k].f1();
  return r;
}

void write_report_table(std::ostream& out, const std::string& split, const MetricReport& r) {
  const auto flags = out.flags();
  out << "split: " << split << " (" << r.videos << " videos)\n"
      << "  F1@10    F1@25    F1@50    Edit     Acc\n"
      << std::fixed << std::setprecision(2);
  for (double v : {r.f1[0], r.f1[1], r.f1[2], r.edit, r.acc}) out << "  " << std::setw(7) << v;
  out << "\n";
  out.flags(flags);
}

void write_report_csv(std::ostream& out, const std::string& split, const MetricReport& r) {
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(4);
  out << split << ".f1@10," << r.f1[0] << "\n"
      << split << ".f1@25," << r.f1[1] << "\n"
      << split << ".f1@50," << r.f1[2] << "\n"
      << split << ".edit," << r.edit << "\n"
      << split << ".acc," << r.acc << "\n";
  out.flags(flags);
}

}  // namespace tsseg
