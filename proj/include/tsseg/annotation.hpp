#pragma once

#include <cstddef>
#include <vector>

namespace tsseg {

/// Marks a frame without a training target in a label sequence.
inline constexpr int kUnlabeled = -1;

/// One labeled frame. Frames are 0-based in memory and 1-based on disk.
struct Timestamp {
  std::size_t frame = 0;
  int label = 0;
  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

/// Sparse labels, one per ground-truth segment, in strictly increasing frame
/// order.
using TimestampAnnotation = std::vector<Timestamp>;

using Labels = std::vector<int>;

/// Length-T label sequence with only the annotated frames set.
inline Labels sparse_labels(const TimestampAnnotation& ts, std::size_t num_frames) {
  Labels out(num_frames, kUnlabeled);
  for (const auto& t : ts)
    if (t.frame < num_frames) out[t.frame] = t.label;
  return out;
}

}  // namespace tsseg
