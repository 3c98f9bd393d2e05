#pragma once

#include <span>
#include <vector>

#include "tsseg/annotation.hpp"
#include "tsseg/matrix.hpp"

namespace tsseg {

struct LossWeights {
  double alpha = 0.15;  // smoothing
  double beta = 0.075;  // confidence
  double tau = 4.0;     // smoothing truncation
};

/// A loss value with its gradient with respect to the logits that produced
/// the log-probabilities.
struct LossResult {
  double value = 0;
  Matrix grad;
};

/// Mean negative log-probability of the target class over labeled frames
/// (entries equal to kUnlabeled are skipped). Throws AnnotationError when no
/// frame is labeled.
LossResult class_loss(const Matrix& log_probs, std::span<const int> labels);

/// Truncated squared difference of adjacent-frame log-probabilities, summed
/// and divided by T*C. Differences beyond tau are clamped and carry no
/// gradient.
LossResult smooth_loss(const Matrix& log_probs, double tau);

/// Hinge penalty on the timestamp class's log-probability: it must not
/// decrease approaching a timestamp from the previous one and must not
/// increase leaving it toward the next one. Normalized by 2 (t_N - t_1);
/// defined as 0 for a single timestamp.
LossResult conf_loss(const Matrix& log_probs, const TimestampAnnotation& timestamps);

struct StageLoss {
  double value = 0;
  std::vector<Matrix> grads;  // one per stage, w.r.t. that stage's logits
};

/// Which stages carry the confidence term.
enum class ConfScope { every_stage, final_stage };

/// class + alpha * smooth + beta * conf per stage, averaged over stages.
/// With ConfScope::final_stage the other stages drop the beta term.
StageLoss seg_loss(std::span<const Matrix> stage_log_probs, std::span<const int> labels,
                   const TimestampAnnotation& timestamps, const LossWeights& weights,
                   ConfScope scope = ConfScope::every_stage);

/// class + alpha * smooth.
LossResult graph_loss(const Matrix& log_probs, std::span<const int> labels, const LossWeights& weights);

}  // namespace tsseg
