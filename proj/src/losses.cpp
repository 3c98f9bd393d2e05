#include "tsseg/losses.hpp"

#include <cmath>
#include <string>

#include "tsseg/numerics.hpp"

namespace tsseg {
namespace {

// Value plus gradient with respect to the log-probabilities.
struct RawLoss {
  double value = 0;
  Matrix grad_lp;
};

RawLoss class_raw(const Matrix& lp, std::span<const int> labels) {
  if (labels.size() != lp.rows())
    throw ShapeError("class_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(lp.rows()) + " frames");
  std::size_t count = 0;
  for (int y : labels)
    if (y != kUnlabeled) ++count;
  if (count == 0) throw AnnotationError("class_loss: no labeled frames");

  RawLoss r{0, Matrix(lp.rows(), lp.cols())};
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const int y = labels[t];
    if (y == kUnlabeled) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= lp.cols())
      throw AnnotationError("class_loss: label " + std::to_string(y) + " out of range at frame " +
                            std::to_string(t));
    r.value -= lp(t, y) * inv;
    r.grad_lp(t, y) = static_cast<Real>(-inv);
  }
  return r;
}

RawLoss smooth_raw(const Matrix& lp, double tau) {
  const std::size_t t_len = lp.rows(), c = lp.cols();
  RawLoss r{0, Matrix(t_len, c)};
  if (t_len < 2) return r;
  const double norm = 1.0 / static_cast<double>(t_len * c);
  for (std::size_t t = 1; t < t_len; ++t)
    for (std::size_t a = 0; a < c; ++a) {
      const double d = static_cast<double>(lp(t, a)) - lp(t - 1, a);
      if (std::abs(d) <= tau) {
        r.value += d * d * norm;
        const double g = 2.0 * d * norm;
        r.grad_lp(t, a) += static_cast<Real>(g);
        r.grad_lp(t - 1, a) -= static_cast<Real>(g);
      } else {
        r.value += tau * tau * norm;
      }
    }
  return r;
}

RawLoss conf_raw(const Matrix& lp, const TimestampAnnotation& ts) {
  const std::size_t t_len = lp.rows();
  RawLoss r{0, Matrix(t_len, lp.cols())};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].frame >= t_len)
      throw AnnotationError("conf_loss: timestamp frame " + std::to_string(ts[i].frame) +
                            " outside video of length " + std::to_string(t_len));
    if (ts[i].label < 0 || static_cast<std::size_t>(ts[i].label) >= lp.cols())
      throw AnnotationError("conf_loss: timestamp label " + std::to_string(ts[i].label) + " out of range");
    if (i > 0 && ts[i].frame <= ts[i - 1].frame)
      throw AnnotationError("conf_loss: timestamp frames must be strictly increasing");
  }
  if (ts.size() < 2) return r;

  const double inv = 1.0 / (2.0 * static_cast<double>(ts.back().frame - ts.front().frame));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::size_t centre = ts[i].frame;
    const std::size_t lo = i == 0 ? ts.front().frame : ts[i - 1].frame;
    const std::size_t hi = i + 1 == ts.size() ? ts.back().frame : ts[i + 1].frame;
    const auto a = static_cast<std::size_t>(ts[i].label);
    for (std::size_t t = lo + 1; t <= hi; ++t) {
      if (t == 0 || t >= t_len) continue;
      // Before the timestamp the log-probability should rise, after it fall.
      const double rise = static_cast<double>(lp(t, a)) - lp(t - 1, a);
      const double violation = t <= centre ? -rise : rise;
      if (violation <= 0) continue;
      r.value += violation * inv;
      const Real g = static_cast<Real>(t <= centre ? -inv : inv);
      r.grad_lp(t, a) += g;
      r.grad_lp(t - 1, a) -= g;
    }
  }
  return r;
}

LossResult to_logits(RawLoss raw, const Matrix& lp) {
  return {raw.value, log_softmax_backward(raw.grad_lp, lp)};
}

}  // namespace

LossResult class_loss(const Matrix& log_probs, std::span<const int> labels) {
  return to_logits(class_raw(log_probs, labels), log_probs);
}

LossResult smooth_loss(const Matrix& log_probs, double tau) {
  if (!(tau > 0)) throw ConfigError("smooth_loss: tau must be positive");
  return to_logits(smooth_raw(log_probs, tau), log_probs);
}

LossResult conf_loss(const Matrix& log_probs, const TimestampAnnotation& timestamps) {
  return to_logits(conf_raw(log_probs, timestamps), log_probs);
}

namespace {

void check_weights(const LossWeights& w) {
  if (w.alpha < 0 || w.beta < 0 || !(w.tau > 0))
    throw ConfigError("loss weights require alpha, beta >= 0 and tau > 0");
}

}  // namespace

StageLoss seg_loss(std::span<const Matrix> stage_log_probs, std::span<const int> labels,
                   const TimestampAnnotation& timestamps, const LossWeights& weights,
                   ConfScope scope) {
  check_weights(weights);
  if (stage_log_probs.empty()) throw ShapeError("seg_loss: no stages");
  StageLoss out;
  const std::size_t stages = stage_log_probs.size();
  const double inv_stages = 1.0 / static_cast<double>(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    const Matrix& lp = stage_log_probs[s];
    const bool with_conf = scope == ConfScope::every_stage || s + 1 == stages;
    RawLoss total = class_raw(lp, labels);
    if (weights.alpha != 0) {
      RawLoss s = smooth_raw(lp, weights.tau);
      total.value += weights.alpha * s.value;
      total.grad_lp += s.grad_lp * static_cast<Real>(weights.alpha);
    }
    if (weights.beta != 0 && with_conf) {
      RawLoss c = conf_raw(lp, timestamps);
      total.value += weights.beta * c.value;
      total.grad_lp += c.grad_lp * static_cast<Real>(weights.beta);
    }
    out.value += total.value * inv_stages;
    total.grad_lp *= static_cast<Real>(inv_stages);
    out.grads.push_back(log_softmax_backward(total.grad_lp, lp));
  }
  return out;
}

LossResult graph_loss(const Matrix& log_probs, std::span<const int> labels, const LossWeights& weights) {
  check_weights(weights);
  RawLoss total = class_raw(log_probs, labels);
  if (weights.alpha != 0) {
    RawLoss s = smooth_raw(log_probs, weights.tau);
    total.value += weights.alpha * s.value;
    total.grad_lp += s.grad_lp * static_cast<Real>(weights.alpha);
  }
  return to_logits(std::move(total), log_probs);
}

}  // namespace tsseg
