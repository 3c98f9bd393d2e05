#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tsseg/annotation.hpp"
#include "tsseg/graph.hpp"
#include "tsseg/losses.hpp"
#include "tsseg/matrix.hpp"
#include "tsseg/numerics.hpp"
#include "tsseg/rng.hpp"

namespace tsseg {

/// `mlp` runs the same two layers with the adjacency replaced by the identity.
enum class GcnVariant : std::uint8_t { gcn = 0, mlp = 1 };

/// Two-layer label-generation network: probs = softmax(A relu(A X W1) W2).
struct GcnParams {
  Matrix w1;  // d_in x d_hidden
  Matrix w2;  // d_hidden x num_classes
  GcnVariant variant = GcnVariant::gcn;
  AdamState adam1;
  AdamState adam2;

  std::size_t d_in() const noexcept { return w1.rows(); }
  std::size_t d_hidden() const noexcept { return w1.cols(); }
  std::size_t num_classes() const noexcept { return w2.cols(); }
};

struct GcnForwardTrace {
  Matrix h1_pre;
  Matrix h1;
  Matrix logits;
  Matrix log_probs;
  Matrix probs;
};

struct GcnGradients {
  Matrix w1;
  Matrix w2;
  double loss = 0;
};

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)); moments zeroed.
GcnParams gcn_init(std::size_t d_in, std::size_t d_hidden, std::size_t num_classes, GcnVariant variant,
                   std::uint64_t seed);

/// Sets learning rate / decay on both optimizer states.
void gcn_configure_optimizer(GcnParams& params, const AdamConfig& cfg);

GcnForwardTrace gcn_forward(const GcnParams& params, const TemporalGraph& graph, const Matrix& features);

/// Gradients of class + alpha * smooth on `labels` (kUnlabeled frames are
/// skipped by the classification term). beta in `weights` is ignored.
GcnGradients gcn_backward(const GcnParams& params, const TemporalGraph& graph, const Matrix& features,
                          const GcnForwardTrace& trace, std::span<const int> labels,
                          const LossWeights& weights);

struct GcnExample {
  const TemporalGraph* graph = nullptr;
  const Matrix* features = nullptr;
  const TimestampAnnotation* timestamps = nullptr;
};

/// One pass over `batch` in minibatches of `batch_size`: per-video gradients
/// on the sparse timestamp labels are averaged, then one ADAM step is taken
/// per minibatch. When `shuffle` is set the video order is permuted first.
/// Returns the mean loss over videos.
double train_gcn_epoch(GcnParams& params, std::span<const GcnExample> batch, const LossWeights& weights,
                       std::size_t batch_size = 8, Rng* shuffle = nullptr);

/// Framewise argmax of the network, with annotated frames forced to their
/// timestamp label.
Labels generate_labels(const GcnParams& params, const TemporalGraph& graph, const Matrix& features,
                       const TimestampAnnotation& timestamps);

/// Overrides argmax labels with the annotations; exposed for tests.
Labels labels_from_probs(const Matrix& probs, const TimestampAnnotation& timestamps);

void save_gcn(const GcnParams& params, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_gcn(const GcnParams& params);
GcnParams decode_gcn(std::vector<std::uint8_t> bytes);
GcnParams load_gcn(const std::filesystem::path& path);

}  // namespace tsseg
