#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tsseg/annotation.hpp"
#include "tsseg/losses.hpp"
#include "tsseg/matrix.hpp"
#include "tsseg/numerics.hpp"
#include "tsseg/rng.hpp"

namespace tsseg {

/// Multi-stage dilated temporal convolutional network. Stage 1 reads the
/// input features, every later stage reads the softmax of the previous
/// stage's logits.
struct TcnConfig {
  std::size_t num_stages = 2;
  std::size_t layers_per_stage = 6;
  std::size_t num_feature_maps = 64;
  std::size_t input_dim = 64;
  std::size_t num_classes = 0;

  friend bool operator==(const TcnConfig&, const TcnConfig&) = default;
};

/// Throws ConfigError unless every field is >= 1.
void validate(const TcnConfig& config);

/// Closed-form number of scalar weights. With F maps, C classes, L layers
/// and stage input width d_s (input_dim for stage 1, C afterwards):
///   sum_s [ d_s*F + F  +  L*(3F^2 + F + F^2 + F)  +  F*C + C ].
std::size_t tcn_param_count(const TcnConfig& config);

struct Param {
  Matrix value;
  AdamState adam;
};

/// Kernel-3 dilated conv (weights 3F x F, tap k in rows [kF, (k+1)F) reading
/// frame t + (k - 1) * dilation) followed by ReLU and a 1x1 conv.
struct TcnLayer {
  Param dil_w, dil_b, pw_w, pw_b;
};

struct TcnStage {
  Param in_w, in_b;
  std::vector<TcnLayer> layers;
  Param out_w, out_b;
};

struct TcnParams {
  TcnConfig config;
  std::vector<TcnStage> stages;

  /// Every parameter in checkpoint order: per stage in_w, in_b, then per
  /// layer dil_w, dil_b, pw_w, pw_b, then out_w, out_b.
  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
};

struct TcnStageTrace {
  Matrix input;
  std::vector<Matrix> hidden;   // layers + 1 entries; hidden[0] is the projection
  std::vector<Matrix> columns;  // im2col of hidden[l]
  std::vector<Matrix> conv_pre; // dilated conv output before ReLU
  std::vector<Matrix> conv_act;
  Matrix logits;
  Matrix log_probs;
  Matrix probs;
};

struct TcnForwardTrace {
  std::vector<TcnStageTrace> stages;

  /// Final stage's last residual-block output (T x F).
  const Matrix& penultimate() const { return stages.back().hidden.back(); }
  const Matrix& probs() const { return stages.back().probs; }
};

struct TcnGradients {
  std::vector<Matrix> grads;  // TcnParams::parameters() order
  double loss = 0;
};

TcnParams tcn_init(const TcnConfig& config, std::uint64_t seed);
void tcn_configure_optimizer(TcnParams& params, const AdamConfig& cfg);

/// y = x + relu(dilated_conv3(x)) * pw_w + pw_b, zero-padded so length is kept.
Matrix dilated_residual_block(const Matrix& x, const TcnLayer& layer, std::size_t dilation);

TcnForwardTrace tcn_forward(const TcnParams& params, const Matrix& features);

/// Gradients of the stage-averaged segmentation loss.
TcnGradients tcn_backward(const TcnParams& params, const Matrix& features, const TcnForwardTrace& trace,
                          std::span<const int> labels, const TimestampAnnotation& timestamps,
                          const LossWeights& weights, ConfScope scope = ConfScope::every_stage);

struct SegExample {
  const Matrix* features = nullptr;
  const Labels* labels = nullptr;  // dense or sparse (kUnlabeled)
  const TimestampAnnotation* timestamps = nullptr;
};

/// One pass over the examples in minibatches; averaged gradients, one ADAM
/// step per minibatch. Returns the mean loss over videos.
double train_seg_epoch(TcnParams& params, std::span<const SegExample> batch, const LossWeights& weights,
                       std::size_t batch_size = 8, Rng* shuffle = nullptr,
                       ConfScope scope = ConfScope::every_stage);

/// Argmax of the final stage, ties toward the lowest class.
Labels predict(const TcnParams& params, const Matrix& features);

std::vector<std::uint8_t> encode_tcn(const TcnParams& params);
TcnParams decode_tcn(std::vector<std::uint8_t> bytes);
void save_tcn(const TcnParams& params, const std::filesystem::path& path);
TcnParams load_tcn(const std::filesystem::path& path);

}  // namespace tsseg
