#include "tsseg/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include "tsseg/binary_io.hpp"
#include "tsseg/kernels.hpp"

namespace tsseg {
namespace {

constexpr char kMagic[] = "TSGC";
constexpr std::uint32_t kVersion = 1;

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (auto& x : w.values()) x = static_cast<Real>(rng.uniform(-limit, limit));
  return w;
}

Matrix apply_adjacency(const GcnParams& params, const TemporalGraph& graph, const Matrix& m) {
  return params.variant == GcnVariant::gcn ? propagate(graph, m) : m;
}

void check_inputs(const GcnParams& params, const TemporalGraph& graph, const Matrix& features) {
  if (features.cols() != params.d_in())
    throw ShapeError("gcn: features " + features.shape() + " for input dimension " +
                     std::to_string(params.d_in()));
  if (params.variant == GcnVariant::gcn && graph.num_nodes != features.rows())
    throw ShapeError("gcn: graph has " + std::to_string(graph.num_nodes) + " nodes for " +
                     std::to_string(features.rows()) + " frames");
}

}  // namespace

GcnParams gcn_init(std::size_t d_in, std::size_t d_hidden, std::size_t num_classes, GcnVariant variant,
                   std::uint64_t seed) {
  if (d_in == 0 || d_hidden == 0 || num_classes == 0) throw ConfigError("gcn_init: dimensions must be >= 1");
  Rng rng(seed);
  GcnParams p;
  p.w1 = glorot(d_in, d_hidden, rng);
  p.w2 = glorot(d_hidden, num_classes, rng);
  p.variant = variant;
  p.adam1 = AdamState(d_in, d_hidden);
  p.adam2 = AdamState(d_hidden, num_classes);
  return p;
}

void gcn_configure_optimizer(GcnParams& params, const AdamConfig& cfg) {
  params.adam1.configure(cfg);
  params.adam2.configure(cfg);
}

GcnForwardTrace gcn_forward(const GcnParams& params, const TemporalGraph& graph, const Matrix& features) {
  check_inputs(params, graph, features);
  GcnForwardTrace tr;
  tr.h1_pre = apply_adjacency(params, graph, kernels::matmul(features, params.w1));
  tr.h1 = relu(tr.h1_pre);
  tr.logits = apply_adjacency(params, graph, kernels::matmul(tr.h1, params.w2));
  tr.log_probs = row_log_softmax(tr.logits);
  tr.probs = row_softmax(tr.logits);
  return tr;
}

GcnGradients gcn_backward(const GcnParams& params, const TemporalGraph& graph, const Matrix& features,
                          const GcnForwardTrace& trace, std::span<const int> labels,
                          const LossWeights& weights) {
  check_inputs(params, graph, features);
  LossResult loss = graph_loss(trace.log_probs, labels, weights);
  // The normalized adjacency is symmetric, so A^T g = A g.
  const Matrix d_hw2 = apply_adjacency(params, graph, loss.grad);
  GcnGradients g;
  g.loss = loss.value;
  g.w2 = kernels::matmul_tn(trace.h1, d_hw2);
  const Matrix d_h1 = kernels::matmul_nt(d_hw2, params.w2);
  const Matrix d_pre = relu_backward(d_h1, trace.h1_pre);
  g.w1 = kernels::matmul_tn(features, apply_adjacency(params, graph, d_pre));
  return g;
}

double train_gcn_epoch(GcnParams& params, std::span<const GcnExample> batch, const LossWeights& weights,
                       std::size_t batch_size, Rng* shuffle) {
  if (batch.empty()) throw ConfigError("train_gcn_epoch: empty batch");
  if (batch_size == 0) throw ConfigError("train_gcn_epoch: batch size must be >= 1");
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) shuffle->shuffle(order);

  double total = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    std::vector<GcnGradients> grads(n);
    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(n); ++k) {
      try {
        const GcnExample& ex = batch[order[start + static_cast<std::size_t>(k)]];
        if (ex.timestamps->empty()) throw AnnotationError("train_gcn_epoch: video without timestamps");
        const Labels sparse = sparse_labels(*ex.timestamps, ex.features->rows());
        const GcnForwardTrace tr = gcn_forward(params, *ex.graph, *ex.features);
        grads[k] = gcn_backward(params, *ex.graph, *ex.features, tr, sparse, weights);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    Matrix g1(params.w1.rows(), params.w1.cols()), g2(params.w2.rows(), params.w2.cols());
    for (const auto& g : grads) {
      g1 += g.w1;
      g2 += g.w2;
      total += g.loss;
    }
    const Real inv = Real(1) / static_cast<Real>(n);
    g1 *= inv;
    g2 *= inv;
    adam_step(params.w1, g1, params.adam1);
    adam_step(params.w2, g2, params.adam2);
  }
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean)) throw NumericalError("train_gcn_epoch: loss is not finite");
  return mean;
}

Labels labels_from_probs(const Matrix& probs, const TimestampAnnotation& timestamps) {
  Labels out = row_argmax(probs);
  for (const auto& ts : timestamps)
    if (ts.frame < out.size()) out[ts.frame] = ts.label;
  return out;
}

Labels generate_labels(const GcnParams& params, const TemporalGraph& graph, const Matrix& features,
                       const TimestampAnnotation& timestamps) {
  return labels_from_probs(gcn_forward(params, graph, features).probs, timestamps);
}

std::vector<std::uint8_t> encode_gcn(const GcnParams& params) {
  binio::Writer w;
  w.magic({kMagic, 4});
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(params.d_in()));
  w.u32(static_cast<std::uint32_t>(params.d_hidden()));
  w.u32(static_cast<std::uint32_t>(params.num_classes()));
  w.u8(static_cast<std::uint8_t>(params.variant));
  for (Real x : params.w1.values()) w.f64(x);
  for (Real x : params.w2.values()) w.f64(x);
  return w.bytes();
}

void save_gcn(const GcnParams& params, const std::filesystem::path& path) {
  binio::write_file(path, encode_gcn(params));
}

GcnParams decode_gcn(std::vector<std::uint8_t> bytes) {
  binio::Reader r(std::move(bytes));
  r.expect_magic({kMagic, 4});
  const std::size_t at = r.offset();
  if (const auto v = r.u32(); v != kVersion)
    throw FormatError("unsupported GCN checkpoint version " + std::to_string(v), at);
  const std::size_t dims_at = r.offset();
  const std::uint32_t d_in = r.u32(), d_hidden = r.u32(), classes = r.u32();
  if (d_in == 0 || d_hidden == 0 || classes == 0) throw FormatError("zero dimension in GCN checkpoint", dims_at);
  const std::size_t variant_at = r.offset();
  const std::uint8_t variant = r.u8();
  if (variant > 1) throw FormatError("unknown GCN variant " + std::to_string(variant), variant_at);
  const std::uint64_t count =
      static_cast<std::uint64_t>(d_in) * d_hidden + static_cast<std::uint64_t>(d_hidden) * classes;
  r.require_remaining(count, 8, "GCN weights");

  GcnParams p;
  p.variant = static_cast<GcnVariant>(variant);
  p.w1 = Matrix(d_in, d_hidden);
  p.w2 = Matrix(d_hidden, classes);
  for (auto& x : p.w1.values()) x = static_cast<Real>(r.f64());
  for (auto& x : p.w2.values()) x = static_cast<Real>(r.f64());
  r.expect_end();
  if (!p.w1.all_finite() || !p.w2.all_finite()) throw FormatError("non-finite GCN weights", 0);
  p.adam1 = AdamState(d_in, d_hidden);
  p.adam2 = AdamState(d_hidden, classes);
  return p;
}

GcnParams load_gcn(const std::filesystem::path& path) {
  return decode_gcn(binio::read_file(path));
}

}  // namespace tsseg
