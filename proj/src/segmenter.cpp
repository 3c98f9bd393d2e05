#include "tsseg/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include "tsseg/binary_io.hpp"
#include "tsseg/kernels.hpp"

namespace tsseg {
namespace {

constexpr char kMagic[] = "TSTC";
constexpr std::uint32_t kVersion = 1;

Param make_param(std::size_t rows, std::size_t cols) {
  return {Matrix(rows, cols), AdamState(rows, cols)};
}

// Fan-based uniform init; biases start at zero.
void init_weight(Param& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : p.value.values()) x = static_cast<Real>(rng.uniform(-limit, limit));
}

std::size_t stage_input_dim(const TcnConfig& c, std::size_t stage) {
  return stage == 0 ? c.input_dim : c.num_classes;
}

std::size_t dilation_of(std::size_t layer) { return std::size_t{1} << layer; }

Matrix affine(const Matrix& x, const Param& w, const Param& b) {
  Matrix y = kernels::matmul(x, w.value);
  kernels::add_row_bias(y, b.value);
  return y;
}

}  // namespace

void validate(const TcnConfig& c) {
  if (c.num_stages == 0 || c.layers_per_stage == 0 || c.num_feature_maps == 0 || c.input_dim == 0 ||
      c.num_classes == 0)
    throw ConfigError("TCN config requires stages, layers, feature maps, input dim and classes >= 1");
  if (c.layers_per_stage > 30) throw ConfigError("TCN config: too many layers per stage");
}

std::size_t tcn_param_count(const TcnConfig& c) {
  validate(c);
  const std::size_t f = c.num_feature_maps, k = c.num_classes, l = c.layers_per_stage;
  std::size_t total = 0;
  for (std::size_t s = 0; s < c.num_stages; ++s) {
    const std::size_t d = stage_input_dim(c, s);
    total += d * f + f + l * (3 * f * f + f + f * f + f) + f * k + k;
  }
  return total;
}

std::vector<Param*> TcnParams::parameters() {
  std::vector<Param*> out;
  for (auto& st : stages) {
    out.push_back(&st.in_w);
    out.push_back(&st.in_b);
    for (auto& l : st.layers) {
      out.push_back(&l.dil_w);
      out.push_back(&l.dil_b);
      out.push_back(&l.pw_w);
      out.push_back(&l.pw_b);
    }
    out.push_back(&st.out_w);
    out.push_back(&st.out_b);
  }
  return out;
}

std::vector<const Param*> TcnParams::parameters() const {
  auto mut = const_cast<TcnParams*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

namespace {

TcnParams allocate(const TcnConfig& c) {
  TcnParams p;
  p.config = c;
  const std::size_t f = c.num_feature_maps;
  for (std::size_t s = 0; s < c.num_stages; ++s) {
    TcnStage st;
    const std::size_t d = stage_input_dim(c, s);
    st.in_w = make_param(d, f);
    st.in_b = make_param(1, f);
    for (std::size_t l = 0; l < c.layers_per_stage; ++l)
      st.layers.push_back({make_param(3 * f, f), make_param(1, f), make_param(f, f), make_param(1, f)});
    st.out_w = make_param(f, c.num_classes);
    st.out_b = make_param(1, c.num_classes);
    p.stages.push_back(std::move(st));
  }
  return p;
}

}  // namespace

TcnParams tcn_init(const TcnConfig& c, std::uint64_t seed) {
  validate(c);
  TcnParams p = allocate(c);
  Rng rng(seed);
  const std::size_t f = c.num_feature_maps;
  for (std::size_t s = 0; s < c.num_stages; ++s) {
    TcnStage& st = p.stages[s];
    init_weight(st.in_w, stage_input_dim(c, s), f, rng);
    for (auto& l : st.layers) {
      init_weight(l.dil_w, 3 * f, f, rng);
      init_weight(l.pw_w, f, f, rng);
    }
    init_weight(st.out_w, f, c.num_classes, rng);
  }
  return p;
}

void tcn_configure_optimizer(TcnParams& params, const AdamConfig& cfg) {
  for (Param* p : params.parameters()) p->adam.configure(cfg);
}

Matrix dilated_residual_block(const Matrix& x, const TcnLayer& layer, std::size_t dilation) {
  if (dilation == 0) throw ConfigError("dilation must be >= 1");
  if (layer.dil_w.value.rows() != 3 * x.cols())
    throw ShapeError("dilated_residual_block: weights " + layer.dil_w.value.shape() + " for input " + x.shape());
  Matrix conv = affine(kernels::im2col3(x, dilation), layer.dil_w, layer.dil_b);
  Matrix y = affine(relu(conv), layer.pw_w, layer.pw_b);
  y += x;
  return y;
}

TcnForwardTrace tcn_forward(const TcnParams& params, const Matrix& features) {
  const TcnConfig& c = params.config;
  if (features.cols() != c.input_dim)
    throw ShapeError("tcn_forward: features " + features.shape() + " for input dimension " +
                     std::to_string(c.input_dim));
  if (features.rows() == 0) throw ShapeError("tcn_forward: empty feature sequence");
  TcnForwardTrace tr;
  for (std::size_t s = 0; s < c.num_stages; ++s) {
    const TcnStage& st = params.stages[s];
    TcnStageTrace t;
    t.input = s == 0 ? features : tr.stages.back().probs;
    t.hidden.push_back(affine(t.input, st.in_w, st.in_b));
    for (std::size_t l = 0; l < st.layers.size(); ++l) {
      const TcnLayer& layer = st.layers[l];
      const Matrix& h = t.hidden.back();
      t.columns.push_back(kernels::im2col3(h, dilation_of(l)));
      t.conv_pre.push_back(affine(t.columns.back(), layer.dil_w, layer.dil_b));
      t.conv_act.push_back(relu(t.conv_pre.back()));
      Matrix next = affine(t.conv_act.back(), layer.pw_w, layer.pw_b);
      next += h;
      t.hidden.push_back(std::move(next));
    }
    t.logits = affine(t.hidden.back(), st.out_w, st.out_b);
    t.log_probs = row_log_softmax(t.logits);
    t.probs = row_softmax(t.logits);
    tr.stages.push_back(std::move(t));
  }
  return tr;
}

TcnGradients tcn_backward(const TcnParams& params, const Matrix& features, const TcnForwardTrace& trace,
                          std::span<const int> labels, const TimestampAnnotation& timestamps,
                          const LossWeights& weights, ConfScope scope) {
  const TcnConfig& c = params.config;
  if (trace.stages.size() != c.num_stages || features.rows() != trace.stages.front().input.rows())
    throw ShapeError("tcn_backward: trace does not match inputs");

  std::vector<Matrix> stage_lp;
  for (const auto& st : trace.stages) stage_lp.push_back(st.log_probs);
  StageLoss loss = seg_loss(stage_lp, labels, timestamps, weights, scope);

  // Per-stage gradients, filled back to front, then flattened in order.
  std::vector<std::vector<Matrix>> per_stage(c.num_stages);
  Matrix d_input_next;  // gradient w.r.t. the next stage's input probabilities
  for (std::size_t s = c.num_stages; s-- > 0;) {
    const TcnStage& st = params.stages[s];
    const TcnStageTrace& t = trace.stages[s];
    Matrix d_logits = loss.grads[s];
    if (s + 1 < c.num_stages) d_logits += softmax_backward(d_input_next, t.probs);

    std::vector<Matrix> layer_grads(4 * st.layers.size());
    Matrix d_out_w = kernels::matmul_tn(t.hidden.back(), d_logits);
    Matrix d_out_b = kernels::column_sums(d_logits);
    Matrix d_h = kernels::matmul_nt(d_logits, st.out_w.value);
    for (std::size_t l = st.layers.size(); l-- > 0;) {
      const TcnLayer& layer = st.layers[l];
      layer_grads[4 * l + 2] = kernels::matmul_tn(t.conv_act[l], d_h);
      layer_grads[4 * l + 3] = kernels::column_sums(d_h);
      const Matrix d_act = kernels::matmul_nt(d_h, layer.pw_w.value);
      const Matrix d_conv = relu_backward(d_act, t.conv_pre[l]);
      layer_grads[4 * l] = kernels::matmul_tn(t.columns[l], d_conv);
      layer_grads[4 * l + 1] = kernels::column_sums(d_conv);
      d_h += kernels::col2im3(kernels::matmul_nt(d_conv, layer.dil_w.value), dilation_of(l));
    }
    std::vector<Matrix>& out = per_stage[s];
    out.push_back(kernels::matmul_tn(t.input, d_h));
    out.push_back(kernels::column_sums(d_h));
    for (auto& g : layer_grads) out.push_back(std::move(g));
    out.push_back(std::move(d_out_w));
    out.push_back(std::move(d_out_b));
    if (s > 0) d_input_next = kernels::matmul_nt(d_h, st.in_w.value);
  }

  TcnGradients g;
  g.loss = loss.value;
  for (auto& st : per_stage)
    for (auto& m : st) g.grads.push_back(std::move(m));
  return g;
}

double train_seg_epoch(TcnParams& params, std::span<const SegExample> batch, const LossWeights& weights,
                       std::size_t batch_size, Rng* shuffle, ConfScope scope) {
  if (batch.empty()) throw ConfigError("train_seg_epoch: empty batch");
  if (batch_size == 0) throw ConfigError("train_seg_epoch: batch size must be >= 1");
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) shuffle->shuffle(order);

  auto params_list = params.parameters();
  double total = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    std::vector<TcnGradients> grads(n);
    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(n); ++k) {
      try {
        const SegExample& ex = batch[order[start + static_cast<std::size_t>(k)]];
        const TcnForwardTrace tr = tcn_forward(params, *ex.features);
        grads[k] = tcn_backward(params, *ex.features, tr, *ex.labels, *ex.timestamps, weights, scope);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    const Real inv = Real(1) / static_cast<Real>(n);
    for (std::size_t i = 0; i < params_list.size(); ++i) {
      Matrix sum = grads[0].grads[i];
      for (std::size_t k = 1; k < n; ++k) sum += grads[k].grads[i];
      sum *= inv;
      adam_step(params_list[i]->value, sum, params_list[i]->adam);
    }
    for (const auto& g : grads) total += g.loss;
  }
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean)) throw NumericalError("train_seg_epoch: loss is not finite");
  return mean;
}

Labels predict(const TcnParams& params, const Matrix& features) {
  return row_argmax(tcn_forward(params, features).stages.back().logits);
}

std::vector<std::uint8_t> encode_tcn(const TcnParams& params) {
  const TcnConfig& c = params.config;
  binio::Writer w;
  w.magic({kMagic, 4});
  w.u32(kVersion);
  for (std::size_t v : {c.num_stages, c.layers_per_stage, c.num_feature_maps, c.input_dim, c.num_classes})
    w.u32(static_cast<std::uint32_t>(v));
  for (const Param* p : params.parameters())
    for (Real x : p->value.values()) w.f64(x);
  return w.bytes();
}

TcnParams decode_tcn(std::vector<std::uint8_t> bytes) {
  binio::Reader r(std::move(bytes));
  r.expect_magic({kMagic, 4});
  const std::size_t at = r.offset();
  if (const auto v = r.u32(); v != kVersion)
    throw FormatError("unsupported TCN checkpoint version " + std::to_string(v), at);
  const std::size_t cfg_at = r.offset();
  TcnConfig c;
  c.num_stages = r.u32();
  c.layers_per_stage = r.u32();
  c.num_feature_maps = r.u32();
  c.input_dim = r.u32();
  c.num_classes = r.u32();
  constexpr std::size_t kMaxDim = std::size_t{1} << 20;
  if (c.num_stages > 1024 || c.num_feature_maps > kMaxDim || c.input_dim > kMaxDim || c.num_classes > kMaxDim)
    throw FormatError("implausible TCN config block", cfg_at);
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid TCN config block: ") + e.what(), cfg_at);
  }
  // Guard the allocation before trusting the header dimensions.
  std::uint64_t count = 0;
  {
    const std::uint64_t f = c.num_feature_maps, k = c.num_classes, l = c.layers_per_stage;
    for (std::uint64_t s = 0; s < c.num_stages; ++s) {
      const std::uint64_t d = s == 0 ? c.input_dim : k;
      count += d * f + f + l * (3 * f * f + 2 * f + f * f) + f * k + k;
    }
  }
  r.require_remaining(count, 8, "TCN weights");
  TcnParams p = allocate(c);
  for (Param* q : p.parameters())
    for (auto& x : q->value.values()) x = static_cast<Real>(r.f64());
  r.expect_end();
  for (const Param* q : p.parameters())
    if (!q->value.all_finite()) throw FormatError("non-finite TCN weights", 0);
  return p;
}

void save_tcn(const TcnParams& params, const std::filesystem::path& path) {
  binio::write_file(path, encode_tcn(params));
}

TcnParams load_tcn(const std::filesystem::path& path) { return decode_tcn(binio::read_file(path)); }

}  // namespace tsseg
