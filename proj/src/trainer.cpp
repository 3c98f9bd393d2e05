#include "tsseg/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <ostream>
#include <sstream>

#include "tsseg/metrics.hpp"

namespace tsseg {
namespace {

// Independent deterministic streams derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kSegInitStream = 1;
constexpr std::uint64_t kOrderStream = 2;
constexpr std::uint64_t kGcnInitStream = 100;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::pair<std::string, std::string>> snapshot(const ScheduleConfig& c) {
  auto u = [](std::size_t v) { return std::to_string(v); };
  return {
      {"init_epochs", u(c.init_epochs)},
      {"refine_iters", u(c.refine_iters)},
      {"gcn_epochs_per_iter", u(c.gcn_epochs_per_iter)},
      {"seg_epochs_per_iter", u(c.seg_epochs_per_iter)},
      {"alpha", fmt_double(c.loss.alpha)},
      {"beta", fmt_double(c.loss.beta)},
      {"tau", fmt_double(c.loss.tau)},
      {"seg_lr", fmt_double(c.seg_lr)},
      {"gcn_lr", fmt_double(c.gcn_lr)},
      {"gcn_weight_decay", fmt_double(c.gcn_weight_decay)},
      {"batch_size", u(c.batch_size)},
      {"window", u(c.window)},
      {"edge_mode", c.edge_mode == EdgeMode::binary ? "binary" : "weighted"},
      {"gcn_variant", c.gcn_variant == GcnVariant::gcn ? "gcn" : "mlp"},
      {"gcn_hidden", u(c.gcn_hidden)},
      {"gcn_reinit", c.gcn_reinit ? "1" : "0"},
      {"shuffle", c.shuffle ? "1" : "0"},
      {"conf_scope", c.conf_scope == ConfScope::every_stage ? "every_stage" : "final_stage"},
      {"tcn_stages", u(c.tcn_stages)},
      {"tcn_layers", u(c.tcn_layers)},
      {"tcn_feature_maps", u(c.tcn_feature_maps)},
      {"precision", sizeof(Real) == 8 ? "64" : "32"},
  };
}

std::vector<const Video*> training_videos(const Dataset& ds) {
  auto videos = ds.split("train");
  if (videos.empty()) throw DataError("dataset has no training videos");
  for (const Video* v : videos)
    if (v->timestamps.empty()) throw DataError("training video " + v->id + " has no timestamps");
  return videos;
}

}  // namespace

ScheduleConfig desk_preset() {
  ScheduleConfig c;
  c.gcn_epochs_per_iter = 60;
  return c;
}

void validate(const ScheduleConfig& c) {
  if (c.init_epochs + c.refine_iters == 0) throw ConfigError("init_epochs + refine_iters must be > 0");
  if (c.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (c.window == 0 || c.window % 2 == 0) throw ConfigError("window must be odd and >= 1");
  if (c.loss.alpha < 0 || c.loss.beta < 0 || !(c.loss.tau > 0))
    throw ConfigError("loss weights require alpha, beta >= 0 and tau > 0");
  if (!(c.seg_lr >= 0) || !(c.gcn_lr >= 0) || !(c.gcn_weight_decay >= 0))
    throw ConfigError("learning rates and weight decay must be >= 0");
  if (c.gcn_hidden == 0 || c.tcn_stages == 0 || c.tcn_layers == 0 || c.tcn_feature_maps == 0)
    throw ConfigError("model dimensions must be >= 1");
  if (c.gcn_reinit && c.refine_iters == 0) throw ConfigError("--gcn-reinit has no effect with refine_iters = 0");
}

const char* to_string(StageKind kind) {
  switch (kind) {
    case StageKind::init: return "init";
    case StageKind::gcn: return "gcn";
    case StageKind::seg: return "seg";
  }
  return "?";
}

std::size_t RunRecord::count(StageKind kind) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.stage == kind;
  return n;
}

void write_run_record(std::ostream& out, const RunRecord& r, bool with_timestamp) {
  out << "# tsseg run record\n";
  if (with_timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "# created " << buf << "\n";
  }
  out << "# seed " << r.seed << "\n";
  for (const auto& [k, v] : r.config) out << "# config " << k << "=" << v << "\n";
  out << "stage,iteration,epoch,loss,label_acc\n";
  for (const auto& e : r.entries) {
    out << to_string(e.stage) << ',' << e.iteration << ',' << e.epoch << ',' << fmt_double(e.loss) << ',';
    if (e.label_acc) out << fmt_double(*e.label_acc);
    out << '\n';
  }
  for (const auto& [split, m] : r.final_metrics) {
    out << "# final " << split << ".f1@10=" << fmt_double(m.f1[0]) << "\n";
    out << "# final " << split << ".f1@25=" << fmt_double(m.f1[1]) << "\n";
    out << "# final " << split << ".f1@50=" << fmt_double(m.f1[2]) << "\n";
    out << "# final " << split << ".edit=" << fmt_double(m.edit) << "\n";
    out << "# final " << split << ".acc=" << fmt_double(m.acc) << "\n";
  }
  out << "# status " << (r.complete ? "complete" : "partial") << "\n";
}

TcnParams make_segmenter(const ScheduleConfig& c, const Dataset& ds) {
  TcnConfig tc;
  tc.num_stages = c.tcn_stages;
  tc.layers_per_stage = c.tcn_layers;
  tc.num_feature_maps = c.tcn_feature_maps;
  tc.input_dim = ds.feature_dim;
  tc.num_classes = ds.num_classes;
  TcnParams p = tcn_init(tc, derive_seed(c.seed, kSegInitStream));
  AdamConfig opt;
  opt.lr = c.seg_lr;
  tcn_configure_optimizer(p, opt);
  return p;
}

GcnParams make_gcn(const ScheduleConfig& c, std::size_t iteration, std::size_t num_classes) {
  GcnParams p = gcn_init(c.tcn_feature_maps, c.gcn_hidden, num_classes, c.gcn_variant,
                         derive_seed(c.seed, kGcnInitStream + iteration));
  AdamConfig opt;
  opt.lr = c.gcn_lr;
  opt.weight_decay = c.gcn_weight_decay;
  gcn_configure_optimizer(p, opt);
  return p;
}

void initialize_stage(TcnParams& seg, const std::vector<const Video*>& videos, const ScheduleConfig& c,
                      RunRecord& record, Rng& order_rng) {
  if (c.init_epochs == 0) return;
  std::vector<Labels> sparse;
  sparse.reserve(videos.size());
  for (const Video* v : videos) {
    if (v->timestamps.empty()) throw AnnotationError("video " + v->id + " has no timestamps");
    sparse.push_back(sparse_labels(v->timestamps, v->features.rows()));
  }
  std::vector<SegExample> batch;
  for (std::size_t i = 0; i < videos.size(); ++i)
    batch.push_back({&videos[i]->features, &sparse[i], &videos[i]->timestamps});
  for (std::size_t e = 1; e <= c.init_epochs; ++e) {
    const double loss =
        train_seg_epoch(seg, batch, c.loss, c.batch_size, c.shuffle ? &order_rng : nullptr, c.conf_scope);
    record.entries.push_back({StageKind::init, 0, e, loss, std::nullopt});
  }
}

RefineResult refine_iteration(TcnParams& seg, GcnParams& gcn, const std::vector<const Video*>& videos,
                              const ScheduleConfig& c, std::size_t iteration, RunRecord& record,
                              Rng& order_rng, const LabelSource* label_source) {
  const std::size_t n = videos.size();
  std::vector<Matrix> features(n);
  std::vector<TemporalGraph> graphs(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    try {
      features[i] = tcn_forward(seg, videos[i]->features).penultimate();
      graphs[i] = build_graph(features[i], c.window, c.edge_mode);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  RefineResult result;
  result.generated.resize(n);
  if (label_source) {
    for (std::size_t i = 0; i < n; ++i) result.generated[i] = (*label_source)(i, *videos[i]);
  } else {
    std::vector<GcnExample> examples;
    for (std::size_t i = 0; i < n; ++i) examples.push_back({&graphs[i], &features[i], &videos[i]->timestamps});
    for (std::size_t e = 1; e <= c.gcn_epochs_per_iter; ++e) {
      const double loss = train_gcn_epoch(gcn, examples, c.loss, c.batch_size, c.shuffle ? &order_rng : nullptr);
      record.entries.push_back({StageKind::gcn, iteration, e, loss, std::nullopt});
    }
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      try {
        result.generated[i] = generate_labels(gcn, graphs[i], features[i], videos[i]->timestamps);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  bool all_gt = true;
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (result.generated[i].size() != videos[i]->features.rows())
      throw ShapeError("generated labels for " + videos[i]->id + " do not cover every frame");
    if (!videos[i]->gt) {
      all_gt = false;
      continue;
    }
    acc += accuracy(result.generated[i], *videos[i]->gt);
  }
  if (all_gt) {
    result.label_accuracy = acc / static_cast<double>(n);
    record.label_accuracy.push_back(*result.label_accuracy);
  }

  std::vector<SegExample> batch;
  for (std::size_t i = 0; i < n; ++i)
    batch.push_back({&videos[i]->features, &result.generated[i], &videos[i]->timestamps});
  for (std::size_t e = 1; e <= c.seg_epochs_per_iter; ++e) {
    const double loss =
        train_seg_epoch(seg, batch, c.loss, c.batch_size, c.shuffle ? &order_rng : nullptr, c.conf_scope);
    record.entries.push_back({StageKind::seg, iteration, e, loss, result.label_accuracy});
  }
  return result;
}

Models run(const ScheduleConfig& c, const Dataset& ds, RunRecord& record) {
  validate(c);
  record = RunRecord{};
  record.seed = c.seed;
  record.config = snapshot(c);

  const auto videos = training_videos(ds);
  Models models{make_segmenter(c, ds), std::nullopt};
  Rng order_rng(derive_seed(c.seed, kOrderStream));

  initialize_stage(models.seg, videos, c, record, order_rng);
  for (std::size_t it = 1; it <= c.refine_iters; ++it) {
    if (!models.gcn || c.gcn_reinit) models.gcn = make_gcn(c, it, ds.num_classes);
    refine_iteration(models.seg, *models.gcn, videos, c, it, record, order_rng);
  }

  const std::string split = evaluation_split(ds);
  record.final_metrics.emplace_back(split, evaluate(models.seg, ds.split(split)).report);
  record.complete = true;
  return models;
}

Evaluation evaluate(const TcnParams& seg, const std::vector<const Video*>& videos,
                    std::optional<int> ignore_label) {
  Evaluation ev;
  ev.predictions.resize(videos.size());
  std::vector<std::exception_ptr> errors(videos.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(videos.size()); ++i) {
    try {
      ev.predictions[i] = predict(seg, videos[i]->features);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  MetricAccumulator acc(ignore_label);
  for (std::size_t i = 0; i < videos.size(); ++i)
    if (videos[i]->gt) acc.add(ev.predictions[i], *videos[i]->gt);
  ev.report = acc.report();
  return ev;
}

std::string evaluation_split(const Dataset& ds) { return ds.split("test").empty() ? "train" : "test"; }

}  // namespace tsseg
