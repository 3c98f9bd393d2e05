#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tsseg/dataio.hpp"
#include "tsseg/gcn.hpp"
#include "tsseg/graph.hpp"
#include "tsseg/losses.hpp"
#include "tsseg/metrics.hpp"
#include "tsseg/segmenter.hpp"

namespace tsseg {

/// Alternating-learning schedule. Defaults follow the published protocol;
/// see desk_preset() for the reduced synthetic setting.
struct ScheduleConfig {
  std::size_t init_epochs = 30;
  std::size_t refine_iters = 20;
  std::size_t gcn_epochs_per_iter = 300;
  std::size_t seg_epochs_per_iter = 3;
  LossWeights loss;
  double seg_lr = 0.0005;
  double gcn_lr = 0.01;
  double gcn_weight_decay = 0.0005;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;

  std::size_t window = 31;
  EdgeMode edge_mode = EdgeMode::weighted;
  GcnVariant gcn_variant = GcnVariant::gcn;
  std::size_t gcn_hidden = 32;
  bool gcn_reinit = false;
  bool shuffle = true;
  ConfScope conf_scope = ConfScope::every_stage;

  std::size_t tcn_stages = 2;
  std::size_t tcn_layers = 6;
  std::size_t tcn_feature_maps = 64;
};

/// Paper defaults with the GCN epochs per refinement iteration cut to 60.
ScheduleConfig desk_preset();

/// Throws ConfigError on inconsistent settings.
void validate(const ScheduleConfig& config);

enum class StageKind { init, gcn, seg };
const char* to_string(StageKind kind);

struct EpochEntry {
  StageKind stage = StageKind::init;
  std::size_t iteration = 0;  // 0 for the initialization stage
  std::size_t epoch = 0;      // 1-based within the stage/iteration
  double loss = 0;
  std::optional<double> label_acc;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<EpochEntry> entries;
  std::vector<double> label_accuracy;  // per refinement iteration, when gt exists
  std::vector<std::pair<std::string, MetricReport>> final_metrics;
  bool complete = false;

  std::size_t count(StageKind kind) const;
};

/// Structured text log: `#` header lines, then `stage,iteration,epoch,loss,label_acc`
/// rows, then final metrics. The wall-clock header line is omitted when
/// `with_timestamp` is false.
void write_run_record(std::ostream& out, const RunRecord& record, bool with_timestamp);

/// Replaces dense label generation inside refine_iteration; receives the
/// video index within the training split.
using LabelSource = std::function<Labels(std::size_t video_index, const Video& video)>;

struct Models {
  TcnParams seg;
  std::optional<GcnParams> gcn;
};

/// Creates the segmenter with the schedule's optimizer settings.
TcnParams make_segmenter(const ScheduleConfig& config, const Dataset& dataset);
GcnParams make_gcn(const ScheduleConfig& config, std::size_t iteration, std::size_t num_classes);

/// Trains the segmenter on sparse timestamps for init_epochs epochs.
void initialize_stage(TcnParams& seg, const std::vector<const Video*>& videos, const ScheduleConfig& config,
                      RunRecord& record, Rng& order_rng);

struct RefineResult {
  std::vector<Labels> generated;  // per training video
  std::optional<double> label_accuracy;
};

/// One refinement iteration: extract penultimate features, build graphs,
/// train the GCN on the timestamps, generate dense labels, then train the
/// segmenter on them.
RefineResult refine_iteration(TcnParams& seg, GcnParams& gcn, const std::vector<const Video*>& videos,
                              const ScheduleConfig& config, std::size_t iteration, RunRecord& record,
                              Rng& order_rng, const LabelSource* label_source = nullptr);

/// Initialization followed by refine_iters refinement iterations, then
/// evaluation of the segmenter alone. `record` is filled as training
/// progresses, so it holds the partial log if an exception escapes.
Models run(const ScheduleConfig& config, const Dataset& dataset, RunRecord& record);

struct Evaluation {
  MetricReport report;
  std::vector<Labels> predictions;
};

/// Predicts every video with the segmenter; videos without ground truth are
/// predicted but not scored.
Evaluation evaluate(const TcnParams& seg, const std::vector<const Video*>& videos,
                    std::optional<int> ignore_label = std::nullopt);

/// The split used for final scoring: "test" when present, otherwise "train".
std::string evaluation_split(const Dataset& dataset);

}  // namespace tsseg
