// Command-line front end: synthetic data, training, evaluation and dense
// label generation.
//
// Exit codes: 0 success, 2 usage/config, 3 data/compatibility, 4 numerical
// failure.

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tsseg/dataio.hpp"
#include "tsseg/gcn.hpp"
#include "tsseg/graph.hpp"
#include "tsseg/metrics.hpp"
#include "tsseg/segmenter.hpp"
#include "tsseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace tsseg;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

void set_workers(int workers) {
  if (workers <= 0) {
    if (const char* env = std::getenv("TSSEG_WORKERS")) {
      try {
        workers = std::stoi(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("TSSEG_WORKERS is not an integer: ") + env);
      }
    }
  }
  if (workers > 0) omp_set_num_threads(workers);
}

void check_precision(int bits) {
  const int built = sizeof(Real) * 8;
  if (bits != built)
    throw ConfigError("this build computes at " + std::to_string(built) + "-bit precision; reconfigure with " +
                      (bits == 32 ? "-DTSSEG_SINGLE_PRECISION=ON" : "-DTSSEG_SINGLE_PRECISION=OFF") +
                      " for " + std::to_string(bits) + "-bit");
}

EdgeMode parse_edge(const std::string& s) { return s == "binary" ? EdgeMode::binary : EdgeMode::weighted; }

void write_timeline(const Labels& labels, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const Segment& s : segments_from_labels(labels))
    out << s.label << ',' << (s.start + 1) << ',' << (s.end + 1) << '\n';
}

void check_compat(const TcnParams& seg, const Dataset& ds) {
  if (seg.config.num_classes != ds.num_classes)
    throw DataError("segmenter predicts " + std::to_string(seg.config.num_classes) +
                    " classes but the dataset has " + std::to_string(ds.num_classes));
  if (seg.config.input_dim != ds.feature_dim)
    throw DataError("segmenter expects " + std::to_string(seg.config.input_dim) +
                    "-dimensional features but the dataset has " + std::to_string(ds.feature_dim));
}

struct SynthOptions {
  std::string out;
  SynthConfig cfg;
};

int cmd_synth(const SynthOptions& o) {
  SynthResult r = synth_dataset(o.cfg);
  const DatasetManifest m = write_dataset(r.dataset, o.out);
  std::ifstream in(fs::path(o.out) / "manifest.json");
  std::cout << in.rdbuf();
  std::cerr << "wrote " << m.videos.size() << " videos to " << o.out << "\n";
  return kOk;
}

struct TrainOptions {
  std::string manifest;
  std::string out;
  std::string preset = "paper";
  ScheduleConfig cfg;
  std::optional<std::size_t> gcn_epochs;
  std::string edge = "weighted";
  std::string variant = "gcn";
  std::string conf_scope = "every";
  bool no_shuffle = false;
  bool no_timestamps = false;
  std::optional<std::uint64_t> sample_seed;
};

int cmd_train(TrainOptions o) {
  // The presets differ only in GCN epochs per refinement iteration.
  ScheduleConfig c = o.cfg;
  c.gcn_epochs_per_iter = o.gcn_epochs.value_or(o.preset == "desk" ? desk_preset().gcn_epochs_per_iter
                                                                    : ScheduleConfig{}.gcn_epochs_per_iter);
  c.edge_mode = parse_edge(o.edge);
  c.gcn_variant = o.variant == "mlp" ? GcnVariant::mlp : GcnVariant::gcn;
  c.conf_scope = o.conf_scope == "final" ? ConfScope::final_stage : ConfScope::every_stage;
  c.shuffle = !o.no_shuffle;
  validate(c);

  const Dataset ds = load_dataset(o.manifest, o.sample_seed);
  fs::create_directories(o.out);
  const fs::path out(o.out);
  fs::remove(out / "gcn.tsgc");

  RunRecord record;
  auto flush_record = [&] {
    std::ofstream log(out / "run_record.txt", std::ios::trunc);
    write_run_record(log, record, !o.no_timestamps);
  };
  Models models;
  try {
    models = run(c, ds, record);
  } catch (...) {
    flush_record();
    throw;
  }
  flush_record();
  save_tcn(models.seg, out / "segmenter.tstc");
  if (models.gcn) save_gcn(*models.gcn, out / "gcn.tsgc");

  std::ofstream csv(out / "metrics.csv", std::ios::trunc);
  for (const auto& [split, report] : record.final_metrics) {
    write_report_table(std::cout, split, report);
    write_report_csv(csv, split, report);
  }
  return kOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string predictions;
  std::string manifest;
  std::string out;
  std::optional<int> ignore_class;
};

// Predictions come either from a segmenter checkpoint or from a directory of
// `<id>.labels.txt` files.
Evaluation score_label_files(const fs::path& dir, const std::vector<const Video*>& videos,
                             std::size_t num_classes, std::optional<int> ignore_class) {
  Evaluation ev;
  MetricAccumulator acc(ignore_class);
  for (const Video* v : videos) {
    Labels p = read_labels(dir / (v->id + ".labels.txt"));
    if (p.size() != v->features.rows())
      throw DataError("prediction for " + v->id + " has " + std::to_string(p.size()) + " frames, expected " +
                      std::to_string(v->features.rows()));
    for (int c : p)
      if (c < 0 || static_cast<std::size_t>(c) >= num_classes)
        throw DataError("prediction for " + v->id + " uses class " + std::to_string(c) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    if (v->gt) acc.add(p, *v->gt);
    ev.predictions.push_back(std::move(p));
  }
  ev.report = acc.report();
  return ev;
}

int cmd_eval(const EvalOptions& o) {
  if (o.checkpoint.empty() == o.predictions.empty())
    throw ConfigError("eval needs exactly one of --checkpoint or --predictions");
  const Dataset ds = load_dataset(o.manifest);
  std::optional<TcnParams> seg;
  if (!o.checkpoint.empty()) {
    seg = load_tcn(o.checkpoint);
    check_compat(*seg, ds);
  }
  const fs::path out(o.out);
  fs::create_directories(out / "predictions");
  fs::create_directories(out / "timelines");

  std::ofstream csv(out / "metrics.csv", std::ios::trunc);
  std::ofstream table(out / "metrics.txt", std::ios::trunc);
  for (const std::string split : {"train", "test"}) {
    const auto videos = ds.split(split);
    if (videos.empty()) continue;
    const Evaluation ev = seg ? evaluate(*seg, videos, o.ignore_class)
                              : score_label_files(o.predictions, videos, ds.num_classes, o.ignore_class);
    for (std::size_t i = 0; i < videos.size(); ++i) {
      write_labels(ev.predictions[i], out / "predictions" / (videos[i]->id + ".labels.txt"));
      write_timeline(ev.predictions[i], out / "timelines" / (videos[i]->id + ".timeline.txt"));
    }
    write_report_table(std::cout, split, ev.report);
    write_report_table(table, split, ev.report);
    write_report_csv(csv, split, ev.report);
  }
  return kOk;
}

struct GenOptions {
  std::string segmenter;
  std::string gcn;
  std::string manifest;
  std::string out;
  std::size_t window = 31;
  std::string edge = "weighted";
  std::optional<std::uint64_t> sample_seed;
};

int cmd_gen_labels(const GenOptions& o) {
  const TcnParams seg = load_tcn(o.segmenter);
  const GcnParams gcn = load_gcn(o.gcn);
  const Dataset ds = load_dataset(o.manifest, o.sample_seed);
  check_compat(seg, ds);
  if (gcn.d_in() != seg.config.num_feature_maps || gcn.num_classes() != ds.num_classes)
    throw DataError("GCN checkpoint (" + std::to_string(gcn.d_in()) + " inputs, " +
                    std::to_string(gcn.num_classes()) + " classes) does not fit the segmenter/dataset");
  const fs::path out(o.out);
  fs::create_directories(out);

  double acc_sum = 0;
  std::size_t scored = 0;
  for (const Video& v : ds.videos) {
    if (v.timestamps.empty())
      throw DataError("video " + v.id + " has no timestamps (use --sample-timestamps)");
    const Matrix feats = tcn_forward(seg, v.features).penultimate();
    const TemporalGraph g = build_graph(feats, o.window, parse_edge(o.edge));
    const Labels labels = generate_labels(gcn, g, feats, v.timestamps);
    write_labels(labels, out / (v.id + ".labels.txt"));
    if (v.gt) {
      const double a = accuracy(labels, *v.gt);
      std::cout << v.id << ',' << a << '\n';
      acc_sum += a;
      ++scored;
    }
  }
  if (scored > 0) std::cout << "mean_label_accuracy," << acc_sum / static_cast<double>(scored) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timestamp-supervised temporal action segmentation"};
  app.require_subcommand(1);
  // A repeated flag overrides the earlier value, so scripts can append overrides.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  int workers = 0;
  app.add_option("--workers", workers, "Worker threads (falls back to TSSEG_WORKERS)");

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--seed", so.cfg.seed);
  synth->add_option("--videos", so.cfg.num_videos)->check(CLI::PositiveNumber);
  synth->add_option("--classes", so.cfg.num_classes)->check(CLI::PositiveNumber);
  synth->add_option("--dim", so.cfg.feature_dim)->check(CLI::PositiveNumber);
  synth->add_option("--min-len", so.cfg.segment_len_range.first)->check(CLI::PositiveNumber);
  synth->add_option("--max-len", so.cfg.segment_len_range.second)->check(CLI::PositiveNumber);
  synth->add_option("--min-segments", so.cfg.segments_per_video.first)->check(CLI::PositiveNumber);
  synth->add_option("--max-segments", so.cfg.segments_per_video.second)->check(CLI::PositiveNumber);
  synth->add_option("--noise", so.cfg.noise_sigma)->check(CLI::NonNegativeNumber);
  synth->add_option("--blur", so.cfg.boundary_blur);

  TrainOptions to;
  auto* train = app.add_subcommand("train", "Alternating training of segmenter and label GCN");
  train->add_option("--manifest", to.manifest)->required();
  train->add_option("--out", to.out, "Output directory")->default_val("run");
  train->add_option("--preset", to.preset, "paper (300 GCN epochs) or desk (60)")
      ->check(CLI::IsMember({"paper", "desk"}));
  train->add_option("--seed", to.cfg.seed);
  train->add_option("--init-epochs", to.cfg.init_epochs);
  train->add_option("--refine-iters", to.cfg.refine_iters);
  train->add_option("--gcn-epochs", to.gcn_epochs);
  train->add_option("--seg-epochs", to.cfg.seg_epochs_per_iter);
  train->add_option("--alpha", to.cfg.loss.alpha);
  train->add_option("--beta", to.cfg.loss.beta);
  train->add_option("--tau", to.cfg.loss.tau);
  train->add_option("--seg-lr", to.cfg.seg_lr);
  train->add_option("--gcn-lr", to.cfg.gcn_lr);
  train->add_option("--gcn-weight-decay", to.cfg.gcn_weight_decay);
  train->add_option("--batch-size", to.cfg.batch_size);
  train->add_option("--window", to.cfg.window);
  train->add_option("--edge", to.edge)->check(CLI::IsMember({"binary", "weighted"}));
  train->add_option("--variant", to.variant)->check(CLI::IsMember({"gcn", "mlp"}));
  train->add_option("--gcn-hidden", to.cfg.gcn_hidden);
  train->add_flag("--gcn-reinit", to.cfg.gcn_reinit, "Re-initialize the GCN every refinement iteration");
  train->add_flag("--no-shuffle", to.no_shuffle, "Keep video order fixed across epochs");
  train->add_option("--conf-scope", to.conf_scope)->check(CLI::IsMember({"every", "final"}));
  train->add_option("--stages", to.cfg.tcn_stages);
  train->add_option("--layers", to.cfg.tcn_layers);
  train->add_option("--maps", to.cfg.tcn_feature_maps);
  train->add_option("--sample-timestamps", to.sample_seed, "Sample missing timestamps from ground truth");
  train->add_flag("--no-timestamps", to.no_timestamps, "Omit wall-clock time from the run record");
  int train_precision = sizeof(Real) * 8;
  train->add_option("--precision", train_precision)->check(CLI::IsMember({32, 64}));

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Score a segmenter checkpoint");
  auto* ckpt = eval->add_option("--checkpoint", eo.checkpoint, "Segmenter checkpoint to predict with");
  auto* preds = eval->add_option("--predictions", eo.predictions, "Directory of <id>.labels.txt files to score");
  ckpt->excludes(preds);
  eval->add_option("--manifest", eo.manifest)->required();
  eval->add_option("--out", eo.out)->default_val("eval");
  eval->add_option("--ignore-class", eo.ignore_class, "Exclude this class from Edit and F1");

  GenOptions go;
  auto* gen = app.add_subcommand("gen-labels", "Generate dense labels with a trained GCN");
  gen->add_option("--segmenter", go.segmenter)->required();
  gen->add_option("--gcn", go.gcn)->required();
  gen->add_option("--manifest", go.manifest)->required();
  gen->add_option("--out", go.out)->default_val("labels");
  gen->add_option("--window", go.window);
  gen->add_option("--edge", go.edge)->check(CLI::IsMember({"binary", "weighted"}));
  gen->add_option("--sample-timestamps", go.sample_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    set_workers(workers);
    if (*synth) return cmd_synth(so);
    if (*train) {
      check_precision(train_precision);
      return cmd_train(to);
    }
    if (*eval) return cmd_eval(eo);
    if (*gen) return cmd_gen_labels(go);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
