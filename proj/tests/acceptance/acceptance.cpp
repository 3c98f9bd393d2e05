// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. TSSEG_ACCEPTANCE=1,3,8 restricts the run to the listed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "tsseg/dataio.hpp"
#include "tsseg/errors.hpp"
#include "tsseg/gcn.hpp"
#include "tsseg/graph.hpp"
#include "tsseg/losses.hpp"
#include "tsseg/metrics.hpp"
#include "tsseg/numerics.hpp"
#include "tsseg/segmenter.hpp"
#include "tsseg/trainer.hpp"

using namespace tsseg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kGradTol = 1e-4;

// Collects failed checks; keeps the first few messages for the report.
class Checks {
 public:
  void require(bool ok, const std::string& what) {
    ++total_;
    if (ok) return;
    ++failed_;
    if (messages_.size() < 5) messages_.push_back(what);
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::ostringstream s;
    s << (total_ - failed_) << "/" << total_ << " checks";
    for (const auto& m : messages_) s << "; " << m;
    return s.str();
  }

 private:
  std::size_t total_ = 0, failed_ = 0;
  std::vector<std::string> messages_;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

void progress(const std::string& line) { std::cerr << "  " << line << std::endl; }

TimestampAnnotation random_timestamps(std::size_t t, std::size_t c, Rng& rng) {
  TimestampAnnotation ts;
  for (std::size_t f = 0; f < t; ++f)
    if (rng.uniform() < 0.4 || (ts.empty() && f + 1 == t)) ts.push_back({f, static_cast<int>(rng.index(0, c - 1))});
  return ts;
}

Labels random_sparse_labels(std::size_t t, std::size_t c, Rng& rng) {
  Labels y(t, kUnlabeled);
  for (auto& v : y)
    if (rng.uniform() < 0.6) v = static_cast<int>(rng.index(0, c - 1));
  if (std::all_of(y.begin(), y.end(), [](int v) { return v == kUnlabeled; })) y[rng.index(0, t - 1)] = 0;
  return y;
}

// ---------------------------------------------------------------------------
// 1. Gradients against central differences

Outcome gradient_suite() {
  Checks checks;
  std::vector<std::pair<std::string, double>> worst;
  auto track = [&](const std::string& name, double err, const std::string& where) {
    checks.require(err <= kGradTol, name + " " + where + " rel " + sci(err));
    auto it = std::find_if(worst.begin(), worst.end(), [&](const auto& p) { return p.first == name; });
    if (it == worst.end()) {
      worst.emplace_back(name, err);
    } else {
      it->second = std::max(it->second, err);
    }
  };
  const LossWeights w{.alpha = 0.15, .beta = 0.075, .tau = 4};
  const auto logit_fd = [](const std::function<double(const Matrix&)>& loss_of_lp, const Matrix& z) {
    return finite_diff_grad([&](const Matrix& m) { return loss_of_lp(row_log_softmax(m)); }, z, 1e-5);
  };

  // Loss functions, differentiated with respect to the logits.
  std::size_t conf_cases = 0;
  for (std::uint64_t seed = 0; seed < 200 && (seed < 12 || conf_cases < 12); ++seed) {
    Rng rng(7000 + seed);
    const std::size_t t = 2 + rng.index(0, 6), c = 2 + rng.index(0, 2);
    const Matrix z = test::random_matrix(t, c, rng, -3, 3);
    const Matrix lp = row_log_softmax(z);
    const Labels labels = random_sparse_labels(t, c, rng);
    const TimestampAnnotation ts = random_timestamps(t, c, rng);
    const std::string where = "seed " + std::to_string(seed);
    if (seed < 12) {
      track("class_loss", relative_error(class_loss(lp, labels).grad,
                                         logit_fd([&](const Matrix& m) { return class_loss(m, labels).value; }, z)),
            where);
      track("smooth_loss", relative_error(smooth_loss(lp, w.tau).grad,
                                          logit_fd([&](const Matrix& m) { return smooth_loss(m, w.tau).value; }, z)),
            where);
      track("graph_loss", relative_error(graph_loss(lp, labels, w).grad,
                                         logit_fd([&](const Matrix& m) { return graph_loss(m, labels, w).value; }, z)),
            where);
      const Matrix z2 = test::random_matrix(t, c, rng, -3, 3);
      const std::vector<Matrix> stages{lp, row_log_softmax(z2)};
      const StageLoss sl = seg_loss(stages, labels, ts, w);
      track("seg_loss", relative_error(sl.grads[0], logit_fd(
                                                         [&](const Matrix& m) {
                                                           const std::vector<Matrix> s{m, stages[1]};
                                                           return seg_loss(s, labels, ts, w).value;
                                                         },
                                                         z)),
            where);
      track("seg_loss", relative_error(sl.grads[1], logit_fd(
                                                         [&](const Matrix& m) {
                                                           const std::vector<Matrix> s{stages[0], m};
                                                           return seg_loss(s, labels, ts, w).value;
                                                         },
                                                         z2)),
            where);
    }
    // The confidence loss is piecewise; only instances with an active hinge
    // carry a gradient worth checking.
    if (conf_cases < 12 && conf_loss(lp, ts).value > 1e-6) {
      ++conf_cases;
      track("conf_loss", relative_error(conf_loss(lp, ts).grad,
                                        logit_fd([&](const Matrix& m) { return conf_loss(m, ts).value; }, z)),
            where);
    }
  }
  checks.require(conf_cases >= 10, "only " + std::to_string(conf_cases) + " active conf_loss instances");

  // GCN, both variants and edge modes.
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(7500 + seed);
    const std::size_t t = 2 + rng.index(0, 6), c = 2 + rng.index(0, 2), d = 3 + rng.index(0, 2);
    const Matrix x = test::random_matrix(t, d, rng);
    const std::size_t window = 1 + 2 * rng.index(0, 3);
    const TemporalGraph g = build_graph(x, window, seed % 2 ? EdgeMode::binary : EdgeMode::weighted);
    const GcnParams p = gcn_init(d, 3 + rng.index(0, 3), c, seed % 3 == 2 ? GcnVariant::mlp : GcnVariant::gcn,
                                 seed);
    const Labels labels = random_sparse_labels(t, c, rng);
    const GcnGradients grads = gcn_backward(p, g, x, gcn_forward(p, g, x), labels, w);
    const auto loss_with = [&](const Matrix& w1, const Matrix& w2) {
      GcnParams q = p;
      q.w1 = w1;
      q.w2 = w2;
      return graph_loss(gcn_forward(q, g, x).log_probs, labels, w).value;
    };
    const std::string where = "seed " + std::to_string(seed);
    track("gcn_backward",
          relative_error(grads.w1, finite_diff_grad([&](const Matrix& m) { return loss_with(m, p.w2); }, p.w1)),
          where + " w1");
    track("gcn_backward",
          relative_error(grads.w2, finite_diff_grad([&](const Matrix& m) { return loss_with(p.w1, m); }, p.w2)),
          where + " w2");
  }

  // Segmenter, every parameter tensor.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(7800 + seed);
    const std::size_t t = 3 + rng.index(0, 5), c = 2 + rng.index(0, 2), d = 3 + rng.index(0, 2);
    TcnConfig cfg{.input_dim = d, .num_classes = c};
    cfg.num_stages = 1 + static_cast<std::size_t>(rng.index(0, 1));
    cfg.layers_per_stage = 1 + static_cast<std::size_t>(rng.index(0, 1));
    cfg.num_feature_maps = 3 + static_cast<std::size_t>(rng.index(0, 1));
    TcnParams p = tcn_init(cfg, seed);
    for (Param* q : p.parameters())
      for (auto& v : q->value.values()) v = static_cast<Real>(rng.uniform(-0.5, 0.5));
    const Matrix x = test::random_matrix(t, d, rng);
    const TimestampAnnotation ts = random_timestamps(t, c, rng);
    const Labels labels = seed % 2 ? sparse_labels(ts, t) : random_sparse_labels(t, c, rng);
    const TcnGradients grads = tcn_backward(p, x, tcn_forward(p, x), labels, ts, w);
    const auto params = p.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Matrix fd = finite_diff_grad(
          [&](const Matrix& m) {
            TcnParams q = p;
            q.parameters()[k]->value = m;
            const TcnForwardTrace tr = tcn_forward(q, x);
            std::vector<Matrix> lps;
            for (const auto& s : tr.stages) lps.push_back(s.log_probs);
            return seg_loss(lps, labels, ts, w).value;
          },
          params[k]->value);
      track("tcn_backward", relative_error(grads.grads[k], fd),
            "seed " + std::to_string(seed) + " param " + std::to_string(k));
    }
  }

  std::ostringstream s;
  s << "max rel err:";
  for (const auto& [name, err] : worst) s << " " << name << "=" << sci(err);
  s << " (tol " << sci(kGradTol) << "); " << checks.summary();
  return {checks.ok(), s.str()};
}

// ---------------------------------------------------------------------------
// 2. Normalized adjacency invariants

Outcome graph_invariants() {
  Checks checks;
  Rng rng(8100);
  double worst_sym = 0, worst_rebuild = 0;
  std::size_t graphs = 0;
  for (std::size_t window : {3, 7, 17, 31})
    for (EdgeMode mode : {EdgeMode::binary, EdgeMode::weighted})
      for (int set = 0; set < 50; ++set) {
        const std::size_t t = 1 + rng.index(0, 79), d = 2 + rng.index(0, 14);
        const Matrix x = test::random_matrix(t, d, rng);
        const TemporalGraph g = build_graph(x, window, mode);
        const Matrix& a = g.norm_adj;
        const std::string where = "w=" + std::to_string(window) + " set " + std::to_string(set);
        ++graphs;
        checks.require(a.rows() == t && a.cols() == t, where + " shape");
        if (a.rows() != t || a.cols() != t) continue;
        const Matrix expect = oracle::adj_tilde(x, window, mode);
        std::vector<double> deg(t, 0);
        for (std::size_t i = 0; i < t; ++i)
          for (std::size_t j = 0; j < t; ++j) deg[i] += expect(i, j);
        bool range = true, band = true;
        double sym = 0, rebuild = 0;
        for (std::size_t i = 0; i < t; ++i)
          for (std::size_t j = 0; j < t; ++j) {
            sym = std::max(sym, std::abs(static_cast<double>(a(i, j)) - a(j, i)));
            range = range && a(i, j) >= 0 && a(i, j) <= 1;
            const std::size_t gap = i > j ? i - j : j - i;
            if (gap > (window - 1) / 2) band = band && a(i, j) == 0;
            rebuild = std::max(rebuild, std::abs(std::sqrt(deg[i]) * a(i, j) * std::sqrt(deg[j]) - expect(i, j)));
          }
        worst_sym = std::max(worst_sym, sym);
        worst_rebuild = std::max(worst_rebuild, rebuild);
        checks.require(sym <= 1e-9, where + " asymmetric " + sci(sym));
        checks.require(range, where + " entry outside [0,1]");
        checks.require(band, where + " nonzero outside band");
        checks.require(rebuild <= 1e-9, where + " reconstruction " + sci(rebuild));
      }
  return {checks.ok(), std::to_string(graphs) + " graphs; max asymmetry " + sci(worst_sym) +
                           ", max reconstruction err " + sci(worst_rebuild) + "; " + checks.summary()};
}

// ---------------------------------------------------------------------------
// 3. Metrics against literal transcriptions

Labels random_segments(Rng& rng, std::size_t t, std::size_t c) {
  Labels y(t);
  int cur = static_cast<int>(rng.index(0, c - 1));
  for (auto& v : y) {
    if (rng.uniform() < 0.2) cur = static_cast<int>(rng.index(0, c - 1));
    v = cur;
  }
  return y;
}

Outcome metric_oracles() {
  Checks checks;
  Rng rng(8300);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t t = 1 + rng.index(0, 29), c = 1 + rng.index(0, 3);
    const Labels g = random_segments(rng, t, c);
    Labels p = random_segments(rng, t, c);
    if (trial % 2) {  // a perturbed copy of gt so that matches are common
      p = g;
      for (auto& v : p)
        if (rng.uniform() < 0.15) v = static_cast<int>(rng.index(0, c - 1));
    }
    const std::string where = "trial " + std::to_string(trial);

    const double acc = accuracy(p, g), acc_o = oracle::accuracy(p, g);
    worst = std::max(worst, std::abs(acc - acc_o));
    checks.require(std::abs(acc - acc_o) <= 1e-9, where + " accuracy");

    const auto pc = oracle::classes_of(p), gc = oracle::classes_of(g);
    const double denom = static_cast<double>(std::max(pc.size(), gc.size()));
    const double edit = edit_score(p, g);
    const auto lev = static_cast<long>(std::lround((1 - edit / 100) * denom));
    checks.require(lev == static_cast<long>(oracle::levenshtein(pc, gc)), where + " edit distance");
    worst = std::max(worst, std::abs(edit - oracle::edit(p, g)));
    checks.require(std::abs(edit - oracle::edit(p, g)) <= 1e-9, where + " edit score");

    for (double thr : kF1Thresholds) {
      const F1Counts k = f1_counts(p, g, thr);
      const oracle::Counts ko = oracle::f1_counts(p, g, thr);
      checks.require(k.tp == ko.tp && k.fp == ko.fp && k.fn == ko.fn, where + " F1 counts @" + fmt(thr, 2));
      const double f = f1_at(p, g, thr), fo = oracle::f1(p, g, thr);
      worst = std::max(worst, std::abs(f - fo));
      checks.require(std::abs(f - fo) <= 1e-9, where + " F1 @" + fmt(thr, 2));
    }
    // Perfect predictions.
    checks.require(accuracy(g, g) == 100 && edit_score(g, g) == 100, where + " perfect acc/edit");
    for (double thr : kF1Thresholds) checks.require(f1_at(g, g, thr) == 100, where + " perfect F1");
  }
  return {checks.ok(), "1000 instances; max |lib - oracle| " + sci(worst) + "; " + checks.summary()};
}

// ---------------------------------------------------------------------------
// 4. Loss worked examples

Matrix log_of(const Matrix& probs) {
  Matrix out = probs;
  for (auto& x : out.values()) x = std::log(x);
  return out;
}

Outcome loss_examples() {
  Checks checks;
  std::ostringstream s;
  const double ce = class_loss(log_of(Matrix{{0.9, 0.1}, {0.2, 0.8}}), Labels{0, 1}).value;
  checks.require(std::abs(ce - 0.1643) <= 1e-3, "class example " + fmt(ce));
  const double uni = class_loss(Matrix(3, 4, -std::log(4.0)), Labels{0, 3, 2}).value;
  checks.require(std::abs(uni - 1.3863) <= 1e-3, "uniform class example " + fmt(uni));
  const double sm = smooth_loss(log_of(Matrix{{0.5, 0.5}, {0.9, 0.1}}), 4).value;
  checks.require(std::abs(sm - 0.7339) <= 1e-3, "smooth example " + fmt(sm));

  // One flipped row between timestamps at frames 1 and 4 (T' = 6).
  Matrix probs(4, 3, 1.0 / 3);
  probs(1, 0) = 0.5;
  probs(1, 2) = 1.0 / 6;
  const TimestampAnnotation ts{{0, 0}, {3, 1}};
  const double conf = conf_loss(log_of(probs), ts).value;
  const double conf_o = oracle::conf_loss(log_of(probs), ts);
  checks.require(std::abs(conf - std::log(1.5) / 6) <= 1e-3, "conf example " + fmt(conf));
  checks.require(std::abs(conf - conf_o) <= 1e-9, "conf vs literal loop");
  checks.require(conf_loss(log_of(probs), {{2, 1}}).value == 0, "single timestamp conf");

  // Composite weights.
  Rng rng(8400);
  const Matrix lp = row_log_softmax(test::random_matrix(9, 3, rng, -2, 2));
  const TimestampAnnotation ts9{{1, 0}, {4, 2}, {7, 1}};
  const Labels labels = sparse_labels(ts9, 9);
  const std::vector<Matrix> one{lp};
  const double composite = seg_loss(one, labels, ts9, {}).value;
  const double parts = class_loss(lp, labels).value + 0.15 * smooth_loss(lp, 4).value + 0.075 * conf_loss(lp, ts9).value;
  checks.require(std::abs(composite - parts) <= 1e-9, "composite vs parts");
  checks.require(std::abs(seg_loss(one, labels, ts9, {.alpha = 0, .beta = 0}).value - class_loss(lp, labels).value) <=
                     1e-12,
                 "alpha = beta = 0");
  checks.require(std::abs(graph_loss(lp, labels, {}).value - seg_loss(one, labels, ts9, {.beta = 0}).value) <= 1e-12,
                 "graph_loss = seg_loss with beta 0");

  s << "class " << fmt(ce) << " (0.1643), smooth " << fmt(sm) << " (0.7339), conf " << fmt(conf) << " (ln1.5/6 = "
    << fmt(std::log(1.5) / 6) << "), composite diff " << sci(std::abs(composite - parts)) << "; " << checks.summary();
  return {checks.ok(), s.str()};
}

// ---------------------------------------------------------------------------
// 5 and 6. Desk-scale training trends

Dataset synthetic(std::uint64_t seed, std::size_t blur, const fs::path& dir) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.boundary_blur = blur;
  write_dataset(synth_dataset(cfg).dataset, dir);
  return load_dataset(dir / "manifest.json");
}

struct RunSummary {
  double acc = 0;
  double mean_label_acc = 0;
  double seconds = 0;
};

RunSummary train_once(const Dataset& ds, ScheduleConfig cfg) {
  const auto start = Clock::now();
  RunRecord record;
  run(cfg, ds, record);
  RunSummary s;
  s.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  const std::string split = evaluation_split(ds);
  for (const auto& [name, report] : record.final_metrics)
    if (name == split) s.acc = report.acc;
  double sum = 0;
  for (double a : record.label_accuracy) sum += a;
  if (!record.label_accuracy.empty()) s.mean_label_acc = sum / static_cast<double>(record.label_accuracy.size());
  return s;
}

Outcome schedule_trend() {
  struct Schedule {
    std::size_t init, refine;
    double acc_sum = 0;
  };
  std::vector<Schedule> schedules{{30, 20}, {50, 0}, {0, 50}};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  test::TempDir tmp("accept_c5");
  for (std::uint64_t seed : seeds) {
    const Dataset ds = synthetic(seed, 3, tmp.path() / ("seed" + std::to_string(seed)));
    for (Schedule& sch : schedules) {
      ScheduleConfig cfg = desk_preset();
      cfg.seed = seed;
      cfg.init_epochs = sch.init;
      cfg.refine_iters = sch.refine;
      const RunSummary r = train_once(ds, cfg);
      sch.acc_sum += r.acc;
      progress("seed " + std::to_string(seed) + " schedule(" + std::to_string(sch.init) + "," +
               std::to_string(sch.refine) + "): Acc " + fmt(r.acc, 2) + " [" + fmt(r.seconds, 1) + " s]");
    }
  }
  const double n = static_cast<double>(seeds.size());
  const double joint = schedules[0].acc_sum / n, init_only = schedules[1].acc_sum / n,
               refine_only = schedules[2].acc_sum / n;
  const bool pass = joint > init_only && joint > refine_only && joint >= 90;
  return {pass, "mean Acc over 3 seeds: (30,20) " + fmt(joint, 2) + ", (50,0) " + fmt(init_only, 2) + ", (0,50) " +
                    fmt(refine_only, 2) + "; need (30,20) above both and >= 90"};
}

Outcome gcn_vs_mlp() {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double gcn_sum = 0, mlp_sum = 0;
  test::TempDir tmp("accept_c6");
  for (std::uint64_t seed : seeds) {
    const Dataset ds = synthetic(seed, 5, tmp.path() / ("seed" + std::to_string(seed)));
    for (GcnVariant variant : {GcnVariant::gcn, GcnVariant::mlp}) {
      ScheduleConfig cfg = desk_preset();
      cfg.seed = seed;
      cfg.gcn_variant = variant;
      const RunSummary r = train_once(ds, cfg);
      (variant == GcnVariant::gcn ? gcn_sum : mlp_sum) += r.mean_label_acc;
      progress("seed " + std::to_string(seed) + " " + (variant == GcnVariant::gcn ? "gcn" : "mlp") +
               ": mean generated-label Acc " + fmt(r.mean_label_acc, 2) + ", final Acc " + fmt(r.acc, 2) + " [" +
               fmt(r.seconds, 1) + " s]");
    }
  }
  const double n = static_cast<double>(seeds.size());
  return {gcn_sum / n > mlp_sum / n, "generated-label Acc vs gt, mean over refinement iterations and 5 seeds: gcn " +
                                         fmt(gcn_sum / n, 2) + ", mlp " + fmt(mlp_sum / n, 2)};
}

// ---------------------------------------------------------------------------
// 7. Determinism through the CLI

Outcome determinism() {
  Checks checks;
  test::TempDir tmp("accept_c7");
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  const fs::path data = tmp.path() / "data";
  const auto synth = test::run_cli("synth --out " + q(data) + " --seed 11", tmp.path());
  checks.require(synth.code == 0, "synth exit " + std::to_string(synth.code));
  for (const char* name : {"a", "b"}) {
    const auto r = test::run_cli("train --manifest " + q(data / "manifest.json") + " --out " + q(tmp.path() / name) +
                                     " --preset desk --seed 11 --no-timestamps",
                                 tmp.path());
    checks.require(r.code == 0, std::string("train ") + name + " exit " + std::to_string(r.code) + ": " + r.err);
  }
  std::size_t bytes = 0;
  for (const char* file : {"segmenter.tstc", "gcn.tsgc", "run_record.txt", "metrics.csv"}) {
    const std::string a = test::slurp(tmp.path() / "a" / file), b = test::slurp(tmp.path() / "b" / file);
    checks.require(!a.empty(), std::string(file) + " missing");
    checks.require(a == b, std::string(file) + " differs");
    bytes += a.size();
  }
  return {checks.ok(), "two seeded desk runs, " + std::to_string(bytes) + " bytes compared; " + checks.summary()};
}

// ---------------------------------------------------------------------------
// 8. File formats

struct FuzzTally {
  std::size_t rejected = 0, accepted = 0;
  std::string text() const { return std::to_string(rejected) + "/" + std::to_string(rejected + accepted); }
};

// Every mutation must either be rejected with a library error or decode to
// something that re-encodes to exactly the mutated bytes.
template <class Decode, class Encode>
void fuzz(const std::string& name, const std::vector<std::uint8_t>& good, std::size_t header, Decode decode,
          Encode encode, Rng& rng, Checks& checks, std::vector<std::string>& report) {
  FuzzTally trunc, header_flip, body_flip;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::uint8_t> bytes = good;
    const bool truncate = i % 2 == 0;
    std::size_t pos = 0;
    if (truncate) {
      bytes.resize(static_cast<std::size_t>(rng.index(0, good.size() - 1)));
    } else {
      // Half of the flips land in the header.
      pos = static_cast<std::size_t>(i % 4 == 1 ? rng.index(0, header - 1) : rng.index(0, good.size() - 1));
      bytes[pos] ^= static_cast<std::uint8_t>(1u << rng.index(0, 7));
    }
    FuzzTally& tally = truncate ? trunc : pos < header ? header_flip : body_flip;
    try {
      const auto decoded = decode(bytes);
      ++tally.accepted;
      checks.require(!truncate, name + ": truncation to " + std::to_string(bytes.size()) + " bytes accepted");
      checks.require(encode(decoded) == bytes, name + ": accepted mutation does not round-trip");
    } catch (const Error&) {
      ++tally.rejected;
    } catch (const std::exception& e) {
      checks.require(false, name + ": non-format exception " + e.what());
    }
  }
  report.push_back(name + ": truncations rejected " + trunc.text() + ", header flips rejected " +
                   header_flip.text() + ", payload flips rejected " + body_flip.text());
}

Outcome format_round_trips() {
  Checks checks;
  Rng rng(8800);
  test::TempDir tmp("accept_c8");
  const fs::path dir = tmp.path();
  const auto same_bytes = [&](const fs::path& a, const fs::path& b, const std::string& what) {
    checks.require(!test::slurp(a).empty() && test::slurp(a) == test::slurp(b), what + " not byte-identical");
  };

  // write -> read -> write for every file kind.
  const Matrix feats = test::random_matrix(37, 11, rng, -5, 5);
  write_features({"v", feats}, dir / "a.feat");
  write_features(read_features(dir / "a.feat"), dir / "b.feat");
  same_bytes(dir / "a.feat", dir / "b.feat", "features");

  TcnParams tcn = tcn_init({.num_stages = 2, .layers_per_stage = 3, .num_feature_maps = 8, .input_dim = 11,
                            .num_classes = 4},
                           5);
  save_tcn(tcn, dir / "a.tstc");
  save_tcn(load_tcn(dir / "a.tstc"), dir / "b.tstc");
  same_bytes(dir / "a.tstc", dir / "b.tstc", "segmenter checkpoint");

  std::vector<std::vector<std::uint8_t>> gcn_bytes;
  for (GcnVariant v : {GcnVariant::gcn, GcnVariant::mlp}) {
    const GcnParams gcn = gcn_init(8, 6, 4, v, 9);
    save_gcn(gcn, dir / "a.tsgc");
    save_gcn(load_gcn(dir / "a.tsgc"), dir / "b.tsgc");
    same_bytes(dir / "a.tsgc", dir / "b.tsgc", "GCN checkpoint");
    gcn_bytes.push_back(encode_gcn(gcn));
  }

  Labels labels(50);
  for (auto& y : labels) y = static_cast<int>(rng.index(0, 3));
  write_labels(labels, dir / "a.labels.txt");
  write_labels(read_labels(dir / "a.labels.txt"), dir / "b.labels.txt");
  same_bytes(dir / "a.labels.txt", dir / "b.labels.txt", "labels");
  const TimestampAnnotation ts{{0, 1}, {9, 2}, {30, 0}};
  write_timestamps(ts, dir / "a.ts.txt");
  write_timestamps(read_timestamps(dir / "a.ts.txt"), dir / "b.ts.txt");
  same_bytes(dir / "a.ts.txt", dir / "b.ts.txt", "timestamps");

  std::vector<std::string> report;
  fuzz("features", encode_features(feats), 16, [](auto b) { return decode_features(std::move(b)); },
       [](const Matrix& m) { return encode_features(m); }, rng, checks, report);
  fuzz("segmenter", encode_tcn(tcn), 28, [](auto b) { return decode_tcn(std::move(b)); },
       [](const TcnParams& p) { return encode_tcn(p); }, rng, checks, report);
  fuzz("gcn", gcn_bytes[0], 21, [](auto b) { return decode_gcn(std::move(b)); },
       [](const GcnParams& p) { return encode_gcn(p); }, rng, checks, report);

  std::ostringstream s;
  s << "round-trips ok for features, checkpoints, labels, timestamps;";
  for (const auto& r : report) s << " " << r << ";";
  s << " " << checks.summary();
  return {checks.ok(), s.str()};
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::set<int> selected() {
  std::set<int> out;
  if (const char* env = std::getenv("TSSEG_ACCEPTANCE")) {
    std::stringstream s(env);
    std::string item;
    while (std::getline(s, item, ','))
      if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "gradient suite", 60, gradient_suite},
      {2, "graph invariants", 10, graph_invariants},
      {3, "metric oracle equivalence", 30, metric_oracles},
      {4, "loss worked examples", 0, loss_examples},
      {5, "schedule trend (30,20) vs (50,0) vs (0,50)", 15 * 60, schedule_trend},
      {6, "GCN vs MLP label generation", 10 * 60, gcn_vs_mlp},
      {7, "CLI training determinism", 0, determinism},
      {8, "format round-trips and fuzzing", 0, format_round_trips},
  };
  const std::set<int> only = selected();
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::cerr << "[" << c.id << "] " << c.name << std::endl;
    const auto start = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      out.pass = false;
      out.detail += "; over the " + fmt(c.budget_seconds, 0) + " s budget";
    }
    failures += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << fmt(secs, 1)
              << " s): " << out.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
