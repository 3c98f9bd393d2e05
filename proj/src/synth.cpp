#include <cmath>
#include <string>

#include "tsseg/dataio.hpp"
#include "tsseg/rng.hpp"

namespace tsseg {
namespace {

constexpr int kMaxMeanAttempts = 1000;
constexpr double kMaxCosine = 0.3;

Matrix draw_class_means(std::size_t classes, std::size_t dim, Rng& rng) {
  Matrix means(classes, dim);
  std::vector<double> v(dim);
  for (std::size_t c = 0; c < classes; ++c) {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxMeanAttempts && !accepted; ++attempt) {
      double norm = 0;
      for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      if (norm < 1e-12) continue;
      for (auto& x : v) x /= norm;
      accepted = true;
      for (std::size_t prev = 0; prev < c && accepted; ++prev) {
        double dot = 0;
        for (std::size_t k = 0; k < dim; ++k) dot += v[k] * means(prev, k);
        accepted = dot < kMaxCosine;
      }
    }
    if (!accepted)
      throw ConfigError("synth: could not place " + std::to_string(classes) + " class means in " +
                        std::to_string(dim) + " dimensions with pairwise cosine < 0.3");
    for (std::size_t k = 0; k < dim; ++k) means(c, k) = static_cast<Real>(v[k]);
  }
  return means;
}

}  // namespace

SynthResult synth_dataset(const SynthConfig& cfg) {
  if (cfg.num_videos == 0 || cfg.num_classes == 0 || cfg.feature_dim == 0)
    throw ConfigError("synth: videos, classes and feature dim must be >= 1");
  const auto [len_lo, len_hi] = cfg.segment_len_range;
  const auto [seg_lo, seg_hi] = cfg.segments_per_video;
  if (len_lo == 0 || len_hi < len_lo) throw ConfigError("synth: invalid segment length range");
  if (seg_lo == 0 || seg_hi < seg_lo) throw ConfigError("synth: invalid segments-per-video range");
  if (cfg.num_classes == 1 && seg_hi > 1)
    throw ConfigError("synth: a single class cannot form multi-segment videos");
  if (!(cfg.noise_sigma >= 0)) throw ConfigError("synth: noise sigma must be >= 0");

  Rng rng(cfg.seed);
  SynthResult out;
  out.class_means = draw_class_means(cfg.num_classes, cfg.feature_dim, rng);
  Dataset& ds = out.dataset;
  ds.name = "synthetic";
  ds.num_classes = cfg.num_classes;
  ds.feature_dim = cfg.feature_dim;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) ds.class_names.push_back("action" + std::to_string(c));

  const std::size_t d = cfg.feature_dim;
  const double blur = static_cast<double>(cfg.boundary_blur);
  for (std::size_t vi = 0; vi < cfg.num_videos; ++vi) {
    const auto n_segments = static_cast<std::size_t>(
        rng.index(static_cast<std::int64_t>(seg_lo), static_cast<std::int64_t>(seg_hi)));
    Labels gt;
    std::vector<std::size_t> starts;  // first frame of every segment after the first
    int prev = -1;
    for (std::size_t s = 0; s < n_segments; ++s) {
      int label;
      do {
        label = static_cast<int>(rng.index(0, static_cast<std::int64_t>(cfg.num_classes) - 1));
      } while (label == prev);
      const auto len = static_cast<std::size_t>(
          rng.index(static_cast<std::int64_t>(len_lo), static_cast<std::int64_t>(len_hi)));
      if (s > 0) starts.push_back(gt.size());
      gt.insert(gt.end(), len, label);
      prev = label;
    }

    const std::size_t t_len = gt.size();
    Matrix frames(t_len, d);
    for (std::size_t t = 0; t < t_len; ++t) {
      // Blend weight toward the right-hand class of the nearest boundary.
      int left = gt[t], right = gt[t];
      double w = 0;
      if (cfg.boundary_blur > 0 && !starts.empty()) {
        std::size_t best = starts.front();
        for (std::size_t b : starts)
          if (std::abs(static_cast<double>(t) - (b - 0.5)) < std::abs(static_cast<double>(t) - (best - 0.5)))
            best = b;
        const double offset = static_cast<double>(t) - static_cast<double>(best);  // -1 is last left frame
        if (offset >= -blur && offset < blur) {
          left = gt[best - 1];
          right = gt[best];
          w = (offset + blur + 0.5) / (2.0 * blur);
        }
      }
      for (std::size_t k = 0; k < d; ++k) {
        const double mean = (1.0 - w) * out.class_means(left, k) + w * out.class_means(right, k);
        frames(t, k) = static_cast<Real>(static_cast<float>(mean + cfg.noise_sigma * rng.normal()));
      }
    }

    Video v;
    char id[32];
    std::snprintf(id, sizeof id, "video_%03zu", vi);
    v.id = id;
    v.features = std::move(frames);
    v.timestamps = sample_timestamps(gt, cfg.seed * 0x9E3779B97F4A7C15ULL + vi + 1);
    v.gt = std::move(gt);
    ds.videos.push_back(std::move(v));
  }
  return out;
}

}  // namespace tsseg
