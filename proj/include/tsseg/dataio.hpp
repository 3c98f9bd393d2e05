#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsseg/annotation.hpp"
#include "tsseg/matrix.hpp"

namespace tsseg {

struct FeatureSequence {
  std::string video_id;
  Matrix frames;  // T x D
};

// Feature file: "TSAF", u32 version = 1, u32 T, u32 D, then T*D float32
// row-major, all little-endian. Values are stored at 32-bit precision.
std::vector<std::uint8_t> encode_features(const Matrix& frames);
Matrix decode_features(std::vector<std::uint8_t> bytes);
void write_features(const FeatureSequence& seq, const std::filesystem::path& path);
FeatureSequence read_features(const std::filesystem::path& path);

/// Rounds every entry to float32, the precision features are stored at.
Matrix quantize_to_f32(const Matrix& m);

/// One integer class id per line.
void write_labels(const Labels& labels, const std::filesystem::path& path);
Labels read_labels(const std::filesystem::path& path);

/// `frame,class` lines with 1-based frames.
void write_timestamps(const TimestampAnnotation& ts, const std::filesystem::path& path);
TimestampAnnotation read_timestamps(const std::filesystem::path& path);

/// Checks strictly increasing frames inside [0, num_frames) and labels in
/// [0, num_classes). Throws AnnotationError.
void validate_timestamps(const TimestampAnnotation& ts, std::size_t num_frames, std::size_t num_classes);

/// One uniformly drawn frame per ground-truth segment, labeled with that
/// segment's class.
TimestampAnnotation sample_timestamps(const Labels& gt, std::uint64_t seed);

struct ManifestEntry {
  std::string id;
  std::string features;    // relative to the manifest directory
  std::string labels;      // optional ground truth
  std::string timestamps;  // optional; derivable from ground truth
  std::string split = "train";
};

struct DatasetManifest {
  std::string name;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::size_t feature_dim = 0;  // 0 means "take it from the files"
  std::vector<ManifestEntry> videos;
  std::filesystem::path root;   // directory holding the manifest
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct Video {
  std::string id;
  std::string split = "train";
  Matrix features;
  std::optional<Labels> gt;
  TimestampAnnotation timestamps;
};

struct Dataset {
  std::string name;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::vector<std::string> class_names;
  std::vector<Video> videos;

  std::vector<const Video*> split(const std::string& name) const;
};

/// Loads and cross-validates every file named by the manifest. Videos
/// without a timestamp file get timestamps sampled from their ground truth
/// when `sample_seed` is set (seed + video index) and are left empty
/// otherwise; training rejects empty annotations, evaluation ignores them.
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     std::optional<std::uint64_t> sample_seed = std::nullopt);

struct SynthConfig {
  std::size_t num_videos = 20;
  std::size_t num_classes = 5;
  std::size_t feature_dim = 64;
  std::pair<std::size_t, std::size_t> segment_len_range = {20, 60};
  std::pair<std::size_t, std::size_t> segments_per_video = {3, 6};
  double noise_sigma = 0.4;
  std::size_t boundary_blur = 3;
  std::uint64_t seed = 0;
};

struct SynthResult {
  Dataset dataset;
  Matrix class_means;  // C x D, unit rows
};

/// Class means are unit vectors with pairwise cosine < 0.3. Each video is a
/// chain of segments (adjacent classes differ); frames are the class mean plus
/// Gaussian noise, and frames within `boundary_blur` of a boundary use a
/// linear blend of the two neighbouring means. Timestamps are sampled from the
/// ground truth with the same seed.
SynthResult synth_dataset(const SynthConfig& config);

/// Writes features, labels, timestamps and manifest.json into `dir`.
DatasetManifest write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace tsseg
