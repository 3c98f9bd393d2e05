#include "tsseg/dataio.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tsseg/binary_io.hpp"
#include "tsseg/metrics.hpp"
#include "tsseg/rng.hpp"

namespace tsseg {
namespace {

constexpr char kFeatureMagic[] = "TSAF";
constexpr std::uint32_t kFeatureVersion = 1;

std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

// Parses a whole line as a base-10 int; rejects trailing junk.
int parse_int(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < s.size() && (s[used] == ' ' || s[used] == '\r' || s[used] == '\t')) ++used;
  if (used != s.size() || s.empty() || v < INT32_MIN || v > INT32_MAX)
    throw DataError(path.string() + ":" + std::to_string(line) + ": expected an integer, got \"" + s + "\"");
  return static_cast<int>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_features(const Matrix& frames) {
  if (frames.rows() == 0 || frames.cols() == 0) throw ShapeError("features must have T >= 1 and D >= 1");
  binio::Writer w;
  w.magic({kFeatureMagic, 4});
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(frames.rows()));
  w.u32(static_cast<std::uint32_t>(frames.cols()));
  for (Real x : frames.values()) w.f32(static_cast<float>(x));
  return w.bytes();
}

Matrix decode_features(std::vector<std::uint8_t> bytes) {
  binio::Reader r(std::move(bytes));
  r.expect_magic({kFeatureMagic, 4});
  std::size_t at = r.offset();
  if (const auto v = r.u32(); v != kFeatureVersion)
    throw FormatError("unsupported feature file version " + std::to_string(v), at);
  at = r.offset();
  const std::uint32_t t = r.u32();
  if (t == 0) throw FormatError("feature file declares T = 0", at);
  at = r.offset();
  const std::uint32_t d = r.u32();
  if (d == 0) throw FormatError("feature file declares D = 0", at);
  r.require_remaining(static_cast<std::uint64_t>(t) * d, 4, "feature payload");
  Matrix m(t, d);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::size_t off = r.offset();
    const float x = r.f32();
    if (!std::isfinite(x)) throw FormatError("non-finite feature value", off);
    m[i] = static_cast<Real>(x);
  }
  r.expect_end();
  return m;
}

void write_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  binio::write_file(path, encode_features(seq.frames));
}

FeatureSequence read_features(const std::filesystem::path& path) {
  return {path.stem().string(), decode_features(binio::read_file(path))};
}

Matrix quantize_to_f32(const Matrix& m) {
  Matrix q = m;
  for (auto& x : q.values()) x = static_cast<Real>(static_cast<float>(x));
  return q;
}

void write_labels(const Labels& labels, const std::filesystem::path& path) {
  auto out = open_text(path);
  for (int y : labels) out << y << '\n';
}

Labels read_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  Labels out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    out.push_back(parse_int(line, path, n));
  }
  return out;
}

void write_timestamps(const TimestampAnnotation& ts, const std::filesystem::path& path) {
  auto out = open_text(path);
  for (const auto& t : ts) out << (t.frame + 1) << ',' << t.label << '\n';
}

TimestampAnnotation read_timestamps(const std::filesystem::path& path) {
  auto in = open_input(path);
  TimestampAnnotation out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(n) + ": expected frame,class");
    const int frame = parse_int(line.substr(0, comma), path, n);
    const int label = parse_int(line.substr(comma + 1), path, n);
    if (frame < 1) throw DataError(path.string() + ":" + std::to_string(n) + ": frames are 1-based");
    out.push_back({static_cast<std::size_t>(frame - 1), label});
  }
  return out;
}

void validate_timestamps(const TimestampAnnotation& ts, std::size_t num_frames, std::size_t num_classes) {
  if (ts.empty()) throw AnnotationError("no timestamps");
  if (ts.size() > num_frames) throw AnnotationError("more timestamps than frames");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].frame >= num_frames)
      throw AnnotationError("timestamp frame " + std::to_string(ts[i].frame + 1) + " beyond video length " +
                            std::to_string(num_frames));
    if (ts[i].label < 0 || static_cast<std::size_t>(ts[i].label) >= num_classes)
      throw AnnotationError("timestamp class " + std::to_string(ts[i].label) + " out of range");
    if (i > 0 && ts[i].frame <= ts[i - 1].frame)
      throw AnnotationError("timestamp frames must be strictly increasing");
  }
}

TimestampAnnotation sample_timestamps(const Labels& gt, std::uint64_t seed) {
  Rng rng(seed);
  TimestampAnnotation out;
  for (const Segment& s : segments_from_labels(gt)) {
    const auto frame = rng.index(static_cast<std::int64_t>(s.start), static_cast<std::int64_t>(s.end));
    out.push_back({static_cast<std::size_t>(frame), s.label});
  }
  return out;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.root = path.parent_path();
  try {
    m.name = j.value("dataset", std::string{});
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.class_names = j.value("class_names", std::vector<std::string>{});
    m.feature_dim = j.value("feature_dim", std::size_t{0});
    for (const auto& v : j.at("videos")) {
      ManifestEntry e;
      e.id = v.at("id").get<std::string>();
      e.features = v.at("features").get<std::string>();
      e.labels = v.value("labels", std::string{});
      e.timestamps = v.value("timestamps", std::string{});
      e.split = v.value("split", std::string{"train"});
      m.videos.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  if (m.num_classes == 0) throw DataError("manifest " + path.string() + ": num_classes must be >= 1");
  if (!m.class_names.empty() && m.class_names.size() != m.num_classes)
    throw DataError("manifest " + path.string() + ": class_names length differs from num_classes");
  if (m.videos.empty()) throw DataError("manifest " + path.string() + ": no videos");
  return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["dataset"] = m.name;
  j["num_classes"] = m.num_classes;
  j["class_names"] = m.class_names;
  j["feature_dim"] = m.feature_dim;
  auto videos = nlohmann::ordered_json::array();
  for (const auto& e : m.videos) {
    nlohmann::ordered_json v;
    v["id"] = e.id;
    v["features"] = e.features;
    if (!e.labels.empty()) v["labels"] = e.labels;
    if (!e.timestamps.empty()) v["timestamps"] = e.timestamps;
    v["split"] = e.split;
    videos.push_back(std::move(v));
  }
  j["videos"] = std::move(videos);
  auto out = open_text(path);
  out << j.dump(2) << '\n';
}

std::vector<const Video*> Dataset::split(const std::string& name) const {
  std::vector<const Video*> out;
  for (const auto& v : videos)
    if (v.split == name) out.push_back(&v);
  return out;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, std::optional<std::uint64_t> sample_seed) {
  const DatasetManifest m = read_manifest(manifest_path);
  Dataset ds;
  ds.name = m.name;
  ds.num_classes = m.num_classes;
  ds.class_names = m.class_names;
  ds.feature_dim = m.feature_dim;
  for (std::size_t i = 0; i < m.videos.size(); ++i) {
    const ManifestEntry& e = m.videos[i];
    Video v;
    v.id = e.id;
    v.split = e.split;
    v.features = read_features(m.root / e.features).frames;
    const std::size_t t = v.features.rows();
    if (ds.feature_dim == 0) ds.feature_dim = v.features.cols();
    if (v.features.cols() != ds.feature_dim)
      throw DataError("video " + e.id + ": feature dimension " + std::to_string(v.features.cols()) +
                      " differs from dataset dimension " + std::to_string(ds.feature_dim));
    if (!e.labels.empty()) {
      Labels gt = read_labels(m.root / e.labels);
      if (gt.size() != t)
        throw DataError("video " + e.id + ": " + std::to_string(gt.size()) + " labels for " +
                        std::to_string(t) + " frames");
      for (int y : gt)
        if (y < 0 || static_cast<std::size_t>(y) >= ds.num_classes)
          throw DataError("video " + e.id + ": label " + std::to_string(y) + " out of range");
      v.gt = std::move(gt);
    }
    if (!e.timestamps.empty()) {
      v.timestamps = read_timestamps(m.root / e.timestamps);
    } else if (sample_seed && v.gt) {
      v.timestamps = sample_timestamps(*v.gt, *sample_seed + i);
    }
    if (!v.timestamps.empty()) {
      try {
        validate_timestamps(v.timestamps, t, ds.num_classes);
      } catch (const AnnotationError& err) {
        throw DataError("video " + e.id + ": " + err.what());
      }
    }
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

DatasetManifest write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.name = ds.name;
  m.num_classes = ds.num_classes;
  m.class_names = ds.class_names;
  m.feature_dim = ds.feature_dim;
  m.root = dir;
  for (const auto& v : ds.videos) {
    ManifestEntry e;
    e.id = v.id;
    e.split = v.split;
    e.features = v.id + ".feat";
    write_features({v.id, v.features}, dir / e.features);
    if (v.gt) {
      e.labels = v.id + ".labels.txt";
      write_labels(*v.gt, dir / e.labels);
    }
    if (!v.timestamps.empty()) {
      e.timestamps = v.id + ".timestamps.txt";
      write_timestamps(v.timestamps, dir / e.timestamps);
    }
    m.videos.push_back(std::move(e));
  }
  write_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace tsseg
