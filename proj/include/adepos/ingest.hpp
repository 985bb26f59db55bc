#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "adepos/kv_file.hpp"

namespace adepos {

// One raw vibration snapshot: the samples of a single accelerometer channel.
struct SampleWindow {
  std::vector<double> samples;
  double rate = 1.0;           // samples per second
  std::int64_t timestamp = 0;  // monotone window index within a bearing stream
  std::string bearing_id;
  int channel = 0;
};

// Column layout of a snapshot file: whitespace- or single-char-delimited
// numeric columns, one sample per row.
struct SnapshotLayout {
  char delimiter = '\0';  // '\0' = any whitespace run
  int columns = 1;
};

// Synthetic degradation trace: bounded healthy texture wander until
// `onset`, then amplitude and impulsiveness ramp linearly per window.
struct SynthSpec {
  int windows = 400;
  int onset = 400;  // == windows means the trace never degrades
  int samples_per_window = 512;
  double rate = 20480.0;
  double amplitude_growth = 0.0;    // relative amplitude gain per window past onset
  double impulsiveness_growth = 0.0;  // impulse magnitude gain per window past onset
  double noise_floor = 1.0;
  std::uint64_t seed = 1;
};

inline void validate(const SynthSpec& s) {
  if (s.windows <= 0) throw std::invalid_argument("SynthSpec: windows must be positive");
  if (s.onset < 0 || s.onset > s.windows)
    throw std::invalid_argument("SynthSpec: onset must lie within the trace");
  if (s.samples_per_window < 4)
    throw std::invalid_argument("SynthSpec: need at least 4 samples per window");
  if (s.amplitude_growth < 0 || s.impulsiveness_growth < 0)
    throw std::invalid_argument("SynthSpec: growth rates must be >= 0");
  if (s.noise_floor <= 0) throw std::invalid_argument("SynthSpec: noise floor must be positive");
  if (s.rate <= 0) throw std::invalid_argument("SynthSpec: rate must be positive");
}

// One bearing in a manifest: either a directory of snapshot files or a
// synthetic trace spec. Labels: 1 = failed over its life, 0 = non-failing.
struct BearingEntry {
  std::string id;
  int label = 0;
  std::string dir;  // empty for synthetic bearings
  int channel = 0;
  std::optional<SynthSpec> synth;
};

struct BearingManifest {
  SnapshotLayout layout;
  double rate = 20480.0;
  std::vector<BearingEntry> bearings;

  const BearingEntry& find(const std::string& id) const {
    for (const auto& b : bearings)
      if (b.id == id) return b;
    throw std::runtime_error("unknown bearing id: " + id);
  }
  bool contains(const std::string& id) const {
    return std::any_of(bearings.begin(), bearings.end(),
                       [&](const BearingEntry& b) { return b.id == id; });
  }
};

namespace detail {

inline std::vector<std::string> split_columns(const std::string& line, char delim) {
  std::vector<std::string> tokens;
  if (delim == '\0') {
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
  } else {
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, delim)) tokens.push_back(trim(cur));
  }
  return tokens;
}

inline double parse_sample(const std::string& tok, const std::string& path, int lineno) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::runtime_error(path + ":" + std::to_string(lineno) +
                             ": malformed line (non-numeric token '" + tok + "')");
  if (!std::isfinite(v))
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": non-finite sample");
  return v;
}

}  // namespace detail

// Parses one snapshot file and keeps the selected column, in file order.
inline SampleWindow read_snapshot(const std::string& path, int channel,
                                  const SnapshotLayout& layout, double rate = 1.0) {
  if (channel < 0 || channel >= layout.columns)
    throw std::invalid_argument("read_snapshot: channel " + std::to_string(channel) +
                                " out of range for " + std::to_string(layout.columns) + " columns");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_snapshot: missing file: " + path);

  SampleWindow w;
  w.rate = rate;
  w.channel = channel;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto tokens = detail::split_columns(line, layout.delimiter);
    if (static_cast<int>(tokens.size()) != layout.columns)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(layout.columns) + " columns, got " +
                               std::to_string(tokens.size()));
    w.samples.push_back(detail::parse_sample(tokens[channel], path, lineno));
  }
  if (w.samples.empty()) throw std::runtime_error("read_snapshot: empty file: " + path);
  return w;
}

// Writes a single-channel window back in the declared layout (tests use this
// for parse round-trips; multi-column layouts pad unused columns with zeros).
inline void write_snapshot(const std::string& path, const SampleWindow& w,
                           const SnapshotLayout& layout, int precision = 9) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_snapshot: cannot open " + path);
  const char delim = layout.delimiter == '\0' ? '\t' : layout.delimiter;
  char buf[64];
  for (const double v : w.samples) {
    for (int c = 0; c < layout.columns; ++c) {
      if (c > 0) out << delim;
      std::snprintf(buf, sizeof buf, "%.*g", precision, c == w.channel ? v : 0.0);
      out << buf;
    }
    out << '\n';
  }
}

// Forward-only window stream; one bearing's stream is consumed sequentially.
class WindowSource {
 public:
  virtual ~WindowSource() = default;
  virtual std::optional<SampleWindow> next() = 0;
};

class FileWindowSource final : public WindowSource {
 public:
  FileWindowSource(const BearingEntry& entry, const SnapshotLayout& layout, double rate)
      : entry_(entry), layout_(layout), rate_(rate) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(entry.dir))
      throw std::runtime_error("bearing " + entry.id + ": directory not readable: " + entry.dir);
    for (const auto& e : fs::directory_iterator(entry.dir))
      if (e.is_regular_file()) files_.push_back(e.path().string());
    std::sort(files_.begin(), files_.end());  // timestamp-named files
    if (files_.empty())
      throw std::runtime_error("bearing " + entry.id + ": empty directory: " + entry.dir);
  }

  std::optional<SampleWindow> next() override {
    if (index_ >= files_.size()) return std::nullopt;
    SampleWindow w = read_snapshot(files_[index_], entry_.channel, layout_, rate_);
    w.timestamp = static_cast<std::int64_t>(index_);
    w.bearing_id = entry_.id;
    ++index_;
    return w;
  }

  std::size_t file_count() const { return files_.size(); }

 private:
  BearingEntry entry_;
  SnapshotLayout layout_;
  double rate_;
  std::vector<std::string> files_;
  std::size_t index_ = 0;
};

class SynthWindowSource final : public WindowSource {
 public:
  SynthWindowSource(const SynthSpec& spec, std::string bearing_id)
      : spec_(spec), bearing_id_(std::move(bearing_id)), rng_(spec.seed) {
    validate(spec_);
  }

  std::optional<SampleWindow> next() override {
    if (index_ >= spec_.windows) return std::nullopt;
    SampleWindow w;
    w.rate = spec_.rate;
    w.timestamp = index_;
    w.bearing_id = bearing_id_;
    w.channel = 0;
    w.samples.resize(spec_.samples_per_window);

    const double progress =
        index_ >= spec_.onset ? static_cast<double>(index_ - spec_.onset + 1) : 0.0;
    // Healthy texture wander. A machine never repeats the same window: the
    // operating point drifts, and level and waveform shape move together
    // with it. One bounded latent drives a gain (level), a power warp of
    // the sample magnitudes (peakedness) and a sign-probability bias
    // (asymmetry), so each of the five extracted features sweeps a healthy
    // range that is wide compared with its per-window sampling noise yet
    // strictly bounded. Without that, the feature cloud collapses to a
    // point and ordinary sampling noise turns into many-sigma outliers
    // after normalization; and any feature whose wander several records
    // never explore makes the lifetime maxima incomparable across
    // bearings.
    std::uniform_real_distribution<double> unit_sym(-1.0, 1.0);
    std::uniform_real_distribution<double> unit01(0.0, 1.0);
    const double op_point = unit_sym(rng_);
    const double gain = 1.0 - 0.1 * op_point;
    const double warp = 1.0 + 0.3 * op_point;
    const double pos_prob = 0.5 + 0.15 * op_point;
    const double amplitude =
        gain * spec_.noise_floor * (1.0 + spec_.amplitude_growth * progress);
    // sqrt(3) scales a unit uniform draw to unit variance at warp = 1.
    constexpr double kSqrt3 = 1.7320508075688772;
    for (auto& s : w.samples) {
      const double mag = std::pow(unit01(rng_), warp);
      const double sign = unit01(rng_) < pos_prob ? 1.0 : -1.0;
      s = amplitude * kSqrt3 * sign * mag;
    }

    // Growing defect impulses: sparse spikes whose magnitude ramps with wear.
    const double impulse =
        gain * spec_.noise_floor * spec_.impulsiveness_growth * progress;
    if (impulse > 0.0) {
      const int count = std::max(1, spec_.samples_per_window / 64);
      std::uniform_int_distribution<int> pos(0, spec_.samples_per_window - 1);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int i = 0; i < count; ++i) {
        const double sign = unit(rng_) < 0.5 ? -1.0 : 1.0;
        w.samples[pos(rng_)] += sign * impulse * (3.0 + 2.0 * unit(rng_));
      }
    }
    ++index_;
    return w;
  }

 private:
  SynthSpec spec_;
  std::string bearing_id_;
  std::mt19937_64 rng_;
  int index_ = 0;
};

inline std::unique_ptr<WindowSource> open_bearing(const BearingManifest& manifest,
                                                  const std::string& id) {
  const BearingEntry& entry = manifest.find(id);
  if (entry.synth) return std::make_unique<SynthWindowSource>(*entry.synth, entry.id);
  return std::make_unique<FileWindowSource>(entry, manifest.layout, manifest.rate);
}

inline std::vector<SampleWindow> drain(WindowSource& src) {
  std::vector<SampleWindow> out;
  while (auto w = src.next()) out.push_back(std::move(*w));
  return out;
}

inline std::vector<SampleWindow> stream_bearing(const BearingManifest& manifest,
                                                const std::string& id) {
  auto src = open_bearing(manifest, id);
  return drain(*src);
}

inline std::vector<SampleWindow> synth_bearing(const SynthSpec& spec,
                                               const std::string& id = "synth") {
  SynthWindowSource src(spec, id);
  return drain(src);
}

namespace detail {

inline int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw std::runtime_error("invalid integer for " + what + ": '" + s + "'");
  }
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("invalid number for " + what + ": '" + s + "'");
  }
}

inline char parse_delimiter(const std::string& s) {
  if (s == "whitespace") return '\0';
  if (s == "tab") return '\t';
  if (s == "comma") return ',';
  if (s == "semicolon") return ';';
  if (s.size() == 1) return s[0];
  throw std::runtime_error("invalid delimiter: '" + s + "'");
}

inline std::string delimiter_name(char d) {
  switch (d) {
    case '\0': return "whitespace";
    case '\t': return "tab";
    case ',': return "comma";
    case ';': return "semicolon";
    default: return std::string(1, d);
  }
}

}  // namespace detail

// Manifest schema (key = value lines; see README):
//   global: delimiter, columns, rate
//   one [bearing <id>] section per bearing with label plus either
//   dir/channel or a synth.* block.
inline BearingManifest parse_manifest(const KvFile& kv, const std::string& origin) {
  BearingManifest m;
  for (const auto& [k, v] : kv.global().entries) {
    if (k == "delimiter") m.layout.delimiter = detail::parse_delimiter(v);
    else if (k == "columns") m.layout.columns = detail::parse_int(v, "columns");
    else if (k == "rate") m.rate = detail::parse_double(v, "rate");
    else if (k == "version") { /* reserved */ }
    else throw std::runtime_error(origin + ": unknown manifest key '" + k + "'");
  }
  if (m.layout.columns < 1) throw std::runtime_error(origin + ": columns must be >= 1");
  if (m.rate <= 0) throw std::runtime_error(origin + ": rate must be positive");

  for (std::size_t i = 1; i < kv.sections.size(); ++i) {
    const KvSection& sec = kv.sections[i];
    constexpr const char* prefix = "bearing ";
    if (sec.name.rfind(prefix, 0) != 0)
      throw std::runtime_error(origin + ": unexpected section [" + sec.name + "]");
    BearingEntry b;
    b.id = detail::trim(sec.name.substr(std::string(prefix).size()));
    if (b.id.empty()) throw std::runtime_error(origin + ": bearing section without id");
    if (b.id.find_first_of(" \t,") != std::string::npos)
      throw std::runtime_error(origin + ": bearing id '" + b.id +
                               "' must not contain spaces or commas");
    if (m.contains(b.id)) throw std::runtime_error(origin + ": duplicate bearing id " + b.id);

    SynthSpec synth;
    bool has_synth = false;
    for (const auto& [k, v] : sec.entries) {
      if (k == "label") b.label = detail::parse_int(v, "label");
      else if (k == "dir") b.dir = v;
      else if (k == "channel") b.channel = detail::parse_int(v, "channel");
      else if (k == "synth.windows") { synth.windows = detail::parse_int(v, k); has_synth = true; }
      else if (k == "synth.onset") { synth.onset = detail::parse_int(v, k); has_synth = true; }
      else if (k == "synth.samples") { synth.samples_per_window = detail::parse_int(v, k); has_synth = true; }
      else if (k == "synth.amp_growth") { synth.amplitude_growth = detail::parse_double(v, k); has_synth = true; }
      else if (k == "synth.impulse_growth") { synth.impulsiveness_growth = detail::parse_double(v, k); has_synth = true; }
      else if (k == "synth.noise") { synth.noise_floor = detail::parse_double(v, k); has_synth = true; }
      else if (k == "synth.seed") { synth.seed = static_cast<std::uint64_t>(std::stoull(v)); has_synth = true; }
      else throw std::runtime_error(origin + ": unknown bearing key '" + k + "'");
    }
    if (b.label != 0 && b.label != 1)
      throw std::runtime_error(origin + ": bearing " + b.id + ": label must be 0 or 1");
    if (!has_synth && b.dir.empty())
      throw std::runtime_error(origin + ": bearing " + b.id + ": needs either dir or synth.*");
    if (has_synth && !b.dir.empty())
      throw std::runtime_error(origin + ": bearing " + b.id + ": dir and synth.* are exclusive");
    if (has_synth) {
      synth.rate = m.rate;
      validate(synth);
      b.synth = synth;
    }
    m.bearings.push_back(std::move(b));
  }
  return m;
}

inline BearingManifest load_manifest(const std::string& path) {
  return parse_manifest(load_kv(path), path);
}

}  // namespace adepos
