#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adepos/ingest.hpp"

namespace adepos {

// The five time-domain condition indicators, in fixed order.
enum FeatureIndex : int {
  kRms = 0,
  kKurtosis = 1,
  kPeakToPeak = 2,
  kCrestFactor = 3,
  kSkewness = 4,
};

struct FeatureVector {
  static constexpr int dim = 5;
  std::array<double, dim> values{};
  std::int64_t timestamp = 0;

  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
};

// Population-moment statistics of one window. Kurtosis is non-excess
// (Gaussian -> 3), skewness is the standardized third moment.
inline FeatureVector extract(const SampleWindow& w) {
  const std::size_t n = w.samples.size();
  if (n < 4) throw std::invalid_argument("extract: need at least 4 samples");

  double sum = 0.0, sum_sq = 0.0, max_v = w.samples[0], min_v = w.samples[0];
  for (const double x : w.samples) {
    sum += x;
    sum_sq += x * x;
    max_v = std::max(max_v, x);
    min_v = std::min(min_v, x);
  }
  const double mean = sum / static_cast<double>(n);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (const double x : w.samples) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 0.0)
    throw std::invalid_argument("extract: zero-variance window, kurtosis/skewness undefined");

  const double rms = std::sqrt(sum_sq / static_cast<double>(n));
  const double peak = std::max(std::abs(max_v), std::abs(min_v));

  FeatureVector f;
  f.timestamp = w.timestamp;
  f.values[kRms] = rms;
  f.values[kKurtosis] = m4 / (m2 * m2);
  f.values[kPeakToPeak] = max_v - min_v;
  f.values[kCrestFactor] = peak / rms;
  f.values[kSkewness] = m3 / (m2 * std::sqrt(m2));
  return f;
}

// Per-feature z-score statistics, fitted once on the healthy training phase
// and frozen afterwards. Immutable after fitting.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(const std::array<double, FeatureVector::dim>& mean,
             const std::array<double, FeatureVector::dim>& stddev, std::size_t count)
      : mean_(mean), stddev_(stddev), count_(count) {
    for (const double s : stddev_)
      if (!(s > 0.0)) throw std::invalid_argument("Normalizer: stddev must be positive");
  }

  bool fitted() const { return count_ > 0; }
  std::size_t fitted_count() const { return count_; }
  const std::array<double, FeatureVector::dim>& mean() const { return mean_; }
  const std::array<double, FeatureVector::dim>& stddev() const { return stddev_; }

  FeatureVector apply(const FeatureVector& f) const {
    require_fitted();
    FeatureVector out = f;
    for (int i = 0; i < FeatureVector::dim; ++i)
      out.values[i] = (f.values[i] - mean_[i]) / stddev_[i];
    return out;
  }

  FeatureVector invert(const FeatureVector& f) const {
    require_fitted();
    FeatureVector out = f;
    for (int i = 0; i < FeatureVector::dim; ++i)
      out.values[i] = f.values[i] * stddev_[i] + mean_[i];
    return out;
  }

 private:
  void require_fitted() const {
    if (!fitted()) throw std::logic_error("Normalizer: not fitted");
  }

  std::array<double, FeatureVector::dim> mean_{};
  std::array<double, FeatureVector::dim> stddev_{};
  std::size_t count_ = 0;
};

// Sample (n-1) standard deviation per feature. Degenerate features are an
// error: downstream inputs must stay bounded and centered.
inline Normalizer fit_normalizer(const std::vector<FeatureVector>& features) {
  const std::size_t n = features.size();
  if (n < 2) throw std::invalid_argument("fit_normalizer: need at least 2 vectors");

  std::array<double, FeatureVector::dim> mean{}, stddev{};
  for (const auto& f : features)
    for (int i = 0; i < FeatureVector::dim; ++i) mean[i] += f.values[i];
  for (auto& m : mean) m /= static_cast<double>(n);

  for (const auto& f : features)
    for (int i = 0; i < FeatureVector::dim; ++i) {
      const double d = f.values[i] - mean[i];
      stddev[i] += d * d;
    }
  for (int i = 0; i < FeatureVector::dim; ++i) {
    stddev[i] = std::sqrt(stddev[i] / static_cast<double>(n - 1));
    if (!(stddev[i] > 0.0))
      throw std::invalid_argument("fit_normalizer: feature " + std::to_string(i) +
                                  " has degenerate variance");
  }
  return Normalizer(mean, stddev, n);
}

inline FeatureVector apply_normalizer(const Normalizer& n, const FeatureVector& f) {
  return n.apply(f);
}

// Optional feature dump: one row per window.
inline void write_feature_csv(const std::string& path, const std::string& bearing_id,
                              const std::vector<FeatureVector>& features) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "timestamp,bearing_id,rms,kurtosis,peak_to_peak,crest_factor,skewness\n";
  char buf[64];
  for (const auto& f : features) {
    out << f.timestamp << ',' << bearing_id;
    for (int i = 0; i < FeatureVector::dim; ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", f.values[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace adepos
