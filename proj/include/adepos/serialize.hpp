#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adepos/ensemble.hpp"

namespace adepos {

// Model files are line-oriented text. Doubles are written with %.17g so a
// save/load round trip is bit-exact. Input weights and biases are never
// stored: they regenerate from the learner seed.

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string next_line(std::istream& in, const std::string& origin, int& lineno) {
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (!t.empty() && t[0] != '#') return t;
  }
  throw std::runtime_error(origin + ": unexpected end of file");
}

// "key = rest"; throws if the key does not match.
inline std::string expect_field(std::istream& in, const std::string& origin, int& lineno,
                                const std::string& key) {
  const std::string line = next_line(in, origin, lineno);
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected '" + key + " = ...'");
  const std::string k = trim(line.substr(0, eq));
  if (k != key)
    throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected field '" + key +
                             "', found '" + k + "'");
  return trim(line.substr(eq + 1));
}

inline std::vector<double> parse_double_row(const std::string& line, const std::string& what) {
  std::vector<double> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(parse_double(tok, what));
  return out;
}

}  // namespace detail

inline void save_ensemble(const std::string& path, const TrainResult& result) {
  const Ensemble& ens = result.ensemble;
  if (ens.learners.empty()) throw std::invalid_argument("save_ensemble: empty ensemble");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  const int d = ens.learners.front().input_dim;
  using detail::fmt17;
  out << "adepos-ensemble v1\n";
  out << "n = " << ens.learner_count << '\n';
  out << "l = " << ens.hidden_count << '\n';
  out << "d = " << d << '\n';
  out << "mode = " << to_string(ens.mode) << '\n';
  out << "base_seed = " << ens.base_seed << '\n';
  out << "c = " << fmt17(ens.c) << '\n';
  out << "n0 = " << ens.bootstrap_count << '\n';
  out << "boundary_target = " << fmt17(ens.boundary_target) << '\n';
  out << "threshold = " << (ens.threshold ? fmt17(*ens.threshold) : std::string("unset")) << '\n';
  out << "train_windows = " << result.windows_consumed << '\n';
  out << "converged =";
  for (long v : result.convergence_samples) out << ' ' << v;
  out << '\n';
  out << "norm_mean =";
  for (int i = 0; i < FeatureVector::dim; ++i) out << ' ' << fmt17(result.normalizer.mean()[i]);
  out << '\n';
  out << "norm_std =";
  for (int i = 0; i < FeatureVector::dim; ++i) out << ' ' << fmt17(result.normalizer.stddev()[i]);
  out << '\n';
  out << "norm_count = " << result.normalizer.fitted_count() << '\n';
  for (int i = 0; i < ens.learner_count; ++i) {
    const ElmModel& m = ens.learners[i];
    out << "learner = " << i << '\n';
    out << "seed = " << m.seed << '\n';
    // beta rows are output units, columns hidden units
    for (int r = 0; r < m.out_dim(); ++r) {
      for (int cix = 0; cix < m.hidden_count; ++cix) {
        if (cix) out << ' ';
        out << fmt17(m.output_weights(r, cix));
      }
      out << '\n';
    }
  }
}

inline TrainResult load_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  int lineno = 0;
  using detail::expect_field;
  using detail::next_line;
  const std::string magic = next_line(in, path, lineno);
  if (magic != "adepos-ensemble v1")
    throw std::runtime_error(path + ": not an adepos-ensemble v1 file (got '" + magic + "')");

  Ensemble ens;
  ens.learner_count = detail::parse_int(expect_field(in, path, lineno, "n"), "n");
  ens.hidden_count = detail::parse_int(expect_field(in, path, lineno, "l"), "l");
  const int d = detail::parse_int(expect_field(in, path, lineno, "d"), "d");
  ens.mode = occ_mode_from_string(expect_field(in, path, lineno, "mode"));
  ens.base_seed =
      static_cast<std::uint16_t>(detail::parse_int(expect_field(in, path, lineno, "base_seed"), "base_seed"));
  ens.c = detail::parse_double(expect_field(in, path, lineno, "c"), "c");
  ens.bootstrap_count = detail::parse_int(expect_field(in, path, lineno, "n0"), "n0");
  ens.boundary_target =
      detail::parse_double(expect_field(in, path, lineno, "boundary_target"), "boundary_target");
  const std::string thr = expect_field(in, path, lineno, "threshold");
  if (thr != "unset") ens.threshold = detail::parse_double(thr, "threshold");

  TrainResult result;
  result.windows_consumed =
      detail::parse_int(expect_field(in, path, lineno, "train_windows"), "train_windows");
  for (double v : detail::parse_double_row(expect_field(in, path, lineno, "converged"), "converged"))
    result.convergence_samples.push_back(static_cast<long>(v));
  if (static_cast<int>(result.convergence_samples.size()) != ens.learner_count)
    throw std::runtime_error(path + ": converged list length does not match n");

  const auto mean = detail::parse_double_row(expect_field(in, path, lineno, "norm_mean"), "norm_mean");
  const auto stddev = detail::parse_double_row(expect_field(in, path, lineno, "norm_std"), "norm_std");
  if (static_cast<int>(mean.size()) != FeatureVector::dim ||
      static_cast<int>(stddev.size()) != FeatureVector::dim)
    throw std::runtime_error(path + ": normalizer must have " +
                             std::to_string(FeatureVector::dim) + " entries per row");
  const long norm_count =
      detail::parse_int(expect_field(in, path, lineno, "norm_count"), "norm_count");
  std::array<double, FeatureVector::dim> mu{}, sigma{};
  for (int i = 0; i < FeatureVector::dim; ++i) {
    mu[i] = mean[i];
    sigma[i] = stddev[i];
  }
  result.normalizer = Normalizer(mu, sigma, static_cast<std::size_t>(norm_count));

  for (int i = 0; i < ens.learner_count; ++i) {
    const int idx = detail::parse_int(expect_field(in, path, lineno, "learner"), "learner");
    if (idx != i)
      throw std::runtime_error(path + ": learners out of order (expected " + std::to_string(i) + ")");
    const int seed = detail::parse_int(expect_field(in, path, lineno, "seed"), "seed");
    if (seed <= 0 || seed > 0xFFFF)
      throw std::runtime_error(path + ": learner seed out of range");
    ElmModel model = make_elm(ens.hidden_count, d, ens.mode, static_cast<std::uint16_t>(seed),
                              ens.boundary_target);
    const int rows = model.out_dim();
    model.output_weights.resize(rows, ens.hidden_count);
    for (int r = 0; r < rows; ++r) {
      const auto row = detail::parse_double_row(next_line(in, path, lineno), "beta");
      if (static_cast<int>(row.size()) != ens.hidden_count)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": beta row has " +
                                 std::to_string(row.size()) + " entries, expected " +
                                 std::to_string(ens.hidden_count));
      for (int cix = 0; cix < ens.hidden_count; ++cix) model.output_weights(r, cix) = row[cix];
    }
    model.beta_ready = true;
    ens.learners.push_back(std::move(model));
  }
  result.ensemble = std::move(ens);
  return result;
}

// Per-fold detection thresholds plus the lifetime maxima they came from.
struct ThresholdFile {
  double k = 1.0;
  std::map<std::string, double> t_x;    // bearing id -> lifetime max of median error
  std::map<std::string, double> folds;  // held-out bearing id -> threshold
  double global = 0.0;                  // threshold over all good bearings
};

inline void save_thresholds(const std::string& path, const ThresholdFile& file) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  using detail::fmt17;
  out << "adepos-thresholds v1\n";
  out << "k = " << fmt17(file.k) << '\n';
  for (const auto& [id, v] : file.t_x) out << "t_x " << id << ' ' << fmt17(v) << '\n';
  for (const auto& [id, v] : file.folds) out << "fold " << id << ' ' << fmt17(v) << '\n';
  out << "global = " << fmt17(file.global) << '\n';
}

inline ThresholdFile load_thresholds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  int lineno = 0;
  const std::string magic = detail::next_line(in, path, lineno);
  if (magic != "adepos-thresholds v1")
    throw std::runtime_error(path + ": not an adepos-thresholds v1 file (got '" + magic + "')");
  ThresholdFile file;
  file.k = detail::parse_double(detail::expect_field(in, path, lineno, "k"), "k");
  std::string line;
  bool saw_global = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream iss(t);
    std::string tag;
    iss >> tag;
    if (tag == "t_x" || tag == "fold") {
      std::string id, value;
      if (!(iss >> id >> value))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed " + tag + " line");
      (tag == "t_x" ? file.t_x : file.folds)[id] = detail::parse_double(value, tag);
    } else if (tag == "global") {
      std::string eq, value;
      if (!(iss >> eq >> value) || eq != "=")
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed global line");
      file.global = detail::parse_double(value, "global");
      saw_global = true;
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown tag '" + tag + "'");
    }
  }
  if (!saw_global) throw std::runtime_error(path + ": missing global threshold");
  return file;
}

}  // namespace adepos
