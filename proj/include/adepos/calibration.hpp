#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adepos/controller.hpp"
#include "adepos/ensemble.hpp"
#include "adepos/seeds.hpp"

namespace adepos {

// Thr = Max(Err) + 0.5 * k * sigma_Err over the good-bearing lifetime
// maxima, with the sample (n-1) standard deviation.
inline double threshold(const std::vector<double>& t_values, double k) {
  if (t_values.size() < 2)
    throw std::invalid_argument("threshold: need at least 2 good-bearing values");
  double max_err = t_values[0], mean = 0.0;
  for (const double t : t_values) {
    max_err = std::max(max_err, t);
    mean += t;
  }
  mean /= static_cast<double>(t_values.size());
  double var = 0.0;
  for (const double t : t_values) var += (t - mean) * (t - mean);
  const double sigma = std::sqrt(var / static_cast<double>(t_values.size() - 1));
  return max_err + 0.5 * k * sigma;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double hi = v[mid];
  std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
  return 0.5 * (v[mid - 1] + hi);
}

// Everything one trained bearing contributes to calibration and replay:
// the per-learner error of each monitoring sample at full ensemble width.
struct BearingRunData {
  std::string id;
  int label = 0;
  long train_windows = 0;  // monitoring starts at this window index
  std::vector<std::int64_t> timestamps;
  Eigen::MatrixXd errors;  // monitoring samples x N learners
  std::vector<long> convergence_samples;
};

// Trains an ensemble on the bearing's early life and records every
// monitoring sample's per-learner errors through the configured datapath.
inline BearingRunData run_bearing_errors(const BearingManifest& manifest, const std::string& id,
                                         const TrainConfig& train_cfg,
                                         std::optional<FixedFormat> fmt = std::nullopt) {
  BearingRunData data;
  data.id = id;
  data.label = manifest.find(id).label;

  auto source = open_bearing(manifest, id);
  const TrainResult trained = train_ensemble(*source, train_cfg);
  data.train_windows = trained.windows_consumed;
  data.convergence_samples = trained.convergence_samples;

  Ensemble ens = trained.ensemble;  // threshold irrelevant for raw errors
  EnsembleEvaluator evaluator(ens, fmt);

  std::vector<Eigen::VectorXd> rows;
  while (auto w = source->next()) {
    const Eigen::VectorXd x = to_vector(trained.normalizer.apply(extract(*w)));
    Eigen::VectorXd e(ens.learner_count);
    for (int i = 0; i < ens.learner_count; ++i) e(i) = evaluator.learner_error(i, x);
    rows.push_back(std::move(e));
    data.timestamps.push_back(w->timestamp);
  }
  if (rows.empty())
    throw std::runtime_error("run_bearing_errors: bearing " + id + " has no monitoring samples");
  data.errors.resize(static_cast<Eigen::Index>(rows.size()), ens.learner_count);
  for (std::size_t i = 0; i < rows.size(); ++i) data.errors.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return data;
}

// T_X: the lifetime maximum of the full-ensemble median error.
inline double lifetime_max_error(const BearingRunData& data) {
  if (data.errors.rows() == 0) throw std::invalid_argument("lifetime_max_error: empty stream");
  double t_x = 0.0;
  for (Eigen::Index s = 0; s < data.errors.rows(); ++s) {
    std::vector<double> row(data.errors.cols());
    for (Eigen::Index i = 0; i < data.errors.cols(); ++i) row[i] = data.errors(s, i);
    t_x = std::max(t_x, median(std::move(row)));
  }
  return t_x;
}

// Replays the adaptive controller over recorded per-learner errors. Votes
// are identical to a live run: the stored errors are exactly what the
// active prefix would have produced.
inline MonitorLog replay_adepos(const BearingRunData& data, double thr, int hidden_count,
                                const ControllerConfig& cfg) {
  if (static_cast<Eigen::Index>(data.timestamps.size()) != data.errors.rows())
    throw std::invalid_argument("replay_adepos: timestamps do not line up with the error rows");
  Eigen::Index row = 0;
  auto next = [&]() -> std::optional<std::pair<std::int64_t, SampleEvaluator>> {
    if (row >= data.errors.rows()) return std::nullopt;
    const Eigen::Index s = row++;
    SampleEvaluator eval = [&data, s, thr](int active) {
      int alarms = 0;
      double max_err = 0.0;
      for (int i = 0; i < active; ++i) {
        const double e = data.errors(s, i);
        max_err = std::max(max_err, e);
        if (e > thr) ++alarms;
      }
      return EvalOutcome{alarms > active / 2, max_err};
    };
    return std::make_pair(data.timestamps[static_cast<std::size_t>(s)], std::move(eval));
  };
  return run_controller(cfg, hidden_count, next);
}

struct LooRow {
  std::string bearing_id;
  int label = 0;
  bool fault_declared = false;
  std::int64_t fault_sample_index = -1;
  double thr_used = 0.0;
  double avg_l_eff = 0.0;
  bool correct = false;
};

struct LooReport {
  std::vector<LooRow> rows;
  double accuracy = 0.0;  // over bearings, then averaged across replicas
  int replicas = 1;
};

struct LooConfig {
  TrainConfig train;        // base_seed is overridden per replica
  ControllerConfig controller;
  double k = 1.0;
  std::optional<FixedFormat> datapath;  // nullopt = float inference
  std::uint64_t master_seed = 1;
  int replicas = 1;
};

// Leave-one-out protocol: each bearing is held out in turn, its threshold
// computed from the good bearings among the remaining ones, and the
// adaptive monitor run over its lifetime. One detector design (random
// projection seed) per replica monitors every bearing; only the output
// weights are trained per bearing. Bearing runs are trained once per
// replica and shared across folds.
inline LooReport loo_evaluate(const BearingManifest& manifest, const LooConfig& cfg) {
  const std::size_t n_bearings = manifest.bearings.size();
  if (n_bearings < 2) throw std::invalid_argument("loo_evaluate: need at least 2 bearings");
  if (cfg.replicas < 1) throw std::invalid_argument("loo_evaluate: replicas must be >= 1");
  // every fold needs a spread of good bearings; reject the manifest before
  // spending any training time
  for (std::size_t b = 0; b < n_bearings; ++b) {
    std::size_t fold = 0;
    for (std::size_t o = 0; o < n_bearings; ++o)
      if (o != b && manifest.bearings[o].label == 0) ++fold;
    if (fold < 2)
      throw std::runtime_error("loo_evaluate: fold for " + manifest.bearings[b].id +
                               " has fewer than 2 good bearings");
  }

  LooReport report;
  report.replicas = cfg.replicas;
  double accuracy_sum = 0.0;

  for (int rep = 0; rep < cfg.replicas; ++rep) {
    std::vector<BearingRunData> runs;
    runs.reserve(n_bearings);
    std::vector<double> t_x(n_bearings);
    for (std::size_t b = 0; b < n_bearings; ++b) {
      TrainConfig train_cfg = cfg.train;
      train_cfg.base_seed = derive_base_seed(cfg.master_seed, static_cast<std::uint64_t>(rep));
      runs.push_back(run_bearing_errors(manifest, manifest.bearings[b].id, train_cfg, cfg.datapath));
      t_x[b] = lifetime_max_error(runs.back());
    }

    int correct = 0;
    for (std::size_t b = 0; b < n_bearings; ++b) {
      std::vector<double> fold_t;
      for (std::size_t o = 0; o < n_bearings; ++o)
        if (o != b && manifest.bearings[o].label == 0) fold_t.push_back(t_x[o]);
      const double thr = threshold(fold_t, cfg.k);

      const MonitorLog log = replay_adepos(runs[b], thr, cfg.train.hidden_count, cfg.controller);
      LooRow row;
      row.bearing_id = runs[b].id;
      row.label = runs[b].label;
      row.fault_declared = log.fault_declared();
      row.fault_sample_index = row.fault_declared ? log.samples.back().timestamp : -1;
      row.thr_used = thr;
      row.avg_l_eff = log.average_l_eff();
      row.correct = (row.label == 1) == row.fault_declared;
      if (row.correct) ++correct;
      report.rows.push_back(std::move(row));
    }
    accuracy_sum += static_cast<double>(correct) / static_cast<double>(n_bearings);
  }
  report.accuracy = accuracy_sum / static_cast<double>(cfg.replicas);
  return report;
}

inline void write_loo_csv(const std::string& path, const LooReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "bearing_id,label,fault_declared,fault_sample_index,thr_used,avg_l_eff\n";
  char buf[64];
  for (const auto& r : report.rows) {
    out << r.bearing_id << ',' << r.label << ',' << (r.fault_declared ? 1 : 0) << ','
        << r.fault_sample_index;
    std::snprintf(buf, sizeof buf, "%.9g", r.thr_used);
    out << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.9g", r.avg_l_eff);
    out << ',' << buf << '\n';
  }
}

}  // namespace adepos
