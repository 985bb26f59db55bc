#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adepos/ensemble.hpp"

namespace adepos {

enum class Verdict { healthy, fault };

inline const char* to_string(Verdict v) { return v == Verdict::healthy ? "healthy" : "fault"; }

struct ControllerConfig {
  int n_min = 1;
  int n_max = 9;
};

inline void validate(const ControllerConfig& cfg) {
  if (cfg.n_min < 1 || cfg.n_min % 2 == 0 || cfg.n_max % 2 == 0 || cfg.n_min > cfg.n_max)
    throw std::invalid_argument("ControllerConfig: bounds must be odd with n_min <= n_max");
}

struct ControllerState {
  int active = 0;  // N_BL, odd, within [n_min, n_max]
  int n_min = 1;
  int n_max = 9;
  bool fault_declared = false;
  long evaluations = 0;

  static ControllerState initial(const ControllerConfig& cfg) {
    validate(cfg);
    return ControllerState{cfg.n_max, cfg.n_min, cfg.n_max, false, 0};
  }
};

// What one ensemble evaluation reports back to the controller.
struct EvalOutcome {
  bool alarm = false;    // majority vote
  double max_err = 0.0;  // max learner error among the active set
};

struct SampleRecord {
  std::int64_t timestamp = 0;
  int n_bl_final = 0;      // N_BL at the verdict-producing evaluation
  int n_evaluations = 0;   // 1 + escalation re-evaluations
  long l_eff_sum = 0;      // sum of L*N_BL over this sample's evaluations
  Verdict verdict = Verdict::healthy;
  double max_err = 0.0;
  std::vector<int> n_bl_per_eval;
};

struct MonitorLog {
  int hidden_count = 0;  // L
  int n_max = 0;
  std::vector<SampleRecord> samples;

  long total_evaluations() const {
    long n = 0;
    for (const auto& s : samples) n += s.n_evaluations;
    return n;
  }
  long total_l_eff() const {
    long n = 0;
    for (const auto& s : samples) n += s.l_eff_sum;
    return n;
  }
  // Effective neurons spent per input sample, averaged over the lifetime.
  double average_l_eff() const {
    if (samples.empty()) throw std::logic_error("MonitorLog: empty log");
    return static_cast<double>(total_l_eff()) / static_cast<double>(samples.size());
  }
  bool fault_declared() const {
    return !samples.empty() && samples.back().verdict == Verdict::fault;
  }
};

// One input sample through the adaptive loop: evaluate at the current
// N_BL; on a clean vote shrink by 2 (floored at n_min) and report healthy;
// on an alarm below capacity grow by 2 and re-evaluate the SAME sample; an
// alarm at full capacity is a confirmed fault.
inline Verdict controller_step(ControllerState& state,
                               const std::function<EvalOutcome(int)>& evaluate_at,
                               int hidden_count, SampleRecord& record) {
  if (state.fault_declared) throw std::logic_error("controller_step: fault already declared");
  record.n_evaluations = 0;
  record.l_eff_sum = 0;
  record.max_err = 0.0;
  record.n_bl_per_eval.clear();

  for (;;) {
    const EvalOutcome out = evaluate_at(state.active);
    ++state.evaluations;
    ++record.n_evaluations;
    record.l_eff_sum += static_cast<long>(hidden_count) * state.active;
    record.n_bl_per_eval.push_back(state.active);
    record.max_err = std::max(record.max_err, out.max_err);
    record.n_bl_final = state.active;

    if (!out.alarm) {
      record.verdict = Verdict::healthy;
      state.active = std::max(state.active - 2, state.n_min);
      return Verdict::healthy;
    }
    if (state.active < state.n_max) {
      state.active += 2;
      continue;
    }
    record.verdict = Verdict::fault;
    state.fault_declared = true;
    return Verdict::fault;
  }
}

// Per-sample evaluator factory: given a sample index, returns the
// evaluation function used by the controller for that sample.
using SampleEvaluator = std::function<EvalOutcome(int active)>;

// Runs the controller over a sequence of per-sample evaluators, stopping at
// the first confirmed fault or at stream exhaustion.
template <typename NextSample>
MonitorLog run_controller(const ControllerConfig& cfg, int hidden_count, NextSample&& next) {
  validate(cfg);
  MonitorLog log;
  log.hidden_count = hidden_count;
  log.n_max = cfg.n_max;
  ControllerState state = ControllerState::initial(cfg);

  while (!state.fault_declared) {
    std::optional<std::pair<std::int64_t, SampleEvaluator>> sample = next();
    if (!sample) break;
    SampleRecord rec;
    rec.timestamp = sample->first;
    controller_step(state, sample->second, hidden_count, rec);
    log.samples.push_back(std::move(rec));
  }
  if (log.samples.empty()) throw std::runtime_error("run_controller: empty stream");
  return log;
}

// Full-pipeline run: normalize each window, evaluate through the frozen
// ensemble, adapt. Consumes the source from its current position.
inline MonitorLog run_monitor(const EnsembleEvaluator& evaluator, const Normalizer& norm,
                              WindowSource& source, const ControllerConfig& cfg) {
  const double thr = evaluator.ensemble().require_threshold();
  const int hidden = evaluator.ensemble().hidden_count;
  auto next = [&]() -> std::optional<std::pair<std::int64_t, SampleEvaluator>> {
    auto w = source.next();
    if (!w) return std::nullopt;
    const Eigen::VectorXd x = to_vector(norm.apply(extract(*w)));
    const std::int64_t ts = w->timestamp;
    SampleEvaluator eval = [&evaluator, x, thr](int active) {
      const Eigen::VectorXd e = evaluator.errors(x, active);
      std::vector<char> flags(active);
      for (int i = 0; i < active; ++i) flags[i] = e(i) > thr ? 1 : 0;
      return EvalOutcome{vote_from_flags(std::move(flags)).majority, e.maxCoeff()};
    };
    return std::make_pair(ts, std::move(eval));
  };
  return run_controller(cfg, hidden, next);
}

inline void write_monitor_csv(const std::string& path, const MonitorLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "sample_index,n_bl_final,n_evaluations,l_eff_sum,verdict,max_err\n";
  char buf[64];
  for (const auto& s : log.samples) {
    std::snprintf(buf, sizeof buf, "%.9g", s.max_err);
    out << s.timestamp << ',' << s.n_bl_final << ',' << s.n_evaluations << ',' << s.l_eff_sum
        << ',' << to_string(s.verdict) << ',' << buf << '\n';
  }
}

// Rebuilds a log from its CSV form. The per-evaluation N_BL levels are
// implied by the escalation rule: the chain ends at n_bl_final and walks
// down in steps of 2 for the preceding evaluations.
inline MonitorLog read_monitor_csv(const std::string& path, int hidden_count, int n_max) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  MonitorLog log;
  log.hidden_count = hidden_count;
  log.n_max = n_max;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = split_list(line, ',');
    if (cols.size() != 6)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 6 columns");
    SampleRecord r;
    r.timestamp = detail::parse_int(cols[0], "sample_index");
    r.n_bl_final = detail::parse_int(cols[1], "n_bl_final");
    r.n_evaluations = detail::parse_int(cols[2], "n_evaluations");
    r.l_eff_sum = detail::parse_int(cols[3], "l_eff_sum");
    if (cols[4] == "healthy") r.verdict = Verdict::healthy;
    else if (cols[4] == "fault") r.verdict = Verdict::fault;
    else throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad verdict");
    r.max_err = detail::parse_double(cols[5], "max_err");
    long sum = 0;
    for (int e = 0; e < r.n_evaluations; ++e) {
      const int level = r.n_bl_final - 2 * e;
      r.n_bl_per_eval.insert(r.n_bl_per_eval.begin(), level);
      sum += static_cast<long>(hidden_count) * level;
    }
    if (sum != r.l_eff_sum)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": l_eff_sum inconsistent with n_bl_final/n_evaluations");
    log.samples.push_back(std::move(r));
  }
  if (log.samples.empty()) throw std::runtime_error(path + ": empty log");
  return log;
}

}  // namespace adepos
