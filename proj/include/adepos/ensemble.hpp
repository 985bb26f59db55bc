#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "adepos/elm.hpp"
#include "adepos/features.hpp"
#include "adepos/ingest.hpp"

namespace adepos {

// Seed derivation: base XOR (i+1)*0x9E37 over 16 bits. The odd multiplier
// makes the candidates pairwise distinct; a zero candidate (invalid LFSR
// seed) is bumped to the next free nonzero value.
inline std::vector<std::uint16_t> derive_learner_seeds(std::uint16_t base_seed, int count) {
  std::vector<std::uint16_t> seeds;
  seeds.reserve(count);
  for (int i = 0; i < count; ++i) {
    auto taken = [&](std::uint16_t s) {
      for (const auto t : seeds)
        if (t == s) return true;
      return false;
    };
    std::uint16_t s = static_cast<std::uint16_t>(
        base_seed ^ static_cast<std::uint16_t>((i + 1) * 0x9E37u));
    while (s == 0 || taken(s)) s = static_cast<std::uint16_t>(s + 1);
    seeds.push_back(s);
  }
  return seeds;
}

struct TrainConfig {
  int learner_count = 9;  // N, odd
  int hidden_count = 20;  // L per learner
  OccMode mode = OccMode::boundary;
  std::uint16_t base_seed = 1;
  double c = 100.0;
  int bootstrap_count = 0;  // N0; 0 means the minimum, L
  double convergence_eps = 1e-3;
  int convergence_window = 50;
  long sample_cap = 100000;
  int normalizer_fit_count = 0;  // 0 means max(N0, 50)
  double boundary_target = 1.0;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.learner_count < 1 || cfg.learner_count % 2 == 0)
    throw std::invalid_argument("TrainConfig: learner count must be odd and >= 1");
  if (cfg.hidden_count < 1) throw std::invalid_argument("TrainConfig: hidden count must be >= 1");
  if (cfg.c <= 0) throw std::invalid_argument("TrainConfig: c must be positive");
  if (cfg.bootstrap_count != 0 && cfg.bootstrap_count < cfg.hidden_count)
    throw std::invalid_argument("TrainConfig: bootstrap needs N0 >= L");
  if (cfg.sample_cap < 1) throw std::invalid_argument("TrainConfig: sample cap must be >= 1");
}

// N independently seeded base learners trained on one identical stream.
struct Ensemble {
  int learner_count = 0;  // N
  int hidden_count = 0;   // L
  OccMode mode = OccMode::boundary;
  std::uint16_t base_seed = 1;
  double c = 100.0;
  int bootstrap_count = 0;
  double boundary_target = 1.0;
  std::optional<double> threshold;  // Thr, shared; set by calibration
  std::vector<ElmModel> learners;

  double require_threshold() const {
    if (!threshold) throw std::logic_error("Ensemble: threshold not calibrated");
    return *threshold;
  }
};

struct VoteResult {
  std::vector<char> flags;  // 1 = anomaly, per active learner
  int active_count = 0;
  bool majority = false;
};

inline VoteResult vote_from_flags(std::vector<char> flags) {
  VoteResult v;
  v.active_count = static_cast<int>(flags.size());
  int alarms = 0;
  for (const char f : flags) alarms += f ? 1 : 0;
  v.majority = alarms > v.active_count / 2;
  v.flags = std::move(flags);
  return v;
}

inline void check_active_count(const Ensemble& ens, int active_count) {
  if (active_count < 1 || active_count > ens.learner_count || active_count % 2 == 0)
    throw std::invalid_argument("active_count must be odd and within [1, N]");
}

inline Eigen::VectorXd to_vector(const FeatureVector& f) {
  Eigen::VectorXd x(FeatureVector::dim);
  for (int i = 0; i < FeatureVector::dim; ++i) x(i) = f.values[i];
  return x;
}

// Frozen inference context: float path by default, or the bit-exact
// fixed-point datapath when a format is supplied.
class EnsembleEvaluator {
 public:
  explicit EnsembleEvaluator(const Ensemble& ens, std::optional<FixedFormat> fmt = std::nullopt)
      : ensemble_(&ens), fmt_(fmt) {
    if (fmt_) {
      quantized_.reserve(ens.learners.size());
      for (const auto& m : ens.learners) quantized_.emplace_back(m, *fmt_);
    }
  }

  const Ensemble& ensemble() const { return *ensemble_; }
  bool fixed_point() const { return fmt_.has_value(); }

  double learner_error(int index, const Eigen::VectorXd& x) const {
    if (fmt_) return quantized_[index].error(x);
    const ElmModel& m = ensemble_->learners[index];
    return occ_error(x, m, output_forward(hidden_forward(x, m), m));
  }

  // Errors of the fixed activation prefix 0..active_count-1. Inactive
  // learners are never touched.
  Eigen::VectorXd errors(const Eigen::VectorXd& x, int active_count) const {
    check_active_count(*ensemble_, active_count);
    Eigen::VectorXd e(active_count);
    for (int i = 0; i < active_count; ++i) e(i) = learner_error(i, x);
    return e;
  }

  VoteResult evaluate(const Eigen::VectorXd& x, int active_count) const {
    const double thr = ensemble_->require_threshold();
    const Eigen::VectorXd e = errors(x, active_count);
    std::vector<char> flags(active_count);
    for (int i = 0; i < active_count; ++i) flags[i] = e(i) > thr ? 1 : 0;  // strict
    return vote_from_flags(std::move(flags));
  }

 private:
  const Ensemble* ensemble_;
  std::optional<FixedFormat> fmt_;
  std::vector<QuantizedElm> quantized_;
};

// Float-path majority vote over the first active_count learners.
inline VoteResult evaluate(const Ensemble& ens, const FeatureVector& normalized, int active_count) {
  return EnsembleEvaluator(ens).evaluate(to_vector(normalized), active_count);
}

struct TrainResult {
  Ensemble ensemble;
  Normalizer normalizer;
  std::vector<long> convergence_samples;  // per learner, in stream order
  long windows_consumed = 0;              // training cut: monitoring starts here
};

// Trains every learner on the identical sample sequence: the first N0
// normalized windows bootstrap beta, the rest stream through the online
// recursion until every learner has converged. Hitting the cap first is an
// error.
inline TrainResult train_ensemble(WindowSource& source, const TrainConfig& cfg) {
  validate(cfg);
  const int n0 = cfg.bootstrap_count > 0 ? cfg.bootstrap_count : cfg.hidden_count;
  const int fit_count =
      cfg.normalizer_fit_count > 0 ? std::max(cfg.normalizer_fit_count, n0) : std::max(n0, 50);

  std::vector<FeatureVector> prefix;
  prefix.reserve(fit_count);
  while (static_cast<int>(prefix.size()) < fit_count) {
    auto w = source.next();
    if (!w) break;
    prefix.push_back(extract(*w));
  }
  if (static_cast<int>(prefix.size()) < fit_count)
    throw std::runtime_error("train_ensemble: stream too short for bootstrap (" +
                             std::to_string(prefix.size()) + " < " + std::to_string(fit_count) +
                             " windows)");

  TrainResult result;
  result.normalizer = fit_normalizer(prefix);

  const auto seeds = derive_learner_seeds(cfg.base_seed, cfg.learner_count);
  Ensemble& ens = result.ensemble;
  ens.learner_count = cfg.learner_count;
  ens.hidden_count = cfg.hidden_count;
  ens.mode = cfg.mode;
  ens.base_seed = cfg.base_seed;
  ens.c = cfg.c;
  ens.bootstrap_count = n0;
  ens.boundary_target = cfg.boundary_target;

  std::vector<Eigen::VectorXd> bootstrap;
  bootstrap.reserve(n0);
  for (int i = 0; i < n0; ++i) bootstrap.push_back(to_vector(result.normalizer.apply(prefix[i])));

  std::vector<OpiumState> states;
  states.reserve(cfg.learner_count);
  for (int i = 0; i < cfg.learner_count; ++i) {
    ens.learners.push_back(make_elm(cfg.hidden_count, FeatureVector::dim, cfg.mode, seeds[i],
                                    cfg.boundary_target));
    states.push_back(opium_init(bootstrap, ens.learners.back(), cfg.c, cfg.convergence_window,
                                cfg.convergence_eps));
  }
  result.convergence_samples.assign(cfg.learner_count, -1);

  long consumed = static_cast<long>(n0);
  int converged_count = 0;
  auto feed = [&](const FeatureVector& f) {
    const Eigen::VectorXd x = to_vector(result.normalizer.apply(f));
    ++consumed;
    for (int i = 0; i < cfg.learner_count; ++i) {
      ElmModel& m = ens.learners[i];
      opium_update(states[i], m, hidden_forward(x, m), occ_target(m, x));
      if (result.convergence_samples[i] < 0 && converged(states[i])) {
        result.convergence_samples[i] = consumed;
        ++converged_count;
      }
    }
  };

  for (int i = n0; i < static_cast<int>(prefix.size()); ++i) feed(prefix[i]);
  result.windows_consumed = static_cast<long>(prefix.size());
  while (converged_count < cfg.learner_count) {
    if (consumed >= cfg.sample_cap)
      throw std::runtime_error("train_ensemble: sample cap hit before convergence (" +
                               std::to_string(consumed) + " samples)");
    auto w = source.next();
    if (!w)
      throw std::runtime_error("train_ensemble: stream ended before convergence (" +
                               std::to_string(consumed) + " samples)");
    feed(extract(*w));
    ++result.windows_consumed;
  }
  return result;
}

}  // namespace adepos
