#include <deque>
#include <vector>

#include "catch_amalgamated.hpp"

#include "adepos/calibration.hpp"
#include "adepos/controller.hpp"
#include "test_util.hpp"

using namespace adepos;

namespace {

// Scripted evaluator: one bool per evaluation, consumed in order.
struct Script {
  std::deque<bool> alarms;
  std::vector<int> seen_active;

  EvalOutcome operator()(int active) {
    if (alarms.empty()) throw std::logic_error("script exhausted");
    seen_active.push_back(active);
    const bool a = alarms.front();
    alarms.pop_front();
    return EvalOutcome{a, a ? 2.0 : 0.5};
  }
};

}  // namespace

TEST_CASE("controller config bounds") {
  REQUIRE_NOTHROW(validate(ControllerConfig{1, 9}));
  REQUIRE_NOTHROW(validate(ControllerConfig{3, 3}));
  REQUIRE_THROWS_AS(validate(ControllerConfig{2, 9}), std::invalid_argument);
  REQUIRE_THROWS_AS(validate(ControllerConfig{1, 8}), std::invalid_argument);
  REQUIRE_THROWS_AS(validate(ControllerConfig{5, 3}), std::invalid_argument);
}

TEST_CASE("healthy verdicts shrink the ensemble two at a time") {
  ControllerState state = ControllerState::initial({1, 9});
  REQUIRE(state.active == 9);  // powers up fully staffed

  std::vector<int> levels;
  for (int i = 0; i < 6; ++i) {
    Script s{{false}, {}};
    SampleRecord rec;
    const Verdict v = controller_step(
        state, [&](int a) { return s(a); }, 20, rec);
    REQUIRE(v == Verdict::healthy);
    REQUIRE(rec.n_evaluations == 1);
    levels.push_back(rec.n_bl_final);
  }
  // evaluated at 9,7,5,3,1 then floored at 1
  REQUIRE(levels == std::vector<int>{9, 7, 5, 3, 1, 1});
  REQUIRE(state.active == 1);
}

TEST_CASE("an alarm below capacity escalates and re-evaluates the same sample") {
  ControllerState state = ControllerState::initial({1, 9});
  // walk down to N_BL = 1 first
  for (int i = 0; i < 4; ++i) {
    SampleRecord rec;
    controller_step(state, [](int) { return EvalOutcome{false, 0.0}; }, 20, rec);
  }
  REQUIRE(state.active == 1);

  // alarm at 1 and 3, clean at 5: healthy, but the sample cost three passes
  Script s{{true, true, false}, {}};
  SampleRecord rec;
  const Verdict v = controller_step(
      state, [&](int a) { return s(a); }, 20, rec);
  REQUIRE(v == Verdict::healthy);
  REQUIRE(s.seen_active == std::vector<int>{1, 3, 5});
  REQUIRE(rec.n_evaluations == 3);
  REQUIRE(rec.n_bl_final == 5);
  REQUIRE(rec.n_bl_per_eval == std::vector<int>{1, 3, 5});
  REQUIRE(rec.l_eff_sum == 20 * (1 + 3 + 5));
  REQUIRE(rec.max_err == 2.0);  // max over all evaluations of the sample
  REQUIRE(state.active == 3);   // healthy at 5 steps back down
}

TEST_CASE("an alarm at full capacity is a fault") {
  ControllerState state = ControllerState::initial({1, 5});
  Script s{{true}, {}};  // fresh controller starts at n_max, so one alarm suffices
  SampleRecord rec;
  const Verdict v = controller_step(
      state, [&](int a) { return s(a); }, 10, rec);
  REQUIRE(v == Verdict::fault);
  REQUIRE(rec.n_evaluations == 1);
  REQUIRE(rec.n_bl_final == 5);
  REQUIRE(state.fault_declared);
  SampleRecord rec2;
  REQUIRE_THROWS_AS(controller_step(
                        state, [&](int a) { return s(a); }, 10, rec2),
                    std::logic_error);
}

TEST_CASE("escalation that reaches the ceiling and still alarms faults") {
  ControllerState state = ControllerState::initial({1, 5});
  for (int i = 0; i < 2; ++i) {
    SampleRecord rec;
    controller_step(state, [](int) { return EvalOutcome{false, 0.0}; }, 10, rec);
  }
  REQUIRE(state.active == 1);

  Script s{{true, true, true}, {}};
  SampleRecord rec;
  const Verdict v = controller_step(
      state, [&](int a) { return s(a); }, 10, rec);
  REQUIRE(v == Verdict::fault);
  REQUIRE(s.seen_active == std::vector<int>{1, 3, 5});
  REQUIRE(rec.n_evaluations == 3);
  REQUIRE(rec.l_eff_sum == 10 * (1 + 3 + 5));
}

TEST_CASE("n_min floors the shrink") {
  ControllerState state = ControllerState::initial({3, 9});
  for (int i = 0; i < 6; ++i) {
    SampleRecord rec;
    controller_step(state, [](int) { return EvalOutcome{false, 0.0}; }, 10, rec);
  }
  REQUIRE(state.active == 3);
}

TEST_CASE("run_controller stops at the first fault") {
  int sample = 0;
  auto next = [&]() -> std::optional<std::pair<std::int64_t, SampleEvaluator>> {
    const int s = sample++;
    if (s >= 100) return std::nullopt;
    SampleEvaluator eval = [s](int) {
      return EvalOutcome{s >= 3, 1.0};  // alarms forever from sample 3
    };
    return std::make_pair(static_cast<std::int64_t>(s), std::move(eval));
  };
  const MonitorLog log = run_controller(ControllerConfig{1, 5}, 10, next);
  REQUIRE(log.fault_declared());
  REQUIRE(log.samples.size() == 4);  // 0,1,2 healthy, 3 faults
  REQUIRE(log.samples.back().timestamp == 3);
  REQUIRE(log.samples.back().verdict == Verdict::fault);
  // healthy shrink 5,3,1 then the faulting sample escalates 1->3->5
  REQUIRE(log.samples[3].n_bl_per_eval == std::vector<int>{1, 3, 5});
  REQUIRE(log.total_evaluations() == 6);
  REQUIRE(log.total_l_eff() == 10 * (5 + 3 + 1 + 1 + 3 + 5));
  REQUIRE(log.average_l_eff() == Catch::Approx(10.0 * 18 / 4));
}

TEST_CASE("run_controller on an exhausted stream") {
  auto next = []() -> std::optional<std::pair<std::int64_t, SampleEvaluator>> {
    return std::nullopt;
  };
  REQUIRE_THROWS_AS(run_controller(ControllerConfig{1, 5}, 10, next), std::runtime_error);
}

TEST_CASE("average effective size counts re-evaluations against their sample") {
  // 1979 single evaluations at N_BL = 1 and 21 samples costing 3 evaluations
  // (1+3+5)/sample with L = 20: the classic low-duty profile
  MonitorLog log;
  log.hidden_count = 20;
  log.n_max = 9;
  for (int i = 0; i < 2000; ++i) {
    SampleRecord rec;
    rec.timestamp = i;
    log.samples.push_back(rec);
  }
  for (int i = 0; i < 2000; ++i) {
    auto& rec = log.samples[i];
    if (i < 1979) {
      rec.n_bl_per_eval = {1};
      rec.n_evaluations = 1;
      rec.l_eff_sum = 20;
    } else {
      rec.n_bl_per_eval = {1, 3, 5};
      rec.n_evaluations = 3;
      rec.l_eff_sum = 20 * 9;
    }
  }
  REQUIRE(log.average_l_eff() == Catch::Approx((1979.0 * 20 + 21.0 * 180) / 2000.0));
}

TEST_CASE("monitor csv round trips through the reader") {
  TempDir tmp("monitor_csv");
  MonitorLog log;
  log.hidden_count = 20;
  log.n_max = 9;
  SampleRecord a;
  a.timestamp = 0;
  a.n_bl_final = 9;
  a.n_evaluations = 1;
  a.l_eff_sum = 180;
  a.verdict = Verdict::healthy;
  a.max_err = 0.25;
  a.n_bl_per_eval = {9};
  SampleRecord b;
  b.timestamp = 1;
  b.n_bl_final = 9;
  b.n_evaluations = 2;
  b.l_eff_sum = 20 * (7 + 9);
  b.verdict = Verdict::fault;
  b.max_err = 1.5;
  b.n_bl_per_eval = {7, 9};
  log.samples = {a, b};

  const std::string path = tmp.file("log.csv");
  write_monitor_csv(path, log);
  const MonitorLog back = read_monitor_csv(path, 20, 9);
  REQUIRE(back.hidden_count == 20);
  REQUIRE(back.n_max == 9);
  REQUIRE(back.samples.size() == 2);
  for (int i = 0; i < 2; ++i) {
    REQUIRE(back.samples[i].timestamp == log.samples[i].timestamp);
    REQUIRE(back.samples[i].n_bl_final == log.samples[i].n_bl_final);
    REQUIRE(back.samples[i].n_evaluations == log.samples[i].n_evaluations);
    REQUIRE(back.samples[i].l_eff_sum == log.samples[i].l_eff_sum);
    REQUIRE(back.samples[i].verdict == log.samples[i].verdict);
    REQUIRE(back.samples[i].max_err == log.samples[i].max_err);
    REQUIRE(back.samples[i].n_bl_per_eval == log.samples[i].n_bl_per_eval);
  }
  REQUIRE(back.total_l_eff() == log.total_l_eff());
}

TEST_CASE("replaying recorded errors equals the live controller run") {
  // Synthesize a 3-learner error history and check that replay produces the
  // same votes, levels and verdicts as driving the controller live.
  BearingRunData data;
  data.id = "x";
  data.label = 1;
  data.errors.resize(6, 3);
  data.errors << 0.1, 0.2, 0.1,   // clean
                 0.1, 0.1, 0.3,   // clean (one flag only at thr=0.25 is minority)
                 0.3, 0.3, 0.1,   // majority alarm
                 0.3, 0.3, 0.3,   // alarm again
                 0.4, 0.4, 0.4,   // alarm
                 0.5, 0.5, 0.5;   // alarm
  for (int i = 0; i < 6; ++i) data.timestamps.push_back(i);
  const double thr = 0.25;
  const ControllerConfig cfg{1, 3};

  const MonitorLog replayed = replay_adepos(data, thr, 10, cfg);

  Eigen::Index row = 0;
  auto next = [&]() -> std::optional<std::pair<std::int64_t, SampleEvaluator>> {
    if (row >= data.errors.rows()) return std::nullopt;
    const Eigen::Index s = row++;
    SampleEvaluator eval = [&, s](int active) {
      int alarms = 0;
      double max_err = 0.0;
      for (int i = 0; i < active; ++i) {
        max_err = std::max(max_err, data.errors(s, i));
        if (data.errors(s, i) > thr) ++alarms;
      }
      return EvalOutcome{alarms > active / 2, max_err};
    };
    return std::make_pair(static_cast<std::int64_t>(s), std::move(eval));
  };
  const MonitorLog live = run_controller(cfg, 10, next);

  REQUIRE(replayed.samples.size() == live.samples.size());
  for (std::size_t i = 0; i < live.samples.size(); ++i) {
    REQUIRE(replayed.samples[i].verdict == live.samples[i].verdict);
    REQUIRE(replayed.samples[i].n_bl_per_eval == live.samples[i].n_bl_per_eval);
    REQUIRE(replayed.samples[i].l_eff_sum == live.samples[i].l_eff_sum);
  }
  REQUIRE(replayed.fault_declared() == live.fault_declared());
}
