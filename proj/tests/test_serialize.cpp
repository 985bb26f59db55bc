#include <fstream>
#include <sstream>

#include "catch_amalgamated.hpp"

#include "adepos/calibration.hpp"
#include "adepos/serialize.hpp"
#include "test_util.hpp"

using namespace adepos;

namespace {

TrainResult trained_result() {
  const std::string text =
      "rate = 20480\n"
      "[bearing unit]\n"
      "label = 0\n"
      "synth.windows = 300\n"
      "synth.onset = 300\n"
      "synth.samples = 256\n"
      "synth.seed = 5\n";
  const BearingManifest manifest = parse_manifest(parse_kv_string(text), "<test>");
  auto source = open_bearing(manifest, "unit");
  TrainConfig cfg;
  cfg.learner_count = 3;
  cfg.hidden_count = 8;
  cfg.base_seed = 0x2222;
  cfg.convergence_window = 20;
  cfg.convergence_eps = 1e-2;
  return train_ensemble(*source, cfg);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("ensemble file round trip preserves the model exactly") {
  TempDir tmp("ens_roundtrip");
  TrainResult original = trained_result();
  original.ensemble.threshold = 0.4375;
  const std::string path = tmp.file("ensemble.txt");
  save_ensemble(path, original);

  const TrainResult loaded = load_ensemble(path);
  const Ensemble& a = original.ensemble;
  const Ensemble& b = loaded.ensemble;
  REQUIRE(b.learner_count == a.learner_count);
  REQUIRE(b.hidden_count == a.hidden_count);
  REQUIRE(b.mode == a.mode);
  REQUIRE(b.base_seed == a.base_seed);
  REQUIRE(b.c == a.c);
  REQUIRE(b.bootstrap_count == a.bootstrap_count);
  REQUIRE(b.boundary_target == a.boundary_target);
  REQUIRE(b.threshold.has_value());
  REQUIRE(*b.threshold == 0.4375);
  REQUIRE(loaded.windows_consumed == original.windows_consumed);
  REQUIRE(loaded.convergence_samples == original.convergence_samples);
  REQUIRE(loaded.normalizer.fitted_count() == original.normalizer.fitted_count());
  for (int i = 0; i < FeatureVector::dim; ++i) {
    REQUIRE(loaded.normalizer.mean()[i] == original.normalizer.mean()[i]);
    REQUIRE(loaded.normalizer.stddev()[i] == original.normalizer.stddev()[i]);
  }
  for (int i = 0; i < a.learner_count; ++i) {
    const ElmModel& ma = a.learners[i];
    const ElmModel& mb = b.learners[i];
    REQUIRE(mb.seed == ma.seed);
    REQUIRE(mb.beta_ready);
    // %.17g keeps beta bit-exact; W and b regenerate from the seed
    REQUIRE((mb.output_weights.array() == ma.output_weights.array()).all());
    REQUIRE((mb.input_weights.array() == ma.input_weights.array()).all());
    REQUIRE((mb.biases.array() == ma.biases.array()).all());
  }

  // a second save of the loaded model is byte-identical
  const std::string again = tmp.file("ensemble2.txt");
  save_ensemble(again, loaded);
  REQUIRE(slurp(again) == slurp(path));
}

TEST_CASE("unset threshold survives the round trip") {
  TempDir tmp("ens_unset");
  const TrainResult original = trained_result();
  REQUIRE_FALSE(original.ensemble.threshold.has_value());
  save_ensemble(tmp.file("e.txt"), original);
  REQUIRE_FALSE(load_ensemble(tmp.file("e.txt")).ensemble.threshold.has_value());
}

TEST_CASE("loaded ensemble reproduces the saved one's inference") {
  TempDir tmp("ens_infer");
  const TrainResult original = trained_result();
  save_ensemble(tmp.file("e.txt"), original);
  const TrainResult loaded = load_ensemble(tmp.file("e.txt"));

  const EnsembleEvaluator ea(original.ensemble);
  const EnsembleEvaluator eb(loaded.ensemble);
  Eigen::VectorXd x(FeatureVector::dim);
  x << 0.3, -1.2, 0.8, 2.0, -0.4;
  const Eigen::VectorXd va = ea.errors(x, original.ensemble.learner_count);
  const Eigen::VectorXd vb = eb.errors(x, loaded.ensemble.learner_count);
  REQUIRE((va.array() == vb.array()).all());
}

TEST_CASE("ensemble loader rejects damaged files") {
  TempDir tmp("ens_damage");
  const TrainResult original = trained_result();
  const std::string path = tmp.file("good.txt");
  save_ensemble(path, original);
  const std::string good = slurp(path);

  auto expect_load_error = [&](const std::string& name, const std::string& contents,
                               const std::string& needle) {
    const std::string p = tmp.file(name);
    write_file(p, contents);
    REQUIRE_THROWS_WITH(load_ensemble(p), Catch::Matchers::ContainsSubstring(needle));
  };

  expect_load_error("magic.txt", "adepos-ensemble v2\nn = 3\n", "not an adepos-ensemble v1");

  // swap the first two header fields
  std::string swapped = good;
  const auto n_pos = swapped.find("n = ");
  const auto l_pos = swapped.find("l = ");
  swapped = swapped.substr(0, n_pos) + "l = 8\nn = 3\n" + swapped.substr(swapped.find("d = "));
  (void)l_pos;
  expect_load_error("order.txt", swapped, "expected field 'n'");

  // truncate the final beta row
  std::string shortened = good;
  shortened.erase(shortened.find_last_of(' '));
  expect_load_error("short.txt", shortened, "beta row has");

  // drop one entry from the converged list
  std::string conv = good;
  const auto conv_pos = conv.find("converged =");
  const auto conv_end = conv.find('\n', conv_pos);
  conv.replace(conv_pos, conv_end - conv_pos, "converged = 1 2");
  expect_load_error("conv.txt", conv, "converged list length");

  // out-of-range learner seed ("\n" anchor skips the base_seed header line)
  std::string seed = good;
  const auto seed_pos = seed.find("\nseed = ") + 1;
  const auto seed_end = seed.find('\n', seed_pos);
  seed.replace(seed_pos, seed_end - seed_pos, "seed = 0");
  expect_load_error("seed.txt", seed, "seed out of range");

  REQUIRE_THROWS_WITH(load_ensemble(tmp.file("missing.txt")),
                      Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("threshold file round trip") {
  TempDir tmp("thr_roundtrip");
  ThresholdFile file;
  file.k = 1.0 / 3.0;
  file.t_x = {{"b1", 0.31}, {"b2", 0.29}, {"b3", 0.35}};
  file.folds = {{"b1", 0.36}, {"b2", 0.37}};
  file.global = 0.3625;
  const std::string path = tmp.file("thr.txt");
  save_thresholds(path, file);

  const ThresholdFile loaded = load_thresholds(path);
  REQUIRE(loaded.k == file.k);
  REQUIRE(loaded.t_x == file.t_x);
  REQUIRE(loaded.folds == file.folds);
  REQUIRE(loaded.global == file.global);
}

TEST_CASE("threshold loader rejects damaged files") {
  TempDir tmp("thr_damage");
  auto expect_error = [&](const std::string& name, const std::string& contents,
                          const std::string& needle) {
    const std::string p = tmp.file(name);
    write_file(p, contents);
    REQUIRE_THROWS_WITH(load_thresholds(p), Catch::Matchers::ContainsSubstring(needle));
  };
  expect_error("magic.txt", "adepos-ensemble v1\n", "not an adepos-thresholds v1");
  expect_error("noglobal.txt", "adepos-thresholds v1\nk = 1\nt_x b1 0.3\n", "missing global");
  expect_error("badline.txt", "adepos-thresholds v1\nk = 1\nt_x b1\nglobal = 0.4\n",
               "malformed t_x line");
  expect_error("badtag.txt", "adepos-thresholds v1\nk = 1\nwat b1 0.3\nglobal = 0.4\n",
               "unknown tag 'wat'");
  expect_error("badglobal.txt", "adepos-thresholds v1\nk = 1\nglobal 0.4\n", "malformed global");
}
