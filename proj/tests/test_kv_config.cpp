#include <cstdio>
#include <filesystem>

#include "catch_amalgamated.hpp"

#include "adepos/config.hpp"
#include "adepos/kv_file.hpp"

using namespace adepos;

TEST_CASE("kv parser splits sections, comments and values") {
  const KvFile kv = parse_kv_string(
      "# header comment\n"
      "rate = 20480\n"
      "\n"
      "[bearing b1]\n"
      "label = 0\n"
      "dir = data/b1\n"
      "[bearing b2]\n"
      "label=1\n");
  REQUIRE(kv.sections.size() == 3);
  REQUIRE(kv.global().entries.size() == 1);
  REQUIRE(*kv.global().find("rate") == "20480");
  REQUIRE(kv.sections[1].name == "bearing b1");
  REQUIRE(*kv.sections[1].find("dir") == "data/b1");
  REQUIRE(*kv.sections[2].find("label") == "1");
  REQUIRE(kv.sections[2].find("missing") == nullptr);
}

TEST_CASE("kv parser reports the offending line") {
  try {
    parse_kv_string("a = 1\nno equals here\n", "cfg.txt");
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    REQUIRE(std::string(e.what()).find("cfg.txt:2") != std::string::npos);
  }
  REQUIRE_THROWS_AS(parse_kv_string("[unclosed\n"), std::runtime_error);
  REQUIRE_THROWS_AS(parse_kv_string("= value\n"), std::runtime_error);
}

TEST_CASE("split_list trims and drops empties") {
  const auto toks = split_list(" a, b ,,c ");
  REQUIRE(toks == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(split_list("8:0.5", ':') == std::vector<std::string>{"8", "0.5"});
  REQUIRE(split_list("").empty());
}

TEST_CASE("run config defaults validate") {
  RunConfig cfg;
  REQUIRE_NOTHROW(validate(cfg));
  REQUIRE(run_format(cfg) == FixedFormat{16, 12});
  REQUIRE(datapath_format(cfg).has_value());
  cfg.datapath = "float";
  REQUIRE_FALSE(datapath_format(cfg).has_value());
}

TEST_CASE("run config rejects bad knobs") {
  RunConfig cfg;
  cfg.n_max = 8;
  REQUIRE_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = RunConfig{};
  cfg.bits = 20;
  REQUIRE_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = RunConfig{};
  cfg.datapath = "analog";
  REQUIRE_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = RunConfig{};
  cfg.sweep_n = {4};
  REQUIRE_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("config files parse every key") {
  const RunConfig cfg = parse_config(parse_kv_string(
      "manifest = m.txt\n"
      "l = 30\n"
      "n_max = 7\n"
      "k = 1.5\n"
      "bits = 12\n"
      "frac = 9\n"
      "datapath = float\n"
      "seed = 42\n"
      "sweep.l = 10, 20\n"
      "sweep.n = 5, 3\n"
      "energy.anchors = 10:16:boundary:40, 20:16:boundary:50\n"
      "energy.scale = 8:0.5, 16:1\n"), "<test>");
  REQUIRE(cfg.manifest_path == "m.txt");
  REQUIRE(cfg.hidden_count == 30);
  REQUIRE(cfg.n_max == 7);
  REQUIRE(cfg.k == 1.5);
  REQUIRE(cfg.bits == 12);
  REQUIRE(cfg.frac_bits == 9);
  REQUIRE(cfg.master_seed == 42);
  REQUIRE(cfg.sweep_l == std::vector<int>{10, 20});
  REQUIRE(cfg.energy_anchors.size() == 2);
  REQUIRE(cfg.energy_anchors[1].nj == 50.0);
  REQUIRE(cfg.energy_scale.at(8) == 0.5);
}

TEST_CASE("unknown config keys are an error") {
  REQUIRE_THROWS_AS(parse_config(parse_kv_string("bogus = 1\n"), "<test>"), std::runtime_error);
  REQUIRE_THROWS_AS(parse_config(parse_kv_string("[section]\nl = 2\n"), "<test>"),
                    std::runtime_error);
}

TEST_CASE("config save/load round trip is lossless") {
  RunConfig cfg;
  cfg.manifest_path = "bearings.txt";
  cfg.bearing = "b3";
  cfg.hidden_count = 25;
  cfg.n_max = 7;
  cfg.n_min = 3;
  cfg.k = 1.0 / 3.0;  // not representable in short decimal
  cfg.c = 123.456;
  cfg.bits = 10;
  cfg.frac_bits = 7;
  cfg.datapath = "float";
  cfg.mode = "reconstruction";
  cfg.master_seed = 0xDEADBEEFull;
  cfg.convergence_eps = 1e-4;
  cfg.replicas = 3;
  cfg.sweep_l = {12, 24};
  cfg.sweep_n = {3};
  cfg.sweep_bits = {9, 11};
  cfg.energy_rho = 0.125;
  cfg.energy_scale = {{8, 0.5}, {16, 1.0}};
  cfg.energy_anchors = {{17.3, 16, OccMode::boundary, 41.7},
                        {180.0, 16, OccMode::reconstruction, 300.0},
                        {55.0, 16, OccMode::boundary, 77.0}};

  const std::string path =
      (std::filesystem::temp_directory_path() / "adepos_cfg_roundtrip.txt").string();
  save_config(path, cfg);
  const RunConfig loaded = load_config(path);
  REQUIRE(loaded == cfg);
  std::remove(path.c_str());
}
