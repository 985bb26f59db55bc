#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adepos/calibration.hpp"
#include "adepos/energy.hpp"
#include "adepos/kv_file.hpp"
#include "adepos/seeds.hpp"

namespace adepos {

// One run's worth of knobs; see README for the file schema. A single
// master seed expands deterministically into every derived seed, so a
// config file pins the entire run.
struct RunConfig {
  std::string manifest_path;
  std::string out_dir = "out";
  std::string bearing;  // empty: the manifest's only bearing, where one is required

  int hidden_count = 20;  // L
  int n_max = 9;
  int n_min = 1;
  double k = 1.0;
  double c = 100.0;
  int bootstrap_count = 0;  // N0; 0 = L
  int bits = 16;
  int frac_bits = -1;  // -1 = bits - 4
  std::string datapath = "fixed";  // fixed | float
  std::string mode = "boundary";   // boundary | reconstruction
  std::uint64_t master_seed = 1;
  double convergence_eps = 1e-3;
  int convergence_window = 50;
  long sample_cap = 100000;
  int normalizer_fit = 0;  // 0 = default
  double boundary_target = 1.0;
  int replicas = 1;

  // sweep cells are the cross product l x n; bits only scale the energy table
  std::vector<int> sweep_l = {20, 30, 40};
  std::vector<int> sweep_n = {9, 7, 5};
  std::vector<int> sweep_bits = {8, 12, 16};

  std::vector<EnergyAnchor> energy_anchors = default_energy_anchors();
  double energy_rho = 0.0;
  std::map<int, double> energy_scale;  // empty = linear bits/16

  bool operator==(const RunConfig&) const = default;
};

inline bool operator==(const EnergyAnchor& a, const EnergyAnchor& b) {
  return a.l_eff == b.l_eff && a.bits == b.bits && a.mode == b.mode && a.nj == b.nj;
}

inline void validate(const RunConfig& cfg) {
  if (cfg.hidden_count < 1) throw std::invalid_argument("config: l must be >= 1");
  if (cfg.n_max < 1 || cfg.n_max % 2 == 0) throw std::invalid_argument("config: n_max must be odd");
  if (cfg.n_min < 1 || cfg.n_min % 2 == 0 || cfg.n_min > cfg.n_max)
    throw std::invalid_argument("config: n_min must be odd and <= n_max");
  if (cfg.bits < 8 || cfg.bits > 16) throw std::invalid_argument("config: bits must be in [8,16]");
  const int frac = cfg.frac_bits < 0 ? cfg.bits - 4 : cfg.frac_bits;
  if (frac < 0 || frac >= cfg.bits)
    throw std::invalid_argument("config: frac must be in [0,bits-1]");
  if (cfg.datapath != "fixed" && cfg.datapath != "float")
    throw std::invalid_argument("config: datapath must be fixed or float");
  occ_mode_from_string(cfg.mode);
  if (cfg.c <= 0) throw std::invalid_argument("config: c must be positive");
  if (cfg.replicas < 1) throw std::invalid_argument("config: replicas must be >= 1");
  for (const int n : cfg.sweep_n)
    if (n < 1 || n % 2 == 0) throw std::invalid_argument("config: sweep.n entries must be odd");
  for (const int l : cfg.sweep_l)
    if (l < 1) throw std::invalid_argument("config: sweep.l entries must be >= 1");
  for (const int b : cfg.sweep_bits)
    if (b < 8 || b > 16) throw std::invalid_argument("config: sweep.bits entries must be in [8,16]");
}

inline FixedFormat run_format(const RunConfig& cfg) {
  FixedFormat fmt{cfg.bits, cfg.frac_bits < 0 ? cfg.bits - 4 : cfg.frac_bits};
  validate(fmt);
  return fmt;
}

inline std::optional<FixedFormat> datapath_format(const RunConfig& cfg) {
  if (cfg.datapath == "float") return std::nullopt;
  return run_format(cfg);
}

inline TrainConfig train_config(const RunConfig& cfg, std::uint16_t base_seed) {
  TrainConfig t;
  t.learner_count = cfg.n_max;
  t.hidden_count = cfg.hidden_count;
  t.mode = occ_mode_from_string(cfg.mode);
  t.base_seed = base_seed;
  t.c = cfg.c;
  t.bootstrap_count = cfg.bootstrap_count;
  t.convergence_eps = cfg.convergence_eps;
  t.convergence_window = cfg.convergence_window;
  t.sample_cap = cfg.sample_cap;
  t.normalizer_fit_count = cfg.normalizer_fit;
  t.boundary_target = cfg.boundary_target;
  return t;
}

inline ControllerConfig controller_config(const RunConfig& cfg) {
  return ControllerConfig{cfg.n_min, cfg.n_max};
}

inline LooConfig loo_config(const RunConfig& cfg) {
  LooConfig loo;
  loo.train = train_config(cfg, 1);  // per-bearing seeds derived inside
  loo.controller = controller_config(cfg);
  loo.k = cfg.k;
  loo.datapath = datapath_format(cfg);
  loo.master_seed = cfg.master_seed;
  loo.replicas = cfg.replicas;
  return loo;
}

inline EnergyModel energy_model(const RunConfig& cfg) {
  EnergyModel model = calibrate(cfg.energy_anchors);
  model.set_rho(cfg.energy_rho);
  if (!cfg.energy_scale.empty()) model.set_bit_scale(cfg.energy_scale);
  return model;
}

namespace detail {

inline EnergyAnchor parse_anchor(const std::string& s) {
  const auto parts = split_list(s, ':');
  if (parts.size() != 4)
    throw std::runtime_error("energy anchor must be l_eff:bits:mode:nj, got '" + s + "'");
  EnergyAnchor a;
  a.l_eff = parse_double(parts[0], "anchor l_eff");
  a.bits = parse_int(parts[1], "anchor bits");
  a.mode = occ_mode_from_string(parts[2]);
  a.nj = parse_double(parts[3], "anchor nj");
  return a;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& tok : split_list(s)) out.push_back(parse_int(tok, what));
  return out;
}

inline std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  if (key == "manifest") cfg.manifest_path = value;
  else if (key == "out") cfg.out_dir = value;
  else if (key == "bearing") cfg.bearing = value;
  else if (key == "l") cfg.hidden_count = parse_int(value, key);
  else if (key == "n_max") cfg.n_max = parse_int(value, key);
  else if (key == "n_min") cfg.n_min = parse_int(value, key);
  else if (key == "k") cfg.k = parse_double(value, key);
  else if (key == "c") cfg.c = parse_double(value, key);
  else if (key == "n0") cfg.bootstrap_count = parse_int(value, key);
  else if (key == "bits") cfg.bits = parse_int(value, key);
  else if (key == "frac") cfg.frac_bits = parse_int(value, key);
  else if (key == "datapath") cfg.datapath = value;
  else if (key == "mode") cfg.mode = value;
  else if (key == "seed") cfg.master_seed = std::stoull(value);
  else if (key == "conv_eps") cfg.convergence_eps = parse_double(value, key);
  else if (key == "conv_window") cfg.convergence_window = parse_int(value, key);
  else if (key == "sample_cap") cfg.sample_cap = parse_int(value, key);
  else if (key == "norm_fit") cfg.normalizer_fit = parse_int(value, key);
  else if (key == "boundary_target") cfg.boundary_target = parse_double(value, key);
  else if (key == "replicas") cfg.replicas = parse_int(value, key);
  else if (key == "sweep.l") cfg.sweep_l = detail::parse_int_list(value, key);
  else if (key == "sweep.n") cfg.sweep_n = detail::parse_int_list(value, key);
  else if (key == "sweep.bits") cfg.sweep_bits = detail::parse_int_list(value, key);
  else if (key == "energy.rho") cfg.energy_rho = parse_double(value, key);
  else if (key == "energy.anchors") {
    cfg.energy_anchors.clear();
    for (const auto& tok : split_list(value)) cfg.energy_anchors.push_back(detail::parse_anchor(tok));
  } else if (key == "energy.scale") {
    cfg.energy_scale.clear();
    for (const auto& tok : split_list(value)) {
      const auto kv = split_list(tok, ':');
      if (kv.size() != 2) throw std::runtime_error("energy.scale entries must be bits:factor");
      cfg.energy_scale[parse_int(kv[0], "scale bits")] = parse_double(kv[1], "scale factor");
    }
  } else {
    throw std::runtime_error("unknown config key '" + key + "'");
  }
}

inline RunConfig parse_config(const KvFile& kv, const std::string& origin) {
  RunConfig cfg;
  if (kv.sections.size() > 1)
    throw std::runtime_error(origin + ": config files have no sections");
  for (const auto& [k, v] : kv.global().entries) apply_config_entry(cfg, k, v);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  return parse_config(load_kv(path), path);
}

inline void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  using detail::format_double;
  out << "# adepos run configuration\n";
  out << "manifest = " << cfg.manifest_path << '\n';
  out << "out = " << cfg.out_dir << '\n';
  if (!cfg.bearing.empty()) out << "bearing = " << cfg.bearing << '\n';
  out << "l = " << cfg.hidden_count << '\n';
  out << "n_max = " << cfg.n_max << '\n';
  out << "n_min = " << cfg.n_min << '\n';
  out << "k = " << format_double(cfg.k) << '\n';
  out << "c = " << format_double(cfg.c) << '\n';
  out << "n0 = " << cfg.bootstrap_count << '\n';
  out << "bits = " << cfg.bits << '\n';
  out << "frac = " << cfg.frac_bits << '\n';
  out << "datapath = " << cfg.datapath << '\n';
  out << "mode = " << cfg.mode << '\n';
  out << "seed = " << cfg.master_seed << '\n';
  out << "conv_eps = " << format_double(cfg.convergence_eps) << '\n';
  out << "conv_window = " << cfg.convergence_window << '\n';
  out << "sample_cap = " << cfg.sample_cap << '\n';
  out << "norm_fit = " << cfg.normalizer_fit << '\n';
  out << "boundary_target = " << format_double(cfg.boundary_target) << '\n';
  out << "replicas = " << cfg.replicas << '\n';
  out << "sweep.l = " << detail::format_int_list(cfg.sweep_l) << '\n';
  out << "sweep.n = " << detail::format_int_list(cfg.sweep_n) << '\n';
  out << "sweep.bits = " << detail::format_int_list(cfg.sweep_bits) << '\n';
  out << "energy.anchors = ";
  for (std::size_t i = 0; i < cfg.energy_anchors.size(); ++i) {
    const auto& a = cfg.energy_anchors[i];
    if (i) out << ", ";
    out << format_double(a.l_eff) << ':' << a.bits << ':' << to_string(a.mode) << ':'
        << format_double(a.nj);
  }
  out << '\n';
  out << "energy.rho = " << format_double(cfg.energy_rho) << '\n';
  if (!cfg.energy_scale.empty()) {
    out << "energy.scale = ";
    bool first = true;
    for (const auto& [bits, factor] : cfg.energy_scale) {
      if (!first) out << ", ";
      first = false;
      out << bits << ':' << format_double(factor);
    }
    out << '\n';
  }
}

}  // namespace adepos
