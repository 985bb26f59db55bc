// adepos command line: train / calibrate / monitor / sweep / report.
// Every output is a text file under --out; given the same config and seed
// the bytes are identical run to run.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "adepos/adepos.hpp"

namespace fs = std::filesystem;
using namespace adepos;

namespace {

// Values mirrored into RunConfig only when the flag was actually given, so
// precedence is: built-in defaults < --config file < explicit flags.
struct Overrides {
  std::string config_path, manifest, bearing, out, datapath, mode;
  int l = 0, n_max = 0, n_min = 0, n0 = 0, bits = 0, frac = 0, conv_window = 0, norm_fit = 0,
      replicas = 0;
  double k = 0, c = 0, conv_eps = 0, boundary_target = 0;
  long sample_cap = 0;
  unsigned long long seed = 0;
};

void add_common_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_path, "run configuration file")->check(CLI::ExistingFile);
  cmd.add_option("--manifest", o.manifest, "bearing manifest file");
  cmd.add_option("--bearing", o.bearing, "bearing id (defaults to the manifest's only bearing)");
  cmd.add_option("--out", o.out, "output directory");
  cmd.add_option("--l", o.l, "hidden neurons per learner");
  cmd.add_option("--n-max", o.n_max, "ensemble size (odd)");
  cmd.add_option("--n-min", o.n_min, "smallest active ensemble (odd)");
  cmd.add_option("--k", o.k, "threshold margin factor");
  cmd.add_option("--c", o.c, "initial state magnitude for online learning");
  cmd.add_option("--n0", o.n0, "bootstrap sample count (0 = l)");
  cmd.add_option("--bits", o.bits, "fixed-point word size [8,16]");
  cmd.add_option("--frac", o.frac, "fractional bits (-1 = bits-4)");
  cmd.add_option("--datapath", o.datapath, "inference datapath: fixed | float");
  cmd.add_option("--mode", o.mode, "detector mode: boundary | reconstruction");
  cmd.add_option("--seed", o.seed, "master seed");
  cmd.add_option("--conv-eps", o.conv_eps, "convergence threshold on mean relative update");
  cmd.add_option("--conv-window", o.conv_window, "convergence averaging window");
  cmd.add_option("--sample-cap", o.sample_cap, "abort training after this many windows");
  cmd.add_option("--norm-fit", o.norm_fit, "windows used to fit the normalizer (0 = default)");
  cmd.add_option("--boundary-target", o.boundary_target, "boundary-mode training target");
  cmd.add_option("--replicas", o.replicas, "seed replicas for calibrate/sweep");
}

RunConfig build_config(const CLI::App& cmd, const Overrides& o) {
  RunConfig cfg;
  if (cmd.count("--config")) cfg = load_config(o.config_path);
  if (cmd.count("--manifest")) cfg.manifest_path = o.manifest;
  if (cmd.count("--bearing")) cfg.bearing = o.bearing;
  if (cmd.count("--out")) cfg.out_dir = o.out;
  if (cmd.count("--l")) cfg.hidden_count = o.l;
  if (cmd.count("--n-max")) cfg.n_max = o.n_max;
  if (cmd.count("--n-min")) cfg.n_min = o.n_min;
  if (cmd.count("--k")) cfg.k = o.k;
  if (cmd.count("--c")) cfg.c = o.c;
  if (cmd.count("--n0")) cfg.bootstrap_count = o.n0;
  if (cmd.count("--bits")) cfg.bits = o.bits;
  if (cmd.count("--frac")) cfg.frac_bits = o.frac;
  if (cmd.count("--datapath")) cfg.datapath = o.datapath;
  if (cmd.count("--mode")) cfg.mode = o.mode;
  if (cmd.count("--seed")) cfg.master_seed = o.seed;
  if (cmd.count("--conv-eps")) cfg.convergence_eps = o.conv_eps;
  if (cmd.count("--conv-window")) cfg.convergence_window = o.conv_window;
  if (cmd.count("--sample-cap")) cfg.sample_cap = o.sample_cap;
  if (cmd.count("--norm-fit")) cfg.normalizer_fit = o.norm_fit;
  if (cmd.count("--boundary-target")) cfg.boundary_target = o.boundary_target;
  if (cmd.count("--replicas")) cfg.replicas = o.replicas;
  validate(cfg);
  return cfg;
}

BearingManifest require_manifest(const RunConfig& cfg) {
  if (cfg.manifest_path.empty()) throw std::runtime_error("a manifest is required (--manifest)");
  return load_manifest(cfg.manifest_path);
}

// Resolves --bearing, falling back to a single-bearing manifest.
std::size_t bearing_index(const BearingManifest& manifest, const RunConfig& cfg) {
  if (cfg.bearing.empty()) {
    if (manifest.bearings.size() != 1)
      throw std::runtime_error("manifest has " + std::to_string(manifest.bearings.size()) +
                               " bearings; pick one with --bearing");
    return 0;
  }
  for (std::size_t i = 0; i < manifest.bearings.size(); ++i)
    if (manifest.bearings[i].id == cfg.bearing) return i;
  throw std::runtime_error("bearing '" + cfg.bearing + "' not in manifest");
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

void write_train_report(const std::string& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "learner,seed,convergence_samples,train_windows\n";
  for (std::size_t i = 0; i < result.ensemble.learners.size(); ++i)
    out << i << ',' << result.ensemble.learners[i].seed << ',' << result.convergence_samples[i]
        << ',' << result.windows_consumed << '\n';
}

int cmd_train(const CLI::App& cmd, const Overrides& o) {
  const RunConfig cfg = build_config(cmd, o);
  const BearingManifest manifest = require_manifest(cfg);
  const std::size_t index = bearing_index(manifest, cfg);
  const std::string& id = manifest.bearings[index].id;

  const TrainConfig train_cfg = train_config(cfg, derive_base_seed(cfg.master_seed));
  auto source = open_bearing(manifest, id);
  const TrainResult result = train_ensemble(*source, train_cfg);

  const std::string model_path = out_path(cfg, "ensemble.txt");
  save_ensemble(model_path, result);
  write_train_report(out_path(cfg, "train_report.csv"), result);

  std::cout << "trained " << id << ": n=" << result.ensemble.learner_count
            << " l=" << result.ensemble.hidden_count << " windows=" << result.windows_consumed
            << " -> " << model_path << '\n';
  return 0;
}

int cmd_calibrate(const CLI::App& cmd, const Overrides& o) {
  const RunConfig cfg = build_config(cmd, o);
  const BearingManifest manifest = require_manifest(cfg);
  const std::size_t n = manifest.bearings.size();
  if (n < 2) throw std::runtime_error("calibrate needs at least 2 bearings");
  const std::optional<FixedFormat> fmt = datapath_format(cfg);

  ThresholdFile file;
  file.k = cfg.k;
  std::vector<double> t_x(n);
  for (std::size_t b = 0; b < n; ++b) {
    const TrainConfig train_cfg = train_config(cfg, derive_base_seed(cfg.master_seed));
    const BearingRunData run = run_bearing_errors(manifest, manifest.bearings[b].id, train_cfg, fmt);
    t_x[b] = lifetime_max_error(run);
    file.t_x[run.id] = t_x[b];
  }

  std::vector<double> all_good;
  for (std::size_t b = 0; b < n; ++b)
    if (manifest.bearings[b].label == 0) all_good.push_back(t_x[b]);
  if (all_good.size() < 2) throw std::runtime_error("calibrate needs at least 2 good bearings");
  file.global = threshold(all_good, cfg.k);

  for (std::size_t b = 0; b < n; ++b) {
    std::vector<double> fold;
    for (std::size_t o2 = 0; o2 < n; ++o2)
      if (o2 != b && manifest.bearings[o2].label == 0) fold.push_back(t_x[o2]);
    if (fold.size() >= 2) file.folds[manifest.bearings[b].id] = threshold(fold, cfg.k);
  }

  const std::string path = out_path(cfg, "thresholds.txt");
  save_thresholds(path, file);
  std::cout << "calibrated " << file.folds.size() << " folds over " << n << " bearings -> " << path
            << '\n';
  return 0;
}

struct MonitorOptions {
  std::string ensemble_path, thresholds_path;
  double thr = 0.0;
};

int cmd_monitor(const CLI::App& cmd, const Overrides& o, const MonitorOptions& mo) {
  const RunConfig cfg = build_config(cmd, o);
  const BearingManifest manifest = require_manifest(cfg);
  const std::size_t index = bearing_index(manifest, cfg);
  const std::string& id = manifest.bearings[index].id;

  TrainResult trained = load_ensemble(mo.ensemble_path);
  double thr;
  if (cmd.count("--thr")) {
    thr = mo.thr;
  } else if (cmd.count("--thresholds")) {
    const ThresholdFile tf = load_thresholds(mo.thresholds_path);
    const auto fold = tf.folds.find(id);
    thr = fold != tf.folds.end() ? fold->second : tf.global;
  } else {
    throw std::runtime_error("monitor needs --thr or --thresholds");
  }
  trained.ensemble.threshold = thr;

  if (cfg.n_min > trained.ensemble.learner_count)
    throw std::runtime_error("n_min exceeds the ensemble size");
  const ControllerConfig ctrl{cfg.n_min, trained.ensemble.learner_count};

  auto source = open_bearing(manifest, id);
  for (long i = 0; i < trained.windows_consumed; ++i)
    if (!source->next())
      throw std::runtime_error("bearing " + id + " is shorter than its training phase");

  const EnsembleEvaluator evaluator(trained.ensemble, datapath_format(cfg));
  const MonitorLog log = run_monitor(evaluator, trained.normalizer, *source, ctrl);
  write_monitor_csv(out_path(cfg, "monitor_log.csv"), log);

  const EnergyModel model = energy_model(cfg);
  const EnergyReport report =
      trace_energy(model, log, TraceEnergyConfig{cfg.bits, trained.ensemble.mode});
  write_energy_csv(out_path(cfg, "energy.csv"), report);

  char buf[160];
  if (log.fault_declared())
    std::snprintf(buf, sizeof buf, "fault at sample %lld after %zu samples",
                  static_cast<long long>(log.samples.back().timestamp), log.samples.size());
  else
    std::snprintf(buf, sizeof buf, "healthy over %zu samples", log.samples.size());
  std::cout << id << ": " << buf;
  std::snprintf(buf, sizeof buf, " (thr=%.9g, avg l_eff=%.9g, savings=%.9gx)", thr,
                log.average_l_eff(), report.savings_ratio);
  std::cout << buf << '\n';
  return 0;
}

int cmd_sweep(const CLI::App& cmd, const Overrides& o) {
  const RunConfig cfg = build_config(cmd, o);
  const BearingManifest manifest = require_manifest(cfg);

  // Accuracy cells run the full leave-one-out protocol in float; the
  // datapath word size only moves the energy table, not the verdicts.
  const std::string acc_path = out_path(cfg, "sweep_accuracy.csv");
  {
    std::ofstream out(acc_path);
    if (!out) throw std::runtime_error("cannot open " + acc_path);
    out << "l,n_max,accuracy,avg_l_eff\n";
    char buf[96];
    for (const int l : cfg.sweep_l)
      for (const int n_max : cfg.sweep_n) {
        RunConfig cell = cfg;
        cell.hidden_count = l;
        cell.n_max = n_max;
        cell.n_min = std::min(cfg.n_min, n_max);
        cell.datapath = "float";
        LooConfig loo = loo_config(cell);
        const LooReport rep = loo_evaluate(manifest, loo);
        double l_eff = 0.0;
        for (const auto& row : rep.rows) l_eff += row.avg_l_eff;
        l_eff /= static_cast<double>(rep.rows.size());
        std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g\n", l, n_max, rep.accuracy, l_eff);
        out << buf;
      }
  }

  const std::string energy_path = out_path(cfg, "sweep_energy.csv");
  {
    const EnergyModel model = energy_model(cfg);
    const OccMode mode = occ_mode_from_string(cfg.mode);
    std::ofstream out(energy_path);
    if (!out) throw std::runtime_error("cannot open " + energy_path);
    out << "l,n_bl,bits,nj_per_inference\n";
    char buf[96];
    for (const int l : cfg.sweep_l)
      for (const int n_bl : cfg.sweep_n)
        for (const int bits : cfg.sweep_bits) {
          const double nj = model.estimate(static_cast<double>(l) * n_bl, bits, mode);
          std::snprintf(buf, sizeof buf, "%d,%d,%d,%.9g\n", l, n_bl, bits, nj);
          out << buf;
        }
  }

  std::cout << "swept " << cfg.sweep_l.size() * cfg.sweep_n.size() << " accuracy cells -> "
            << acc_path << '\n';
  std::cout << "swept " << cfg.sweep_l.size() * cfg.sweep_n.size() * cfg.sweep_bits.size()
            << " energy cells -> " << energy_path << '\n';
  return 0;
}

int cmd_report(const CLI::App& cmd, const Overrides& o, const std::string& log_path) {
  const RunConfig cfg = build_config(cmd, o);
  const MonitorLog log = read_monitor_csv(log_path, cfg.hidden_count, cfg.n_max);
  const EnergyModel model = energy_model(cfg);
  const EnergyReport report =
      trace_energy(model, log, TraceEnergyConfig{cfg.bits, occ_mode_from_string(cfg.mode)});
  const std::string path = out_path(cfg, "energy.csv");
  write_energy_csv(path, report);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "avg %.9g nJ/sample vs %.9g nJ baseline: %.9gx savings (%.9gx vs reconstruction)",
                report.avg_nj_per_sample, report.baseline_nj, report.savings_ratio,
                report.savings_ratio_vs_reconstruction);
  std::cout << buf << " -> " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive one-class bearing monitor"};
  app.require_subcommand(1);

  Overrides o;
  MonitorOptions mo;
  std::string log_path;

  CLI::App* train = app.add_subcommand("train", "train one bearing's ensemble");
  add_common_options(*train, o);

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "compute leave-one-out detection thresholds");
  add_common_options(*calibrate, o);

  CLI::App* monitor = app.add_subcommand("monitor", "run the adaptive monitor over a bearing");
  add_common_options(*monitor, o);
  monitor->add_option("--ensemble", mo.ensemble_path, "trained ensemble file")
      ->required()
      ->check(CLI::ExistingFile);
  monitor->add_option("--thresholds", mo.thresholds_path, "thresholds file from calibrate")
      ->check(CLI::ExistingFile);
  monitor->add_option("--thr", mo.thr, "explicit detection threshold");

  CLI::App* sweep = app.add_subcommand("sweep", "accuracy and energy over the size grid");
  add_common_options(*sweep, o);

  CLI::App* report = app.add_subcommand("report", "energy summary for an existing monitor log");
  add_common_options(*report, o);
  report->add_option("--log", log_path, "monitor_log.csv to summarize")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(*train, o);
    if (calibrate->parsed()) return cmd_calibrate(*calibrate, o);
    if (monitor->parsed()) return cmd_monitor(*monitor, o, mo);
    if (sweep->parsed()) return cmd_sweep(*sweep, o);
    if (report->parsed()) return cmd_report(*report, o, log_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
