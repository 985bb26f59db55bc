#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "adepos/controller.hpp"
#include "adepos/elm.hpp"

namespace adepos {

struct EnergyAnchor {
  double l_eff = 0.0;
  int bits = 16;
  OccMode mode = OccMode::boundary;
  double nj = 0.0;
};

// Post-layout measurements this model is calibrated against by default:
// boundary inference at L_eff 180 and at the adaptive lifetime average
// 20.42, plus the reconstruction-mode figure at L_eff 180, all on the
// 16-bit datapath.
inline std::vector<EnergyAnchor> default_energy_anchors() {
  return {
      {180.0, 16, OccMode::boundary, 178.56},
      {20.42, 16, OccMode::boundary, 44.77},
      {180.0, 16, OccMode::reconstruction, 297.61},
  };
}

// Affine-in-L_eff per-inference energy: E = (alpha*L_eff*mode_factor + gamma)*s(bits)
// + rho*inactive. The fixed overhead gamma is what keeps an 8.8X neuron
// reduction from becoming an 8.8X energy reduction.
class EnergyModel {
 public:
  EnergyModel(double alpha, double gamma, double reconstruction_factor = 1.0, double rho = 0.0)
      : alpha_(alpha), gamma_(gamma), reconstruction_factor_(reconstruction_factor), rho_(rho) {
    if (!(alpha_ > 0.0)) throw std::invalid_argument("EnergyModel: alpha must be positive");
    if (gamma_ < 0.0) throw std::invalid_argument("EnergyModel: gamma must be >= 0");
  }

  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  double reconstruction_factor() const { return reconstruction_factor_; }
  double rho() const { return rho_; }
  void set_rho(double rho) { rho_ = rho; }

  // Replaces the default linear bit scaling s(bits) = bits/16.
  void set_bit_scale(const std::map<int, double>& table) { bit_scale_ = table; }
  const std::map<int, double>& bit_scale_table() const { return bit_scale_; }

  double bit_scale(int bits) const {
    if (bits < 8 || bits > 16) throw std::invalid_argument("EnergyModel: bits out of [8,16]");
    if (!bit_scale_.empty()) {
      const auto it = bit_scale_.find(bits);
      if (it == bit_scale_.end())
        throw std::invalid_argument("EnergyModel: no scale entry for " + std::to_string(bits) +
                                    " bits");
      return it->second;
    }
    return static_cast<double>(bits) / 16.0;
  }

  double mode_factor(OccMode mode) const {
    return mode == OccMode::boundary ? 1.0 : reconstruction_factor_;
  }

  // nJ for one inference at the given effective neuron count.
  double estimate(double l_eff, int bits, OccMode mode, int inactive_learners = 0) const {
    if (!(l_eff > 0.0)) throw std::invalid_argument("EnergyModel: L_eff must be positive");
    if (inactive_learners < 0) throw std::invalid_argument("EnergyModel: negative inactive count");
    return (alpha_ * l_eff * mode_factor(mode) + gamma_) * bit_scale(bits) +
           rho_ * inactive_learners;
  }

 private:
  double alpha_;
  double gamma_;
  double reconstruction_factor_;
  double rho_;
  std::map<int, double> bit_scale_;
};

// Least-squares affine fit of (alpha, gamma) from the boundary anchors at a
// common bit width; the reconstruction factor comes from the remaining
// anchors. Two distinct boundary L_eff points are required.
inline EnergyModel calibrate(const std::vector<EnergyAnchor>& anchors) {
  std::vector<const EnergyAnchor*> boundary, recon;
  int common_bits = -1;
  for (const auto& a : anchors) {
    if (a.bits < 8 || a.bits > 16) throw std::invalid_argument("calibrate: bits out of [8,16]");
    if (common_bits == -1) common_bits = a.bits;
    else if (a.bits != common_bits)
      throw std::invalid_argument("calibrate: anchors must share one bit width");
    (a.mode == OccMode::boundary ? boundary : recon).push_back(&a);
  }
  if (boundary.size() < 2)
    throw std::invalid_argument("calibrate: need >= 2 boundary anchors");

  // Normalize out s(bits) so anchors at any common width fit the 16-bit
  // reference scale; default linear scaling applies during the fit.
  const double scale = static_cast<double>(common_bits) / 16.0;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(boundary.size());
  for (const auto* a : boundary) {
    const double y = a->nj / scale;
    sx += a->l_eff;
    sy += y;
    sxx += a->l_eff * a->l_eff;
    sxy += a->l_eff * y;
  }
  const double det = n * sxx - sx * sx;
  if (!(std::abs(det) > 1e-9 * (n * sxx + sx * sx + 1.0)))
    throw std::invalid_argument("calibrate: degenerate anchors (identical L_eff)");
  const double alpha = (n * sxy - sx * sy) / det;
  const double gamma = (sy - alpha * sx) / n;
  if (!(alpha > 0.0)) throw std::invalid_argument("calibrate: fit yields non-positive alpha");

  double recon_factor = 1.0;
  if (!recon.empty()) {
    // Least squares for the single multiplier over the reconstruction anchors.
    double num = 0, den = 0;
    for (const auto* a : recon) {
      const double target = a->nj / scale - gamma;
      const double basis = alpha * a->l_eff;
      num += basis * target;
      den += basis * basis;
    }
    recon_factor = num / den;
  }
  return EnergyModel(alpha, std::max(gamma, 0.0), recon_factor);
}

struct EnergyReport {
  double total_nj = 0.0;
  double avg_nj_per_sample = 0.0;
  double baseline_nj = 0.0;  // per sample, fixed L_eff = L*N_max at same bits
  double savings_ratio = 0.0;
  double baseline_reconstruction_nj = 0.0;  // same-size reconstruction network
  double savings_ratio_vs_reconstruction = 0.0;
};

struct TraceEnergyConfig {
  int bits = 16;
  OccMode mode = OccMode::boundary;
};

// Sums the per-evaluation estimates over a monitor log; escalation
// re-evaluations are separate inferences. The baseline holds the full
// ensemble active for every sample.
inline EnergyReport trace_energy(const EnergyModel& model, const MonitorLog& log,
                                 const TraceEnergyConfig& cfg = {}) {
  if (log.samples.empty()) throw std::invalid_argument("trace_energy: empty log");
  EnergyReport rep;
  for (const auto& s : log.samples) {
    for (const int n_bl : s.n_bl_per_eval) {
      const double l_eff = static_cast<double>(log.hidden_count) * n_bl;
      rep.total_nj += model.estimate(l_eff, cfg.bits, cfg.mode, log.n_max - n_bl);
    }
  }
  const double n = static_cast<double>(log.samples.size());
  rep.avg_nj_per_sample = rep.total_nj / n;
  const double full = static_cast<double>(log.hidden_count) * log.n_max;
  rep.baseline_nj = model.estimate(full, cfg.bits, cfg.mode);
  rep.savings_ratio = rep.baseline_nj / rep.avg_nj_per_sample;
  rep.baseline_reconstruction_nj = model.estimate(full, cfg.bits, OccMode::reconstruction);
  rep.savings_ratio_vs_reconstruction = rep.baseline_reconstruction_nj / rep.avg_nj_per_sample;
  return rep;
}

inline void write_energy_csv(const std::string& path, const EnergyReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "total_nj,avg_nj_per_sample,baseline_nj,savings_ratio,"
         "baseline_reconstruction_nj,savings_ratio_vs_reconstruction\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", rep.total_nj,
                rep.avg_nj_per_sample, rep.baseline_nj, rep.savings_ratio,
                rep.baseline_reconstruction_nj, rep.savings_ratio_vs_reconstruction);
  out << buf;
}

}  // namespace adepos
