#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adepos/fixed_point.hpp"
#include "adepos/prbs.hpp"

namespace adepos {

enum class OccMode { boundary, reconstruction };

inline const char* to_string(OccMode m) {
  return m == OccMode::boundary ? "boundary" : "reconstruction";
}

inline OccMode occ_mode_from_string(const std::string& s) {
  if (s == "boundary") return OccMode::boundary;
  if (s == "reconstruction") return OccMode::reconstruction;
  throw std::invalid_argument("unknown OCC mode: " + s);
}

// Draws L*d + L consecutive words from the LFSR: first the input weights in
// row-major order, then the biases. Bit-identical for a given seed, so the
// random layer never needs to be stored.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> prbs_weights(std::uint16_t seed, int hidden,
                                                                int input_dim) {
  if (hidden <= 0 || input_dim <= 0)
    throw std::invalid_argument("prbs_weights: dimensions must be positive");
  Prbs16 gen(seed);  // rejects seed 0
  Eigen::MatrixXd w(hidden, input_dim);
  for (int j = 0; j < hidden; ++j)
    for (int i = 0; i < input_dim; ++i) w(j, i) = gen.next_weight();
  Eigen::VectorXd b(hidden);
  for (int j = 0; j < hidden; ++j) b(j) = gen.next_weight();
  return {std::move(w), std::move(b)};
}

// One base learner. Boundary mode trains a single output toward a constant
// target; reconstruction mode autoencodes the input.
struct ElmModel {
  int hidden_count = 0;  // L
  int input_dim = 0;     // d
  OccMode mode = OccMode::boundary;
  std::uint16_t seed = 1;
  double boundary_target = 1.0;

  Eigen::MatrixXd input_weights;   // L x d, regenerated from seed
  Eigen::VectorXd biases;          // L
  Eigen::MatrixXd output_weights;  // out_dim x L
  bool beta_ready = false;

  int out_dim() const { return mode == OccMode::boundary ? 1 : input_dim; }
};

inline ElmModel make_elm(int hidden, int input_dim, OccMode mode, std::uint16_t seed,
                         double boundary_target = 1.0) {
  ElmModel m;
  m.hidden_count = hidden;
  m.input_dim = input_dim;
  m.mode = mode;
  m.seed = seed;
  m.boundary_target = boundary_target;
  std::tie(m.input_weights, m.biases) = prbs_weights(seed, hidden, input_dim);
  m.output_weights = Eigen::MatrixXd::Zero(m.out_dim(), hidden);
  return m;
}

// h_j = ReLU(sum_i W_ji x_i + b_j)
inline Eigen::VectorXd hidden_forward(const Eigen::VectorXd& x, const ElmModel& model) {
  if (x.size() != model.input_dim)
    throw std::invalid_argument("hidden_forward: input dimension mismatch");
  return (model.input_weights * x + model.biases).cwiseMax(0.0);
}

// Strictly linear output layer.
inline Eigen::VectorXd output_forward(const Eigen::VectorXd& h, const ElmModel& model) {
  if (!model.beta_ready)
    throw std::logic_error("output_forward: output weights not initialized");
  if (h.size() != model.hidden_count)
    throw std::invalid_argument("output_forward: hidden dimension mismatch");
  return model.output_weights * h;
}

inline Eigen::VectorXd occ_target(const ElmModel& model, const Eigen::VectorXd& x) {
  if (model.mode == OccMode::boundary) {
    Eigen::VectorXd t(1);
    t(0) = model.boundary_target;
    return t;
  }
  return x;
}

// Boundary: deviation of the single output from its target. Reconstruction:
// RMS of the per-component reconstruction error.
inline double occ_error(const Eigen::VectorXd& x, const ElmModel& model,
                        const Eigen::VectorXd& output) {
  if (model.mode == OccMode::boundary) return std::abs(output(0) - model.boundary_target);
  if (output.size() != x.size())
    throw std::invalid_argument("occ_error: output/input dimension mismatch");
  return std::sqrt((output - x).squaredNorm() / static_cast<double>(x.size()));
}

// Hidden outputs and targets over a batch of N samples.
struct BatchDesign {
  Eigen::MatrixXd hidden;   // N x L
  Eigen::MatrixXd targets;  // N x out_dim
};

inline BatchDesign make_design(const std::vector<Eigen::VectorXd>& inputs, const ElmModel& model) {
  if (inputs.empty()) throw std::invalid_argument("make_design: no samples");
  const int n = static_cast<int>(inputs.size());
  BatchDesign d;
  d.hidden.resize(n, model.hidden_count);
  d.targets.resize(n, model.out_dim());
  for (int i = 0; i < n; ++i) {
    d.hidden.row(i) = hidden_forward(inputs[i], model).transpose();
    d.targets.row(i) = occ_target(model, inputs[i]).transpose();
  }
  return d;
}

// Ridge-regularized least squares: beta^T = (H^T H + lambda I)^-1 H^T T.
// With lambda = 0 (and full column rank) this is the pseudo-inverse solution.
inline Eigen::MatrixXd batch_solve(const BatchDesign& design, double ridge) {
  if (design.hidden.rows() == 0) throw std::invalid_argument("batch_solve: empty design");
  if (design.hidden.rows() != design.targets.rows())
    throw std::invalid_argument("batch_solve: H and T row counts differ");
  if (ridge < 0) throw std::invalid_argument("batch_solve: ridge must be >= 0");

  const int l = static_cast<int>(design.hidden.cols());
  const Eigen::MatrixXd normal =
      design.hidden.transpose() * design.hidden + ridge * Eigen::MatrixXd::Identity(l, l);
  const Eigen::MatrixXd rhs = design.hidden.transpose() * design.targets;

  if (ridge == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    if (!lu.isInvertible())
      throw std::runtime_error("batch_solve: singular normal matrix at lambda = 0");
    return lu.solve(rhs).transpose();
  }
  return normal.ldlt().solve(rhs).transpose();
}

// Recursion state for the online pseudo-inverse update. theta tracks the
// inverse regularized Gram matrix of everything seen so far; a fresh state
// starts at theta = cI, the empty-history inverse for lambda = 1/c.
struct OpiumState {
  Eigen::MatrixXd theta;  // L x L, symmetric positive definite
  double c = 100.0;
  int bootstrap_count = 0;           // N0
  Eigen::MatrixXd bootstrap_beta;    // beta0
  long samples_seen = 0;             // updates applied after bootstrap
  std::deque<double> recent_change;  // relative ||dbeta||_F history
  int convergence_window = 50;       // M
  double convergence_eps = 1e-3;
};

inline OpiumState fresh_opium_state(int hidden, double c, int convergence_window = 50,
                                    double convergence_eps = 1e-3) {
  if (c <= 0) throw std::invalid_argument("OpiumState: c must be positive");
  OpiumState s;
  s.theta = c * Eigen::MatrixXd::Identity(hidden, hidden);
  s.c = c;
  s.convergence_window = convergence_window;
  s.convergence_eps = convergence_eps;
  return s;
}

namespace detail {

// Folds one observation into theta: theta <- theta - (theta h)(theta h)^T / (1 + h^T theta h),
// the Sherman-Morrison downdate for theta^-1 <- theta^-1 + h h^T. Returns the
// gain vector eta = theta_new h.
inline Eigen::VectorXd theta_fold(Eigen::MatrixXd& theta, const Eigen::VectorXd& h) {
  const Eigen::VectorXd u = theta * h;  // theta symmetric, so h^T theta = u^T
  const double denom = 1.0 + h.dot(u);
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw std::runtime_error("opium: non-positive or non-finite gain denominator (divergence)");
  theta.noalias() -= (u / denom) * u.transpose();
  return u / denom;
}

}  // namespace detail

// Bootstrap from N0 >= L samples: beta0 is the batch ridge solution at
// lambda = 1/c, and theta absorbs the bootstrap observations so later
// rank-one updates continue the same regularized solution.
inline OpiumState opium_init(const std::vector<Eigen::VectorXd>& bootstrap, ElmModel& model,
                             double c, int convergence_window = 50, double convergence_eps = 1e-3) {
  if (static_cast<int>(bootstrap.size()) < model.hidden_count)
    throw std::invalid_argument("opium_init: bootstrap needs N0 >= L samples");
  OpiumState state =
      fresh_opium_state(model.hidden_count, c, convergence_window, convergence_eps);
  state.bootstrap_count = static_cast<int>(bootstrap.size());

  const BatchDesign design = make_design(bootstrap, model);
  model.output_weights = batch_solve(design, 1.0 / c);
  model.beta_ready = true;
  state.bootstrap_beta = model.output_weights;

  for (int i = 0; i < design.hidden.rows(); ++i)
    detail::theta_fold(state.theta, design.hidden.row(i).transpose());
  return state;
}

// One training sample (Eqs. 4-6 style rank-one recursion):
//   eta  = theta h / (1 + h^T theta h)
//   beta <- beta + (target - beta h) eta^T
//   theta <- theta - eta (h^T theta)
inline void opium_update(OpiumState& state, ElmModel& model, const Eigen::VectorXd& h,
                         const Eigen::VectorXd& target) {
  if (!model.beta_ready) throw std::logic_error("opium_update: state not initialized");
  if (h.size() != model.hidden_count)
    throw std::invalid_argument("opium_update: hidden vector length mismatch");
  if (target.size() != model.out_dim())
    throw std::invalid_argument("opium_update: target length mismatch");

  const Eigen::VectorXd eta = detail::theta_fold(state.theta, h);
  const Eigen::VectorXd residual = target - model.output_weights * h;
  const Eigen::MatrixXd delta = residual * eta.transpose();
  if (!delta.allFinite()) throw std::runtime_error("opium_update: non-finite update (divergence)");
  model.output_weights.noalias() += delta;

  const double beta_norm = model.output_weights.norm();
  const double rel = beta_norm > 0.0 ? delta.norm() / beta_norm : (delta.norm() > 0.0 ? 1.0 : 0.0);
  state.recent_change.push_back(rel);
  while (static_cast<int>(state.recent_change.size()) > state.convergence_window)
    state.recent_change.pop_front();
  ++state.samples_seen;
}

// True once the mean relative change of beta over the last M updates drops
// below eps. Needs at least M updates on record.
inline bool converged(const OpiumState& state) {
  if (static_cast<int>(state.recent_change.size()) < state.convergence_window) return false;
  double sum = 0.0;
  for (const double r : state.recent_change) sum += r;
  return sum / static_cast<double>(state.recent_change.size()) < state.convergence_eps;
}

// Frozen fixed-point view of a trained learner. Inference walks the same
// multiply-accumulate order the serial datapath would: per hidden neuron the
// bias then the d input products, then the output accumulation over L.
class QuantizedElm {
 public:
  QuantizedElm(const ElmModel& model, const FixedFormat& fmt)
      : fmt_(fmt),
        hidden_count_(model.hidden_count),
        input_dim_(model.input_dim),
        out_dim_(model.out_dim()),
        mode_(model.mode),
        boundary_target_(model.boundary_target) {
    validate(fmt);
    if (!model.beta_ready) throw std::logic_error("QuantizedElm: model not trained");
    w_.reserve(static_cast<std::size_t>(hidden_count_) * input_dim_);
    for (int j = 0; j < hidden_count_; ++j)
      for (int i = 0; i < input_dim_; ++i) w_.push_back(quantize(model.input_weights(j, i), fmt).raw);
    b_.reserve(hidden_count_);
    for (int j = 0; j < hidden_count_; ++j) b_.push_back(quantize(model.biases(j), fmt).raw);
    beta_.reserve(static_cast<std::size_t>(out_dim_) * hidden_count_);
    for (int k = 0; k < out_dim_; ++k)
      for (int j = 0; j < hidden_count_; ++j)
        beta_.push_back(quantize(model.output_weights(k, j), fmt).raw);
  }

  const FixedFormat& format() const { return fmt_; }

  // Returns the dequantized network output.
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim_) throw std::invalid_argument("QuantizedElm: dimension mismatch");
    std::vector<FixedValue> xq(input_dim_);
    for (int i = 0; i < input_dim_; ++i) xq[i] = quantize(x(i), fmt_);

    std::vector<FixedValue> h(hidden_count_);
    for (int j = 0; j < hidden_count_; ++j) {
      FixedValue acc{b_[j], fmt_};
      for (int i = 0; i < input_dim_; ++i)
        acc = mac(acc, FixedValue{w_[j * input_dim_ + i], fmt_}, xq[i]);
      h[j] = relu_fixed(acc);
    }

    Eigen::VectorXd out(out_dim_);
    for (int k = 0; k < out_dim_; ++k) {
      FixedValue acc{0, fmt_};
      for (int j = 0; j < hidden_count_; ++j)
        acc = mac(acc, FixedValue{beta_[k * hidden_count_ + j], fmt_}, h[j]);
      out(k) = acc.value();
    }
    return out;
  }

  double error(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd y = forward(x);
    if (mode_ == OccMode::boundary) return std::abs(y(0) - boundary_target_);
    return std::sqrt((y - x).squaredNorm() / static_cast<double>(x.size()));
  }

 private:
  FixedFormat fmt_;
  int hidden_count_, input_dim_, out_dim_;
  OccMode mode_;
  double boundary_target_;
  std::vector<std::int32_t> w_, b_, beta_;
};

}  // namespace adepos
