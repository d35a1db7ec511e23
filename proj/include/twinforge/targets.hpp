#pragma once

// Measurement containers and the construction of regression targets:
// input-output residual derivatives (framework 1) and Kramers-Moyal drift and
// diffusion targets from ensembles of output-only trajectories (framework 2).

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "twinforge/dictionary.hpp"
#include "twinforge/error.hpp"

namespace twinforge {

struct Trajectory {
  Eigen::MatrixXd states;  // N x m
  Eigen::MatrixXd inputs;  // N x n_u (zero columns when there is no input)

  bool operator==(const Trajectory&) const = default;
};

struct Dataset {
  Eigen::VectorXd t;
  double dt = 0.0;
  std::vector<Trajectory> realizations;
  std::string noise;  // free-text description of the measurement noise
  /// Noise-free copy kept by corrupt(); null for raw measurements.
  std::shared_ptr<const Dataset> clean;

  Eigen::Index rows() const { return t.size(); }
  int ensemble_size() const { return static_cast<int>(realizations.size()); }
  int state_dim() const { return realizations.empty() ? 0 : static_cast<int>(realizations.front().states.cols()); }
  int input_dim() const { return realizations.empty() ? 0 : static_cast<int>(realizations.front().inputs.cols()); }

  /// Checks shapes, finiteness, and uniform sampling.
  void validate() const {
    if (realizations.empty()) throw DataError("dataset has no realizations");
    if (t.size() < 2) throw DataError("dataset needs at least two samples");
    if (!(dt > 0.0)) throw DataError("sampling step must be positive");
    for (Eigen::Index k = 1; k < t.size(); ++k) {
      const double step = t[k] - t[k - 1];
      if (!(step > 0.0)) throw DataError("timestamps must be strictly increasing");
      if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(t[k])) + 1e-9 * dt)
        throw DataError("timestamps are not uniformly spaced at dt");
    }
    const auto m = realizations.front().states.cols();
    const auto nu = realizations.front().inputs.cols();
    for (const auto& r : realizations) {
      if (r.states.rows() != t.size() || r.states.cols() != m) throw DataError("realization state shape mismatch");
      if (r.inputs.cols() != nu || (nu > 0 && r.inputs.rows() != t.size()))
        throw DataError("realization input shape mismatch");
      if (!r.states.allFinite() || !r.inputs.allFinite()) throw DataError("non-finite measurement values");
    }
  }
};

/// Known prior physics: x' = rhs(x, u, t).
struct NominalModel {
  int state_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t)> rhs;
  /// kinematic[i] = j >= 0 when x_i' = x_j exactly (e.g. displacement and
  /// velocity); -1 otherwise. Such states are never regressed.
  std::vector<int> kinematic;
  /// Per-state equation text of the known physics, used when rendering.
  std::vector<std::string> equations;
  std::string description;

  bool is_kinematic(int i) const {
    return i < static_cast<int>(kinematic.size()) && kinematic[static_cast<std::size_t>(i)] >= 0;
  }
};

enum class ProblemKind { drift_f1, drift_f2, diffusion_f2 };

inline const char* problem_kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::drift_f1: return "drift-f1";
    case ProblemKind::drift_f2: return "drift-f2";
    case ProblemKind::diffusion_f2: return "diffusion-f2";
  }
  return "?";
}

struct RegressionProblem {
  Eigen::VectorXd Y;
  LibraryMatrix L;
  ProblemKind kind = ProblemKind::drift_f1;
  int i = 0;
  int j = 0;
  double dt = 0.0;
  /// Scale of the target before known physics was removed: the variance of
  /// the measured rate for drift problems, the mean squared raw covariation
  /// product for diffusion problems. The residual-energy gate compares the
  /// energy of Y against it.
  double signal_variance = 0.0;
};

struct TargetOptions {
  /// Rows dropped at each end of every realization (derivative stencil edges).
  int trim = 2;
  /// Length of the Hann window applied identically to Y and every library
  /// column before regression; <= 1 disables it.
  int smooth_window = 1;
  /// Keep every stride-th row after smoothing.
  int smooth_stride = 1;
  /// Average rows at matching time index across the ensemble.
  bool ensemble_average = false;
  /// Largest sampling step accepted by the framework-2 builders.
  double max_dt = 5e-3;
  /// Framework-2 diffusion: add lag-one cross products to each squared
  /// increment so white measurement noise cancels in expectation.
  bool noise_corrected = false;
  /// Framework-2 diffusion: sum residual increments over non-overlapping
  /// blocks of this many steps before forming products.
  int covariation_block = 1;
};

// ------------------------------------------------------- differentiation

/// Fourth-order finite-difference derivative of every column: central
/// stencil in the interior, one-sided fourth-order stencils on the two rows
/// at each end.
inline Eigen::MatrixXd differentiate(const Eigen::MatrixXd& x, double dt) {
  const Eigen::Index n = x.rows();
  if (n < 5) throw DataError("differentiation needs at least 5 samples");
  if (!(dt > 0.0)) throw DataError("differentiation step must be positive");
  Eigen::MatrixXd d(n, x.cols());
  const double s = 1.0 / (12.0 * dt);
  for (Eigen::Index k = 2; k < n - 2; ++k)
    d.row(k) = (x.row(k - 2) - 8.0 * x.row(k - 1) + 8.0 * x.row(k + 1) - x.row(k + 2)) * s;
  d.row(0) = (-25.0 * x.row(0) + 48.0 * x.row(1) - 36.0 * x.row(2) + 16.0 * x.row(3) - 3.0 * x.row(4)) * s;
  d.row(1) = (-3.0 * x.row(0) - 10.0 * x.row(1) + 18.0 * x.row(2) - 6.0 * x.row(3) + x.row(4)) * s;
  d.row(n - 1) = (25.0 * x.row(n - 1) - 48.0 * x.row(n - 2) + 36.0 * x.row(n - 3) - 16.0 * x.row(n - 4) +
                  3.0 * x.row(n - 5)) * s;
  d.row(n - 2) = (3.0 * x.row(n - 1) + 10.0 * x.row(n - 2) - 18.0 * x.row(n - 3) + 6.0 * x.row(n - 4) -
                  x.row(n - 5)) * s;
  return d;
}

inline Eigen::VectorXd differentiate(const Eigen::VectorXd& x, double dt) {
  return differentiate(Eigen::MatrixXd(x), dt).col(0);
}

// ------------------------------------------------------------ smoothing

/// Normalized Hann window of length w (end zeros excluded).
inline Eigen::VectorXd hann_window(int w) {
  Eigen::VectorXd win(w);
  for (int n = 1; n <= w; ++n) win[n - 1] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / (w + 1));
  return win / win.sum();
}

/// "Valid" convolution of each column with the window, keeping every
/// stride-th output row.
inline Eigen::MatrixXd smooth_rows(const Eigen::MatrixXd& a, int window, int stride) {
  if (window <= 1 && stride <= 1) return a;
  const int w = std::max(window, 1);
  const Eigen::VectorXd win = w > 1 ? hann_window(w) : Eigen::VectorXd::Ones(1);
  const Eigen::Index n_valid = a.rows() - w + 1;
  if (n_valid < 1) throw DataError("smoothing window longer than the record");
  const int st = std::max(stride, 1);
  const Eigen::Index n_out = (n_valid + st - 1) / st;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_out, a.cols());
  for (Eigen::Index r = 0; r < n_out; ++r) {
    const Eigen::Index start = r * st;
    for (int q = 0; q < w; ++q) out.row(r) += win[q] * a.row(start + q);
  }
  return out;
}

namespace detail {

inline void require_input(const Dataset& data, const LibrarySpec& spec) {
  if (spec.include_input && data.input_dim() < spec.input_dim)
    throw DataError("library uses input columns but the dataset has no matching input channels");
}

inline void check_state_index(const Dataset& data, int i) {
  if (i < 0 || i >= data.state_dim()) throw DataError("state index " + std::to_string(i) + " out of range");
}

inline Eigen::VectorXd input_row(const Trajectory& tr, Eigen::Index k) {
  if (tr.inputs.cols() == 0) return Eigen::VectorXd();
  return tr.inputs.row(k).transpose();
}

/// Applies smoothing/decimation and ensemble averaging to per-realization
/// blocks [Y | L], then stacks them.
inline RegressionProblem assemble(std::vector<Eigen::MatrixXd> blocks, const LibraryMatrix& proto,
                                  const TargetOptions& opt) {
  for (auto& b : blocks) b = smooth_rows(b, opt.smooth_window, opt.smooth_stride);
  if (opt.ensemble_average && blocks.size() > 1) {
    Eigen::MatrixXd mean = blocks.front();
    for (std::size_t e = 1; e < blocks.size(); ++e) mean += blocks[e];
    mean /= static_cast<double>(blocks.size());
    blocks.assign(1, mean);
  }
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.rows();
  Eigen::MatrixXd all(total, proto.cols() + 1);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    all.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  RegressionProblem p;
  p.Y = all.col(0);
  p.L.values = all.rightCols(proto.cols());
  p.L.column_labels = proto.column_labels;
  p.L.spec = proto.spec;
  return p;
}

inline Eigen::MatrixXd join(const Eigen::VectorXd& y, const Eigen::MatrixXd& L) {
  Eigen::MatrixXd b(y.size(), L.cols() + 1);
  b.col(0) = y;
  b.rightCols(L.cols()) = L;
  return b;
}

}  // namespace detail

// ---------------------------------------------------------- framework 1

/// Residual derivative targets Y = x_i' - f_i(x, t). The derivative comes
/// from the measured partner channel for kinematic states and from
/// differentiate() otherwise.
inline RegressionProblem build_f1(const Dataset& data, const NominalModel& nominal, const LibrarySpec& spec, int i,
                                  const TargetOptions& opt = {}) {
  data.validate();
  detail::check_state_index(data, i);
  detail::require_input(data, spec);
  if (nominal.state_dim != data.state_dim()) throw DataError("nominal model and dataset state dimensions differ");
  const Eigen::Index n = data.rows();
  if (n - 2 * opt.trim < 1) throw DataError("record too short after trimming");

  std::vector<Eigen::MatrixXd> blocks;
  LibraryMatrix proto;
  double s1 = 0.0, s2 = 0.0, cnt = 0.0;
  for (const auto& tr : data.realizations) {
    Eigen::VectorXd deriv;
    if (nominal.is_kinematic(i))
      deriv = tr.states.col(nominal.kinematic[static_cast<std::size_t>(i)]);
    else
      deriv = differentiate(Eigen::VectorXd(tr.states.col(i)), data.dt);
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::VectorXd f = nominal.rhs(tr.states.row(k).transpose(), detail::input_row(tr, k), data.t[k]);
      y[k] = deriv[k] - f[i];
    }
    const Eigen::MatrixXd* in = tr.inputs.cols() > 0 ? &tr.inputs : nullptr;
    LibraryMatrix L = evaluate(spec, tr.states, in);
    const Eigen::Index keep = n - 2 * opt.trim;
    s1 += deriv.segment(opt.trim, keep).sum();
    s2 += deriv.segment(opt.trim, keep).squaredNorm();
    cnt += static_cast<double>(keep);
    blocks.push_back(detail::join(y.segment(opt.trim, keep), L.values.middleRows(opt.trim, keep)));
    proto.column_labels = L.column_labels;
    proto.spec = L.spec;
    proto.values.resize(0, L.cols());
  }
  auto p = detail::assemble(std::move(blocks), proto, opt);
  p.signal_variance = std::max(s2 / cnt - (s1 / cnt) * (s1 / cnt), 0.0);
  p.kind = ProblemKind::drift_f1;
  p.i = p.j = i;
  p.dt = data.dt;
  return p;
}

// ---------------------------------------------------------- framework 2

/// Extra drift (beyond the nominal model) removed from increments before the
/// diffusion target is formed; maps a state to an m-vector.
using DriftFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;

namespace detail {

/// Increments dZ_k = x_{k+1} - x_k - (f(x_k, t_k) + extra(x_k)) dt, for k = 0..N-2.
inline Eigen::MatrixXd nominal_free_increments(const Dataset& data, const Trajectory& tr, const NominalModel& nominal,
                                               const DriftFunction* extra) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd d(n - 1, tr.states.cols());
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const Eigen::VectorXd x = tr.states.row(k).transpose();
    Eigen::VectorXd f = nominal.rhs(x, input_row(tr, k), data.t[k]);
    if (extra != nullptr && *extra) f += (*extra)(x);
    d.row(k) = tr.states.row(k + 1) - tr.states.row(k) - f.transpose() * data.dt;
  }
  return d;
}

inline void check_f2(const Dataset& data, const NominalModel& nominal, const TargetOptions& opt) {
  data.validate();
  if (nominal.state_dim != data.state_dim()) throw DataError("nominal model and dataset state dimensions differ");
  if (data.dt > opt.max_dt)
    throw DataError("sampling step " + std::to_string(data.dt) + " s exceeds the Kramers-Moyal limit of " +
                    std::to_string(opt.max_dt) + " s");
}

}  // namespace detail

/// Drift targets Y_k = dZ_{i,k} / dt with the nominal drift removed; the
/// library is evaluated at x_k.
inline RegressionProblem build_f2_drift(const Dataset& data, const NominalModel& nominal, const LibrarySpec& spec,
                                        int i, const TargetOptions& opt = {}) {
  detail::check_f2(data, nominal, opt);
  detail::check_state_index(data, i);
  detail::require_input(data, spec);
  const Eigen::Index n = data.rows();
  std::vector<Eigen::MatrixXd> blocks;
  LibraryMatrix proto;
  double s1 = 0.0, s2 = 0.0, cnt = 0.0;
  for (const auto& tr : data.realizations) {
    const Eigen::MatrixXd d = detail::nominal_free_increments(data, tr, nominal, nullptr);
    const Eigen::VectorXd rate = (tr.states.col(i).tail(n - 1) - tr.states.col(i).head(n - 1)) / data.dt;
    s1 += rate.sum();
    s2 += rate.squaredNorm();
    cnt += static_cast<double>(rate.size());
    const Eigen::MatrixXd* in = tr.inputs.cols() > 0 ? &tr.inputs : nullptr;
    LibraryMatrix L = evaluate(spec, tr.states, in);
    blocks.push_back(detail::join(d.col(i) / data.dt, L.values.topRows(n - 1)));
    proto.column_labels = L.column_labels;
    proto.spec = L.spec;
    proto.values.resize(0, L.cols());
  }
  auto p = detail::assemble(std::move(blocks), proto, opt);
  p.signal_variance = std::max(s2 / cnt - (s1 / cnt) * (s1 / cnt), 0.0);
  p.kind = ProblemKind::drift_f2;
  p.i = p.j = i;
  p.dt = data.dt;
  return p;
}

/// Covariation targets Y_k = dZ_{i,k} dZ_{j,k} / dt identifying the (i,j)
/// entry of g g^T. With opt.noise_corrected the lag-one cross products are
/// added (symmetrized for i != j), which removes the contribution of white
/// measurement noise; rows then run over k = 1..N-3.
inline RegressionProblem build_f2_diffusion(const Dataset& data, const NominalModel& nominal, const LibrarySpec& spec,
                                            int i, int j, const TargetOptions& opt = {},
                                            const DriftFunction* extra_drift = nullptr) {
  detail::check_f2(data, nominal, opt);
  detail::check_state_index(data, i);
  detail::check_state_index(data, j);
  detail::require_input(data, spec);
  if (opt.covariation_block < 1) throw ConfigError("covariation_block must be >= 1");
  std::vector<Eigen::MatrixXd> blocks;
  LibraryMatrix proto;
  double s2 = 0.0, cnt = 0.0;
  for (const auto& tr : data.realizations) {
    const Eigen::MatrixXd inc = detail::nominal_free_increments(data, tr, nominal, extra_drift);
    const Eigen::Index b = opt.covariation_block;
    const Eigen::Index nd = inc.rows() / b;
    Eigen::MatrixXd d(nd, inc.cols());
    for (Eigen::Index k = 0; k < nd; ++k) d.row(k) = inc.middleRows(k * b, b).colwise().sum();
    const double h = data.dt * static_cast<double>(b);
    for (Eigen::Index k = 0; k < nd; ++k) {
      const double raw = (tr.states(k * b + b, i) - tr.states(k * b, i)) * (tr.states(k * b + b, j) - tr.states(k * b, j)) / h;
      s2 += raw * raw;
      cnt += 1.0;
    }
    const Eigen::MatrixXd* in = tr.inputs.cols() > 0 ? &tr.inputs : nullptr;
    const LibraryMatrix full = evaluate(spec, tr.states, in);
    LibraryMatrix L = full;
    L.values.resize(nd, full.cols());
    for (Eigen::Index k = 0; k < nd; ++k) L.values.row(k) = full.values.row(k * b);
    Eigen::VectorXd y;
    Eigen::MatrixXd rows;
    if (opt.noise_corrected) {
      if (nd < 3) throw DataError("record too short for noise-corrected covariation");
      y.resize(nd - 2);
      for (Eigen::Index k = 1; k + 1 < nd; ++k) {
        const double a = d(k, i) * d(k, j);
        const double next = 0.5 * (d(k, i) * d(k + 1, j) + d(k + 1, i) * d(k, j));
        const double prev = 0.5 * (d(k, i) * d(k - 1, j) + d(k - 1, i) * d(k, j));
        y[k - 1] = (a + next + prev) / h;
      }
      rows = L.values.middleRows(1, nd - 2);
    } else {
      if (nd < 1) throw DataError("record shorter than one covariation block");
      y = d.col(i).cwiseProduct(d.col(j)) / h;
      rows = L.values;
    }
    blocks.push_back(detail::join(y, rows));
    proto.column_labels = L.column_labels;
    proto.spec = L.spec;
    proto.values.resize(0, L.cols());
  }
  auto p = detail::assemble(std::move(blocks), proto, opt);
  p.signal_variance = cnt > 0.0 ? s2 / cnt : 0.0;
  p.kind = ProblemKind::diffusion_f2;
  p.i = i;
  p.j = j;
  p.dt = data.dt;
  return p;
}

}  // namespace twinforge
