#pragma once

// Ground-truth data generation: fixed-step RK4 for input-driven runs,
// Euler-Maruyama for SDE ensembles, the built-in example systems, and
// measurement-noise injection.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "twinforge/error.hpp"
#include "twinforge/parallel.hpp"
#include "twinforge/random.hpp"
#include "twinforge/targets.hpp"

namespace twinforge {

using Rhs = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t)>;

/// A coefficient of one library column in one state equation.
struct Term {
  std::string label;
  double value = 0.0;
};

/// Discrete realization of the white-noise forcing held over one step.
enum class ForcingConvention {
  white_noise,    // u = sigma * xi / sqrt(dt): same intensity as sigma dB/dt
  unit_variance,  // u = sigma * xi
};

inline const char* forcing_name(ForcingConvention c) {
  return c == ForcingConvention::white_noise ? "white_noise" : "unit_variance";
}

inline ForcingConvention forcing_from_name(const std::string& s) {
  if (s == "white_noise") return ForcingConvention::white_noise;
  if (s == "unit_variance") return ForcingConvention::unit_variance;
  throw ConfigError("unknown forcing convention '" + s + "'");
}

struct SystemDef {
  std::string name;
  std::string description;
  int state_dim = 0;
  int input_dim = 0;
  std::map<std::string, double> params;
  Rhs true_rhs;        // includes the input
  NominalModel nominal;  // known physics, input excluded
  Eigen::MatrixXd diffusion;      // m x n_b, constant
  Eigen::VectorXd forcing_scale;  // per input channel (sigma_c)
  Eigen::VectorXd x0;
  /// Perturbation of each state equation relative to the nominal model, in
  /// library labels; input columns included.
  std::vector<std::vector<Term>> truth;

  /// Truth without input columns (what output-only data can identify).
  std::vector<std::vector<Term>> drift_truth() const {
    auto t = truth;
    for (auto& row : t) std::erase_if(row, [](const Term& x) { return !x.label.empty() && x.label[0] == 'u'; });
    return t;
  }
  Eigen::MatrixXd covariation() const { return diffusion * diffusion.transpose(); }
};

// --------------------------------------------------------------- systems

namespace detail {

inline double param(const std::map<std::string, double>& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw ConfigError("missing system parameter '" + key + "'");
  return it->second;
}

inline std::map<std::string, double> merged(std::map<std::string, double> base,
                                            const std::map<std::string, double>& overrides) {
  for (const auto& [k, v] : overrides) {
    if (!base.count(k)) throw ConfigError("unknown system parameter '" + k + "'");
    base[k] = v;
  }
  return base;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline SystemDef duffing(const std::map<std::string, double>& overrides) {
  SystemDef s;
  s.name = "duffing";
  s.params = merged({{"m", 1.0}, {"c", 2.0}, {"k", 1000.0}, {"alpha", 1e5}, {"sigma", 0.5}}, overrides);
  const double m = param(s.params, "m"), c = param(s.params, "c"), k = param(s.params, "k"),
               a = param(s.params, "alpha"), sg = param(s.params, "sigma");
  s.description = "m x'' + c x' + k x + alpha x^3 = sigma f(t)";
  s.state_dim = 2;
  s.input_dim = 1;
  s.true_rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
    Eigen::VectorXd d(2);
    d << x[1], (-c * x[1] - k * x[0] - a * x[0] * x[0] * x[0] + (u.size() ? u[0] : 0.0)) / m;
    return d;
  };
  s.nominal.state_dim = 2;
  s.nominal.rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) {
    Eigen::VectorXd d(2);
    d << x[1], (-c * x[1] - k * x[0]) / m;
    return d;
  };
  s.nominal.kinematic = {1, -1};
  s.nominal.equations = {"X2", num(-c / m) + "*X2 " + num(-k / m) + "*X1"};
  s.nominal.description = "linear oscillator";
  s.diffusion = Eigen::MatrixXd::Zero(2, 1);
  s.diffusion(1, 0) = sg / m;
  s.forcing_scale = Eigen::VectorXd::Constant(1, sg);
  s.x0 = Eigen::Vector2d(0.1, 0.0);
  s.truth = {{}, {{"X1^3", -a / m}, {"u1", 1.0 / m}}};
  return s;
}

inline SystemDef two_dof(const std::map<std::string, double>& overrides) {
  SystemDef s;
  s.name = "2dof";
  s.params = merged({{"m1", 1.0},
                     {"m2", 1.0},
                     {"c1", 4.0},
                     {"c2", 4.0},
                     {"k1", 4000.0},
                     {"k2", 2000.0},
                     {"alpha", 5e4},
                     {"sigma1", 0.5},
                     {"sigma2", 0.5}},
                    overrides);
  const double m1 = param(s.params, "m1"), m2 = param(s.params, "m2"), c1 = param(s.params, "c1"),
               c2 = param(s.params, "c2"), k1 = param(s.params, "k1"), k2 = param(s.params, "k2"),
               a = param(s.params, "alpha"), s1 = param(s.params, "sigma1"), s2 = param(s.params, "sigma2");
  s.description = "two-storey shear frame with cubic springs; state [x1, x1', x2, x2']";
  s.state_dim = 4;
  s.input_dim = 2;
  const auto linear = [=](const Eigen::VectorXd& x) {
    Eigen::VectorXd d(4);
    d[0] = x[1];
    d[1] = (-(c1 + c2) * x[1] + c2 * x[3] - (k1 + k2) * x[0] + k2 * x[2]) / m1;
    d[2] = x[3];
    d[3] = (c2 * x[1] - c2 * x[3] + k2 * x[0] - k2 * x[2]) / m2;
    return d;
  };
  s.true_rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
    Eigen::VectorXd d = linear(x);
    const double r = x[0] - x[2];
    d[1] += (-a * x[0] * x[0] * x[0] - a * r * r * r + (u.size() ? u[0] : 0.0)) / m1;
    d[3] += (a * r * r * r + (u.size() > 1 ? u[1] : 0.0)) / m2;
    return d;
  };
  s.nominal.state_dim = 4;
  s.nominal.rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) { return linear(x); };
  s.nominal.kinematic = {1, -1, 3, -1};
  s.nominal.equations = {"X2",
                         num(-(c1 + c2) / m1) + "*X2 + " + num(c2 / m1) + "*X4 " + num(-(k1 + k2) / m1) + "*X1 + " +
                             num(k2 / m1) + "*X3",
                         "X4",
                         num(c2 / m2) + "*X2 " + num(-c2 / m2) + "*X4 + " + num(k2 / m2) + "*X1 " +
                             num(-k2 / m2) + "*X3"};
  s.nominal.description = "linear two-storey frame";
  s.diffusion = Eigen::MatrixXd::Zero(4, 2);
  s.diffusion(1, 0) = s1 / m1;
  s.diffusion(3, 1) = s2 / m2;
  s.forcing_scale = Eigen::Vector2d(s1, s2);
  s.x0 = (Eigen::VectorXd(4) << 0.1, 0.0, -0.05, 0.0).finished();
  s.truth = {{},
             {{"X1^3", -2.0 * a / m1}, {"X1^2*X3", 3.0 * a / m1}, {"X1*X3^2", -3.0 * a / m1}, {"X3^3", a / m1},
              {"u1", 1.0 / m1}},
             {},
             {{"X1^3", a / m2}, {"X1^2*X3", -3.0 * a / m2}, {"X1*X3^2", 3.0 * a / m2}, {"X3^3", -a / m2},
              {"u2", 1.0 / m2}}};
  return s;
}

inline SystemDef crack(const std::map<std::string, double>& overrides) {
  SystemDef s;
  s.name = "crack";
  s.params = merged({{"m", 1.0},
                     {"c", 2.0},
                     {"k", 2000.0},
                     {"alpha1", 0.5},
                     {"alpha2", 0.5},
                     {"alpha3", 1.0},
                     {"alpha4", 1.0},
                     {"gamma", 0.001},
                     {"beta", 2.0},
                     {"sigma", 1.0}},
                    overrides);
  const double m = param(s.params, "m"), c = param(s.params, "c"), k = param(s.params, "k"),
               a1 = param(s.params, "alpha1"), a2 = param(s.params, "alpha2"), a3 = param(s.params, "alpha3"),
               a4 = param(s.params, "alpha4"), g = param(s.params, "gamma"), b = param(s.params, "beta"),
               sg = param(s.params, "sigma");
  s.description = "oscillator with crack-degraded stiffness k*lambda(q); state [x, x', q]";
  s.state_dim = 3;
  s.input_dim = 1;
  s.true_rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
    const double q = std::max(x[2], 0.0);
    const double lambda = a1 + a2 * std::exp(-a3 * std::pow(q, a4));
    Eigen::VectorXd d(3);
    d[0] = x[1];
    d[1] = (-c * x[1] - k * lambda * x[0] + (u.size() ? u[0] : 0.0)) / m;
    d[2] = g * std::pow(x[0] * x[0] + x[1] * x[1], 0.5 * b);
    return d;
  };
  s.nominal.state_dim = 3;
  s.nominal.rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) {
    Eigen::VectorXd d(3);
    d << x[1], (-c * x[1] - k * x[0]) / m, 0.0;
    return d;
  };
  s.nominal.kinematic = {1, -1, -1};
  s.nominal.equations = {"X2", num(-c / m) + "*X2 " + num(-k / m) + "*X1", "0"};
  s.nominal.description = "undamaged linear oscillator, no crack growth";
  s.diffusion = Eigen::MatrixXd::Zero(3, 1);
  s.diffusion(1, 0) = sg / m;
  s.forcing_scale = Eigen::VectorXd::Constant(1, sg);
  s.x0 = Eigen::Vector3d(1.0, 0.0, 0.0);
  s.truth.assign(3, {});
  // Only representable in the library for the Table-1 exponents.
  if (a3 == 1.0 && a4 == 1.0) {
    s.truth[1] = {{"X1", k * (1.0 - a1) / m}, {"exp(-X3)*X1", -k * a2 / m}, {"u1", 1.0 / m}};
  } else {
    s.truth[1] = {{"X1", k * (1.0 - a1) / m}, {"u1", 1.0 / m}};
  }
  if (b == 2.0) s.truth[2] = {{"X1^2", g}, {"X2^2", g}};
  return s;
}

}  // namespace detail

inline std::vector<std::string> builtin_system_names() { return {"duffing", "2dof", "crack"}; }

/// A built-in example system with its default parameters replaced by
/// `overrides` (unknown keys are rejected).
inline SystemDef make_system(const std::string& name, const std::map<std::string, double>& overrides = {}) {
  if (name == "duffing") return detail::duffing(overrides);
  if (name == "2dof") return detail::two_dof(overrides);
  if (name == "crack") return detail::crack(overrides);
  throw ConfigError("unknown system '" + name + "'");
}

inline std::vector<SystemDef> builtin_systems() {
  std::vector<SystemDef> out;
  for (const auto& n : builtin_system_names()) out.push_back(make_system(n));
  return out;
}

/// m x'' + c x' + k x = sigma f(t); state [x, x'].
inline SystemDef linear_oscillator(double m, double c, double k, double sigma = 0.0) {
  SystemDef s;
  s.name = "linear";
  s.params = {{"m", m}, {"c", c}, {"k", k}, {"sigma", sigma}};
  s.state_dim = 2;
  s.input_dim = 1;
  s.true_rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
    Eigen::VectorXd d(2);
    d << x[1], (-c * x[1] - k * x[0] + (u.size() ? u[0] : 0.0)) / m;
    return d;
  };
  s.nominal.state_dim = 2;
  s.nominal.rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) {
    Eigen::VectorXd d(2);
    d << x[1], (-c * x[1] - k * x[0]) / m;
    return d;
  };
  s.nominal.kinematic = {1, -1};
  s.nominal.equations = {"X2", detail::num(-c / m) + "*X2 " + detail::num(-k / m) + "*X1"};
  s.diffusion = Eigen::MatrixXd::Zero(2, 1);
  s.diffusion(1, 0) = sigma / m;
  s.forcing_scale = Eigen::VectorXd::Constant(1, sigma);
  s.x0 = Eigen::Vector2d(0.0, 0.0);
  s.truth = {{}, {{"u1", 1.0 / m}}};
  return s;
}

/// dX = -theta X dt + sigma dB, with a zero nominal drift.
inline SystemDef ornstein_uhlenbeck(double theta, double sigma, double x0 = 0.0) {
  SystemDef s;
  s.name = "ou";
  s.params = {{"theta", theta}, {"sigma", sigma}};
  s.state_dim = 1;
  s.input_dim = 0;
  s.true_rhs = [=](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) {
    return Eigen::VectorXd::Constant(1, -theta * x[0]);
  };
  s.nominal.state_dim = 1;
  s.nominal.rhs = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) { return Eigen::VectorXd::Zero(1); };
  s.nominal.kinematic = {-1};
  s.nominal.equations = {"0"};
  s.diffusion = Eigen::MatrixXd::Constant(1, 1, sigma);
  s.forcing_scale = Eigen::VectorXd();
  s.x0 = Eigen::VectorXd::Constant(1, x0);
  s.truth = {{{"X1", -theta}}};
  return s;
}

// ----------------------------------------------------------- integrators

inline int sample_count(double T, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(T > 0.0)) throw ConfigError("duration must be positive");
  const long n = std::lround(T / dt);
  if (n < 2) throw ConfigError("duration shorter than two samples");
  return static_cast<int>(n);
}

inline Eigen::VectorXd rk4_step(const Rhs& f, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t, double dt) {
  const Eigen::VectorXd k1 = f(x, u, t);
  const Eigen::VectorXd k2 = f(x + 0.5 * dt * k1, u, t + 0.5 * dt);
  const Eigen::VectorXd k3 = f(x + 0.5 * dt * k2, u, t + 0.5 * dt);
  const Eigen::VectorXd k4 = f(x + dt * k3, u, t + dt);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

inline void check_state(const Eigen::VectorXd& x, double t_last_good) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12)
    throw SimulationError("state diverged after t = " + std::to_string(t_last_good) + " s", t_last_good);
}

}  // namespace detail

struct ForcingOptions {
  ForcingConvention convention = ForcingConvention::white_noise;
  bool enabled = true;
};

/// Draws the forcing samples u_k (N x n_u) of one deterministic run.
inline Eigen::MatrixXd synthesize_forcing(const SystemDef& sys, int n, double dt, std::uint64_t seed,
                                          const ForcingOptions& opt = {}) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, sys.input_dim);
  if (!opt.enabled || sys.input_dim == 0) return u;
  Rng rng(derive_seed(seed, 0));
  const double scale = opt.convention == ForcingConvention::white_noise ? 1.0 / std::sqrt(dt) : 1.0;
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < sys.input_dim; ++c) u(k, c) = sys.forcing_scale[c] * scale * rng.normal();
  return u;
}

/// Fixed-step RK4 driven by a recorded input held constant over each step.
inline Dataset rk4_simulate_with_input(const SystemDef& sys, const Eigen::MatrixXd& inputs, double dt,
                                       const Eigen::VectorXd* x0 = nullptr) {
  const auto n = inputs.rows();
  if (n < 2) throw ConfigError("need at least two samples");
  Dataset d;
  d.dt = dt;
  d.t = Eigen::VectorXd::LinSpaced(n, 0.0, dt * static_cast<double>(n - 1));
  Trajectory tr;
  tr.states.resize(n, sys.state_dim);
  tr.inputs = inputs;
  Eigen::VectorXd x = x0 != nullptr ? *x0 : sys.x0;
  if (x.size() != sys.state_dim) throw ConfigError("initial state has the wrong dimension");
  tr.states.row(0) = x.transpose();
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    x = rk4_step(sys.true_rhs, x, inputs.row(k).transpose(), d.t[k], dt);
    detail::check_state(x, d.t[k]);
    tr.states.row(k + 1) = x.transpose();
  }
  d.realizations.push_back(std::move(tr));
  d.noise = "none";
  return d;
}

/// RK4 run of T seconds at step dt (T/dt rows) under synthesized forcing.
inline Dataset rk4_simulate(const SystemDef& sys, double T, double dt, std::uint64_t forcing_seed,
                            const ForcingOptions& opt = {}) {
  const int n = sample_count(T, dt);
  return rk4_simulate_with_input(sys, synthesize_forcing(sys, n, dt, forcing_seed, opt), dt);
}

/// Euler-Maruyama ensemble: x_{k+1} = x_k + f(x_k) dt + g sqrt(dt) xi_k. Each
/// realization draws from its own stream derive_seed(seed, index).
inline Dataset em_simulate(const SystemDef& sys, double T, double dt, int n_realizations, std::uint64_t seed,
                           int jobs = 1) {
  const int n = sample_count(T, dt);
  if (n_realizations < 1) throw ConfigError("ensemble size must be >= 1");
  if (sys.diffusion.rows() != sys.state_dim) throw ConfigError("diffusion matrix has the wrong row count");
  Dataset d;
  d.dt = dt;
  d.t = Eigen::VectorXd::LinSpaced(n, 0.0, dt * static_cast<double>(n - 1));
  d.noise = "none";
  d.realizations.resize(static_cast<std::size_t>(n_realizations));
  const Eigen::VectorXd no_input = Eigen::VectorXd::Zero(sys.input_dim);
  const double sq = std::sqrt(dt);
  parallel_for(static_cast<std::size_t>(n_realizations), jobs, [&](std::size_t e) {
    Rng rng(derive_seed(seed, e));
    Trajectory tr;
    tr.states.resize(n, sys.state_dim);
    tr.inputs = Eigen::MatrixXd(n, 0);
    Eigen::VectorXd x = sys.x0;
    Eigen::VectorXd xi(sys.diffusion.cols());
    tr.states.row(0) = x.transpose();
    for (int k = 0; k + 1 < n; ++k) {
      const double t = d.t[k];
      for (Eigen::Index b = 0; b < xi.size(); ++b) xi[b] = rng.normal();
      x = x + sys.true_rhs(x, no_input, t) * dt + sys.diffusion * xi * sq;
      detail::check_state(x, t);
      tr.states.row(k + 1) = x.transpose();
    }
    d.realizations[e] = std::move(tr);
  });
  return d;
}

// ------------------------------------------------------------------ noise

struct NoisePolicy {
  double level = 0.0;  // fraction of each channel's standard deviation
  std::uint64_t seed = 0;
};

/// Adds i.i.d. N(0, (level * std_c)^2) to every state and input channel c,
/// std_c taken over the whole ensemble. The input is kept as `clean`.
inline Dataset corrupt(const Dataset& data, const NoisePolicy& policy) {
  if (policy.level < 0.0) throw ConfigError("noise level must be >= 0");
  Dataset out = data;
  out.clean = data.clean ? data.clean : std::make_shared<const Dataset>(data);
  char buf[96];
  std::snprintf(buf, sizeof buf, "gaussian %.6g x channel std, seed %llu", policy.level,
                static_cast<unsigned long long>(policy.seed));
  out.noise = buf;
  if (policy.level == 0.0) return out;

  const auto channel_std = [&](bool input, Eigen::Index c) {
    double sum = 0.0, sum2 = 0.0, count = 0.0;
    for (const auto& r : data.realizations) {
      const auto col = input ? r.inputs.col(c) : r.states.col(c);
      sum += col.sum();
      sum2 += col.squaredNorm();
      count += static_cast<double>(col.size());
    }
    const double mean = sum / count;
    return std::sqrt(std::max(sum2 / count - mean * mean, 0.0));
  };
  const int m = data.state_dim(), nu = data.input_dim();
  Eigen::VectorXd sd_x(m), sd_u(nu);
  for (int c = 0; c < m; ++c) sd_x[c] = policy.level * channel_std(false, c);
  for (int c = 0; c < nu; ++c) sd_u[c] = policy.level * channel_std(true, c);
  for (std::size_t e = 0; e < out.realizations.size(); ++e) {
    Rng rng(derive_seed(policy.seed ^ 0xA5A5A5A5ULL, e));
    auto& r = out.realizations[e];
    for (Eigen::Index k = 0; k < r.states.rows(); ++k) {
      for (int c = 0; c < m; ++c) r.states(k, c) += sd_x[c] * rng.normal();
      for (int c = 0; c < nu; ++c) r.inputs(k, c) += sd_u[c] * rng.normal();
    }
  }
  return out;
}

}  // namespace twinforge
