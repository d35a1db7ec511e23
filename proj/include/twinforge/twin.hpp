#pragma once

// Digital-twin updating: per-state regression problems, sampler runs, the
// resulting term lists, equation rendering, prediction, and noise sweeps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "twinforge/dictionary.hpp"
#include "twinforge/error.hpp"
#include "twinforge/parallel.hpp"
#include "twinforge/random.hpp"
#include "twinforge/sampler.hpp"
#include "twinforge/simulate.hpp"
#include "twinforge/targets.hpp"

namespace twinforge {

struct TermEstimate {
  std::string label;
  double mean = 0.0;
  double std = 0.0;
  double pip = 0.0;
};

struct StateEquation {
  int state = 0;
  bool regressed = false;
  std::string note;  // why the state was not regressed
  PosteriorSummary summary;
  std::vector<TermEstimate> terms;
};

struct DiffusionEquation {
  int i = 0;
  int j = 0;
  PosteriorSummary summary;
  std::vector<TermEstimate> terms;  // identified entry of g g^T
  /// sqrt of the constant term for diagonal entries with positive mean;
  /// NaN otherwise.
  double magnitude = std::numeric_limits<double>::quiet_NaN();
  double magnitude_std = std::numeric_limits<double>::quiet_NaN();
};

struct UpdatedTwin {
  int framework = 1;
  std::string system;                    // built-in system the nominal model came from
  std::map<std::string, double> params;  // its parameters
  NominalModel nominal;
  LibrarySpec drift_spec;
  LibrarySpec diffusion_spec;
  Hyperparameters hp;
  TargetOptions drift_options;
  TargetOptions diffusion_options;
  std::uint64_t seed = 0;
  std::vector<StateEquation> states;
  std::vector<DiffusionEquation> diffusion;

  /// Discovered coefficient of `label` in state i's equation (0 if absent).
  double coefficient(int i, const std::string& label) const {
    for (const auto& t : states.at(static_cast<std::size_t>(i)).terms)
      if (t.label == label) return t.mean;
    return 0.0;
  }
  std::vector<std::string> selected_labels(int i) const {
    std::vector<std::string> out;
    for (const auto& t : states.at(static_cast<std::size_t>(i)).terms) out.push_back(t.label);
    return out;
  }
  const DiffusionEquation* diffusion_entry(int i, int j) const {
    for (const auto& d : diffusion)
      if (d.i == i && d.j == j) return &d;
    return nullptr;
  }
};

namespace detail {

inline std::vector<TermEstimate> terms_of(const PosteriorSummary& s) {
  std::vector<TermEstimate> out;
  for (int k : s.selected) {
    const auto u = static_cast<std::size_t>(k);
    out.push_back({s.labels[u], s.mu_theta[k], s.std_of(u), s.pip[k]});
  }
  return out;
}

inline std::uint64_t state_seed(std::uint64_t seed, int i, int j = -1) {
  return derive_seed(seed, static_cast<std::uint64_t>(1000 + 97 * (i + 1) + (j + 1)));
}

/// Residual-energy gate: a state whose residual carries essentially no
/// energy relative to its measured rate is not regressed.
inline bool below_energy_floor(const RegressionProblem& p) {
  if (p.Y.size() == 0) return true;
  const double mean = p.Y.mean();
  const double var = (p.Y.array() - mean).square().mean();
  const double energy = var + mean * mean;
  return energy <= 1e-12 * p.signal_variance || energy == 0.0;
}

inline StateEquation regress_state(const RegressionProblem& p, const Hyperparameters& hp, std::uint64_t seed) {
  StateEquation eq;
  eq.state = p.i;
  if (below_energy_floor(p)) {
    eq.note = "residual below energy floor";
    return eq;
  }
  try {
    eq.summary = run_chain(p.Y, p.L, hp, seed);
  } catch (const SamplerError& e) {
    throw SamplerError("state " + std::to_string(p.i + 1) + ": " + e.what(), e.columns());
  }
  eq.regressed = true;
  eq.terms = terms_of(eq.summary);
  return eq;
}

}  // namespace detail

/// Input-output update: one regression per non-kinematic state on residual
/// derivatives.
inline UpdatedTwin update_f1(const Dataset& data, const NominalModel& nominal, const LibrarySpec& spec,
                             const Hyperparameters& hp, std::uint64_t seed, const TargetOptions& opt = {},
                             int jobs = 1) {
  UpdatedTwin twin;
  twin.framework = 1;
  twin.nominal = nominal;
  twin.drift_spec = spec;
  twin.hp = hp;
  twin.drift_options = opt;
  twin.seed = seed;
  const int m = data.state_dim();
  twin.states.resize(static_cast<std::size_t>(m));
  parallel_for(static_cast<std::size_t>(m), jobs, [&](std::size_t u) {
    const int i = static_cast<int>(u);
    auto& eq = twin.states[u];
    eq.state = i;
    if (nominal.is_kinematic(i)) {
      eq.note = "kinematic identity";
      return;
    }
    const auto p = build_f1(data, nominal, spec, i, opt);
    eq = detail::regress_state(p, hp, detail::state_seed(seed, i));
  });
  return twin;
}

/// Drift implied by the discovered terms of each regressed state.
inline DriftFunction discovered_drift(const UpdatedTwin& twin) {
  const auto cols = enumerate_columns(twin.drift_spec);
  struct Piece {
    int state;
    Column col;
    double coef;
  };
  std::vector<Piece> pieces;
  for (const auto& eq : twin.states)
    for (int k : eq.summary.selected)
      pieces.push_back({eq.state, cols[static_cast<std::size_t>(k)], eq.summary.mu_theta[k]});
  const int m = static_cast<int>(twin.states.size());
  return [pieces, m](const Eigen::VectorXd& x) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(m);
    const Eigen::VectorXd no_input;
    for (const auto& p : pieces) f[p.state] += p.coef * evaluate_column(p.col, x, no_input);
    return f;
  };
}

/// Output-only update: drift regressions per non-kinematic state, then
/// covariation regressions per pair of non-kinematic states with the
/// nominal and discovered drift removed from the increments.
inline UpdatedTwin update_f2(const Dataset& data, const NominalModel& nominal, const LibrarySpec& drift_spec,
                             const LibrarySpec& diffusion_spec, const Hyperparameters& hp, std::uint64_t seed,
                             const TargetOptions& drift_opt = {}, const TargetOptions& diffusion_opt = {},
                             int jobs = 1) {
  UpdatedTwin twin;
  twin.framework = 2;
  twin.nominal = nominal;
  twin.drift_spec = drift_spec;
  twin.diffusion_spec = diffusion_spec;
  twin.hp = hp;
  twin.drift_options = drift_opt;
  twin.diffusion_options = diffusion_opt;
  twin.seed = seed;
  const int m = data.state_dim();
  twin.states.resize(static_cast<std::size_t>(m));
  parallel_for(static_cast<std::size_t>(m), jobs, [&](std::size_t u) {
    const int i = static_cast<int>(u);
    auto& eq = twin.states[u];
    eq.state = i;
    if (nominal.is_kinematic(i)) {
      eq.note = "kinematic identity";
      return;
    }
    const auto p = build_f2_drift(data, nominal, drift_spec, i, drift_opt);
    eq = detail::regress_state(p, hp, detail::state_seed(seed, i));
  });

  const DriftFunction extra = discovered_drift(twin);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j)
      if (!nominal.is_kinematic(i) && !nominal.is_kinematic(j)) pairs.emplace_back(i, j);
  std::vector<DiffusionEquation> diff(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t q) {
    const auto [i, j] = pairs[q];
    const auto p = build_f2_diffusion(data, nominal, diffusion_spec, i, j, diffusion_opt, &extra);
    auto& d = diff[q];
    d.i = i;
    d.j = j;
    if (detail::below_energy_floor(p)) return;
    try {
      d.summary = run_chain(p.Y, p.L, hp, detail::state_seed(seed, i, j));
    } catch (const SamplerError& e) {
      throw SamplerError("diffusion (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "): " + e.what(),
                         e.columns());
    }
    d.terms = detail::terms_of(d.summary);
    if (i == j) {
      for (const auto& t : d.terms) {
        if (t.label == "1" && t.mean > 0.0) {
          d.magnitude = std::sqrt(t.mean);
          d.magnitude_std = t.std / (2.0 * d.magnitude);
        }
      }
    }
  });
  twin.diffusion = std::move(diff);
  return twin;
}

// -------------------------------------------------------------- rendering

namespace detail {

inline std::string fmt(double v, int digits = 10) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace detail

/// One line per state: "dXi/dt = <nominal> + (mean ± std)*label ...", with
/// "+ s*dBi/dt" appended for identified diagonal diffusion magnitudes.
inline std::string render_equations(const UpdatedTwin& twin) {
  std::ostringstream out;
  const int m = static_cast<int>(twin.states.size());
  for (int i = 0; i < m; ++i) {
    out << "dX" << (i + 1) << "/dt = ";
    const std::string nominal =
        i < static_cast<int>(twin.nominal.equations.size()) ? twin.nominal.equations[static_cast<std::size_t>(i)] : "";
    out << (nominal.empty() ? "0" : nominal);
    for (const auto& t : twin.states[static_cast<std::size_t>(i)].terms)
      out << " + (" << detail::fmt(t.mean) << " ± " << detail::fmt(t.std, 4) << ")*" << t.label;
    if (const auto* d = twin.diffusion_entry(i, i); d != nullptr && std::isfinite(d->magnitude))
      out << " + " << detail::fmt(d->magnitude, 4) << "*dB" << (i + 1) << "/dt";
    out << "\n";
  }
  return out.str();
}

struct ParsedTerm {
  int state = 0;
  std::string label;
  double mean = 0.0;
  double std = 0.0;
};

/// Reads the discovered terms back out of render_equations() text.
inline std::vector<ParsedTerm> parse_equations(const std::string& text) {
  static const std::regex line_re(R"(^dX(\d+)/dt = (.*)$)");
  static const std::regex term_re(R"(\(([^ ()]+) ± ([^ ()]+)\)\*(\S+))");
  std::vector<ParsedTerm> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    const int state = std::stoi(m[1].str()) - 1;
    const std::string rhs = m[2].str();
    for (auto it = std::sregex_iterator(rhs.begin(), rhs.end(), term_re); it != std::sregex_iterator(); ++it)
      out.push_back({state, (*it)[3].str(), std::stod((*it)[1].str()), std::stod((*it)[2].str())});
  }
  return out;
}

// ------------------------------------------------------------- prediction

/// The twin as a simulatable system: nominal drift plus posterior-mean
/// discovered terms; diffusion from the identified diagonal magnitudes.
inline SystemDef twin_system(const UpdatedTwin& twin, int input_dim,
                             const std::vector<Eigen::VectorXd>* coefficients = nullptr) {
  const auto cols = enumerate_columns(twin.drift_spec);
  struct Piece {
    int state;
    Column col;
    double coef;
  };
  std::vector<Piece> pieces;
  for (const auto& eq : twin.states) {
    if (!eq.regressed) continue;
    for (int k : eq.summary.selected) {
      const double c = coefficients ? (*coefficients)[static_cast<std::size_t>(eq.state)][k] : eq.summary.mu_theta[k];
      pieces.push_back({eq.state, cols[static_cast<std::size_t>(k)], c});
    }
  }
  SystemDef s;
  s.name = "twin";
  s.state_dim = static_cast<int>(twin.states.size());
  s.input_dim = input_dim;
  s.nominal = twin.nominal;
  const auto nominal = twin.nominal.rhs;
  s.true_rhs = [pieces, nominal](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t) {
    Eigen::VectorXd f = nominal(x, u, t);
    for (const auto& p : pieces) f[p.state] += p.coef * evaluate_column(p.col, x, u);
    return f;
  };
  // One Brownian column per state with an identified magnitude, in state
  // order, matching the layout of the built-in systems.
  std::vector<std::pair<int, double>> noisy;
  for (const auto& d : twin.diffusion)
    if (d.i == d.j && std::isfinite(d.magnitude)) noisy.emplace_back(d.i, d.magnitude);
  std::sort(noisy.begin(), noisy.end());
  s.diffusion = Eigen::MatrixXd::Zero(s.state_dim, static_cast<Eigen::Index>(noisy.size()));
  for (std::size_t b = 0; b < noisy.size(); ++b) s.diffusion(noisy[b].first, static_cast<Eigen::Index>(b)) = noisy[b].second;
  s.forcing_scale = Eigen::VectorXd::Zero(input_dim);
  s.x0 = Eigen::VectorXd::Zero(s.state_dim);
  return s;
}

enum class BandMode {
  local,       // predictive variance of each state's rate along the mean path
  propagated,  // spread of trajectories under posterior parameter draws
};

struct PredictOptions {
  BandMode band = BandMode::local;
  int n_samples = 50;  // parameter draws for the propagated band
  std::uint64_t sample_seed = 0;
};

struct StatePrediction {
  Eigen::VectorXd t;
  Eigen::MatrixXd mean;      // N x m
  Eigen::MatrixXd variance;  // N x m
  Eigen::MatrixXd inputs;    // forcing used (N x n_u)

  Eigen::MatrixXd lower() const { return mean - 1.96 * variance.cwiseSqrt(); }
  Eigen::MatrixXd upper() const { return mean + 1.96 * variance.cwiseSqrt(); }
};

/// Integrates the posterior-mean twin from x0. Framework 1 runs RK4 under
/// the given input record; framework 2 runs Euler-Maruyama with the Brownian
/// stream of realization 0 of em_simulate(..., noise_seed), so a truth run
/// with the same seed is driven by the same path.
inline StatePrediction predict_states(const UpdatedTwin& twin, const Eigen::VectorXd& x0,
                                      const Eigen::MatrixXd& inputs, double dt, std::uint64_t noise_seed = 0,
                                      const PredictOptions& opt = {}) {
  const int m = static_cast<int>(twin.states.size());
  if (x0.size() != m) throw ConfigError("initial state has the wrong dimension");
  const auto n = inputs.rows();
  if (n < 2) throw ConfigError("prediction needs at least two steps");
  const int nu = static_cast<int>(inputs.cols());

  const auto integrate = [&](const SystemDef& sys) {
    try {
      if (twin.framework == 1) return rk4_simulate_with_input(sys, inputs, dt, &x0);
      SystemDef s = sys;
      s.x0 = x0;
      return em_simulate(s, dt * static_cast<double>(n), dt, 1, noise_seed);
    } catch (const SimulationError& e) {
      throw PredictError(std::string("twin integration failed: ") + e.what());
    }
  };

  StatePrediction out;
  const Dataset base = integrate(twin_system(twin, nu));
  out.t = base.t;
  out.mean = base.realizations.front().states;
  out.inputs = inputs;
  out.variance = Eigen::MatrixXd::Zero(n, m);

  if (opt.band == BandMode::local) {
    for (const auto& eq : twin.states) {
      if (!eq.regressed) continue;
      const Eigen::MatrixXd* in = nu > 0 && twin.drift_spec.include_input ? &inputs : nullptr;
      const LibraryMatrix L = evaluate(twin.drift_spec, out.mean, in);
      out.variance.col(eq.state) = predict_variance(eq.summary, L);
    }
    return out;
  }

  // Propagated band: integrate under draws from each state's N(mu, Sigma).
  Rng rng(opt.sample_seed);
  std::vector<Eigen::MatrixXd> runs;
  for (int s = 0; s < opt.n_samples; ++s) {
    std::vector<Eigen::VectorXd> coefs(static_cast<std::size_t>(m));
    for (const auto& eq : twin.states) {
      auto& c = coefs[static_cast<std::size_t>(eq.state)];
      if (!eq.regressed) continue;
      c = eq.summary.mu_theta;
      const auto r = static_cast<Eigen::Index>(eq.summary.selected.size());
      if (r == 0) continue;
      Eigen::MatrixXd S(r, r);
      for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < r; ++b)
          S(a, b) = eq.summary.sigma_theta(eq.summary.selected[static_cast<std::size_t>(a)],
                                           eq.summary.selected[static_cast<std::size_t>(b)]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
      const Eigen::VectorXd sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      Eigen::VectorXd z(r);
      for (Eigen::Index a = 0; a < r; ++a) z[a] = rng.normal();
      const Eigen::VectorXd dev = es.eigenvectors() * sd.cwiseProduct(z);
      for (Eigen::Index a = 0; a < r; ++a) c[eq.summary.selected[static_cast<std::size_t>(a)]] += dev[a];
    }
    runs.push_back(integrate(twin_system(twin, nu, &coefs)).realizations.front().states);
  }
  if (!runs.empty()) {
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n, m);
    for (const auto& r : runs) mu += r;
    mu /= static_cast<double>(runs.size());
    for (const auto& r : runs) out.variance += (r - mu).cwiseAbs2();
    out.variance /= std::max<double>(static_cast<double>(runs.size()) - 1.0, 1.0);
  }
  return out;
}

/// Root-mean-square error normalized by the truth's RMS, over all entries.
inline double nrmse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  const double denom = std::sqrt(truth.array().square().mean());
  const double err = std::sqrt((estimate - truth).array().square().mean());
  return denom > 0.0 ? err / denom : err;
}

}  // namespace twinforge
