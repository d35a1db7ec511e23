#pragma once

// Named end-to-end experiment presets for the built-in systems (simulate,
// corrupt, update) and the noise-sensitivity sweep built on them.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "twinforge/dictionary.hpp"
#include "twinforge/error.hpp"
#include "twinforge/parallel.hpp"
#include "twinforge/sampler.hpp"
#include "twinforge/simulate.hpp"
#include "twinforge/targets.hpp"
#include "twinforge/twin.hpp"

namespace twinforge {

struct Experiment {
  std::string system = "duffing";
  int framework = 1;
  std::map<std::string, double> params;  // overrides of the system defaults
  Eigen::VectorXd x0;                    // empty: system default
  double T = 1.0;
  double dt = 1e-3;
  int ensemble = 100;  // framework 2 only
  double noise = 0.05;
  ForcingOptions forcing;
  LibrarySpec drift_spec;
  LibrarySpec diffusion_spec;
  TargetOptions drift_options;
  TargetOptions diffusion_options;
  Hyperparameters hp;

  SystemDef make() const {
    SystemDef s = make_system(system, params);
    if (x0.size() > 0) {
      if (x0.size() != s.state_dim) throw ConfigError("x0 has the wrong dimension for system " + system);
      s.x0 = x0;
    }
    return s;
  }
};

namespace detail {

inline LibrarySpec with_families(int m, int degree, std::vector<Family> fam, int inputs) {
  LibrarySpec s;
  s.families = std::move(fam);
  s.max_degree = degree;
  s.state_dim = m;
  s.input_dim = inputs;
  s.include_input = inputs > 0;
  return s;
}

}  // namespace detail

/// Preset for a built-in system and framework (1: input-output, 2: output-only).
inline Experiment preset(const std::string& system, int framework) {
  if (framework != 1 && framework != 2) throw ConfigError("framework must be 1 or 2");
  Experiment e;
  e.system = system;
  e.framework = framework;
  const SystemDef sys = make_system(system);
  const int m = sys.state_dim;
  const int nu = framework == 1 ? sys.input_dim : 0;

  e.drift_options.smooth_window = 20;
  // Output-only rows must not share Brownian increments, or the sampler
  // treats correlated residuals as independent evidence.
  e.drift_options.smooth_stride = framework == 1 ? 10 : 20;
  e.diffusion_options.trim = 0;
  e.diffusion_options.noise_corrected = true;
  e.diffusion_options.covariation_block = 5;
  e.diffusion_spec = detail::with_families(m, 1, {Family::constant, Family::multinomial}, 0);

  if (system == "duffing") {
    e.drift_spec = detail::with_families(
        m, 5, {Family::constant, Family::multinomial, Family::signum, Family::absolute}, nu);
    e.drift_options.smooth_window = framework == 1 ? 24 : 10;
    e.drift_options.smooth_stride = framework == 1 ? 8 : 10;
    e.x0 = framework == 1 ? Eigen::Vector2d(0.1, 0.0) : Eigen::Vector2d(0.05, 0.0);
  } else if (system == "2dof") {
    e.drift_spec = detail::with_families(m, 3, {Family::constant, Family::multinomial}, nu);
    // EM on the hardened mode diverges from the larger framework-1 start.
    e.x0 = framework == 1 ? (Eigen::VectorXd(4) << 0.2, 0.0, 0.1, 0.0).finished()
                          : (Eigen::VectorXd(4) << 0.12, 0.0, 0.06, 0.0).finished();
  } else if (system == "crack") {
    e.drift_spec = detail::with_families(
        m, 2, {Family::constant, Family::multinomial, Family::neg_exp, Family::exp_product}, nu);
    // exp(-velocity) spans dozens of decades over a record and is dropped.
    e.drift_spec.exclude = {"exp(-X2)", "exp(-X2)*X1", "exp(-X2)*X2", "exp(-X2)*X3"};
    e.x0 = Eigen::Vector3d(3.0, 0.0, 0.0);
  } else {
    throw ConfigError("no preset for system '" + system + "'");
  }
  return e;
}

struct ExperimentRun {
  SystemDef system;
  Dataset data;  // corrupted measurements; data.clean holds the noise-free copy
  UpdatedTwin twin;
};

/// Simulates (seed), corrupts (seed), and updates (seed) one experiment.
inline Dataset simulate_experiment(const Experiment& e, std::uint64_t seed, int jobs = 1) {
  const SystemDef sys = e.make();
  Dataset clean = e.framework == 1 ? rk4_simulate(sys, e.T, e.dt, seed, e.forcing)
                                   : em_simulate(sys, e.T, e.dt, e.ensemble, seed, jobs);
  return corrupt(clean, NoisePolicy{e.noise, seed});
}

inline UpdatedTwin update_experiment(const Experiment& e, const Dataset& data, std::uint64_t seed, int jobs = 1) {
  const SystemDef sys = e.make();
  UpdatedTwin twin =
      e.framework == 1
          ? update_f1(data, sys.nominal, e.drift_spec, e.hp, seed, e.drift_options, jobs)
          : update_f2(data, sys.nominal, e.drift_spec, e.diffusion_spec, e.hp, seed, e.drift_options,
                      e.diffusion_options, jobs);
  twin.system = sys.name;
  twin.params = sys.params;
  return twin;
}

inline ExperimentRun run_experiment(const Experiment& e, std::uint64_t seed, int jobs = 1) {
  ExperimentRun r;
  r.system = e.make();
  r.data = simulate_experiment(e, seed, jobs);
  r.twin = update_experiment(e, r.data, seed, jobs);
  return r;
}

// ------------------------------------------------------------------ sweep

struct TruthTerm {
  int state = 0;
  std::string label;  // library label, or "sigma" for a diffusion magnitude
  double value = 0.0;
};

/// Ground-truth terms an experiment should recover.
inline std::vector<TruthTerm> truth_terms(const Experiment& e) {
  const SystemDef sys = e.make();
  std::vector<TruthTerm> out;
  const auto truth = e.framework == 1 ? sys.truth : sys.drift_truth();
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (const auto& t : truth[i]) out.push_back({static_cast<int>(i), t.label, t.value});
  if (e.framework == 2) {
    const Eigen::MatrixXd G = sys.covariation();
    for (int i = 0; i < sys.state_dim; ++i)
      if (!sys.nominal.is_kinematic(i) && G(i, i) > 0.0) out.push_back({i, "sigma", std::sqrt(G(i, i))});
  }
  return out;
}

/// Selected drift labels equal the true labels in every regressed state.
inline bool exact_support(const UpdatedTwin& twin, const std::vector<TruthTerm>& truth) {
  for (std::size_t i = 0; i < twin.states.size(); ++i) {
    std::set<std::string> want, got;
    for (const auto& t : truth)
      if (t.state == static_cast<int>(i) && t.label != "sigma") want.insert(t.label);
    for (const auto& l : twin.selected_labels(static_cast<int>(i))) got.insert(l);
    if (want != got) return false;
  }
  return true;
}

/// |estimate - truth| / |truth|; a missing term counts as estimate 0.
inline double term_error(const UpdatedTwin& twin, const TruthTerm& t) {
  double est = 0.0;
  if (t.label == "sigma") {
    const auto* d = twin.diffusion_entry(t.state, t.state);
    if (d != nullptr && std::isfinite(d->magnitude)) est = d->magnitude;
  } else {
    est = twin.coefficient(t.state, t.label);
  }
  return std::abs(est - t.value) / std::abs(t.value);
}

struct SweepCell {
  double level = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  bool exact = false;
  std::vector<double> term_errors;  // aligned with SweepReport::terms
};

struct SweepLevel {
  double level = 0.0;
  std::vector<double> mean_error;  // per term
  std::vector<double> std_error;
  int runs = 0;
  int failures = 0;
  int exact = 0;
  double exact_fraction() const { return runs > 0 ? static_cast<double>(exact) / runs : 0.0; }
};

struct SweepReport {
  std::string system;
  int framework = 1;
  std::vector<TruthTerm> terms;
  std::vector<double> levels;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepLevel> per_level;
  std::vector<SweepCell> cells;  // level-major, seed-minor
};

/// 14 levels from 0 to 0.6 inclusive.
inline std::vector<double> default_sweep_levels() {
  std::vector<double> v(14);
  for (int i = 0; i < 14; ++i) v[static_cast<std::size_t>(i)] = 0.6 * i / 13.0;
  return v;
}

/// Runs every (level, seed) cell of an experiment; a failing cell is
/// recorded, not fatal. Aggregation order does not depend on `jobs`.
inline SweepReport noise_sweep(const Experiment& base, std::vector<double> levels,
                               const std::vector<std::uint64_t>& seeds, int jobs = 1) {
  for (double l : levels)
    if (!(l >= 0.0 && l <= 0.6)) throw ConfigError("sweep levels must lie in [0, 0.6]");
  std::sort(levels.begin(), levels.end());
  SweepReport rep;
  rep.system = base.system;
  rep.framework = base.framework;
  rep.terms = truth_terms(base);
  rep.levels = levels;
  rep.seeds = seeds;
  rep.cells.resize(levels.size() * seeds.size());
  parallel_for(rep.cells.size(), jobs, [&](std::size_t c) {
    SweepCell& cell = rep.cells[c];
    cell.level = levels[c / seeds.size()];
    cell.seed = seeds[c % seeds.size()];
    Experiment e = base;
    e.noise = cell.level;
    try {
      const auto run = run_experiment(e, cell.seed, 1);
      cell.exact = exact_support(run.twin, rep.terms);
      for (const auto& t : rep.terms) cell.term_errors.push_back(term_error(run.twin, t));
      cell.ok = true;
    } catch (const std::exception& ex) {
      cell.error = ex.what();
    }
  });
  for (std::size_t l = 0; l < levels.size(); ++l) {
    SweepLevel agg;
    agg.level = levels[l];
    const std::size_t nt = rep.terms.size();
    agg.mean_error.assign(nt, 0.0);
    agg.std_error.assign(nt, 0.0);
    std::vector<const SweepCell*> good;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& cell = rep.cells[l * seeds.size() + s];
      if (!cell.ok) {
        ++agg.failures;
        continue;
      }
      good.push_back(&cell);
      if (cell.exact) ++agg.exact;
    }
    agg.runs = static_cast<int>(good.size());
    for (std::size_t t = 0; t < nt && !good.empty(); ++t) {
      double s1 = 0.0, s2 = 0.0;
      for (const auto* c : good) {
        s1 += c->term_errors[t];
        s2 += c->term_errors[t] * c->term_errors[t];
      }
      const double n = static_cast<double>(good.size());
      agg.mean_error[t] = s1 / n;
      agg.std_error[t] = n > 1 ? std::sqrt(std::max(s2 - s1 * s1 / n, 0.0) / (n - 1.0)) : 0.0;
    }
    rep.per_level.push_back(std::move(agg));
  }
  return rep;
}

}  // namespace twinforge
