#pragma once

// Persistence: datasets as CSV or a binary columnar file, and JSON for
// specs, posterior summaries, twins, sweep reports, and run manifests.

#include <Eigen/Dense>
#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "twinforge/dictionary.hpp"
#include "twinforge/error.hpp"
#include "twinforge/experiment.hpp"
#include "twinforge/sampler.hpp"
#include "twinforge/targets.hpp"
#include "twinforge/twin.hpp"

namespace twinforge {

using json = nlohmann::json;

inline constexpr const char* kSchema = "twinforge/1";

/// Shortest "%.17g" text; round-trips every finite double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ------------------------------------------------------------------- CSV

/// Header: t, X1..Xm, u1..un, and a realization column when E > 1.
inline void write_csv(std::ostream& out, const Dataset& d, bool realization_column = false) {
  const int m = d.state_dim(), nu = d.input_dim();
  const bool rc = realization_column || d.ensemble_size() > 1;
  out << "t";
  for (int i = 0; i < m; ++i) out << ",X" << (i + 1);
  for (int i = 0; i < nu; ++i) out << ",u" << (i + 1);
  if (rc) out << ",realization";
  out << "\r\n";
  for (int e = 0; e < d.ensemble_size(); ++e) {
    const auto& r = d.realizations[static_cast<std::size_t>(e)];
    for (Eigen::Index k = 0; k < d.rows(); ++k) {
      out << format_double(d.t[k]);
      for (int i = 0; i < m; ++i) out << ',' << format_double(r.states(k, i));
      for (int i = 0; i < nu; ++i) out << ',' << format_double(r.inputs(k, i));
      if (rc) out << ',' << e;
      out << "\r\n";
    }
  }
}

inline void write_csv(const std::string& path, const Dataset& d, bool realization_column = false) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  write_csv(f, d, realization_column);
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(cell);
  return out;
}

inline double parse_double(const std::string& s) {
  const char* b = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (end == b || *end != '\0') throw DataError("bad numeric field '" + s + "'");
  return v;
}

}  // namespace detail

inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  const auto header = detail::split_csv_line(line);
  if (header.empty() || header[0] != "t") throw DataError("CSV header must start with 't'");
  int m = 0, nu = 0, rcol = -1;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "X" + std::to_string(m + 1)) {
      ++m;
    } else if (h == "u" + std::to_string(nu + 1)) {
      ++nu;
    } else if (h == "realization") {
      rcol = static_cast<int>(c);
    } else {
      throw DataError("unexpected CSV column '" + h + "'");
    }
  }
  if (m == 0) throw DataError("CSV has no state columns");
  std::vector<std::vector<std::vector<double>>> rows;  // realization -> row -> values
  std::vector<std::vector<double>> times;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("CSV row has the wrong number of fields");
    std::size_t e = 0;
    if (rcol >= 0) e = static_cast<std::size_t>(std::stoul(cells[static_cast<std::size_t>(rcol)]));
    if (e >= rows.size()) {
      rows.resize(e + 1);
      times.resize(e + 1);
    }
    std::vector<double> v;
    for (std::size_t c = 1; c < cells.size(); ++c)
      if (static_cast<int>(c) != rcol) v.push_back(detail::parse_double(cells[c]));
    times[e].push_back(detail::parse_double(cells[0]));
    rows[e].push_back(std::move(v));
  }
  if (rows.empty() || rows[0].empty()) throw DataError("CSV has no data rows");
  Dataset d;
  const auto n = static_cast<Eigen::Index>(times[0].size());
  d.t = Eigen::Map<const Eigen::VectorXd>(times[0].data(), n);
  d.dt = n > 1 ? (d.t[n - 1] - d.t[0]) / static_cast<double>(n - 1) : 0.0;
  for (std::size_t e = 0; e < rows.size(); ++e) {
    if (static_cast<Eigen::Index>(rows[e].size()) != n || times[e] != times[0])
      throw DataError("realizations do not share timestamps");
    Trajectory tr;
    tr.states.resize(n, m);
    tr.inputs.resize(n, nu);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (int i = 0; i < m; ++i) tr.states(k, i) = rows[e][static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      for (int i = 0; i < nu; ++i)
        tr.inputs(k, i) = rows[e][static_cast<std::size_t>(k)][static_cast<std::size_t>(m + i)];
    }
    d.realizations.push_back(std::move(tr));
  }
  d.noise = "unknown";
  d.validate();
  return d;
}

inline Dataset read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  return read_csv(f);
}

// ------------------------------------------------------- columnar binary

namespace detail {

inline constexpr char kColumnarMagic[8] = {'T', 'F', 'C', 'O', 'L', '1', '\0', '\0'};

template <class T>
void put(std::ostream& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

template <class T>
T get(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw DataError("truncated columnar file");
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

/// Little-endian layout: magic, u64 E, N, m, n_u, f64 dt, t[N], then per
/// realization each state column followed by each input column.
inline void write_columnar(std::ostream& out, const Dataset& d) {
  out.write(detail::kColumnarMagic, 8);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(d.ensemble_size()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(d.rows()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(d.state_dim()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(d.input_dim()));
  detail::put<double>(out, d.dt);
  for (Eigen::Index k = 0; k < d.rows(); ++k) detail::put<double>(out, d.t[k]);
  for (const auto& r : d.realizations) {
    for (Eigen::Index c = 0; c < r.states.cols(); ++c)
      for (Eigen::Index k = 0; k < d.rows(); ++k) detail::put<double>(out, r.states(k, c));
    for (Eigen::Index c = 0; c < r.inputs.cols(); ++c)
      for (Eigen::Index k = 0; k < d.rows(); ++k) detail::put<double>(out, r.inputs(k, c));
  }
}

inline void write_columnar(const std::string& path, const Dataset& d) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  write_columnar(f, d);
}

inline Dataset read_columnar(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, detail::kColumnarMagic, 8) != 0)
    throw DataError("not a twinforge columnar file");
  const auto E = detail::get<std::uint64_t>(in);
  const auto N = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in));
  const auto m = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in));
  const auto nu = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in));
  if (E == 0 || E > (1u << 24) || N > (1 << 28) || m > 4096 || nu > 4096) throw DataError("implausible columnar header");
  Dataset d;
  d.dt = detail::get<double>(in);
  d.t.resize(N);
  for (Eigen::Index k = 0; k < N; ++k) d.t[k] = detail::get<double>(in);
  for (std::uint64_t e = 0; e < E; ++e) {
    Trajectory tr;
    tr.states.resize(N, m);
    tr.inputs.resize(N, nu);
    for (Eigen::Index c = 0; c < m; ++c)
      for (Eigen::Index k = 0; k < N; ++k) tr.states(k, c) = detail::get<double>(in);
    for (Eigen::Index c = 0; c < nu; ++c)
      for (Eigen::Index k = 0; k < N; ++k) tr.inputs(k, c) = detail::get<double>(in);
    d.realizations.push_back(std::move(tr));
  }
  d.noise = "unknown";
  d.validate();
  return d;
}

inline Dataset read_columnar(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  return read_columnar(f);
}

/// Reads either format, by magic bytes.
inline Dataset read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  char magic[8] = {};
  f.read(magic, 8);
  f.clear();
  f.seekg(0);
  if (std::memcmp(magic, detail::kColumnarMagic, 8) == 0) return read_columnar(f);
  return read_csv(f);
}

// ------------------------------------------------------------------ JSON

namespace detail {

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

inline Eigen::VectorXd vec_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number_from(j[i]);
  return v;
}

}  // namespace detail

inline json to_json(const LibrarySpec& s) {
  json fam = json::array();
  for (auto f : s.families) fam.push_back(family_name(f));
  return {{"families", fam},       {"max_degree", s.max_degree}, {"include_input", s.include_input},
          {"state_dim", s.state_dim}, {"input_dim", s.input_dim},   {"exclude", s.exclude}};
}

inline LibrarySpec library_spec_from_json(const json& j) {
  LibrarySpec s;
  for (const auto& f : j.at("families")) s.families.push_back(family_from_name(f.get<std::string>()));
  s.max_degree = j.value("max_degree", 6);
  s.include_input = j.value("include_input", false);
  s.state_dim = j.at("state_dim").get<int>();
  s.input_dim = j.value("input_dim", 0);
  s.exclude = j.value("exclude", std::vector<std::string>{});
  validate(s);
  return s;
}

inline json to_json(const Hyperparameters& h) {
  return {{"alpha_p", h.alpha_p},
          {"beta_p", h.beta_p},
          {"alpha_sigma", h.alpha_sigma},
          {"beta_sigma", h.beta_sigma},
          {"alpha_v", h.alpha_v},
          {"beta_v", h.beta_v},
          {"p0_init", h.p0_init},
          {"theta_s_init", h.theta_s_init},
          {"n_mcmc", h.n_mcmc},
          {"n_burn", h.n_burn},
          {"pip_threshold", h.pip_threshold},
          {"random_order", h.random_order},
          {"scaling", scaling_name(h.scaling)}};
}

/// Fields missing from `j` keep the values of `base`.
inline Hyperparameters hyperparameters_from_json(const json& j, Hyperparameters h = {}) {
  h.alpha_p = j.value("alpha_p", h.alpha_p);
  h.beta_p = j.value("beta_p", h.beta_p);
  h.alpha_sigma = j.value("alpha_sigma", h.alpha_sigma);
  h.beta_sigma = j.value("beta_sigma", h.beta_sigma);
  h.alpha_v = j.value("alpha_v", h.alpha_v);
  h.beta_v = j.value("beta_v", h.beta_v);
  h.p0_init = j.value("p0_init", h.p0_init);
  h.theta_s_init = j.value("theta_s_init", h.theta_s_init);
  h.n_mcmc = j.value("n_mcmc", h.n_mcmc);
  h.n_burn = j.value("n_burn", h.n_burn);
  h.pip_threshold = j.value("pip_threshold", h.pip_threshold);
  h.random_order = j.value("random_order", h.random_order);
  if (j.contains("scaling")) h.scaling = scaling_from_name(j.at("scaling").get<std::string>());
  h.validate();
  return h;
}

inline json to_json(const TargetOptions& o) {
  return {{"trim", o.trim},
          {"smooth_window", o.smooth_window},
          {"smooth_stride", o.smooth_stride},
          {"ensemble_average", o.ensemble_average},
          {"max_dt", o.max_dt},
          {"noise_corrected", o.noise_corrected},
          {"covariation_block", o.covariation_block}};
}

inline TargetOptions target_options_from_json(const json& j, TargetOptions o = {}) {
  o.trim = j.value("trim", o.trim);
  o.smooth_window = j.value("smooth_window", o.smooth_window);
  o.smooth_stride = j.value("smooth_stride", o.smooth_stride);
  o.ensemble_average = j.value("ensemble_average", o.ensemble_average);
  o.max_dt = j.value("max_dt", o.max_dt);
  o.noise_corrected = j.value("noise_corrected", o.noise_corrected);
  o.covariation_block = j.value("covariation_block", o.covariation_block);
  if (o.trim < 0 || o.smooth_stride < 1 || o.covariation_block < 1) throw ConfigError("target options: trim >= 0, smooth_stride >= 1 and covariation_block >= 1 required");
  return o;
}

inline json to_json(const PosteriorSummary& s) {
  json sigma = json::array();
  for (Eigen::Index r = 0; r < s.sigma_theta.rows(); ++r)
    for (Eigen::Index c = 0; c < s.sigma_theta.cols(); ++c) sigma.push_back(detail::number(s.sigma_theta(r, c)));
  return {{"labels", s.labels},
          {"pip", detail::vec(s.pip)},
          {"selected", s.selected},
          {"mu_theta", detail::vec(s.mu_theta)},
          {"sigma_theta", sigma},
          {"mu_sigma2", detail::number(s.mu_sigma2)},
          {"n_mc", s.n_mc},
          {"seed", s.seed},
          {"hyperparameters", to_json(s.hyperparameters)},
          {"flip_rate", detail::vec(s.flip_rate)},
          {"confused", s.confused}};
}

inline PosteriorSummary posterior_from_json(const json& j) {
  PosteriorSummary s;
  s.labels = j.at("labels").get<std::vector<std::string>>();
  const auto K = static_cast<Eigen::Index>(s.labels.size());
  s.pip = detail::vec_from(j.at("pip"));
  s.selected = j.at("selected").get<std::vector<int>>();
  s.mu_theta = detail::vec_from(j.at("mu_theta"));
  const Eigen::VectorXd flat = detail::vec_from(j.at("sigma_theta"));
  if (s.pip.size() != K || s.mu_theta.size() != K || flat.size() != K * K)
    throw DataError("posterior summary arrays do not match the label count");
  s.sigma_theta.resize(K, K);
  for (Eigen::Index r = 0; r < K; ++r)
    for (Eigen::Index c = 0; c < K; ++c) s.sigma_theta(r, c) = flat[r * K + c];
  s.mu_sigma2 = detail::number_from(j.at("mu_sigma2"));
  s.n_mc = j.at("n_mc").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("hyperparameters")) s.hyperparameters = hyperparameters_from_json(j.at("hyperparameters"));
  s.flip_rate = j.contains("flip_rate") ? detail::vec_from(j.at("flip_rate")) : Eigen::VectorXd::Zero(K);
  s.confused = j.value("confused", false);
  return s;
}

inline json terms_json(const std::vector<TermEstimate>& terms) {
  json a = json::array();
  for (const auto& t : terms)
    a.push_back({{"label", t.label}, {"mean", detail::number(t.mean)}, {"std", detail::number(t.std)},
                 {"pip", detail::number(t.pip)}});
  return a;
}

inline std::vector<TermEstimate> terms_from_json(const json& j) {
  std::vector<TermEstimate> out;
  for (const auto& t : j)
    out.push_back({t.at("label").get<std::string>(), detail::number_from(t.at("mean")),
                   detail::number_from(t.at("std")), detail::number_from(t.at("pip"))});
  return out;
}

inline json to_json(const UpdatedTwin& tw) {
  json states = json::array();
  for (const auto& s : tw.states) {
    json e = {{"state", s.state}, {"regressed", s.regressed}, {"note", s.note}, {"terms", terms_json(s.terms)}};
    if (s.regressed) e["summary"] = to_json(s.summary);
    states.push_back(e);
  }
  json diff = json::array();
  for (const auto& d : tw.diffusion)
    diff.push_back({{"i", d.i},
                    {"j", d.j},
                    {"terms", terms_json(d.terms)},
                    {"magnitude", detail::number(d.magnitude)},
                    {"magnitude_std", detail::number(d.magnitude_std)},
                    {"summary", to_json(d.summary)}});
  json params = json::object();
  for (const auto& [k, v] : tw.params) params[k] = v;
  return {{"schema", kSchema},
          {"kind", "twin"},
          {"framework", tw.framework},
          {"system", tw.system},
          {"params", params},
          {"nominal_equations", tw.nominal.equations},
          {"drift_spec", to_json(tw.drift_spec)},
          {"diffusion_spec", to_json(tw.diffusion_spec)},
          {"hyperparameters", to_json(tw.hp)},
          {"drift_options", to_json(tw.drift_options)},
          {"diffusion_options", to_json(tw.diffusion_options)},
          {"seed", tw.seed},
          {"states", states},
          {"diffusion", diff}};
}

inline void check_schema(const json& j) {
  if (j.value("schema", std::string()) != kSchema)
    throw DataError("unsupported artifact schema '" + j.value("schema", std::string()) + "'");
}

/// Rebuilds a twin; the nominal model is reconstructed from the named
/// built-in system and its stored parameters.
inline UpdatedTwin twin_from_json(const json& j) {
  check_schema(j);
  UpdatedTwin tw;
  tw.framework = j.at("framework").get<int>();
  tw.system = j.at("system").get<std::string>();
  for (const auto& [k, v] : j.at("params").items()) tw.params[k] = v.get<double>();
  tw.nominal = make_system(tw.system, tw.params).nominal;
  tw.drift_spec = library_spec_from_json(j.at("drift_spec"));
  if (j.contains("diffusion_spec")) tw.diffusion_spec = library_spec_from_json(j.at("diffusion_spec"));
  tw.hp = hyperparameters_from_json(j.at("hyperparameters"));
  tw.drift_options = target_options_from_json(j.at("drift_options"));
  tw.diffusion_options = target_options_from_json(j.at("diffusion_options"));
  tw.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("states")) {
    StateEquation e;
    e.state = s.at("state").get<int>();
    e.regressed = s.at("regressed").get<bool>();
    e.note = s.value("note", std::string());
    e.terms = terms_from_json(s.at("terms"));
    if (e.regressed) e.summary = posterior_from_json(s.at("summary"));
    tw.states.push_back(std::move(e));
  }
  for (const auto& d : j.at("diffusion")) {
    DiffusionEquation e;
    e.i = d.at("i").get<int>();
    e.j = d.at("j").get<int>();
    e.terms = terms_from_json(d.at("terms"));
    e.magnitude = detail::number_from(d.at("magnitude"));
    e.magnitude_std = detail::number_from(d.at("magnitude_std"));
    e.summary = posterior_from_json(d.at("summary"));
    tw.diffusion.push_back(std::move(e));
  }
  return tw;
}

inline json to_json(const SweepReport& r) {
  json terms = json::array();
  for (const auto& t : r.terms) terms.push_back({{"state", t.state}, {"label", t.label}, {"truth", t.value}});
  json levels = json::array();
  for (const auto& l : r.per_level)
    levels.push_back({{"level", l.level},
                      {"runs", l.runs},
                      {"failures", l.failures},
                      {"exact", l.exact},
                      {"exact_fraction", l.exact_fraction()},
                      {"mean_error", l.mean_error},
                      {"std_error", l.std_error}});
  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"level", c.level},
                     {"seed", c.seed},
                     {"ok", c.ok},
                     {"error", c.error},
                     {"exact", c.exact},
                     {"term_errors", c.term_errors}});
  return {{"schema", kSchema}, {"kind", "sweep"},   {"system", r.system}, {"framework", r.framework},
          {"terms", terms},     {"levels", r.levels}, {"seeds", r.seeds},   {"per_level", levels},
          {"cells", cells}};
}

inline json to_json(const Experiment& e) {
  json params = json::object();
  for (const auto& [k, v] : e.params) params[k] = v;
  json x0 = json::array();
  for (Eigen::Index i = 0; i < e.x0.size(); ++i) x0.push_back(e.x0[i]);
  return {{"system", e.system},
          {"framework", e.framework},
          {"params", params},
          {"x0", x0},
          {"T", e.T},
          {"dt", e.dt},
          {"ensemble", e.ensemble},
          {"noise", e.noise},
          {"forcing", forcing_name(e.forcing.convention)},
          {"drift_spec", to_json(e.drift_spec)},
          {"diffusion_spec", to_json(e.diffusion_spec)},
          {"drift_options", to_json(e.drift_options)},
          {"diffusion_options", to_json(e.diffusion_options)},
          {"hyperparameters", to_json(e.hp)}};
}

/// Applies the fields present in `j` on top of `e`.
inline Experiment experiment_from_json(const json& j, Experiment e) {
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items()) e.params[k] = v.get<double>();
  if (j.contains("x0")) e.x0 = detail::vec_from(j.at("x0"));
  e.T = j.value("T", e.T);
  e.dt = j.value("dt", e.dt);
  e.ensemble = j.value("ensemble", e.ensemble);
  e.noise = j.value("noise", e.noise);
  if (j.contains("forcing")) e.forcing.convention = forcing_from_name(j.at("forcing").get<std::string>());
  if (j.contains("drift_spec")) e.drift_spec = library_spec_from_json(j.at("drift_spec"));
  if (j.contains("diffusion_spec")) e.diffusion_spec = library_spec_from_json(j.at("diffusion_spec"));
  if (j.contains("drift_options")) e.drift_options = target_options_from_json(j.at("drift_options"), e.drift_options);
  if (j.contains("diffusion_options"))
    e.diffusion_options = target_options_from_json(j.at("diffusion_options"), e.diffusion_options);
  if (j.contains("hyperparameters")) e.hp = hyperparameters_from_json(j.at("hyperparameters"), e.hp);
  return e;
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

inline json read_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in '" + path + "': " + e.what());
  }
}

}  // namespace twinforge
