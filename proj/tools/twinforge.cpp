// twinforge command line: simulate, update, predict, sweep, replay.
//
// Every command resolves its flags, config file and preset into one JSON
// "invocation"; --manifest stores it together with digests of the files it
// read and wrote, and `replay` runs it again.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "twinforge/experiment.hpp"
#include "twinforge/io.hpp"
#include "twinforge/simulate.hpp"
#include "twinforge/twin.hpp"

using namespace twinforge;
namespace fs = std::filesystem;

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataError*>(&e)) return 2;
  if (dynamic_cast<const SimulationError*>(&e)) return 3;
  if (dynamic_cast<const SamplerError*>(&e)) return 4;
  if (dynamic_cast<const PredictError*>(&e)) return 5;
  if (dynamic_cast<const json::exception*>(&e)) return 2;
  return 1;
}

// FNV-1a over the file bytes, as 16 hex digits.
std::string digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f.read(buf, sizeof buf) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse '" + tok + "' as a number");
    }
  }
  return v;
}

// "0-9" or "0,3,7".
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  if (const auto dash = s.find('-'); dash != std::string::npos) {
    const auto lo = std::stoull(s.substr(0, dash)), hi = std::stoull(s.substr(dash + 1));
    if (hi < lo) throw ConfigError("empty seed range '" + s + "'");
    for (auto k = lo; k <= hi; ++k) out.push_back(k);
    return out;
  }
  for (double d : parse_list(s)) {
    if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d))) throw ConfigError("seeds must be non-negative integers");
    out.push_back(static_cast<std::uint64_t>(d));
  }
  return out;
}

std::string stem_path(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

// ------------------------------------------------------------ experiment

struct ExperimentFlags {
  std::string config, system, mode, x0, forcing;
  int framework = 1, ensemble = 100, n_mcmc = 3000, n_burn = 500;
  double T = 1.0, dt = 1e-3, noise = 0.05, pip_threshold = 0.7;
  std::uint64_t seed = 0;
  std::vector<std::string> params;
  std::map<std::string, CLI::Option*> opt;

  void attach(CLI::App* app) {
    opt["config"] = app->add_option("--config", config, "JSON config file (flags take precedence)")->check(CLI::ExistingFile);
    opt["system"] = app->add_option("--system", system, "built-in system: duffing, 2dof, crack");
    opt["framework"] = app->add_option("--framework", framework, "1: input-output (RK4), 2: output-only (EM)");
    opt["mode"] = app->add_option("--mode", mode, "ode or sde; alias for --framework 1/2");
    opt["seed"] = app->add_option("--seed", seed, "seed for forcing, noise and the sampler");
    opt["T"] = app->add_option("--T", T, "record length [s]");
    opt["dt"] = app->add_option("--dt", dt, "sampling step [s]");
    opt["ensemble"] = app->add_option("--ensemble", ensemble, "realizations (framework 2)");
    opt["noise"] = app->add_option("--noise", noise, "measurement noise, fraction of channel std");
    opt["x0"] = app->add_option("--x0", x0, "initial state, comma separated");
    opt["param"] = app->add_option("--param", params, "system parameter override name=value");
    opt["forcing"] = app->add_option("--forcing", forcing, "white_noise or unit_variance");
    opt["n_mcmc"] = app->add_option("--n-mcmc", n_mcmc, "Gibbs sweeps, burn-in included");
    opt["n_burn"] = app->add_option("--n-burn", n_burn, "burn-in sweeps");
    opt["pip"] = app->add_option("--pip-threshold", pip_threshold, "selection threshold on PIP");
  }
  bool given(const std::string& k) const { return opt.at(k)->count() > 0; }

  // flags > config file > preset
  json resolve() const {
    const json file = config.empty() ? json::object() : read_json(config);
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    const std::string sys = given("system") ? system : file.value("system", std::string("duffing"));
    int fw = file.value("framework", 1);
    if (file.contains("mode")) fw = file.at("mode").get<std::string>() == "sde" ? 2 : 1;
    if (given("framework")) fw = framework;
    if (given("mode")) {
      if (mode != "ode" && mode != "sde") throw ConfigError("--mode must be ode or sde");
      fw = mode == "sde" ? 2 : 1;
    }
    Experiment e = experiment_from_json(file, preset(sys, fw));
    if (given("T")) e.T = T;
    if (given("dt")) e.dt = dt;
    if (given("ensemble")) e.ensemble = ensemble;
    if (given("noise")) e.noise = noise;
    if (given("x0")) {
      const auto v = parse_list(x0);
      e.x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw ConfigError("--param expects name=value, got '" + p + "'");
      const auto v = parse_list(p.substr(eq + 1));
      if (v.size() != 1) throw ConfigError("--param expects one value, got '" + p + "'");
      e.params[p.substr(0, eq)] = v.front();
    }
    if (given("forcing")) e.forcing.convention = forcing_from_name(forcing);
    if (given("n_mcmc")) e.hp.n_mcmc = n_mcmc;
    if (given("n_burn")) e.hp.n_burn = n_burn;
    if (given("pip")) e.hp.pip_threshold = pip_threshold;
    e.hp.validate();
    if (!(e.T > 0.0) || !(e.dt > 0.0)) throw ConfigError("T and dt must be positive");
    if (!(e.noise >= 0.0)) throw ConfigError("noise must be >= 0");
    (void)e.make();
    return {{"experiment", to_json(e)}, {"seed", given("seed") ? seed : file.value("seed", std::uint64_t{0})}};
  }
};

Experiment experiment_of(const json& inv) {
  const json& j = inv.at("experiment");
  return experiment_from_json(j, preset(j.at("system").get<std::string>(), j.at("framework").get<int>()));
}

// ---------------------------------------------------------------- outputs

void write_dataset(const std::string& path, const Dataset& d, const std::string& format) {
  const bool csv = format == "csv" || (format == "auto" && fs::path(path).extension() == ".csv");
  if (csv)
    write_csv(path, d);
  else
    write_columnar(path, d);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << text;
}

void write_pip_csv(const std::string& path, const UpdatedTwin& tw) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << "equation,label,pip,mean,std,selected\r\n";
  const auto rows = [&](const std::string& eq, const PosteriorSummary& s) {
    for (std::size_t k = 0; k < s.labels.size(); ++k)
      f << eq << ',' << s.labels[k] << ',' << format_double(s.pip[static_cast<Eigen::Index>(k)]) << ','
        << format_double(s.mu_theta[static_cast<Eigen::Index>(k)]) << ',' << format_double(s.std_of(k)) << ','
        << (s.is_selected(k) ? 1 : 0) << "\r\n";
  };
  for (const auto& s : tw.states)
    if (s.regressed) rows("X" + std::to_string(s.state + 1), s.summary);
  for (const auto& d : tw.diffusion) rows("G" + std::to_string(d.i + 1) + std::to_string(d.j + 1), d.summary);
}

// --------------------------------------------------------------- commands

using Files = std::map<std::string, std::string>;  // role -> path

void run_simulate(const json& inv, int jobs) {
  const Experiment e = experiment_of(inv);
  const Files out = inv.at("outputs").get<Files>();
  const Dataset d = simulate_experiment(e, inv.at("seed").get<std::uint64_t>(), jobs);
  const std::string fmt = inv.value("format", std::string("auto"));
  write_dataset(out.at("data"), d, fmt);
  write_dataset(out.at("clean"), *d.clean, fmt);
  std::cout << "wrote " << d.ensemble_size() << " x " << d.rows() << " samples to " << out.at("data") << "\n";
}

void run_update(const json& inv, int jobs) {
  const Experiment e = experiment_of(inv);
  const Files in = inv.at("inputs").get<Files>(), out = inv.at("outputs").get<Files>();
  const Dataset d = read_dataset(in.at("data"));
  if (e.framework == 1 && d.ensemble_size() != 1) throw DataError("framework 1 expects a single realization");
  const UpdatedTwin tw = update_experiment(e, d, inv.at("seed").get<std::uint64_t>(), jobs);
  write_json(out.at("twin"), to_json(tw));
  write_pip_csv(out.at("pip"), tw);
  const std::string eqs = render_equations(tw);
  write_text(out.at("equations"), eqs);
  std::cout << eqs;
}

void run_predict(const json& inv, int) {
  const Files in = inv.at("inputs").get<Files>(), out = inv.at("outputs").get<Files>();
  const UpdatedTwin tw = twin_from_json(read_json(in.at("twin")));
  const json& a = inv.at("predict");
  SystemDef sys = make_system(tw.system, tw.params);
  const Eigen::VectorXd x0 = detail::vec_from(a.at("x0"));
  if (x0.size() != sys.state_dim) throw ConfigError("x0 has the wrong dimension");
  const double dt = a.at("dt").get<double>();
  const int n = sample_count(a.at("T").get<double>(), dt);
  const auto forcing_seed = a.at("forcing_seed").get<std::uint64_t>();
  const auto noise_seed = a.at("noise_seed").get<std::uint64_t>();
  ForcingOptions fo;
  fo.convention = forcing_from_name(a.at("forcing").get<std::string>());
  const Eigen::MatrixXd inputs =
      tw.framework == 1 ? synthesize_forcing(sys, n, dt, forcing_seed, fo) : Eigen::MatrixXd(n, 0);
  PredictOptions po;
  po.band = a.at("band").get<std::string>() == "propagated" ? BandMode::propagated : BandMode::local;
  po.n_samples = a.at("samples").get<int>();
  po.sample_seed = a.at("sample_seed").get<std::uint64_t>();
  const StatePrediction p = predict_states(tw, x0, inputs, dt, noise_seed, po);
  const Eigen::MatrixXd lo = p.lower(), hi = p.upper();
  const int m = sys.state_dim;

  std::ofstream f(out.at("predictions"), std::ios::binary);
  if (!f) throw DataError("cannot open '" + out.at("predictions") + "' for writing");
  f << "t";
  for (int i = 1; i <= m; ++i) f << ",mean_" << i << ",lo95_" << i << ",hi95_" << i;
  f << "\r\n";
  for (Eigen::Index k = 0; k < p.t.size(); ++k) {
    f << format_double(p.t[k]);
    for (int i = 0; i < m; ++i)
      f << ',' << format_double(p.mean(k, i)) << ',' << format_double(lo(k, i)) << ',' << format_double(hi(k, i));
    f << "\r\n";
  }
  f.close();

  json meta = {{"schema", kSchema},
               {"kind", "prediction"},
               {"twin", in.at("twin")},
               {"framework", tw.framework},
               {"rows", p.t.size()},
               {"x0", a.at("x0")},
               {"dt", dt},
               {"band", a.at("band")},
               {"forcing_seed", forcing_seed},
               {"noise_seed", noise_seed}};
  if (a.value("compare", false)) {
    // Truth: the built-in system under the same forcing or Brownian path.
    Dataset truth;
    try {
      if (tw.framework == 1) {
        truth = rk4_simulate_with_input(sys, inputs, dt, &x0);
      } else {
        sys.x0 = x0;
        truth = em_simulate(sys, dt * n, dt, 1, noise_seed);
      }
    } catch (const SimulationError& e) {
      throw PredictError(std::string("truth integration failed: ") + e.what());
    }
    const Eigen::MatrixXd& X = truth.realizations.front().states;
    double inside = 0.0, total = 0.0;
    for (int i = 0; i < m; ++i) {
      if (!(p.variance.col(i).maxCoeff() > 0.0)) continue;
      for (Eigen::Index k = 0; k < X.rows(); ++k, total += 1.0) inside += (X(k, i) >= lo(k, i) && X(k, i) <= hi(k, i)) ? 1.0 : 0.0;
    }
    meta["nrmse"] = nrmse(p.mean, X);
    meta["coverage"] = total > 0.0 ? json(inside / total) : json(nullptr);
    std::cout << "nrmse " << format_double(nrmse(p.mean, X)) << "\n";
  }
  write_json(out.at("meta"), meta);
}

void run_sweep(const json& inv, int jobs) {
  const Experiment e = experiment_of(inv);
  const Files out = inv.at("outputs").get<Files>();
  const auto levels = inv.at("levels").get<std::vector<double>>();
  const auto seeds = inv.at("seeds").get<std::vector<std::uint64_t>>();
  const SweepReport r = noise_sweep(e, levels, seeds, jobs);
  write_json(out.at("report"), to_json(r));

  std::ofstream f(out.at("levels"), std::ios::binary);
  if (!f) throw DataError("cannot open '" + out.at("levels") + "' for writing");
  f << "level,runs,failures,exact,exact_fraction";
  for (const auto& t : r.terms) f << ",mean_error_X" << t.state + 1 << '_' << t.label;
  for (const auto& t : r.terms) f << ",std_error_X" << t.state + 1 << '_' << t.label;
  f << "\r\n";
  for (const auto& l : r.per_level) {
    f << format_double(l.level) << ',' << l.runs << ',' << l.failures << ',' << l.exact << ','
      << format_double(l.exact_fraction());
    for (double v : l.mean_error) f << ',' << format_double(v);
    for (double v : l.std_error) f << ',' << format_double(v);
    f << "\r\n";
  }
  for (const auto& l : r.per_level)
    std::cout << "level " << l.level << ": exact " << l.exact << "/" << l.runs << "\n";
}

void dispatch(const json& inv, int jobs) {
  const std::string cmd = inv.at("command").get<std::string>();
  if (cmd == "simulate") return run_simulate(inv, jobs);
  if (cmd == "update") return run_update(inv, jobs);
  if (cmd == "predict") return run_predict(inv, jobs);
  if (cmd == "sweep") return run_sweep(inv, jobs);
  throw ConfigError("unknown command '" + cmd + "' in manifest");
}

json with_digests(const json& inv, const char* key) {
  json out = json::object();
  if (inv.contains(key))
    for (const auto& [role, path] : inv.at(key).items())
      out[role] = {{"path", path}, {"digest", digest(path.get<std::string>())}};
  return out;
}

void execute(const json& inv, int jobs, const std::string& manifest) {
  dispatch(inv, jobs);
  if (manifest.empty()) return;
  json m = inv;
  m["schema"] = kSchema;
  m["kind"] = "manifest";
  m["input_digests"] = with_digests(inv, "inputs");
  m["output_digests"] = with_digests(inv, "outputs");
  write_json(manifest, m);
}

// Re-runs a manifest; outputs go to out_dir (same file names) when given.
int replay(const std::string& manifest, const std::string& out_dir, int jobs) {
  json m = read_json(manifest);
  check_schema(m);
  if (m.value("kind", std::string()) != "manifest") throw DataError("'" + manifest + "' is not a run manifest");
  for (const auto& [role, rec] : m.at("input_digests").items())
    if (digest(rec.at("path").get<std::string>()) != rec.at("digest").get<std::string>())
      throw DataError("input '" + rec.at("path").get<std::string>() + "' changed since the manifest was written");
  json inv = m;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (auto& [role, path] : inv.at("outputs").items())
      path = (fs::path(out_dir) / fs::path(path.get<std::string>()).filename()).string();
  }
  dispatch(inv, jobs);
  int mismatches = 0;
  for (const auto& [role, rec] : m.at("output_digests").items()) {
    const std::string path = inv.at("outputs").at(role).get<std::string>();
    const bool same = digest(path) == rec.at("digest").get<std::string>();
    std::cout << (same ? "identical " : "DIFFERS   ") << path << "\n";
    if (!same) ++mismatches;
  }
  return mismatches == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinforge: sparse Bayesian model updating of dynamical-system twins"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  ExperimentFlags sim_f, upd_f, swp_f;
  std::string manifest, format = "auto", out, clean_out, data, twin_path;

  auto* sim = app.add_subcommand("simulate", "simulate a built-in system and corrupt it with noise");
  sim_f.attach(sim);
  sim->add_option("--out", out, "noisy dataset (.csv or columnar)")->required();
  sim->add_option("--clean-out", clean_out, "noise-free copy (default: <out>_clean)");
  sim->add_option("--format", format, "auto, csv or columnar")->check(CLI::IsMember({"auto", "csv", "columnar"}));
  sim->add_option("--manifest", manifest, "write a replay manifest");

  std::string pip_out, eq_out;
  auto* upd = app.add_subcommand("update", "discover perturbation terms from a dataset");
  upd_f.attach(upd);
  upd->add_option("--data", data, "measured dataset")->required()->check(CLI::ExistingFile);
  upd->add_option("--out", out, "updated twin JSON")->required();
  upd->add_option("--pip", pip_out, "PIP table CSV (default: <out stem>_pip.csv)");
  upd->add_option("--equations", eq_out, "equations text (default: <out stem>_equations.txt)");
  upd->add_option("--manifest", manifest, "write a replay manifest");

  std::string x0, band = "local", forcing = "white_noise";
  double T = 1.0, dt = 1e-3;
  std::uint64_t forcing_seed = 1, noise_seed = 1, sample_seed = 0;
  int samples = 50;
  bool compare = false;
  auto* pre = app.add_subcommand("predict", "integrate an updated twin with a 95% band");
  pre->add_option("--twin", twin_path, "updated twin JSON")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", out, "prediction CSV; metadata goes to <out>.json")->required();
  pre->add_option("--x0", x0, "initial state (default: the preset's)");
  pre->add_option("--T", T, "horizon [s]");
  pre->add_option("--dt", dt, "step [s]");
  pre->add_option("--forcing-seed", forcing_seed, "seed of the fresh forcing record (framework 1)");
  pre->add_option("--noise-seed", noise_seed, "seed of the Brownian path (framework 2)");
  pre->add_option("--forcing", forcing, "white_noise or unit_variance");
  pre->add_option("--band", band, "local or propagated")->check(CLI::IsMember({"local", "propagated"}));
  pre->add_option("--samples", samples, "parameter draws for the propagated band");
  pre->add_option("--sample-seed", sample_seed, "seed of the parameter draws");
  pre->add_flag("--compare", compare, "simulate the true system and report NRMSE and band coverage");
  pre->add_option("--manifest", manifest, "write a replay manifest");

  std::string levels, seeds = "0-9", csv_out;
  auto* swp = app.add_subcommand("sweep", "noise-sensitivity study over levels and seeds");
  swp_f.attach(swp);
  swp->add_option("--levels", levels, "comma-separated noise levels (default: 14 levels over [0, 0.6])");
  swp->add_option("--seeds", seeds, "seed range a-b or list");
  swp->add_option("--out", out, "sweep report JSON")->required();
  swp->add_option("--csv", csv_out, "per-level CSV (default: <out stem>_levels.csv)");
  swp->add_option("--manifest", manifest, "write a replay manifest");

  std::string replay_path, out_dir;
  auto* rep = app.add_subcommand("replay", "re-run a manifest and compare output digests");
  rep->add_option("manifest", replay_path, "manifest JSON")->required()->check(CLI::ExistingFile);
  rep->add_option("--out-dir", out_dir, "write outputs here instead of the recorded paths");

  auto* lst = app.add_subcommand("systems", "list built-in systems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*lst) {
      for (const auto& s : builtin_systems())
        std::cout << s.name << ": " << s.state_dim << " states, " << s.input_dim << " inputs\n";
      return 0;
    }
    if (*rep) return replay(replay_path, out_dir, jobs);

    json inv;
    if (*sim) {
      inv = sim_f.resolve();
      inv["command"] = "simulate";
      inv["format"] = format;
      inv["outputs"] = {{"data", out}, {"clean", clean_out.empty() ? stem_path(out, "_clean") : clean_out}};
    } else if (*upd) {
      inv = upd_f.resolve();
      inv["command"] = "update";
      inv["inputs"] = {{"data", data}};
      inv["outputs"] = {{"twin", out},
                        {"pip", pip_out.empty() ? stem_path(fs::path(out).replace_extension(".csv").string(), "_pip") : pip_out},
                        {"equations", eq_out.empty() ? stem_path(fs::path(out).replace_extension(".txt").string(), "_equations") : eq_out}};
    } else if (*pre) {
      const UpdatedTwin tw = twin_from_json(read_json(twin_path));
      json x = json::array();
      if (!x0.empty()) {
        for (double v : parse_list(x0)) x.push_back(v);
      } else {
        const Experiment e = preset(tw.system, tw.framework);
        for (Eigen::Index i = 0; i < e.x0.size(); ++i) x.push_back(e.x0[i]);
      }
      if (!(T > 0.0) || !(dt > 0.0)) throw ConfigError("T and dt must be positive");
      (void)forcing_from_name(forcing);
      inv = {{"command", "predict"},
             {"inputs", {{"twin", twin_path}}},
             {"outputs", {{"predictions", out}, {"meta", out + ".json"}}},
             {"predict",
              {{"x0", x},
               {"T", T},
               {"dt", dt},
               {"forcing_seed", forcing_seed},
               {"noise_seed", noise_seed},
               {"forcing", forcing},
               {"band", band},
               {"samples", samples},
               {"sample_seed", sample_seed},
               {"compare", compare}}}};
    } else if (*swp) {
      inv = swp_f.resolve();
      inv["command"] = "sweep";
      inv["levels"] = levels.empty() ? default_sweep_levels() : parse_list(levels);
      inv["seeds"] = parse_seeds(seeds);
      inv["outputs"] = {{"report", out},
                        {"levels", csv_out.empty() ? stem_path(fs::path(out).replace_extension(".csv").string(), "_levels") : csv_out}};
    }
    execute(inv, jobs, manifest);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (const auto* s = dynamic_cast<const SamplerError*>(&e); s != nullptr && !s->columns().empty()) {
      std::cerr << "offending columns:";
      for (const auto& c : s->columns()) std::cerr << " " << c;
      std::cerr << "\n";
    }
    return exit_code_for(e);
  }
}
