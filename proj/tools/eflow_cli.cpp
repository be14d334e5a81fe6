// eflow: run the elliptic operator flow on a scenario and emit CSV/JSON artifacts.
//
// Exit codes: 0 ok, 1 input error, 2 not converged, 3 invariant verdict failed,
// 4 Fock spectral gap above tolerance.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "eflow/eflow.hpp"

namespace fs = std::filesystem;
using eflow::io::json;

namespace {

enum Exit : int { kOk = 0, kInput = 1, kNotConverged = 2, kVerdict = 3, kFockGap = 4 };

struct Overrides {
  std::optional<double> rtol, atol, t_max, stop_tol, tolerance;
};

struct RunSpec {
  eflow::Scenario scenario;
  eflow::IntegratorConfig integrator;
  double tolerance = 1e-5;
  json source;  // inline seed spec or scenario, as loaded
};

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("ELLIPTIC_FLOW_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw eflow::Error(eflow::Errc::ParseError, "ELLIPTIC_FLOW_SEED must be a nonnegative integer");
  }
}

eflow::RegimeSet regimes_from_json(const json& j) {
  eflow::RegimeSet out;
  if (j.is_string()) {
    out.insert(eflow::regime_from_string(j.get<std::string>()));
    return out;
  }
  if (!j.is_array()) throw eflow::Error(eflow::Errc::ParseError, "regime must be a string or array");
  for (const auto& t : j) {
    if (!t.is_string()) throw eflow::Error(eflow::Errc::ParseError, "regime tags must be strings");
    out.insert(eflow::regime_from_string(t.get<std::string>()));
  }
  return out;
}

eflow::Scenario scenario_from_seed_spec(const json& g, std::optional<std::uint64_t> seed_override) {
  if (!g.is_object()) throw eflow::Error(eflow::Errc::ParseError, "generate must be an object");
  std::uint64_t seed = 0;
  if (g.contains("seed")) {
    if (!g["seed"].is_number_unsigned()) {
      throw eflow::Error(eflow::Errc::ParseError, "seed must be a nonnegative integer");
    }
    seed = g["seed"].get<std::uint64_t>();
  }
  if (seed_override) seed = *seed_override;
  const eflow::RegimeSet tags = g.contains("regime") ? regimes_from_json(g["regime"]) : eflow::RegimeSet{};
  int dim = 1;
  if (g.contains("dim")) {
    if (!g["dim"].is_number_integer()) throw eflow::Error(eflow::Errc::ParseError, "dim must be an integer");
    dim = g["dim"].get<int>();
  }
  return eflow::generate(seed, tags, dim);
}

RunSpec run_from_json(const json& j, const Overrides& ov, std::optional<std::uint64_t> seed_override) {
  if (!j.is_object()) throw eflow::Error(eflow::Errc::ParseError, "config must be a JSON object");
  RunSpec run;
  if (j.contains("generate")) {
    run.scenario = scenario_from_seed_spec(j["generate"], seed_override);
    run.source = {{"generate", j["generate"]}};
    if (seed_override) run.source["generate"]["seed"] = *seed_override;
  } else if (j.contains("problem")) {
    run.scenario = eflow::io::scenario_from_json(j);
    run.source = {{"scenario", eflow::io::scenario_to_json(run.scenario)}};
  } else {
    throw eflow::Error(eflow::Errc::ParseError, "config needs either generate or problem");
  }
  if (j.contains("integrator")) run.integrator = eflow::io::config_from_json(j["integrator"]);
  run.tolerance = eflow::io::number_field(j, "tolerance", run.tolerance);
  if (ov.rtol) run.integrator.rtol = *ov.rtol;
  if (ov.atol) run.integrator.atol = *ov.atol;
  if (ov.t_max) run.integrator.t_max = *ov.t_max;
  if (ov.stop_tol) run.integrator.stop_tol = *ov.stop_tol;
  if (ov.tolerance) run.tolerance = *ov.tolerance;
  eflow::validate(run.scenario.problem);
  return run;
}

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void text(const std::string& name, const std::string& body) {
    eflow::io::write_text_file((dir_ / name).string(), body);
    names_.push_back(name);
  }
  void json_file(const std::string& name, const json& body) { text(name, body.dump(2) + "\n"); }

  void manifest(const std::string& command, const std::string& config_path, const RunSpec* run,
                int exit_code) {
    json m = {{"command", command}, {"config_path", config_path}, {"output_dir", dir_.string()},
              {"exit_code", exit_code}};
    if (run) {
      m["source"] = run->source;
      m["integrator"] = eflow::io::config_to_json(run->integrator);
      m["tolerance"] = run->tolerance;
    }
    json sums = json::object();
    for (const auto& n : names_) sums[n] = eflow::io::file_checksum((dir_ / n).string());
    m["artifacts"] = sums;
    eflow::io::write_json_file((dir_ / "manifest.json").string(), m);
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

std::mutex log_mutex;

void report(const std::string& msg) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "eflow: " << msg << "\n";
}

int exit_for(const eflow::Error& e) {
  return e.code() == eflow::Errc::NotConverged ? kNotConverged : kInput;
}

int run_flow(const RunSpec& run, Artifacts& out) {
  const eflow::Trajectory traj = eflow::integrate(run.scenario.problem, run.integrator);
  out.text("trajectory.csv", eflow::io::trajectory_csv(traj));
  out.json_file("state_final.json", eflow::io::final_state_to_json(traj));
  if (!traj.stats().reached_stop) {
    report("NotConverged: ||D_t||_2 = " + eflow::io::fmt17(traj.stats().final_d_hs_norm) +
           " at t_max = " + eflow::io::fmt17(traj.t_end()));
    return kNotConverged;
  }
  return kOk;
}

int run_invariants(const RunSpec& run, Artifacts& out) {
  const eflow::Trajectory traj = eflow::integrate(run.scenario.problem, run.integrator);
  const eflow::InvariantReport rep = eflow::audit(traj);
  out.json_file("invariants.json", eflow::io::report_to_json(rep));
  if (!rep.verdicts.all_ok()) {
    report("invariant verdict failed for " + run.scenario.name);
    return kVerdict;
  }
  return kOk;
}

int run_asymptote(const RunSpec& run, Artifacts& out) {
  const eflow::Trajectory traj = eflow::integrate(run.scenario.problem, run.integrator);
  const eflow::AsymptoticsResult a = eflow::limit_operator(traj);
  json j = eflow::io::asymptotics_to_json(a);
  if (eflow::is_commuting(run.scenario.problem)) {
    const eflow::Matrix closed = eflow::commutative_closed_form(run.scenario.problem);
    j["commutative_closed_form"] = eflow::io::matrix_to_json(closed);
    j["commutative_closed_form_residual"] = (a.upsilon_inf - closed).norm();
  }
  out.json_file("asymptotics.json", j);
  return kOk;
}

int run_fock(const RunSpec& run, Artifacts& out) {
  const eflow::FlowProblem& p = run.scenario.problem;
  const auto ops = eflow::jordan_wigner(static_cast<int>(p.dim()));
  eflow::build_h0(p.upsilon0, p.d0, p.e0, ops);  // rejects non-antisymmetric pairing early
  const eflow::Trajectory traj = eflow::integrate(p, run.integrator);
  const eflow::AsymptoticsResult a = eflow::limit_operator(traj);
  const eflow::SpectralComparison cmp = eflow::validate(p, a, ops);
  json j = eflow::io::spectra_to_json(cmp);
  j["tolerance"] = run.tolerance;
  j["energy_shift"] = a.energy_shift;
  out.json_file("spectra.json", j);
  if (cmp.max_abs_gap > run.tolerance) {
    report("max_abs_gap " + eflow::io::fmt17(cmp.max_abs_gap) + " exceeds tolerance " +
           eflow::io::fmt17(run.tolerance));
    return kFockGap;
  }
  return kOk;
}

using Command = int (*)(const RunSpec&, Artifacts&);

Command command_named(const std::string& name) {
  if (name == "flow") return run_flow;
  if (name == "invariants") return run_invariants;
  if (name == "asymptote") return run_asymptote;
  if (name == "fock") return run_fock;
  throw eflow::Error(eflow::Errc::ParseError, "unknown command '" + name + "'");
}

int single(const std::string& name, const std::string& config, const std::string& out_dir,
           const Overrides& ov) {
  std::optional<RunSpec> run;
  try {
    run = run_from_json(eflow::io::read_json_file(config), ov, env_seed());
  } catch (const eflow::Error& e) {
    report(e.what());
    return kInput;
  }
  Artifacts out(out_dir);
  int code = kOk;
  try {
    code = command_named(name)(*run, out);
  } catch (const eflow::Error& e) {
    report(e.what());
    code = exit_for(e);
  }
  out.manifest(name, config, &*run, code);
  return code;
}

int scalar(double alpha, double beta, double t_max, const std::string& out_dir, const Overrides& ov) {
  Artifacts out(out_dir);
  int code = kOk;
  RunSpec run;
  try {
    const eflow::ScalarFlow sf{alpha, beta};
    eflow::scalar_closed_form(sf, 0.0);
    if (!(t_max > 0.0)) throw eflow::Error(eflow::Errc::InvalidConfig, "t-max must be positive");
    auto& p = run.scenario.problem;
    p.upsilon0 = eflow::Matrix::Constant(1, 1, eflow::Complex(-alpha, 0.0));
    p.d0 = eflow::Matrix::Constant(1, 1, eflow::Complex(0.0, beta));
    p.mu = alpha + 0.01;
    p.epsilon = 0.01;
    run.scenario.name = "scalar";
    run.integrator.t_max = t_max;
    run.integrator.stop_tol = 1e-300;
    run.integrator.sample_stride = t_max / 200.0;
    if (ov.rtol) run.integrator.rtol = *ov.rtol;
    if (ov.atol) run.integrator.atol = *ov.atol;
    const double tol = ov.tolerance.value_or(1e-6);
    run.tolerance = tol;
    run.source = {{"scalar", {{"alpha", alpha}, {"beta", beta}, {"t_max", t_max}}}};

    const eflow::Trajectory traj = eflow::integrate(p, run.integrator);
    std::string csv = "t,f_closed,g_closed,f_numeric,g_numeric,abs_err\n";
    double worst = 0.0;
    for (double t : eflow::sample_times(traj)) {
      const eflow::ScalarValue c = eflow::scalar_closed_form(sf, t);
      const eflow::FlowState s = eflow::dense_eval(traj, t);
      const double f = s.delta(0, 0).real(), g = std::abs(s.d(0, 0));
      const double err = std::max(std::abs(f - c.f), std::abs(g - c.g_magnitude));
      worst = std::max(worst, err);
      using eflow::io::fmt17;
      csv += fmt17(t) + ',' + fmt17(c.f) + ',' + fmt17(c.g_magnitude) + ',' + fmt17(f) + ',' +
             fmt17(g) + ',' + fmt17(err) + '\n';
    }
    out.text("scalar.csv", csv);
    if (worst > tol) {
      report("max abs_err " + eflow::io::fmt17(worst) + " exceeds " + eflow::io::fmt17(tol));
      code = kVerdict;
    }
  } catch (const eflow::Error& e) {
    report(e.what());
    code = exit_for(e);
  }
  out.manifest("scalar", "", &run, code);
  return code;
}

struct SweepItem {
  json config;
  std::string label;
};

std::vector<SweepItem> sweep_items(const json& j, std::optional<std::uint64_t> seed_override) {
  std::vector<SweepItem> items;
  if (j.contains("runs")) {
    if (!j["runs"].is_array()) throw eflow::Error(eflow::Errc::ParseError, "runs must be an array");
    for (const auto& r : j["runs"]) items.push_back({r, ""});
  }
  if (j.contains("generate")) {
    const json& g = j["generate"];
    if (!g.is_object()) throw eflow::Error(eflow::Errc::ParseError, "generate must be an object");
    std::uint64_t base = g.value("seed", std::uint64_t{0});
    if (seed_override) base = *seed_override;
    const int count = g.value("count", 1);
    std::vector<int> dims = g.contains("dims") ? g["dims"].get<std::vector<int>>() : std::vector<int>{2};
    const json regime = g.value("regime", json::array());
    for (int k = 0; k < count; ++k) {
      for (int d : dims) {
        json cfg = {{"generate", {{"seed", base + static_cast<std::uint64_t>(k)}, {"regime", regime}, {"dim", d}}}};
        if (j.contains("integrator")) cfg["integrator"] = j["integrator"];
        items.push_back({cfg, ""});
      }
    }
  }
  if (items.empty()) throw eflow::Error(eflow::Errc::ParseError, "sweep needs runs or generate");
  for (std::size_t i = 0; i < items.size(); ++i) items[i].label = "run-" + std::to_string(i);
  return items;
}

int sweep(const std::string& config, const std::string& out_dir, int jobs, const Overrides& ov) {
  json root;
  std::vector<SweepItem> items;
  std::vector<std::string> commands{"invariants", "asymptote"};
  try {
    root = eflow::io::read_json_file(config);
    if (!root.is_object()) throw eflow::Error(eflow::Errc::ParseError, "sweep config must be an object");
    items = sweep_items(root, env_seed());
    if (root.contains("commands")) commands = root["commands"].get<std::vector<std::string>>();
    for (const auto& c : commands) command_named(c);
  } catch (const eflow::Error& e) {
    report(e.what());
    return kInput;
  } catch (const json::exception& e) {
    report(std::string("ParseError: ") + e.what());
    return kInput;
  }
  if (jobs < 1) jobs = 1;

  std::vector<int> codes(items.size(), kOk);
  std::vector<std::string> names(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      Artifacts out(fs::path(out_dir) / items[i].label);
      std::optional<RunSpec> run;
      int code = kOk;
      try {
        run = run_from_json(items[i].config, ov, std::nullopt);
        names[i] = run->scenario.name;
        for (const auto& c : commands) code = std::max(code, command_named(c)(*run, out));
      } catch (const eflow::Error& e) {
        report(items[i].label + ": " + e.what());
        code = std::max(code, exit_for(e));
      }
      codes[i] = code;
      out.manifest("sweep", config, run ? &*run : nullptr, code);
    }
  };
  std::vector<std::thread> pool;
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), items.size());
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  json summary = json::array();
  int worst = kOk;
  for (std::size_t i = 0; i < items.size(); ++i) {
    summary.push_back({{"label", items[i].label}, {"scenario", names[i]}, {"exit_code", codes[i]}});
    worst = std::max(worst, codes[i]);
  }
  eflow::io::write_json_file((fs::path(out_dir) / "sweep.json").string(),
                             {{"config_path", config}, {"commands", commands}, {"runs", summary}});
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elliptic operator flow: trajectories, invariants, asymptotics and Fock checks"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config, out_dir = "out";
  int jobs = 1;
  double alpha = 0.99, beta = 0.07, scalar_t_max = 2.5;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config, "Scenario or sweep JSON");
    if (needs_config) c->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--rtol", ov.rtol, "Relative tolerance");
    sub->add_option("--atol", ov.atol, "Absolute tolerance");
    sub->add_option("--stop-tol", ov.stop_tol, "Stop once ||D_t||_2 falls below this");
    sub->add_option("--tolerance", ov.tolerance, "Acceptance tolerance");
  };

  std::vector<CLI::App*> singles;
  const std::pair<const char*, const char*> commands[]{
      {"flow", "Integrate and write the sampled trajectory"},
      {"invariants", "Audit conserved and monotone quantities"},
      {"asymptote", "Limit operator, energy shift and decay rate"},
      {"fock", "Compare the Fock spectrum with the diagonalized form"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, true);
    sub->add_option("--t-max", ov.t_max, "Integration horizon");
    singles.push_back(sub);
  }
  auto* sc = app.add_subcommand("scalar", "Scalar flow against its closed form");
  add_common(sc, false);
  sc->add_option("--alpha", alpha, "Upsilon_0 = -alpha");
  sc->add_option("--beta", beta, "D_0 = i beta");
  sc->add_option("--t-max", scalar_t_max, "Integration horizon");
  auto* sw = app.add_subcommand("sweep", "Run many scenarios in parallel");
  add_common(sw, true);
  sw->add_option("--t-max", ov.t_max, "Integration horizon");
  sw->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }

  try {
    for (auto* sub : singles)
      if (sub->parsed()) return single(sub->get_name(), config, out_dir, ov);
    if (sc->parsed()) return scalar(alpha, beta, scalar_t_max, out_dir, ov);
    if (sw->parsed()) return sweep(config, out_dir, jobs, ov);
  } catch (const std::exception& e) {
    report(e.what());
    return kInput;
  }
  return kInput;
}
