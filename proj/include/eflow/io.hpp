#pragma once

// JSON encodings and CSV writers shared by the command-line tool and tests.
// Matrices use {"n": int, "re": [[...]], "im": [[...]]} with row-major rows.

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "eflow/asymptotics.hpp"
#include "eflow/flow.hpp"
#include "eflow/fock.hpp"
#include "eflow/frak.hpp"
#include "eflow/invariants.hpp"
#include "eflow/scenarios.hpp"

namespace eflow::io {

using json = nlohmann::json;

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json matrix_to_json(const Matrix& m) {
  json re = json::array(), im = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json rr = json::array(), ri = json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ri.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  return {{"n", m.rows()}, {"re", re}, {"im", im}};
}

namespace detail {

inline std::vector<double> flatten(const json& part, Index n, const char* what) {
  std::vector<double> out;
  if (!part.is_array()) throw Error(Errc::ParseError, std::string(what) + " must be an array");
  for (const auto& row : part) {
    if (row.is_array()) {
      if (static_cast<Index>(row.size()) != n) {
        throw Error(Errc::ParseError, std::string(what) + " row length differs from n");
      }
      for (const auto& x : row) {
        if (!x.is_number()) throw Error(Errc::ParseError, std::string(what) + " entries must be numbers");
        out.push_back(x.get<double>());
      }
    } else if (row.is_number()) {
      out.push_back(row.get<double>());
    } else {
      throw Error(Errc::ParseError, std::string(what) + " entries must be numbers");
    }
  }
  if (static_cast<Index>(out.size()) != n * n) {
    throw Error(Errc::ParseError, std::string(what) + " must hold n*n entries");
  }
  return out;
}

}  // namespace detail

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("re")) {
    throw Error(Errc::ParseError, "matrix must be an object with n, re and optional im");
  }
  if (!j["n"].is_number_integer() || j["n"].get<long long>() < 1) {
    throw Error(Errc::ParseError, "matrix n must be a positive integer");
  }
  const auto n = static_cast<Index>(j["n"].get<long long>());
  const std::vector<double> re = detail::flatten(j["re"], n, "re");
  const std::vector<double> im =
      j.contains("im") ? detail::flatten(j["im"], n, "im") : std::vector<double>(re.size(), 0.0);
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < n; ++k) {
      const auto idx = static_cast<std::size_t>(i * n + k);
      m(i, k) = Complex(re[idx], im[idx]);
    }
  if (!m.allFinite()) throw Error(Errc::ParseError, "matrix entries must be finite");
  return m;
}

inline json vector_to_json(const RealVector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline std::string to_string(Symmetry s) {
  return s == Symmetry::Symmetric ? "symmetric" : "antisymmetric";
}

inline Symmetry symmetry_from_json(const json& j) {
  if (j.is_number()) {
    const double s = j.get<double>();
    if (s == 1.0) return Symmetry::Symmetric;
    if (s == -1.0) return Symmetry::Antisymmetric;
  } else if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "symmetric" || s == "+1") return Symmetry::Symmetric;
    if (s == "antisymmetric" || s == "-1") return Symmetry::Antisymmetric;
  }
  throw Error(Errc::ParseError, "symmetry must be +1, -1, \"symmetric\" or \"antisymmetric\"");
}

inline double number_field(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw Error(Errc::ParseError, std::string(key) + " must be a number");
  return j[key].get<double>();
}

inline json problem_to_json(const FlowProblem& p) {
  return {{"upsilon0", matrix_to_json(p.upsilon0)},
          {"d0", matrix_to_json(p.d0)},
          {"symmetry", static_cast<int>(sign_of(p.symmetry))},
          {"mu", p.mu},
          {"epsilon", p.epsilon},
          {"e0", p.e0}};
}

inline FlowProblem problem_from_json(const json& j) {
  if (!j.is_object() || !j.contains("upsilon0") || !j.contains("d0")) {
    throw Error(Errc::ParseError, "problem needs upsilon0 and d0");
  }
  FlowProblem p;
  p.upsilon0 = matrix_from_json(j["upsilon0"]);
  p.d0 = matrix_from_json(j["d0"]);
  p.symmetry = j.contains("symmetry") ? symmetry_from_json(j["symmetry"]) : Symmetry::Symmetric;
  if (!j.contains("mu") || !j.contains("epsilon")) throw Error(Errc::ParseError, "problem needs mu and epsilon");
  p.mu = number_field(j, "mu", 0.0);
  p.epsilon = number_field(j, "epsilon", 0.0);
  p.e0 = number_field(j, "e0", 0.0);
  return p;
}

inline json config_to_json(const IntegratorConfig& c) {
  return {{"rtol", c.rtol},         {"atol", c.atol},         {"h_init", c.h_init},
          {"h_max", c.h_max},       {"t_max", c.t_max},       {"stop_tol", c.stop_tol},
          {"sample_stride", c.sample_stride}};
}

inline IntegratorConfig config_from_json(const json& j, IntegratorConfig c = {}) {
  if (!j.is_object()) throw Error(Errc::ParseError, "integrator must be an object");
  c.rtol = number_field(j, "rtol", c.rtol);
  c.atol = number_field(j, "atol", c.atol);
  c.h_init = number_field(j, "h_init", c.h_init);
  c.h_max = number_field(j, "h_max", c.h_max);
  c.t_max = number_field(j, "t_max", c.t_max);
  c.stop_tol = number_field(j, "stop_tol", c.stop_tol);
  c.sample_stride = number_field(j, "sample_stride", c.sample_stride);
  return c;
}

inline json scenario_to_json(const Scenario& s) {
  json tags = json::array();
  for (Regime r : s.regime_tags) tags.push_back(to_string(r));
  return {{"name", s.name}, {"regime_tags", tags}, {"problem", problem_to_json(s.problem)},
          {"expected", s.expected}};
}

inline Scenario scenario_from_json(const json& j) {
  if (!j.is_object() || !j.contains("problem")) throw Error(Errc::ParseError, "scenario needs a problem");
  Scenario s;
  s.name = j.value("name", std::string("scenario"));
  s.problem = problem_from_json(j["problem"]);
  if (j.contains("regime_tags")) {
    if (!j["regime_tags"].is_array()) throw Error(Errc::ParseError, "regime_tags must be an array");
    for (const auto& t : j["regime_tags"]) {
      if (!t.is_string()) throw Error(Errc::ParseError, "regime tags must be strings");
      s.regime_tags.insert(regime_from_string(t.get<std::string>()));
    }
  }
  if (j.contains("expected")) s.expected = j["expected"];
  return s;
}

inline json stats_to_json(const TrajectoryStats& s) {
  return {{"steps", s.steps},
          {"rejected_steps", s.rejected_steps},
          {"reached_stop", s.reached_stop},
          {"final_d_hs_norm", s.final_d_hs_norm},
          {"max_symmetry_residual", s.max_symmetry_residual},
          {"max_growth_excess", s.max_growth_excess}};
}

inline json final_state_to_json(const Trajectory& traj) {
  const FlowState& s = traj.final_state();
  return {{"t", s.t},
          {"delta", matrix_to_json(s.delta)},
          {"d", matrix_to_json(s.d)},
          {"upsilon", matrix_to_json(s.upsilon(traj.problem()))},
          {"stats", stats_to_json(traj.stats())}};
}

inline json report_to_json(const InvariantReport& r) {
  json samples = json::array();
  for (const auto& s : r.samples) {
    samples.push_back({{"t", s.t},
                       {"tr_motion", s.tr_motion},
                       {"zeta", s.zeta},
                       {"frakD_op_norm", s.frakD_op_norm},
                       {"frakB_trace_norm", s.frakB_trace_norm},
                       {"K_residual", s.K_residual},
                       {"symmetry_residual", s.symmetry_residual}});
  }
  const InvariantVerdicts& v = r.verdicts;
  json verdicts = {{"motion_drift", v.motion_drift},
                   {"zeta_monotone", v.zeta_monotone},
                   {"zeta_direction", to_string(v.zeta_direction)},
                   {"frakD_norm_decreasing", v.frakD_norm_decreasing},
                   {"frakB_trace_decreasing", v.frakB_trace_decreasing},
                   {"frakB_op_decreasing", v.frakB_op_decreasing},
                   {"frakD0_psd", v.frakD0_psd},
                   {"hs_budget_min_slack", v.hs_budget_min_slack},
                   {"hs_budget_ok", v.hs_budget_ok},
                   {"frakD_lower_bound_min", v.frakD_lower_bound_min},
                   {"max_K_residual", v.max_K_residual},
                   {"all_ok", v.all_ok()}};
  return {{"samples", samples}, {"verdicts", verdicts}};
}

inline json asymptotics_to_json(const AsymptoticsResult& a) {
  return {{"upsilon_inf", matrix_to_json(a.upsilon_inf)},
          {"delta_inf", matrix_to_json(a.delta_inf)},
          {"energy_shift", a.energy_shift},
          {"fitted_rate", a.fitted_rate},
          {"tail_bound", a.tail_bound},
          {"energy_identity_residual", a.energy_identity_residual},
          {"gap_check",
           {{"asserted", a.gap_check.asserted},
            {"claimed", a.gap_check.claimed},
            {"observed", a.gap_check.observed}}}};
}

inline json spectra_to_json(const SpectralComparison& s) {
  return {{"spec_h0", vector_to_json(s.spec_h0)},
          {"spec_diag", vector_to_json(s.spec_diag)},
          {"max_abs_gap", s.max_abs_gap},
          {"n_commutator_norm", s.n_commutator_norm},
          {"ground_state_energy", s.ground_state_energy},
          {"predicted_ground", s.predicted_ground}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::ParseError, "cannot write " + path);
  out << text;
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

/// One row per sample: t, hs_norm_D, op_norm_D, tr_Delta, tr_motion, zeta, frakB_trace_norm.
inline std::string trajectory_csv(const Trajectory& traj) {
  const FlowProblem& p = traj.problem();
  std::ostringstream out;
  out << "t,hs_norm_D,op_norm_D,tr_Delta,tr_motion,zeta,frakB_trace_norm\n";
  for (double t : sample_times(traj)) {
    const FlowState s = dense_eval(traj, t);
    const Matrix b = frakB(s, p);
    const double fb = hermitian_eigenvalues(b).cwiseAbs().sum();
    out << fmt17(t) << ',' << fmt17(s.d.norm()) << ',' << fmt17(op_norm(s.d)) << ','
        << fmt17(s.delta.trace().real()) << ',' << fmt17(motion_trace(s, p)) << ','
        << fmt17(zeta(s, p)) << ',' << fmt17(fb) << '\n';
  }
  return out.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace eflow::io
