#pragma once

// JSON config ingestion and report serialization.

#include "hypdich/characteristics.hpp"
#include "hypdich/dichotomy.hpp"
#include "hypdich/example21.hpp"
#include "hypdich/problem.hpp"
#include "hypdich/quasilinear.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace hypdich::io {

using json = nlohmann::ordered_json;

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Nearest double to the 12-significant-digit decimal rendering of v.
inline double round12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

/// Copy of j with every floating-point number passed through round12.
inline json rounded(const json& j) {
  if (j.is_number_float()) return round12(j.get<double>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& e : j) out.push_back(rounded(e));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = rounded(v);
    return out;
  }
  return j;
}

inline std::string dump_report(const json& j) { return rounded(j).dump(2) + "\n"; }

// ---------------------------------------------------------------- parsing

namespace detail {

inline expr::Ast expression(const json& j, const std::string& where) {
  if (j.is_number()) return expr::Ast::constant(j.get<double>());
  if (!j.is_string()) throw ConfigError(where + ": expected an expression string or a number");
  try {
    return expr::parse(j.get<std::string>());
  } catch (const expr::ParseError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline std::vector<expr::Ast> expression_list(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n)
    throw ConfigError(where + ": expected an array of " + std::to_string(n) + " expressions");
  std::vector<expr::Ast> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(expression(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

// n x n as nested arrays, or flat row-major of length n*n
inline std::vector<expr::Ast> expression_matrix(const json& j, int n, const std::string& where) {
  const auto N = static_cast<std::size_t>(n);
  if (j.is_array() && j.size() == N * N && !j[0].is_array()) return expression_list(j, N * N, where);
  if (!j.is_array() || j.size() != N) throw ConfigError(where + ": expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  std::vector<expr::Ast> out;
  for (std::size_t r = 0; r < N; ++r) {
    auto row = expression_list(j[r], N, where + "[" + std::to_string(r) + "]");
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

template <class T>
T number(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  const auto& v = obj[key];
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  } else {
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  }
  return v.get<T>();
}

inline void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline ProblemSpec problem_from_json(const json& j) {
  const std::string w = "problem";
  detail::only_keys(j, {"n", "m", "A", "B", "f", "p", "T", "delta0", "Lambda0"}, w);
  for (const char* key : {"n", "m", "A", "B", "p", "T"})
    if (!j.contains(key)) throw ConfigError(w + ": missing '" + key + "'");
  ProblemSpec s;
  s.n = detail::number<int>(j, "n", 0, w);
  s.m = detail::number<int>(j, "m", 0, w);
  if (s.n < 1) throw ConfigError(w + ".n must be positive");
  const auto N = static_cast<std::size_t>(s.n);
  s.A = detail::expression_list(j["A"], N, w + ".A");
  s.B = detail::expression_matrix(j["B"], s.n, w + ".B");
  if (j.contains("f"))
    s.f = detail::expression_list(j["f"], N, w + ".f");
  else
    s.f.assign(N, expr::Ast::constant(0.0));
  const auto& p = j["p"];
  if (!p.is_array() || p.size() != N) throw ConfigError(w + ".p: expected an n x n numeric matrix");
  s.p.resize(s.n, s.n);
  for (std::size_t r = 0; r < N; ++r) {
    if (!p[r].is_array() || p[r].size() != N) throw ConfigError(w + ".p: expected an n x n numeric matrix");
    for (std::size_t c = 0; c < N; ++c) {
      if (!p[r][c].is_number()) throw ConfigError(w + ".p: entries must be numbers");
      s.p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = p[r][c].get<double>();
    }
  }
  s.T = detail::number<double>(j, "T", 1.0, w);
  s.delta0 = detail::number<double>(j, "delta0", 0.1, w);
  s.lambda0_declared = detail::number<double>(j, "Lambda0", 1.0, w);
  try {
    validate(s);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline json problem_to_json(const ProblemSpec& s) {
  json j;
  j["n"] = s.n;
  j["m"] = s.m;
  auto list = [](const std::vector<expr::Ast>& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back(expr::print(e));
    return a;
  };
  j["A"] = list(s.A);
  json B = json::array();
  for (int r = 0; r < s.n; ++r) {
    json row = json::array();
    for (int c = 0; c < s.n; ++c) row.push_back(expr::print(s.b(r, c)));
    B.push_back(row);
  }
  j["B"] = B;
  j["f"] = list(s.f);
  json p = json::array();
  for (int r = 0; r < s.n; ++r) {
    json row = json::array();
    for (int c = 0; c < s.n; ++c) row.push_back(s.p(r, c));
    p.push_back(row);
  }
  j["p"] = p;
  j["T"] = s.T;
  j["delta0"] = s.delta0;
  j["Lambda0"] = s.lambda0_declared;
  return j;
}

struct RunConfig {
  std::optional<std::string> problem_path;
  std::optional<ProblemSpec> problem;
  GridSpec grid{};
  double s = 0.0;
  double tol_solver = 1e-10;
  double tol_iteration = 1e-8;
  double gap = 0.02;
  std::string out = "out";
  int threads = 1;

  int h1_samples = 5;
  int trace_time_samples = 32;

  // solve
  std::vector<expr::Ast> initial;  // over x; zero when empty
  std::optional<double> t_end;     // default s + T
  bool homogeneous = false;
  bool binary = false;             // also write the binary dump

  // quasilinear
  int max_iter = 50;
  bool reuse_monodromy = false;

  // example21
  double lambda = 0.0;
  int roots = 6;
  int K = 4;
  bool crosscheck = true;
  double example_T = 1.0;

  // robustness
  std::vector<expr::Ast> a_tilde, b_tilde;
  std::vector<double> epsilons;

  DichotomyOptions dichotomy() const {
    DichotomyOptions o;
    o.gap = gap;
    o.periodicity_tol = tol_solver;
    return o;
  }
};

inline void check_config(const RunConfig& c) {
  if (c.grid.nx < 8) throw ConfigError("grid.nx must be >= 8");
  if (!(c.grid.cfl > 0.0 && c.grid.cfl <= 1.0)) throw ConfigError("grid.cfl must lie in (0, 1]");
  if (c.grid.dt && !(*c.grid.dt > 0.0)) throw ConfigError("grid.dt must be positive");
  for (double tol : {c.tol_solver, c.tol_iteration, c.gap})
    if (!(tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.h1_samples < 2) throw ConfigError("check.h1_samples must be >= 2");
  if (c.max_iter < 1) throw ConfigError("quasilinear.max_iter must be >= 1");
  if (c.roots < 1 || c.K < 1) throw ConfigError("example21.roots and example21.K must be >= 1");
}

/// `base_dir` resolves a relative problem path.
inline RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
  detail::only_keys(j, {"problem", "grid", "s", "tolerances", "out", "threads", "check", "solve", "quasilinear", "example21", "robustness"},
                    "config");
  RunConfig c;
  if (j.contains("problem")) {
    const auto& p = j["problem"];
    if (p.is_string()) {
      c.problem_path = p.get<std::string>();
      std::filesystem::path path(*c.problem_path);
      if (path.is_relative()) path = base_dir / path;
      c.problem = problem_from_json(detail::read_json_file(path));
    } else {
      c.problem = problem_from_json(p);
    }
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    detail::only_keys(g, {"nx", "cfl", "dt"}, "grid");
    c.grid.nx = detail::number<int>(g, "nx", c.grid.nx, "grid");
    c.grid.cfl = detail::number<double>(g, "cfl", c.grid.cfl, "grid");
    if (g.contains("dt") && !g["dt"].is_null()) c.grid.dt = detail::number<double>(g, "dt", 0.0, "grid");
  }
  c.s = detail::number<double>(j, "s", 0.0, "config");
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    detail::only_keys(t, {"solver", "iteration", "gap"}, "tolerances");
    c.tol_solver = detail::number<double>(t, "solver", c.tol_solver, "tolerances");
    c.tol_iteration = detail::number<double>(t, "iteration", c.tol_iteration, "tolerances");
    c.gap = detail::number<double>(t, "gap", c.gap, "tolerances");
  }
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw ConfigError("out: expected a string");
    c.out = j["out"].get<std::string>();
  }
  c.threads = detail::number<int>(j, "threads", 1, "config");
  if (j.contains("check")) {
    const auto& k = j["check"];
    detail::only_keys(k, {"h1_samples", "trace_time_samples"}, "check");
    c.h1_samples = detail::number<int>(k, "h1_samples", c.h1_samples, "check");
    c.trace_time_samples = detail::number<int>(k, "trace_time_samples", c.trace_time_samples, "check");
  }
  if (j.contains("solve")) {
    const auto& k = j["solve"];
    detail::only_keys(k, {"initial", "t_end", "homogeneous", "binary"}, "solve");
    if (k.contains("initial")) {
      if (!c.problem) throw ConfigError("solve.initial needs a problem");
      c.initial = detail::expression_list(k["initial"], static_cast<std::size_t>(c.problem->n), "solve.initial");
      for (const auto& e : c.initial)
        for (const auto& v : expr::free_vars(e))
          if (v != "x") throw ConfigError("solve.initial may only reference x (found '" + v + "')");
    }
    if (k.contains("t_end") && !k["t_end"].is_null()) c.t_end = detail::number<double>(k, "t_end", 0.0, "solve");
    c.homogeneous = detail::number<bool>(k, "homogeneous", false, "solve");
    c.binary = detail::number<bool>(k, "binary", false, "solve");
  }
  if (j.contains("quasilinear")) {
    const auto& k = j["quasilinear"];
    detail::only_keys(k, {"max_iter", "reuse_monodromy"}, "quasilinear");
    c.max_iter = detail::number<int>(k, "max_iter", c.max_iter, "quasilinear");
    c.reuse_monodromy = detail::number<bool>(k, "reuse_monodromy", false, "quasilinear");
  }
  if (j.contains("example21")) {
    const auto& k = j["example21"];
    detail::only_keys(k, {"lambda", "roots", "K", "crosscheck", "T"}, "example21");
    c.lambda = detail::number<double>(k, "lambda", 0.0, "example21");
    c.roots = detail::number<int>(k, "roots", c.roots, "example21");
    c.K = detail::number<int>(k, "K", c.K, "example21");
    c.crosscheck = detail::number<bool>(k, "crosscheck", true, "example21");
    c.example_T = detail::number<double>(k, "T", 1.0, "example21");
  }
  if (j.contains("robustness")) {
    const auto& k = j["robustness"];
    detail::only_keys(k, {"a_tilde", "b_tilde", "epsilons"}, "robustness");
    if (!c.problem) throw ConfigError("robustness needs a problem");
    // an empty list means no perturbation of that coefficient
    if (k.contains("a_tilde") && !k["a_tilde"].empty()) c.a_tilde = detail::expression_list(k["a_tilde"], static_cast<std::size_t>(c.problem->n), "robustness.a_tilde");
    if (k.contains("b_tilde") && !k["b_tilde"].empty()) c.b_tilde = detail::expression_matrix(k["b_tilde"], c.problem->n, "robustness.b_tilde");
    if (k.contains("epsilons")) {
      if (!k["epsilons"].is_array()) throw ConfigError("robustness.epsilons: expected an array of numbers");
      for (const auto& e : k["epsilons"]) {
        if (!e.is_number()) throw ConfigError("robustness.epsilons: expected an array of numbers");
        c.epsilons.push_back(e.get<double>());
      }
    }
  }
  check_config(c);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(detail::read_json_file(path), path.parent_path().empty() ? "." : path.parent_path());
}

/// The fully resolved configuration, defaults included.
inline json config_to_json(const RunConfig& c) {
  json j;
  if (c.problem_path) j["problem_path"] = *c.problem_path;
  j["problem"] = c.problem ? problem_to_json(*c.problem) : json(nullptr);
  j["grid"] = {{"nx", c.grid.nx}, {"cfl", c.grid.cfl}, {"dt", c.grid.dt ? json(*c.grid.dt) : json(nullptr)}};
  j["s"] = c.s;
  j["tolerances"] = {{"solver", c.tol_solver}, {"iteration", c.tol_iteration}, {"gap", c.gap}};
  j["out"] = c.out;
  j["threads"] = c.threads;
  j["check"] = {{"h1_samples", c.h1_samples}, {"trace_time_samples", c.trace_time_samples}};
  json init = json::array();
  for (const auto& e : c.initial) init.push_back(expr::print(e));
  j["solve"] = {{"initial", init},
                {"t_end", c.t_end ? json(*c.t_end) : json(nullptr)},
                {"homogeneous", c.homogeneous},
                {"binary", c.binary}};
  j["quasilinear"] = {{"max_iter", c.max_iter}, {"reuse_monodromy", c.reuse_monodromy}};
  j["example21"] = {{"lambda", c.lambda}, {"roots", c.roots}, {"K", c.K}, {"crosscheck", c.crosscheck}, {"T", c.example_T}};
  json at = json::array(), bt = json::array();
  for (const auto& e : c.a_tilde) at.push_back(expr::print(e));
  for (const auto& e : c.b_tilde) bt.push_back(expr::print(e));
  j["robustness"] = {{"a_tilde", at}, {"b_tilde", bt}, {"epsilons", c.epsilons}};
  return j;
}

// ---------------------------------------------------------------- reports

inline json complex_json(std::complex<double> z) { return {{"re", z.real()}, {"im", z.imag()}}; }

inline json complex_list(const std::vector<std::complex<double>>& v) {
  json a = json::array();
  for (const auto& z : v) a.push_back(complex_json(z));
  return a;
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const HyperbolicityReport& r, std::size_t max_listed = 20) {
  json v = json::array();
  for (std::size_t k = 0; k < r.violations.size() && k < max_listed; ++k) {
    const auto& e = r.violations[k];
    json pt = {{"condition", e.condition}, {"j", e.j + 1}, {"k", e.k >= 0 ? json(e.k + 1) : json(nullptr)}, {"x", e.x}, {"t", e.t}, {"margin", e.margin}};
    pt["v"] = e.v;
    v.push_back(pt);
  }
  return {{"ok", r.ok()}, {"lambda0_measured", r.lambda0_measured}, {"violation_count", r.violations.size()}, {"violations", v}};
}

/// Eigenvalues are listed in full; M itself is never serialized.
inline json to_json(const MonodromyDecomposition& d) {
  json j;
  j["dichotomy"] = d.dichotomy;
  j["unstable_dim"] = d.unstable_dim;
  j["alpha_hat"] = d.alpha_hat;
  j["M_hat"] = optional_number(d.M_hat);
  j["gap"] = d.gap;
  j["grid"] = {{"nx", d.nx}, {"dt", d.dt}, {"size", d.M.rows()}};
  j["s"] = d.s;
  j["T"] = d.T;
  j["spectral_radius"] = d.eigenvalues.empty() ? 0.0 : std::abs(d.eigenvalues.front());
  j["counts"] = {{"stable", d.stable.size()}, {"unstable", d.unstable.size()}, {"ambiguous", d.ambiguous.size()}};
  j["unstable"] = complex_list(d.unstable);
  j["ambiguous"] = complex_list(d.ambiguous);
  j["eigenvalues"] = complex_list(d.eigenvalues);
  return j;
}

inline json to_json(const example21::SpectralPrediction& p) {
  json pairs = json::array();
  for (const auto& [plus, minus] : p.mu_pairs) pairs.push_back({{"plus", complex_json(plus)}, {"minus", complex_json(minus)}});
  return {{"lambda", p.lambda},
          {"xi_roots", p.xi_roots},
          {"mu_pairs", pairs},
          {"unstable_root_count", p.unstable_root_count},
          {"predicted_unstable_dim", p.predicted_unstable_dim},
          {"gap_margin", p.gap_margin}};
}

inline json to_json(const example21::CrosscheckReport& r) {
  return {{"predicted", complex_list(r.predicted)},
          {"computed", complex_list(r.computed)},
          {"max_relative_mismatch", r.max_relative_mismatch},
          {"monodromy_unstable_dim", r.monodromy_unstable_dim},
          {"predicted_unstable_dim", r.prediction.predicted_unstable_dim},
          {"unstable_dim_match", r.monodromy_unstable_dim == r.prediction.predicted_unstable_dim},
          {"dichotomy", r.dichotomy},
          {"alpha_hat", r.alpha_hat},
          {"M_hat", optional_number(r.M_hat)},
          {"gap_margin", r.prediction.gap_margin}};
}

inline json to_json(const IterationReport& r) {
  json j;
  j["status"] = status_name(r.status);
  j["converged"] = r.converged;
  j["iterates"] = r.iterates;
  j["differences"] = r.differences;
  j["ratios"] = r.ratios;
  j["rho"] = optional_number(r.rho);
  j["rho_per_f"] = optional_number(r.rho_per_f);
  j["f_sup"] = r.f_sup;
  j["solution_sup"] = r.solution_sup;
  j["residual"] = r.residual;
  j["periodicity_defect"] = r.periodicity_defect;
  j["failed_iterate"] = r.failed_iterate ? json(*r.failed_iterate) : json(nullptr);
  j["warnings"] = r.warnings;
  j["base"] = {{"dichotomy", r.base.dichotomy},
               {"unstable_dim", r.base.unstable_dim},
               {"alpha_hat", r.base.alpha_hat},
               {"M_hat", optional_number(r.base.M_hat)}};
  return j;
}

inline json to_json(const RobustnessReport& r) {
  json e = json::array();
  for (const auto& x : r.entries)
    e.push_back({{"epsilon", x.epsilon},
                 {"dichotomy", x.dichotomy},
                 {"unstable_dim", x.unstable_dim},
                 {"alpha_hat", x.alpha_hat},
                 {"M_hat", optional_number(x.M_hat)}});
  return {{"base", {{"dichotomy", r.base.dichotomy}, {"unstable_dim", r.base.unstable_dim}, {"alpha_hat", r.base.alpha_hat}, {"M_hat", optional_number(r.base.M_hat)}}},
          {"entries", e},
          {"persistence_threshold", optional_number(r.persistence_threshold)}};
}

/// re,im,modulus per eigenvalue.
inline void write_spectrum_csv(const std::filesystem::path& path, const std::vector<std::complex<double>>& ev) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "re,im,modulus\n";
  char buf[96];
  for (const auto& z : ev) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", z.real(), z.imag(), std::abs(z));
    out << buf;
  }
}

}  // namespace hypdich::io
