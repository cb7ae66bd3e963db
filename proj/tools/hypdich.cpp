// hypdich: config-driven front end for the solver library.
//
//   hypdich <check|solve|monodromy|periodic|quasilinear|example21|robustness>
//           --config <file> [--out <dir>] [--nx N] [--threads K] [--skip-check]
//
// Exit codes: 0 ok, 1 check/validation failure, 2 numerical failure,
// 3 usage/config error.

#include "hypdich/hypdich.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using hypdich::io::json;
using hypdich::io::RunConfig;

constexpr const char* kVersion = "0.1.0";

enum Exit { ok = 0, validation = 1, numerical = 2, usage = 3 };

struct Outcome {
  int code = ok;
  std::string status = "ok";
  json result = json::object();
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hypdich::Error("cannot write " + path.string());
  out << text;
}

void write_field(const fs::path& dir, const hypdich::SpaceTimeField& u, bool binary) {
  {
    std::ofstream out(dir / "solution.csv", std::ios::binary);
    if (!out) throw hypdich::Error("cannot write solution.csv");
    u.write_csv(out);
  }
  if (binary) {
    std::ofstream out(dir / "solution.bin", std::ios::binary);
    u.write_binary(out);
  }
}

bool depends_on_state(const hypdich::ProblemSpec& s) {
  auto uses_u = [](const hypdich::expr::Ast& e) {
    for (const auto& v : hypdich::expr::free_vars(e))
      if (v != "x" && v != "t") return true;
    return false;
  };
  for (const auto& e : s.A)
    if (uses_u(e)) return true;
  for (const auto& e : s.B)
    if (uses_u(e)) return true;
  return false;
}

const hypdich::ProblemSpec& need_problem(const RunConfig& c) {
  if (!c.problem) throw hypdich::io::ConfigError("config has no problem");
  return *c.problem;
}

// ---------------------------------------------------------------- check

json run_check(const hypdich::ProblemSpec& spec, const RunConfig& cfg, bool& pass) {
  json j;
  const auto h1 = hypdich::validate_h1(spec, cfg.h1_samples);
  j["h1"] = hypdich::io::to_json(h1);

  const bool trace = hypdich::check_h3_trace(spec.p, spec.n);
  std::optional<bool> comb;
  if (spec.n <= 8) comb = hypdich::check_h3_combinatorial(spec.p, spec.n);
  j["h3"] = {{"trace", trace}, {"combinatorial", comb ? json(*comb) : json(nullptr)}, {"agree", !comb || *comb == trace}};

  bool d_ok = false;
  if (h1.ok()) {
    try {
      const double d = hypdich::smoothing_time_d(spec, cfg.trace_time_samples);
      const double bound = spec.n / h1.lambda0_measured;
      d_ok = d <= bound * (1.0 + 1e-9);
      j["smoothing_time_d"] = d;
      j["d_bound"] = bound;
    } catch (const hypdich::NumericalError& e) {
      j["smoothing_time_d"] = nullptr;
      j["d_error"] = e.what();
    }
  } else {
    j["smoothing_time_d"] = nullptr;
    j["d_error"] = "skipped: (H1) sampling failed";
  }
  pass = h1.ok() && trace && (!comb || *comb == trace) && d_ok;
  j["pass"] = pass;
  return j;
}

// ---------------------------------------------------------------- commands

Outcome cmd_solve(const hypdich::ProblemSpec& spec, const RunConfig& cfg, const fs::path& out) {
  const hypdich::LinearCoeffs c(spec);
  const double t_end = cfg.t_end ? *cfg.t_end : cfg.s + spec.T;
  if (!(t_end > cfg.s)) throw hypdich::io::ConfigError("solve.t_end must exceed s");
  std::vector<hypdich::expr::BoundExpr> init;
  for (const auto& e : cfg.initial) init.emplace_back(e, std::vector<std::string>{"x"});
  const auto phi = hypdich::GridFunction::sample(spec.n, cfg.grid.nx, cfg.s, [&](int j, double x) {
    if (init.empty()) return 0.0;
    const double v[1] = {x};
    return init[static_cast<std::size_t>(j)](v);
  });
  const double dt = hypdich::resolve_dt(c, cfg.grid, cfg.s, t_end);
  const auto u = hypdich::solve_ivp(c, phi, cfg.s, t_end, dt, !cfg.homogeneous);
  write_field(out, u, cfg.binary);

  Outcome o;
  o.result["t_end"] = t_end;
  o.result["dt"] = u.dt();
  o.result["steps"] = u.size() - 1;
  o.result["sup_over_time"] = u.sup_norm();
  o.result["final"] = {{"sup", u.back().sup_norm()},
                       {"l2", u.back().l2_norm()},
                       {"jump_indicator", hypdich::jump_indicator(u.back())}};
  o.result["files"] = cfg.binary ? json{"solution.csv", "solution.bin"} : json{"solution.csv"};
  return o;
}

Outcome cmd_monodromy(const hypdich::ProblemSpec& spec, const RunConfig& cfg, const fs::path& out) {
  const auto d = hypdich::assemble_monodromy(hypdich::LinearCoeffs(spec), cfg.s, spec.T, cfg.grid, cfg.dichotomy());
  hypdich::io::write_spectrum_csv(out / "spectrum.csv", d.eigenvalues);
  Outcome o;
  o.result = hypdich::io::to_json(d);
  if (!d.dichotomy) {
    o.code = numerical;
    o.status = "no_dichotomy";
  }
  return o;
}

Outcome cmd_periodic(const hypdich::ProblemSpec& spec, const RunConfig& cfg, const fs::path& out) {
  const auto sol = hypdich::solve_periodic(hypdich::LinearCoeffs(spec), cfg.s, spec.T, cfg.grid, cfg.dichotomy());
  write_field(out, sol.field, cfg.binary);
  hypdich::io::write_spectrum_csv(out / "spectrum.csv", sol.decomposition.eigenvalues);
  Outcome o;
  o.result["decomposition"] = hypdich::io::to_json(sol.decomposition);
  o.result["periodicity_defect"] = sol.periodicity_defect;
  o.result["solution_sup"] = sol.field.sup_norm();
  // the residual of the full equation is only meaningful for u-independent coefficients
  if (!depends_on_state(spec) && sol.field.nx() >= 8 && sol.field.size() >= 8)
    o.result["residual"] = hypdich::pde_residual(spec, sol.field);
  else
    o.result["residual"] = nullptr;
  return o;
}

Outcome cmd_quasilinear(const hypdich::ProblemSpec& spec, const RunConfig& cfg, const fs::path& out) {
  hypdich::IterationOptions opt;
  opt.s = cfg.s;
  opt.tol = cfg.tol_iteration;
  opt.max_iter = cfg.max_iter;
  opt.reuse_monodromy = cfg.reuse_monodromy;
  opt.dichotomy = cfg.dichotomy();
  const auto rep = hypdich::iterate(spec, cfg.grid, opt);
  write_field(out, rep.solution, cfg.binary);
  Outcome o;
  o.result = hypdich::io::to_json(rep);
  if (!rep.converged) {
    o.code = numerical;
    o.status = hypdich::status_name(rep.status);
  }
  return o;
}

Outcome cmd_example21(const RunConfig& cfg, const fs::path& out) {
  const auto pred = hypdich::example21::eigenvalues_mu(cfg.lambda, cfg.roots);
  Outcome o;
  o.result["prediction"] = hypdich::io::to_json(pred);
  std::vector<std::complex<double>> predicted;
  for (const auto& [plus, minus] : pred.mu_pairs) {
    predicted.push_back(std::exp(plus * cfg.example_T));
    predicted.push_back(std::exp(minus * cfg.example_T));
  }
  hypdich::detail::sort_spectrum(predicted);
  hypdich::io::write_spectrum_csv(out / "predicted_spectrum.csv", predicted);
  if (cfg.crosscheck) {
    const auto cr = hypdich::example21::crosscheck_monodromy(cfg.lambda, cfg.example_T, cfg.grid, cfg.K, cfg.dichotomy());
    o.result["crosscheck"] = hypdich::io::to_json(cr);
    hypdich::io::write_spectrum_csv(out / "spectrum.csv", cr.computed);
  } else {
    o.result["crosscheck"] = nullptr;
  }
  return o;
}

Outcome cmd_robustness(const hypdich::ProblemSpec& spec, const RunConfig& cfg, const fs::path&) {
  if (cfg.epsilons.empty()) throw hypdich::io::ConfigError("robustness.epsilons is empty");
  if (cfg.a_tilde.empty() && cfg.b_tilde.empty()) throw hypdich::io::ConfigError("robustness needs a_tilde or b_tilde");
  hypdich::Perturbation pert{cfg.a_tilde, cfg.b_tilde, 0.0};
  const auto rep = hypdich::robustness_scan(spec, pert, cfg.epsilons, cfg.s, spec.T, cfg.grid, cfg.dichotomy());
  Outcome o;
  o.result = hypdich::io::to_json(rep);
  return o;
}

// ---------------------------------------------------------------- driver

json error_json(const std::string& kind, const std::string& message) { return {{"kind", kind}, {"message", message}}; }

int finish(json report, int code, const std::optional<fs::path>& out) {
  report["exit_code"] = code;
  const std::string text = hypdich::io::dump_report(report);
  if (out) {
    try {
      write_text(*out / "report.json", text);
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
    }
  }
  if (code != ok) std::cerr << text;
  return code;
}

int run(const std::string& command, const std::string& config_path, const std::optional<std::string>& out_override,
        const std::optional<int>& nx, const std::optional<int>& threads, bool skip_check) {
  json report;
  report["command"] = command;
  report["version"] = kVersion;

  RunConfig cfg;
  std::optional<fs::path> out;
  try {
    cfg = hypdich::io::load_config(config_path);
    if (out_override) cfg.out = *out_override;
    if (nx) cfg.grid.nx = *nx;
    if (threads) cfg.threads = *threads;
    hypdich::io::check_config(cfg);
    hypdich::set_threads(cfg.threads);
    if (command == "example21") cfg.problem = hypdich::example21::linear_problem(cfg.lambda, cfg.example_T);
    need_problem(cfg);
    out = fs::path(cfg.out);
    fs::create_directories(*out);
  } catch (const std::exception& e) {
    report["status"] = "error";
    report["error"] = error_json("config", e.what());
    if (!out && out_override) {
      std::error_code ec;
      fs::create_directories(*out_override, ec);
      if (!ec) out = fs::path(*out_override);
    }
    return finish(report, usage, out);
  }
  report["config"] = hypdich::io::config_to_json(cfg);
  const auto& spec = *cfg.problem;

  try {
    if (command == "check" || !skip_check) {
      bool pass = false;
      report["check"] = run_check(spec, cfg, pass);
      if (!pass) {
        report["status"] = "check_failed";
        return finish(report, validation, out);
      }
      if (command == "check") {
        report["status"] = "ok";
        return finish(report, ok, out);
      }
    } else {
      report["check"] = "skipped";
    }

    Outcome o;
    if (command == "solve") o = cmd_solve(spec, cfg, *out);
    else if (command == "monodromy") o = cmd_monodromy(spec, cfg, *out);
    else if (command == "periodic") o = cmd_periodic(spec, cfg, *out);
    else if (command == "quasilinear") o = cmd_quasilinear(spec, cfg, *out);
    else if (command == "example21") o = cmd_example21(cfg, *out);
    else o = cmd_robustness(spec, cfg, *out);
    report["status"] = o.status;
    report["result"] = std::move(o.result);
    return finish(report, o.code, out);
  } catch (const hypdich::io::ConfigError& e) {
    report["status"] = "error";
    report["error"] = error_json("config", e.what());
    return finish(report, usage, out);
  } catch (const hypdich::ValidationError& e) {
    report["status"] = "error";
    report["error"] = error_json("validation", e.what());
    return finish(report, validation, out);
  } catch (const hypdich::expr::EvalError& e) {
    report["status"] = "error";
    report["error"] = error_json("validation", e.what());
    return finish(report, validation, out);
  } catch (const std::exception& e) {
    report["status"] = "error";
    report["error"] = error_json("numerical", e.what());
    return finish(report, numerical, out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolic systems with reflection boundary conditions: checks, solves, dichotomy analysis"};
  app.require_subcommand(1, 1);

  std::string config;
  std::optional<std::string> out;
  std::optional<int> nx, threads;
  bool skip_check = false;

  const std::pair<const char*, const char*> commands[] = {
      {"check", "(H1)/(H3) checks and the smoothing time d"},
      {"solve", "initial-boundary value problem on [s, t_end]"},
      {"monodromy", "period map, spectrum and dichotomy split"},
      {"periodic", "unique T-periodic solution of the linear problem"},
      {"quasilinear", "frozen-coefficient iteration for small periodic solutions"},
      {"example21", "closed-form spectrum of the 2x2 reference example"},
      {"robustness", "dichotomy persistence under a + eps*a~, b + eps*b~"},
  };
  for (const auto& [name, help] : commands) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("--config", config, "JSON config file")->required();
    sc->add_option("--out", out, "output directory (overrides the config)");
    sc->add_option("--nx", nx, "grid intervals (overrides the config)");
    sc->add_option("--threads", threads, "worker threads for monodromy assembly");
    sc->add_flag("--skip-check", skip_check, "skip the (H1)/(H3) check");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }
  return run(app.get_subcommands().front()->get_name(), config, out, nx, threads, skip_check);
}
