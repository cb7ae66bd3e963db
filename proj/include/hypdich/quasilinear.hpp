#pragma once

// Small T-periodic solutions of the quasilinear problem by the frozen
// coefficient iteration: u^0 = 0, u^{k+1} is the periodic solution of
//   u_t + A(x,t,u^k) u_x + B(x,t,u^k) u = f.

#include "hypdich/coefficients.hpp"
#include "hypdich/dichotomy.hpp"
#include "hypdich/linear_solver.hpp"
#include "hypdich/problem.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hypdich {

/// Coefficients A(x,t,u_k(x,t)), B(x,t,u_k(x,t)) with bilinear interpolation
/// of u_k. A null field freezes at u = 0.
inline LinearCoeffs freeze_coefficients(const ProblemSpec& spec, std::shared_ptr<const SpaceTimeField> u_k) {
  return LinearCoeffs(spec, std::move(u_k));
}

inline bool exceeds_delta0(const ProblemSpec& spec, const SpaceTimeField& u) { return u.sup_norm() > spec.delta0; }

/// max(sup|w|, sup|d_x w|, sup|d_t w|) with one-sided differences, for
/// w = a - b on a shared grid.
inline double c1_distance(const SpaceTimeField& a, const SpaceTimeField& b) {
  if (a.size() != b.size() || a.n() != b.n() || a.nx() != b.nx()) throw ValidationError("fields live on different grids");
  const int n = a.n(), nx = a.nx();
  const double dx = 1.0 / nx;
  double val = 0.0, ddx = 0.0, ddt = 0.0;
  auto w = [&](std::size_t k, int j, int i) { return a.level(k)(j, i) - b.level(k)(j, i); };
  for (std::size_t k = 0; k < a.size(); ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= nx; ++i) {
        const double v = w(k, j, i);
        val = std::max(val, std::fabs(v));
        if (i < nx) ddx = std::max(ddx, std::fabs(w(k, j, i + 1) - v) / dx);
        if (k + 1 < a.size()) ddt = std::max(ddt, std::fabs(w(k + 1, j, i) - v) / a.dt());
      }
  return std::max({val, ddx, ddt});
}

/// sup over interior nodes and levels of |u_t + A(x,t,u) u_x + B(x,t,u) u - f|
/// with centered differences.
inline double pde_residual(const ProblemSpec& spec, const SpaceTimeField& u) {
  if (u.nx() < 8 || u.size() < 8) throw ValidationError("pde_residual needs Nx >= 8 and at least 8 time levels");
  if (u.n() != spec.n) throw ValidationError("field component count does not match the problem");
  const int n = spec.n, nx = u.nx();
  const auto syms = spec.symbols();
  std::vector<expr::BoundExpr> A, B, F;
  for (int j = 0; j < n; ++j) {
    A.emplace_back(spec.A[j], syms);
    F.emplace_back(spec.f[j], syms);
  }
  for (const auto& e : spec.B) B.emplace_back(e, syms);
  const double dx = 1.0 / nx, dt = u.dt();
  std::vector<double> slots(static_cast<std::size_t>(n + 2));
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < u.size(); ++k) {
    const auto& lv = u.level(k);
    slots[1] = lv.t();
    for (int i = 1; i < nx; ++i) {
      slots[0] = lv.x(i);
      for (int q = 0; q < n; ++q) slots[static_cast<std::size_t>(q + 2)] = lv(q, i);
      for (int j = 0; j < n; ++j) {
        const double ut = (u.level(k + 1)(j, i) - u.level(k - 1)(j, i)) / (2.0 * dt);
        const double ux = (lv(j, i + 1) - lv(j, i - 1)) / (2.0 * dx);
        double r = ut + A[static_cast<std::size_t>(j)](slots) * ux - F[static_cast<std::size_t>(j)](slots);
        for (int q = 0; q < n; ++q) r += B[static_cast<std::size_t>(j * n + q)](slots) * lv(q, i);
        worst = std::max(worst, std::fabs(r));
      }
    }
  }
  return worst;
}

enum class IterationStatus { converged, max_iter, diverged, dichotomy_lost };

inline const char* status_name(IterationStatus s) {
  switch (s) {
    case IterationStatus::converged: return "converged";
    case IterationStatus::max_iter: return "max_iter";
    case IterationStatus::diverged: return "diverged";
    case IterationStatus::dichotomy_lost: return "dichotomy_lost";
  }
  return "?";
}

struct IterationOptions {
  double s = 0.0;
  double tol = 1e-8;
  int max_iter = 50;
  bool reuse_monodromy = false;  // keep the iterate-1 spectral certificate
  DichotomyOptions dichotomy{};
};

struct IterationReport {
  int iterates = 0;                 // linear periodic solves performed
  std::vector<double> differences;  // C^1 distance |u^{k+1} - u^k|, k = 0..iterates-1
  std::vector<double> ratios;       // differences[k+1] / differences[k]
  double residual = 0.0;
  SpaceTimeField solution;
  IterationStatus status = IterationStatus::max_iter;
  bool converged = false;
  std::optional<int> failed_iterate;  // 1-based iterate where the dichotomy was lost
  std::vector<std::string> warnings;
  double f_sup = 0.0;              // sup |f| over the grid
  double solution_sup = 0.0;
  std::optional<double> rho;       // last contraction ratio
  std::optional<double> rho_per_f; // rho / f_sup, the measured contraction constant
  double periodicity_defect = 0.0; // |u(s) - u(s+T)|_L2 / |u(s)|_L2 of the final iterate
  MonodromyDecomposition base;     // split of the linearization at u = 0
};

inline IterationReport iterate(const ProblemSpec& spec, const GridSpec& grid, const IterationOptions& opt = {}) {
  validate(spec);
  IterationReport rep;
  const double s = opt.s, T = spec.T;

  const LinearCoeffs base(spec);
  GridSpec fixed = grid;
  fixed.dt = resolve_dt(base, grid, s, s + T);
  const int steps = step_count(T, *fixed.dt);
  const double h = T / steps;

  for (std::size_t k = 0; k <= static_cast<std::size_t>(steps); ++k)
    for (int j = 0; j < spec.n; ++j)
      for (int i = 0; i <= grid.nx; ++i)
        rep.f_sup = std::max(rep.f_sup, std::fabs(base.f(j, static_cast<double>(i) / grid.nx, s + k * h)));

  auto current = std::make_shared<const SpaceTimeField>(SpaceTimeField::zeros(spec.n, grid.nx, s, h, steps + 1, true));
  std::optional<MonodromyDecomposition> certificate;
  int growing = 0;

  for (int it = 1; it <= opt.max_iter; ++it) {
    if (exceeds_delta0(spec, *current))
      rep.warnings.push_back("iterate " + std::to_string(it - 1) + " leaves the delta0 ball used for (H1) sampling");
    const LinearCoeffs coeffs = freeze_coefficients(spec, it == 1 ? nullptr : current);
    PeriodicSolution sol;
    try {
      sol = solve_periodic(coeffs, s, T, fixed, opt.dichotomy, certificate ? &*certificate : nullptr);
    } catch (const NumericalError& e) {
      rep.status = IterationStatus::dichotomy_lost;
      rep.failed_iterate = it;
      rep.warnings.push_back(std::string("iterate ") + std::to_string(it) + ": " + e.what());
      break;
    }
    if (it == 1) {
      rep.base = sol.decomposition;
      if (opt.reuse_monodromy) certificate = sol.decomposition;
    }
    rep.iterates = it;
    rep.periodicity_defect = sol.periodicity_defect;
    const double diff = c1_distance(sol.field, *current);
    rep.differences.push_back(diff);
    if (rep.differences.size() > 1) {
      const double prev = rep.differences[rep.differences.size() - 2];
      const double ratio = prev > 0.0 ? diff / prev : 0.0;
      rep.ratios.push_back(ratio);
      growing = ratio >= 1.0 ? growing + 1 : 0;
    }
    current = std::make_shared<const SpaceTimeField>(std::move(sol.field));
    if (diff < opt.tol) {
      rep.status = IterationStatus::converged;
      break;
    }
    if (growing >= 3) {
      rep.status = IterationStatus::diverged;
      break;
    }
  }
  rep.converged = rep.status == IterationStatus::converged;
  rep.solution = *current;
  rep.solution_sup = rep.solution.sup_norm();
  if (rep.solution.nx() >= 8 && rep.solution.size() >= 8) rep.residual = pde_residual(spec, rep.solution);
  if (!rep.ratios.empty()) {
    // the last ratio can be dominated by round-off once the differences reach
    // the tolerance; report the last one computed from differences above it
    double r = rep.ratios.front();
    for (std::size_t k = 0; k < rep.ratios.size(); ++k)
      if (rep.differences[k + 1] > 1e3 * std::numeric_limits<double>::epsilon() * std::max(rep.solution_sup, 1.0))
        r = rep.ratios[k];
    rep.rho = r;
    if (rep.f_sup > 0.0) rep.rho_per_f = r / rep.f_sup;
  }
  return rep;
}

}  // namespace hypdich
