#pragma once

// Closed-form spectrum of the 2x2 reference system
//   u1_t + u1_x = lambda u1 - u2,   u2_t - u2_x = 0,
//   u1(0,t) = 0,  u2(1,t) = u1(1,t).
// With z = lambda - 2 mu = xi + i eta the eigenvalue condition is
// e^z = 1 - z, i.e. eta = sqrt(e^{2 xi} - (1 - xi)^2) together with
//   sin eta = -sqrt(1 - e^{-2 xi} (1 - xi)^2)      (imaginary part)
//   cos eta = (1 - xi) e^{-xi}                       (real part).
// The scan looks for sign changes of the imaginary-part residual and keeps
// the roots that also satisfy the real part.

#include "hypdich/dichotomy.hpp"
#include "hypdich/problem.hpp"

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

namespace hypdich::example21 {

inline double eta_of(double xi) {
  const double rad = std::exp(2.0 * xi) - (1.0 - xi) * (1.0 - xi);
  if (rad < 0.0) throw ValidationError("negative radicand in the characteristic equation");
  return std::sqrt(rad);
}

/// sin(sqrt(e^{2xi} - (1-xi)^2)) + sqrt(1 - e^{-2xi}(1-xi)^2), xi >= 0.
inline double chareq_residual(double xi) {
  if (xi < 0.0) throw ValidationError("characteristic residual needs xi >= 0");
  const double rad2 = 1.0 - std::exp(-2.0 * xi) * (1.0 - xi) * (1.0 - xi);
  if (rad2 < 0.0) throw ValidationError("negative radicand in the characteristic equation");
  return std::sin(eta_of(xi)) + std::sqrt(rad2);
}

/// Whether a root of the residual also solves the real part of e^z = 1 - z.
inline bool satisfies_real_part(double xi) { return std::cos(eta_of(xi)) * (1.0 - xi) > 0.0; }

/// First `count` positive roots of the characteristic equation, increasing.
/// The scan step shrinks where consecutive sign changes crowd together.
inline std::vector<double> find_xi_roots(int count, double scan_step = 1e-3, double horizon_cap = 7.0) {
  if (count < 1) throw ValidationError("count must be >= 1");
  if (!(scan_step > 0.0)) throw ValidationError("scan_step must be positive");
  std::vector<double> roots;
  double a = scan_step;
  double ra = chareq_residual(a);
  while (static_cast<int>(roots.size()) < count) {
    if (a >= horizon_cap)
      throw NumericalError("only " + std::to_string(roots.size()) + " roots found below xi = " + std::to_string(horizon_cap));
    // genuine and spurious roots pair up at distance ~ (xi-1)^2 e^{-2 xi}
    double h = scan_step;
    if (a > 1.5) h = std::clamp(0.1 * (a - 1.0) * (a - 1.0) * std::exp(-2.0 * a), 1e-10, scan_step);
    const double b = a + h;
    const double rb = chareq_residual(b);
    if (std::isfinite(ra) && std::isfinite(rb) && ((ra < 0.0) != (rb < 0.0))) {
      double lo = a, hi = b, rlo = ra;
      while (hi - lo > 1e-12 * std::max(1.0, lo)) {
        const double mid = 0.5 * (lo + hi);
        const double rm = chareq_residual(mid);
        if ((rm < 0.0) == (rlo < 0.0)) {
          lo = mid;
          rlo = rm;
        } else {
          hi = mid;
        }
        if (mid == lo && mid == hi) break;
      }
      const double root = 0.5 * (lo + hi);
      if (satisfies_real_part(root)) roots.push_back(root);
    }
    a = b;
    ra = rb;
  }
  return roots;
}

struct SpectralPrediction {
  std::vector<double> xi_roots;
  double lambda = 0.0;
  std::vector<std::pair<std::complex<double>, std::complex<double>>> mu_pairs;  // (mu^+, mu^-)
  int unstable_root_count = 0;     // #{j : xi_j < lambda}
  int predicted_unstable_dim = 0;  // eigenvalues with Re mu > 0, two per root
  double gap_margin = 0.0;         // min_j |lambda - xi_j|
};

/// mu_j^{+-} = (lambda - xi_j +- i eta_j) / 2 for the first `count` roots,
/// extended until a root exceeds lambda.
inline SpectralPrediction eigenvalues_mu(double lambda, int count) {
  SpectralPrediction out;
  out.lambda = lambda;
  int want = count;
  for (;;) {
    out.xi_roots = find_xi_roots(want);
    if (out.xi_roots.back() > lambda) break;
    want += count;
  }
  out.xi_roots.resize(std::max<std::size_t>(static_cast<std::size_t>(count),
                                            static_cast<std::size_t>(std::upper_bound(out.xi_roots.begin(), out.xi_roots.end(), lambda) -
                                                                     out.xi_roots.begin()) + 1));
  out.gap_margin = std::numeric_limits<double>::infinity();
  for (double xi : out.xi_roots) {
    if (std::fabs(lambda - xi) < 1e-10)
      throw NumericalError("lambda coincides with a root of the characteristic equation: no dichotomy");
    const double eta = eta_of(xi);
    out.mu_pairs.emplace_back(std::complex<double>(0.5 * (lambda - xi), 0.5 * eta),
                              std::complex<double>(0.5 * (lambda - xi), -0.5 * eta));
    if (xi < lambda) ++out.unstable_root_count;
    out.gap_margin = std::min(out.gap_margin, std::fabs(lambda - xi));
  }
  out.predicted_unstable_dim = 2 * out.unstable_root_count;
  return out;
}

/// The reference system as a ProblemSpec (B = [[-lambda, 1], [0, 0]]).
inline ProblemSpec linear_problem(double lambda, double T = 1.0) {
  ProblemSpec s;
  s.n = 2;
  s.m = 1;
  s.A = {expr::Ast::constant(1.0), expr::Ast::constant(-1.0)};
  s.B = {expr::Ast::constant(-lambda), expr::Ast::constant(1.0), expr::Ast::constant(0.0), expr::Ast::constant(0.0)};
  s.f = {expr::Ast::constant(0.0), expr::Ast::constant(0.0)};
  s.p = Eigen::MatrixXd::Zero(2, 2);
  s.p(1, 0) = 1.0;
  s.T = T;
  s.delta0 = 0.1;
  s.lambda0_declared = 1.0;
  return s;
}

struct CrosscheckReport {
  SpectralPrediction prediction;
  std::vector<std::complex<double>> predicted;  // exp(mu T), K largest
  std::vector<std::complex<double>> computed;   // K largest period-map eigenvalues
  double max_relative_mismatch = 0.0;
  int monodromy_unstable_dim = 0;
  bool dichotomy = false;
  double alpha_hat = 0.0;
  std::optional<double> M_hat;
};

inline CrosscheckReport crosscheck_monodromy(double lambda, double T, const GridSpec& grid, int K = 4,
                                             const DichotomyOptions& opt = {}) {
  CrosscheckReport rep;
  rep.prediction = eigenvalues_mu(lambda, std::max(K, 4));
  const auto d = assemble_monodromy(LinearCoeffs(linear_problem(lambda, T)), 0.0, T, grid, opt);
  for (const auto& [plus, minus] : rep.prediction.mu_pairs) {
    rep.predicted.push_back(std::exp(plus * T));
    rep.predicted.push_back(std::exp(minus * T));
  }
  detail::sort_spectrum(rep.predicted);
  rep.predicted.resize(static_cast<std::size_t>(K));
  rep.computed.assign(d.eigenvalues.begin(), d.eigenvalues.begin() + std::min<std::ptrdiff_t>(K, static_cast<std::ptrdiff_t>(d.eigenvalues.size())));
  for (const auto& p : rep.predicted) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : rep.computed) best = std::min(best, std::abs(c - p) / std::abs(p));
    rep.max_relative_mismatch = std::max(rep.max_relative_mismatch, best);
  }
  rep.monodromy_unstable_dim = d.unstable_dim;
  rep.dichotomy = d.dichotomy;
  rep.alpha_hat = d.alpha_hat;
  rep.M_hat = d.M_hat;
  return rep;
}

}  // namespace hypdich::example21
