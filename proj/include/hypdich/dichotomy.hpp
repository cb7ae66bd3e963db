#pragma once

// Exponential dichotomy of T-periodic linear problems through the period map
// M = U(s+T, s): M is assembled column by column on the grid, its spectrum is
// split by an annulus around the unit circle, and the unique periodic
// solution of the inhomogeneous problem is obtained from (I - M) u(s) = q.

#include "hypdich/coefficients.hpp"
#include "hypdich/linear_solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace hypdich {

struct GridSpec {
  int nx = 201;
  double cfl = 0.9;
  std::optional<double> dt;  // overrides cfl when set
};

inline double resolve_dt(const LinearCoeffs& c, const GridSpec& g, double s, double t_end) {
  if (g.dt) return *g.dt;
  return default_dt(c, g.nx, s, t_end, g.cfl);
}

struct DichotomyOptions {
  double gap = 0.02;             // relative half-width of the annulus around |z| = 1
  int max_power = 5;             // powers of M used to fit M_hat
  double periodicity_tol = 1e-9;
};

struct MonodromyDecomposition {
  Eigen::MatrixXd M;
  std::vector<std::complex<double>> eigenvalues;  // by decreasing modulus
  std::vector<std::complex<double>> stable, unstable, ambiguous;
  double alpha_hat = 0.0;
  std::optional<double> M_hat;  // fitted only when a dichotomy is declared
  int unstable_dim = 0;
  bool dichotomy = false;
  double gap = 0.02;
  double s = 0.0;
  double T = 1.0;
  int n = 1;
  int nx = 0;
  double dt = 0.0;
  Eigen::MatrixXd unstable_basis;  // orthonormal, spans the unstable invariant subspace
  Eigen::MatrixXd unstable_left;   // orthonormal, spans the left unstable subspace
};

namespace detail {

inline void sort_spectrum(std::vector<std::complex<double>>& ev) {
  std::sort(ev.begin(), ev.end(), [](const std::complex<double>& a, const std::complex<double>& b) {
    const double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma > mb;
    if (a.imag() != b.imag()) return a.imag() > b.imag();
    return a.real() > b.real();
  });
}

// Orthonormal basis of the dominant k-dimensional invariant subspace of A by
// subspace iteration. Converges when |lambda_k| > |lambda_{k+1}|.
inline Eigen::MatrixXd dominant_subspace(const Eigen::MatrixXd& A, int k, std::uint64_t seed) {
  const Eigen::Index N = A.rows();
  if (k == 0) return Eigen::MatrixXd(N, 0);
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd Q(N, k);
  for (Eigen::Index i = 0; i < N; ++i)
    for (int c = 0; c < k; ++c) Q(i, c) = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Q).householderQ() * Eigen::MatrixXd::Identity(N, k);
  const double scale = std::max(A.norm(), 1e-300);
  for (int it = 0; it < 5000; ++it) {
    Eigen::MatrixXd Z = A * Q;
    const Eigen::MatrixXd H = Q.transpose() * Z;
    if ((Z - Q * H).norm() <= 1e-13 * scale && it > 2) break;
    Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Z).householderQ() * Eigen::MatrixXd::Identity(N, k);
  }
  return Q;
}

inline double uniform_pm1(std::mt19937_64& rng) { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; }

}  // namespace detail

/// Spectral split and dichotomy constants for a given period matrix.
inline MonodromyDecomposition decompose_monodromy(Eigen::MatrixXd M, double T, const DichotomyOptions& opt = {}) {
  if (M.rows() != M.cols()) throw ValidationError("period matrix must be square");
  MonodromyDecomposition d;
  d.gap = opt.gap;
  d.T = T;
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on the period matrix");
  const auto& ev = es.eigenvalues();
  d.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  detail::sort_spectrum(d.eigenvalues);

  double alpha = std::numeric_limits<double>::infinity();
  for (const auto& z : d.eigenvalues) {
    const double r = std::abs(z);
    if (r < 1.0 - opt.gap) {
      d.stable.push_back(z);
    } else if (r > 1.0 + opt.gap) {
      d.unstable.push_back(z);
    } else {
      d.ambiguous.push_back(z);
      continue;
    }
    alpha = std::min(alpha, std::fabs(std::log(std::max(r, DBL_MIN))) / T);
  }
  d.alpha_hat = std::isfinite(alpha) ? alpha : 0.0;
  d.unstable_dim = static_cast<int>(d.unstable.size());
  d.dichotomy = d.ambiguous.empty();

  if (d.dichotomy) {
    const int k = d.unstable_dim;
    d.unstable_basis = detail::dominant_subspace(M, k, 0x5eed0001);
    d.unstable_left = detail::dominant_subspace(M.transpose(), k, 0x5eed0002);

    // M_hat: smallest bound with |M^k P_s| <= M_hat e^{-alpha kT} and
    // |M^{-k}|_{unstable}| <= M_hat e^{-alpha kT}, k = 1..max_power, floored at 1
    const Eigen::Index N = M.rows();
    Eigen::MatrixXd Ps = Eigen::MatrixXd::Identity(N, N);
    if (k > 0) {
      const Eigen::MatrixXd C = d.unstable_left.transpose() * d.unstable_basis;
      Ps -= d.unstable_basis * C.partialPivLu().solve(d.unstable_left.transpose());
    }
    double mhat = 1.0;
    Eigen::MatrixXd Mk = Ps;
    Eigen::MatrixXd H, Hinv, Hk;
    if (k > 0) {
      H = d.unstable_basis.transpose() * M * d.unstable_basis;
      Hinv = H.inverse();
      Hk = Eigen::MatrixXd::Identity(k, k);
    }
    for (int p = 1; p <= opt.max_power; ++p) {
      Mk = M * Mk;
      const double growth = std::exp(d.alpha_hat * p * T);
      mhat = std::max(mhat, Eigen::BDCSVD<Eigen::MatrixXd>(Mk).singularValues()(0) * growth);
      if (k > 0) {
        Hk = Hinv * Hk;
        mhat = std::max(mhat, Eigen::JacobiSVD<Eigen::MatrixXd>(Hk).singularValues()(0) * growth);
      }
    }
    d.M_hat = mhat;
  }
  d.M = std::move(M);
  return d;
}

/// Assembles U(s+T, s) on the grid by propagating the identity, then splits
/// its spectrum. An ambiguous spectrum is reported through `dichotomy`.
inline MonodromyDecomposition assemble_monodromy(const LinearCoeffs& c, double s, double T, const GridSpec& grid,
                                                 const DichotomyOptions& opt = {}) {
  if (!(T > 0.0)) throw ValidationError("period must be positive");
  if (std::fabs(c.period() - T) > 1e-12 * std::max(1.0, T))
    throw ValidationError("monodromy period differs from the coefficient period");
  const double defect = c.periodicity_defect(s);
  if (defect > opt.periodicity_tol) throw ValidationError("coefficients are not T-periodic (defect " + std::to_string(defect) + ")");
  const double dt = resolve_dt(c, grid, s, s + T);
  const Propagator prop(c, grid.nx, s, s + T, dt);
  const int N = c.n() * (grid.nx + 1);
  Batch M = prop.propagate(Batch::Identity(N, N), false);
  auto d = decompose_monodromy(Eigen::MatrixXd(M), T, opt);
  d.s = s;
  d.n = c.n();
  d.nx = grid.nx;
  d.dt = prop.dt();
  return d;
}

/// Projector onto the unstable subspace along the stable one.
inline Eigen::MatrixXd unstable_projector(const MonodromyDecomposition& d) {
  const Eigen::Index N = d.M.rows();
  if (!d.dichotomy) throw NumericalError("no dichotomy: spectral projector is undefined");
  if (d.unstable_dim == 0) return Eigen::MatrixXd::Zero(N, N);
  const Eigen::MatrixXd C = d.unstable_left.transpose() * d.unstable_basis;
  return d.unstable_basis * C.partialPivLu().solve(d.unstable_left.transpose());
}

struct PeriodicSolution {
  SpaceTimeField field;
  MonodromyDecomposition decomposition;
  double periodicity_defect = 0.0;  // |u(s) - u(s+T)|_L2 / max(|u|, tiny)
};

/// The unique T-periodic solution of the inhomogeneous problem, given the
/// period map has no spectrum in the annulus. With `certificate` supplied
/// the spectral split is not recomputed.
inline PeriodicSolution solve_periodic(const LinearCoeffs& c, double s, double T, const GridSpec& grid,
                                       const DichotomyOptions& opt = {},
                                       const MonodromyDecomposition* certificate = nullptr) {
  if (std::fabs(c.period() - T) > 1e-12 * std::max(1.0, T))
    throw ValidationError("period differs from the coefficient period");
  const double defect = c.periodicity_defect(s);
  if (defect > opt.periodicity_tol) throw ValidationError("coefficients are not T-periodic (defect " + std::to_string(defect) + ")");
  const double dt = resolve_dt(c, grid, s, s + T);
  const Propagator prop(c, grid.nx, s, s + T, dt);
  const int N = c.n() * (grid.nx + 1);

  PeriodicSolution out;
  Eigen::MatrixXd M = prop.propagate(Batch::Identity(N, N), false);
  if (certificate) {
    out.decomposition = *certificate;
    out.decomposition.M = M;
  } else {
    out.decomposition = decompose_monodromy(M, T, opt);
  }
  out.decomposition.s = s;
  out.decomposition.n = c.n();
  out.decomposition.nx = grid.nx;
  out.decomposition.dt = prop.dt();
  if (!out.decomposition.dichotomy)
    throw NumericalError("no numerical dichotomy at this resolution: period map has spectrum near the unit circle");

  const Eigen::VectorXd q = prop.propagate(Batch::Zero(N, 1), true).col(0);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(N, N) - M);
  if (lu.rcond() < 1e-12) throw NumericalError("I - M is numerically singular (dichotomy margin too small)");
  const Eigen::VectorXd u0 = lu.solve(q);

  out.field = prop.trajectory(GridFunction(c.n(), grid.nx, s, u0), true);
  out.field.set_periodic(true);
  const double scale = std::max(out.field.front().l2_norm(), 1e-300);
  out.periodicity_defect = l2_distance(out.field.front(), out.field.back()) / scale;
  return out;
}

inline SpaceTimeField solve_periodic_linear(const LinearCoeffs& c, double s, double T, const GridSpec& grid,
                                            const DichotomyOptions& opt = {}) {
  return solve_periodic(c, s, T, grid, opt).field;
}

struct RobustnessEntry {
  double epsilon = 0.0;
  double alpha_hat = 0.0;
  std::optional<double> M_hat;
  bool dichotomy = false;
  int unstable_dim = 0;
};

struct RobustnessReport {
  MonodromyDecomposition base;
  std::vector<RobustnessEntry> entries;  // in the order of the tested epsilons
  std::optional<double> persistence_threshold;  // largest |eps| up to which every tested eps persisted
};

/// Recomputes the split for a + eps*a~, b + eps*b~ at each eps.
inline RobustnessReport robustness_scan(const ProblemSpec& spec, Perturbation perturbation,
                                        const std::vector<double>& epsilons, double s, double T,
                                        const GridSpec& grid, const DichotomyOptions& opt = {}) {
  RobustnessReport rep;
  rep.base = assemble_monodromy(LinearCoeffs(spec), s, T, grid, opt);
  if (!rep.base.dichotomy) throw NumericalError("base system has no numerical dichotomy");
  for (double eps : epsilons) {
    perturbation.epsilon = eps;
    const auto d = assemble_monodromy(LinearCoeffs(spec, nullptr, perturbation), s, T, grid, opt);
    rep.entries.push_back({eps, d.alpha_hat, d.M_hat, d.dichotomy, d.unstable_dim});
  }
  std::vector<RobustnessEntry> sorted = rep.entries;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RobustnessEntry& a, const RobustnessEntry& b) { return std::fabs(a.epsilon) < std::fabs(b.epsilon); });
  for (const auto& e : sorted) {
    if (!e.dichotomy || e.unstable_dim != rep.base.unstable_dim) break;
    rep.persistence_threshold = std::fabs(e.epsilon);
  }
  return rep;
}

}  // namespace hypdich
