#include "support.hpp"

#include <gtest/gtest.h>

using namespace hypdich;
using namespace testing_support;

namespace {

const double kMidGap = 1.9630371815724122;  // between the first two genuine roots
const double kXi0 = 1.5320921219863797;

ProblemSpec example(double lambda, std::initializer_list<std::string> f = {"0", "0"}) {
  auto s = example21::linear_problem(lambda, 1.0);
  s.f = exprs(f);
  return s;
}

GridSpec grid(int nx, double cfl = 0.9) { return GridSpec{nx, cfl, std::nullopt}; }

double max_abs_diff(const SpaceTimeField& a, const SpaceTimeField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, (a.level(k).values() - b.level(k).values()).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST(Decompose, SyntheticSpectra) {
  const Eigen::MatrixXd M = Eigen::Vector3d(3.0, 0.25, 1.01).asDiagonal();
  const auto d = decompose_monodromy(M, 2.0);
  ASSERT_EQ(d.eigenvalues.size(), 3u);
  EXPECT_EQ(d.eigenvalues[0], std::complex<double>(3.0));
  EXPECT_EQ(d.unstable.size(), 1u);
  EXPECT_EQ(d.stable.size(), 1u);
  EXPECT_EQ(d.ambiguous.size(), 1u);
  EXPECT_FALSE(d.dichotomy);
  EXPECT_FALSE(d.M_hat.has_value());

  const auto e = decompose_monodromy(Eigen::Vector2d(3.0, 0.25).asDiagonal(), 2.0);
  EXPECT_TRUE(e.dichotomy);
  EXPECT_EQ(e.unstable_dim, 1);
  EXPECT_NEAR(e.alpha_hat, std::log(3.0) / 2.0, 1e-14);
  ASSERT_TRUE(e.M_hat.has_value());
  EXPECT_GE(*e.M_hat, 1.0);

  EXPECT_THROW(decompose_monodromy(Eigen::MatrixXd::Zero(2, 3), 1.0), ValidationError);
}

TEST(Monodromy, DecoupledSystemIsNilpotentPastD) {
  const auto spec = decoupled(example_p(), 3.0);
  ASSERT_GT(spec.T, smoothing_time_d(spec));
  const auto d = assemble_monodromy(LinearCoeffs(spec), 0.0, 3.0, grid(40, 1.0));
  EXPECT_LT(d.M.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(d.dichotomy);
  EXPECT_EQ(d.unstable_dim, 0);
  EXPECT_LT(std::abs(d.eigenvalues.front()), 1e-12);
}

TEST(Monodromy, UnstableDimensionFollowsLambda) {
  const auto stable = assemble_monodromy(LinearCoeffs(example(0.0)), 0.0, 1.0, grid(61));
  EXPECT_TRUE(stable.dichotomy);
  EXPECT_EQ(stable.unstable_dim, 0);

  const auto mid = assemble_monodromy(LinearCoeffs(example(kMidGap)), 0.0, 1.0, grid(61));
  EXPECT_TRUE(mid.dichotomy);
  EXPECT_EQ(mid.unstable_dim, 2);
  // closed form: |exp(mu T)| = exp((lambda - xi_0) / 2) for the leading pair
  EXPECT_NEAR(std::abs(mid.eigenvalues[0]), std::exp(0.5 * (kMidGap - kXi0)), 1e-2);
  EXPECT_NEAR(mid.alpha_hat, 0.5 * std::min(kMidGap - kXi0, 2.3939822411584446 - kMidGap), 1e-2);
}

TEST(Monodromy, CourantOneDoublesTheSpectrum) {
  // one cell per step: u1 keeps i - k, u2 keeps i + k, and they couple only at
  // shared nodes, so the two parity classes of i + k evolve independently
  const LinearCoeffs c(example(kMidGap));
  const auto even = assemble_monodromy(c, 0.0, 1.0, grid(40, 1.0));
  const auto odd = assemble_monodromy(c, 0.0, 1.0, grid(41, 1.0));
  EXPECT_EQ(even.unstable_dim, 4);
  EXPECT_EQ(odd.unstable_dim, 4);
  auto nearest = [](const MonodromyDecomposition& d, std::complex<double> z) {
    double best = 1e300;
    for (int k = 1; k < 4; ++k) best = std::min(best, std::abs(d.eigenvalues[static_cast<std::size_t>(k)] - z));
    return best;
  };
  // even Nx: a repeated copy; odd Nx: the period map swaps the classes, so -z appears
  EXPECT_LT(nearest(even, even.eigenvalues[0]), 1e-6);
  EXPECT_LT(nearest(odd, -odd.eigenvalues[0]), 1e-6);
}

TEST(Monodromy, LambdaOnARootIsAmbiguous) {
  const LinearCoeffs c(example(kXi0));
  const auto d = assemble_monodromy(c, 0.0, 1.0, grid(61));
  EXPECT_FALSE(d.dichotomy);
  EXPECT_FALSE(d.ambiguous.empty());
  EXPECT_THROW(solve_periodic(c, 0.0, 1.0, grid(61)), NumericalError);
  EXPECT_THROW(unstable_projector(d), NumericalError);
}

TEST(Monodromy, RejectsNonPeriodicCoefficients) {
  auto spec = example(0.0);
  spec.B[1] = expr::parse("1 + t");
  EXPECT_THROW(assemble_monodromy(LinearCoeffs(spec), 0.0, 1.0, grid(20)), ValidationError);
  EXPECT_THROW(assemble_monodromy(LinearCoeffs(example(0.0)), 0.0, 2.0, grid(20)), ValidationError);
}

TEST(Monodromy, ThreadCountDoesNotChangeTheResult) {
  const LinearCoeffs c(example(kMidGap));
  set_threads(1);
  const auto one = assemble_monodromy(c, 0.0, 1.0, grid(40));
  set_threads(3);
  const auto three = assemble_monodromy(c, 0.0, 1.0, grid(40));
  set_threads(1);
  EXPECT_EQ(one.M, three.M);
  EXPECT_THROW(set_threads(0), ValidationError);
}

TEST(Monodromy, LeadingEigenvaluesStableUnderRefinement) {
  std::vector<std::vector<std::complex<double>>> top;
  for (int nx : {60, 120}) {
    const auto d = assemble_monodromy(LinearCoeffs(example(kMidGap)), 0.0, 1.0, grid(nx));
    top.emplace_back(d.eigenvalues.begin(), d.eigenvalues.begin() + 4);
  }
  for (const auto& z : top[1]) {
    double best = 1e300;
    for (const auto& w : top[0]) best = std::min(best, std::abs(z - w) / std::abs(z));
    EXPECT_LT(best, 0.02) << z;
  }
}

TEST(Projector, IsTheSpectralProjection) {
  const auto d = assemble_monodromy(LinearCoeffs(example(kMidGap)), 0.0, 1.0, grid(40));
  ASSERT_TRUE(d.dichotomy);
  const Eigen::MatrixXd P = unstable_projector(d);
  const double scale = P.norm();
  EXPECT_LT((P * P - P).norm(), 1e-8 * scale);
  EXPECT_LT((P * d.unstable_basis - d.unstable_basis).norm(), 1e-8 * scale);
  EXPECT_LT((d.M * P - P * d.M).norm(), 1e-8 * scale * d.M.norm());
  EXPECT_NEAR(P.trace(), 2.0, 1e-8);

  const auto s = assemble_monodromy(LinearCoeffs(example(0.0)), 0.0, 1.0, grid(40));
  EXPECT_EQ(unstable_projector(s).norm(), 0.0);
}

TEST(Projector, ExponentialBoundsHold) {
  for (double lambda : {0.0, kMidGap}) {
    const auto d = assemble_monodromy(LinearCoeffs(example(lambda)), 0.0, 1.0, grid(40));
    ASSERT_TRUE(d.M_hat.has_value());
    const Eigen::Index N = d.M.rows();
    const Eigen::MatrixXd P = unstable_projector(d);
    const Eigen::MatrixXd Ps = Eigen::MatrixXd::Identity(N, N) - P;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd phi(N);
      for (auto& v : phi) v = g(rng);
      Eigen::VectorXd x = Ps * phi;
      for (int k = 1; k <= 5; ++k) {
        x = d.M * x;
        EXPECT_LE(x.norm(), *d.M_hat * std::exp(-d.alpha_hat * k * d.T) * (Ps * phi).norm() * (1 + 1e-9)) << "k=" << k;
      }
      if (d.unstable_dim == 0) continue;
      // backward on the unstable part: solve M y_{k} = y_{k-1} inside the subspace
      const Eigen::MatrixXd H = d.unstable_basis.transpose() * d.M * d.unstable_basis;
      Eigen::VectorXd c = d.unstable_basis.transpose() * (P * phi);
      const double c0 = c.norm();
      for (int k = 1; k <= 5; ++k) {
        c = H.partialPivLu().solve(c);
        EXPECT_LE(c.norm(), *d.M_hat * std::exp(-d.alpha_hat * k * d.T) * c0 * (1 + 1e-9)) << "k=" << k;
      }
    }
  }
}

TEST(Periodic, ZeroForcingGivesZero) {
  const auto sol = solve_periodic(LinearCoeffs(example(kMidGap)), 0.0, 1.0, grid(40));
  EXPECT_LT(sol.field.sup_norm(), 1e-14);
}

TEST(Periodic, SteadyBenchmark) {
  // u_t + u_x + u = 1, u(0) = 0:  periodic solution u = 1 - exp(-x)
  const auto spec = make_spec(1, 1, {"1"}, {"1"}, {"1"}, Eigen::MatrixXd::Zero(1, 1));
  const auto sol = solve_periodic(LinearCoeffs(spec), 0.0, 1.0, GridSpec{201, 0.9, std::nullopt});
  double err = 0.0;
  for (const auto& l : sol.field.levels())
    for (int i = 0; i <= l.nx(); ++i) err = std::max(err, std::fabs(l(0, i) - (1.0 - std::exp(-l.x(i)))));
  EXPECT_LT(err, 1e-4);
  EXPECT_LT(sol.periodicity_defect, 1e-8);
  EXPECT_TRUE(sol.field.periodic());
}

TEST(Periodic, IsAFixedPointOfThePeriodMap) {
  const auto spec = example(kMidGap, {"sin(6.283185307179586*t)", "x*cos(6.283185307179586*t)"});
  const LinearCoeffs c(spec);
  const auto sol = solve_periodic(c, 0.0, 1.0, grid(60));
  const auto again = solve_ivp(c, sol.field.front(), 0.0, 1.0, sol.field.dt()).back();
  EXPECT_LT(l2_distance(again, sol.field.front()), 1e-9 * sol.field.front().l2_norm());
  EXPECT_LT(sol.periodicity_defect, 1e-9);
  EXPECT_GT(sol.field.sup_norm(), 1e-2);
}

TEST(Periodic, LinearInTheForcing) {
  const std::string f1 = "sin(6.283185307179586*t)", f2 = "x*x";
  const GridSpec g = grid(40);
  const auto u1 = solve_periodic(LinearCoeffs(example(0.0, {f1, "0"})), 0.0, 1.0, g).field;
  const auto u2 = solve_periodic(LinearCoeffs(example(0.0, {"0", f2})), 0.0, 1.0, g).field;
  const auto u3 = solve_periodic(LinearCoeffs(example(0.0, {f1, "2*" + f2})), 0.0, 1.0, g).field;
  SpaceTimeField combo = u1;
  for (std::size_t k = 0; k < combo.size(); ++k) combo.level(k).values() += 2.0 * u2.level(k).values();
  EXPECT_LT(max_abs_diff(combo, u3), 1e-11 * std::max(1.0, u3.sup_norm()));
}

TEST(Robustness, CoefficientShiftMovesLambda) {
  // b~_11 = 1 turns -lambda into -(lambda - eps): the unstable dimension is
  // 2 * #{roots below lambda - eps}
  Perturbation pert;
  pert.b_tilde = exprs({"1", "0", "0", "0"});
  const std::vector<double> eps{0.0, 0.2, -0.2, 1.0, -1.0};
  const auto rep = robustness_scan(example(kMidGap), pert, eps, 0.0, 1.0, grid(40));
  ASSERT_EQ(rep.entries.size(), eps.size());
  EXPECT_EQ(rep.entries[0].unstable_dim, rep.base.unstable_dim);
  EXPECT_EQ(rep.entries[0].alpha_hat, rep.base.alpha_hat);
  for (const auto& e : rep.entries) {
    const auto pred = example21::eigenvalues_mu(kMidGap - e.epsilon, 4);
    EXPECT_TRUE(e.dichotomy) << e.epsilon;
    EXPECT_EQ(e.unstable_dim, pred.predicted_unstable_dim) << e.epsilon;
  }
  ASSERT_TRUE(rep.persistence_threshold.has_value());
  EXPECT_DOUBLE_EQ(*rep.persistence_threshold, 0.2);
}

TEST(Robustness, SmallSpeedPerturbationPersists) {
  Perturbation pert;
  pert.a_tilde = exprs({"0.1*sin(6.283185307179586*t)", "0"});
  const auto rep = robustness_scan(example(kMidGap), pert, {0.0, 0.25, 0.5}, 0.0, 1.0, grid(40));
  for (const auto& e : rep.entries) {
    EXPECT_TRUE(e.dichotomy);
    EXPECT_EQ(e.unstable_dim, 2);
  }
  EXPECT_DOUBLE_EQ(rep.persistence_threshold.value_or(-1.0), 0.5);
}
