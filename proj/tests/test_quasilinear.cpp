#include "support.hpp"

#include <gtest/gtest.h>

using namespace hypdich;
using namespace testing_support;

namespace {

// Quasilinear variant of the reference system: speeds and the damping term
// depend on u, forcing of size amp.
ProblemSpec variant(double amp) {
  const std::string a = std::to_string(amp);
  auto s = make_spec(2, 1, {"1 + 0.5*u1", "-1 + 0.5*u2"}, {"u1", "1", "0", "0"},
                     {a + "*sin(6.283185307179586*t)*(1 + x)", a + "*cos(6.283185307179586*t)"}, example_p());
  s.delta0 = 0.1;
  return s;
}

const GridSpec kGrid{41, 0.9, std::nullopt};

SpaceTimeField sampled(int n, int nx, int levels, double dt, double (*g)(int, double, double)) {
  auto u = SpaceTimeField::zeros(n, nx, 0.0, dt, levels, true);
  for (std::size_t k = 0; k < u.size(); ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= nx; ++i) u.level(k)(j, i) = g(j, u.level(k).x(i), u.level(k).t());
  return u;
}

}  // namespace

TEST(Freeze, CoefficientsSeeTheFrozenState) {
  const auto spec = variant(0.0);
  auto u = SpaceTimeField::zeros(2, 16, 0.0, 0.25, 5, true);
  for (std::size_t k = 0; k < u.size(); ++k)
    for (int i = 0; i <= 16; ++i) {
      u.level(k)(0, i) = 0.5;
      u.level(k)(1, i) = -0.4;
    }
  const auto c = freeze_coefficients(spec, std::make_shared<const SpaceTimeField>(u));
  EXPECT_DOUBLE_EQ(c.a(0, 0.3, 0.6), 1.25);
  EXPECT_DOUBLE_EQ(c.a(1, 0.9, 0.1), -1.2);
  EXPECT_DOUBLE_EQ(c.b(0, 0, 0.5, 0.5), 0.5);
  const auto at_zero = freeze_coefficients(spec, nullptr);
  EXPECT_DOUBLE_EQ(at_zero.a(0, 0.3, 0.6), 1.0);
  EXPECT_DOUBLE_EQ(at_zero.b(0, 0, 0.3, 0.6), 0.0);
  EXPECT_TRUE(exceeds_delta0(spec, u));
}

TEST(C1Distance, MaxOfValueAndDifferenceQuotients) {
  const auto zero = SpaceTimeField::zeros(1, 10, 0.0, 0.1, 11, true);
  const auto lin = sampled(1, 10, 11, 0.1, [](int, double x, double t) { return 0.2 * x + 3.0 * (t - 0.5); });  // sup value 1.7
  EXPECT_NEAR(c1_distance(lin, zero), 3.0, 1e-12);  // d/dt dominates
  const auto flat = sampled(1, 10, 11, 0.1, [](int, double x, double) { return 0.7 - 0.1 * x; });
  EXPECT_NEAR(c1_distance(flat, zero), 0.7, 1e-12);  // the value dominates
  EXPECT_EQ(c1_distance(lin, lin), 0.0);
  EXPECT_THROW(c1_distance(zero, SpaceTimeField::zeros(1, 12, 0.0, 0.1, 11, true)), ValidationError);
}

TEST(PdeResidual, ConsistentOnAnExactSolution) {
  const Manufactured mf;
  std::vector<double> res;
  for (int nx : {20, 40, 80}) {
    const int levels = nx + 1;
    auto u = SpaceTimeField::zeros(2, nx, 0.0, 1.0 / nx, levels, false);
    for (std::size_t k = 0; k < u.size(); ++k) u.level(k) = mf.exact(nx, u.level(k).t());
    res.push_back(pde_residual(mf.spec, u));
  }
  EXPECT_LT(res.back(), 1e-2);
  for (std::size_t k = 1; k < res.size(); ++k) EXPECT_NEAR(res[k - 1] / res[k], 4.0, 0.5);
}

TEST(PdeResidual, ZeroFieldLeavesTheForcing) {
  const auto zero = SpaceTimeField::zeros(2, 20, 0.0, 0.05, 21, true);
  EXPECT_EQ(pde_residual(variant(0.0), zero), 0.0);
  auto s = variant(0.0);
  s.f = exprs({"1 + x", "0"});
  EXPECT_NEAR(pde_residual(s, zero), 1.0 + 19.0 / 20.0, 1e-14);  // interior nodes only
  EXPECT_THROW(pde_residual(s, SpaceTimeField::zeros(2, 4, 0.0, 0.05, 21, true)), ValidationError);
}

TEST(Iterate, ZeroForcingStopsAfterOneSolve) {
  const auto rep = iterate(variant(0.0), kGrid);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterates, 1);
  EXPECT_EQ(rep.solution.sup_norm(), 0.0);
  EXPECT_EQ(rep.f_sup, 0.0);
}

TEST(Iterate, LinearProblemNeedsTwoSolves) {
  auto spec = example21::linear_problem(0.0, 1.0);
  spec.f = exprs({"sin(6.283185307179586*t)", "0.5"});
  const auto rep = iterate(spec, kGrid);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterates, 2);
  EXPECT_LT(rep.differences[1], 1e-12);
  const auto direct = solve_periodic(LinearCoeffs(spec), 0.0, 1.0, GridSpec{41, 0.9, rep.solution.dt()});
  EXPECT_LT(l2_distance(direct.field.front(), rep.solution.front()), 1e-12);
}

TEST(Iterate, ContractsInProportionToTheForcing) {
  const auto big = iterate(variant(0.02), kGrid);
  const auto small = iterate(variant(0.01), kGrid);
  ASSERT_TRUE(big.converged);
  ASSERT_TRUE(small.converged);
  ASSERT_TRUE(big.rho && small.rho);
  EXPECT_LT(*big.rho, 0.5);
  const double ratio = *small.rho / *big.rho;
  EXPECT_GE(ratio, 0.3);
  EXPECT_LE(ratio, 0.7);
  // the solution itself is first order in f
  EXPECT_NEAR(small.solution_sup / big.solution_sup, 0.5, 0.05);
  EXPECT_NEAR(big.f_sup, 0.04, 1e-3);
}

TEST(Iterate, LimitIsAPeriodicFixedPoint) {
  const auto spec = variant(0.02);
  const auto rep = iterate(spec, kGrid);
  ASSERT_TRUE(rep.converged);
  EXPECT_LT(rep.periodicity_defect, 1e-6);
  EXPECT_TRUE(rep.warnings.empty());
  // one more frozen solve reproduces the limit
  const auto c = freeze_coefficients(spec, std::make_shared<const SpaceTimeField>(rep.solution));
  const auto next = solve_periodic(c, 0.0, 1.0, GridSpec{41, 0.9, rep.solution.dt()});
  EXPECT_LT(c1_distance(next.field, rep.solution), 1e-7);
  EXPECT_LT(rep.residual, 5e-3);
}

TEST(Iterate, ReusedCertificateGivesTheSameLimit) {
  IterationOptions opt;
  opt.reuse_monodromy = true;
  const auto a = iterate(variant(0.02), kGrid, opt);
  const auto b = iterate(variant(0.02), kGrid);
  ASSERT_TRUE(a.converged);
  EXPECT_EQ(a.iterates, b.iterates);
  EXPECT_LT(c1_distance(a.solution, b.solution), 1e-9);
}

TEST(Iterate, BaseWithoutDichotomy) {
  auto spec = variant(0.02);
  spec.B[0] = expr::parse("-1.5320921219863797 + u1");  // lambda on the first root
  const auto rep = iterate(spec, kGrid);
  EXPECT_EQ(rep.status, IterationStatus::dichotomy_lost);
  EXPECT_FALSE(rep.converged);
  EXPECT_EQ(rep.failed_iterate.value_or(0), 1);
  EXPECT_EQ(rep.iterates, 0);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(Iterate, IterationCap) {
  IterationOptions opt;
  opt.max_iter = 2;
  opt.tol = 1e-30;
  const auto rep = iterate(variant(0.02), kGrid, opt);
  EXPECT_EQ(rep.status, IterationStatus::max_iter);
  EXPECT_EQ(rep.iterates, 2);
  EXPECT_STREQ(status_name(rep.status), "max_iter");
}

TEST(Iterate, LargeForcingLosesTheDichotomyMidway) {
  // strong u-dependence in the damping: the second frozen system has no
  // numerical dichotomy
  auto spec = variant(0.0);
  spec.B[0] = expr::parse("-1.9630371815724122 + 3*u1");
  spec.f = exprs({"0.4*sin(6.283185307179586*t)*(1 + x)", "0.4*cos(6.283185307179586*t)"});
  const auto rep = iterate(spec, kGrid);
  EXPECT_EQ(rep.status, IterationStatus::dichotomy_lost);
  EXPECT_EQ(rep.failed_iterate.value_or(0), 2);
  EXPECT_EQ(rep.iterates, 1);
  EXPECT_GT(rep.solution.sup_norm(), 0.0);  // the last good iterate is kept
}
