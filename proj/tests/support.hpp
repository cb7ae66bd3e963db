#pragma once

// Shared builders and oracles for the test suites.

#include "hypdich/hypdich.hpp"

#include <cmath>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

using hypdich::ProblemSpec;

inline std::vector<hypdich::expr::Ast> exprs(std::initializer_list<std::string> src) {
  std::vector<hypdich::expr::Ast> out;
  for (const auto& s : src) out.push_back(hypdich::expr::parse(s));
  return out;
}

inline ProblemSpec make_spec(int n, int m, std::initializer_list<std::string> A, std::initializer_list<std::string> B,
                             std::initializer_list<std::string> f, const Eigen::MatrixXd& p, double T = 1.0) {
  ProblemSpec s;
  s.n = n;
  s.m = m;
  s.A = exprs(A);
  s.B = exprs(B);
  s.f = exprs(f);
  s.p = p;
  s.T = T;
  return s;
}

inline Eigen::MatrixXd mat(int n, std::initializer_list<double> rowmajor) {
  Eigen::MatrixXd p(n, n);
  auto it = rowmajor.begin();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) p(r, c) = *it++;
  return p;
}

// Example 2.1 boundary matrix: u1(0) = 0, u2(1) = u1(1).
inline Eigen::MatrixXd example_p() { return mat(2, {0, 0, 1, 0}); }
inline Eigen::MatrixXd cyclic_p() { return mat(2, {0, 1, 1, 0}); }

inline ProblemSpec decoupled(const Eigen::MatrixXd& p, double T = 1.0) {
  return make_spec(2, 1, {"1", "-1"}, {"0", "0", "0", "0"}, {"0", "0"}, p, T);
}

/// Smooth random state: a few random Fourier modes per component.
inline hypdich::GridFunction random_smooth(int n, int nx, std::uint64_t seed, double t = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(static_cast<std::size_t>(n * 8));
  for (auto& v : c) v = u(rng);
  return hypdich::GridFunction::sample(n, nx, t, [&](int j, double x) {
    double v = 0.0;
    for (int k = 0; k < 4; ++k) {
      v += c[static_cast<std::size_t>(j * 8 + 2 * k)] * std::cos(k * M_PI * x) / (1 + k);
      v += c[static_cast<std::size_t>(j * 8 + 2 * k + 1)] * std::sin((k + 1) * M_PI * x) / (1 + k);
    }
    return v;
  });
}

/// Bounded random nodal values (discontinuous at every node).
inline hypdich::GridFunction random_rough(int n, int nx, std::uint64_t seed, double t = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return hypdich::GridFunction::sample(n, nx, t, [&](int, double) { return u(rng); });
}

inline hypdich::GridFunction step_data(int n, int nx, double t = 0.0) {
  return hypdich::GridFunction::sample(n, nx, t, [](int j, double x) { return x < 0.5 ? 1.0 + j : -0.5; });
}

/// Manufactured problem: n = 2, coupled constant B, variable speeds, p = 0,
///   u1* = sin(pi x) cos t,  u2* = sin(pi x) sin(t + 1),
/// with f := u*_t + a u*_x + B u*. Both components vanish on both edges, so
/// the homogeneous inflow data are exact.
struct Manufactured {
  ProblemSpec spec;
  static double u1(double x, double t) { return std::sin(M_PI * x) * std::cos(t); }
  static double u2(double x, double t) { return std::sin(M_PI * x) * std::sin(t + 1.0); }

  Manufactured() {
    const std::string a1 = "(1 + 0.3*sin(x + t))", a2 = "(-1 - 0.2*cos(t))";
    const std::string s = "sin(3.141592653589793*x)", c = "3.141592653589793*cos(3.141592653589793*x)";
    const std::string f1 = "-" + s + "*sin(t) + " + a1 + "*" + c + "*cos(t) + 0.5*" + s + "*cos(t) + 1*" + s + "*sin(t + 1)";
    const std::string f2 = s + "*cos(t + 1) + " + a2 + "*" + c + "*sin(t + 1) + 0.2*" + s + "*cos(t) + 0.1*" + s + "*sin(t + 1)";
    spec = make_spec(2, 1, {a1, a2}, {"0.5", "1", "0.2", "0.1"}, {f1, f2}, Eigen::MatrixXd::Zero(2, 2), 1.0);
  }

  hypdich::GridFunction exact(int nx, double t) const {
    return hypdich::GridFunction::sample(2, nx, t, [t](int j, double x) { return j == 0 ? u1(x, t) : u2(x, t); });
  }
};

}  // namespace testing_support
