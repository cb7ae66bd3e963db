#pragma once

// Problem description u_t + A(x,t,u) u_x + B(x,t,u) u = f(x,t) on (0,1) with
// reflection boundary conditions, plus the hyperbolicity and smoothing checks.

#include "hypdich/expr.hpp"
#include "hypdich/grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace hypdich {

struct ProblemSpec {
  int n = 1;
  int m = 0;                     // components 0..m-1 move right, m..n-1 move left
  std::vector<expr::Ast> A;      // n diagonal speeds
  std::vector<expr::Ast> B;      // n*n, row-major
  std::vector<expr::Ast> f;      // n, may not reference u
  Eigen::MatrixXd p;             // n x n reflection coefficients
  double T = 1.0;
  double delta0 = 0.1;
  double lambda0_declared = 1.0;

  const expr::Ast& b(int j, int k) const { return B[static_cast<std::size_t>(j * n + k)]; }

  /// x, t, u1..un in slot order.
  std::vector<std::string> symbols() const {
    std::vector<std::string> s{"x", "t"};
    for (int j = 1; j <= n; ++j) s.push_back("u" + std::to_string(j));
    return s;
  }

  bool rightward(int j) const { return j < m; }
};

/// Throws ValidationError unless the spec's structural invariants hold.
inline void validate(const ProblemSpec& spec) {
  if (spec.n < 1) throw ValidationError("n must be positive");
  if (spec.m < 0 || spec.m > spec.n) throw ValidationError("m must satisfy 0 <= m <= n");
  const auto n = static_cast<std::size_t>(spec.n);
  if (spec.A.size() != n) throw ValidationError("A must have n entries");
  if (spec.B.size() != n * n) throw ValidationError("B must have n*n entries");
  if (spec.f.size() != n) throw ValidationError("f must have n entries");
  if (spec.p.rows() != spec.n || spec.p.cols() != spec.n) throw ValidationError("p must be n x n");
  if (!spec.p.allFinite()) throw ValidationError("p must be finite");
  if (!(spec.T > 0.0)) throw ValidationError("T must be positive");
  if (!(spec.delta0 > 0.0)) throw ValidationError("delta0 must be positive");
  if (!(spec.lambda0_declared > 0.0)) throw ValidationError("Lambda0 must be positive");

  const auto syms = spec.symbols();
  auto check = [&](const expr::Ast& e, const std::string& what, bool allow_u) {
    for (const auto& v : expr::free_vars(e)) {
      const bool known = std::find(syms.begin(), syms.end(), v) != syms.end();
      const bool is_u = v != "x" && v != "t";
      if (!known) throw ValidationError(what + " references unknown variable '" + v + "'");
      if (is_u && !allow_u) throw ValidationError(what + " may not reference '" + v + "'");
    }
  };
  for (int j = 0; j < spec.n; ++j) {
    check(spec.A[j], "A" + std::to_string(j + 1), true);
    check(spec.f[j], "f" + std::to_string(j + 1), false);
    for (int k = 0; k < spec.n; ++k)
      check(spec.b(j, k), "B" + std::to_string(j + 1) + std::to_string(k + 1), true);
  }
}

struct H1Violation {
  int condition;  // 1: A_j >= L0 for j<=m, 2: A_j <= -L0 for j>m, 3: |A_j - A_k| >= L0
  int j;
  int k;          // second family for condition 3, else -1
  double x;
  double t;
  std::vector<double> v;
  double margin;
};

struct HyperbolicityReport {
  double lambda0_measured = std::numeric_limits<double>::infinity();
  std::vector<H1Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Samples the three speed-separation margins on a tensor grid over
/// [0,1] x [0,T] x [-delta0, delta0]^n. Only the u-coordinates that some A_j
/// actually depends on are sampled.
inline HyperbolicityReport validate_h1(const ProblemSpec& spec, int samples_per_axis) {
  if (samples_per_axis < 2) throw ValidationError("samples_per_axis must be >= 2");
  const int n = spec.n;
  const auto syms = spec.symbols();
  std::vector<expr::BoundExpr> speeds;
  std::vector<int> used_u;
  {
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int j = 0; j < n; ++j) {
      speeds.emplace_back(spec.A[j], syms);
      for (const auto& v : expr::free_vars(spec.A[j]))
        if (v[0] == 'u') used[static_cast<std::size_t>(std::stoi(v.substr(1)) - 1)] = true;
    }
    for (int j = 0; j < n; ++j)
      if (used[static_cast<std::size_t>(j)]) used_u.push_back(j);
  }

  const int s = samples_per_axis;
  auto axis = [s](double lo, double hi, int i) { return lo + (hi - lo) * static_cast<double>(i) / (s - 1); };
  HyperbolicityReport rep;
  std::vector<double> slots(static_cast<std::size_t>(n + 2), 0.0);
  std::vector<double> a(static_cast<std::size_t>(n));
  std::vector<int> idx(used_u.size(), 0);

  auto record = [&](int cond, int j, int k, double margin) {
    rep.lambda0_measured = std::min(rep.lambda0_measured, margin);
    if (margin <= 0.0)
      rep.violations.push_back({cond, j, k, slots[0], slots[1], std::vector<double>(slots.begin() + 2, slots.end()), margin});
  };

  for (int ix = 0; ix < s; ++ix) {
    slots[0] = axis(0.0, 1.0, ix);
    for (int it = 0; it < s; ++it) {
      slots[1] = axis(0.0, spec.T, it);
      std::fill(idx.begin(), idx.end(), 0);
      for (;;) {
        for (std::size_t q = 0; q < used_u.size(); ++q)
          slots[static_cast<std::size_t>(used_u[q] + 2)] = axis(-spec.delta0, spec.delta0, idx[q]);
        for (int j = 0; j < n; ++j) {
          try {
            a[static_cast<std::size_t>(j)] = speeds[static_cast<std::size_t>(j)](slots);
          } catch (const expr::EvalError& e) {
            throw ValidationError("A" + std::to_string(j + 1) + " at x=" + std::to_string(slots[0]) +
                                  ", t=" + std::to_string(slots[1]) + ": " + e.what());
          }
        }
        for (int j = 0; j < n; ++j) {
          const double aj = a[static_cast<std::size_t>(j)];
          if (spec.rightward(j))
            record(1, j, -1, aj);
          else
            record(2, j, -1, -aj);
          for (int k = j + 1; k < n; ++k) record(3, j, k, std::fabs(aj - a[static_cast<std::size_t>(k)]));
        }
        std::size_t q = 0;
        while (q < idx.size() && ++idx[q] == s) idx[q++] = 0;
        if (q == idx.size()) break;
      }
    }
  }
  return rep;
}

/// True iff p_{i1 i2} p_{i2 i3} ... p_{in i(n+1)} == 0 for every (n+1)-tuple.
/// Depth-first over tuples; a branch is dropped once its running product is 0,
/// which cannot change the outcome.
inline bool check_h3_combinatorial(const Eigen::MatrixXd& p, int n) {
  if (n > 8) throw ValidationError("combinatorial (H3) check is limited to n <= 8");
  if (p.rows() != n || p.cols() != n) throw ValidationError("p must be n x n");
  struct Walker {
    const Eigen::MatrixXd& p;
    int n;
    bool nonzero_found = false;
    void go(int last, int depth, double prod) {
      if (nonzero_found) return;
      if (depth == n) {
        nonzero_found = prod != 0.0;
        return;
      }
      for (int next = 0; next < n && !nonzero_found; ++next) {
        const double q = prod * p(last, next);
        if (q != 0.0) go(next, depth + 1, q);
      }
    }
  } w{p, n};
  for (int i = 0; i < n && !w.nonzero_found; ++i) w.go(i, 0, 1.0);
  return !w.nonzero_found;
}

/// tr(W + W^2 + ... + W^n) == 0 with W = |p|, absolute tolerance 1e-12.
inline bool check_h3_trace(const Eigen::MatrixXd& p, int n) {
  if (p.rows() != n || p.cols() != n) throw ValidationError("p must be n x n");
  const Eigen::MatrixXd w = p.cwiseAbs();
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  double sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    power = power * w;
    sum += power.trace();
  }
  return std::fabs(sum) <= 1e-12;
}

}  // namespace hypdich
