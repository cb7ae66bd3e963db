#pragma once

// Linear coefficients a(x,t), b(x,t), f(x,t) of the problem
//   u_t + a u_x + b u = f
// obtained from a ProblemSpec by binding the u-slots to zero (the
// linearization at u = 0), to a frozen space-time field, and optionally
// adding scaled perturbations a + eps*a~, b + eps*b~.

#include "hypdich/expr.hpp"
#include "hypdich/grid.hpp"
#include "hypdich/problem.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hypdich {

struct Perturbation {
  std::vector<expr::Ast> a_tilde;  // n entries, or empty for none
  std::vector<expr::Ast> b_tilde;  // n*n entries, or empty for none
  double epsilon = 0.0;
};

class LinearCoeffs {
 public:
  LinearCoeffs() = default;

  explicit LinearCoeffs(const ProblemSpec& spec, std::shared_ptr<const SpaceTimeField> frozen = nullptr,
                        std::optional<Perturbation> perturbation = std::nullopt)
      : n_(spec.n), m_(spec.m), p_(spec.p), period_(spec.T), lambda0_(spec.lambda0_declared), frozen_(std::move(frozen)) {
    validate(spec);
    if (frozen_ && (frozen_->n() != spec.n)) throw ValidationError("frozen field has wrong component count");
    const auto syms = spec.symbols();
    for (int j = 0; j < n_; ++j) {
      a_.push_back(bind(spec.A[j], syms));
      f_.push_back(bind(spec.f[j], syms));
    }
    for (int q = 0; q < n_ * n_; ++q) b_.push_back(bind(spec.B[q], syms));
    if (perturbation && perturbation->epsilon != 0.0) {
      eps_ = perturbation->epsilon;
      auto check_vars = [&](const expr::Ast& e) {
        for (const auto& v : expr::free_vars(e))
          if (std::find(syms.begin(), syms.end(), v) == syms.end())
            throw ValidationError("perturbation references unknown variable '" + v + "'");
      };
      if (!perturbation->a_tilde.empty()) {
        if (perturbation->a_tilde.size() != static_cast<std::size_t>(n_))
          throw ValidationError("a~ must have n entries");
        for (const auto& e : perturbation->a_tilde) {
          check_vars(e);
          a_tilde_.push_back(bind(e, syms));
        }
      }
      if (!perturbation->b_tilde.empty()) {
        if (perturbation->b_tilde.size() != static_cast<std::size_t>(n_ * n_))
          throw ValidationError("b~ must have n*n entries");
        for (const auto& e : perturbation->b_tilde) {
          check_vars(e);
          b_tilde_.push_back(bind(e, syms));
        }
      }
    }
  }

  int n() const { return n_; }
  int m() const { return m_; }
  bool rightward(int j) const { return j < m_; }
  const Eigen::MatrixXd& p() const { return p_; }
  double period() const { return period_; }
  double lambda0() const { return lambda0_; }
  const std::shared_ptr<const SpaceTimeField>& frozen() const { return frozen_; }

  double a(int j, double x, double t) const {
    double v = eval(a_[static_cast<std::size_t>(j)], x, t);
    if (!a_tilde_.empty()) v += eps_ * eval(a_tilde_[static_cast<std::size_t>(j)], x, t);
    return v;
  }
  double b(int j, int k, double x, double t) const {
    const auto q = static_cast<std::size_t>(j * n_ + k);
    double v = eval(b_[q], x, t);
    if (!b_tilde_.empty()) v += eps_ * eval(b_tilde_[q], x, t);
    return v;
  }
  double f(int j, double x, double t) const { return eval(f_[static_cast<std::size_t>(j)], x, t); }

  bool f_is_zero() const {
    for (const auto& e : f_)
      if (!e.expr.is_constant() || e.expr({}) != 0.0) return false;
    return true;
  }

  /// Largest |a_j| over the grid nodes at the given times.
  double max_speed(int nx, std::initializer_list<double> times) const {
    double s = 0.0;
    for (double t : times)
      for (int j = 0; j < n_; ++j)
        for (int i = 0; i <= nx; ++i) s = std::max(s, std::fabs(a(j, static_cast<double>(i) / nx, t)));
    return s;
  }

  /// Largest deviation |c(x, t+T) - c(x, t)| over a sample of points, for
  /// every coefficient a_j and b_jk.
  double periodicity_defect(double s, int samples = 9) const {
    double worst = 0.0;
    for (int it = 0; it < samples; ++it) {
      const double t = s + period_ * it / samples;
      for (int ix = 0; ix < samples; ++ix) {
        const double x = static_cast<double>(ix) / (samples - 1);
        for (int j = 0; j < n_; ++j) {
          worst = std::max(worst, std::fabs(a(j, x, t + period_) - a(j, x, t)));
          for (int k = 0; k < n_; ++k) worst = std::max(worst, std::fabs(b(j, k, x, t + period_) - b(j, k, x, t)));
        }
      }
    }
    return worst;
  }

 private:
  struct Bound {
    expr::BoundExpr expr;
    std::vector<int> u_slots;  // component indices the expression reads
  };

  static Bound bind(const expr::Ast& ast, const std::vector<std::string>& syms) {
    Bound out{expr::BoundExpr(ast, syms), {}};
    for (const auto& v : expr::free_vars(ast))
      if (v[0] == 'u') out.u_slots.push_back(std::stoi(v.substr(1)) - 1);
    return out;
  }

  double eval(const Bound& e, double x, double t) const {
    if (e.expr.is_constant()) return e.expr({});
    constexpr std::size_t small = 18;
    std::array<double, small> buf{};
    std::vector<double> big;
    double* slots = buf.data();
    const auto count = static_cast<std::size_t>(n_ + 2);
    if (count > small) {
      big.assign(count, 0.0);
      slots = big.data();
    }
    slots[0] = x;
    slots[1] = t;
    if (frozen_)
      for (int k : e.u_slots) slots[k + 2] = frozen_->value(k, x, t);
    return e.expr(std::span<const double>(slots, count));
  }

  int n_ = 0;
  int m_ = 0;
  Eigen::MatrixXd p_;
  double period_ = 1.0;
  double lambda0_ = 1.0;
  std::shared_ptr<const SpaceTimeField> frozen_;
  std::vector<Bound> a_, b_, f_, a_tilde_, b_tilde_;
  double eps_ = 0.0;
};

}  // namespace hypdich
