#pragma once

// Semi-Lagrangian solver for the linear problem
//   u_t + a(x,t) u_x + b(x,t) u = f(x,t),  x in (0,1),
// with reflection boundary conditions
//   u_j(0,t) = (Ru)_j(t), j < m;   u_j(1,t) = (Ru)_j(t), j >= m,
//   (Ru)_j   = sum_{k>=m} p_jk u_k(0,t) + sum_{k<m} p_jk u_k(1,t).
//
// One step t -> t+dt traces every characteristic back over [t, t+dt]. Along
// the characteristic
//   d/dtau u_j = -b_jj u_j + g_j,   g_j = f_j - sum_{k!=j} b_jk u_k,
// so u_j(anchor) = E u_j(foot) + int E(tau) g_j dtau with E the integrating
// factor. The integral is a trapezoid with an Euler predictor for the anchor
// values (Heun). Feet are interpolated with 4-point Lagrange cubics.
//
// A step is affine in the state, so it is stored as a StepPlan and applied to
// a whole batch of states at once (monodromy columns).

#include "hypdich/coefficients.hpp"
#include "hypdich/grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <vector>

namespace hypdich {

using Batch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Number of uniform steps of size <= dt covering span.
inline int step_count(double span, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (span <= 0.0) return 0;
  return std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
}

/// cfl * dx / sup|a_j|, the sup sampled at the grid nodes over [s, t_end].
inline double default_dt(const LinearCoeffs& c, int nx, double s, double t_end, double cfl = 0.9) {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ValidationError("CFL factor must lie in (0, 1]");
  double vmax = 0.0;
  const int samples = 64;
  for (int k = 0; k <= samples; ++k) {
    const double t = s + (t_end - s) * k / samples;
    vmax = std::max(vmax, c.max_speed(nx, {t}));
  }
  if (!(vmax > 0.0)) throw NumericalError("all speeds vanish");
  return cfl / (nx * vmax);
}

class StepPlan {
 public:
  StepPlan(const LinearCoeffs& c, int nx, double t, double dt) : n_(c.n()), m_(c.m()), nx_(nx), t_(t), dt_(dt) {
    if (nx < 3) throw ValidationError("solver needs Nx >= 3");
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    p_ = c.p();
    const double vmax = c.max_speed(nx, {t, t + 0.5 * dt, t + dt});
    if (dt * vmax * nx > 1.0 + 1e-9)
      throw NumericalError("CFL limit violated: dt=" + std::to_string(dt) + " exceeds dx/sup|a|=" +
                           std::to_string(1.0 / (nx * vmax)));

    const int rows = n_ * (nx + 1);
    entries_.resize(static_cast<std::size_t>(rows));
    b_near_.assign(static_cast<std::size_t>(rows * n_), 0.0);
    b_anchor_.assign(static_cast<std::size_t>(rows * n_), 0.0);

    const double t1 = t + dt;
    for (int j = 0; j < n_; ++j) {
      const bool right = c.rightward(j);
      const int inflow_node = right ? 0 : nx;
      auto speed = [&](double xi, double tau) {
        const double a = c.a(j, std::clamp(xi, 0.0, 1.0), tau);
        if ((right && !(a > 0.0)) || (!right && !(a < 0.0)))
          throw NumericalError("speed of family " + std::to_string(j + 1) + " has the wrong sign");
        return a;
      };
      for (int i = 0; i <= nx; ++i) {
        const int r = j * (nx + 1) + i;
        Entry& e = entries_[static_cast<std::size_t>(r)];
        e.node = i;
        if (i == inflow_node) {
          e.kind = Entry::boundary;
          continue;
        }
        const double x = static_cast<double>(i) / nx;
        for (int k = 0; k < n_; ++k)
          if (k != j) b_anchor_[static_cast<std::size_t>(r * n_ + k)] = c.b(j, k, x, t1);
        e.f_anchor = c.f(j, x, t1);

        // back-trace in tau: two RK4 half steps of dxi/dtau = a
        const double h = -0.5 * dt;
        auto rk4 = [&](double xi, double tau) {
          const double k1 = speed(xi, tau);
          const double k2 = speed(xi + 0.5 * h * k1, tau + 0.5 * h);
          const double k3 = speed(xi + 0.5 * h * k2, tau + 0.5 * h);
          const double k4 = speed(xi + h * k3, tau + h);
          return xi + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        };
        const double x_mid = rk4(x, t1);
        double x_foot = rk4(x_mid, t1 + h);
        if (x_foot < 0.0 && x_foot > -1e-13) x_foot = 0.0;
        if (x_foot > 1.0 && x_foot < 1.0 + 1e-13) x_foot = 1.0;

        if (x_foot >= 0.0 && x_foot <= 1.0) {
          e.kind = Entry::interior;
          const double s = x_foot * nx;
          const int base = std::clamp(static_cast<int>(std::floor(s)) - 1, 0, nx - 3);
          e.base = base;
          lagrange_weights(s - base, e.w);
          const double b0 = c.b(j, j, x_foot, t);
          const double bm = c.b(j, j, x_mid, t + 0.5 * dt);
          const double b1 = c.b(j, j, x, t1);
          e.factor = std::exp(-dt * (b0 + 4.0 * bm + b1) / 6.0);
          for (int k = 0; k < n_; ++k)
            if (k != j) b_near_[static_cast<std::size_t>(r * n_ + k)] = c.b(j, k, x_foot, t);
          e.f_near = c.f(j, x_foot, t);
          e.span = dt;
        } else {
          // leaves through the inflow boundary inside the step: re-trace in xi
          e.kind = Entry::exit;
          const double xb = right ? 0.0 : 1.0;
          const double hx = 0.5 * (xb - x);
          auto inv = [&](double xi, double tau) { return 1.0 / speed(xi, tau); };
          auto rk4x = [&](double xi, double tau) {
            const double k1 = inv(xi, tau);
            const double k2 = inv(xi + 0.5 * hx, tau + 0.5 * hx * k1);
            const double k3 = inv(xi + 0.5 * hx, tau + 0.5 * hx * k2);
            const double k4 = inv(xi + hx, tau + hx * k3);
            return tau + hx * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
          };
          const double tau_mid = rk4x(x, t1);
          double tau_b = rk4x(x + hx, tau_mid);
          tau_b = std::clamp(tau_b, t, t1);
          e.theta = (tau_b - t) / dt;
          e.span = t1 - tau_b;
          // int b_jj dtau = int (b_jj / a_j) dxi from xb to x, Simpson in xi
          const double g0 = c.b(j, j, xb, tau_b) / speed(xb, tau_b);
          const double gm = c.b(j, j, x + hx, tau_mid) / speed(x + hx, tau_mid);
          const double g1 = c.b(j, j, x, t1) / speed(x, t1);
          e.factor = std::exp(-(x - xb) * (g0 + 4.0 * gm + g1) / 6.0);
          for (int k = 0; k < n_; ++k)
            if (k != j) b_near_[static_cast<std::size_t>(r * n_ + k)] = c.b(j, k, xb, tau_b);
          e.f_near = c.f(j, xb, tau_b);
          e.node_b = right ? 0 : nx;
        }
      }
    }
  }

  int n() const { return n_; }
  int nx() const { return nx_; }
  double t() const { return t_; }
  double dt() const { return dt_; }
  int rows() const { return n_ * (nx_ + 1); }

  /// Advances every column of U by one step. with_source=false drops f.
  Batch apply(const Batch& U, bool with_source) const {
    const int rows = this->rows();
    const Eigen::Index K = U.cols();
    if (U.rows() != rows) throw ValidationError("state size does not match the step plan");
    Batch pred(rows, K), out(rows, K);
    Batch base_val(rows, K), g_near(rows, K);
    Eigen::RowVectorXd tmp(K);
    std::vector<Eigen::RowVectorXd> foot(static_cast<std::size_t>(n_), Eigen::RowVectorXd(K));

    auto idx = [&](int k, int i) { return k * (nx_ + 1) + i; };
    const double f_on = with_source ? 1.0 : 0.0;

    // interior feet: predictor and the parts of the corrector that do not
    // depend on the new level
    for (int r = 0; r < rows; ++r) {
      const Entry& e = entries_[static_cast<std::size_t>(r)];
      if (e.kind != Entry::interior) continue;
      const int j = r / (nx_ + 1);
      for (int k = 0; k < n_; ++k) {
        auto& fk = foot[static_cast<std::size_t>(k)];
        fk = e.w[0] * U.row(idx(k, e.base));
        for (int q = 1; q < 4; ++q) fk += e.w[q] * U.row(idx(k, e.base + q));
      }
      tmp.setConstant(f_on * e.f_near);
      for (int k = 0; k < n_; ++k)
        if (k != j) tmp -= b_near_[static_cast<std::size_t>(r * n_ + k)] * foot[static_cast<std::size_t>(k)];
      base_val.row(r) = e.factor * foot[static_cast<std::size_t>(j)];
      g_near.row(r) = e.factor * tmp;
      pred.row(r) = base_val.row(r) + dt_ * g_near.row(r);
    }
    fill_boundary(pred);
    fill_exits(U, pred, pred, f_on, /*corrector=*/false, pred);

    for (int r = 0; r < rows; ++r) {
      const Entry& e = entries_[static_cast<std::size_t>(r)];
      if (e.kind != Entry::interior) continue;
      anchor_source(r, pred, f_on, tmp);
      out.row(r) = base_val.row(r) + 0.5 * dt_ * (g_near.row(r) + tmp);
    }
    fill_boundary(out);
    fill_exits(U, out, pred, f_on, /*corrector=*/true, out);
    if (!out.allFinite()) throw NumericalError("non-finite value produced at t=" + std::to_string(t_ + dt_));
    return out;
  }

 private:
  struct Entry {
    enum Kind : unsigned char { interior, boundary, exit } kind = interior;
    int node = 0;
    int base = 0;
    double w[4] = {0, 0, 0, 0};
    double factor = 1.0;   // integrating factor over the traced segment
    double span = 0.0;     // time length of the traced segment
    double f_near = 0.0;   // f at the foot (interior) or boundary point (exit)
    double f_anchor = 0.0;
    double theta = 0.0;    // exit time as a fraction of the step
    int node_b = 0;        // boundary node of an exit
  };

  static void lagrange_weights(double u, double w[4]) {
    // nodes 0,1,2,3
    w[0] = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    w[1] = u * (u - 2.0) * (u - 3.0) / 2.0;
    w[2] = -u * (u - 1.0) * (u - 3.0) / 2.0;
    w[3] = u * (u - 1.0) * (u - 2.0) / 6.0;
  }

  // (RU)_j for every column
  void reflect(const Batch& U, int j, Eigen::RowVectorXd& out) const {
    out.setZero();
    for (int k = 0; k < n_; ++k) {
      const double pk = p_(j, k);
      if (pk == 0.0) continue;
      const int node = k < m_ ? nx_ : 0;
      out += pk * U.row(k * (nx_ + 1) + node);
    }
  }

  void fill_boundary(Batch& V) const {
    Eigen::RowVectorXd tmp(V.cols());
    for (int r = 0; r < rows(); ++r)
      if (entries_[static_cast<std::size_t>(r)].kind == Entry::boundary) {
        reflect(V, r / (nx_ + 1), tmp);
        V.row(r) = tmp;
      }
  }

  void anchor_source(int r, const Batch& anchor_state, double f_on, Eigen::RowVectorXd& out) const {
    const Entry& e = entries_[static_cast<std::size_t>(r)];
    const int j = r / (nx_ + 1);
    out.setConstant(f_on * e.f_anchor);
    for (int k = 0; k < n_; ++k)
      if (k != j) out -= b_anchor_[static_cast<std::size_t>(r * n_ + k)] * anchor_state.row(k * (nx_ + 1) + e.node);
  }

  // Exits need the reflected outflow traces at the exit time, linear in time
  // between the old level U and the new level `level`.
  void fill_exits(const Batch& U, const Batch& level, const Batch& pred, double f_on, bool corrector, Batch& dst) const {
    const Eigen::Index K = U.cols();
    Eigen::RowVectorXd r_old(K), r_new(K), g(K), ga(K);
    for (int r = 0; r < rows(); ++r) {
      const Entry& e = entries_[static_cast<std::size_t>(r)];
      if (e.kind != Entry::exit) continue;
      const int j = r / (nx_ + 1);
      reflect(U, j, r_old);
      reflect(level, j, r_new);
      const double th = e.theta;
      g.setConstant(f_on * e.f_near);
      for (int k = 0; k < n_; ++k)
        if (k != j) {
          const int row_b = k * (nx_ + 1) + e.node_b;
          g -= b_near_[static_cast<std::size_t>(r * n_ + k)] * ((1.0 - th) * U.row(row_b) + th * level.row(row_b));
        }
      const Eigen::RowVectorXd boundary_value = (1.0 - th) * r_old + th * r_new;
      if (!corrector) {
        dst.row(r) = e.factor * (boundary_value + e.span * g);
      } else {
        anchor_source(r, pred, f_on, ga);
        dst.row(r) = e.factor * (boundary_value + 0.5 * e.span * g) + 0.5 * e.span * ga;
      }
    }
  }

  int n_, m_, nx_;
  double t_, dt_;
  Eigen::MatrixXd p_;
  std::vector<Entry> entries_;
  std::vector<double> b_near_;    // b_jk at the foot / boundary point, row-major (row, k)
  std::vector<double> b_anchor_;  // b_jk at the anchor
};

inline Batch to_batch(const GridFunction& u) {
  Batch b(u.values().size(), 1);
  b.col(0) = u.values();
  return b;
}

inline GridFunction from_batch(const Batch& b, Eigen::Index col, int n, int nx, double t) {
  return GridFunction(n, nx, t, b.col(col));
}

/// One step from state (at time state.t()) to state.t() + dt.
inline GridFunction step(const LinearCoeffs& c, const GridFunction& state, double dt, bool with_source = true) {
  if (state.n() != c.n()) throw ValidationError("state component count does not match the coefficients");
  const StepPlan plan(c, state.nx(), state.t(), dt);
  return from_batch(plan.apply(to_batch(state), with_source), 0, state.n(), state.nx(), state.t() + dt);
}

/// Worker threads used for multi-column propagation (monodromy assembly).
inline int& thread_count() {
  static int k = 1;
  return k;
}

inline void set_threads(int k) {
  if (k < 1) throw ValidationError("thread count must be >= 1");
  thread_count() = k;
}

/// Precomputed step plans over [s, s + N*dt] with uniform dt.
class Propagator {
 public:
  Propagator(const LinearCoeffs& c, int nx, double s, double t_end, double dt_max)
      : n_(c.n()), nx_(nx), s_(s), t_end_(t_end) {
    const int steps = step_count(t_end - s, dt_max);
    dt_ = steps > 0 ? (t_end - s) / steps : 0.0;
    plans_.reserve(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) plans_.emplace_back(c, nx, s + k * dt_, dt_);
  }

  int n() const { return n_; }
  int nx() const { return nx_; }
  double s() const { return s_; }
  double t_end() const { return t_end_; }
  double dt() const { return dt_; }
  std::size_t steps() const { return plans_.size(); }

  // Columns are independent, so splitting them across threads gives
  // bit-identical results for any thread count.
  Batch propagate(Batch U, bool with_source) const {
    const Eigen::Index K = U.cols();
    const int workers = static_cast<int>(std::min<Eigen::Index>(thread_count(), K / 8));
    if (workers <= 1) {
      for (const auto& p : plans_) U = p.apply(U, with_source);
      return U;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    const Eigen::Index chunk = (K + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const Eigen::Index c0 = w * chunk, c1 = std::min(K, c0 + chunk);
      if (c0 >= c1) break;
      pool.emplace_back([&, w, c0, c1] {
        try {
          Batch part = U.middleCols(c0, c1 - c0);
          for (const auto& p : plans_) part = p.apply(part, with_source);
          U.middleCols(c0, c1 - c0) = part;
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    return U;
  }

  SpaceTimeField trajectory(const GridFunction& phi, bool with_source) const {
    std::vector<GridFunction> levels;
    levels.reserve(plans_.size() + 1);
    GridFunction first = phi;
    first.set_t(s_);
    levels.push_back(first);
    Batch U = to_batch(phi);
    for (std::size_t k = 0; k < plans_.size(); ++k) {
      U = plans_[k].apply(U, with_source);
      levels.push_back(from_batch(U, 0, n_, nx_, s_ + static_cast<double>(k + 1) * dt_));
    }
    return SpaceTimeField(s_, dt_ > 0.0 ? dt_ : 1.0, std::move(levels));
  }

 private:
  int n_, nx_;
  double s_, t_end_, dt_ = 0.0;
  std::vector<StepPlan> plans_;
};

namespace detail {
// Steps without storing plans; used for long single-state runs.
template <class Visit>
void march(const LinearCoeffs& c, const GridFunction& phi, double s, double t_end, double dt, bool with_source,
           Visit&& visit) {
  if (phi.n() != c.n()) throw ValidationError("initial state component count does not match the coefficients");
  const int steps = step_count(t_end - s, dt);
  const double h = steps > 0 ? (t_end - s) / steps : 0.0;
  Batch U = to_batch(phi);
  for (int k = 0; k < steps; ++k) {
    const StepPlan plan(c, phi.nx(), s + k * h, h);
    U = plan.apply(U, with_source);
    visit(U, s + (k + 1) * h, h);
  }
}
}  // namespace detail

/// All levels of the solution on [s, t_end], uniform spacing <= dt.
inline SpaceTimeField solve_ivp(const LinearCoeffs& c, const GridFunction& phi, double s, double t_end, double dt,
                                bool with_source = true) {
  if (!(t_end > s)) throw ValidationError("solve_ivp needs t_end > s");
  std::vector<GridFunction> levels;
  GridFunction first = phi;
  first.set_t(s);
  levels.push_back(first);
  double h_used = dt;
  detail::march(c, phi, s, t_end, dt, with_source, [&](const Batch& U, double t, double h) {
    levels.push_back(from_batch(U, 0, phi.n(), phi.nx(), t));
    h_used = h;
  });
  return SpaceTimeField(s, h_used, std::move(levels));
}

/// U(t, s) phi: the homogeneous problem (f dropped) from s to t.
inline GridFunction apply_evolution(const LinearCoeffs& c, const GridFunction& phi, double s, double t, double dt) {
  if (t < s) throw ValidationError("apply_evolution needs t >= s");
  GridFunction out = phi;
  out.set_t(s);
  if (t == s) return out;
  detail::march(c, phi, s, t, dt, false, [&](const Batch& U, double tk, double) {
    out = from_batch(U, 0, phi.n(), phi.nx(), tk);
  });
  return out;
}

/// max over components and interior nodes of |u_{i+1} - 2u_i + u_{i-1}| / dx.
/// Stays bounded under refinement for continuous states (tends to 0 for C^1
/// ones) and grows like Nx across a jump.
inline double jump_indicator(const GridFunction& u) {
  if (u.nx() < 4) throw ValidationError("jump_indicator needs Nx >= 4");
  double worst = 0.0;
  for (int j = 0; j < u.n(); ++j)
    for (int i = 1; i < u.nx(); ++i)
      worst = std::max(worst, std::fabs(u(j, i + 1) - 2.0 * u(j, i) + u(j, i - 1)) / u.dx());
  return worst;
}

}  // namespace hypdich
