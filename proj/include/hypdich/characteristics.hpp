#pragma once

// Characteristic curves tau = omega_j(xi; x, t) of the j-th family,
//   d omega_j / d xi = 1 / a_j(xi, omega_j),   omega_j(x; x, t) = t,
// traced backward in time from (x, t) until they leave the strip through
// x = 0 or x = 1, or reach a floor time.

#include "hypdich/coefficients.hpp"
#include "hypdich/problem.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

namespace hypdich {

enum class ExitKind { boundary0, boundary1, floor };

inline const char* exit_kind_name(ExitKind k) {
  switch (k) {
    case ExitKind::boundary0: return "boundary0";
    case ExitKind::boundary1: return "boundary1";
    case ExitKind::floor: return "floor";
  }
  return "?";
}

struct ExitPoint {
  ExitKind which = ExitKind::floor;
  double location = 0.0;
  double time = 0.0;
};

struct CharTrace {
  int family = 0;
  double x = 0.0;
  double t = 0.0;
  std::vector<std::pair<double, double>> path;  // (xi, tau), anchor first
  ExitPoint exit;
};

struct TraceOptions {
  int substeps_per_unit = 64;
  std::size_t max_steps = 1'000'000;
};

namespace detail {

// One classical RK4 step of d tau / d xi = 1 / a(xi, tau) with signed step h.
template <class Speed>
double rk4_tau_step(const Speed& a, double xi, double tau, double h) {
  const double k1 = 1.0 / a(xi, tau);
  const double k2 = 1.0 / a(xi + 0.5 * h, tau + 0.5 * h * k1);
  const double k3 = 1.0 / a(xi + 0.5 * h, tau + 0.5 * h * k2);
  const double k4 = 1.0 / a(xi + h, tau + h * k3);
  return tau + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
}

}  // namespace detail

/// Traces family j backward from (x, t). Throws NumericalError if |a_j| drops
/// below half the declared separation, or a_j has the wrong sign.
inline CharTrace trace_characteristic(const LinearCoeffs& c, int j, double x, double t, double floor_time,
                                      const TraceOptions& opt = {}) {
  if (x < 0.0 || x > 1.0) throw ValidationError("trace anchor must satisfy 0 <= x <= 1");
  if (floor_time > t) throw ValidationError("floor_time must not exceed t");
  if (j < 0 || j >= c.n()) throw ValidationError("family index out of range");

  const bool right = c.rightward(j);
  const double min_speed = 0.5 * c.lambda0();
  auto speed = [&](double xi, double tau) {
    const double a = c.a(j, xi, tau);
    if ((right && a < min_speed) || (!right && a > -min_speed))
      throw NumericalError("speed of family " + std::to_string(j + 1) + " is " + std::to_string(a) + " at (" +
                           std::to_string(xi) + ", " + std::to_string(tau) + "), below Lambda0/2 or of wrong sign");
    return a;
  };

  CharTrace tr;
  tr.family = j;
  tr.x = x;
  tr.t = t;
  tr.path.emplace_back(x, t);

  const double target = right ? 0.0 : 1.0;
  const double dir = right ? -1.0 : 1.0;
  const double h_nominal = 1.0 / opt.substeps_per_unit;
  double xi = x;
  double tau = t;

  for (std::size_t step = 0;; ++step) {
    if (step >= opt.max_steps) throw NumericalError("characteristic tracing exceeded the step limit");
    const double remaining = std::fabs(target - xi);
    if (remaining <= 0.0) {
      tr.exit = {right ? ExitKind::boundary0 : ExitKind::boundary1, target, tau};
      return tr;
    }
    const bool last = remaining <= h_nominal * (1.0 + 1e-12);
    const double h = dir * (last ? remaining : h_nominal);
    const double tau_next = detail::rk4_tau_step(speed, xi, tau, h);
    if (tau_next < floor_time) {
      // the floor is crossed inside this substep; bisect on the step length
      double lo = 0.0, hi = std::fabs(h);
      for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::rk4_tau_step(speed, xi, tau, dir * mid) < floor_time)
          hi = mid;
        else
          lo = mid;
      }
      const double xi_floor = xi + dir * 0.5 * (lo + hi);
      tr.path.emplace_back(xi_floor, floor_time);
      tr.exit = {ExitKind::floor, xi_floor, floor_time};
      return tr;
    }
    xi = last ? target : xi + h;
    tau = tau_next;
    tr.path.emplace_back(xi, tau);
  }
}

/// Convenience overload: coefficients of the spec, linearized at u = 0 or
/// frozen at the given field.
inline CharTrace trace_characteristic(const ProblemSpec& spec, std::shared_ptr<const SpaceTimeField> frozen, int j,
                                      double x, double t, double floor_time, const TraceOptions& opt = {}) {
  return trace_characteristic(LinearCoeffs(spec, std::move(frozen)), j, x, t, floor_time, opt);
}

inline ExitPoint exit_point(const CharTrace& trace) { return trace.exit; }

/// c_j = exp of the integral of b_jj / a_j from the anchor to the exit point,
/// trapezoid rule on the trace samples.
inline double integrating_factor(const LinearCoeffs& c, const CharTrace& trace) {
  const int j = trace.family;
  auto g = [&](const std::pair<double, double>& pt) {
    return c.b(j, j, pt.first, pt.second) / c.a(j, pt.first, pt.second);
  };
  double integral = 0.0;
  double g_prev = g(trace.path.front());
  for (std::size_t k = 1; k < trace.path.size(); ++k) {
    const double g_next = g(trace.path[k]);
    integral += 0.5 * (trace.path[k].first - trace.path[k - 1].first) * (g_prev + g_next);
    g_prev = g_next;
  }
  return std::exp(integral);
}

/// Smoothing time d = n * (largest strip-crossing time), the crossing time
/// measured by tracing every family across [0,1] from sample start times
/// in [0, T] of the linearization at u = 0.
inline double smoothing_time_d(const ProblemSpec& spec, int time_samples = 32, const TraceOptions& opt = {}) {
  const LinearCoeffs c(spec);
  double worst = 0.0;
  for (int j = 0; j < spec.n; ++j) {
    const double start_x = spec.rightward(j) ? 1.0 : 0.0;
    for (int k = 0; k < time_samples; ++k) {
      const double t = spec.T * k / time_samples;
      const auto tr = trace_characteristic(c, j, start_x, t, -std::numeric_limits<double>::infinity(), opt);
      worst = std::max(worst, t - tr.exit.time);
    }
  }
  return spec.n * worst;
}

}  // namespace hypdich
