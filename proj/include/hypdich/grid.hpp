#pragma once

// Discrete states: a vector-valued function on the uniform grid x_i = i/Nx
// at one time, and a sequence of such levels with uniform time spacing.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypdich {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem or configuration does not satisfy a stated requirement.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (CFL violation, non-finite value, singular system).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// n components sampled at Nx+1 nodes. Storage is component-major:
/// values[j*(Nx+1) + i] = u_j(x_i).
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(int n, int nx, double t = 0.0)
      : n_(n), nx_(nx), t_(t), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * (nx + 1))) {
    if (n < 1 || nx < 1) throw ValidationError("grid function needs n >= 1 and Nx >= 1");
  }
  GridFunction(int n, int nx, double t, Eigen::VectorXd values) : n_(n), nx_(nx), t_(t), values_(std::move(values)) {
    if (values_.size() != static_cast<Eigen::Index>(n) * (nx + 1))
      throw ValidationError("grid function storage size does not match n*(Nx+1)");
  }

  /// Samples a callable g(j, x) at every node.
  template <class F>
  static GridFunction sample(int n, int nx, double t, F&& g) {
    GridFunction out(n, nx, t);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= nx; ++i) out(j, i) = g(j, out.x(i));
    return out;
  }

  int n() const { return n_; }
  int nx() const { return nx_; }
  int nodes() const { return nx_ + 1; }
  double dx() const { return 1.0 / nx_; }
  double x(int i) const { return static_cast<double>(i) / nx_; }
  double t() const { return t_; }
  void set_t(double t) { t_ = t; }

  double& operator()(int j, int i) { return values_[static_cast<Eigen::Index>(j) * (nx_ + 1) + i]; }
  double operator()(int j, int i) const { return values_[static_cast<Eigen::Index>(j) * (nx_ + 1) + i]; }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  /// Linear interpolation of component j at x in [0,1].
  double at(int j, double x) const {
    const double s = std::clamp(x, 0.0, 1.0) * nx_;
    const int i = std::min(static_cast<int>(s), nx_ - 1);
    const double w = s - i;
    return (1.0 - w) * (*this)(j, i) + w * (*this)(j, i + 1);
  }

  double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

  /// Discrete L2((0,1); R^n) norm with trapezoid weights.
  double l2_norm() const {
    double acc = 0.0;
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i <= nx_; ++i) {
        const double w = (i == 0 || i == nx_) ? 0.5 : 1.0;
        acc += w * (*this)(j, i) * (*this)(j, i);
      }
    return std::sqrt(acc * dx());
  }

  bool all_finite() const { return values_.allFinite(); }

 private:
  int n_ = 0;
  int nx_ = 0;
  double t_ = 0.0;
  Eigen::VectorXd values_;
};

inline double l2_distance(const GridFunction& a, const GridFunction& b) {
  GridFunction d(a.n(), a.nx(), a.t(), a.values() - b.values());
  return d.l2_norm();
}

/// Levels t_k = t0 + k*dt, k = 0..levels-1.
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  SpaceTimeField(double t0, double dt, std::vector<GridFunction> levels, bool periodic = false)
      : t0_(t0), dt_(dt), levels_(std::move(levels)), periodic_(periodic) {
    if (levels_.empty()) throw ValidationError("space-time field needs at least one level");
    if (levels_.size() > 1 && !(dt_ > 0.0)) throw ValidationError("space-time field needs dt > 0");
    for (const auto& l : levels_)
      if (l.n() != levels_.front().n() || l.nx() != levels_.front().nx())
        throw ValidationError("space-time field levels have inconsistent shapes");
  }

  /// Field that is identically zero on the given levels.
  static SpaceTimeField zeros(int n, int nx, double t0, double dt, int level_count, bool periodic) {
    std::vector<GridFunction> lv;
    lv.reserve(static_cast<std::size_t>(level_count));
    for (int k = 0; k < level_count; ++k) lv.emplace_back(n, nx, t0 + k * dt);
    return SpaceTimeField(t0, dt, std::move(lv), periodic);
  }

  double t0() const { return t0_; }
  double dt() const { return dt_; }
  double t_end() const { return t0_ + dt_ * (static_cast<double>(levels_.size()) - 1); }
  double period() const { return t_end() - t0_; }
  int n() const { return levels_.front().n(); }
  int nx() const { return levels_.front().nx(); }
  std::size_t size() const { return levels_.size(); }
  bool periodic() const { return periodic_; }
  void set_periodic(bool p) { periodic_ = p; }

  const GridFunction& level(std::size_t k) const { return levels_[k]; }
  GridFunction& level(std::size_t k) { return levels_[k]; }
  const GridFunction& front() const { return levels_.front(); }
  const GridFunction& back() const { return levels_.back(); }
  const std::vector<GridFunction>& levels() const { return levels_; }

  /// Bilinear interpolation in (x, t). Periodic fields wrap t into [t0, t_end].
  double value(int j, double x, double t) const {
    if (levels_.size() == 1) return levels_.front().at(j, x);
    double tau = t;
    const double span = period();
    if (periodic_ && span > 0.0) {
      tau = t0_ + std::fmod(t - t0_, span);
      if (tau < t0_) tau += span;
    }
    const double s = std::clamp((tau - t0_) / dt_, 0.0, static_cast<double>(levels_.size() - 1));
    const std::size_t k = std::min(static_cast<std::size_t>(s), levels_.size() - 2);
    const double w = s - static_cast<double>(k);
    return (1.0 - w) * levels_[k].at(j, x) + w * levels_[k + 1].at(j, x);
  }

  double sup_norm() const {
    double m = 0.0;
    for (const auto& l : levels_) m = std::max(m, l.sup_norm());
    return m;
  }

  /// Writes rows "t,x,u1,..,un" with a header line.
  void write_csv(std::ostream& os) const {
    os << "t,x";
    for (int j = 0; j < n(); ++j) os << ",u" << (j + 1);
    os << '\n';
    char buf[40];
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.12g", v);
      os << buf;
    };
    for (const auto& l : levels_)
      for (int i = 0; i <= l.nx(); ++i) {
        put(l.t());
        os << ',';
        put(l.x(i));
        for (int j = 0; j < l.n(); ++j) {
          os << ',';
          put(l(j, i));
        }
        os << '\n';
      }
  }

  /// Binary layout, all little-endian:
  ///   uint32 n, uint32 Nx, uint32 level count,
  ///   then per level: float64 t, float64 u_j(x_i) for j = 0..n-1, i = 0..Nx.
  void write_binary(std::ostream& os) const {
    put_u32(os, static_cast<std::uint32_t>(n()));
    put_u32(os, static_cast<std::uint32_t>(nx()));
    put_u32(os, static_cast<std::uint32_t>(levels_.size()));
    for (const auto& l : levels_) {
      put_f64(os, l.t());
      for (Eigen::Index k = 0; k < l.values().size(); ++k) put_f64(os, l.values()[k]);
    }
  }

  static SpaceTimeField read_binary(std::istream& is) {
    const auto n = static_cast<int>(get_u32(is));
    const auto nx = static_cast<int>(get_u32(is));
    const auto count = get_u32(is);
    if (n < 1 || nx < 1 || count < 1) throw ValidationError("binary field header is invalid");
    std::vector<GridFunction> lv;
    lv.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
      const double t = get_f64(is);
      Eigen::VectorXd v(static_cast<Eigen::Index>(n) * (nx + 1));
      for (Eigen::Index q = 0; q < v.size(); ++q) v[q] = get_f64(is);
      lv.emplace_back(n, nx, t, std::move(v));
    }
    const double t0 = lv.front().t();
    const double dt = count > 1 ? lv[1].t() - t0 : 0.0;
    return SpaceTimeField(t0, dt, std::move(lv));
  }

 private:
  static void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFFu);
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  static void put_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, sizeof v);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFFu);
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  static std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ValidationError("truncated binary field");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
  }
  static double get_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ValidationError("truncated binary field");
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    double d;
    std::memcpy(&d, &v, sizeof d);
    return d;
  }

  double t0_ = 0.0;
  double dt_ = 0.0;
  std::vector<GridFunction> levels_;
  bool periodic_ = false;
};

}  // namespace hypdich
