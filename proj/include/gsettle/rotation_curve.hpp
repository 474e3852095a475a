#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>

#include "gsettle/units.hpp"

namespace gsettle {

// Galactic rotation-curve model. The circular speed at radius r is the
// inverse of an 8th-order polynomial, v_c(r) = 1 / sum_i k_i r^i, and the
// central attraction has modulus f(r) = v_c(r)^2 / r.
struct RotationCurve {
  std::array<double, 9> k{};

  static RotationCurve flat(double v0_kpc_myr) {
    RotationCurve c;
    c.k[0] = 1.0 / v0_kpc_myr;
    return c;
  }

  double poly(double r) const {
    double p = 0.0;
    for (int i = 8; i >= 0; --i) p = p * r + k[i];
    return p;
  }

  double poly_deriv(double r) const {
    double p = 0.0;
    for (int i = 8; i >= 1; --i) p = p * r + i * k[i];
    return p;
  }

  double circular_velocity(double r) const {
    if (r <= 0.0) throw std::domain_error("circular_velocity: r must be positive");
    const double p = poly(r);
    if (p <= 0.0) throw std::domain_error("circular_velocity: non-positive inverse-speed polynomial");
    return 1.0 / p;
  }

  double omega(double r) const { return circular_velocity(r) / r; }

  // f(r) = v_c^2 / r
  double force_mag(double r) const {
    const double vc = circular_velocity(r);
    return vc * vc / r;
  }

  Eigen::Vector3d gravity(const Eigen::Vector3d& pos) const {
    const double r = pos.norm();
    if (r <= 0.0) throw std::domain_error("gravity: zero radius");
    return -(force_mag(r) / r) * pos;
  }

  // d(gravity)/d(pos), symmetric. With h(r) = v_c^2/r^2,
  // g = -h(r) pos and dg/dpos = -h I - (h'/r) pos pos^T.
  Eigen::Matrix3d gravity_gradient(const Eigen::Vector3d& pos) const {
    const double r = pos.norm();
    if (r <= 0.0) throw std::domain_error("gravity_gradient: zero radius");
    const double p = poly(r);
    const double dp = poly_deriv(r);
    const double h = 1.0 / (p * p * r * r);
    const double hprime = h * (-2.0 * dp / p - 2.0 / r);
    return -h * Eigen::Matrix3d::Identity() - (hprime / r) * (pos * pos.transpose());
  }

  // Potential V with V'(r) = f(r), fixed by V(r_ref) = 0. Evaluated by
  // composite 16-point Gauss-Legendre quadrature.
  double potential(double r, double r_ref = 8.0) const {
    static const double xg[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                 0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
    static const double wg[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                 0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};
    const int segments = 8;
    double total = 0.0;
    const double h = (r - r_ref) / segments;
    for (int s = 0; s < segments; ++s) {
      const double a = r_ref + s * h;
      const double mid = a + 0.5 * h;
      const double half = 0.5 * h;
      double acc = 0.0;
      for (int i = 0; i < 8; ++i) {
        acc += wg[i] * (force_mag(mid + half * xg[i]) + force_mag(mid - half * xg[i]));
      }
      total += acc * half;
    }
    return total;
  }
};

}  // namespace gsettle
