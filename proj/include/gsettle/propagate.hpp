#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "gsettle/catalog.hpp"
#include "gsettle/rotation_curve.hpp"

namespace gsettle {

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adaptive Dormand-Prince 5(4) with FSAL, mixed absolute/relative error
// control at `tol`. Direction-aware (t1 may be before t0).
template <int N, class Rhs>
Eigen::Matrix<double, N, 1> integrate_dp54(Rhs&& rhs, Eigen::Matrix<double, N, 1> y, double t0,
                                           double t1, double tol) {
  using Vec = Eigen::Matrix<double, N, 1>;
  if (t1 == t0) return y;
  const double dir = (t1 > t0) ? 1.0 : -1.0;
  const double span = std::fabs(t1 - t0);

  double t = t0;
  double h = dir * std::min(span, std::max(span / 100.0, 1e-6));

  Vec k1, k2, k3, k4, k5, k6, k7, ytmp, y5, y4;
  rhs(t, y, k1);

  const int max_steps = 1000000;
  for (int step = 0; step < max_steps; ++step) {
    if (dir * (t - t1) >= 0.0) return y;
    if (dir * (t + h - t1) > 0.0) h = t1 - t;
    if (std::fabs(h) < 1e-14 * std::max(1.0, std::fabs(t)))
      throw IntegrationError("integrate_dp54: step size underflow");

    ytmp = y + h * (1.0 / 5.0) * k1;
    rhs(t + h / 5.0, ytmp, k2);
    ytmp = y + h * ((3.0 / 40.0) * k1 + (9.0 / 40.0) * k2);
    rhs(t + 3.0 * h / 10.0, ytmp, k3);
    ytmp = y + h * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2 + (32.0 / 9.0) * k3);
    rhs(t + 4.0 * h / 5.0, ytmp, k4);
    ytmp = y + h * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2 + (64448.0 / 6561.0) * k3 -
                    (212.0 / 729.0) * k4);
    rhs(t + 8.0 * h / 9.0, ytmp, k5);
    ytmp = y + h * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2 + (46732.0 / 5247.0) * k3 +
                    (49.0 / 176.0) * k4 - (5103.0 / 18656.0) * k5);
    rhs(t + h, ytmp, k6);
    y5 = y + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 + (125.0 / 192.0) * k4 -
                  (2187.0 / 6784.0) * k5 + (11.0 / 84.0) * k6);
    rhs(t + h, y5, k7);
    y4 = y + h * ((5179.0 / 57600.0) * k1 + (7571.0 / 16695.0) * k3 + (393.0 / 640.0) * k4 -
                  (92097.0 / 339200.0) * k5 + (187.0 / 2100.0) * k6 + (1.0 / 40.0) * k7);

    double err = 0.0;
    for (int i = 0; i < N; ++i) {
      const double sc = tol + tol * std::max(std::fabs(y[i]), std::fabs(y5[i]));
      const double e = (y5[i] - y4[i]) / sc;
      err += e * e;
    }
    err = std::sqrt(err / N);

    if (err <= 1.0) {
      t += h;
      y = y5;
      k1 = k7;  // FSAL
    }
    const double factor = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(factor, 0.2, 5.0);
  }
  throw IntegrationError("integrate_dp54: step budget exhausted");
}

// Ship motion under the central force: rdot = v, vdot = -(r/|r|) f(|r|).
inline ShipState propagate_ship(const RotationCurve& curve, const ShipState& s0, double t1,
                                double tol = 1e-10) {
  auto rhs = [&curve](double, const Eigen::Matrix<double, 6, 1>& y, Eigen::Matrix<double, 6, 1>& dy) {
    const Eigen::Vector3d pos = y.head<3>();
    dy.head<3>() = y.tail<3>();
    dy.tail<3>() = curve.gravity(pos);
  };
  Eigen::Matrix<double, 6, 1> y;
  y << s0.pos, s0.vel;
  y = integrate_dp54<6>(rhs, y, s0.epoch, t1, tol);
  ShipState out;
  out.pos = y.head<3>();
  out.vel = y.tail<3>();
  out.epoch = t1;
  return out;
}

struct StmResult {
  ShipState state;
  Eigen::Matrix<double, 6, 6> stm;  // d(state at t1) / d(state at t0)
};

// State and variational state-transition matrix, Phi' = [[0,I],[G,0]] Phi.
inline StmResult propagate_with_stm(const RotationCurve& curve, const ShipState& s0, double t1,
                                    double tol = 1e-10) {
  using Vec = Eigen::Matrix<double, 42, 1>;
  auto rhs = [&curve](double, const Vec& y, Vec& dy) {
    const Eigen::Vector3d pos = y.head<3>();
    dy.head<3>() = y.segment<3>(3);
    dy.segment<3>(3) = curve.gravity(pos);
    const Eigen::Matrix3d grad = curve.gravity_gradient(pos);
    Eigen::Map<const Eigen::Matrix<double, 6, 6>> phi(y.data() + 6);
    Eigen::Map<Eigen::Matrix<double, 6, 6>> dphi(dy.data() + 6);
    dphi.topRows<3>() = phi.bottomRows<3>();
    dphi.bottomRows<3>() = grad * phi.topRows<3>();
  };
  Vec y = Vec::Zero();
  y.head<3>() = s0.pos;
  y.segment<3>(3) = s0.vel;
  Eigen::Map<Eigen::Matrix<double, 6, 6>>(y.data() + 6).setIdentity();
  y = integrate_dp54<42>(rhs, y, s0.epoch, t1, tol);
  StmResult out;
  out.state.pos = y.head<3>();
  out.state.vel = y.segment<3>(3);
  out.state.epoch = t1;
  out.stm = Eigen::Map<Eigen::Matrix<double, 6, 6>>(y.data() + 6);
  return out;
}

// State and adjoint transition matrix for (lambda_r, lambda_v), which obey
// lr' = -G^T lv, lv' = -lr along the trajectory (G symmetric).
inline StmResult propagate_adjoint_stm(const RotationCurve& curve, const ShipState& s0, double t1,
                                       double tol = 1e-10) {
  using Vec = Eigen::Matrix<double, 42, 1>;
  auto rhs = [&curve](double, const Vec& y, Vec& dy) {
    const Eigen::Vector3d pos = y.head<3>();
    dy.head<3>() = y.segment<3>(3);
    dy.segment<3>(3) = curve.gravity(pos);
    const Eigen::Matrix3d grad = curve.gravity_gradient(pos);
    Eigen::Map<const Eigen::Matrix<double, 6, 6>> psi(y.data() + 6);
    Eigen::Map<Eigen::Matrix<double, 6, 6>> dpsi(dy.data() + 6);
    dpsi.topRows<3>() = -grad.transpose() * psi.bottomRows<3>();
    dpsi.bottomRows<3>() = -psi.topRows<3>();
  };
  Vec y = Vec::Zero();
  y.head<3>() = s0.pos;
  y.segment<3>(3) = s0.vel;
  Eigen::Map<Eigen::Matrix<double, 6, 6>>(y.data() + 6).setIdentity();
  y = integrate_dp54<42>(rhs, y, s0.epoch, t1, tol);
  StmResult out;
  out.state.pos = y.head<3>();
  out.state.vel = y.segment<3>(3);
  out.state.epoch = t1;
  out.stm = Eigen::Map<Eigen::Matrix<double, 6, 6>>(y.data() + 6);
  return out;
}

// Specific energy v^2/2 + V(r); conserved along coasting arcs.
inline double specific_energy(const RotationCurve& curve, const ShipState& s) {
  return 0.5 * s.vel.squaredNorm() + curve.potential(s.pos.norm());
}

}  // namespace gsettle
