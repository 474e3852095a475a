#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gsettle/catalog.hpp"
#include "gsettle/rotation_curve.hpp"
#include "gsettle/units.hpp"

namespace gsettle {

struct SingularPhasing : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hill-Clohessy-Wiltshire state transition matrix about a circular reference
// orbit of angular rate omega: x radial, y along-track, z cross-track.
struct HcwStm {
  Eigen::Matrix3d M, N, S, T;
  double omega = 0.0;
  double tau = 0.0;

  Eigen::Matrix<double, 6, 6> full() const {
    Eigen::Matrix<double, 6, 6> phi;
    phi.topLeftCorner<3, 3>() = M;
    phi.topRightCorner<3, 3>() = N;
    phi.bottomLeftCorner<3, 3>() = S;
    phi.bottomRightCorner<3, 3>() = T;
    return phi;
  }
};

inline HcwStm hcw_stm(double omega, double tau) {
  if (omega <= 0.0) throw std::domain_error("hcw_stm: omega must be positive");
  const double x = omega * tau;
  const double s = std::sin(x);
  const double c = std::cos(x);
  HcwStm out;
  out.omega = omega;
  out.tau = tau;
  out.M << 4.0 - 3.0 * c, 0.0, 0.0,
           6.0 * (s - x), 1.0, 0.0,
           0.0, 0.0, c;
  out.N << s / omega, 2.0 * (1.0 - c) / omega, 0.0,
           -2.0 * (1.0 - c) / omega, 4.0 * s / omega - 3.0 * tau, 0.0,
           0.0, 0.0, s / omega;
  out.S << 3.0 * omega * s, 0.0, 0.0,
           -6.0 * omega * (1.0 - c), 0.0, 0.0,
           0.0, 0.0, -omega * s;
  out.T << c, 2.0 * s, 0.0,
           -2.0 * s, 4.0 * c - 3.0, 0.0,
           0.0, 0.0, c;
  return out;
}

// Two-impulse rendezvous in the linear model.
struct LinearTransfer {
  Eigen::Vector3d dv0_kms = Eigen::Vector3d::Zero();  // departure impulse, rotating frame
  Eigen::Vector3d dvf_kms = Eigen::Vector3d::Zero();  // arrival impulse, rotating frame
  double dv_total_kms = 0.0;
  double tau = 0.0;  // Myr
};

// Departure velocity that nulls the relative position after tau, arrival
// impulse that nulls the remaining relative velocity:
//   dv0+   = -N^-1 M dr0
//   dvf-   = S dr0 + T dv0+
//   DVtot  = |dv0+ - dv0| + |dvf-|
// Throws SingularPhasing when N(tau) is not invertible.
inline LinearTransfer two_impulse_linear(const Eigen::Vector3d& dr0, const Eigen::Vector3d& dv0,
                                         double omega, double tau) {
  const HcwStm stm = hcw_stm(omega, tau);
  // N has an in-plane 2x2 block and a decoupled z term; check both against
  // the dimensionless scale of omega*N.
  const double n11 = stm.N(0, 0) * omega, n12 = stm.N(0, 1) * omega;
  const double n21 = stm.N(1, 0) * omega, n22 = stm.N(1, 1) * omega;
  const double n33 = stm.N(2, 2) * omega;
  const double det2 = n11 * n22 - n12 * n21;
  const double scale = std::max({1.0, std::fabs(n11), std::fabs(n12), std::fabs(n21), std::fabs(n22)});
  if (std::fabs(det2) < 1e-12 * scale * scale || std::fabs(n33) < 1e-12 * scale)
    throw SingularPhasing("two_impulse_linear: N(tau) singular");

  const Eigen::Vector3d m_dr = stm.M * dr0;
  Eigen::Vector3d dv0_plus;
  dv0_plus.x() = -omega * (n22 * m_dr.x() - n12 * m_dr.y()) / det2;
  dv0_plus.y() = -omega * (-n21 * m_dr.x() + n11 * m_dr.y()) / det2;
  dv0_plus.z() = -omega * m_dr.z() / n33;

  const Eigen::Vector3d dvf_minus = stm.S * dr0 + stm.T * dv0_plus;

  LinearTransfer out;
  out.dv0_kms = (dv0_plus - dv0) * kKmsPerKpcMyr;
  out.dvf_kms = -dvf_minus * kKmsPerKpcMyr;
  out.dv_total_kms = out.dv0_kms.norm() + out.dvf_kms.norm();
  out.tau = tau;
  return out;
}

// Target-centered rotating frame: x radial, y along-track, z along the
// orbit normal. Maps inertial ship states to relative states and back.
struct RotatingFrame {
  Eigen::Matrix3d rot;  // rows are the frame axes in inertial coordinates
  Eigen::Vector3d origin_pos, origin_vel;
  double omega = 0.0;

  static RotatingFrame around(const ShipState& target) {
    RotatingFrame f;
    const Eigen::Vector3d xhat = target.pos.normalized();
    const Eigen::Vector3d h = target.pos.cross(target.vel);
    const Eigen::Vector3d zhat = h.normalized();
    const Eigen::Vector3d yhat = zhat.cross(xhat);
    f.rot.row(0) = xhat;
    f.rot.row(1) = yhat;
    f.rot.row(2) = zhat;
    f.origin_pos = target.pos;
    f.origin_vel = target.vel;
    f.omega = target.vel.norm() / target.pos.norm();
    return f;
  }

  void relative(const ShipState& ship, Eigen::Vector3d& dr, Eigen::Vector3d& dv) const {
    dr = rot * (ship.pos - origin_pos);
    const Eigen::Vector3d rel_inertial_rate = rot * (ship.vel - origin_vel);
    dv = rel_inertial_rate - Eigen::Vector3d(0.0, 0.0, omega).cross(dr);
  }

  Eigen::Vector3d inertial_position(const Eigen::Vector3d& dr) const {
    return origin_pos + rot.transpose() * dr;
  }

  Eigen::Vector3d inertial_velocity(const Eigen::Vector3d& dr, const Eigen::Vector3d& dv) const {
    return origin_vel + rot.transpose() * (dv + Eigen::Vector3d(0.0, 0.0, omega).cross(dr));
  }
};

// DeltaV acceptance bands for minimum-time neighborhood generation, keyed by
// flight time. The last row is the open-ended "otherwise" band.
struct ThresholdBand {
  double tau_max = std::numeric_limits<double>::infinity();  // Myr, exclusive upper edge
  double dv_i_max_kms = 0.0;
  double dv_tot_max_kms = 0.0;
};

struct ThresholdTable {
  std::vector<ThresholdBand> rows;

  static ThresholdTable defaults() {
    ThresholdTable t;
    t.rows = {{4.0, 170.0, 340.0},
              {9.0, 175.0, 350.0},
              {15.0, 190.0, 360.0},
              {std::numeric_limits<double>::infinity(), 300.0, 400.0}};
    return t;
  }

  const ThresholdBand& band(double tau) const {
    for (const auto& row : rows)
      if (tau < row.tau_max) return row;
    return rows.back();
  }

  bool accepts(const LinearTransfer& tr) const {
    const ThresholdBand& b = band(tr.tau);
    return tr.dv0_kms.norm() < b.dv_i_max_kms && tr.dvf_kms.norm() < b.dv_i_max_kms &&
           tr.dv_total_kms < b.dv_tot_max_kms;
  }

  void check() const {
    if (rows.empty()) throw std::invalid_argument("ThresholdTable: empty");
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (!(rows[i].tau_max > rows[i - 1].tau_max))
        throw std::invalid_argument("ThresholdTable: tau_max must be strictly increasing");
    if (std::isfinite(rows.back().tau_max))
      throw std::invalid_argument("ThresholdTable: last row must be open-ended");
  }
};

struct MinTimeTransfer {
  double tau = 0.0;  // Myr
  LinearTransfer transfer;
};

// Line search on the 1-Myr time grid for the smallest flight time whose
// two-impulse linear cost passes the threshold band. Grid points where
// N(tau) is singular are skipped. Arrival epochs reach at most t_end.
inline std::optional<MinTimeTransfer> min_time_transfer(const RotationCurve& curve, const Star& a,
                                                        const Star& b, double t_dep,
                                                        const ThresholdTable& thresholds,
                                                        double t_end = kHorizonMyr) {
  const ShipState target = star_state(curve, b, t_dep);
  const ShipState ship = star_state(curve, a, t_dep);
  const RotatingFrame frame = RotatingFrame::around(target);
  Eigen::Vector3d dr0, dv0;
  frame.relative(ship, dr0, dv0);

  for (int tau = 1; t_dep + tau <= t_end; ++tau) {
    LinearTransfer tr;
    try {
      tr = two_impulse_linear(dr0, dv0, frame.omega, static_cast<double>(tau));
    } catch (const SingularPhasing&) {
      continue;
    }
    if (thresholds.accepts(tr)) return MinTimeTransfer{static_cast<double>(tau), tr};
  }
  return std::nullopt;
}

}  // namespace gsettle
