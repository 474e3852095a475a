#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gsettle/catalog.hpp"
#include "gsettle/hcw.hpp"
#include "gsettle/propagate.hpp"
#include "gsettle/tree.hpp"
#include "gsettle/units.hpp"

namespace gsettle {

struct SolverError : std::runtime_error {
  double residual_kpc;
  SolverError(const std::string& msg, double res) : std::runtime_error(msg), residual_kpc(res) {}
};

// Full-dynamics two-impulse boundary-value problem: find the departure
// velocity whose coast from star a at t0 meets star b's position at tf.
// Newton shooting with the variational STM; the first guess comes from the
// linear rendezvous solution.
inline TransferLeg solve_two_impulse(const RotationCurve& curve, const Star& a, const Star& b,
                                     double t0, double tf, double tol = 1e-10, int max_iter = 60) {
  if (!(tf > t0)) throw std::invalid_argument("solve_two_impulse: tf must exceed t0");
  const ShipState dep = star_state(curve, a, t0);
  const ShipState arr_target = star_state(curve, b, tf);
  const double tau = tf - t0;

  TransferLeg leg;
  leg.origin_id = a.id;
  leg.dest_id = b.id;
  leg.t_dep = t0;
  leg.t_arr = tf;

  if (a.id == b.id) {
    leg.impulses = {{t0, Eigen::Vector3d::Zero()}, {tf, Eigen::Vector3d::Zero()}};
    return leg;
  }

  // Initial guess from the target-frame linear solution, falling back to the
  // inertial chord when the linear problem is singular at this tau.
  Eigen::Vector3d v_dep;
  {
    const ShipState target0 = star_state(curve, b, t0);
    const RotatingFrame frame = RotatingFrame::around(target0);
    Eigen::Vector3d dr0, dv0;
    frame.relative(dep, dr0, dv0);
    try {
      const LinearTransfer lin = two_impulse_linear(dr0, dv0, frame.omega, tau);
      const Eigen::Vector3d dv0_plus = dv0 + lin.dv0_kms / kKmsPerKpcMyr;
      v_dep = frame.inertial_velocity(dr0, dv0_plus);
    } catch (const SingularPhasing&) {
      v_dep = (arr_target.pos - dep.pos) / tau;
    }
  }

  double best_res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    ShipState trial = dep;
    trial.vel = v_dep;
    const StmResult prop = propagate_with_stm(curve, trial, tf, tol);
    const Eigen::Vector3d res = prop.state.pos - arr_target.pos;
    const double rnorm = res.norm();
    if (rnorm < tol * 10.0 || rnorm < 1e-12) {
      leg.impulses = {{t0, (v_dep - dep.vel) * kKmsPerKpcMyr},
                      {tf, (arr_target.vel - prop.state.vel) * kKmsPerKpcMyr}};
      return leg;
    }
    const Eigen::Matrix3d jac = prop.stm.topRightCorner<3, 3>();  // d r(tf) / d v(t0)
    Eigen::Vector3d step = jac.fullPivLu().solve(-res);
    // Damped update: shrink the step while the residual grows.
    double alpha = 1.0;
    Eigen::Vector3d v_try;
    double r_try = std::numeric_limits<double>::infinity();
    for (int ls = 0; ls < 8; ++ls) {
      v_try = v_dep + alpha * step;
      ShipState probe = dep;
      probe.vel = v_try;
      const ShipState end = propagate_ship(curve, probe, tf, tol);
      r_try = (end.pos - arr_target.pos).norm();
      if (r_try < rnorm) break;
      alpha *= 0.5;
    }
    v_dep = v_try;
    best_res = std::min(best_res, r_try);
  }
  throw SolverError("solve_two_impulse: no convergence", best_res);
}

// Velocity-adjoint history along a two-impulse coast. Boundary conditions
// pin the primer to the unit impulse directions at both ends; the linear
// adjoint BVP is solved with the adjoint transition matrix.
struct PrimerHistory {
  std::vector<double> epochs;
  std::vector<Eigen::Vector3d> lambda_r;
  std::vector<Eigen::Vector3d> lambda_v;
  double max_interior = 0.0;

  // Two-impulse optimality test: interior primer magnitude must not exceed 1.
  bool optimal(double eps = 1e-3) const { return max_interior <= 1.0 + eps; }
};

inline PrimerHistory primer_history(const RotationCurve& curve, const StarCatalog& catalog,
                                    const TransferLeg& leg, int samples = 100, double tol = 1e-10) {
  if (leg.impulses.size() != 2) throw std::invalid_argument("primer_history: leg must have exactly 2 impulses");
  const Eigen::Vector3d dv0 = leg.impulses.front().dv_kms;
  const Eigen::Vector3d dvf = leg.impulses.back().dv_kms;
  if (dv0.norm() == 0.0 || dvf.norm() == 0.0)
    throw std::domain_error("primer_history: zero-magnitude impulse");
  const Eigen::Vector3d lv0 = dv0.normalized();
  const Eigen::Vector3d lvf = dvf.normalized();

  // Post-impulse coast state at departure.
  ShipState coast = star_state(curve, catalog.by_id(leg.origin_id), leg.t_dep);
  coast.vel += dv0 / kKmsPerKpcMyr;

  const StmResult full = propagate_adjoint_stm(curve, coast, leg.t_arr, tol);
  const Eigen::Matrix3d psi_vr = full.stm.bottomLeftCorner<3, 3>();
  const Eigen::Matrix3d psi_vv = full.stm.bottomRightCorner<3, 3>();
  const Eigen::Vector3d lr0 = psi_vr.fullPivLu().solve(lvf - psi_vv * lv0);

  PrimerHistory out;
  out.epochs.reserve(samples + 1);
  ShipState s = coast;
  Eigen::Matrix<double, 6, 6> psi = Eigen::Matrix<double, 6, 6>::Identity();
  const Eigen::Matrix<double, 6, 1> adj0 = (Eigen::Matrix<double, 6, 1>() << lr0, lv0).finished();
  for (int i = 0; i <= samples; ++i) {
    const double t = leg.t_dep + (leg.t_arr - leg.t_dep) * i / samples;
    if (i > 0) {
      const StmResult seg = propagate_adjoint_stm(curve, s, t, tol);
      s = seg.state;
      psi = seg.stm * psi;
    }
    const Eigen::Matrix<double, 6, 1> adj = psi * adj0;
    out.epochs.push_back(t);
    out.lambda_r.push_back(adj.head<3>());
    out.lambda_v.push_back(adj.tail<3>());
    if (i > 0 && i < samples)
      out.max_interior = std::max(out.max_interior, adj.tail<3>().norm());
  }
  return out;
}

// Re-solve the incoming leg of every non-root star from its parentage and
// settle epochs. Vessel ids are assigned in settle order.
inline void solve_tree_legs(SettlementTree& tree, const RotationCurve& curve,
                            const StarCatalog& catalog, double tol = 1e-10) {
  int vessel_id = 0;
  for (int idx : tree.settle_order()) {
    SettledStar& s = tree.stars[idx];
    if (s.parent < 0) continue;
    const SettledStar& p = tree.stars[s.parent];
    const double t_dep = s.leg ? s.leg->t_dep : p.settle_epoch + kWaitMyr;
    TransferLeg leg = solve_two_impulse(curve, catalog.by_id(p.star_id),
                                        catalog.by_id(s.star_id), t_dep, s.settle_epoch, tol);
    leg.vessel = VesselType::kSettler;
    leg.vessel_id = ++vessel_id;
    s.leg = std::move(leg);
  }
}

}  // namespace gsettle
