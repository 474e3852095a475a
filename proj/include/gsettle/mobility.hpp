#pragma once

#include <cmath>
#include <vector>

#include "gsettle/catalog.hpp"
#include "gsettle/hcw.hpp"
#include "gsettle/units.hpp"

namespace gsettle {

struct MobilityPoint {
  double tau = 0.0;       // allowed flight time, Myr
  double dr = 0.0;        // radial displacement, kpc
  double dtheta_f = 0.0;  // displacement in final polar angle, rad
};

// Reachable (dr, dtheta_f) displacements for a vessel departing from radius
// r0 at epoch t0, per allowed flight time. A displacement counts as
// reachable when some flight time on the 1-Myr grid up to tau yields a
// two-impulse linear cost within the vessel limits. Output rows are
// plot-ready contour data.
inline std::vector<MobilityPoint> mobility_map(const RotationCurve& curve, double r0, double t0,
                                               const std::vector<int>& taus, double dv_i_max_kms,
                                               double dv_tot_max_kms,
                                               const std::vector<double>& dr_grid,
                                               const std::vector<double>& dth_grid) {
  std::vector<MobilityPoint> out;
  if (taus.empty()) return out;

  Star depart;
  depart.id = -1;
  depart.r = r0;
  const double om0 = curve.omega(r0);

  const int tau_max = *std::max_element(taus.begin(), taus.end());
  // min feasible grid time per displacement; 0 = unreachable
  std::vector<std::vector<int>> min_tau(dr_grid.size(), std::vector<int>(dth_grid.size(), 0));

  for (std::size_t i = 0; i < dr_grid.size(); ++i) {
    const double r1 = r0 + dr_grid[i];
    if (r1 < kRadiusMinKpc || r1 > kRadiusMaxKpc) continue;
    const double om1 = curve.omega(r1);
    for (std::size_t j = 0; j < dth_grid.size(); ++j) {
      if (dr_grid[i] == 0.0 && dth_grid[j] == 0.0) {
        min_tau[i][j] = taus.front() > 0 ? 1 : 0;
        continue;
      }
      // Phase the target so its final polar angle differs by dtheta_f.
      Star target;
      target.id = -2;
      target.r = r1;
      target.phase = wrap_pi(dth_grid[j] + (om0 - om1) * kHorizonMyr);

      const ShipState tstate = star_state(curve, target, t0);
      const ShipState ship = star_state(curve, depart, t0);
      const RotatingFrame frame = RotatingFrame::around(tstate);
      Eigen::Vector3d rel_r, rel_v;
      frame.relative(ship, rel_r, rel_v);
      for (int tau = 1; tau <= tau_max; ++tau) {
        LinearTransfer tr;
        try {
          tr = two_impulse_linear(rel_r, rel_v, frame.omega, static_cast<double>(tau));
        } catch (const SingularPhasing&) {
          continue;
        }
        if (tr.dv0_kms.norm() <= dv_i_max_kms && tr.dvf_kms.norm() <= dv_i_max_kms &&
            tr.dv_total_kms <= dv_tot_max_kms) {
          min_tau[i][j] = tau;
          break;
        }
      }
    }
  }

  for (int tau : taus)
    for (std::size_t i = 0; i < dr_grid.size(); ++i)
      for (std::size_t j = 0; j < dth_grid.size(); ++j)
        if (min_tau[i][j] > 0 && min_tau[i][j] <= tau)
          out.push_back({static_cast<double>(tau), dr_grid[i], dth_grid[j]});
  return out;
}

}  // namespace gsettle
