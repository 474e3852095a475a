#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gsettle/catalog.hpp"
#include "gsettle/score.hpp"
#include "gsettle/transfer.hpp"
#include "gsettle/tree.hpp"

namespace gsettle {

// Move the settle epoch of every terminal star to the horizon where that is
// feasible and not more expensive; longer flight times usually cost less
// under the mission's tight schedule. Returns the number of pushed legs.
inline int push_terminal_epochs(SettlementTree& tree, const RotationCurve& curve,
                                const StarCatalog& catalog, const VesselRules& rules,
                                double solve_tol = 1e-10) {
  int pushed = 0;
  for (int i = 0; i < tree.size(); ++i) {
    SettledStar& s = tree.stars[i];
    if (!tree.is_terminal(i) || s.parent < 0 || !s.leg) continue;
    if (s.settle_epoch >= rules.horizon_myr) continue;
    TransferLeg trial;
    try {
      trial = solve_two_impulse(curve, catalog.by_id(s.leg->origin_id),
                                catalog.by_id(s.leg->dest_id), s.leg->t_dep, rules.horizon_myr,
                                solve_tol);
    } catch (const SolverError&) {
      continue;
    }
    const VesselLimits& lim = rules.of(s.leg->vessel);
    bool ok = trial.dv_used_kms() <= std::min(lim.dv_total_max_kms, s.leg->dv_used_kms());
    for (const Impulse& imp : trial.impulses) ok = ok && imp.dv_kms.norm() <= lim.dv_impulse_max_kms;
    if (!ok) continue;
    trial.vessel = s.leg->vessel;
    trial.vessel_id = s.leg->vessel_id;
    s.leg = std::move(trial);
    s.settle_epoch = rules.horizon_myr;
    ++pushed;
  }
  return pushed;
}

struct ReoptOptions {
  double delta_min = -0.2;  // Myr, per-iteration shift bounds
  double delta_max = 1.0;
  int iters = 10;
  double fd_step = 0.01;    // Myr, central-difference step
  double solve_tol = 1e-9;
  double tau_min = 0.5;     // Myr, flight-time floor
  int max_halvings = 6;
  int cd_sweeps = 64;
  double cd_tol = 1e-8;
};

struct ReoptResult {
  double dv_before_kms = 0.0;
  double dv_after_kms = 0.0;
  int accepted_iters = 0;
};

// Concurrent re-optimization of all transfer times. Per iteration: fit a
// per-leg quadratic DeltaV model in (t0, tf) by central differences, solve
// the box-constrained QP over the per-leg shifts delta (a leg's departure
// moves with its parent leg's arrival), apply, re-solve every leg in the
// full dynamics and accept only if the total DeltaV decreased, halving the
// shifts otherwise. Wait times are preserved exactly by construction.
inline ReoptResult reoptimize_times(SettlementTree& tree, const RotationCurve& curve,
                                    const StarCatalog& catalog, const VesselRules& rules,
                                    const ReoptOptions& opt = {}) {
  ReoptResult result;
  result.dv_before_kms = tree.total_dv_kms();
  result.dv_after_kms = result.dv_before_kms;

  // Legs are the incoming transfers of non-root stars.
  std::vector<int> leg_star;  // leg j -> tree index
  for (int i = 0; i < tree.size(); ++i)
    if (tree.stars[i].parent >= 0 && tree.stars[i].leg) leg_star.push_back(i);
  const int n_legs = static_cast<int>(leg_star.size());
  if (n_legs == 0) return result;

  // Adjacency: parent_leg[j] = the leg whose arrival star is leg j's
  // departure star (-1 when j departs from a root).
  std::vector<int> parent_leg(n_legs, -1);
  std::vector<std::vector<int>> child_legs(n_legs);
  {
    std::vector<int> leg_of_star(tree.size(), -1);
    for (int j = 0; j < n_legs; ++j) leg_of_star[leg_star[j]] = j;
    for (int j = 0; j < n_legs; ++j) {
      const int p = tree.stars[leg_star[j]].parent;
      parent_leg[j] = leg_of_star[p];
      if (parent_leg[j] >= 0) child_legs[parent_leg[j]].push_back(j);
    }
  }

  auto solve_leg = [&](int j, double t0, double tf, TransferLeg& out) {
    const TransferLeg& ref = *tree.stars[leg_star[j]].leg;
    try {
      out = solve_two_impulse(curve, catalog.by_id(ref.origin_id), catalog.by_id(ref.dest_id), t0,
                              tf, opt.solve_tol);
    } catch (const SolverError&) {
      return false;
    }
    out.vessel = ref.vessel;
    out.vessel_id = ref.vessel_id;
    return true;
  };

  auto leg_feasible = [&](const TransferLeg& leg) {
    const VesselLimits& lim = rules.of(leg.vessel);
    if (leg.dv_used_kms() > lim.dv_total_max_kms) return false;
    for (const Impulse& imp : leg.impulses)
      if (imp.dv_kms.norm() > lim.dv_impulse_max_kms) return false;
    return leg.t_arr <= rules.horizon_myr + 1e-12;
  };

  for (int iter = 0; iter < opt.iters; ++iter) {
    std::vector<double> t0(n_legs), tf(n_legs), dv0(n_legs);
    for (int j = 0; j < n_legs; ++j) {
      const TransferLeg& leg = *tree.stars[leg_star[j]].leg;
      t0[j] = leg.t_dep;
      tf[j] = leg.t_arr;
      dv0[j] = leg.dv_used_kms();
    }

    // Quadratic model coefficients per leg; a failed probe freezes the term.
    std::vector<double> g0(n_legs, 0.0), h0(n_legs, 0.0), gf(n_legs, 0.0), hf(n_legs, 0.0);
    const double h = opt.fd_step;
    for (int j = 0; j < n_legs; ++j) {
      TransferLeg plus, minus;
      if (solve_leg(j, t0[j] + h, tf[j], plus) && solve_leg(j, t0[j] - h, tf[j], minus)) {
        g0[j] = (plus.dv_used_kms() - minus.dv_used_kms()) / (2.0 * h);
        h0[j] = (plus.dv_used_kms() - 2.0 * dv0[j] + minus.dv_used_kms()) / (h * h);
      }
      if (solve_leg(j, t0[j], tf[j] + h, plus) && solve_leg(j, t0[j], tf[j] - h, minus)) {
        gf[j] = (plus.dv_used_kms() - minus.dv_used_kms()) / (2.0 * h);
        hf[j] = (plus.dv_used_kms() - 2.0 * dv0[j] + minus.dv_used_kms()) / (h * h);
      }
    }

    // Modeled DeltaV of leg j under shifts delta.
    auto model_dv = [&](int j, const std::vector<double>& delta) {
      const double dt0 = parent_leg[j] >= 0 ? delta[parent_leg[j]] : 0.0;
      const double dtf = delta[j];
      return dv0[j] + g0[j] * dt0 + 0.5 * h0[j] * dt0 * dt0 + gf[j] * dtf + 0.5 * hf[j] * dtf * dtf;
    };

    // Projected coordinate descent on the separable objective; duration and
    // budget constraints couple a leg with its parent and children.
    std::vector<double> delta(n_legs, 0.0);
    for (int sweep = 0; sweep < opt.cd_sweeps; ++sweep) {
      double max_change = 0.0;
      for (int i = 0; i < n_legs; ++i) {
        double lo = opt.delta_min;
        double hi = std::min(opt.delta_max, rules.horizon_myr - tf[i]);
        // Duration floors: own tau and each child's tau.
        const double dparent = parent_leg[i] >= 0 ? delta[parent_leg[i]] : 0.0;
        lo = std::max(lo, opt.tau_min - (tf[i] - t0[i]) + dparent);
        for (int j : child_legs[i])
          hi = std::min(hi, (tf[j] - t0[j]) + delta[j] - opt.tau_min);
        if (lo > hi) continue;

        // Separable 1-D quadratic: A x^2 + B x.
        double a = 0.5 * hf[i], b = gf[i];
        for (int j : child_legs[i]) {
          a += 0.5 * h0[j];
          b += g0[j];
        }
        double x;
        if (a > 1e-12) {
          x = std::clamp(-b / (2.0 * a), lo, hi);
        } else {
          const double at_lo = a * lo * lo + b * lo;
          const double at_hi = a * hi * hi + b * hi;
          x = at_lo <= at_hi ? lo : hi;
        }

        // Keep the modeled DeltaV of the affected legs inside the budget by
        // bisecting toward the current (feasible) value.
        const double prev = delta[i];
        auto budget_ok = [&]() {
          const double cap = rules.of(tree.stars[leg_star[i]].leg->vessel).dv_total_max_kms;
          if (model_dv(i, delta) >= cap) return false;
          for (int j : child_legs[i])
            if (model_dv(j, delta) >= rules.of(tree.stars[leg_star[j]].leg->vessel).dv_total_max_kms)
              return false;
          return true;
        };
        delta[i] = x;
        for (int bisect = 0; bisect < 20 && !budget_ok(); ++bisect)
          delta[i] = 0.5 * (delta[i] + prev);
        if (!budget_ok()) delta[i] = prev;
        max_change = std::max(max_change, std::fabs(delta[i] - prev));
      }
      if (max_change < opt.cd_tol) break;
    }

    double norm = 0.0;
    for (double d : delta) norm = std::max(norm, std::fabs(d));
    if (norm < 1e-12) break;  // model fixed point

    // Apply, re-solve, accept only on an actual decrease.
    bool accepted = false;
    for (int attempt = 0; attempt <= opt.max_halvings; ++attempt) {
      std::vector<TransferLeg> trial(n_legs);
      bool ok = true;
      double total = 0.0;
      for (int j = 0; j < n_legs && ok; ++j) {
        const double nt0 = t0[j] + (parent_leg[j] >= 0 ? delta[parent_leg[j]] : 0.0);
        const double ntf = tf[j] + delta[j];
        ok = ntf > nt0 && ntf <= rules.horizon_myr + 1e-12 && solve_leg(j, nt0, ntf, trial[j]) &&
             leg_feasible(trial[j]);
        if (ok) total += trial[j].dv_used_kms();
      }
      if (ok && total < result.dv_after_kms - 1e-9) {
        for (int j = 0; j < n_legs; ++j) {
          SettledStar& s = tree.stars[leg_star[j]];
          s.leg = std::move(trial[j]);
          s.settle_epoch = s.leg->t_arr;
        }
        result.dv_after_kms = total;
        result.accepted_iters++;
        accepted = true;
        break;
      }
      for (double& d : delta) d *= 0.5;
    }
    if (!accepted) break;  // no progress at any scale
  }
  return result;
}

}  // namespace gsettle
