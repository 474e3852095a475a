#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsettle/catalog.hpp"
#include "gsettle/density.hpp"
#include "gsettle/grid.hpp"
#include "gsettle/propagate.hpp"
#include "gsettle/tree.hpp"
#include "gsettle/units.hpp"

namespace gsettle {

// Kernel widths, evaluation points and target densities of the uniformity
// errors. Radial points R_k = 2 + k (k = 0..30), angular points
// Theta_k = -pi + k*pi/16 (k = 0..31).
struct DensityErrorConfig {
  double s_r = 1.0;
  double s_theta = kPi / 16.0;
  RadialDensity g_r = RadialDensity::linear();
  AngularDensity g_theta{};

  static std::vector<double> radial_points() {
    std::vector<double> pts(31);
    for (int k = 0; k <= 30; ++k) pts[k] = 2.0 + k;
    return pts;
  }
  static std::vector<double> angular_points() {
    std::vector<double> pts(32);
    for (int k = 0; k < 32; ++k) pts[k] = -kPi + k * kPi / 16.0;
    return pts;
  }
};

// E = sum_k (f(X_k)/g(X_k) - 1)^2 with f the triangular kernel density of
// the sample. Distances are taken on the circle when wrap is set.
inline double density_error(std::span<const double> values, std::span<const double> eval_points,
                            double s, const std::function<double(double)>& g, bool wrap) {
  if (values.empty()) throw std::invalid_argument("density_error: empty sample");
  const double n = static_cast<double>(values.size());
  double err = 0.0;
  for (double x : eval_points) {
    double f = 0.0;
    for (double v : values)
      f += wrap ? triangular_kernel_wrapped(x, v, s) : triangular_kernel(x, v, s);
    f /= n;
    const double ratio = f / g(x);
    err += (ratio - 1.0) * (ratio - 1.0);
  }
  return err;
}

struct VesselLimits {
  int max_impulses = 0;
  double dv_impulse_max_kms = 0.0;
  double dv_total_max_kms = 0.0;
};

struct VesselRules {
  VesselLimits settler{5, 175.0, 400.0};
  VesselLimits mother{3, 200.0, 500.0};
  VesselLimits fast{2, 750.0, 1500.0};
  double wait_myr = kWaitMyr;
  double horizon_myr = kHorizonMyr;
  int settlers_per_star = 3;

  const VesselLimits& of(VesselType v) const {
    switch (v) {
      case VesselType::kSettler: return settler;
      case VesselType::kMother: return mother;
      case VesselType::kFast: return fast;
    }
    return settler;
  }
};

struct MeritReport {
  int n = 0;
  double e_r = 0.0, e_theta = 0.0;
  double j2 = 0.0;
  double dv_used_kms = 0.0, dv_max_kms = 0.0;
  double j3 = 0.0;
  double j = 0.0;
};

// Radii and horizon angles of the settled stars.
inline void settled_samples(const SettlementTree& tree, const RotationCurve& curve,
                            const StarCatalog& catalog, std::vector<double>& radii,
                            std::vector<double>& thetas) {
  radii.clear();
  thetas.clear();
  radii.reserve(tree.stars.size());
  thetas.reserve(tree.stars.size());
  for (const SettledStar& s : tree.stars) {
    const Star& star = catalog.by_id(s.star_id);
    radii.push_back(star.r);
    thetas.push_back(theta_final(curve, star));
  }
}

// J2 = N / (1 + 1e-4 N (E_r + E_theta)), J3 = DVmax / DVused, J = J2 J3.
// DVmax sums the budgets of the employed vessels; root settlements carry no
// vessel here and contribute nothing.
inline MeritReport merit(const SettlementTree& tree, const RotationCurve& curve,
                         const StarCatalog& catalog, const VesselRules& rules,
                         const DensityErrorConfig& density) {
  if (tree.empty()) throw std::domain_error("merit: empty solution");

  MeritReport rep;
  rep.n = tree.size();

  std::vector<double> radii, thetas;
  settled_samples(tree, curve, catalog, radii, thetas);
  const auto rpts = DensityErrorConfig::radial_points();
  const auto tpts = DensityErrorConfig::angular_points();
  rep.e_r = density_error(radii, rpts, density.s_r, std::cref(density.g_r), false);
  rep.e_theta = density_error(thetas, tpts, density.s_theta, std::cref(density.g_theta), true);
  rep.j2 = rep.n / (1.0 + 1e-4 * rep.n * (rep.e_r + rep.e_theta));

  for (const SettledStar& s : tree.stars) {
    if (!s.leg) continue;
    rep.dv_used_kms += s.leg->dv_used_kms();
    rep.dv_max_kms += rules.of(s.leg->vessel).dv_total_max_kms;
  }
  if (rep.dv_used_kms <= 0.0) throw std::domain_error("merit: zero DeltaV used");
  rep.j3 = rep.dv_max_kms / rep.dv_used_kms;
  rep.j = rep.j2 * rep.j3;
  return rep;
}

// Full rules validation. Returns human-readable violations; empty = valid.
// Every leg is re-propagated end to end and must meet its destination star
// within miss_tol_kpc.
inline std::vector<std::string> validate(const SettlementTree& tree, const RotationCurve& curve,
                                         const StarCatalog& catalog, const VesselRules& rules,
                                         double miss_tol_kpc = 1e-5, double prop_tol = 1e-11) {
  std::vector<std::string> out;
  auto fail = [&out](const std::string& msg) { out.push_back(msg); };

  std::unordered_map<int, int> seen;  // star id -> tree index
  for (int i = 0; i < tree.size(); ++i) {
    const SettledStar& s = tree.stars[i];
    if (!catalog.contains(s.star_id)) {
      fail("unknown star: id " + std::to_string(s.star_id));
      continue;
    }
    if (!seen.emplace(s.star_id, i).second)
      fail("duplicate settlement: star " + std::to_string(s.star_id));
    if (s.settle_epoch < 0.0 || s.settle_epoch > rules.horizon_myr)
      fail("horizon: star " + std::to_string(s.star_id) + " settles at " +
           std::to_string(s.settle_epoch) + " Myr");
    if (static_cast<int>(s.offspring.size()) > rules.settlers_per_star)
      fail("offspring cap: star " + std::to_string(s.star_id) + " has " +
           std::to_string(s.offspring.size()) + " departures");
    if (s.parent >= 0) {
      if (s.parent >= tree.size()) {
        fail("broken parent index on star " + std::to_string(s.star_id));
        continue;
      }
      if (!s.leg) {
        fail("missing leg: star " + std::to_string(s.star_id));
        continue;
      }
      const SettledStar& p = tree.stars[s.parent];
      const TransferLeg& leg = *s.leg;
      if (leg.origin_id != p.star_id || leg.dest_id != s.star_id)
        fail("leg endpoints disagree with tree on star " + std::to_string(s.star_id));
      if (leg.t_dep + 1e-9 < p.settle_epoch + rules.wait_myr)
        fail("wait time: departure to star " + std::to_string(s.star_id) + " at " +
             std::to_string(leg.t_dep) + " before parent settle + 2 Myr");
      if (std::fabs(leg.t_arr - s.settle_epoch) > 1e-9)
        fail("settle epoch differs from leg arrival on star " + std::to_string(s.star_id));
      if (!(leg.t_arr > leg.t_dep))
        fail("non-positive flight time on star " + std::to_string(s.star_id));

      const VesselLimits& lim = rules.of(leg.vessel);
      if (static_cast<int>(leg.impulses.size()) > lim.max_impulses)
        fail("impulse count: leg to star " + std::to_string(s.star_id));
      double prev = leg.t_dep, total = 0.0;
      bool epochs_ok = true;
      for (const Impulse& imp : leg.impulses) {
        if (imp.epoch + 1e-9 < prev || imp.epoch > leg.t_arr + 1e-9) epochs_ok = false;
        prev = std::max(prev, imp.epoch);
        const double mag = imp.dv_kms.norm();
        if (mag > lim.dv_impulse_max_kms + 1e-9)
          fail("impulse magnitude: leg to star " + std::to_string(s.star_id));
        total += mag;
      }
      if (!epochs_ok) fail("impulse epochs outside leg window on star " + std::to_string(s.star_id));
      if (total > lim.dv_total_max_kms + 1e-9)
        fail("vessel budget: leg to star " + std::to_string(s.star_id));

      // End-to-end re-propagation.
      try {
        ShipState ship = star_state(curve, catalog.by_id(leg.origin_id), leg.t_dep);
        for (const Impulse& imp : leg.impulses) {
          ship = propagate_ship(curve, ship, imp.epoch, prop_tol);
          ship.vel += imp.dv_kms / kKmsPerKpcMyr;
        }
        ship = propagate_ship(curve, ship, leg.t_arr, prop_tol);
        const ShipState dest = star_state(curve, catalog.by_id(leg.dest_id), leg.t_arr);
        if ((ship.pos - dest.pos).norm() > miss_tol_kpc)
          fail("terminal miss: leg to star " + std::to_string(s.star_id) + " off by " +
               std::to_string((ship.pos - dest.pos).norm()) + " kpc");
        else if ((ship.vel - dest.vel).norm() > 1e-5)
          fail("terminal velocity mismatch: leg to star " + std::to_string(s.star_id));
      } catch (const std::exception& e) {
        fail(std::string("re-propagation failed on star ") + std::to_string(s.star_id) + ": " +
             e.what());
      }
    }
  }

  // Connectivity: every star reaches a root through parents settled earlier.
  for (int i = 0; i < tree.size(); ++i) {
    int hops = 0;
    int j = i;
    while (tree.stars[j].parent >= 0 && hops <= tree.size()) {
      const int p = tree.stars[j].parent;
      if (tree.stars[p].settle_epoch > tree.stars[j].settle_epoch)
        fail("parent settles after offspring: star " + std::to_string(tree.stars[j].star_id));
      j = p;
      ++hops;
    }
    if (hops > tree.size()) {
      fail("parent cycle detected at star " + std::to_string(tree.stars[i].star_id));
      break;
    }
  }
  return out;
}

// Theoretical optimum occupancy: 512*n stars, equal over the 32 slices,
// ring totals linear in the ring mid-radius. Largest-remainder rounding
// keeps every marginal exact.
struct TargetDistribution {
  std::vector<int> ring_totals;   // 30
  std::vector<int> slice_totals;  // 32
  std::vector<int> cells;         // row-major 30 x 32
};

inline TargetDistribution target_distribution(int n_multiple) {
  if (n_multiple < 1) throw std::invalid_argument("target_distribution: n_multiple must be >= 1");
  const int total = 512 * n_multiple;
  TargetDistribution out;
  out.slice_totals.assign(kNumSlices, total / kNumSlices);

  // Ring weights proportional to the mid radius 1.5 + k_r; sum = 510.
  out.ring_totals.assign(kNumRings, 0);
  std::vector<std::pair<double, int>> rem(kNumRings);
  int assigned = 0;
  for (int k = 0; k < kNumRings; ++k) {
    const double share = total * (1.5 + (k + 1)) / 510.0;
    out.ring_totals[k] = static_cast<int>(std::floor(share));
    assigned += out.ring_totals[k];
    rem[k] = {share - std::floor(share), k};
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < total - assigned; ++i) out.ring_totals[rem[i].second]++;

  // Fill rows against remaining slice capacity so both marginals hold.
  out.cells.assign(kNumRings * kNumSlices, 0);
  std::vector<int> cap(out.slice_totals);
  for (int k = 0; k < kNumRings; ++k) {
    const int row_total = out.ring_totals[k];
    double cap_sum = 0.0;
    for (int c : cap) cap_sum += c;
    std::vector<std::pair<double, int>> frac(kNumSlices);
    int placed = 0;
    for (int c = 0; c < kNumSlices; ++c) {
      const double share = cap_sum > 0.0 ? row_total * cap[c] / cap_sum : 0.0;
      int v = std::min(static_cast<int>(std::floor(share)), cap[c]);
      out.cells[k * kNumSlices + c] = v;
      placed += v;
      frac[c] = {share - std::floor(share), c};
    }
    std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    int left = row_total - placed;
    for (int pass = 0; left > 0 && pass < 2; ++pass) {
      for (const auto& [f, c] : frac) {
        if (left == 0) break;
        if (out.cells[k * kNumSlices + c] < cap[c]) {
          out.cells[k * kNumSlices + c]++;
          --left;
        }
      }
    }
    for (int c = 0; c < kNumSlices; ++c) cap[c] -= out.cells[k * kNumSlices + c];
  }
  return out;
}

}  // namespace gsettle
