// Shared synthetic catalogs and settlement trees for refine/reopt tests.
#pragma once

#include <stdexcept>
#include <vector>

#include "gsettle/hcw.hpp"
#include "gsettle/rng.hpp"
#include "gsettle/score.hpp"
#include "gsettle/transfer.hpp"
#include "gsettle/tree.hpp"

namespace fixtures {

using namespace gsettle;

struct TreeFixture {
  RotationCurve curve = RotationCurve::flat(0.235);
  StarCatalog catalog;
  SettlementTree tree;
};

// Stars scattered along one radius band; a tree is grown greedily from star 1
// with minimum-time legs (earliest-settled fertile parent first), leaving the
// remaining stars unsettled.
inline TreeFixture build_cluster_tree(int n_settle, int n_total, std::uint64_t seed,
                                      double r0 = 20.0, double phase_spread = 0.25,
                                      double radius_spread = 0.45) {
  if (n_settle > n_total) throw std::invalid_argument("n_settle > n_total");
  TreeFixture fx;
  Rng rng(seed);
  std::vector<Star> stars;
  for (int i = 0; i < n_total; ++i) {
    Star s;
    s.id = i + 1;
    s.r = r0 + rng.uniform(-radius_spread, radius_spread);
    s.phase = rng.uniform(0.0, phase_spread);
    stars.push_back(s);
  }
  fx.catalog = StarCatalog(std::move(stars));

  const ThresholdTable thresholds = ThresholdTable::defaults();
  fx.tree.add_root(1, 0.0);
  std::vector<int> pool;
  for (int id = 2; id <= n_total; ++id) pool.push_back(id);
  std::vector<int> retired;

  while (fx.tree.size() < n_settle) {
    // Earliest-settled fertile star.
    int parent = -1;
    for (int i = 0; i < fx.tree.size(); ++i) {
      if (static_cast<int>(fx.tree.stars[i].offspring.size()) >= 3) continue;
      if (std::find(retired.begin(), retired.end(), i) != retired.end()) continue;
      if (parent < 0 || fx.tree.stars[i].settle_epoch < fx.tree.stars[parent].settle_epoch)
        parent = i;
    }
    if (parent < 0) break;

    const double t_dep = fx.tree.stars[parent].settle_epoch + kWaitMyr;
    int best_target = -1;
    double best_tau = 1e300;
    for (int tid : pool) {
      const auto mt = min_time_transfer(fx.curve, fx.catalog.by_id(fx.tree.stars[parent].star_id),
                                        fx.catalog.by_id(tid), t_dep, thresholds, 89.0);
      if (mt && mt->tau < best_tau) {
        best_tau = mt->tau;
        best_target = tid;
      }
    }
    if (best_target < 0) {
      retired.push_back(parent);
      continue;
    }
    TransferLeg leg = solve_two_impulse(fx.curve, fx.catalog.by_id(fx.tree.stars[parent].star_id),
                                        fx.catalog.by_id(best_target), t_dep, t_dep + best_tau);
    leg.vessel = VesselType::kSettler;
    leg.vessel_id = fx.tree.size();
    fx.tree.add_settlement(parent, best_target, t_dep + best_tau, std::move(leg));
    pool.erase(std::remove(pool.begin(), pool.end(), best_target), pool.end());
  }
  if (fx.tree.size() < n_settle)
    throw std::runtime_error("cluster fixture could not settle the requested star count");
  return fx;
}

}  // namespace fixtures
