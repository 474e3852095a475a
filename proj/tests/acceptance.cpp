// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line. Run all or a single one:
//   acceptance [--criterion N] [--tool path/to/gsettle]
// The end-to-end criterion (9) drives the CLI binary and needs --tool.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsettle/config.hpp"
#include "gsettle/hcw.hpp"
#include "gsettle/refine.hpp"
#include "gsettle/reopt.hpp"
#include "gsettle/rng.hpp"
#include "gsettle/score.hpp"
#include "gsettle/search.hpp"
#include "gsettle/solution_io.hpp"
#include "gsettle/transfer.hpp"

using namespace gsettle;
namespace fs = std::filesystem;

namespace {

std::string g_tool;

// --- shared helpers -------------------------------------------------------

struct Check {
  bool ok = true;
  std::ostringstream log;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      log << "    FAILED: " << what << "\n";
    }
  }
};

StarCatalog pair_catalog(const Star& a, const Star& b) {
  return StarCatalog(std::vector<Star>{a, b});
}

// Random nearby planar pair with separation below sep_max at epoch t0.
bool sample_close_pair(Rng& rng, const RotationCurve& curve, double sep_max, Star& a, Star& b,
                       double& t0) {
  a = Star{1, rng.uniform(6.0, 28.0), 0.0, 0.0, rng.uniform(-kPi, kPi)};
  const double dr = rng.uniform(-0.8 * sep_max, 0.8 * sep_max);
  const double arc = rng.uniform(-0.8 * sep_max, 0.8 * sep_max);
  b = Star{2, a.r + dr, 0.0, 0.0, a.phase + arc / a.r};
  if (b.r < 2.0 || b.r > 32.0) return false;
  t0 = rng.uniform(0.0, 40.0);
  const ShipState sa = star_state(curve, a, t0);
  const ShipState sb = star_state(curve, b, t0);
  return (sa.pos - sb.pos).norm() < sep_max;
}

// Greedy 3-ary tree over stub legs; pruning reads only shapes and samples.
SettlementTree stub_tree(const StarCatalog& catalog) {
  SettlementTree tree;
  tree.add_root(catalog.stars().front().id, 0.0);
  for (std::size_t k = 1; k < catalog.size(); ++k) {
    const int sid = catalog.stars()[k].id;
    int parent = -1;
    for (int i = 0; i < tree.size(); ++i) {
      if (static_cast<int>(tree.stars[i].offspring.size()) >= 3) continue;
      if (parent < 0 || tree.stars[i].settle_epoch < tree.stars[parent].settle_epoch) parent = i;
    }
    TransferLeg leg;
    leg.vessel = VesselType::kSettler;
    leg.origin_id = tree.stars[parent].star_id;
    leg.dest_id = sid;
    leg.t_dep = tree.stars[parent].settle_epoch + kWaitMyr;
    leg.t_arr = leg.t_dep + 1.0;
    leg.impulses = {{leg.t_dep, Eigen::Vector3d(20, 0, 0)}, {leg.t_arr, Eigen::Vector3d(0, 20, 0)}};
    tree.add_settlement(parent, sid, leg.t_arr, std::move(leg));
  }
  return tree;
}

// Fully solved minimum-time tree grown from star 1 (shared by criteria 6/8).
SettlementTree grown_tree(const RotationCurve& curve, const StarCatalog& catalog, int n_settle) {
  const ThresholdTable thresholds = ThresholdTable::defaults();
  SettlementTree tree;
  tree.add_root(1, 0.0);
  std::vector<int> pool;
  for (const Star& s : catalog.stars())
    if (s.id != 1) pool.push_back(s.id);
  std::vector<int> retired;
  while (tree.size() < n_settle) {
    int parent = -1;
    for (int i = 0; i < tree.size(); ++i) {
      if (static_cast<int>(tree.stars[i].offspring.size()) >= 3) continue;
      if (std::find(retired.begin(), retired.end(), i) != retired.end()) continue;
      if (parent < 0 || tree.stars[i].settle_epoch < tree.stars[parent].settle_epoch) parent = i;
    }
    if (parent < 0) break;
    const double t_dep = tree.stars[parent].settle_epoch + kWaitMyr;
    int best_target = -1;
    double best_tau = 1e300;
    for (int tid : pool) {
      const auto mt = min_time_transfer(curve, catalog.by_id(tree.stars[parent].star_id),
                                        catalog.by_id(tid), t_dep, thresholds, 89.0);
      if (mt && mt->tau < best_tau) {
        best_tau = mt->tau;
        best_target = tid;
      }
    }
    if (best_target < 0) {
      retired.push_back(parent);
      continue;
    }
    TransferLeg leg = solve_two_impulse(curve, catalog.by_id(tree.stars[parent].star_id),
                                        catalog.by_id(best_target), t_dep, t_dep + best_tau);
    leg.vessel = VesselType::kSettler;
    leg.vessel_id = tree.size();
    tree.add_settlement(parent, best_target, t_dep + best_tau, std::move(leg));
    pool.erase(std::remove(pool.begin(), pool.end(), best_target), pool.end());
  }
  return tree;
}

// --- criterion 1 ----------------------------------------------------------

bool criterion_merit_arithmetic(Check& c) {
  auto j2 = [](double n, double er, double et) { return n / (1.0 + 1e-4 * n * (er + et)); };
  const double j2_submitted = j2(1013, 1.88968, 4.11965);
  c.require(std::fabs(j2_submitted - 630.069) / 630.069 < 0.005,
            "submitted-row J2 " + std::to_string(j2_submitted) + " vs 630.069 (0.5%)");
  const double j3 = 408.20e3 / 271.42e3;
  c.require(std::fabs(j3 - 1.504) < 1e-3, "J3 " + std::to_string(j3) + " vs 1.504 (1e-3)");
  const double j2_enhanced = j2(1220, 1.47322, 3.27067);
  c.require(std::fabs(j2_enhanced - 772.761) / 772.761 < 0.005,
            "enhanced-row J2 " + std::to_string(j2_enhanced) + " vs 772.761 (0.5%)");
  return c.ok;
}

// --- criterion 2 ----------------------------------------------------------

bool criterion_hcw_suite(Check& c) {
  // Identity at tau = 0, exact.
  const HcwStm id = hcw_stm(0.21, 0.0);
  c.require(id.M == Eigen::Matrix3d::Identity() && id.T == Eigen::Matrix3d::Identity(),
            "STM identity blocks at tau = 0");
  c.require(id.N.isZero(0.0) && id.S.isZero(0.0), "STM zero blocks at tau = 0");

  Rng rng(2024);
  double worst_semigroup = 0.0, worst_closure = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double omega = rng.uniform(0.008, 0.3);
    const double t1 = rng.uniform(0.5, 30.0), t2 = rng.uniform(0.5, 30.0);
    const Eigen::Matrix<double, 6, 6> ab = hcw_stm(omega, t2).full() * hcw_stm(omega, t1).full();
    worst_semigroup = std::max(
        worst_semigroup, (ab - hcw_stm(omega, t1 + t2).full()).cwiseAbs().maxCoeff());

    const double tau = rng.uniform(1.0, 25.0);
    const Eigen::Vector3d dr0(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.3, 0.3));
    const Eigen::Vector3d dv0(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.05, 0.05));
    try {
      const LinearTransfer tr = two_impulse_linear(dr0, dv0, omega, tau);
      const HcwStm stm = hcw_stm(omega, tau);
      const Eigen::Vector3d drf = stm.M * dr0 + stm.N * (dv0 + tr.dv0_kms / kKmsPerKpcMyr);
      worst_closure = std::max(worst_closure, drf.norm());
    } catch (const SingularPhasing&) {
    }
  }
  c.require(worst_semigroup <= 1e-9,
            "semigroup composition worst " + std::to_string(worst_semigroup));
  c.require(worst_closure <= 1e-9, "rendezvous closure worst " + std::to_string(worst_closure));
  return c.ok;
}

// --- criterion 3 ----------------------------------------------------------

bool criterion_linear_vs_full(Check& c) {
  const RotationCurve curve = RotationCurve::flat(0.235);
  Rng rng(31415);
  int tested = 0, within = 0;
  while (tested < 200) {
    Star a, b;
    double t0;
    if (!sample_close_pair(rng, curve, 1.0, a, b, t0)) continue;
    const int tau = rng.uniform_int(1, 10);

    const ShipState target0 = star_state(curve, b, t0);
    const RotatingFrame frame = RotatingFrame::around(target0);
    Eigen::Vector3d dr0, dv0;
    frame.relative(star_state(curve, a, t0), dr0, dv0);
    double dv_linear;
    try {
      dv_linear = two_impulse_linear(dr0, dv0, frame.omega, tau).dv_total_kms;
    } catch (const SingularPhasing&) {
      continue;
    }
    double dv_full;
    try {
      dv_full = solve_two_impulse(curve, a, b, t0, t0 + tau).dv_used_kms();
    } catch (const SolverError&) {
      continue;
    }
    ++tested;
    if (std::fabs(dv_linear - dv_full) < 5.0) ++within;
  }
  c.log << "    " << within << "/200 pairs within 5 km/s\n";
  c.require(within >= 190, "linear-vs-full agreement below 95%");
  return c.ok;
}

// --- criterion 4 ----------------------------------------------------------

bool criterion_full_solver(Check& c) {
  const RotationCurve curve = RotationCurve::flat(0.235);
  Rng rng(2718);
  int tested = 0;
  double worst_miss = 0.0, worst_primer = 0.0;
  while (tested < 100) {
    Star a, b;
    double t0;
    if (!sample_close_pair(rng, curve, 2.0, a, b, t0)) continue;
    const int tau = rng.uniform_int(3, 15);
    TransferLeg leg;
    try {
      leg = solve_two_impulse(curve, a, b, t0, t0 + tau);
    } catch (const SolverError&) {
      continue;
    }
    if (leg.impulses[0].dv_kms.norm() < 1e-9 || leg.impulses[1].dv_kms.norm() < 1e-9) continue;
    ++tested;

    ShipState ship = star_state(curve, a, t0);
    ship.vel += leg.impulses[0].dv_kms / kKmsPerKpcMyr;
    const ShipState end = propagate_ship(curve, ship, t0 + tau, 1e-12);
    worst_miss = std::max(worst_miss,
                          (end.pos - star_state(curve, b, t0 + tau).pos).norm());

    const PrimerHistory ph = primer_history(curve, pair_catalog(a, b), leg, 24);
    worst_primer = std::max(worst_primer, std::fabs(ph.lambda_v.front().norm() - 1.0));
    worst_primer = std::max(worst_primer, std::fabs(ph.lambda_v.back().norm() - 1.0));
  }
  c.log << "    worst terminal miss " << worst_miss << " kpc, worst boundary primer deviation "
        << worst_primer << "\n";
  c.require(worst_miss < 1e-6, "terminal miss above 1e-6 kpc");
  c.require(worst_primer <= 1e-9, "primer boundary magnitude off unit by more than 1e-9");
  return c.ok;
}

// --- criterion 5 ----------------------------------------------------------

struct MicroInstance {
  StarCatalog catalog;
  Zone zone;
};

bool make_micro_instance(Rng& rng, const RotationCurve& curve, MicroInstance& out) {
  const int n = rng.uniform_int(5, 8);
  const double r0 = rng.uniform(12.0, 26.0);
  std::vector<Star> stars;
  stars.push_back({1, r0, 0.0, 0.0, 0.0});
  for (int i = 1; i < n; ++i)
    stars.push_back({i + 1, r0 + rng.uniform(-0.4, 0.4), 0.0, 0.0, rng.uniform(0.0, 0.12)});
  StarCatalog catalog(std::move(stars));

  int kr_lo = 31, kr_hi = 0, kth_lo = 33, kth_hi = 0;
  for (const Star& s : catalog.stars()) {
    kr_lo = std::min(kr_lo, ring_of(s.r));
    kr_hi = std::max(kr_hi, ring_of(s.r));
    const int kth = slice_of(theta_final(curve, s));
    kth_lo = std::min(kth_lo, kth);
    kth_hi = std::max(kth_hi, kth);
  }
  if (kth_hi - kth_lo > 3) return false;  // keep the zone compact; no wrap here

  Zone z;
  z.name = "micro";
  z.kr_lo = kr_lo;
  z.kr_hi = kr_hi;
  z.kth_lo = kth_lo;
  z.kth_hi = kth_hi;
  z.root_star = 1;
  z.root_epoch = 0.0;
  z.target.assign(z.num_cells(), 0);
  std::vector<int> avail(z.num_cells(), 0);
  StarCellIndex cells(curve, catalog, z);
  for (const Star& s : catalog.stars())
    if (cells.of(s.id).zone_idx >= 0) avail[cells.of(s.id).zone_idx]++;
  int total = 0;
  for (int i = 0; i < z.num_cells(); ++i) {
    z.target[i] = std::min(avail[i], rng.uniform_int(0, 2));
    total += z.target[i];
  }
  if (total < 2) return false;
  out.catalog = std::move(catalog);
  out.zone = std::move(z);
  return true;
}

// Independent exhaustive enumeration over one-star extensions.
double micro_exhaustive_phi(const MicroInstance& inst, const StarCellIndex& cells,
                            const NeighborhoodCache& cache, bool& complete) {
  struct OState {
    std::vector<int> ids, parents, noff;
    std::vector<double> epochs;
    std::vector<int> occ;
  };
  const Zone& z = inst.zone;
  auto phi_of = [&](const OState& s) {
    double t_last = 0.0;
    for (double e : s.epochs) t_last = std::max(t_last, e);
    int gap = 0;
    for (int i = 0; i < z.num_cells(); ++i) gap += std::abs(s.occ[i] - z.target[i]);
    return gap + t_last / 100.0;
  };
  auto hash_of = [](const OState& s) {
    std::uint64_t h = 0;
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
      const std::uint64_t pid = s.parents[i] >= 0 ? s.ids[s.parents[i]] : 0;
      h ^= mix64(mix64(s.ids[i]) ^ mix64(pid) ^ std::bit_cast<std::uint64_t>(s.epochs[i]));
    }
    return h;
  };
  OState root;
  root.ids = {z.root_star};
  root.parents = {-1};
  root.noff = {0};
  root.epochs = {z.root_epoch};
  root.occ.assign(z.num_cells(), 0);
  if (cells.of(z.root_star).zone_idx >= 0) root.occ[cells.of(z.root_star).zone_idx] = 1;

  double best = phi_of(root);
  std::unordered_set<std::uint64_t> seen = {hash_of(root)};
  std::vector<OState> todo = {root};
  const std::size_t cap = 3000000;
  std::size_t visited = 1;
  while (!todo.empty() && visited < cap) {
    const OState state = std::move(todo.back());
    todo.pop_back();
    for (std::size_t i = 0; i < state.ids.size(); ++i) {
      if (state.noff[i] >= 3) continue;
      const int dep = static_cast<int>(std::llround(state.epochs[i] + kWaitMyr));
      const auto* nbhd = cache.find(state.ids[i], dep);
      if (!nbhd) continue;
      for (const auto& e : *nbhd) {
        if (std::find(state.ids.begin(), state.ids.end(), e.target_id) != state.ids.end()) continue;
        const int cell = cells.of(e.target_id).zone_idx;
        if (cell < 0 || state.occ[cell] >= z.target[cell]) continue;
        OState succ = state;
        succ.ids.push_back(e.target_id);
        succ.parents.push_back(static_cast<int>(i));
        succ.noff.push_back(0);
        succ.noff[i]++;
        succ.epochs.push_back(dep + e.tau);
        succ.occ[cell]++;
        best = std::min(best, phi_of(succ));
        if (seen.insert(hash_of(succ)).second) {
          todo.push_back(std::move(succ));
          ++visited;
        }
      }
    }
  }
  complete = visited < cap;
  return best;
}

bool criterion_bbfs_oracle(Check& c) {
  const RotationCurve curve = RotationCurve::flat(0.235);
  Rng instance_rng(60001);
  int instances = 0, runs = 0, hits = 0;
  while (instances < 20) {
    MicroInstance inst;
    if (!make_micro_instance(instance_rng, curve, inst)) continue;
    StarCellIndex cells(curve, inst.catalog, inst.zone);
    std::vector<int> ids = cells.zone_star_ids();
    std::vector<int> origins = ids;
    if (std::find(origins.begin(), origins.end(), 1) == origins.end()) origins.push_back(1);
    std::vector<int> epochs;
    for (int e = 0; e <= 89; ++e) epochs.push_back(e);
    const NeighborhoodCache cache =
        build_neighborhoods(curve, inst.catalog, origins, ids, epochs, ThresholdTable::defaults());

    bool complete = false;
    const double opt = micro_exhaustive_phi(inst, cells, cache, complete);
    if (!complete) continue;
    ++instances;

    SearchParams params;
    params.b_w = 500;
    params.b_f_max = 200;
    params.b_f = 60;
    params.expansion_cap = 3000;
    for (std::uint64_t seed : {11u, 22u, 33u}) {
      const SettlementState best = bbfs(inst.zone, cells, cache, params, seed);
      ++runs;
      if (std::fabs(best.phi() - opt) < 1e-9) ++hits;
    }
    // Deterministic replay on the first instance.
    if (instances == 1) {
      const SettlementState r1 = bbfs(inst.zone, cells, cache, params, 99);
      const SettlementState r2 = bbfs(inst.zone, cells, cache, params, 99);
      c.require(r1.id_hash == r2.id_hash && r1.phi() == r2.phi(),
                "deterministic replay with a fixed seed");
    }
  }
  c.log << "    " << hits << "/" << runs << " seeded runs attained the exhaustive optimum\n";
  c.require(hits * 10 >= runs * 9, "bbfs reached the exhaustive optimum in fewer than 90% of runs");
  return c.ok;
}

// --- criterion 6 ----------------------------------------------------------

// Direct coordinate descent on the actual re-solved costs: per pass, each
// leg tries a few arrival shifts inside the box (children departures move
// along), keeping any strict improvement.
double coordinate_descent_oracle(SettlementTree tree, const RotationCurve& curve,
                                 const StarCatalog& catalog, const VesselRules& rules, int passes) {
  for (int pass = 0; pass < passes; ++pass) {
    for (int i = 0; i < tree.size(); ++i) {
      if (tree.stars[i].parent < 0) continue;
      const double current_total = tree.total_dv_kms();
      double best_shift = 0.0;
      double best_total = current_total;
      for (double shift : {-0.2, -0.1, 0.25, 0.5, 1.0}) {
        SettlementTree trial = tree;
        SettledStar& s = trial.stars[i];
        const double new_arr = s.leg->t_arr + shift;
        if (new_arr <= s.leg->t_dep + 0.5 || new_arr > rules.horizon_myr) continue;
        bool ok = true;
        try {
          TransferLeg leg = solve_two_impulse(curve, catalog.by_id(s.leg->origin_id),
                                              catalog.by_id(s.leg->dest_id), s.leg->t_dep, new_arr);
          leg.vessel = s.leg->vessel;
          leg.vessel_id = s.leg->vessel_id;
          s.leg = std::move(leg);
          s.settle_epoch = new_arr;
          for (int child : s.offspring) {
            SettledStar& ch = trial.stars[child];
            const double dep = ch.leg->t_dep + shift;
            if (ch.leg->t_arr - dep < 0.5) {
              ok = false;
              break;
            }
            TransferLeg cleg = solve_two_impulse(curve, catalog.by_id(ch.leg->origin_id),
                                                 catalog.by_id(ch.leg->dest_id), dep,
                                                 ch.leg->t_arr);
            cleg.vessel = ch.leg->vessel;
            cleg.vessel_id = ch.leg->vessel_id;
            ch.leg = std::move(cleg);
          }
        } catch (const SolverError&) {
          ok = false;
        }
        if (!ok) continue;
        const VesselLimits& lim = rules.of(VesselType::kSettler);
        for (const SettledStar& s2 : trial.stars) {
          if (!s2.leg) continue;
          if (s2.leg->dv_used_kms() > lim.dv_total_max_kms) ok = false;
          for (const Impulse& imp : s2.leg->impulses)
            if (imp.dv_kms.norm() > lim.dv_impulse_max_kms) ok = false;
        }
        if (ok && trial.total_dv_kms() < best_total - 1e-9) {
          best_total = trial.total_dv_kms();
          best_shift = shift;
        }
      }
      if (best_shift != 0.0) {
        SettledStar& s = tree.stars[i];
        const double new_arr = s.leg->t_arr + best_shift;
        TransferLeg leg = solve_two_impulse(curve, catalog.by_id(s.leg->origin_id),
                                            catalog.by_id(s.leg->dest_id), s.leg->t_dep, new_arr);
        leg.vessel = s.leg->vessel;
        leg.vessel_id = s.leg->vessel_id;
        s.leg = std::move(leg);
        s.settle_epoch = new_arr;
        for (int child : s.offspring) {
          SettledStar& ch = tree.stars[child];
          TransferLeg cleg = solve_two_impulse(curve, catalog.by_id(ch.leg->origin_id),
                                               catalog.by_id(ch.leg->dest_id),
                                               ch.leg->t_dep + best_shift, ch.leg->t_arr);
          cleg.vessel = ch.leg->vessel;
          cleg.vessel_id = ch.leg->vessel_id;
          ch.leg = std::move(cleg);
        }
      }
    }
  }
  return tree.total_dv_kms();
}

bool criterion_sqp(Check& c) {
  const RotationCurve curve = RotationCurve::flat(0.235);
  Rng rng(808);
  std::vector<Star> stars;
  for (int i = 0; i < 70; ++i)
    stars.push_back({i + 1, 20.0 + rng.uniform(-0.45, 0.45), 0.0, 0.0, rng.uniform(0.0, 0.3)});
  const StarCatalog catalog(std::move(stars));
  SettlementTree tree = grown_tree(curve, catalog, 21);  // 20 legs
  c.require(tree.size() == 21, "synthetic 20-leg tree construction");
  if (!c.ok) return false;
  const VesselRules rules;
  push_terminal_epochs(tree, curve, catalog, rules);

  SettlementTree sqp_tree = tree;
  double prev = sqp_tree.total_dv_kms();
  ReoptOptions opt;
  opt.iters = 1;
  for (int iter = 0; iter < 10; ++iter) {
    const ReoptResult res = reoptimize_times(sqp_tree, curve, catalog, rules, opt);
    c.require(res.dv_after_kms <= prev + 1e-9,
              "total DeltaV increased at iteration " + std::to_string(iter));
    prev = res.dv_after_kms;
  }
  const double oracle = coordinate_descent_oracle(tree, curve, catalog, rules, 10);
  c.log << "    sqp " << prev << " km/s vs coordinate-descent oracle " << oracle << " km/s\n";
  c.require(prev <= oracle * 1.01, "SQP result misses the coordinate-descent oracle by over 1%");
  return c.ok;
}

// --- criterion 7 ----------------------------------------------------------

bool criterion_explosion_ilp(Check& c) {
  Rng rng(4242);
  int done = 0;
  while (done < 50) {
    std::vector<int> n0(9), xmax(9), rows(3), cols(3);
    int sum_xmax = 0;
    for (int i = 0; i < 9; ++i) {
      n0[i] = rng.uniform_int(0, 3);
      xmax[i] = rng.uniform_int(0, 2);
      sum_xmax += xmax[i];
    }
    if (sum_xmax > 9) continue;
    for (int i = 0; i < 3; ++i) {
      rows[i] = rng.uniform_int(0, 9);
      cols[i] = rng.uniform_int(0, 9);
    }
    ++done;
    const ExplosionPlan plan = explosion_ilp(n0, rows, cols, xmax, 3, 3);

    long best = LONG_MAX;
    std::vector<int> x(9, 0);
    std::function<void(int)> rec = [&](int cell) {
      if (cell == 9) {
        long obj = 0;
        for (int r = 0; r < 3; ++r) {
          long rs = 0;
          for (int cc = 0; cc < 3; ++cc) rs += n0[r * 3 + cc] + x[r * 3 + cc];
          obj += std::labs(rs - rows[r]);
        }
        for (int cc = 0; cc < 3; ++cc) {
          long cs = 0;
          for (int r = 0; r < 3; ++r) cs += n0[r * 3 + cc] + x[r * 3 + cc];
          obj += std::labs(cs - cols[cc]);
        }
        best = std::min(best, obj);
        return;
      }
      for (int v = 0; v <= xmax[cell]; ++v) {
        x[cell] = v;
        rec(cell + 1);
      }
      x[cell] = 0;
    };
    rec(0);
    c.require(plan.objective == best, "instance " + std::to_string(done) + ": greedy+exchange " +
                                          std::to_string(plan.objective) + " vs optimum " +
                                          std::to_string(best));
  }
  return c.ok;
}

// --- criterion 8 ----------------------------------------------------------

bool criterion_prune(Check& c) {
  Rng rng(9090);
  const RadialDensity g_r = RadialDensity::linear();
  std::vector<Star> stars;
  int id = 0;
  for (int i = 0; i < 180; ++i)
    stars.push_back({++id, g_r.sample(rng.uniform()), 0, 0, rng.uniform(-kPi, kPi)});
  const double om_ref = 0.235 / 20.5;
  for (int i = 0; i < 20; ++i)
    stars.push_back({++id, 20.5 + 0.01 * rng.uniform(), 0, 0,
                     wrap_pi(0.3 - om_ref * kHorizonMyr + 0.002 * rng.uniform())});
  const StarCatalog catalog(std::move(stars));
  const SettlementTree tree = stub_tree(catalog);
  const DensityErrorConfig density;
  const RotationCurve curve = RotationCurve::flat(0.235);

  std::vector<double> steps;
  const auto t0 = std::chrono::steady_clock::now();
  const SettlementTree pruned = prune(tree, curve, catalog, density, &steps);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.log << "    removed " << tree.size() - pruned.size() << " stars in " << secs << " s\n";
  c.require(!steps.empty(), "crammed 200-star tree should trigger at least one removal");
  const double j2_before = merit(tree, curve, catalog, VesselRules{}, density).j2;
  double last = j2_before;
  for (double j : steps) {
    c.require(j > last, "J2 not strictly increasing across removals");
    last = j;
  }
  // Exhaustive fixed-point verification.
  const double j2_final = merit(pruned, curve, catalog, VesselRules{}, density).j2;
  for (int i = 0; i < pruned.size(); ++i) {
    if (!pruned.is_terminal(i) || pruned.is_root(i)) continue;
    SettlementTree t = pruned;
    t.remove_terminal(i);
    const double j2 = merit(t, curve, catalog, VesselRules{}, density).j2;
    c.require(j2 <= j2_final + 1e-9, "a single removal still improves J2 after prune");
  }
  return c.ok;
}

// --- criterion 9 ----------------------------------------------------------

int run_tool(const std::string& args, Check& c) {
  const std::string cmd = g_tool + " " + args + " 2>&1";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    c.require(false, "cannot spawn: " + cmd);
    return -1;
  }
  char buf[512];
  std::string output;
  while (std::fgets(buf, sizeof(buf), pipe)) output += buf;
  const int status = pclose(pipe);
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0) c.log << "    tool exited " << code << ": " << cmd << "\n" << output;
  return code;
}

bool criterion_end_to_end(Check& c) {
  if (g_tool.empty()) {
    c.require(false, "end-to-end criterion needs --tool <path to gsettle>");
    return false;
  }
  const auto t_start = std::chrono::steady_clock::now();
  const fs::path dir = fs::temp_directory_path() / "gsettle_accept9";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Config shared by every stage.
  const std::string catalog_path = (dir / "catalog.csv").string();
  nlohmann::json cfg;
  cfg["seed"] = 20260809;
  cfg["catalog"] = "catalog.csv";
  cfg["zones"] = "zones.json";
  cfg["out_dir"] = (dir / "out").string();
  cfg["threads"] = 2;
  cfg["runs"] = 2;
  cfg["search"] = {{"b_w", 3000}, {"b_f_max", 1500}, {"b_f", 300}, {"p_branch", 0.7},
                   {"expansion_cap", 20000}};
  cfg["reopt"] = {{"iters", 8}};
  // Only two-impulse legs are produced, so the acceptance bands must sit
  // inside the settler's own per-impulse and budget caps; the stock table
  // tolerates larger impulses that a multi-impulse refinement would split.
  cfg["thresholds"] = {{{"tau_max", 4}, {"dv_i_max", 165}, {"dv_tot_max", 330}},
                       {{"tau_max", 9}, {"dv_i_max", 168}, {"dv_tot_max", 336}},
                       {{"tau_max", 15}, {"dv_i_max", 170}, {"dv_tot_max", 345}},
                       {{"dv_i_max", 170}, {"dv_tot_max", 385}}};
  {
    std::ofstream out(dir / "config.json");
    out << cfg.dump(2) << "\n";
  }
  if (run_tool("gen-catalog --config " + (dir / "config.json").string() +
               " --n 5000 --mode planar --out " + catalog_path, c) != 0)
    return false;

  // Pick a dense 4x4 window in rings 18..21 and shape a 40-star target that
  // the catalog can actually supply (leaving slack in every cell).
  const RotationCurve curve = RotationCurve::flat(0.235);
  const StarCatalog catalog = StarCatalog::load(catalog_path);
  std::vector<std::vector<int>> per_cell(kNumRings + 1, std::vector<int>(kNumSlices + 1, 0));
  for (const Star& s : catalog.stars()) {
    const int kr = ring_of(s.r);
    if (kr >= 18 && kr <= 21) per_cell[kr][slice_of(theta_final(curve, s))]++;
  }
  int best_lo = 1;
  long best_count = -1;
  for (int lo = 1; lo + 3 <= kNumSlices; ++lo) {
    long count = 0;
    for (int kr = 18; kr <= 21; ++kr)
      for (int kth = lo; kth <= lo + 3; ++kth) count += per_cell[kr][kth];
    if (count > best_count) {
      best_count = count;
      best_lo = lo;
    }
  }

  Zone zone;
  zone.name = "desk";
  zone.kr_lo = 18;
  zone.kr_hi = 21;
  zone.kth_lo = best_lo;
  zone.kth_hi = best_lo + 3;
  zone.target.assign(16, 0);

  // Root: any star of the central cells.
  int root_id = -1;
  for (const Star& s : catalog.stars()) {
    const int kr = ring_of(s.r);
    const int kth = slice_of(theta_final(curve, s));
    if (kr >= 19 && kr <= 20 && kth >= best_lo + 1 && kth <= best_lo + 2) {
      root_id = s.id;
      break;
    }
  }
  c.require(root_id > 0, "found a root star inside the zone");
  if (!c.ok) return false;
  zone.root_star = root_id;
  zone.root_epoch = 0.0;

  const int root_kr = ring_of(catalog.by_id(root_id).r);
  const int root_kth = slice_of(theta_final(curve, catalog.by_id(root_id)));
  int total = 0;
  for (int kr = 18; kr <= 21; ++kr)
    for (int kth = zone.kth_lo; kth <= zone.kth_hi; ++kth) {
      const int idx = zone.cell_index(kr, kth);
      int avail = per_cell[kr][kth];
      if (kr == root_kr && kth == root_kth) avail -= 1;  // root occupies one slot
      zone.target[idx] = std::min(avail, 3);
      total += zone.target[idx];
    }
  // Trim to exactly 40 settled stars, keeping the root cell target >= 1.
  for (int idx = 0; total > 40 && idx < 16; idx = (idx + 1) % 16) {
    const int keep = (idx == zone.cell_index(root_kr, root_kth)) ? 1 : 0;
    if (zone.target[idx] > keep) {
      zone.target[idx]--;
      --total;
    }
  }
  c.require(total == 40, "catalog supplies a 40-star target (got " + std::to_string(total) + ")");
  // The root's own settlement counts toward its cell, so H = G needs one
  // more star there.
  zone.target[zone.cell_index(root_kr, root_kth)] += 1;
  if (!c.ok) return false;

  nlohmann::json zj;
  zj["zones"] = nlohmann::json::array();
  nlohmann::json z1;
  z1["name"] = zone.name;
  z1["kr"] = {zone.kr_lo, zone.kr_hi};
  z1["ktheta"] = {zone.kth_lo, zone.kth_hi};
  z1["root_star"] = zone.root_star;
  z1["root_epoch"] = zone.root_epoch;
  auto& grid = z1["G"] = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int cc = 0; cc < 4; ++cc) row.push_back(zone.target[r * 4 + cc]);
    grid.push_back(row);
  }
  zj["zones"].push_back(z1);
  {
    std::ofstream out(dir / "zones.json");
    out << zj.dump(2) << "\n";
  }

  const std::string cfg_arg = " --config " + (dir / "config.json").string();
  if (run_tool("neighborhoods" + cfg_arg + " --zone desk", c) != 0) return false;
  if (run_tool("search" + cfg_arg + " --zone desk --out " + (dir / "sol_search.txt").string(), c) != 0)
    return false;

  // Explosion stage with marginals consistent with the zone goal: the ILP
  // optimum adds nothing, leaving the exact cover intact.
  {
    const SettlementTree t = load_solution((dir / "sol_search.txt").string());
    std::vector<int> rows(kNumRings, 0), cols(kNumSlices, 0);
    for (const SettledStar& s : t.stars) {
      const Star& star = catalog.by_id(s.star_id);
      rows[ring_of(star.r) - 1]++;
      cols[slice_of(theta_final(curve, star)) - 1]++;
    }
    nlohmann::json mj;
    mj["rows"] = rows;
    mj["cols"] = cols;
    std::ofstream out(dir / "marginals.json");
    out << mj.dump() << "\n";
  }
  if (run_tool("explode" + cfg_arg + " --in " + (dir / "sol_search.txt").string() + " --out " +
               (dir / "sol_explode.txt").string() + " --marginals " + (dir / "marginals.json").string(),
               c) != 0)
    return false;
  if (run_tool("prune" + cfg_arg + " --in " + (dir / "sol_explode.txt").string() + " --out " +
               (dir / "sol_prune.txt").string(), c) != 0)
    return false;
  if (run_tool("reopt-times" + cfg_arg + " --in " + (dir / "sol_prune.txt").string() + " --out " +
               (dir / "sol_final.txt").string(), c) != 0)
    return false;
  if (run_tool("score" + cfg_arg + " --in " + (dir / "sol_final.txt").string() + " --json " +
               (dir / "merit.json").string(), c) != 0)
    return false;

  // Independent verification of the final artifact.
  const SettlementTree final_tree = load_solution((dir / "sol_final.txt").string());
  const auto violations = validate(final_tree, curve, catalog, VesselRules{});
  for (const auto& v : violations) c.log << "    violation: " << v << "\n";
  c.require(violations.empty(), "final solution violates the rules");

  std::vector<int> occupancy(16, 0);
  for (const SettledStar& s : final_tree.stars) {
    const Star& star = catalog.by_id(s.star_id);
    const int idx = zone.cell_index(ring_of(star.r), slice_of(theta_final(curve, star)));
    if (idx >= 0) occupancy[idx]++;
  }
  int gap = 0;
  for (int i = 0; i < 16; ++i) gap += std::abs(occupancy[i] - zone.target[i]);
  c.log << "    settled " << final_tree.size() << " stars, coverage gap " << gap << "\n";
  c.require(gap == 0, "coverage gap sum |H - G| = " + std::to_string(gap));

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  c.log << "    pipeline wall time " << secs << " s\n";
  c.require(secs < 600.0, "pipeline exceeded 10 minutes");
  return c.ok;
}

// --- criterion 10 ---------------------------------------------------------

bool criterion_adjust(Check& c) {
  const RotationCurve curve = RotationCurve::flat(0.235);
  // Deliberately skewed ring 19 (r in [20, 21]): the settled in-ring stars
  // crowd its upper edge, with backbone mass further in and an unsettled
  // pool across the lower half.
  std::vector<Star> stars;
  int id = 0;
  for (int i = 0; i < 30; ++i) stars.push_back({++id, 11.0 + 0.2 * i, 0, 0, 0.002 * i});
  const int ring_hi_first = id + 1;
  stars.push_back({++id, 20.85, 0, 0, 0.02});
  stars.push_back({++id, 20.90, 0, 0, 0.03});
  stars.push_back({++id, 20.95, 0, 0, 0.04});
  stars.push_back({++id, 20.60, 0, 0, 0.05});  // lowest terminal candidate
  stars.push_back({++id, 20.45, 0, 0, 0.06});  // internal anchor
  const int anchor = id;
  for (int i = 0; i < 10; ++i) stars.push_back({++id, 20.02 + 0.055 * i, 0, 0, 0.03 + 0.004 * i});
  const StarCatalog catalog(std::move(stars));

  SettlementTree tree;
  tree.add_root(1, 0.0);
  auto stub = [&](int parent, int sid, double arr) {
    TransferLeg leg;
    leg.vessel = VesselType::kSettler;
    leg.origin_id = tree.stars[parent].star_id;
    leg.dest_id = sid;
    leg.t_dep = tree.stars[parent].settle_epoch + kWaitMyr;
    leg.t_arr = arr;
    leg.impulses = {{leg.t_dep, Eigen::Vector3d(15, 0, 0)}, {arr, Eigen::Vector3d(0, 15, 0)}};
    return tree.add_settlement(parent, sid, arr, std::move(leg));
  };
  int prev = 0;
  for (int sid = 2; sid <= 30; ++sid) prev = stub((sid - 2) / 3, sid, 3.0 + sid * 0.5);
  const int anchor_idx = stub(prev, anchor, 20.0);
  stub(anchor_idx, ring_hi_first + 0, 25.0);
  stub(anchor_idx, ring_hi_first + 1, 26.0);
  stub(anchor_idx, ring_hi_first + 2, 27.0);
  stub(prev, ring_hi_first + 3, 24.0);

  const DensityErrorConfig density;
  AdjustReport rep;
  const auto t0 = std::chrono::steady_clock::now();
  const SettlementTree out = adjust_sequence(tree, curve, catalog, ThresholdTable::defaults(),
                                             VesselRules{}, 18, density, &rep);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // E_r from scratch, before and after.
  auto e_r_of = [&](const SettlementTree& t) {
    std::vector<double> radii, thetas;
    settled_samples(t, curve, catalog, radii, thetas);
    const auto pts = DensityErrorConfig::radial_points();
    return density_error(radii, pts, density.s_r, [&](double r) { return density.g_r(r); }, false);
  };
  const double before = e_r_of(tree), after = e_r_of(out);
  c.log << "    E_r " << before << " -> " << after << (rep.applied ? " (applied)" : " (reverted)")
        << ", optimal radius " << rep.optimal_radius << ", " << secs << " s\n";
  c.require(after <= before + 1e-12, "adjust step increased E_r");
  c.require(rep.applied, "skewed fixture should admit an improving replacement");
  if (rep.applied) {
    // The settled replacement carries the catalog radius closest to the
    // formula optimum (every unsettled fixture star is reachable).
    double best = 1e300;
    for (const Star& s : catalog.stars()) {
      if (tree.index_of(s.id) >= 0 && s.id != rep.removed_star) continue;
      best = std::min(best, std::fabs(s.r - rep.optimal_radius));
    }
    c.require(std::fabs(catalog.by_id(rep.added_star).r - rep.optimal_radius) <= best + 1e-12,
              "replacement is not the closest catalog radius to the optimum");
  }
  c.require(secs < 30.0, "adjust step exceeded 30 s");
  return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (arg == "--tool" && i + 1 < argc) g_tool = argv[++i];
  }

  struct Entry {
    int id;
    const char* title;
    std::function<bool(Check&)> fn;
  };
  const std::vector<Entry> entries = {
      {1, "merit arithmetic reproduction", criterion_merit_arithmetic},
      {2, "HCW correctness suite", criterion_hcw_suite},
      {3, "linear-vs-full discrepancy", criterion_linear_vs_full},
      {4, "full two-impulse solver and primer boundaries", criterion_full_solver},
      {5, "BBFS exhaustive-oracle equivalence", criterion_bbfs_oracle},
      {6, "SQP monotonicity vs coordinate-descent oracle", criterion_sqp},
      {7, "explosion ILP exactness", criterion_explosion_ilp},
      {8, "pruning fixed point", criterion_prune},
      {9, "end-to-end desk-scale pipeline", criterion_end_to_end},
      {10, "adjust-sequence ring replacement", criterion_adjust},
  };

  int failures = 0;
  for (const Entry& e : entries) {
    if (only != 0 && e.id != only) continue;
    Check check;
    bool ok = false;
    try {
      ok = e.fn(check);
    } catch (const std::exception& ex) {
      check.log << "    exception: " << ex.what() << "\n";
      ok = false;
    }
    std::printf("[CRITERION %2d] %s — %s\n", e.id, ok ? "PASS" : "FAIL", e.title);
    const std::string detail = check.log.str();
    if (!detail.empty()) std::fputs(detail.c_str(), stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
