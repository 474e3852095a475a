#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gsettle/catalog.hpp"
#include "gsettle/grid.hpp"
#include "gsettle/hcw.hpp"
#include "gsettle/score.hpp"
#include "gsettle/transfer.hpp"
#include "gsettle/tree.hpp"

namespace gsettle {

// Flat 30x32 grid of per-cell integers, 1-based (kr, kth) accessors.
struct GridCounts {
  std::vector<int> v = std::vector<int>(kNumRings * kNumSlices, 0);
  int& at(int kr, int kth) { return v[(kr - 1) * kNumSlices + (kth - 1)]; }
  int at(int kr, int kth) const { return v[(kr - 1) * kNumSlices + (kth - 1)]; }
};

inline GridCounts settled_counts(const SettlementTree& tree, const RotationCurve& curve,
                                 const StarCatalog& catalog) {
  GridCounts counts;
  for (const SettledStar& s : tree.stars) {
    const Star& star = catalog.by_id(s.star_id);
    const int kr = ring_of(star.r);
    if (kr == 0) continue;
    counts.at(kr, slice_of(theta_final(curve, star)))++;
  }
  return counts;
}

// Capacity estimate for in-cell growth: every star contributes its free
// settlers multiplied across the generations that still fit before the
// horizon, n_gen = floor((t_end - t(s)) / (dt_avg + t_w)).
inline GridCounts explosion_bounds(const SettlementTree& tree, const RotationCurve& curve,
                                   const StarCatalog& catalog, double t_end = kHorizonMyr,
                                   double t_w = kWaitMyr, double dt_avg = 6.0) {
  GridCounts bounds;
  for (int i = 0; i < tree.size(); ++i) {
    const SettledStar& s = tree.stars[i];
    const int n_avail = 3 - static_cast<int>(s.offspring.size());
    if (n_avail <= 0) continue;
    const Star& star = catalog.by_id(s.star_id);
    const int kr = ring_of(star.r);
    if (kr == 0) continue;
    const int n_gen =
        std::max(0, static_cast<int>(std::floor((t_end - s.settle_epoch) / (dt_avg + t_w))));
    long vessels = 0, gen = 1;
    for (int k = 0; k <= n_gen; ++k) {
      vessels += gen;
      gen *= 3;
    }
    bounds.at(kr, slice_of(theta_final(curve, star))) += n_avail * static_cast<int>(vessels);
  }
  return bounds;
}

// Integer program for the number of additional stars per cell: minimize the
// summed row and column deviations from a desired marginal distribution,
// subject to 0 <= x <= x_max. Solved by greedy unit increments followed by a
// local search over single-unit adds, removals and moves.
struct ExplosionPlan {
  int rows = 0, cols = 0;
  std::vector<int> x;
  long objective = 0;

  int total() const {
    int t = 0;
    for (int v : x) t += v;
    return t;
  }
};

inline ExplosionPlan explosion_ilp(const std::vector<int>& n0, const std::vector<int>& rows_des,
                                   const std::vector<int>& cols_des, const std::vector<int>& x_max,
                                   int rows = kNumRings, int cols = kNumSlices) {
  if (static_cast<int>(n0.size()) != rows * cols || x_max.size() != n0.size() ||
      static_cast<int>(rows_des.size()) != rows || static_cast<int>(cols_des.size()) != cols)
    throw std::invalid_argument("explosion_ilp: dimension mismatch");

  ExplosionPlan plan;
  plan.rows = rows;
  plan.cols = cols;
  plan.x.assign(rows * cols, 0);

  std::vector<long> row_sum(rows, 0), col_sum(cols, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      row_sum[r] += n0[r * cols + c];
      col_sum[c] += n0[r * cols + c];
    }

  auto objective = [&]() {
    long obj = 0;
    for (int r = 0; r < rows; ++r) obj += std::labs(row_sum[r] - rows_des[r]);
    for (int c = 0; c < cols; ++c) obj += std::labs(col_sum[c] - cols_des[c]);
    return obj;
  };
  // Objective change from adding d in cell (r, c).
  auto delta = [&](int r, int c, int d) {
    return std::labs(row_sum[r] + d - rows_des[r]) - std::labs(row_sum[r] - rows_des[r]) +
           std::labs(col_sum[c] + d - cols_des[c]) - std::labs(col_sum[c] - cols_des[c]);
  };
  auto apply = [&](int r, int c, int d) {
    plan.x[r * cols + c] += d;
    row_sum[r] += d;
    col_sum[c] += d;
  };

  // Greedy: repeatedly add one star to the cell with the largest decrease,
  // ties to the lexicographically lowest cell.
  for (;;) {
    long best = 0;
    int best_r = -1, best_c = -1;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        if (plan.x[r * cols + c] >= x_max[r * cols + c]) continue;
        const long d = delta(r, c, +1);
        if (d < best) {
          best = d;
          best_r = r;
          best_c = c;
        }
      }
    if (best_r < 0) break;
    apply(best_r, best_c, +1);
  }

  // Exact polish. The objective is a separable convex cost of the row and
  // column sums, i.e. a min convex-cost circulation on the bipartite cell
  // network; a plan is optimal iff the marginal residual graph has no
  // negative cycle. Unit moves (add/remove/shift) are 3- and 6-arc cycles;
  // longer chains arise when capacities pin the short ones, so cancel
  // arbitrary cycles until none remains. Each cancel drops the objective by
  // at least 1.
  {
    const int s_node = 0, t_node = 1;
    const int row0 = 2, col0 = 2 + rows;
    const int n_nodes = 2 + rows + cols;
    struct Arc {
      int from, to;
      long cost;
      int cell;  // -1 for marginal-cost arcs
      int dir;   // +1 add, -1 remove on cell
    };
    auto row_marginal = [&](int r, int d) {
      return std::labs(row_sum[r] + d - rows_des[r]) - std::labs(row_sum[r] - rows_des[r]);
    };
    auto col_marginal = [&](int c, int d) {
      return std::labs(col_sum[c] + d - cols_des[c]) - std::labs(col_sum[c] - cols_des[c]);
    };

    for (;;) {
      std::vector<Arc> arcs;
      arcs.push_back({t_node, s_node, 0, -1, 0});
      arcs.push_back({s_node, t_node, 0, -1, 0});
      for (int r = 0; r < rows; ++r) {
        arcs.push_back({s_node, row0 + r, row_marginal(r, +1), -1, 0});
        arcs.push_back({row0 + r, s_node, row_marginal(r, -1), -1, 0});
      }
      for (int c = 0; c < cols; ++c) {
        arcs.push_back({col0 + c, t_node, col_marginal(c, +1), -1, 0});
        arcs.push_back({t_node, col0 + c, col_marginal(c, -1), -1, 0});
      }
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const int i = r * cols + c;
          if (plan.x[i] < x_max[i]) arcs.push_back({row0 + r, col0 + c, 0, i, +1});
          if (plan.x[i] > 0) arcs.push_back({col0 + c, row0 + r, 0, i, -1});
        }

      // Bellman-Ford from a virtual all-zero source; a relaxation on the
      // n-th pass exposes a negative cycle.
      std::vector<long> dist(n_nodes, 0);
      std::vector<int> parent(n_nodes, -1);
      int touched = -1;
      for (int pass = 0; pass <= n_nodes; ++pass) {
        touched = -1;
        for (int a = 0; a < static_cast<int>(arcs.size()); ++a) {
          if (dist[arcs[a].from] + arcs[a].cost < dist[arcs[a].to]) {
            dist[arcs[a].to] = dist[arcs[a].from] + arcs[a].cost;
            parent[arcs[a].to] = a;
            touched = arcs[a].to;
          }
        }
        if (touched < 0) break;
      }
      if (touched < 0) break;

      // Walk back to land inside the cycle, then collect it.
      int u = touched;
      for (int i = 0; i < n_nodes; ++i) u = arcs[parent[u]].from;
      std::vector<int> cycle;
      int v = u;
      do {
        cycle.push_back(parent[v]);
        v = arcs[parent[v]].from;
      } while (v != u);

      for (int a : cycle)
        if (arcs[a].cell >= 0) apply(arcs[a].cell / cols, arcs[a].cell % cols, arcs[a].dir);
    }
  }

  plan.objective = objective();
  return plan;
}

struct ExplosionReport {
  int requested = 0;
  int added = 0;
  std::vector<std::string> shortfalls;
};

// Grow the tree cell by cell to match an explosion plan. Only in-cell
// transfers are used; fertile stars with the earliest settle epochs act
// first, and newly settled stars become fertile immediately.
inline SettlementTree realize_explosion(const SettlementTree& tree, const ExplosionPlan& plan,
                                        const RotationCurve& curve, const StarCatalog& catalog,
                                        const ThresholdTable& thresholds, const VesselRules& rules,
                                        ExplosionReport* report = nullptr,
                                        double solve_tol = 1e-10) {
  if (plan.rows != kNumRings || plan.cols != kNumSlices)
    throw std::invalid_argument("realize_explosion: plan must cover the full grid");

  SettlementTree out = tree;
  ExplosionReport rep;
  rep.requested = plan.total();

  // Cell of every catalog star, and the unsettled stars per cell.
  std::unordered_map<int, int> settled;  // star id -> tree index
  for (int i = 0; i < out.size(); ++i) settled[out.stars[i].star_id] = i;

  std::unordered_map<int, std::vector<int>> unsettled_by_cell;
  for (const Star& s : catalog.stars()) {
    if (settled.count(s.id)) continue;
    const int kr = ring_of(s.r);
    if (kr == 0) continue;
    unsettled_by_cell[(kr - 1) * kNumSlices + (slice_of(theta_final(curve, s)) - 1)].push_back(s.id);
  }
  for (auto& [cell, ids] : unsettled_by_cell) std::sort(ids.begin(), ids.end());

  for (int r = 1; r <= kNumRings; ++r) {
    for (int c = 1; c <= kNumSlices; ++c) {
      int want = plan.x[(r - 1) * kNumSlices + (c - 1)];
      if (want == 0) continue;

      // Fertile settled stars of this cell, earliest settle epoch first.
      auto fertile_order = [&]() {
        std::vector<int> f;
        for (int i = 0; i < out.size(); ++i) {
          if (static_cast<int>(out.stars[i].offspring.size()) >= rules.settlers_per_star) continue;
          const Star& star = catalog.by_id(out.stars[i].star_id);
          if (ring_of(star.r) == r && slice_of(theta_final(curve, star)) == c) f.push_back(i);
        }
        std::stable_sort(f.begin(), f.end(), [&](int a, int b) {
          return out.stars[a].settle_epoch < out.stars[b].settle_epoch;
        });
        return f;
      };

      auto& pool = unsettled_by_cell[(r - 1) * kNumSlices + (c - 1)];
      int added_here = 0;
      bool progress = true;
      while (want > 0 && progress) {
        progress = false;
        for (int parent_idx : fertile_order()) {
          if (want == 0) break;
          const SettledStar& parent = out.stars[parent_idx];
          const double t_dep = parent.settle_epoch + rules.wait_myr;
          if (t_dep >= rules.horizon_myr) continue;

          // Minimum-time feasible target in this cell.
          int best_target = -1;
          double best_tau = std::numeric_limits<double>::infinity();
          for (int tid : pool) {
            const auto mt = min_time_transfer(curve, catalog.by_id(parent.star_id),
                                              catalog.by_id(tid), t_dep, thresholds,
                                              rules.horizon_myr);
            if (mt && mt->tau < best_tau) {
              best_tau = mt->tau;
              best_target = tid;
            }
          }
          if (best_target < 0) continue;

          TransferLeg leg;
          try {
            leg = solve_two_impulse(curve, catalog.by_id(parent.star_id),
                                    catalog.by_id(best_target), t_dep, t_dep + best_tau, solve_tol);
          } catch (const SolverError&) {
            continue;
          }
          const VesselLimits& lim = rules.of(VesselType::kSettler);
          bool ok = leg.dv_used_kms() <= lim.dv_total_max_kms;
          for (const Impulse& imp : leg.impulses)
            ok = ok && imp.dv_kms.norm() <= lim.dv_impulse_max_kms;
          if (!ok) {
            pool.erase(std::remove(pool.begin(), pool.end(), best_target), pool.end());
            continue;
          }
          leg.vessel = VesselType::kSettler;
          out.add_settlement(parent_idx, best_target, t_dep + best_tau, std::move(leg));
          pool.erase(std::remove(pool.begin(), pool.end(), best_target), pool.end());
          --want;
          ++added_here;
          ++rep.added;
          progress = true;
        }
      }
      if (want > 0)
        rep.shortfalls.push_back("cell (" + std::to_string(r) + "," + std::to_string(c) +
                                 "): short by " + std::to_string(want));
      (void)added_here;
    }
  }
  if (report) *report = rep;
  return out;
}

// Incremental kernel sums behind J2, for cheap what-if removals.
class UniformityTracker {
 public:
  UniformityTracker(const SettlementTree& tree, const RotationCurve& curve,
                    const StarCatalog& catalog, const DensityErrorConfig& density)
      : density_(density),
        rpts_(DensityErrorConfig::radial_points()),
        tpts_(DensityErrorConfig::angular_points()),
        sr_(rpts_.size(), 0.0),
        st_(tpts_.size(), 0.0) {
    for (const SettledStar& s : tree.stars) add(curve, catalog.by_id(s.star_id));
  }

  void add(const RotationCurve& curve, const Star& star) {
    const double th = theta_final(curve, star);
    for (std::size_t k = 0; k < rpts_.size(); ++k)
      sr_[k] += triangular_kernel(rpts_[k], star.r, density_.s_r);
    for (std::size_t k = 0; k < tpts_.size(); ++k)
      st_[k] += triangular_kernel_wrapped(tpts_[k], th, density_.s_theta);
    ++n_;
  }

  void remove(const RotationCurve& curve, const Star& star) {
    const double th = theta_final(curve, star);
    for (std::size_t k = 0; k < rpts_.size(); ++k)
      sr_[k] -= triangular_kernel(rpts_[k], star.r, density_.s_r);
    for (std::size_t k = 0; k < tpts_.size(); ++k)
      st_[k] -= triangular_kernel_wrapped(tpts_[k], th, density_.s_theta);
    --n_;
  }

  int n() const { return n_; }

  double e_r() const { return error(sr_, rpts_, [&](double x) { return density_.g_r(x); }); }
  double e_theta() const { return error(st_, tpts_, [&](double x) { return density_.g_theta(x); }); }

  double j2() const {
    return n_ / (1.0 + 1e-4 * n_ * (e_r() + e_theta()));
  }

  // J2 if one star were removed, without mutating the tracker.
  double j2_without(const RotationCurve& curve, const Star& star) const {
    UniformityTracker* self = const_cast<UniformityTracker*>(this);
    self->remove(curve, star);
    const double j = j2();
    self->add(curve, star);
    return j;
  }

 private:
  template <class G>
  double error(const std::vector<double>& sums, const std::vector<double>& pts, G&& g) const {
    double e = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double f = n_ > 0 ? sums[k] / n_ : 0.0;
      const double ratio = f / g(pts[k]);
      e += (ratio - 1.0) * (ratio - 1.0);
    }
    return e;
  }

  DensityErrorConfig density_;
  std::vector<double> rpts_, tpts_;
  std::vector<double> sr_, st_;
  int n_ = 0;
};

// Greedy removal of terminal stars while J2 strictly improves. Roots are
// never candidates (their removal would disconnect nothing but discard the
// zone's anchor settlement).
inline SettlementTree prune(const SettlementTree& tree, const RotationCurve& curve,
                            const StarCatalog& catalog, const DensityErrorConfig& density,
                            std::vector<double>* j2_steps = nullptr) {
  SettlementTree out = tree;
  UniformityTracker tracker(out, curve, catalog, density);
  if (j2_steps) j2_steps->clear();

  for (;;) {
    const double j2_now = tracker.j2();
    double best_j2 = -std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (int i = 0; i < out.size(); ++i) {
      if (!out.is_terminal(i) || out.is_root(i)) continue;
      const double cand = tracker.j2_without(curve, catalog.by_id(out.stars[i].star_id));
      const bool better = cand > best_j2 + 1e-12;
      const bool tie_lower_id = best_idx >= 0 && std::fabs(cand - best_j2) <= 1e-12 &&
                                out.stars[i].star_id < out.stars[best_idx].star_id;
      if (best_idx < 0 || better || tie_lower_id) {
        best_j2 = cand;
        best_idx = i;
      }
    }
    if (best_idx < 0 || best_j2 <= j2_now + 1e-12) break;
    tracker.remove(curve, catalog.by_id(out.stars[best_idx].star_id));
    out.remove_terminal(best_idx);
    if (j2_steps) j2_steps->push_back(best_j2);
  }
  return out;
}

struct AdjustReport {
  bool applied = false;
  int removed_star = -1;
  int added_star = -1;
  double optimal_radius = 0.0;
  double e_r_before = 0.0;
  double e_r_after = 0.0;
  std::string note;
};

// Terminal-star radius replacement against the error of ring k (0-based,
// evaluation point R_k = 2 + k). Removes the candidate dictated by the ring
// mean, settles the reachable star closest to the optimal-radius formula,
// and keeps the change only when E_r decreases.
inline SettlementTree adjust_sequence(const SettlementTree& tree, const RotationCurve& curve,
                                      const StarCatalog& catalog, const ThresholdTable& thresholds,
                                      const VesselRules& rules, int ring_k,
                                      const DensityErrorConfig& density,
                                      AdjustReport* report = nullptr, double solve_tol = 1e-10) {
  if (ring_k < 0 || ring_k > 29) throw std::invalid_argument("adjust_sequence: ring out of range");
  AdjustReport rep;
  const int kr = ring_k + 1;
  const double r_eval = 2.0 + ring_k;

  auto finish = [&](SettlementTree result) {
    if (report) *report = rep;
    return result;
  };

  // Candidates: terminal, non-root stars settled in this ring.
  std::vector<int> candidates;
  double ring_sum = 0.0;
  int ring_count = 0;
  for (int i = 0; i < tree.size(); ++i) {
    const Star& star = catalog.by_id(tree.stars[i].star_id);
    if (ring_of(star.r) != kr) continue;
    ring_sum += star.r;
    ++ring_count;
    if (tree.is_terminal(i) && !tree.is_root(i)) candidates.push_back(i);
  }
  if (candidates.empty()) {
    rep.note = "no terminal candidates in ring";
    return finish(tree);
  }

  const double mid = 2.5 + ring_k;
  const bool remove_lowest = (ring_sum / ring_count) > mid;
  int remove_idx = candidates.front();
  for (int i : candidates) {
    const double r_i = catalog.by_id(tree.stars[i].star_id).r;
    const double r_cur = catalog.by_id(tree.stars[remove_idx].star_id).r;
    if (remove_lowest ? (r_i < r_cur) : (r_i > r_cur)) remove_idx = i;
  }
  rep.removed_star = tree.stars[remove_idx].star_id;

  // Optimal replacement radius from the ring-error zero: the kernel sum over
  // retained stars is constant, so f_r(R_k) = g_r(R_k) solves in r.
  const int n_total = tree.size();
  double s_tilde = 0.0;
  for (int i = 0; i < tree.size(); ++i) {
    if (i == remove_idx) continue;
    s_tilde += triangular_kernel(r_eval, catalog.by_id(tree.stars[i].star_id).r, density.s_r);
  }
  const double s_r = density.s_r;
  const double r_opt = r_eval + (1.0 - s_r * (n_total * density.g_r(r_eval) - s_tilde)) * s_r;
  rep.optimal_radius = r_opt;

  UniformityTracker tracker(tree, curve, catalog, density);
  rep.e_r_before = tracker.e_r();

  SettlementTree work = tree;
  work.remove_terminal(remove_idx);

  // Unsettled stars ordered by closeness to the optimal radius.
  std::unordered_set<int> settled_ids;
  for (const SettledStar& s : work.stars) settled_ids.insert(s.star_id);
  std::vector<const Star*> pool;
  for (const Star& s : catalog.stars())
    if (!settled_ids.count(s.id)) pool.push_back(&s);
  std::sort(pool.begin(), pool.end(), [&](const Star* a, const Star* b) {
    const double da = std::fabs(a->r - r_opt), db = std::fabs(b->r - r_opt);
    return da != db ? da < db : a->id < b->id;
  });

  const int kMaxCandidates = 200;
  int tried = 0;
  for (const Star* cand : pool) {
    if (++tried > kMaxCandidates) break;
    // Earliest feasible leg from any fertile star.
    int best_parent = -1;
    double best_arr = std::numeric_limits<double>::infinity();
    double best_dep = 0.0;
    for (int i = 0; i < work.size(); ++i) {
      if (static_cast<int>(work.stars[i].offspring.size()) >= rules.settlers_per_star) continue;
      const double t_dep = work.stars[i].settle_epoch + rules.wait_myr;
      if (t_dep >= rules.horizon_myr) continue;
      const auto mt = min_time_transfer(curve, catalog.by_id(work.stars[i].star_id), *cand, t_dep,
                                        thresholds, rules.horizon_myr);
      if (mt && t_dep + mt->tau < best_arr) {
        best_arr = t_dep + mt->tau;
        best_dep = t_dep;
        best_parent = i;
      }
    }
    if (best_parent < 0) continue;

    TransferLeg leg;
    try {
      leg = solve_two_impulse(curve, catalog.by_id(work.stars[best_parent].star_id), *cand,
                              best_dep, best_arr, solve_tol);
    } catch (const SolverError&) {
      continue;
    }
    const VesselLimits& lim = rules.of(VesselType::kSettler);
    bool ok = leg.dv_used_kms() <= lim.dv_total_max_kms;
    for (const Impulse& imp : leg.impulses) ok = ok && imp.dv_kms.norm() <= lim.dv_impulse_max_kms;
    if (!ok) continue;

    leg.vessel = VesselType::kSettler;
    work.add_settlement(best_parent, cand->id, best_arr, std::move(leg));
    rep.added_star = cand->id;

    UniformityTracker after(work, curve, catalog, density);
    rep.e_r_after = after.e_r();
    if (rep.e_r_after < rep.e_r_before) {
      rep.applied = true;
      return finish(work);
    }
    rep.note = "replacement did not reduce E_r; reverted";
    rep.applied = false;
    return finish(tree);
  }
  rep.note = "no reachable replacement";
  return finish(tree);
}

}  // namespace gsettle
