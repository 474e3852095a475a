#pragma once

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gsettle/catalog.hpp"
#include "gsettle/grid.hpp"
#include "gsettle/neighborhood.hpp"
#include "gsettle/rng.hpp"
#include "gsettle/units.hpp"

namespace gsettle {

struct SearchParams {
  int b_w = 20000;      // frontier cap
  int b_f_max = 20000;  // successors generated per expansion
  int b_f = 1000;       // successors retained
  double p_branch = 0.7;
  enum class Mode { kMulti, kOneVessel } mode = Mode::kMulti;
  int expansion_cap = 50000;
  std::optional<double> m_hat;  // fixed m-hat; empty = resampled each iteration

  void check() const {
    if (b_f > b_f_max) throw std::invalid_argument("SearchParams: b_f must not exceed b_f_max");
    if (p_branch < 0.0 || p_branch > 1.0)
      throw std::invalid_argument("SearchParams: p_branch must lie in [0, 1]");
    if (b_w < 1 || b_f < 1 || b_f_max < 1 || expansion_cap < 1)
      throw std::invalid_argument("SearchParams: caps must be positive");
  }
};

// Per-star grid placement, fixed per catalog.
struct StarCell {
  int kr = 0, kth = 0;   // global 1-based grid cell
  int zone_idx = -1;     // flat index into the zone, -1 outside
  double r = 0.0;        // kpc
  double theta_f = 0.0;  // polar angle at the horizon
};

class StarCellIndex {
 public:
  StarCellIndex(const RotationCurve& curve, const StarCatalog& catalog, const Zone& zone) {
    for (const Star& s : catalog.stars()) {
      StarCell c;
      c.kr = ring_of(s.r);
      c.theta_f = theta_final(curve, s);
      c.kth = slice_of(c.theta_f);
      c.r = s.r;
      c.zone_idx = (c.kr == 0) ? -1 : zone.cell_index(c.kr, c.kth);
      cells_.emplace(s.id, c);
    }
  }

  const StarCell& of(int star_id) const { return cells_.at(star_id); }

  std::vector<int> zone_star_ids() const {
    std::vector<int> ids;
    for (const auto& [id, c] : cells_)
      if (c.zone_idx >= 0) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  std::unordered_map<int, StarCell> cells_;
};

// A settlement tree under construction: an unordered list of settled stars
// with parentage, offspring counts and settle epochs, plus the cached zone
// occupancy and cost.
struct SettlementState {
  struct Node {
    int star_id = 0;
    int parent = -1;  // index into stars
    std::uint8_t n_offspring = 0;
    double settle_epoch = 0.0;
  };

  std::vector<Node> stars;
  std::vector<int> occupancy;  // per zone cell
  int coverage_gap = 0;        // sum |H - G|
  double t_last = 0.0;
  std::uint64_t id_hash = 0;

  double phi() const { return coverage_gap + t_last / 100.0; }

  bool settled(int star_id) const {
    for (const Node& n : stars)
      if (n.star_id == star_id) return true;
    return false;
  }

  static std::uint64_t node_hash(int star_id, double epoch) {
    return mix64(mix64(static_cast<std::uint64_t>(star_id)) ^
                 std::bit_cast<std::uint64_t>(epoch));
  }
};

// Branching base that keeps the successor tree symmetrical: the n_f-th root
// of the per-expansion budget.
inline double symmetric_branching_base(int b_f_max, int n_f) {
  return std::pow(static_cast<double>(b_f_max), 1.0 / n_f);
}

// phi = sum |H - G| + t_n / 100 (entrywise L1 over the zone cells).
inline double cost_phi(const SettlementState& state, const Zone& zone) {
  int gap = 0;
  for (int i = 0; i < zone.num_cells(); ++i) gap += std::abs(state.occupancy[i] - zone.target[i]);
  return gap + state.t_last / 100.0;
}

inline SettlementState root_state(const Zone& zone, const StarCellIndex& cells) {
  SettlementState s;
  s.stars.push_back({zone.root_star, -1, 0, zone.root_epoch});
  s.occupancy.assign(zone.num_cells(), 0);
  const int cell = cells.of(zone.root_star).zone_idx;
  if (cell >= 0) s.occupancy[cell] = 1;
  s.t_last = zone.root_epoch;
  s.coverage_gap = 0;
  for (int i = 0; i < zone.num_cells(); ++i)
    s.coverage_gap += std::abs(s.occupancy[i] - zone.target[i]);
  s.id_hash = SettlementState::node_hash(zone.root_star, zone.root_epoch);
  return s;
}

// Number of missing stars in the 3x3 block of grid cells around a star.
// Slice indices wrap; cells off the grid or outside the zone contribute 0;
// per-cell deficits are clamped at zero.
inline int fertile_fitness(const SettlementState& state, const StarCell& cell, const Zone& zone) {
  int f = 0;
  for (int p = -1; p <= 1; ++p) {
    const int kr = cell.kr + p;
    if (kr < 1 || kr > kNumRings) continue;
    for (int q = -1; q <= 1; ++q) {
      const int idx = zone.cell_index(kr, wrap_slice(cell.kth + q));
      if (idx < 0) continue;
      f += std::max(0, zone.target[idx] - state.occupancy[idx]);
    }
  }
  return f;
}

namespace detail {

// Neighborhood entries that survive the per-state filter: target unsettled
// and its cell still below target.
struct FilteredEntry {
  const NeighborEntry* entry;
  int zone_idx;
};

inline void filter_neighborhood(const std::vector<NeighborEntry>* nbhd,
                                const SettlementState& state, const StarCellIndex& cells,
                                const Zone& zone, std::vector<FilteredEntry>& out) {
  out.clear();
  if (!nbhd) return;
  for (const NeighborEntry& e : *nbhd) {
    const StarCell& c = cells.of(e.target_id);
    if (c.zone_idx < 0) continue;
    if (state.occupancy[c.zone_idx] >= zone.target[c.zone_idx]) continue;
    if (state.settled(e.target_id)) continue;
    out.push_back({&e, c.zone_idx});
  }
}

inline void append_offspring(SettlementState& state, int parent_idx, const NeighborEntry& entry,
                             int zone_idx, double t_dep) {
  const double t_arr = t_dep + entry.tau;
  state.stars.push_back({entry.target_id, parent_idx, 0, t_arr});
  state.stars[parent_idx].n_offspring++;
  state.occupancy[zone_idx]++;
  state.coverage_gap--;  // filter guarantees H < G before the increment
  state.t_last = std::max(state.t_last, t_arr);
  state.id_hash ^= SettlementState::node_hash(entry.target_id, t_arr);
}

}  // namespace detail

// Multi-star multi-vessel transition model: an iterative constructive
// heuristic draws fertile stars proportionally to their fitness and appends
// m_k alternative offspring sets per drawn star to every partial successor.
// Returns the last completed iteration's list (at most b_f_max states), or
// all single-extension successors in one-vessel mode.
inline std::vector<SettlementState> generate_successors(const SettlementState& ancestor,
                                                        const Zone& zone,
                                                        const StarCellIndex& cells,
                                                        const NeighborhoodCache& cache,
                                                        const SearchParams& params, Rng& rng) {
  struct Fertile {
    int idx;       // index into ancestor.stars
    int fitness;
    std::vector<detail::FilteredEntry> nbhd;  // ancestor-filtered
  };

  std::vector<Fertile> fertile;
  std::vector<detail::FilteredEntry> scratch;
  for (int i = 0; i < static_cast<int>(ancestor.stars.size()); ++i) {
    const auto& node = ancestor.stars[i];
    if (node.n_offspring >= 3) continue;
    const int dep_epoch = static_cast<int>(std::llround(node.settle_epoch + kWaitMyr));
    detail::filter_neighborhood(cache.find(node.star_id, dep_epoch), ancestor, cells, zone, scratch);
    if (scratch.empty()) continue;
    fertile.push_back({i, fertile_fitness(ancestor, cells.of(node.star_id), zone), scratch});
  }
  if (fertile.empty()) return {};

  // Offspring selection working copy is filtered per successor state; the
  // throw-and-multiply pick needs each target's final polar angle.
  auto pick = [&](const std::vector<detail::FilteredEntry>& working, double parent_theta) {
    if (rng.chance(0.5)) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& fe : working) best = std::min(best, fe.entry->tau);
      std::vector<std::size_t> mins;
      for (std::size_t i = 0; i < working.size(); ++i)
        if (working[i].entry->tau == best) mins.push_back(i);
      return mins[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(mins.size()) - 1))];
    }
    std::size_t best_i = 0;
    double best_rate = -1.0;
    for (std::size_t i = 0; i < working.size(); ++i) {
      const double dth = std::fabs(wrap_pi(cells.of(working[i].entry->target_id).theta_f - parent_theta));
      const double rate = dth / (kWaitMyr + working[i].entry->tau);
      if (rate > best_rate) {
        best_rate = rate;
        best_i = i;
      }
    }
    return best_i;
  };

  if (params.mode == SearchParams::Mode::kOneVessel) {
    std::vector<SettlementState> out;
    for (const Fertile& f : fertile) {
      const auto& parent = ancestor.stars[f.idx];
      for (const auto& fe : f.nbhd) {
        if (static_cast<int>(out.size()) >= params.b_f_max) return out;
        SettlementState s = ancestor;
        detail::append_offspring(s, f.idx, *fe.entry, fe.zone_idx, parent.settle_epoch + kWaitMyr);
        out.push_back(std::move(s));
      }
    }
    return out;
  }

  const int n_f = static_cast<int>(fertile.size());
  const double m_hat0 = symmetric_branching_base(params.b_f_max, n_f);
  double f_bar = 0.0;
  for (const Fertile& f : fertile) f_bar += f.fitness;
  f_bar /= n_f;

  std::vector<SettlementState> list = {ancestor};
  bool produced_any = false;

  std::vector<Fertile> remaining = std::move(fertile);
  std::vector<detail::FilteredEntry> working;
  while (!remaining.empty() && static_cast<int>(list.size()) < params.b_f_max) {
    // Biased sampling without replacement proportional to fitness.
    std::vector<double> weights(remaining.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) weights[i] = remaining[i].fitness;
    const std::size_t wi = rng.weighted_index(weights);
    const Fertile chosen = std::move(remaining[wi]);
    remaining.erase(remaining.begin() + wi);

    const double m_hat = params.m_hat ? *params.m_hat : rng.uniform(m_hat0, m_hat0 + 4.0);
    const int m_k = static_cast<int>(std::ceil((chosen.fitness > f_bar ? 1.2 : 1.0) * m_hat));

    const auto& parent_node = ancestor.stars[chosen.idx];
    const double parent_theta = cells.of(parent_node.star_id).theta_f;
    const double t_dep = parent_node.settle_epoch + kWaitMyr;
    const int beta_cap = 3 - parent_node.n_offspring;

    std::vector<SettlementState> next;
    next.reserve(list.size() * m_k);
    bool capped = false;
    for (const SettlementState& base : list) {
      for (int v = 0; v < m_k && !capped; ++v) {
        // Offspring count sampled in [1, cap] with probability proportional
        // to the count itself.
        std::vector<double> beta_w(beta_cap);
        for (int b = 0; b < beta_cap; ++b) beta_w[b] = b + 1.0;
        const int beta = 1 + static_cast<int>(rng.weighted_index(beta_w));

        // Re-filter the chosen star's neighborhood against this state.
        working.clear();
        for (const auto& fe : chosen.nbhd) {
          if (base.occupancy[fe.zone_idx] >= zone.target[fe.zone_idx]) continue;
          if (base.settled(fe.entry->target_id)) continue;
          working.push_back(fe);
        }

        SettlementState s = base;
        int added = 0;
        for (int b = 0; b < beta && !working.empty(); ++b) {
          const std::size_t sel = pick(working, parent_theta);
          const auto fe = working[sel];
          detail::append_offspring(s, chosen.idx, *fe.entry, fe.zone_idx, t_dep);
          ++added;
          working.erase(working.begin() + sel);
          // Drop entries whose cell just filled.
          if (s.occupancy[fe.zone_idx] >= zone.target[fe.zone_idx]) {
            std::erase_if(working, [&](const detail::FilteredEntry& w) {
              return w.zone_idx == fe.zone_idx;
            });
          }
          std::erase_if(working, [&](const detail::FilteredEntry& w) {
            return w.entry->target_id == fe.entry->target_id;
          });
        }
        if (added > 0) {
          next.push_back(std::move(s));
          if (static_cast<int>(next.size()) >= params.b_f_max) capped = true;
        }
      }
      if (capped) break;
    }
    if (!next.empty()) {
      list = std::move(next);
      produced_any = true;
    }
    if (capped) break;
  }

  if (!produced_any) return {};

  // Deduplicate identical star sets and epochs.
  std::unordered_set<std::uint64_t> seen;
  std::vector<SettlementState> out;
  out.reserve(list.size());
  for (SettlementState& s : list) {
    if (seen.insert(s.id_hash).second) out.push_back(std::move(s));
    if (static_cast<int>(out.size()) >= params.b_f_max) break;
  }
  return out;
}

// Debug-build consistency check for states entering the frontier: cached
// occupancy, gap, hash and offspring counts must equal a recount.
inline bool state_invariants_hold(const SettlementState& s, const Zone& zone,
                                  const StarCellIndex& cells) {
  std::vector<int> occ(zone.num_cells(), 0);
  std::vector<int> noff(s.stars.size(), 0);
  std::uint64_t hash = 0;
  double t_last = 0.0;
  for (std::size_t i = 0; i < s.stars.size(); ++i) {
    const auto& node = s.stars[i];
    if (i == 0 && node.parent >= 0) return false;
    if (i > 0 && (node.parent < 0 || node.parent >= static_cast<int>(i))) return false;
    if (node.parent >= 0) {
      noff[node.parent]++;
      if (node.settle_epoch < s.stars[node.parent].settle_epoch + kWaitMyr + 1.0) return false;
    }
    const int cell = cells.of(node.star_id).zone_idx;
    if (cell >= 0) occ[cell]++;
    hash ^= SettlementState::node_hash(node.star_id, node.settle_epoch);
    t_last = std::max(t_last, node.settle_epoch);
  }
  for (std::size_t i = 0; i < s.stars.size(); ++i)
    if (noff[i] > 3 || noff[i] != s.stars[i].n_offspring) return false;
  int gap = 0;
  for (int i = 0; i < zone.num_cells(); ++i) {
    if (occ[i] != s.occupancy[i]) return false;
    gap += std::abs(occ[i] - zone.target[i]);
  }
  return gap == s.coverage_gap && hash == s.id_hash && t_last == s.t_last;
}

struct BbfsStats {
  int expansions = 0;
  int generated = 0;
  int frontier_peak = 0;
};

// Stochastic Beam Best-First Search over settlement states. The frontier is
// a priority queue on phi; each iteration expands the best state, retains
// b_f of its successors (best ones with probability p_branch, otherwise a
// biased sample favouring low phi), and truncates the frontier to b_w.
inline SettlementState bbfs(const Zone& zone, const StarCellIndex& cells,
                            const NeighborhoodCache& cache, const SearchParams& params,
                            std::uint64_t seed, BbfsStats* stats = nullptr) {
  params.check();
  Rng rng(seed);

  SettlementState best = root_state(zone, cells);

  // (phi, insertion sequence) ordering keeps expansion deterministic.
  struct FrontierEntry {
    double phi;
    std::uint64_t seq;
    SettlementState state;
    bool operator<(const FrontierEntry& o) const {
      return phi != o.phi ? phi < o.phi : seq < o.seq;
    }
  };
  std::set<FrontierEntry> frontier;
  std::unordered_set<std::uint64_t> seen;
  std::uint64_t seq = 0;

  frontier.insert({best.phi(), seq++, best});
  seen.insert(best.id_hash);

  BbfsStats local;
  while (!frontier.empty() && local.expansions < params.expansion_cap) {
    SettlementState ancestor = std::move(frontier.extract(frontier.begin()).value().state);
    std::vector<SettlementState> succ =
        generate_successors(ancestor, zone, cells, cache, params, rng);
    ++local.expansions;
    if (succ.empty()) continue;
    local.generated += static_cast<int>(succ.size());

    std::vector<double> phis(succ.size());
    for (std::size_t i = 0; i < succ.size(); ++i) {
      phis[i] = succ[i].phi();
      if (phis[i] < best.phi()) best = succ[i];
    }

    // Probabilistic branching: retain b_f successors.
    std::vector<std::size_t> kept;
    if (static_cast<int>(succ.size()) <= params.b_f) {
      kept.resize(succ.size());
      for (std::size_t i = 0; i < succ.size(); ++i) kept[i] = i;
    } else if (rng.chance(params.p_branch)) {
      kept.resize(succ.size());
      for (std::size_t i = 0; i < succ.size(); ++i) kept[i] = i;
      std::stable_sort(kept.begin(), kept.end(),
                       [&](std::size_t a, std::size_t b) { return phis[a] < phis[b]; });
      kept.resize(params.b_f);
    } else {
      // Biased sampling without replacement, weights favouring low phi.
      double phi_max = 0.0;
      for (double p : phis) phi_max = std::max(phi_max, p);
      std::vector<double> w(phis.size());
      std::vector<std::size_t> idx(phis.size());
      for (std::size_t i = 0; i < phis.size(); ++i) {
        w[i] = phi_max - phis[i] + 1.0;
        idx[i] = i;
      }
      for (int k = 0; k < params.b_f; ++k) {
        const std::size_t j = rng.weighted_index(std::span<const double>(w.data(), idx.size()));
        kept.push_back(idx[j]);
        idx[j] = idx[idx.size() - 1];
        w[j] = w[idx.size() - 1];
        idx.pop_back();
        w.pop_back();
      }
    }

    for (std::size_t i : kept) {
      if (!seen.insert(succ[i].id_hash).second) continue;
      assert(state_invariants_hold(succ[i], zone, cells));
      frontier.insert({phis[i], seq++, std::move(succ[i])});
    }
    while (static_cast<int>(frontier.size()) > params.b_w)
      frontier.erase(std::prev(frontier.end()));
    local.frontier_peak = std::max(local.frontier_peak, static_cast<int>(frontier.size()));
  }

  if (stats) *stats = local;
  return best;
}

}  // namespace gsettle
