// gsettle: build, refine and score galaxy settlement trees.
//
// Pipeline stages (each reads/writes the shared solution format):
//   gen-catalog -> neighborhoods -> search -> explode -> prune -> adjust
//   -> reopt-times -> score / validate, plus mobility and target-dist
//   plot-data exports.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "gsettle/config.hpp"
#include "gsettle/mobility.hpp"
#include "gsettle/neighborhood.hpp"
#include "gsettle/refine.hpp"
#include "gsettle/reopt.hpp"
#include "gsettle/score.hpp"
#include "gsettle/search.hpp"
#include "gsettle/solution_io.hpp"
#include "gsettle/transfer.hpp"

namespace {

using namespace gsettle;

std::uint64_t curve_hash_of(const RunConfig& cfg) {
  if (!cfg.curve_file.empty()) return fnv1a_file(cfg.resolve(cfg.curve_file));
  nlohmann::json j;
  j["k"] = std::vector<double>(cfg.curve.k.begin(), cfg.curve.k.end());
  const std::string s = j.dump();
  return fnv1a(s.data(), s.size());
}

std::uint64_t catalog_hash_of(const RunConfig& cfg) {
  return fnv1a_file(cfg.resolve(cfg.catalog_file));
}

StarCatalog load_catalog_of(const RunConfig& cfg) {
  if (cfg.catalog_file.empty()) throw std::runtime_error("config sets no catalog file");
  return StarCatalog::load(cfg.resolve(cfg.catalog_file));
}

Zone find_zone(const RunConfig& cfg, const std::string& name) {
  const auto zones = load_zones(cfg.resolve(cfg.zones_file));
  for (const Zone& z : zones)
    if (z.name == name) return z;
  throw std::runtime_error("zone not found in zones file: " + name);
}

std::string cache_dir_of(const RunConfig& cfg, const std::string& zone) {
  return (std::filesystem::path(cfg.out_dir) / ("cache_" + zone)).string();
}

SettlementTree load_checked_solution(const RunConfig& cfg, const std::string& path) {
  SolutionHashes hashes;
  SettlementTree tree = load_solution(path, &hashes);
  if (hashes.curve != curve_hash_of(cfg))
    throw std::runtime_error("solution curve hash does not match the configured curve");
  if (hashes.catalog != catalog_hash_of(cfg))
    throw std::runtime_error("solution catalog hash does not match the configured catalog");
  return tree;
}

// Validation gate before any stage result is written.
int write_validated(const RunConfig& cfg, const StarCatalog& catalog, const SettlementTree& tree,
                    const std::string& path) {
  const auto violations = validate(tree, cfg.curve, catalog, cfg.vessels);
  save_solution(tree, path, curve_hash_of(cfg), catalog_hash_of(cfg));
  if (!violations.empty()) {
    std::cerr << "validation FAILED (" << violations.size() << " violations):\n";
    for (const auto& v : violations) std::cerr << "  " << v << "\n";
    return 1;
  }
  return 0;
}

nlohmann::json merit_json(const MeritReport& rep) {
  nlohmann::json j;
  j["N"] = rep.n;
  j["E_r"] = rep.e_r;
  j["E_theta"] = rep.e_theta;
  j["J2"] = rep.j2;
  j["dv_used_kms"] = rep.dv_used_kms;
  j["dv_max_kms"] = rep.dv_max_kms;
  j["J3"] = rep.j3;
  j["J"] = rep.j;
  return j;
}

SettlementTree materialize(const SettlementState& state, const RunConfig& cfg,
                           const StarCatalog& catalog) {
  SettlementTree tree;
  for (std::size_t i = 0; i < state.stars.size(); ++i) {
    const auto& node = state.stars[i];
    if (node.parent < 0) {
      tree.add_root(node.star_id, node.settle_epoch);
    } else {
      TransferLeg placeholder;
      placeholder.origin_id = state.stars[node.parent].star_id;
      placeholder.dest_id = node.star_id;
      placeholder.t_dep = state.stars[node.parent].settle_epoch + kWaitMyr;
      placeholder.t_arr = node.settle_epoch;
      tree.add_settlement(node.parent, node.star_id, node.settle_epoch, placeholder);
    }
  }
  solve_tree_legs(tree, cfg.curve, catalog);
  return tree;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"galaxy settlement-tree solver toolkit"};
  app.require_subcommand(1);

  std::string config_path, zone_name, in_path, out_path, json_path;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int runs_override = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", config_path, "run configuration JSON");
    if (needs_config) opt->required();
    cmd->add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { seed_override = s; seed_set = true; },
           "override the config seed");
  };

  // gen-catalog
  auto* gen = app.add_subcommand("gen-catalog", "generate a synthetic star catalog");
  int gen_n = 1000;
  std::string gen_mode = "planar";
  add_common(gen);
  gen->add_option("--n", gen_n, "number of stars");
  gen->add_option("--mode", gen_mode, "planar|inclined");
  gen->add_option("--out", out_path, "output catalog CSV")->required();

  // neighborhoods
  auto* nbhd = app.add_subcommand("neighborhoods", "precompute minimum-time Hill neighborhoods");
  add_common(nbhd);
  nbhd->add_option("--zone", zone_name, "zone name")->required();

  // search
  auto* search_cmd = app.add_subcommand("search", "beam best-first set-covering search");
  add_common(search_cmd);
  search_cmd->add_option("--zone", zone_name, "zone name")->required();
  search_cmd->add_option("--runs", runs_override, "parallel seeded runs");
  search_cmd->add_option("--out", out_path, "output solution file")->required();

  // refinement stages
  auto* reopt_cmd = app.add_subcommand("reopt-times", "push terminal epochs and re-optimize transfer times");
  add_common(reopt_cmd);
  reopt_cmd->add_option("--in", in_path)->required();
  reopt_cmd->add_option("--out", out_path)->required();

  auto* explode_cmd = app.add_subcommand("explode", "grow the tree cell-by-cell via the capacity ILP");
  add_common(explode_cmd);
  explode_cmd->add_option("--in", in_path)->required();
  explode_cmd->add_option("--out", out_path)->required();
  int explode_multiple = 0;
  std::string marginals_path;
  explode_cmd->add_option("--multiple", explode_multiple, "target-distribution multiple");
  explode_cmd->add_option("--marginals", marginals_path,
                          "JSON with explicit rows/cols desired marginals");

  auto* prune_cmd = app.add_subcommand("prune", "greedy terminal removal while J2 improves");
  add_common(prune_cmd);
  prune_cmd->add_option("--in", in_path)->required();
  prune_cmd->add_option("--out", out_path)->required();

  auto* adjust_cmd = app.add_subcommand("adjust", "terminal-star radius replacement per ring");
  add_common(adjust_cmd);
  adjust_cmd->add_option("--in", in_path)->required();
  adjust_cmd->add_option("--out", out_path)->required();
  int adjust_ring = -1;
  adjust_cmd->add_option("--ring", adjust_ring, "ring index 0..29 (default: sweep all)");

  // scoring
  auto* score_cmd = app.add_subcommand("score", "merit report for a solution");
  add_common(score_cmd);
  score_cmd->add_option("--in", in_path)->required();
  score_cmd->add_option("--json", json_path, "also write the report to a JSON file");

  auto* validate_cmd = app.add_subcommand("validate", "full rules validation");
  add_common(validate_cmd);
  validate_cmd->add_option("--in", in_path)->required();
  bool primer_flag = false;
  validate_cmd->add_flag("--primer", primer_flag, "also report the primer optimality test per leg");

  // plot data
  auto* mob = app.add_subcommand("mobility", "reachable (dr, dtheta_f) contour data");
  add_common(mob);
  double mob_r0 = 8.0, mob_t0 = 0.0;
  std::vector<int> mob_taus;
  mob->add_option("--r0", mob_r0, "departure radius, kpc");
  mob->add_option("--t0", mob_t0, "departure epoch, Myr");
  mob->add_option("--tau", mob_taus, "allowed flight times, Myr")->required();
  mob->add_option("--out", out_path, "output CSV")->required();

  auto* tdist = app.add_subcommand("target-dist", "theoretical optimum occupancy matrix");
  add_common(tdist, false);
  int tdist_multiple = 1;
  tdist->add_option("--multiple", tdist_multiple, "multiple n of the 512-star distribution");
  tdist->add_option("--out", out_path, "output JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (tdist->parsed()) {
      const TargetDistribution dist = target_distribution(tdist_multiple);
      nlohmann::json j;
      j["total"] = 512 * tdist_multiple;
      j["rows"] = dist.ring_totals;
      j["cols"] = dist.slice_totals;
      auto& cells = j["cells"] = nlohmann::json::array();
      for (int r = 0; r < kNumRings; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < kNumSlices; ++c) row.push_back(dist.cells[r * kNumSlices + c]);
        cells.push_back(row);
      }
      std::ofstream out(out_path);
      out << j.dump(2) << "\n";
      std::cout << "target-dist: wrote " << out_path << "\n";
      return 0;
    }

    RunConfig cfg = RunConfig::load(config_path);
    if (seed_set) cfg.seed = seed_override;

    if (gen->parsed()) {
      const CatalogMode mode = gen_mode == "inclined" ? CatalogMode::kInclined : CatalogMode::kPlanar;
      const StarCatalog cat = StarCatalog::generate(gen_n, cfg.seed, mode, cfg.density.g_r);
      cat.save(out_path);
      std::cout << "gen-catalog: " << cat.size() << " stars -> " << out_path << "\n";
      return 0;
    }

    const StarCatalog catalog = load_catalog_of(cfg);

    if (nbhd->parsed()) {
      const Zone zone = find_zone(cfg, zone_name);
      const StarCellIndex cells(cfg.curve, catalog, zone);
      std::vector<int> targets = cells.zone_star_ids();
      std::vector<int> origins = targets;
      if (std::find(origins.begin(), origins.end(), zone.root_star) == origins.end())
        origins.push_back(zone.root_star);
      std::vector<int> epochs;
      for (int e = 0; e <= 89; ++e) epochs.push_back(e);
      NeighborhoodCache cache = build_neighborhoods(cfg.curve, catalog, origins, targets, epochs,
                                                    cfg.thresholds, cfg.threads);
      cache.zone_name = zone.name;
      cache.curve_hash = curve_hash_of(cfg);
      cache.catalog_hash = catalog_hash_of(cfg);
      cache.save(cache_dir_of(cfg, zone.name));
      std::cout << "neighborhoods: " << cache.num_neighborhoods() << " neighborhoods, "
                << cache.num_entries() << " entries -> " << cache_dir_of(cfg, zone.name) << "\n";
      return 0;
    }

    if (search_cmd->parsed()) {
      const Zone zone = find_zone(cfg, zone_name);
      if (std::fabs(zone.root_epoch - std::llround(zone.root_epoch)) > 1e-9)
        throw std::runtime_error("search requires an integral root epoch (1-Myr cache grid)");
      const StarCellIndex cells(cfg.curve, catalog, zone);
      const NeighborhoodCache cache = NeighborhoodCache::load(cache_dir_of(cfg, zone.name));
      if (cache.catalog_hash != catalog_hash_of(cfg) || cache.curve_hash != curve_hash_of(cfg))
        throw std::runtime_error("neighborhood cache does not match the configured inputs");

      const int runs = runs_override > 0 ? runs_override : cfg.runs;
      std::vector<SettlementState> results(runs);
      std::vector<std::thread> pool;
      const int workers = std::max(1, std::min(cfg.threads, runs));
      std::atomic<int> next{0};
      auto work = [&]() {
        for (int i = next.fetch_add(1); i < runs; i = next.fetch_add(1))
          results[i] = bbfs(zone, cells, cache, cfg.search, cfg.seed + i);
      };
      for (int w = 1; w < workers; ++w) pool.emplace_back(work);
      work();
      for (auto& t : pool) t.join();

      int best = 0;
      for (int i = 1; i < runs; ++i)
        if (results[i].phi() < results[best].phi()) best = i;
      std::cout << "search: zone " << zone.name << ", best phi " << results[best].phi() << " ("
                << results[best].stars.size() << " stars, run " << best << ")\n";
      const SettlementTree tree = materialize(results[best], cfg, catalog);
      return write_validated(cfg, catalog, tree, out_path);
    }

    if (reopt_cmd->parsed()) {
      SettlementTree tree = load_checked_solution(cfg, in_path);
      const int pushed = push_terminal_epochs(tree, cfg.curve, catalog, cfg.vessels);
      const ReoptResult res = reoptimize_times(tree, cfg.curve, catalog, cfg.vessels, cfg.reopt);
      std::cout << "reopt-times: pushed " << pushed << " terminal legs, total DeltaV "
                << res.dv_before_kms << " -> " << res.dv_after_kms << " km/s ("
                << res.accepted_iters << " accepted iterations)\n";
      return write_validated(cfg, catalog, tree, out_path);
    }

    if (explode_cmd->parsed()) {
      SettlementTree tree = load_checked_solution(cfg, in_path);
      const GridCounts n0 = settled_counts(tree, cfg.curve, catalog);
      const GridCounts x_max = explosion_bounds(tree, cfg.curve, catalog, cfg.vessels.horizon_myr,
                                                cfg.vessels.wait_myr, cfg.explode_dt_avg);
      std::vector<int> rows_des, cols_des;
      if (!marginals_path.empty()) {
        std::ifstream in(cfg.resolve(marginals_path));
        if (!in) throw std::runtime_error("cannot open marginals file: " + marginals_path);
        const nlohmann::json j = nlohmann::json::parse(in);
        rows_des = j.at("rows").get<std::vector<int>>();
        cols_des = j.at("cols").get<std::vector<int>>();
      } else {
        const TargetDistribution dist =
            target_distribution(explode_multiple > 0 ? explode_multiple : cfg.explode_multiple);
        rows_des = dist.ring_totals;
        cols_des = dist.slice_totals;
      }
      const ExplosionPlan plan = explosion_ilp(n0.v, rows_des, cols_des, x_max.v);
      ExplosionReport report;
      tree = realize_explosion(tree, plan, cfg.curve, catalog, cfg.thresholds, cfg.vessels, &report);
      std::cout << "explode: plan " << plan.total() << " stars (objective " << plan.objective
                << "), settled " << report.added << "\n";
      for (const auto& s : report.shortfalls) std::cout << "  " << s << "\n";
      return write_validated(cfg, catalog, tree, out_path);
    }

    if (prune_cmd->parsed()) {
      SettlementTree tree = load_checked_solution(cfg, in_path);
      std::vector<double> steps;
      const int before = tree.size();
      tree = prune(tree, cfg.curve, catalog, cfg.density, &steps);
      std::cout << "prune: removed " << (before - tree.size()) << " stars in " << steps.size()
                << " steps\n";
      return write_validated(cfg, catalog, tree, out_path);
    }

    if (adjust_cmd->parsed()) {
      SettlementTree tree = load_checked_solution(cfg, in_path);
      int applied = 0;
      const int lo = adjust_ring >= 0 ? adjust_ring : 0;
      const int hi = adjust_ring >= 0 ? adjust_ring : 29;
      for (int k = lo; k <= hi; ++k) {
        AdjustReport rep;
        tree = adjust_sequence(tree, cfg.curve, catalog, cfg.thresholds, cfg.vessels, k,
                               cfg.density, &rep);
        if (rep.applied) {
          ++applied;
          std::cout << "adjust ring " << k << ": star " << rep.removed_star << " -> "
                    << rep.added_star << ", E_r " << rep.e_r_before << " -> " << rep.e_r_after
                    << "\n";
        }
      }
      std::cout << "adjust: " << applied << " replacements applied\n";
      return write_validated(cfg, catalog, tree, out_path);
    }

    if (score_cmd->parsed()) {
      const SettlementTree tree = load_checked_solution(cfg, in_path);
      const auto violations = validate(tree, cfg.curve, catalog, cfg.vessels);
      if (!violations.empty()) {
        std::cerr << "score: solution is invalid:\n";
        for (const auto& v : violations) std::cerr << "  " << v << "\n";
        return 1;
      }
      const MeritReport rep = merit(tree, cfg.curve, catalog, cfg.vessels, cfg.density);
      const nlohmann::json j = merit_json(rep);
      std::cout << j.dump(2) << "\n";
      if (!json_path.empty()) {
        std::ofstream out(json_path);
        out << j.dump(2) << "\n";
      }
      return 0;
    }

    if (validate_cmd->parsed()) {
      const SettlementTree tree = load_checked_solution(cfg, in_path);
      const auto violations = validate(tree, cfg.curve, catalog, cfg.vessels);
      for (const auto& v : violations) std::cout << v << "\n";
      if (primer_flag) {
        for (const SettledStar& s : tree.stars) {
          if (!s.leg || s.leg->impulses.size() != 2) continue;
          if (s.leg->impulses.front().dv_kms.norm() == 0.0 ||
              s.leg->impulses.back().dv_kms.norm() == 0.0)
            continue;
          const PrimerHistory ph = primer_history(cfg.curve, catalog, *s.leg, 50);
          if (!ph.optimal())
            std::cout << "primer flag: leg to star " << s.leg->dest_id << " max interior |lambda_v| "
                      << ph.max_interior << "\n";
        }
      }
      if (violations.empty()) {
        std::cout << "valid: " << tree.size() << " stars, total DeltaV " << tree.total_dv_kms()
                  << " km/s\n";
        return 0;
      }
      return 1;
    }

    if (mob->parsed()) {
      std::vector<double> dr_grid, dth_grid;
      for (double dr = -6.0; dr <= 6.0 + 1e-9; dr += 0.25) dr_grid.push_back(dr);
      for (double dth = -kPi; dth < kPi; dth += kPi / 64.0) dth_grid.push_back(dth);
      const auto pts = mobility_map(cfg.curve, mob_r0, mob_t0, mob_taus,
                                    cfg.vessels.settler.dv_impulse_max_kms,
                                    cfg.vessels.settler.dv_total_max_kms, dr_grid, dth_grid);
      std::ofstream out(out_path);
      out << "tau,dr,dtheta_f\n";
      char buf[96];
      for (const auto& p : pts) {
        std::snprintf(buf, sizeof(buf), "%g,%g,%g\n", p.tau, p.dr, p.dtheta_f);
        out << buf;
      }
      std::cout << "mobility: " << pts.size() << " reachable points -> " << out_path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
