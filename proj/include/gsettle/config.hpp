#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsettle/density.hpp"
#include "gsettle/grid.hpp"
#include "gsettle/hcw.hpp"
#include "gsettle/reopt.hpp"
#include "gsettle/rotation_curve.hpp"
#include "gsettle/score.hpp"
#include "gsettle/search.hpp"

namespace gsettle {

// Rotation-curve JSON: { "k": [k0, ..., k8] }
inline RotationCurve load_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curve file: " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  const auto k = j.at("k").get<std::vector<double>>();
  if (k.size() != 9) throw std::runtime_error("curve file must list 9 coefficients: " + path);
  RotationCurve c;
  std::copy(k.begin(), k.end(), c.k.begin());
  return c;
}

inline void save_curve(const RotationCurve& curve, const std::string& path) {
  nlohmann::json j;
  j["k"] = std::vector<double>(curve.k.begin(), curve.k.end());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

// Zones JSON: {"zones": [{name, kr: [lo, hi], ktheta: [lo, hi],
// root_star, root_epoch, G: [[...]]}]}; a wrapping slice window is
// expressed as lo > hi. G rows follow ascending rings.
inline std::vector<Zone> load_zones(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open zones file: " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  std::vector<Zone> zones;
  for (const auto& zj : j.at("zones")) {
    Zone z;
    z.name = zj.at("name").get<std::string>();
    z.kr_lo = zj.at("kr").at(0).get<int>();
    z.kr_hi = zj.at("kr").at(1).get<int>();
    z.kth_lo = zj.at("ktheta").at(0).get<int>();
    z.kth_hi = zj.at("ktheta").at(1).get<int>();
    z.root_star = zj.at("root_star").get<int>();
    z.root_epoch = zj.at("root_epoch").get<double>();
    for (const auto& row : zj.at("G"))
      for (const auto& cell : row) z.target.push_back(cell.get<int>());
    z.check();
    zones.push_back(std::move(z));
  }
  return zones;
}

struct RunConfig {
  std::string base_dir;
  std::string curve_file;    // optional; empty = bundled flat curve
  std::string catalog_file;
  std::string zones_file;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int runs = 1;
  int threads = 1;

  RotationCurve curve = RotationCurve::flat(0.235);
  ThresholdTable thresholds = ThresholdTable::defaults();
  SearchParams search;
  VesselRules vessels;
  DensityErrorConfig density;
  ReoptOptions reopt;
  int explode_multiple = 1;
  double explode_dt_avg = 6.0;

  std::string resolve(const std::string& p) const {
    if (p.empty() || p.front() == '/') return p;
    return (std::filesystem::path(base_dir) / p).string();
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    const nlohmann::json j = nlohmann::json::parse(in);
    RunConfig c;
    c.base_dir = std::filesystem::path(path).parent_path().string();

    if (!j.contains("seed")) throw std::runtime_error("config must set an explicit seed");
    c.seed = j.at("seed").get<std::uint64_t>();
    c.runs = j.value("runs", 1);
    c.threads = j.value("threads", 1);
    c.catalog_file = j.value("catalog", "");
    c.zones_file = j.value("zones", "");
    c.curve_file = j.value("curve", "");
    c.out_dir = c.resolve(j.value("out_dir", "out"));

    if (!c.curve_file.empty()) c.curve = load_curve(c.resolve(c.curve_file));

    if (j.contains("thresholds")) {
      c.thresholds.rows.clear();
      for (const auto& row : j.at("thresholds")) {
        ThresholdBand b;
        b.tau_max = row.contains("tau_max") ? row.at("tau_max").get<double>()
                                            : std::numeric_limits<double>::infinity();
        b.dv_i_max_kms = row.at("dv_i_max").get<double>();
        b.dv_tot_max_kms = row.at("dv_tot_max").get<double>();
        c.thresholds.rows.push_back(b);
      }
      c.thresholds.check();
    }

    if (j.contains("search")) {
      const auto& s = j.at("search");
      c.search.b_w = s.value("b_w", c.search.b_w);
      c.search.b_f_max = s.value("b_f_max", c.search.b_f_max);
      c.search.b_f = s.value("b_f", c.search.b_f);
      c.search.p_branch = s.value("p_branch", c.search.p_branch);
      c.search.expansion_cap = s.value("expansion_cap", c.search.expansion_cap);
      if (s.contains("m_hat") && !s.at("m_hat").is_null())
        c.search.m_hat = s.at("m_hat").get<double>();
      const std::string mode = s.value("mode", "multi");
      if (mode == "multi") c.search.mode = SearchParams::Mode::kMulti;
      else if (mode == "one-vessel") c.search.mode = SearchParams::Mode::kOneVessel;
      else throw std::runtime_error("unknown search mode: " + mode);
      c.search.check();
    }

    if (j.contains("vessels")) {
      auto read = [&](const char* name, VesselLimits& lim) {
        if (!j.at("vessels").contains(name)) return;
        const auto& v = j.at("vessels").at(name);
        lim.max_impulses = v.value("max_impulses", lim.max_impulses);
        lim.dv_impulse_max_kms = v.value("dv_impulse_max", lim.dv_impulse_max_kms);
        lim.dv_total_max_kms = v.value("dv_total_max", lim.dv_total_max_kms);
      };
      read("settler", c.vessels.settler);
      read("mother", c.vessels.mother);
      read("fast", c.vessels.fast);
    }

    if (j.contains("density")) {
      const auto& d = j.at("density");
      c.density.s_r = d.value("s_r", c.density.s_r);
      c.density.s_theta = d.value("s_theta", c.density.s_theta);
      if (d.contains("g_r_values"))
        c.density.g_r = RadialDensity(d.at("g_r_values").get<std::vector<double>>());
      if (d.contains("g_theta_values"))
        c.density.g_theta = AngularDensity(d.at("g_theta_values").get<std::vector<double>>());
    }

    if (j.contains("reopt")) {
      const auto& r = j.at("reopt");
      c.reopt.delta_min = r.value("delta_min", c.reopt.delta_min);
      c.reopt.delta_max = r.value("delta_max", c.reopt.delta_max);
      c.reopt.iters = r.value("iters", c.reopt.iters);
      c.reopt.fd_step = r.value("fd_step", c.reopt.fd_step);
    }

    if (j.contains("explode")) {
      const auto& e = j.at("explode");
      c.explode_multiple = e.value("multiple", c.explode_multiple);
      c.explode_dt_avg = e.value("dt_avg", c.explode_dt_avg);
    }
    return c;
  }
};

}  // namespace gsettle
