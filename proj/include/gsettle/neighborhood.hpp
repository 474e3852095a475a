#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gsettle/catalog.hpp"
#include "gsettle/grid.hpp"
#include "gsettle/hcw.hpp"

namespace gsettle {

struct NeighborEntry {
  int target_id = 0;
  double tau = 0.0;           // minimum feasible flight time, Myr
  double dv_total_kms = 0.0;  // linear-model estimate
};

// Minimum-time Hill neighborhoods on the 1-Myr epoch grid, keyed by
// (origin star, departure epoch). Immutable once built; solution-dependent
// filtering (full cells, settled stars) happens at query time.
class NeighborhoodCache {
 public:
  std::string zone_name;
  std::uint64_t curve_hash = 0, catalog_hash = 0;
  std::vector<int> epochs;

  static std::uint64_t key(int star_id, int epoch) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(star_id)) << 16) |
           static_cast<std::uint32_t>(epoch & 0xffff);
  }

  // Empty neighborhoods are not stored; find() returning nullptr means empty.
  void put(int star_id, int epoch, std::vector<NeighborEntry> entries) {
    if (entries.empty()) return;
    map_[key(star_id, epoch)] = std::move(entries);
  }

  const std::vector<NeighborEntry>* find(int star_id, int epoch) const {
    auto it = map_.find(key(star_id, epoch));
    return it == map_.end() ? nullptr : &it->second;
  }

  std::size_t num_neighborhoods() const { return map_.size(); }
  std::size_t num_entries() const {
    std::size_t n = 0;
    for (const auto& [k, v] : map_) n += v.size();
    return n;
  }

  bool operator==(const NeighborhoodCache& o) const {
    if (map_.size() != o.map_.size()) return false;
    for (const auto& [k, v] : map_) {
      auto it = o.map_.find(k);
      if (it == o.map_.end() || it->second.size() != v.size()) return false;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].target_id != it->second[i].target_id || v[i].tau != it->second[i].tau ||
            v[i].dv_total_kms != it->second[i].dv_total_kms)
          return false;
      }
    }
    return true;
  }

  // One CSV shard per epoch plus a JSON manifest.
  void save(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["zone"] = zone_name;
    manifest["curve_hash"] = curve_hash;
    manifest["catalog_hash"] = catalog_hash;
    manifest["epochs"] = epochs;
    std::vector<std::string> files;
    for (int e : epochs) {
      char name[64];
      std::snprintf(name, sizeof(name), "nbhd_e%03d.csv", e);
      files.push_back(name);
      std::ofstream out(fs::path(dir) / name);
      if (!out) throw std::runtime_error("cannot write cache shard in " + dir);
      out << "origin,target,tau,dv_total_kms\n";
      // Deterministic order: ascending origin id.
      std::vector<std::uint64_t> keys;
      for (const auto& [k, v] : map_)
        if (static_cast<int>(k & 0xffff) == e) keys.push_back(k);
      std::sort(keys.begin(), keys.end());
      char line[128];
      for (std::uint64_t k : keys) {
        const int origin = static_cast<int>(k >> 16);
        for (const NeighborEntry& n : map_.at(k)) {
          std::snprintf(line, sizeof(line), "%d,%d,%.17g,%.17g\n", origin, n.target_id, n.tau,
                        n.dv_total_kms);
          out << line;
        }
      }
    }
    manifest["files"] = files;
    std::ofstream mout(fs::path(dir) / "manifest.json");
    mout << manifest.dump(2) << "\n";
  }

  static NeighborhoodCache load(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream min(fs::path(dir) / "manifest.json");
    if (!min) throw std::runtime_error("cannot open cache manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(min);
    NeighborhoodCache cache;
    cache.zone_name = manifest.value("zone", "");
    cache.curve_hash = manifest.value("curve_hash", 0ULL);
    cache.catalog_hash = manifest.value("catalog_hash", 0ULL);
    cache.epochs = manifest["epochs"].get<std::vector<int>>();
    for (const auto& fname : manifest["files"].get<std::vector<std::string>>()) {
      int epoch = 0;
      if (std::sscanf(fname.c_str(), "nbhd_e%d.csv", &epoch) != 1)
        throw std::runtime_error("unrecognized cache shard name " + fname);
      std::ifstream in(fs::path(dir) / fname);
      if (!in) throw std::runtime_error("missing cache shard " + fname);
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        int origin, target;
        double tau, dv;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &origin, &target, &tau, &dv) != 4)
          throw std::runtime_error("malformed cache row in " + fname);
        cache.map_[key(origin, epoch)].push_back({target, tau, dv});
      }
    }
    return cache;
  }

 private:
  std::unordered_map<std::uint64_t, std::vector<NeighborEntry>> map_;
};

// Build the minimum-time neighborhoods of every origin at every grid epoch.
// Targets are the zone stars; every entry respects its threshold band and
// arrives strictly before the horizon. Embarrassingly parallel over epochs.
inline NeighborhoodCache build_neighborhoods(const RotationCurve& curve, const StarCatalog& catalog,
                                             const std::vector<int>& origin_ids,
                                             const std::vector<int>& target_ids,
                                             const std::vector<int>& epochs,
                                             const ThresholdTable& thresholds,
                                             int n_threads = 1) {
  NeighborhoodCache cache;
  cache.epochs = epochs;
  for (int e : epochs)
    if (e < 0 || e > static_cast<int>(kHorizonMyr))
      throw std::invalid_argument("build_neighborhoods: epoch outside [0, 90]");

  struct Job {
    int origin, epoch;
  };
  std::vector<Job> jobs;
  for (int e : epochs)
    for (int o : origin_ids) jobs.push_back({o, e});

  std::vector<std::vector<NeighborEntry>> results(jobs.size());
  auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      const Star& origin = catalog.by_id(jobs[j].origin);
      std::vector<NeighborEntry> entries;
      for (int tid : target_ids) {
        if (tid == jobs[j].origin) continue;
        const auto mt = min_time_transfer(curve, origin, catalog.by_id(tid),
                                          static_cast<double>(jobs[j].epoch), thresholds,
                                          kHorizonMyr - 1.0);
        if (mt) entries.push_back({tid, mt->tau, mt->transfer.dv_total_kms});
      }
      results[j] = std::move(entries);
    }
  };

  n_threads = std::max(1, n_threads);
  if (n_threads == 1 || jobs.size() < 2) {
    worker(0, jobs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (jobs.size() + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(jobs.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t j = 0; j < jobs.size(); ++j)
    cache.put(jobs[j].origin, jobs[j].epoch, std::move(results[j]));
  return cache;
}

}  // namespace gsettle
