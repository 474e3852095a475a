#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsettle/tree.hpp"

namespace gsettle {

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

// Line-oriented solution format:
//   # gsettle-solution v1
//   # curve_hash=<hex>  /  # catalog_hash=<hex>
//   R,<star_id>,<settle_epoch>                          root settlements
//   L,<vessel_id>,<vessel_type>,<origin>,<dest>,<t_dep>,<t_arr>
//   I,<epoch>,<dvx>,<dvy>,<dvz>                         impulses (km/s)
// Legs are written in settle order so the file is topologically readable.
inline void save_solution(const SettlementTree& tree, const std::string& path,
                          std::uint64_t curve_hash, std::uint64_t catalog_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write solution file: " + path);
  char buf[256];
  out << "# gsettle-solution v1\n";
  std::snprintf(buf, sizeof(buf), "# curve_hash=%016llx\n", static_cast<unsigned long long>(curve_hash));
  out << buf;
  std::snprintf(buf, sizeof(buf), "# catalog_hash=%016llx\n", static_cast<unsigned long long>(catalog_hash));
  out << buf;
  for (int idx : tree.settle_order()) {
    const SettledStar& s = tree.stars[idx];
    if (s.parent < 0) {
      std::snprintf(buf, sizeof(buf), "R,%d,%.17g\n", s.star_id, s.settle_epoch);
      out << buf;
      continue;
    }
    if (!s.leg) throw std::runtime_error("save_solution: non-root star without a leg");
    const TransferLeg& leg = *s.leg;
    std::snprintf(buf, sizeof(buf), "L,%d,%s,%d,%d,%.17g,%.17g\n", leg.vessel_id,
                  vessel_name(leg.vessel), leg.origin_id, leg.dest_id, leg.t_dep, leg.t_arr);
    out << buf;
    for (const Impulse& imp : leg.impulses) {
      std::snprintf(buf, sizeof(buf), "I,%.17g,%.17g,%.17g,%.17g\n", imp.epoch, imp.dv_kms.x(),
                    imp.dv_kms.y(), imp.dv_kms.z());
      out << buf;
    }
  }
}

struct SolutionHashes {
  std::uint64_t curve = 0;
  std::uint64_t catalog = 0;
};

inline SettlementTree load_solution(const std::string& path, SolutionHashes* hashes = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open solution file: " + path);
  SettlementTree tree;
  SolutionHashes h;
  std::string line;
  int line_no = 0;
  int current_leg_star = -1;
  auto fail = [&](const std::string& why) {
    return std::runtime_error("solution parse error at " + path + ":" + std::to_string(line_no) +
                              ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      unsigned long long v = 0;
      if (std::sscanf(line.c_str(), "# curve_hash=%llx", &v) == 1) h.curve = v;
      else if (std::sscanf(line.c_str(), "# catalog_hash=%llx", &v) == 1) h.catalog = v;
      continue;
    }
    if (line[0] == 'R') {
      int star_id;
      double epoch;
      if (std::sscanf(line.c_str(), "R,%d,%lf", &star_id, &epoch) != 2) throw fail("bad root record");
      tree.add_root(star_id, epoch);
      current_leg_star = -1;
    } else if (line[0] == 'L') {
      int vessel_id, origin, dest;
      char vtype[16];
      double t_dep, t_arr;
      if (std::sscanf(line.c_str(), "L,%d,%15[^,],%d,%d,%lf,%lf", &vessel_id, vtype, &origin, &dest,
                      &t_dep, &t_arr) != 6)
        throw fail("bad leg record");
      const int parent = tree.index_of(origin);
      if (parent < 0) throw fail("leg departs from unsettled star " + std::to_string(origin));
      TransferLeg leg;
      leg.vessel = vessel_from_name(vtype);
      leg.vessel_id = vessel_id;
      leg.origin_id = origin;
      leg.dest_id = dest;
      leg.t_dep = t_dep;
      leg.t_arr = t_arr;
      current_leg_star = tree.add_settlement(parent, dest, t_arr, std::move(leg));
    } else if (line[0] == 'I') {
      if (current_leg_star < 0) throw fail("impulse before any leg");
      Impulse imp;
      if (std::sscanf(line.c_str(), "I,%lf,%lf,%lf,%lf", &imp.epoch, &imp.dv_kms.x(),
                      &imp.dv_kms.y(), &imp.dv_kms.z()) != 4)
        throw fail("bad impulse record");
      tree.stars[current_leg_star].leg->impulses.push_back(imp);
    } else {
      throw fail("unknown record type");
    }
  }
  if (hashes) *hashes = h;
  return tree;
}

}  // namespace gsettle
