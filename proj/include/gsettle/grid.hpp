#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsettle/catalog.hpp"
#include "gsettle/units.hpp"

namespace gsettle {

// The (r, theta_f) plane is partitioned into 30 rings of 1 kpc on [2, 32]
// and 32 slices of pi/16. Indices are 1-based; ring_of/slice_of return 0 for
// out-of-range input.
inline constexpr int kNumRings = 30;
inline constexpr int kNumSlices = 32;

inline int ring_of(double r) {
  if (r < kRadiusMinKpc || r > kRadiusMaxKpc) return 0;
  const int k = static_cast<int>(std::floor(r)) - 1;
  return std::min(k, kNumRings);
}

inline int slice_of(double theta) {
  const double step = kPi / 16.0;
  int k = static_cast<int>(std::floor((wrap_pi(theta) + kPi) / step));
  k = ((k % kNumSlices) + kNumSlices) % kNumSlices;
  return k + 1;
}

// Wrap a 1-based slice index into [1, 32].
inline int wrap_slice(int kth) { return ((kth - 1) % kNumSlices + kNumSlices) % kNumSlices + 1; }

// Contiguous block of grid cells carrying a target occupancy matrix G and
// the root settlement it grows from. The slice window may wrap (lo > hi).
struct Zone {
  std::string name;
  int kr_lo = 1, kr_hi = 1;
  int kth_lo = 1, kth_hi = 1;
  int root_star = 0;
  double root_epoch = 0.0;
  std::vector<int> target;  // row-major: rings ascending, slices in window order

  int rows() const { return kr_hi - kr_lo + 1; }
  bool wraps() const { return kth_lo > kth_hi; }
  int cols() const { return wraps() ? kNumSlices - kth_lo + 1 + kth_hi : kth_hi - kth_lo + 1; }
  int num_cells() const { return rows() * cols(); }

  int col_of(int kth) const {
    if (!wraps()) return (kth >= kth_lo && kth <= kth_hi) ? kth - kth_lo : -1;
    if (kth >= kth_lo) return kth - kth_lo;
    if (kth <= kth_hi) return kNumSlices - kth_lo + 1 + (kth - 1);
    return -1;
  }

  // Flat cell index, or -1 when (kr, kth) lies outside the zone.
  int cell_index(int kr, int kth) const {
    if (kr < kr_lo || kr > kr_hi) return -1;
    const int c = col_of(kth);
    if (c < 0) return -1;
    return (kr - kr_lo) * cols() + c;
  }

  int target_at(int kr, int kth) const {
    const int i = cell_index(kr, kth);
    return i < 0 ? 0 : target[i];
  }

  int target_total() const { return std::accumulate(target.begin(), target.end(), 0); }

  void check() const {
    if (kr_lo < 1 || kr_hi > kNumRings || kr_lo > kr_hi)
      throw std::invalid_argument("Zone " + name + ": ring range out of bounds");
    if (kth_lo < 1 || kth_lo > kNumSlices || kth_hi < 1 || kth_hi > kNumSlices)
      throw std::invalid_argument("Zone " + name + ": slice range out of bounds");
    if (static_cast<int>(target.size()) != num_cells())
      throw std::invalid_argument("Zone " + name + ": G dimensions do not match the window");
    for (int g : target)
      if (g < 0) throw std::invalid_argument("Zone " + name + ": negative target occupancy");
  }
};

// Star id -> zone cell index (-1 outside), fixed per catalog since both the
// radius and theta_f of a star are epoch-independent.
struct ZoneCellMap {
  ZoneCellMap(const RotationCurve& curve, const StarCatalog& catalog, const Zone& zone) {
    cells_.reserve(catalog.size());
    for (const Star& s : catalog.stars()) {
      const int kr = ring_of(s.r);
      const int kth = slice_of(theta_final(curve, s));
      cells_[s.id] = (kr == 0) ? -1 : zone.cell_index(kr, kth);
    }
  }

  int cell_of(int star_id) const {
    auto it = cells_.find(star_id);
    return it == cells_.end() ? -1 : it->second;
  }

  std::vector<int> stars_in_zone() const {
    std::vector<int> ids;
    for (const auto& [id, cell] : cells_)
      if (cell >= 0) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  std::unordered_map<int, int> cells_;
};

}  // namespace gsettle
