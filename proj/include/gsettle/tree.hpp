#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsettle/units.hpp"

namespace gsettle {

enum class VesselType { kSettler, kMother, kFast };

inline const char* vessel_name(VesselType v) {
  switch (v) {
    case VesselType::kSettler: return "settler";
    case VesselType::kMother: return "mother";
    case VesselType::kFast: return "fast";
  }
  return "?";
}

inline VesselType vessel_from_name(const std::string& s) {
  if (s == "settler") return VesselType::kSettler;
  if (s == "mother") return VesselType::kMother;
  if (s == "fast") return VesselType::kFast;
  throw std::invalid_argument("unknown vessel type: " + s);
}

struct Impulse {
  double epoch = 0.0;                                // Myr
  Eigen::Vector3d dv_kms = Eigen::Vector3d::Zero();  // inertial components, km/s
};

// One vessel's trip between two stars.
struct TransferLeg {
  VesselType vessel = VesselType::kSettler;
  int vessel_id = 0;
  int origin_id = 0;
  int dest_id = 0;
  double t_dep = 0.0;
  double t_arr = 0.0;
  std::vector<Impulse> impulses;

  double dv_used_kms() const {
    double sum = 0.0;
    for (const Impulse& i : impulses) sum += i.dv_kms.norm();
    return sum;
  }
};

// One settled star inside a tree. Roots have no parent and no incoming leg.
struct SettledStar {
  int star_id = 0;
  int parent = -1;  // index into SettlementTree::stars
  std::vector<int> offspring;
  double settle_epoch = 0.0;
  std::optional<TransferLeg> leg;  // incoming leg; absent for roots
};

class SettlementTree {
 public:
  std::vector<SettledStar> stars;

  bool empty() const { return stars.empty(); }
  int size() const { return static_cast<int>(stars.size()); }

  int index_of(int star_id) const {
    for (int i = 0; i < size(); ++i)
      if (stars[i].star_id == star_id) return i;
    return -1;
  }

  bool is_root(int i) const { return stars[i].parent < 0; }
  bool is_terminal(int i) const { return stars[i].offspring.empty(); }

  int add_root(int star_id, double epoch) {
    SettledStar s;
    s.star_id = star_id;
    s.settle_epoch = epoch;
    stars.push_back(std::move(s));
    return size() - 1;
  }

  int add_settlement(int parent_idx, int star_id, double epoch, TransferLeg leg) {
    SettledStar s;
    s.star_id = star_id;
    s.parent = parent_idx;
    s.settle_epoch = epoch;
    s.leg = std::move(leg);
    stars.push_back(std::move(s));
    stars[parent_idx].offspring.push_back(size() - 1);
    return size() - 1;
  }

  // Remove a terminal star, fixing up indices.
  void remove_terminal(int idx) {
    if (!is_terminal(idx)) throw std::logic_error("remove_terminal: star has offspring");
    const int p = stars[idx].parent;
    if (p >= 0) {
      auto& off = stars[p].offspring;
      off.erase(std::remove(off.begin(), off.end(), idx), off.end());
    }
    stars.erase(stars.begin() + idx);
    for (SettledStar& s : stars) {
      if (s.parent > idx) --s.parent;
      for (int& o : s.offspring)
        if (o > idx) --o;
    }
  }

  double total_dv_kms() const {
    double sum = 0.0;
    for (const SettledStar& s : stars)
      if (s.leg) sum += s.leg->dv_used_kms();
    return sum;
  }

  double latest_settle_epoch() const {
    double t = 0.0;
    for (const SettledStar& s : stars) t = std::max(t, s.settle_epoch);
    return t;
  }

  // Indices ordered by settle epoch (roots first on ties).
  std::vector<int> settle_order() const {
    std::vector<int> order(stars.size());
    for (int i = 0; i < size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (stars[a].settle_epoch != stars[b].settle_epoch)
        return stars[a].settle_epoch < stars[b].settle_epoch;
      return (stars[a].parent < 0) > (stars[b].parent < 0);
    });
    return order;
  }
};

}  // namespace gsettle
