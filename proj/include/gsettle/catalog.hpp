#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsettle/density.hpp"
#include "gsettle/rng.hpp"
#include "gsettle/rotation_curve.hpp"
#include "gsettle/units.hpp"

namespace gsettle {

// A star on a circular orbit: radius, inclination, node and the in-plane
// angle at t = 0. Speed along the orbit is v_c(r) at all epochs.
struct Star {
  int id = 0;
  double r = 0.0;      // kpc
  double incl = 0.0;   // rad
  double node = 0.0;   // rad
  double phase = 0.0;  // rad, position along the orbit at t = 0
};

struct ShipState {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();  // kpc
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();  // kpc/Myr
  double epoch = 0.0;                             // Myr
};

// Position/velocity of a star at epoch t: circular motion at angular rate
// omega = v_c(r)/r in its orbit plane, rotated by (node, incl).
inline ShipState star_state(const RotationCurve& curve, const Star& star, double t) {
  const double vc = curve.circular_velocity(star.r);
  const double u = star.phase + (vc / star.r) * t;
  const Eigen::Vector3d p_plane(star.r * std::cos(u), star.r * std::sin(u), 0.0);
  const Eigen::Vector3d v_plane(-vc * std::sin(u), vc * std::cos(u), 0.0);
  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(star.node, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(star.incl, Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  ShipState s;
  s.pos = rot * p_plane;
  s.vel = rot * v_plane;
  s.epoch = t;
  return s;
}

// Polar angle in the galactic plane at the 90-Myr horizon.
inline double theta_final(const RotationCurve& curve, const Star& star) {
  const ShipState s = star_state(curve, star, kHorizonMyr);
  return std::atan2(s.pos.y(), s.pos.x());
}

enum class CatalogMode { kPlanar, kInclined };

class StarCatalog {
 public:
  StarCatalog() = default;
  explicit StarCatalog(std::vector<Star> stars) : stars_(std::move(stars)) { reindex(); }

  const std::vector<Star>& stars() const { return stars_; }
  std::size_t size() const { return stars_.size(); }
  bool empty() const { return stars_.empty(); }

  const Star& by_id(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("StarCatalog: unknown star id " + std::to_string(id));
    return stars_[it->second];
  }
  bool contains(int id) const { return index_.count(id) != 0; }
  std::size_t index_of(int id) const { return index_.at(id); }

  // Radii drawn from the target radial density, angles uniform.
  static StarCatalog generate(int n, std::uint64_t seed, CatalogMode mode,
                              const RadialDensity& g_r = RadialDensity::linear()) {
    if (n < 0) throw std::invalid_argument("generate: n must be non-negative");
    Rng rng(seed);
    std::vector<Star> stars;
    stars.reserve(n);
    for (int i = 0; i < n; ++i) {
      Star s;
      s.id = i + 1;
      s.r = g_r.sample(rng.uniform());
      s.phase = rng.uniform(-kPi, kPi);
      if (mode == CatalogMode::kInclined) {
        s.incl = rng.uniform(0.0, 0.01);
        s.node = rng.uniform(-kPi, kPi);
      }
      stars.push_back(s);
    }
    return StarCatalog(std::move(stars));
  }

  // CSV columns: id,r_kpc,i_rad,Omega_rad,phi0_rad. A header line is written
  // on save and skipped on load if present.
  static StarCatalog load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open catalog file: " + path);
    std::vector<Star> stars;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (line_no == 1 && line.rfind("id", 0) == 0) continue;
      Star s;
      std::array<double, 4> vals{};
      std::stringstream ss(line);
      std::string tok;
      if (!std::getline(ss, tok, ',')) throw parse_error(path, line_no);
      try {
        s.id = std::stoi(tok);
        for (auto& v : vals) {
          if (!std::getline(ss, tok, ',')) throw parse_error(path, line_no);
          v = std::stod(tok);
        }
      } catch (const std::logic_error&) {
        throw parse_error(path, line_no);
      }
      s.r = vals[0];
      s.incl = vals[1];
      s.node = vals[2];
      s.phase = vals[3];
      stars.push_back(s);
    }
    return StarCatalog(std::move(stars));
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write catalog file: " + path);
    out << "id,r_kpc,i_rad,Omega_rad,phi0_rad\n";
    char buf[160];
    for (const Star& s : stars_) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", s.id, s.r, s.incl, s.node, s.phase);
      out << buf;
    }
  }

 private:
  static std::runtime_error parse_error(const std::string& path, int line_no) {
    return std::runtime_error("malformed catalog row at " + path + ":" + std::to_string(line_no));
  }

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < stars_.size(); ++i) {
      if (!index_.emplace(stars_[i].id, i).second)
        throw std::runtime_error("duplicate star id " + std::to_string(stars_[i].id));
    }
  }

  std::vector<Star> stars_;
  std::unordered_map<int, std::size_t> index_;
};

}  // namespace gsettle
