#pragma once

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gsettle/units.hpp"

namespace gsettle {

// Triangular kernel of width s centred at mu: 0 outside |x-mu| < s,
// 1/s - |x-mu|/s^2 inside. Integrates to 1.
inline double triangular_kernel(double x, double mu, double s) {
  const double d = std::fabs(x - mu);
  if (d >= s) return 0.0;
  return 1.0 / s - d / (s * s);
}

inline double triangular_kernel_wrapped(double x, double mu, double s) {
  const double d = angular_distance(x, mu);
  if (d >= s) return 0.0;
  return 1.0 / s - d / (s * s);
}

// Target radial star density on [2, 32] kpc, stored as a piecewise-linear
// profile on 1-kpc knots. Supports point evaluation and inverse-CDF sampling
// for catalog generation.
class RadialDensity {
 public:
  // Knots at r = 2, 3, ..., 32 (31 values).
  explicit RadialDensity(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() != 31) throw std::invalid_argument("RadialDensity: expected 31 knot values");
    for (double v : values_)
      if (v <= 0.0) throw std::invalid_argument("RadialDensity: values must be positive");
    build_cdf();
  }

  // g_r(r) = 2 r / (32^2 - 2^2): linear profile, normalized on [2, 32].
  static RadialDensity linear() {
    std::vector<double> v(31);
    for (int i = 0; i < 31; ++i) v[i] = 2.0 * (2.0 + i) / 1020.0;
    return RadialDensity(std::move(v));
  }

  double operator()(double r) const {
    if (r <= kRadiusMinKpc) return values_.front();
    if (r >= kRadiusMaxKpc) return values_.back();
    const int i = static_cast<int>(std::floor(r - kRadiusMinKpc));
    const double t = (r - kRadiusMinKpc) - i;
    return values_[i] * (1.0 - t) + values_[i + 1] * t;
  }

  // Inverse CDF of the normalized profile; u in [0, 1).
  double sample(double u) const {
    const double target = u * cdf_.back();
    int lo = 0, hi = 30;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cdf_[mid + 1] < target) lo = mid + 1; else hi = mid;
    }
    // Solve the quadratic segment CDF: integral of a + b*t over [0, t].
    const double a = values_[lo];
    const double b = values_[lo + 1] - values_[lo];
    const double rem = target - cdf_[lo];
    double t;
    if (std::fabs(b) < 1e-14 * std::fabs(a)) {
      t = rem / a;
    } else {
      t = (-a + std::sqrt(a * a + 2.0 * b * rem)) / b;
    }
    t = std::clamp(t, 0.0, 1.0);
    return kRadiusMinKpc + lo + t;
  }

 private:
  void build_cdf() {
    cdf_.assign(32, 0.0);
    for (int i = 0; i < 31 - 1; ++i) {
      cdf_[i + 1] = cdf_[i] + 0.5 * (values_[i] + values_[i + 1]);
    }
    cdf_[31] = cdf_[30];
  }

  std::vector<double> values_;
  std::vector<double> cdf_;  // cumulative integral at knots
};

// Target angular density on (-pi, pi], periodic. Uniform by default.
class AngularDensity {
 public:
  AngularDensity() : values_(32, 1.0 / kTwoPi) {}

  // Knots at theta = -pi + k*pi/16, k = 0..31.
  explicit AngularDensity(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() != 32) throw std::invalid_argument("AngularDensity: expected 32 knot values");
    for (double v : values_)
      if (v <= 0.0) throw std::invalid_argument("AngularDensity: values must be positive");
  }

  double operator()(double theta) const {
    const double step = kPi / 16.0;
    double x = (wrap_pi(theta) + kPi) / step;
    int i = static_cast<int>(std::floor(x));
    const double t = x - i;
    i = ((i % 32) + 32) % 32;
    const int j = (i + 1) % 32;
    return values_[i] * (1.0 - t) + values_[j] * t;
  }

 private:
  std::vector<double> values_;
};

}  // namespace gsettle
