#pragma once

#include <cmath>

namespace gsettle {

// Internal units are kpc, Myr, kpc/Myr. Velocities cross the I/O boundary in
// km/s: 1 kpc = 3.0857e16 km, 1 Myr = 3.15576e13 s, giving the conversion
// below (6 significant digits).
inline constexpr double kKmsPerKpcMyr = 977.799;

inline constexpr double kHorizonMyr = 90.0;
inline constexpr double kWaitMyr = 2.0;
inline constexpr double kRadiusMinKpc = 2.0;
inline constexpr double kRadiusMaxKpc = 32.0;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double to_kms(double v_kpc_myr) { return v_kpc_myr * kKmsPerKpcMyr; }
inline double to_kpc_myr(double v_kms) { return v_kms / kKmsPerKpcMyr; }

// Wrap an angle into (-pi, pi].
inline double wrap_pi(double a) {
  a = std::fmod(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  if (a > kPi) a -= kTwoPi;
  return a;
}

// Circular distance between two angles, in [0, pi].
inline double angular_distance(double a, double b) {
  return std::fabs(wrap_pi(a - b));
}

}  // namespace gsettle
