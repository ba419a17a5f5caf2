#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace cann {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

// Voigt order [11, 22, 12]; index 0 is x (lateral), 1 is y (axial), 2 is shear.
struct StrainVector {
  Vec3 c{};
  double& operator[](std::size_t i) { return c[i]; }
  double operator[](std::size_t i) const { return c[i]; }
  friend bool operator==(const StrainVector&, const StrainVector&) = default;
};

// Stress in Pa, same ordering as StrainVector.
struct StressVector {
  Vec3 c{};
  double& operator[](std::size_t i) { return c[i]; }
  double operator[](std::size_t i) const { return c[i]; }
  friend bool operator==(const StressVector&, const StressVector&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline Vec3 matvec(const Mat3& m, const Vec3& v) {
  Vec3 out{};
  for (std::size_t i = 0; i < 3; ++i)
    out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return out;
}

// Plane-stress elasticity matrix, E in Pa.
inline Mat3 plane_stress_matrix(double youngs, double poisson) {
  const double f = youngs / (1.0 - poisson * poisson);
  return Mat3{{{f, f * poisson, 0.0}, {f * poisson, f, 0.0}, {0.0, 0.0, f * (1.0 - poisson) / 2.0}}};
}

} // namespace cann
