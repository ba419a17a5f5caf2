#pragma once

// Bilinear quadrilateral helpers shared by mesh validation and the solver.

#include "cann/types.hpp"

#include <array>
#include <cmath>

namespace cann::q4 {

inline constexpr std::array<double, 4> kXi{-1.0, 1.0, 1.0, -1.0};
inline constexpr std::array<double, 4> kEta{-1.0, -1.0, 1.0, 1.0};

// 2x2 Gauss points, unit weights.
inline const std::array<std::array<double, 2>, 4>& gauss_points() {
  static const double g = 1.0 / std::sqrt(3.0);
  static const std::array<std::array<double, 2>, 4> pts{{{-g, -g}, {g, -g}, {g, g}, {-g, g}}};
  return pts;
}

struct ShapeGrad {
  std::array<double, 4> dx{}; // dN/dx
  std::array<double, 4> dy{}; // dN/dy
  double det_j = 0.0;
};

inline ShapeGrad shape_gradients(const std::array<Point2, 4>& xy, double xi, double eta) {
  std::array<double, 4> dxi{}, deta{};
  for (int a = 0; a < 4; ++a) {
    dxi[a] = 0.25 * kXi[a] * (1.0 + eta * kEta[a]);
    deta[a] = 0.25 * kEta[a] * (1.0 + xi * kXi[a]);
  }
  double j11 = 0, j12 = 0, j21 = 0, j22 = 0; // J = d(x,y)/d(xi,eta)
  for (int a = 0; a < 4; ++a) {
    j11 += dxi[a] * xy[a].x;
    j12 += dxi[a] * xy[a].y;
    j21 += deta[a] * xy[a].x;
    j22 += deta[a] * xy[a].y;
  }
  ShapeGrad g;
  g.det_j = j11 * j22 - j12 * j21;
  const double inv = 1.0 / g.det_j;
  for (int a = 0; a < 4; ++a) {
    g.dx[a] = inv * (j22 * dxi[a] - j12 * deta[a]);
    g.dy[a] = inv * (-j21 * dxi[a] + j11 * deta[a]);
  }
  return g;
}

} // namespace cann::q4
