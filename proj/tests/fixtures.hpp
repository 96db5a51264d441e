#pragma once

#include "zosmd/problems.hpp"

// Canonical synthetic instances shared by the unit and acceptance suites.
// Centers sit partly outside the domain so the per-distribution optima (and
// the saddle point: every center shares the out-of-box first coordinate) are
// boundary-active. On boundary-active optima the window-averaged iterates
// decay at the theorem's Theta(1/sqrt(t)) rate; interior quadratic optima
// would decay faster and land outside the rate-check windows.
namespace fixtures {

inline zosmd::ShiftedQuadratic quadratic5() {
  using zosmd::Vec;
  const int d = 5;
  std::vector<Vec> centers(3, Vec::Zero(d));
  centers[0] << 1.5, 1.3, -1.2, 1.25, -1.35;
  centers[1] << 1.3, -1.25, 1.4, -1.2, 1.2;
  centers[2] << 1.4, 1.2, 1.25, -1.35, -1.2;
  return zosmd::ShiftedQuadratic(
      zosmd::WeightDomain::box(Vec::Constant(d, -1.0), Vec::Constant(d, 1.0)), centers,
      {0.25, 0.25, 0.25}, {0.0, 0.0, 0.0});
}

inline zosmd::PiecewiseAbsolute absolute4() {
  using zosmd::Vec;
  const int d = 4;
  std::vector<Vec> centers(2, Vec::Zero(d));
  centers[0] << 1.35, 0.50, -0.20, 0.30;
  centers[1] << -0.40, -1.25, 0.45, -1.10;
  return zosmd::PiecewiseAbsolute(
      zosmd::WeightDomain::box(Vec::Constant(d, -1.0), Vec::Constant(d, 1.0)), centers,
      {0.25, 0.25}, {0.0, 0.0});
}

}  // namespace fixtures
