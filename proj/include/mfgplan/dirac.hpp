#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfgplan/calculus.hpp"
#include "mfgplan/error.hpp"
#include "mfgplan/grid.hpp"

namespace mfgplan {

enum class MollifierKind { gaussian, triangle };

/// Grid stand-in for a unit point mass at x = 0.
struct MollifiedDirac {
  double width = 0.0;  ///< sigma for the gaussian, half-base for the triangle
  MollifierKind kind = MollifierKind::gaussian;

  static MollifiedDirac gaussian_cells(const SpaceTimeGrid& g, double cells) {
    return {cells * g.dx, MollifierKind::gaussian};
  }
};

namespace detail {
// Integral of the unit-height triangle of half-base w over (-inf, x].
inline double triangle_cdf(double x, double w) {
  const double y = std::clamp(x / w, -1.0, 1.0);
  return y <= 0.0 ? 0.5 * (1.0 + y) * (1.0 + y) : 1.0 - 0.5 * (1.0 - y) * (1.0 - y);
}
}  // namespace detail

namespace detail {
/// Cell averages over [x_i - dx/2, x_i + dx/2] of the mollifier, renormalized to
/// unit discrete mass. Built from the right half and mirrored, so exactly even.
/// A zero gaussian width gives the single-node spike.
inline std::vector<double> cell_average_slice(const SpaceTimeGrid& g, const MollifiedDirac& d) {
  std::vector<double> f(g.n_x, 0.0);
  const std::size_t m = g.mid();
  if (d.width <= 0.0) {
    f[m] = 1.0 / g.dx;
    return f;
  }
  for (std::size_t j = 0; j <= m; ++j) {
    const double x = g.x(m + j);
    const double lo = x - 0.5 * g.dx;
    const double hi = x + 0.5 * g.dx;
    double v = 0.0;
    if (d.kind == MollifierKind::gaussian) {
      const double k = 1.0 / (std::sqrt(2.0) * d.width);
      v = 0.5 * (std::erfc(lo * k) - std::erfc(hi * k));
    } else {
      v = triangle_cdf(hi, d.width) - triangle_cdf(lo, d.width);
    }
    f[m + j] = v;
    f[m - j] = v;
  }
  double total = f[m];
  for (std::size_t j = 1; j <= m; ++j) total += 2.0 * f[m + j];
  const double scale = 1.0 / (total * g.dx);
  for (double& v : f) v *= scale;
  return f;
}
}  // namespace detail

/// Grid slice of the mollified Dirac (cell averages, even, unit discrete mass).
inline std::vector<double> dirac_slice(const SpaceTimeGrid& g, const MollifiedDirac& d) {
  if (!(d.width >= g.dx * (1.0 - 1e-12))) {
    throw InvalidArgument("dirac_slice: width below dx, mollifier is under-resolved");
  }
  return detail::cell_average_slice(g, d);
}

}  // namespace mfgplan
