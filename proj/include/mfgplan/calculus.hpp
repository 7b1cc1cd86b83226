#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mfgplan/error.hpp"
#include "mfgplan/grid.hpp"

namespace mfgplan {

/// (F_{i+1/2} - F_{i-1/2}) / dx with zero flux through both outer walls.
inline std::vector<double> discrete_divergence(std::span<const double> flux, double dx) {
  const std::size_t n = flux.size() + 1;
  if (flux.empty()) throw InvalidArgument("discrete_divergence: flux slice must be non-empty");
  std::vector<double> div(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double right = i + 1 < n ? flux[i] : 0.0;
    const double left = i > 0 ? flux[i - 1] : 0.0;
    div[i] = (right - left) / dx;
  }
  return div;
}

inline std::vector<double> discrete_divergence(std::span<const double> flux, const SpaceTimeGrid& g) {
  if (flux.size() != g.n_faces()) throw InvalidArgument("discrete_divergence: flux length must be n_x - 1");
  return discrete_divergence(flux, g.dx);
}

/// Second difference with the zero-flux closure (symmetric matrix).
inline void neumann_laplacian_into(std::span<const double> f, double dx, std::span<double> out) {
  const std::size_t n = f.size();
  const double inv = 1.0 / (dx * dx);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    if (i > 0) s += f[i - 1] - f[i];
    if (i + 1 < n) s += f[i + 1] - f[i];
    out[i] = s * inv;
  }
}

/// dx * sum of a nodal slice: the discrete mass used throughout.
inline double slice_mass(std::span<const double> f, double dx) {
  double s = 0.0;
  for (double v : f) s += v;
  return s * dx;
}

/// Trapezoid weight of node i in x (dx inside, dx/2 at the walls).
inline double trapezoid_weight(const SpaceTimeGrid& g, std::size_t i) {
  return (i == 0 || i + 1 == g.n_x) ? 0.5 * g.dx : g.dx;
}

inline double trapezoid_x(const SpaceTimeGrid& g, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += trapezoid_weight(g, i) * f[i];
  return s;
}

/// sqrt of the space-time integral of f^2: trapezoid in x, left rectangle in t
/// (slices 0..n_t-1 each weighted by dt).
inline double l2_spacetime_norm(const ScalarField& f, const SpaceTimeGrid& g) {
  if (!f.matches(g)) throw InvalidArgument("l2_spacetime_norm: field does not match grid");
  double acc = 0.0;
  for (std::size_t n = 0; n < g.n_t; ++n) {
    const auto s = f.slice(n);
    double row = 0.0;
    for (std::size_t i = 0; i < g.n_x; ++i) row += trapezoid_weight(g, i) * s[i] * s[i];
    acc += g.dt * row;
  }
  return std::sqrt(acc);
}

inline ScalarField difference(const ScalarField& a, const ScalarField& b) {
  ScalarField d = a;
  auto& dv = d.values();
  const auto& bv = b.values();
  if (dv.size() != bv.size()) throw InvalidArgument("difference: field shapes differ");
  for (std::size_t k = 0; k < dv.size(); ++k) dv[k] -= bv[k];
  return d;
}

}  // namespace mfgplan
