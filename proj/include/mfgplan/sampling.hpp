#pragma once

#include <algorithm>
#include <vector>

#include "mfgplan/characteristics.hpp"
#include "mfgplan/dirac.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/profile.hpp"

namespace mfgplan {

/// rho-bar on every grid node. Slices where the profile is a point mass
/// (t = 1, and t = 0 for the limit kind) are replaced by the mollified Dirac.
inline ScalarField sample_rho_bar(const ProfileSolution& p, const SpaceTimeGrid& g, const MollifiedDirac& d) {
  ScalarField rho(g, Quantity::density);
  const std::vector<double> dirac = dirac_slice(g, d);
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    const double t = g.t(n);
    const bool point_mass = n == g.n_t || (n == 0 && p.kind == ProfileKind::limit);
    if (point_mass) {
      std::copy(dirac.begin(), dirac.end(), rho.slice(n).begin());
      continue;
    }
    const double tc = std::clamp(t, p.t_begin(), p.t_end());
    for (std::size_t i = 0; i < g.n_x; ++i) rho(n, i) = eval_rho_bar(p, g.x(i), tc);
  }
  return rho;
}

/// u-bar on every grid node; the limit kind's t = 0 slice is taken at t_floor.
inline ScalarField sample_u_bar(const ProfileSolution& p, const CharacteristicFan& fan, const SpaceTimeGrid& g) {
  ScalarField u(g, Quantity::value_function);
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    const double t = (n == 0 && p.kind == ProfileKind::limit) ? p.t_begin() : g.t(n);
    for (std::size_t i = 0; i < g.n_x; ++i) u(n, i) = eval_u_bar(p, fan, g.x(i), t);
  }
  return u;
}

/// beta-bar = rho-hat * u-bar_x at (x_{f+1/2}, t_{n+1/2}), where rho-hat is the
/// 4-node average of the sampled density, so beta^2/rho-hat = rho-hat (u_x)^2.
inline FluxField sample_beta_bar(const ProfileSolution& p, const CharacteristicFan& fan, const ScalarField& rho,
                                 const SpaceTimeGrid& g) {
  FluxField beta(g);
  for (std::size_t n = 0; n < g.n_t; ++n) {
    const double t = g.t_mid(n);
    for (std::size_t f = 0; f + 1 < g.n_x; ++f) {
      const double rho_c = 0.25 * (rho(n, f) + rho(n, f + 1) + rho(n + 1, f) + rho(n + 1, f + 1));
      beta(n, f) = rho_c == 0.0 ? 0.0 : rho_c * eval_u_bar_x(p, fan, g.x_face(f), t);
    }
  }
  return beta;
}

}  // namespace mfgplan
