#pragma once

#include <algorithm>
#include <cmath>

#include "mfgplan/calculus.hpp"
#include "mfgplan/characteristics.hpp"
#include "mfgplan/error.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/profile.hpp"
#include "mfgplan/viscous_solver.hpp"

namespace mfgplan {

struct Window {
  double x_lo = -1.0;
  double x_hi = 1.0;
  double t_lo = 0.25;
  double t_hi = 1.0;
};

/// max |u - u_bar| over grid nodes inside the window.
inline double local_uniform_u_error(const ViscousSolution& sol, const ProfileSolution& p,
                                    const CharacteristicFan& fan, const Window& w) {
  detail::require(w.t_lo >= 0.1, "window must exclude t < 0.1");
  detail::require(w.x_lo <= w.x_hi && w.t_lo <= w.t_hi && w.t_hi <= 1.0, "window bounds are inconsistent");
  const SpaceTimeGrid& g = sol.grid;
  const double tol = 1e-12;
  double worst = 0.0;
  bool any = false;
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    const double t = g.t(n);
    if (t < w.t_lo - tol || t > w.t_hi + tol) continue;
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double x = g.x(i);
      if (x < w.x_lo - tol || x > w.x_hi + tol) continue;
      worst = std::max(worst, std::abs(sol.u(n, i) - eval_u_bar(p, fan, x, t)));
      any = true;
    }
  }
  if (!any) throw InvalidArgument("window contains no grid node");
  return worst;
}

/// The two eps-weighted second-derivative integrals of the comparison
/// identity, each in integrated-by-parts form -eps int int d_x f d_x g.
struct CrossTerms {
  double rho_times_ubar_xx = 0.0;  ///< eps int int rho d_xx u_bar
  double u_xx_times_rhobar = 0.0;  ///< eps int int d_xx u rho_bar
};

inline CrossTerms cross_terms(const ScalarField& rho, const ScalarField& u, const ScalarField& rho_bar,
                              const ScalarField& u_bar, double epsilon, const SpaceTimeGrid& g) {
  CrossTerms c;
  for (std::size_t n = 0; n < g.n_t; ++n) {
    double a = 0.0, b = 0.0;
    for (std::size_t f = 0; f + 1 < g.n_x; ++f) {
      a += (rho(n, f + 1) - rho(n, f)) * (u_bar(n, f + 1) - u_bar(n, f));
      b += (u(n, f + 1) - u(n, f)) * (rho_bar(n, f + 1) - rho_bar(n, f));
    }
    c.rho_times_ubar_xx -= a;
    c.u_xx_times_rhobar -= b;
  }
  const double scale = epsilon * g.dt / g.dx;
  c.rho_times_ubar_xx *= scale;
  c.u_xx_times_rhobar *= scale;
  return c;
}

/// int_theta^{1-theta} int [ (rho_a - rho_b)^2 + (rho_a + rho_b)/2 (d_x u_a - d_x u_b)^2 ].
inline double uniqueness_identity_check(const ScalarField& u_a, const ScalarField& rho_a, const ScalarField& u_b,
                                        const ScalarField& rho_b, const SpaceTimeGrid& g, double theta) {
  detail::require(theta > 0.0 && theta < 0.4, "theta must lie in (0, 0.4)");
  double acc = 0.0;
  for (std::size_t n = 0; n < g.n_t; ++n) {
    const double t = g.t(n);
    if (t < theta - 1e-12 || t >= 1.0 - theta - 1e-12) continue;
    double row = 0.0;
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double d = rho_a(n, i) - rho_b(n, i);
      row += trapezoid_weight(g, i) * d * d;
    }
    for (std::size_t f = 0; f + 1 < g.n_x; ++f) {
      const double m = 0.25 * (rho_a(n, f) + rho_a(n, f + 1) + rho_b(n, f) + rho_b(n, f + 1));
      const double s = ((u_a(n, f + 1) - u_a(n, f)) - (u_b(n, f + 1) - u_b(n, f))) / g.dx;
      row += g.dx * m * s * s;
    }
    acc += g.dt * row;
  }
  return acc;
}

/// Exponents of the rescaling u -> mu^alpha-type family. The scaling
/// u'(x,t) = mu u(x / sqrt(mu), t), rho'(x,t) = mu rho(x / sqrt(mu), t) keeps the
/// system and x^2/(2 eta) invariant with eps' = eps mu, terminal mass mu^{3/2},
/// u'(0,1) = mu u(0,1) and action mu^{5/2} I.
struct KpzExponents {
  double alpha = 1.0;
  double beta = 1.5;
  double gamma = 1.0;
  double rate = 2.5;
};

struct KpzRecord {
  double lambda = 0.0;             ///< 1 / eps
  double a_value = 0.0;            ///< u(0, 1)
  double a_target = 0.0;           ///< k(1) of the limit profile
  double a_error = 0.0;            ///< |A - k(1)|
  double mu = 0.0;                 ///< (A / k(1))^{-1/gamma}
  double mu_raw = 0.0;             ///< A^{-1/gamma}
  double eps_rescaled = 0.0;       ///< eps mu^alpha
  double terminal_mass = 0.0;      ///< discrete mass of the terminal slice
  double rescaled_mass = 0.0;      ///< terminal_mass mu^beta
  double mass_proxy_three_halves = 0.0;  ///< lambda^{-3/2} c(lambda), c = lambda^{3/2} rescaled mass
  double mass_proxy_two_thirds = 0.0;    ///< lambda^{-2/3} c(lambda)
  double rate_proxy = 0.0;         ///< lambda^{rate} I(eps, eta)
};

inline KpzRecord kpz_rescale_diagnostics(const ViscousSolution& sol, double k_end, double functional_total,
                                         const KpzExponents& ex = {}) {
  detail::require(ex.gamma > 0.0, "gamma exponent must be positive");
  detail::require(k_end > 0.0, "k(1) must be positive");
  const SpaceTimeGrid& g = sol.grid;
  KpzRecord r;
  r.lambda = 1.0 / sol.params.epsilon;
  r.a_value = sol.u(g.n_t, g.mid());
  r.a_target = k_end;
  r.a_error = std::abs(r.a_value - k_end);
  r.mu = std::pow(r.a_value / k_end, -1.0 / ex.gamma);
  r.mu_raw = std::pow(r.a_value, -1.0 / ex.gamma);
  r.eps_rescaled = sol.params.epsilon * std::pow(r.mu, ex.alpha);
  r.terminal_mass = slice_mass(sol.rho.slice(g.n_t), g.dx);
  r.rescaled_mass = r.terminal_mass * std::pow(r.mu, ex.beta);
  const double c = std::pow(r.lambda, 1.5) * r.rescaled_mass;
  r.mass_proxy_three_halves = std::pow(r.lambda, -1.5) * c;
  r.mass_proxy_two_thirds = std::pow(r.lambda, -2.0 / 3.0) * c;
  r.rate_proxy = std::pow(r.lambda, ex.rate) * functional_total;
  return r;
}

}  // namespace mfgplan
