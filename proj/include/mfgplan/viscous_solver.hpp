#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mfgplan/calculus.hpp"
#include "mfgplan/dirac.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/viscous.hpp"

namespace mfgplan {

struct FixedPointOptions {
  double damping = 0.5;
  double tol = 1e-6;
  std::size_t max_iter = 200;
};

/// Per-slice integrals of the converged pair and the residual of
/// d/dt int rho u = int [ rho (u_x)^2 / 2 + rho^2 ].
struct EnergyTrace {
  std::vector<double> rho_u;        ///< int rho u, slices 0..n_t
  std::vector<double> rho_sq;       ///< int rho^2, slices 0..n_t
  std::vector<double> kinetic;      ///< int rho (u_x)^2 on interval n, n = 0..n_t-1
  std::vector<double> penalty;      ///< int rho x^2 / (2 (eta + t)), slices 0..n_t
  std::vector<double> mass;         ///< dx sum rho, slices 0..n_t
  std::vector<double> residual;     ///< identity defect on interval n
  double max_residual = 0.0;        ///< over intervals 1..n_t-2
  double max_rate = 0.0;            ///< max |int [rho (u_x)^2/2 + rho^2]| over the same intervals
  double scaled_residual = 0.0;     ///< max_residual / max_rate
  double sup_rho_u = 0.0;
  double total_rho_sq = 0.0;        ///< int_0^1 int rho^2 (left rectangle in t)
};

struct ViscousSolution {
  SpaceTimeGrid grid;
  ViscousParams params;
  ScalarField u;
  ScalarField rho;
  FluxField beta;
  std::size_t iterations = 0;
  bool converged = false;
  double final_update_norm = 0.0;
  double final_damping = 0.0;
  std::vector<double> update_history;
  double min_rho_before_clamp = 0.0;
  double max_mass_error = 0.0;
  EnergyTrace energy;
};

/// beta on interval n at face f: the 4-node average of rho times the face
/// slope of u averaged over slices n and n+1.
inline FluxField centered_flux(const ScalarField& rho, const ScalarField& u, const SpaceTimeGrid& g) {
  FluxField beta(g);
  for (std::size_t n = 0; n < g.n_t; ++n) {
    for (std::size_t f = 0; f + 1 < g.n_x; ++f) {
      const double rho_c = 0.25 * (rho(n, f) + rho(n, f + 1) + rho(n + 1, f) + rho(n + 1, f + 1));
      const double slope = 0.5 * ((u(n, f + 1) - u(n, f)) + (u(n + 1, f + 1) - u(n + 1, f))) / g.dx;
      beta(n, f) = rho_c * slope;
    }
  }
  return beta;
}

inline EnergyTrace energy_trace(const ScalarField& u, const ScalarField& rho, const ViscousParams& p,
                                const SpaceTimeGrid& g) {
  EnergyTrace e;
  const std::size_t ns = g.n_t + 1;
  e.rho_u.resize(ns);
  e.rho_sq.resize(ns);
  e.penalty.resize(ns);
  e.mass.resize(ns);
  for (std::size_t n = 0; n < ns; ++n) {
    double a = 0.0, b = 0.0, c = 0.0, m = 0.0;
    const double t = g.t(n);
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double r = rho(n, i);
      const double x = g.x(i);
      a += r * u(n, i);
      b += r * r;
      c += r * x * x / (2.0 * (p.eta + t));
      m += r;
    }
    e.rho_u[n] = a * g.dx;
    e.rho_sq[n] = b * g.dx;
    e.penalty[n] = c * g.dx;
    e.mass[n] = m * g.dx;
  }
  e.kinetic.resize(g.n_t);
  e.residual.resize(g.n_t);
  for (std::size_t n = 0; n < g.n_t; ++n) {
    const StepDrift d = interval_drift(u, n, p, g);
    double k = 0.0;
    const double age = g.t(n + 1) + p.eta;
    for (std::size_t i = 0; i < g.n_x; ++i) {
      // Legendre form sum_s c_s D_s u - H of (u_x)^2/2 at the drifts the scheme transports
      // with, where the w part of D_s u is exact for the quadratic w.
      double legendre = -0.5 * d.wx[i] * d.wx[i] - d.hamiltonian[i];
      if (i > 0) legendre += d.c_back[i] * ((g.x(i) - 0.5 * g.dx) / age + d.slope_back[i]);
      if (i + 1 < g.n_x) legendre += d.c_fwd[i] * ((g.x(i) + 0.5 * g.dx) / age + d.slope_fwd[i]);
      k += rho(n, i) * legendre;
    }
    e.kinetic[n] = 2.0 * k * g.dx;
    const double rate = 0.5 * e.kinetic[n] + e.rho_sq[n];
    e.residual[n] = (e.rho_u[n + 1] - e.rho_u[n]) / g.dt - rate;
  }
  for (std::size_t n = 1; n + 1 < g.n_t; ++n) {
    e.max_residual = std::max(e.max_residual, std::abs(e.residual[n]));
    e.max_rate = std::max(e.max_rate, std::abs(0.5 * e.kinetic[n] + e.rho_sq[n]));
  }
  e.scaled_residual = e.max_rate > 0.0 ? e.max_residual / e.max_rate : e.max_residual;
  for (std::size_t n = 0; n < ns; ++n) e.sup_rho_u = std::max(e.sup_rho_u, e.rho_u[n]);
  for (std::size_t n = 0; n < g.n_t; ++n) e.total_rho_sq += g.dt * e.rho_sq[n];
  return e;
}

/// Damped Picard iteration between hjb_forward and fp_backward.
inline ViscousSolution solve_fixed_point(const ViscousParams& p, const SpaceTimeGrid& g, const MollifiedDirac& d,
                                         const FixedPointOptions& opt = {}) {
  p.validate();
  detail::require(opt.damping > 0.0 && opt.damping <= 1.0, "damping must lie in (0, 1]");
  detail::require(opt.tol > 0.0, "tol must be positive");
  const std::vector<double> terminal = dirac_slice(g, d);

  ViscousSolution sol;
  sol.grid = g;
  sol.params = p;
  FokkerPlanckStats stats;
  double min_before_clamp = 0.0, worst_mass = 0.0;
  auto fp = [&](const ScalarField& u) {
    ScalarField r = fp_backward(u, p, g, terminal, &stats);
    min_before_clamp = std::min(min_before_clamp, stats.min_before_clamp);
    worst_mass = std::max(worst_mass, stats.max_mass_error);
    return r;
  };

  ScalarField rho = fp(hjb_forward(ScalarField(g, Quantity::density), p, g));
  double omega = opt.damping;
  int increases = 0;
  double best_norm = std::numeric_limits<double>::infinity();
  ScalarField best_rho = rho;
  for (std::size_t k = 1; k <= opt.max_iter; ++k) {
    const ScalarField target = fp(hjb_forward(rho, p, g));
    ScalarField next = rho;
    auto& nv = next.values();
    const auto& tv = target.values();
    for (std::size_t j = 0; j < nv.size(); ++j) nv[j] = (1.0 - omega) * nv[j] + omega * tv[j];
    const double norm = l2_spacetime_norm(difference(next, rho), g);
    if (!sol.update_history.empty() && norm > sol.update_history.back()) {
      if (++increases >= 2) {
        omega *= 0.5;
        increases = 0;
      }
    } else {
      increases = 0;
    }
    sol.update_history.push_back(norm);
    rho = std::move(next);
    sol.iterations = k;
    if (norm < best_norm) {
      best_norm = norm;
      best_rho = rho;
    }
    if (norm < opt.tol) {
      sol.converged = true;
      break;
    }
  }
  if (!sol.converged) rho = best_rho;
  sol.final_update_norm = sol.converged ? sol.update_history.back() : best_norm;
  sol.final_damping = omega;
  sol.u = hjb_forward(rho, p, g);
  sol.rho = std::move(rho);
  sol.beta = centered_flux(sol.rho, sol.u, g);
  sol.min_rho_before_clamp = min_before_clamp;
  sol.max_mass_error = worst_mass;
  sol.energy = energy_trace(sol.u, sol.rho, p, g);
  return sol;
}

}  // namespace mfgplan
