#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mfgplan/calculus.hpp"
#include "mfgplan/dirac.hpp"
#include "mfgplan/error.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/tridiagonal.hpp"

namespace mfgplan {

/// Records eps <= C eta^alpha; the solver reports it but never enforces it.
struct CouplingConstraint {
  double c = 1.0;
  double alpha = 1.0;
};

struct ViscousParams {
  double epsilon = 0.05;
  double eta = 0.1;
  CouplingConstraint coupling{};

  bool coupling_holds() const { return epsilon <= coupling.c * std::pow(eta, coupling.alpha); }
  /// eps |log eta|, which must vanish along a convergent family.
  double log_coupling() const { return epsilon * std::abs(std::log(eta)); }
  void validate() const {
    detail::require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
    detail::require(std::isfinite(eta) && eta > 0.0, "eta must be positive");
  }
};

/// Solution of the homogeneous viscous equation with the same initial datum:
/// x^2 / (2 (t + eta)) + eps log((t + eta) / eta). Lower barrier for u.
inline double lower_barrier(double x, double t, const ViscousParams& p) {
  return x * x / (2.0 * (t + p.eta)) + p.epsilon * std::log((t + p.eta) / p.eta);
}

/// Per-node upwind data of the linearized Hamiltonian on one time step.
/// The backward side uses (v_i - v_{i-1})/dx with drift c_back >= 0, the
/// forward side (v_{i+1} - v_i)/dx with c_fwd <= 0; a side whose slope is
/// clipped at p* carries zero drift.
struct StepDrift {
  std::vector<double> c_back;
  std::vector<double> c_fwd;
  std::vector<double> slope_back;
  std::vector<double> slope_fwd;
  std::vector<double> hamiltonian;  ///< numerical Hamiltonian of v at the old slopes
  std::vector<double> wx;           ///< d_x w at the node, time t_{n+1}
};

/// Engquist-Osher flux for Q(p) = w_x p + p^2/2 (the Hamiltonian of u = w + v
/// minus that of w), minimized at p* = -w_x:
///   Q(max(p-, p*)) + Q(min(p+, p*)) - Q(p*).
/// Monotone, and its derivative in v is continuous.
inline void hjb_drift_into(std::span<const double> v, double t_next, const ViscousParams& p,
                           const SpaceTimeGrid& g, StepDrift& out) {
  const std::size_t n = g.n_x;
  out.c_back.assign(n, 0.0);
  out.c_fwd.assign(n, 0.0);
  out.slope_back.assign(n, 0.0);
  out.slope_fwd.assign(n, 0.0);
  out.hamiltonian.assign(n, 0.0);
  out.wx.assign(n, 0.0);
  const double inv_dx = 1.0 / g.dx;
  const double inv_age = 1.0 / (t_next + p.eta);
  for (std::size_t i = 0; i < n; ++i) {
    const double wx = g.x(i) * inv_age;
    const double pstar = -wx;
    auto q = [wx](double s) { return wx * s + 0.5 * s * s; };
    const double back = i > 0 ? std::max((v[i] - v[i - 1]) * inv_dx, pstar) : pstar;
    const double fwd = i + 1 < n ? std::min((v[i + 1] - v[i]) * inv_dx, pstar) : pstar;
    out.wx[i] = wx;
    out.slope_back[i] = back;
    out.slope_fwd[i] = fwd;
    out.c_back[i] = wx + back;
    out.c_fwd[i] = wx + fwd;
    out.hamiltonian[i] = q(back) + q(fwd) - q(pstar);
  }
}

/// Forward march of u_t - eps u_xx + (u_x)^2/2 = rho, u(x,0) = x^2/(2 eta).
///
/// Marches v = u - w with w = lower_barrier. Each step treats diffusion and the
/// Hamiltonian linearized about the previous slice implicitly (tridiagonal
/// M-matrix). The step n -> n+1 uses rho at slice n.
inline ScalarField hjb_forward(const ScalarField& rho, const ViscousParams& p, const SpaceTimeGrid& g) {
  p.validate();
  if (!rho.matches(g)) throw InvalidArgument("hjb_forward: density does not match grid");
  const std::size_t n_x = g.n_x;
  ScalarField u(g, Quantity::value_function);
  std::vector<double> v(n_x, 0.0), v_next(n_x), lower(n_x - 1), diag(n_x), upper(n_x - 1), rhs(n_x),
      scratch(n_x);
  StepDrift drift;
  const double inv_dt = 1.0 / g.dt;
  const double dif = p.epsilon / (g.dx * g.dx);
  const double inv_dx = 1.0 / g.dx;
  for (std::size_t i = 0; i < n_x; ++i) u(0, i) = lower_barrier(g.x(i), 0.0, p);
  for (std::size_t n = 0; n < g.n_t; ++n) {
    const double t_next = g.t(n + 1);
    hjb_drift_into(v, t_next, p, g, drift);
    const auto rho_n = rho.slice(n);
    std::fill(lower.begin(), lower.end(), 0.0);
    std::fill(upper.begin(), upper.end(), 0.0);
    for (std::size_t i = 0; i < n_x; ++i) {
      double d = inv_dt;
      if (i > 0) { d += dif; lower[i - 1] -= dif; }
      if (i + 1 < n_x) { d += dif; upper[i] -= dif; }
      const double cb = drift.c_back[i], cf = drift.c_fwd[i];
      if (i > 0) { d += cb * inv_dx; lower[i - 1] -= cb * inv_dx; }
      if (i + 1 < n_x) { d -= cf * inv_dx; upper[i] += cf * inv_dx; }
      diag[i] = d;
      rhs[i] = v[i] * inv_dt + rho_n[i] - drift.hamiltonian[i] + cb * drift.slope_back[i] +
               cf * drift.slope_fwd[i];
    }
    tridiagonal_solve_into(lower, diag, upper, rhs, v_next, scratch);
    v.swap(v_next);
    for (std::size_t i = 0; i < n_x; ++i) u(n + 1, i) = lower_barrier(g.x(i), t_next, p) + v[i];
  }
  return u;
}

namespace detail {

inline void value_offset_slice(const ScalarField& u, std::size_t n, const ViscousParams& p,
                               const SpaceTimeGrid& g, std::vector<double>& v) {
  v.resize(g.n_x);
  const double t = g.t(n);
  for (std::size_t i = 0; i < g.n_x; ++i) v[i] = u(n, i) - lower_barrier(g.x(i), t, p);
}

}  // namespace detail

/// Drift used on the interval [t_n, t_{n+1}]: the one the HJB step n -> n+1 used.
inline StepDrift interval_drift(const ScalarField& u, std::size_t n, const ViscousParams& p,
                                const SpaceTimeGrid& g) {
  std::vector<double> v;
  detail::value_offset_slice(u, n, p, g, v);
  StepDrift d;
  hjb_drift_into(v, g.t(n + 1), p, g, d);
  return d;
}

struct FokkerPlanckStats {
  double min_before_clamp = 0.0;
  double max_mass_error = 0.0;
};

/// Backward march of rho_t + eps rho_xx + (u_x rho)_x = 0 from the terminal slice.
///
/// The transport operator is the transpose of the HJB linearization, so the
/// scheme is conservative (unit column sums), positivity preserving, and
/// satisfies the discrete duality with hjb_forward used by energy_trace.
inline ScalarField fp_backward(const ScalarField& u, const ViscousParams& p, const SpaceTimeGrid& g,
                               std::span<const double> terminal, FokkerPlanckStats* stats = nullptr) {
  p.validate();
  if (!u.matches(g)) throw InvalidArgument("fp_backward: value function does not match grid");
  if (terminal.size() != g.n_x) throw InvalidArgument("fp_backward: terminal slice length mismatch");
  const double terminal_mass = slice_mass(terminal, g.dx);
  for (double v : terminal) {
    if (!(v >= 0.0)) throw InvalidArgument("fp_backward: terminal slice must be nonnegative");
  }
  if (std::abs(terminal_mass - 1.0) > 1e-10) throw InvalidArgument("fp_backward: terminal slice must have unit mass");

  const std::size_t n_x = g.n_x;
  ScalarField rho(g, Quantity::density);
  std::copy(terminal.begin(), terminal.end(), rho.slice(g.n_t).begin());
  std::vector<double> lower(n_x - 1), diag(n_x), upper(n_x - 1), next(n_x), scratch(n_x), v;
  StepDrift drift;
  const double dif = p.epsilon / (g.dx * g.dx);
  const double cdt = g.dt / g.dx;
  double min_seen = 0.0, worst_mass = 0.0;
  for (std::size_t n = g.n_t; n-- > 0;) {
    detail::value_offset_slice(u, n, p, g, v);
    hjb_drift_into(v, g.t(n + 1), p, g, drift);
    std::fill(lower.begin(), lower.end(), 0.0);
    std::fill(upper.begin(), upper.end(), 0.0);
    for (std::size_t i = 0; i < n_x; ++i) {
      double d = 1.0;
      if (i > 0) { d += g.dt * dif; lower[i - 1] -= g.dt * dif; }
      if (i + 1 < n_x) { d += g.dt * dif; upper[i] -= g.dt * dif; }
      // Row i of the HJB transport is scattered into column i here.
      const double cb = drift.c_back[i], cf = drift.c_fwd[i];
      if (i > 0) { d += cb * cdt; upper[i - 1] -= cb * cdt; }
      if (i + 1 < n_x) { d -= cf * cdt; lower[i] += cf * cdt; }
      diag[i] = d;
    }
    tridiagonal_solve_into(lower, diag, upper, rho.slice(n + 1), next, scratch);
    double removed = 0.0;
    for (double& r : next) {
      min_seen = std::min(min_seen, r);
      if (r < 0.0) { removed -= r; r = 0.0; }
    }
    if (removed * g.dx > 1e-10) {
      const double m = slice_mass(next, g.dx);
      for (double& r : next) r /= m;
    }
    const double mass_err = std::abs(slice_mass(next, g.dx) - terminal_mass);
    worst_mass = std::max(worst_mass, mass_err);
    if (mass_err > 1e-10) {
      throw NumericalFailure("fp_backward: mass drift " + std::to_string(mass_err) + " at slice " +
                             std::to_string(n));
    }
    std::copy(next.begin(), next.end(), rho.slice(n).begin());
  }
  if (stats) *stats = {min_seen, worst_mass};
  return rho;
}

}  // namespace mfgplan
