#pragma once

#include <cmath>
#include <vector>

#include "mfgplan/dirac.hpp"
#include "mfgplan/error.hpp"
#include "mfgplan/functional.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/viscous.hpp"

namespace mfgplan {

/// Variance schedule of a heat-kernel pair: the density at time t is the
/// centred gaussian of variance 2 s(t), with
///   s(t) = s0 + c0 t^theta                        on [0, 1/2],
///   s(t) = s1 + eps (1 - t) + (1 - t)^theta       on [1/2, 1],
/// and c0 chosen so that s is continuous at t = 1/2.
struct HeatKernelSchedule {
  double epsilon = 0.0;
  double theta = 1.5;
  double s0 = 0.0;
  double s1 = 0.0;

  double c0() const { return std::pow(2.0, theta) * (s1 + 0.5 * epsilon + std::pow(0.5, theta) - s0); }

  double s(double t) const {
    if (t <= 0.5) return s0 + c0() * std::pow(t, theta);
    return s1 + epsilon * (1.0 - t) + std::pow(1.0 - t, theta);
  }

  double ds(double t) const {
    if (t <= 0.5) return c0() * theta * std::pow(t, theta - 1.0);
    return -epsilon - theta * std::pow(1.0 - t, theta - 1.0);
  }

  /// Velocity field a(x, t) = (s' + eps) x / (2 s) solving
  /// d_t rho + eps d_xx rho + d_x (rho a) = 0 for the gaussian family.
  double drift(double x, double t) const { return (ds(t) + epsilon) * x / (2.0 * s(t)); }

  void validate() const {
    if (!(theta > 1.0 && theta < 2.0)) throw InvalidArgument("theta must lie in (1, 2)");
    detail::require(epsilon >= 0.0 && s0 >= 0.0 && s1 >= 0.0, "schedule parameters must be nonnegative");
    detail::require(c0() > 0.0, "schedule needs s0 < s1 + eps/2 + 2^-theta");
  }
};

/// Continuum action of the gaussian family: penalization s0/eta (when eta > 0)
/// plus int_0^1 [w_c / (2 sqrt(2 pi s)) + w_k (s' + eps)^2 / (2 s)] dt, by
/// composite Simpson after t = u^m substitutions that remove the endpoint
/// singularities.
inline double heat_kernel_action(const HeatKernelSchedule& sch, double eta, const WeightConvention& w = {},
                                 std::size_t panels = 4000) {
  detail::require(sch.theta > 1.0 && sch.theta < 2.0, "theta must lie in (1, 2)");
  detail::require(sch.c0() > 0.0, "schedule needs s0 < s1 + eps/2 + 2^-theta");
  constexpr double pi = 3.14159265358979323846;
  const double m = 8.0;
  auto density = [&](double s, double ds) {
    const double v = ds + sch.epsilon;
    return w.congestion / (2.0 * std::sqrt(2.0 * pi * s)) + w.kinetic * v * v / (2.0 * s);
  };
  const double c0 = sch.c0();
  auto at_start = [&](double t) {
    return density(sch.s0 + c0 * std::pow(t, sch.theta), c0 * sch.theta * std::pow(t, sch.theta - 1.0));
  };
  auto at_end = [&](double r) {
    return density(sch.s1 + sch.epsilon * r + std::pow(r, sch.theta),
                   -sch.epsilon - sch.theta * std::pow(r, sch.theta - 1.0));
  };
  auto half = [&](bool left) {
    const std::size_t n = panels + panels % 2;
    const double h = 1.0 / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      const double u = k * h;
      const double tau = 0.5 * std::pow(u, m);
      const double jac = 0.5 * m * std::pow(u, m - 1.0);
      const double f = (left ? at_start(tau) : at_end(tau)) * jac;
      const double wgt = k == n ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      acc += wgt * f;
    }
    return acc * h / 3.0;
  };
  const double pen = eta > 0.0 ? sch.s0 / eta : 0.0;
  return pen + half(true) + half(false);
}

/// Samples the pair on the grid: slices are renormalized cell averages of the
/// gaussian, beta = rho-hat * a at (x_{f+1/2}, t_{n+1/2}).
inline AdmissiblePair heat_kernel_pair(const HeatKernelSchedule& sch, const SpaceTimeGrid& g) {
  sch.validate();
  AdmissiblePair pair{ScalarField(g, Quantity::density), FluxField(g)};
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    const double sd = std::sqrt(2.0 * sch.s(g.t(n)));
    const auto slice = detail::cell_average_slice(g, {sd, MollifierKind::gaussian});
    std::copy(slice.begin(), slice.end(), pair.rho.slice(n).begin());
  }
  for (std::size_t n = 0; n < g.n_t; ++n) {
    const double t = g.t_mid(n);
    for (std::size_t f = 0; f < g.n_faces(); ++f) {
      pair.beta(n, f) = cell_density(pair.rho, n, f) * sch.drift(g.x_face(f), t);
    }
  }
  return pair;
}

/// Schedule of the viscous upper-bound pair: initial variance 2 eta, which makes
/// the penalization int rho x^2/(2 eta) equal to 1, and terminal variance sigma^2
/// of the gaussian Dirac.
inline HeatKernelSchedule upper_bound_schedule(const ViscousParams& p, double theta, const MollifiedDirac& terminal) {
  detail::require(terminal.kind == MollifierKind::gaussian, "terminal Dirac must be gaussian");
  return {p.epsilon, theta, p.eta, 0.5 * terminal.width * terminal.width};
}

inline AdmissiblePair upper_bound_candidate(const ViscousParams& p, double theta, const SpaceTimeGrid& g,
                                       const MollifiedDirac& terminal) {
  p.validate();
  return heat_kernel_pair(upper_bound_schedule(p, theta, terminal), g);
}

/// First-order counterpart with both endpoints equal to the gaussian Dirac.
inline AdmissiblePair first_order_candidate(double theta, const SpaceTimeGrid& g, const MollifiedDirac& endpoint) {
  detail::require(endpoint.kind == MollifierKind::gaussian, "endpoint Dirac must be gaussian");
  const double s = 0.5 * endpoint.width * endpoint.width;
  return heat_kernel_pair({0.0, theta, s, s}, g);
}

}  // namespace mfgplan
