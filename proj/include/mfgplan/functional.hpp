#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mfgplan/calculus.hpp"
#include "mfgplan/error.hpp"
#include "mfgplan/grid.hpp"

namespace mfgplan {

/// Weights of the congestion (rho^2) and kinetic (beta^2/rho) integrands.
/// The default is (1/2, 1/2); the other convention in use is (1, 1/2).
struct WeightConvention {
  double congestion = 0.5;
  double kinetic = 0.5;

  std::string name() const {
    return "congestion=" + format(congestion) + ",kinetic=" + format(kinetic);
  }

 private:
  static std::string format(double v) {
    if (v == 0.5) return "1/2";
    if (v == 1.0) return "1";
    return std::to_string(v);
  }
};

enum class ConstraintKind { viscous, first_order };

/// Which continuity equation the pair must satisfy and whether the initial
/// penalization int rho(x,0) x^2/(2 eta) is charged.
struct FunctionalSpec {
  ConstraintKind kind = ConstraintKind::first_order;
  double epsilon = 0.0;
  double eta = 0.0;  ///< 0 disables the penalization

  static FunctionalSpec first_order() { return {}; }
  static FunctionalSpec viscous(double epsilon, double eta) { return {ConstraintKind::viscous, epsilon, eta}; }
};

/// Density on nodes, flux on (face, interval) cells.
struct AdmissiblePair {
  ScalarField rho;
  FluxField beta;
};

struct FunctionalValue {
  double total = 0.0;
  double penalization = 0.0;
  double congestion = 0.0;
  double kinetic = 0.0;
  double constraint_residual = 0.0;
  bool infinite = false;  ///< beta != 0 on a cell where rho vanishes
  WeightConvention weights{};
};

/// Trapezoid weight of slice n in t.
inline double trapezoid_time_weight(const SpaceTimeGrid& g, std::size_t n) {
  return (n == 0 || n == g.n_t) ? 0.5 * g.dt : g.dt;
}

/// rho averaged over the four nodes around cell (f, n).
inline double cell_density(const ScalarField& rho, std::size_t n, std::size_t f) {
  return 0.25 * (rho(n, f) + rho(n, f + 1) + rho(n + 1, f) + rho(n + 1, f + 1));
}

/// L2 norm (dx dt weights) of the discrete continuity defect
/// (rho^{n+1} - rho^n)/dt + D beta^n + eps D2 (rho^n + rho^{n+1})/2.
inline double continuity_residual(const AdmissiblePair& pair, const FunctionalSpec& spec, const SpaceTimeGrid& g) {
  const double eps = spec.kind == ConstraintKind::viscous ? spec.epsilon : 0.0;
  std::vector<double> avg(g.n_x), lap(g.n_x);
  double acc = 0.0;
  for (std::size_t n = 0; n < g.n_t; ++n) {
    const auto div = discrete_divergence(pair.beta.slice(n), g.dx);
    for (std::size_t i = 0; i < g.n_x; ++i) avg[i] = 0.5 * (pair.rho(n, i) + pair.rho(n + 1, i));
    neumann_laplacian_into(avg, g.dx, lap);
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double r = (pair.rho(n + 1, i) - pair.rho(n, i)) / g.dt + div[i] + eps * lap[i];
      acc += r * r;
    }
  }
  return std::sqrt(acc * g.dx * g.dt);
}

/// Restricts the action quadrature to the intervals [t_first, t_last).
struct TimeWindow {
  std::size_t first = 0;
  std::size_t last = std::numeric_limits<std::size_t>::max();
};

/// Quadrature of the action: trapezoid in x and t for the congestion term,
/// midpoint cells for the kinetic term with rho taken as the 4-node average.
/// The penalization is charged only when the window starts at t = 0.
inline FunctionalValue eval_functional(const AdmissiblePair& pair, const FunctionalSpec& spec, const SpaceTimeGrid& g,
                                       const WeightConvention& w = {}, TimeWindow window = {}) {
  if (!pair.rho.matches(g) || !pair.beta.matches(g)) throw InvalidArgument("eval_functional: pair does not match grid");
  for (double v : pair.rho.values()) {
    if (!(v >= 0.0)) throw InvalidArgument("eval_functional: density must be nonnegative");
  }
  const std::size_t n0 = window.first;
  const std::size_t n1 = std::min(window.last, g.n_t);
  if (n0 >= n1) throw InvalidArgument("eval_functional: empty time window");
  FunctionalValue out;
  out.weights = w;
  double cong = 0.0;
  for (std::size_t n = n0; n <= n1; ++n) {
    double row = 0.0;
    for (std::size_t i = 0; i < g.n_x; ++i) row += trapezoid_weight(g, i) * pair.rho(n, i) * pair.rho(n, i);
    cong += ((n == n0 || n == n1) ? 0.5 * g.dt : g.dt) * row;
  }
  out.congestion = w.congestion * cong;

  double kin = 0.0;
  for (std::size_t n = n0; n < n1; ++n) {
    for (std::size_t f = 0; f + 1 < g.n_x; ++f) {
      const double b = pair.beta(n, f);
      const double r = cell_density(pair.rho, n, f);
      if (r > 0.0) {
        kin += b * b / r;
      } else if (b != 0.0) {
        out.infinite = true;
      }
    }
  }
  out.kinetic = w.kinetic * kin * g.dx * g.dt;

  if (spec.eta > 0.0 && n0 == 0) {
    double pen = 0.0;
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double x = g.x(i);
      pen += trapezoid_weight(g, i) * pair.rho(0, i) * x * x;
    }
    out.penalization = pen / (2.0 * spec.eta);
  }
  out.constraint_residual = continuity_residual(pair, spec, g);
  out.total = out.infinite ? std::numeric_limits<double>::infinity()
                           : out.penalization + out.congestion + out.kinetic;
  return out;
}

}  // namespace mfgplan
