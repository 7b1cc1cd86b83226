#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "mfgplan/candidate.hpp"
#include "mfgplan/characteristics.hpp"
#include "mfgplan/dirac.hpp"
#include "mfgplan/first_order.hpp"
#include "mfgplan/functional.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/profile.hpp"
#include "mfgplan/sampling.hpp"
#include "mfgplan/tridiagonal.hpp"

using namespace mfgplan;

namespace {

const ProfileSolution& limit() {
  static const ProfileSolution p = integrate_limit_profile();
  return p;
}

AdmissiblePair frozen_blob(const SpaceTimeGrid& g) {
  AdmissiblePair pair{ScalarField(g, Quantity::density), FluxField(g)};
  const auto s = dirac_slice(g, {0.3, MollifierKind::gaussian});
  for (std::size_t n = 0; n <= g.n_t; ++n) std::copy(s.begin(), s.end(), pair.rho.slice(n).begin());
  return pair;
}

/// Random unit-mass density with fixed gaussian endpoints and the flux the
/// continuity equation assigns to it.
AdmissiblePair random_feasible(const SpaceTimeGrid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  std::uniform_real_distribution<double> width(0.2, 0.8);
  AdmissiblePair pair{ScalarField(g, Quantity::density), FluxField(g)};
  const auto end = dirac_slice(g, {0.3, MollifierKind::gaussian});
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    auto s = pair.rho.slice(n);
    if (n == 0 || n == g.n_t) {
      std::copy(end.begin(), end.end(), s.begin());
      continue;
    }
    const double w = width(rng);
    double mass = 0.0;
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double x = g.x(i);
      s[i] = std::exp(-0.5 * x * x / (w * w)) * unif(rng);
      mass += s[i] * g.dx;
    }
    for (double& v : s) v /= mass;
  }
  pair.beta = detail::flux_from_density(pair.rho, g);
  return pair;
}

double objective(double w, double b, double w0, double b0, double tk) {
  if (w < 0.0) return std::numeric_limits<double>::infinity();
  const double kin = w > 0.0 ? tk * b * b / (2.0 * w) : (b == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return kin + 0.5 * ((w - w0) * (w - w0) + (b - b0) * (b - b0));
}

}  // namespace

TEST(Functional, FrozenBlobHasOnlyCongestion) {
  const auto g = build_grid(3.0, 101, 20);
  const auto pair = frozen_blob(g);
  const auto v = eval_functional(pair, FunctionalSpec::first_order(), g);
  EXPECT_EQ(v.kinetic, 0.0);
  EXPECT_EQ(v.penalization, 0.0);
  EXPECT_FALSE(v.infinite);
  double sq = 0.0;
  for (std::size_t i = 0; i < g.n_x; ++i) sq += trapezoid_weight(g, i) * pair.rho(0, i) * pair.rho(0, i);
  EXPECT_NEAR(v.congestion, 0.5 * sq, 1e-12);
  EXPECT_GT(v.congestion, 0.0);
  EXPECT_NEAR(v.constraint_residual, 0.0, 1e-12);
}

TEST(Functional, FluxOnEmptyCellIsInfinite) {
  const auto g = build_grid(3.0, 21, 4);
  AdmissiblePair pair{ScalarField(g, Quantity::density), FluxField(g)};
  pair.beta(1, 3) = 0.5;
  const auto v = eval_functional(pair, FunctionalSpec::first_order(), g);
  EXPECT_TRUE(v.infinite);
  EXPECT_TRUE(std::isinf(v.total));
}

TEST(Functional, TotalIsSumOfNonnegativeParts) {
  std::mt19937_64 rng(17);
  const auto g = build_grid(3.0, 61, 30);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pair = random_feasible(g, rng);
    const auto v = eval_functional(pair, FunctionalSpec::viscous(0.05, 0.1), g);
    EXPECT_GE(v.penalization, 0.0);
    EXPECT_GE(v.congestion, 0.0);
    EXPECT_GE(v.kinetic, 0.0);
    EXPECT_NEAR(v.total, v.penalization + v.congestion + v.kinetic, 1e-12 * v.total);
  }
}

TEST(Functional, KineticTermEqualsDensityTimesVelocitySquared) {
  const auto g = build_grid(3.0, 41, 10);
  auto pair = frozen_blob(g);
  double expected = 0.0;
  for (std::size_t n = 0; n < g.n_t; ++n) {
    for (std::size_t f = 0; f < g.n_faces(); ++f) {
      const double v = std::sin(g.x_face(f)) * (1.0 + g.t_mid(n));
      const double r = cell_density(pair.rho, n, f);
      pair.beta(n, f) = r * v;
      expected += 0.5 * r * v * v * g.dx * g.dt;
    }
  }
  EXPECT_NEAR(eval_functional(pair, FunctionalSpec::first_order(), g).kinetic, expected, 1e-12);
}

TEST(Functional, WeightConventionScalesParts) {
  const auto g = build_grid(3.0, 61, 30);
  std::mt19937_64 rng(2);
  const auto pair = random_feasible(g, rng);
  const auto half = eval_functional(pair, FunctionalSpec::first_order(), g);
  const auto unit = eval_functional(pair, FunctionalSpec::first_order(), g, {1.0, 0.5});
  EXPECT_NEAR(unit.congestion, 2.0 * half.congestion, 1e-12);
  EXPECT_EQ(unit.kinetic, half.kinetic);
  EXPECT_EQ(unit.weights.name(), "congestion=1,kinetic=1/2");
  EXPECT_EQ(half.weights.name(), "congestion=1/2,kinetic=1/2");
}

TEST(Functional, PenalizationChargedOnlyFromInitialTime) {
  const auto g = build_grid(3.0, 101, 20);
  const auto pair = frozen_blob(g);
  const auto full = eval_functional(pair, FunctionalSpec::viscous(0.05, 0.1), g);
  double m2 = 0.0;
  for (std::size_t i = 0; i < g.n_x; ++i) m2 += trapezoid_weight(g, i) * pair.rho(0, i) * g.x(i) * g.x(i);
  EXPECT_NEAR(full.penalization, m2 / 0.2, 1e-12);
  const auto late = eval_functional(pair, FunctionalSpec::viscous(0.05, 0.1), g, {}, {2, 20});
  EXPECT_EQ(late.penalization, 0.0);
}

TEST(Functional, InvalidInputsRejected) {
  const auto g = build_grid(3.0, 21, 4);
  AdmissiblePair pair{ScalarField(g, Quantity::density), FluxField(g)};
  pair.rho(2, 3) = -1e-3;
  EXPECT_THROW(eval_functional(pair, FunctionalSpec::first_order(), g), InvalidArgument);
  pair.rho(2, 3) = 0.0;
  EXPECT_THROW(eval_functional(pair, FunctionalSpec::first_order(), g, {}, {3, 3}), InvalidArgument);
  EXPECT_THROW(eval_functional(pair, FunctionalSpec::first_order(), build_grid(3.0, 21, 5)), InvalidArgument);
}

TEST(Functional, ViscousResidualVanishesForDiscreteHeatFlow) {
  // Crank-Nicolson backward heat flow with zero flux satisfies the discrete viscous constraint exactly.
  const auto g = build_grid(3.0, 61, 40);
  const double eps = 0.05;
  AdmissiblePair pair{ScalarField(g, Quantity::density), FluxField(g)};
  const auto end = dirac_slice(g, {0.2, MollifierKind::gaussian});
  std::copy(end.begin(), end.end(), pair.rho.slice(g.n_t).begin());
  const double c = 0.5 * eps * g.dt / (g.dx * g.dx);
  std::vector<double> lower(g.n_x - 1, -c), upper(g.n_x - 1, -c), diag(g.n_x), rhs(g.n_x), lap(g.n_x);
  for (std::size_t i = 0; i < g.n_x; ++i) diag[i] = 1.0 + c * ((i > 0) + (i + 1 < g.n_x));
  for (std::size_t n = g.n_t; n-- > 0;) {
    const auto next = pair.rho.slice(n + 1);
    neumann_laplacian_into(next, g.dx, lap);
    for (std::size_t i = 0; i < g.n_x; ++i) rhs[i] = next[i] + 0.5 * eps * g.dt * lap[i];
    const auto sol = tridiagonal_solve(lower, diag, upper, rhs);
    std::copy(sol.begin(), sol.end(), pair.rho.slice(n).begin());
  }
  const auto v = eval_functional(pair, FunctionalSpec::viscous(eps, 0.1), g);
  EXPECT_LT(v.constraint_residual, 1e-10);
  EXPECT_GT(eval_functional(pair, FunctionalSpec::first_order(), g).constraint_residual, 1e-3);
}

TEST(Functional, SampledProfileMatchesReducedActionOnInteriorWindow) {
  // Away from the endpoint singularities the grid quadrature is second order in (dx, dt).
  const auto& p = limit();
  const auto fan = build_fan(p);
  const double reduced = p.at(0.9).j - p.at(0.1).j;
  std::vector<double> err;
  for (std::size_t n : {201u, 401u, 801u}) {
    const auto g = build_grid(3.0, n, n - 1);
    const auto d = MollifiedDirac::gaussian_cells(g, 2.0);
    const auto rho = sample_rho_bar(p, g, d);
    const AdmissiblePair pair{rho, sample_beta_bar(p, fan, rho, g)};
    const TimeWindow w{(n - 1) / 10, 9 * (n - 1) / 10};
    err.push_back(std::abs(eval_functional(pair, FunctionalSpec::first_order(), g, {}, w).total - reduced) / reduced);
  }
  EXPECT_LT(err[1], 1e-3);
  EXPECT_GT(err[0] / err[1], 3.0);
  EXPECT_GT(err[1] / err[2], 3.0);
}

TEST(Candidate, ThetaOutsideOpenIntervalRejected) {
  const auto g = build_grid(3.0, 41, 10);
  const auto d = MollifiedDirac::gaussian_cells(g, 2.0);
  const ViscousParams p{0.05, 0.1, {}};
  try {
    upper_bound_candidate(p, 2.5, g, d);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_STREQ(e.what(), "theta must lie in (1, 2)");
  }
  EXPECT_THROW(upper_bound_candidate(p, 1.0, g, d), InvalidArgument);
  EXPECT_THROW(upper_bound_candidate(p, 1.5, g, {0.3, MollifierKind::triangle}), InvalidArgument);
}

TEST(Candidate, MatchingConstantTendsToOne) {
  EXPECT_DOUBLE_EQ((HeatKernelSchedule{0.0, 1.5, 0.0, 0.0}).c0(), 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double eta : {0.1, 0.01, 0.001, 1e-4}) {
    const HeatKernelSchedule s{std::pow(eta, 0.6), 1.5, eta, 0.0};
    const double dev = std::abs(s.c0() - 1.0);
    EXPECT_LT(dev, prev);
    prev = dev;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Candidate, ScheduleIsContinuousAndHitsEndpoints) {
  const HeatKernelSchedule s{0.05, 1.5, 0.1, 0.0018};
  EXPECT_NEAR(s.s(0.5), s.s(0.5 + 1e-12), 1e-10);
  EXPECT_DOUBLE_EQ(s.s(0.0), 0.1);
  EXPECT_DOUBLE_EQ(s.s(1.0), 0.0018);
  const double h = 1e-6;
  for (double t : {0.2, 0.7}) EXPECT_NEAR(s.ds(t), (s.s(t + h) - s.s(t - h)) / (2.0 * h), 1e-6);
}

TEST(Candidate, PairHasUnitMassEvenSlicesAndPenalizationOne) {
  const auto g = build_grid(3.0, 401, 400);
  const ViscousParams p{0.05, 0.1, {}};
  const auto pair = upper_bound_candidate(p, 1.5, g, MollifiedDirac::gaussian_cells(g, 2.0));
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    EXPECT_NEAR(slice_mass(pair.rho.slice(n), g.dx), 1.0, 1e-12);
    EXPECT_EQ(pair.rho(n, 0), pair.rho(n, g.n_x - 1));
  }
  const auto terminal = dirac_slice(g, MollifiedDirac::gaussian_cells(g, 2.0));
  for (std::size_t i = 0; i < g.n_x; ++i) EXPECT_NEAR(pair.rho(g.n_t, i), terminal[i], 1e-12);
  const auto v = eval_functional(pair, FunctionalSpec::viscous(p.epsilon, p.eta), g);
  EXPECT_NEAR(v.penalization, 1.0, 1e-3);
  EXPECT_TRUE(std::isfinite(v.total));
}

TEST(Candidate, GridActionConvergesToContinuumAtFixedWidth) {
  const ViscousParams p{0.05, 0.1, {}};
  const MollifiedDirac d{0.06, MollifierKind::gaussian};
  const double continuum = heat_kernel_action(upper_bound_schedule(p, 1.5, d), p.eta);
  std::vector<double> gap, residual;
  for (std::size_t n : {101u, 201u, 401u}) {
    const auto g = build_grid(3.0, n, n - 1);
    const auto v = eval_functional(upper_bound_candidate(p, 1.5, g, d), FunctionalSpec::viscous(p.epsilon, p.eta), g);
    gap.push_back(std::abs(v.total - continuum));
    residual.push_back(v.constraint_residual);
  }
  for (std::size_t k = 1; k < gap.size(); ++k) {
    EXPECT_LT(gap[k], gap[k - 1]);
    EXPECT_LT(residual[k], residual[k - 1]);
  }
  EXPECT_LT(gap.back(), 1e-2 * continuum);
}

TEST(Candidate, ContinuumActionOfPureTransportPair) {
  // eps = 0, s0 = s1 = s: int_0^1 [1/(2 sqrt(2 pi s(t))) + s'(t)^2/(4 s(t))] dt, checked by
  // an independent midpoint rule in t on a fine mesh away from the integrable endpoint behaviour.
  const HeatKernelSchedule s{0.0, 1.5, 0.02, 0.02};
  const std::size_t m = 2000000;
  double mid = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double t = (k + 0.5) / m;
    const double v = s.s(t), dv = s.ds(t);
    mid += (1.0 / (4.0 * std::sqrt(2.0 * std::numbers::pi * v)) + 0.5 * dv * dv / (2.0 * v)) / m;
  }
  EXPECT_NEAR(heat_kernel_action(s, 0.0), mid, 1e-6);
}

TEST(PerspectiveProx, MatchesBruteForceMinimization) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::uniform_real_distribution<double> tk_dist(0.01, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double w0 = unif(rng), b0 = unif(rng), tk = tk_dist(rng);
    double w = 0.0, b = 0.0;
    perspective_prox(w0, b0, tk, w, b);
    ASSERT_GE(w, 0.0);
    const double f = objective(w, b, w0, b0, tk);
    // Dense search over a box containing the minimizer.
    double best = std::numeric_limits<double>::infinity();
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
      const double ww = 3.0 * i / n;
      for (int j = 0; j <= n; ++j) {
        const double bb = -2.5 + 5.0 * j / n;
        best = std::min(best, objective(ww, bb, w0, b0, tk));
      }
    }
    EXPECT_LE(f, best + 1e-12) << w0 << " " << b0 << " " << tk;
    if (w > 0.0) {
      EXPECT_NEAR(w - w0 - tk * b * b / (2.0 * w * w), 0.0, 1e-9);
      EXPECT_NEAR(b - b0 + tk * b / w, 0.0, 1e-9);
    }
  }
}

TEST(PerspectiveProx, ZeroFluxReducesToClamp) {
  double w = 1.0, b = 1.0;
  perspective_prox(-0.4, 0.0, 0.5, w, b);
  EXPECT_EQ(w, 0.0);
  EXPECT_EQ(b, 0.0);
  perspective_prox(0.7, 0.0, 0.5, w, b);
  EXPECT_EQ(w, 0.7);
  EXPECT_EQ(b, 0.0);
}

TEST(Minimizer, FluxFromDensitySolvesContinuityExactly) {
  std::mt19937_64 rng(29);
  const auto g = build_grid(3.0, 81, 40);
  const auto pair = random_feasible(g, rng);
  EXPECT_LT(continuity_residual(pair, FunctionalSpec::first_order(), g), 1e-10);
}

TEST(Minimizer, DualNeverExceedsPrimal) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd(0.0, 0.3);
  const auto g = build_grid(3.0, 41, 20);
  const auto pair = random_feasible(g, rng);
  const double primal = eval_functional(pair, FunctionalSpec::first_order(), g).total / (g.dx * g.dt);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> lambda(g.n_t * g.n_x);
    for (double& v : lambda) v = nd(rng);
    EXPECT_LE(detail::first_order_dual(lambda, pair.rho, g, {}), primal * g.dx * g.dt + 1e-12);
  }
}

TEST(Minimizer, ConvergesWithCertifiedGapBelowCandidate) {
  const auto g = build_grid(3.0, 81, 80);
  const auto d = MollifiedDirac::gaussian_cells(g, 4.0);
  const auto r = minimize_first_order(g, d);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.gap, 1e-4);
  EXPECT_GE(r.gap, -1e-12);
  EXPECT_LE(r.dual, r.primal + 1e-12);
  EXPECT_LT(r.value.constraint_residual, 1e-10);
  EXPECT_FALSE(r.value.infinite);
  const double candidate = eval_functional(first_order_candidate(1.5, g, d), FunctionalSpec::first_order(), g).total;
  EXPECT_LE(r.value.total, candidate);
  for (std::size_t n = 0; n <= g.n_t; ++n) EXPECT_NEAR(slice_mass(r.pair.rho.slice(n), g.dx), 1.0, 1e-12);
}

TEST(Minimizer, ActionRisesTowardLimitAsDiracSharpens) {
  const double target = rate_functional_of_profile(limit());
  std::vector<double> totals;
  for (std::size_t n : {41u, 81u, 161u}) {
    const auto g = build_grid(3.0, n, n - 1);
    const auto r = minimize_first_order(g, MollifiedDirac::gaussian_cells(g, 4.0));
    ASSERT_TRUE(r.converged) << "n_x=" << n;
    totals.push_back(r.value.total);
  }
  for (std::size_t k = 1; k < totals.size(); ++k) {
    EXPECT_GT(totals[k], totals[k - 1]);
    EXPECT_LT(std::abs(totals[k] - target), std::abs(totals[k - 1] - target));
  }
}

TEST(Minimizer, OptionPreconditions) {
  const auto g = build_grid(3.0, 21, 20);
  const auto d = MollifiedDirac::gaussian_cells(g, 2.0);
  MinimizerOptions o;
  o.step_ratio = 0.0;
  EXPECT_THROW(minimize_first_order(g, d, o), InvalidArgument);
  o = {};
  o.tol = -1.0;
  EXPECT_THROW(minimize_first_order(g, d, o), InvalidArgument);
  o = {};
  o.weights.kinetic = 0.0;
  EXPECT_THROW(minimize_first_order(g, d, o), InvalidArgument);
}

TEST(Convexity, MidpointInequalityOnFeasibleSegments) {
  std::mt19937_64 rng(37);
  const auto g = build_grid(3.0, 61, 30);
  const auto spec = FunctionalSpec::viscous(0.05, 0.1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_feasible(g, rng);
    const auto b = random_feasible(g, rng);
    for (double lam : {0.25, 0.5, 0.75}) {
      AdmissiblePair m = a;
      for (std::size_t k = 0; k < m.rho.values().size(); ++k) {
        m.rho.values()[k] = lam * a.rho.values()[k] + (1.0 - lam) * b.rho.values()[k];
      }
      for (std::size_t k = 0; k < m.beta.values().size(); ++k) {
        m.beta.values()[k] = lam * a.beta.values()[k] + (1.0 - lam) * b.beta.values()[k];
      }
      const double fa = eval_functional(a, spec, g).total;
      const double fb = eval_functional(b, spec, g).total;
      const double fm = eval_functional(m, spec, g).total;
      EXPECT_LE(fm, lam * fa + (1.0 - lam) * fb + 1e-12 * (fa + fb));
    }
  }
}
