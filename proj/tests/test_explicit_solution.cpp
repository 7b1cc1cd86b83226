#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mfgplan/characteristics.hpp"
#include "mfgplan/dirac.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/profile.hpp"
#include "mfgplan/sampling.hpp"

using namespace mfgplan;

namespace {

const ProfileSolution& limit() {
  static const ProfileSolution p = integrate_limit_profile();
  return p;
}

const CharacteristicFan& limit_fan() {
  static const CharacteristicFan f = build_fan(limit());
  return f;
}

const ProfileSolution& eta_profile(double eta) {
  static const ProfileSolution p01 = integrate_eta_profile(0.1);
  static const ProfileSolution p005 = integrate_eta_profile(0.05);
  if (eta == 0.1) return p01;
  if (eta == 0.05) return p005;
  throw std::logic_error("eta profile not cached");
}

/// 5-point Gauss-Legendre on [a, b].
template <class F>
double gauss5(F&& f, double a, double b) {
  static const double x[] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640, 0.9061798459386640};
  static const double w[] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                             0.2369268850561891};
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (int k = 0; k < 5; ++k) s += w[k] * f(c + h * x[k]);
  return s * h;
}

}  // namespace

TEST(LimitProfile, TurningPointAtHalfWithBlowUpConsistentPeak) {
  const auto& p = limit();
  EXPECT_NEAR(p.t1, 0.5, 1e-12);
  EXPECT_NEAR(p.r1, std::pow(3.0 * std::numbers::pi / 8.0, 2.0 / 3.0), 1e-9);
  EXPECT_NEAR(p.at(0.5).a, 0.0, 1e-12);
  // Collapse of the support from rest at peak r1 takes exactly 1/2.
  EXPECT_NEAR(collapse_time(p.r1), 0.5, 1e-9);
}

TEST(LimitProfile, PeakTimesHalfWidthIsConserved) {
  for (const auto& s : limit().samples) EXPECT_NEAR(s.r * s.l, 0.75, 1e-8);
}

TEST(LimitProfile, MirroredSamplesAreSymmetric) {
  const auto& s = limit().samples;
  ASSERT_EQ(s.size() % 2, 1u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& m = s[s.size() - 1 - i];
    EXPECT_NEAR(s[i].t + m.t, 1.0, 1e-12);
    EXPECT_NEAR(s[i].r, m.r, 1e-6);
    EXPECT_NEAR(s[i].a, -m.a, 1e-6 * std::max(1.0, std::abs(m.a)));
  }
}

TEST(LimitProfile, PeakFollowsEndpointAsymptote) {
  const auto& p = limit();
  const double e3 = std::abs(p.at(1e-3).r * std::pow(4e-3, 2.0 / 3.0) - 1.0);
  const double e4 = std::abs(p.at(1e-4).r * std::pow(4e-4, 2.0 / 3.0) - 1.0);
  EXPECT_LT(e3, 0.05);
  EXPECT_LT(e4, e3);
  const double late = std::abs(p.at(1.0 - 1e-4).r * std::pow(4e-4, 2.0 / 3.0) - 1.0);
  EXPECT_LT(late, 0.05);
}

TEST(LimitProfile, QuadraticCoefficientFollowsEndpointAsymptote) {
  const auto& p = limit();
  EXPECT_NEAR(p.at(1e-3).a * 1e-3, 2.0 / 3.0, 0.05 * 2.0 / 3.0);
  EXPECT_LT(std::abs(p.at(1e-4).a * 1e-4 - 2.0 / 3.0), std::abs(p.at(1e-3).a * 1e-3 - 2.0 / 3.0));
}

TEST(LimitProfile, QuadraticCoefficientExceedsFreeCone) {
  // With rho = 0 the coefficient would be 1/(2t); near t = 0 congestion pushes it toward 2/(3t).
  const auto& p = limit();
  for (double t : {1e-5, 1e-4, 1e-3, 1e-2, 0.1}) EXPECT_GT(p.at(t).a, 1.0 / (2.0 * t));
}

TEST(LimitProfile, TerminalValueIsIntegralOfPeak) {
  // s = 1/r obeys s'' = -(32/9)/s^2 with s' = 0 at s1 = 1/r1, so
  // int_0^1 r dt = 2 (3/8) sqrt(s1) int_0^s1 ds / sqrt(s (s1 - s)) = (3 pi / 4) r1^{-1/2}.
  const auto& p = limit();
  const double closed_form = 0.75 * std::numbers::pi / std::sqrt(limit_turning_density());
  EXPECT_NEAR(p.k_end, closed_form, 1e-6);
  EXPECT_NEAR(eval_u_bar(p, limit_fan(), 0.0, 1.0), p.k_end, 1e-12);
}

TEST(LimitProfile, PreconditionsRejected) {
  EXPECT_THROW(integrate_limit_profile(10), InvalidArgument);
  EXPECT_THROW(integrate_limit_profile(10000, 0.0), InvalidArgument);
  EXPECT_THROW(integrate_limit_profile(10000, 1e-2), InvalidArgument);
  EXPECT_THROW(limit().at(0.0), InvalidArgument);
}

TEST(EtaProfile, OutOfRangeRejected) {
  try {
    integrate_eta_profile(0.6);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("eta out of range"), std::string::npos);
  }
  EXPECT_THROW(integrate_eta_profile(0.0), InvalidArgument);
}

TEST(EtaProfile, InitialDataMatchPenalization) {
  const auto& p = eta_profile(0.05);
  EXPECT_DOUBLE_EQ(p.samples.front().t, 0.0);
  EXPECT_DOUBLE_EQ(p.samples.front().a * 0.05, 1.0);
  EXPECT_DOUBLE_EQ(p.samples.front().k, 0.0);
  EXPECT_NEAR(p.samples.front().r, p.r0, 1e-15);
  for (const auto& s : p.samples) EXPECT_NEAR(s.r * s.l, 0.75, 1e-8);
}

TEST(EtaProfile, ApproachesLimitPeakAtHalf) {
  const auto p = integrate_eta_profile(1e-3);
  EXPECT_NEAR(p.at(0.5).r, limit().r1, 0.02 * limit().r1);
}

TEST(EtaProfile, QuadraticCoefficientFollowsShiftedAsymptote) {
  // a(t)(t + eta) -> 2/3 needs eta << t << 1; at t = 0 the product is exactly 1.
  const auto p = integrate_eta_profile(1e-4);
  EXPECT_NEAR(p.at(1e-3).a * (1e-3 + 1e-4), 2.0 / 3.0, 0.05 * 2.0 / 3.0);
}

TEST(EtaProfile, BlowsUpAtUnitTime) {
  const auto& p = eta_profile(0.1);
  const double tf = p.t_floor;
  EXPECT_NEAR(p.samples.back().t, 1.0 - tf, 1e-12);
  EXPECT_NEAR(p.samples.back().r * std::pow(4.0 * tf, 2.0 / 3.0), 1.0, 0.01);
}

TEST(RhoBar, PeakAndSupportCutoff) {
  const auto& p = limit();
  EXPECT_NEAR(eval_rho_bar(p, 0.0, 0.5), p.r1, 1e-12);
  for (double t : {0.1, 0.5, 0.9}) {
    const double l = p.at(t).l;
    EXPECT_EQ(eval_rho_bar(p, l, t), 0.0);
    EXPECT_EQ(eval_rho_bar(p, -1.5 * l, t), 0.0);
    EXPECT_GT(eval_rho_bar(p, 0.99 * l, t), 0.0);
  }
}

TEST(RhoBar, GridMassIsOne) {
  const auto g = build_grid(3.0, 401, 4);
  double m = 0.0;
  for (std::size_t i = 0; i < g.n_x; ++i) m += eval_rho_bar(limit(), g.x(i), 0.5);
  EXPECT_NEAR(m * g.dx, 1.0, 1e-4);
}

TEST(RhoBar, SampledFieldUsesDiracAtPointMassSlices) {
  const auto g = build_grid(3.0, 101, 20);
  const auto d = MollifiedDirac::gaussian_cells(g, 2.0);
  const auto rho = sample_rho_bar(limit(), g, d);
  const auto slice = dirac_slice(g, d);
  for (std::size_t i = 0; i < g.n_x; ++i) {
    EXPECT_EQ(rho(0, i), slice[i]);
    EXPECT_EQ(rho(g.n_t, i), slice[i]);
  }
  const auto rho_eta = sample_rho_bar(eta_profile(0.1), g, d);
  EXPECT_NEAR(rho_eta(0, g.mid()), eta_profile(0.1).r0, 1e-12);
}

TEST(UBar, InteriorIsQuadratic) {
  const auto& p = limit();
  const auto s = p.at(0.3);
  EXPECT_NEAR(eval_u_bar(p, limit_fan(), 0.0, 0.3), s.k, 1e-15);
  EXPECT_NEAR(eval_u_bar(p, limit_fan(), 0.5 * s.l, 0.3), s.k + 0.125 * s.a * s.l * s.l, 1e-14);
  EXPECT_NEAR(eval_u_bar_x(p, limit_fan(), -0.5 * s.l, 0.3), -0.5 * s.a * s.l, 1e-14);
}

TEST(UBar, ContinuousAcrossSupportEdge) {
  const auto& p = limit();
  for (double t : {0.05, 0.25, 0.5, 0.75, 0.95}) {
    const double l = p.at(t).l;
    const double in = eval_u_bar(p, limit_fan(), l * (1.0 - 1e-6), t);
    const double out = eval_u_bar(p, limit_fan(), l * (1.0 + 1e-6), t);
    EXPECT_NEAR(in, out, 1e-5) << "t=" << t;
  }
  const auto& q = eta_profile(0.1);
  const auto fan = build_fan(q);
  for (double t : {0.05, 0.5, 0.95}) {
    const double l = q.at(t).l;
    EXPECT_NEAR(eval_u_bar(q, fan, l * (1.0 - 1e-6), t), eval_u_bar(q, fan, l * (1.0 + 1e-6), t), 1e-5);
  }
}

TEST(UBar, ExteriorSlopeMatchesFiniteDifference) {
  const auto& p = limit();
  for (double t : {0.3, 0.6, 0.9}) {
    for (double x : {1.0, 1.7, 2.5}) {
      if (x <= p.at(t).l) continue;
      const double h = 1e-5;
      const double fd = (eval_u_bar(p, limit_fan(), x + h, t) - eval_u_bar(p, limit_fan(), x - h, t)) / (2.0 * h);
      EXPECT_NEAR(eval_u_bar_x(p, limit_fan(), x, t), fd, 1e-3) << "x=" << x << " t=" << t;
      EXPECT_NEAR(eval_u_bar_x(p, limit_fan(), -x, t), -fd, 1e-3);
    }
  }
}

TEST(UBar, DominatesFreeConeOnGrid) {
  const auto g = build_grid(3.0, 101, 100);
  for (std::size_t n = 1; n <= g.n_t; ++n) {
    const double t = g.t(n);
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double x = g.x(i);
      EXPECT_GE(eval_u_bar(limit(), limit_fan(), x, t), x * x / (2.0 * t) - 1e-12) << x << " " << t;
    }
  }
}

TEST(UBar, EtaKindDominatesShiftedCone) {
  const double eta = 0.1;
  const auto& p = eta_profile(eta);
  const auto fan = build_fan(p);
  const auto g = build_grid(3.0, 101, 100);
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    const double t = g.t(n);
    for (std::size_t i = 0; i < g.n_x; ++i) {
      const double x = g.x(i);
      EXPECT_GE(eval_u_bar(p, fan, x, t), x * x / (2.0 * (t + eta)) - 1e-7) << x << " " << t;
    }
  }
  EXPECT_EQ(eval_u_bar(p, fan, 0.7, 0.0), 0.49 / (2.0 * eta));
}

TEST(UBar, RejectsTimesOutsideRange) {
  EXPECT_THROW(eval_u_bar(limit(), limit_fan(), 0.0, 0.0), InvalidArgument);
  EXPECT_THROW(eval_u_bar(limit(), limit_fan(), 0.0, 1.1), InvalidArgument);
}

TEST(Fan, TimesIncreaseAndSlopesFinite) {
  const auto& f = limit_fan();
  for (std::size_t i = 1; i < f.t0.size(); ++i) EXPECT_GT(f.t0[i], f.t0[i - 1]);
  for (double v : f.ldot) EXPECT_TRUE(std::isfinite(v));
}

TEST(RateFunctional, ReducedFormMatchesBruteForceQuadrature) {
  const auto& p = limit();
  const auto& fan = limit_fan();
  // x by Gauss-Legendre over the support, t by Gauss-Legendre after t = u^4 / 2 at each end.
  auto slice_action = [&](double t) {
    const double l = p.at(t).l;
    auto f = [&](double x) {
      const double rho = eval_rho_bar(p, x, t);
      const double ux = eval_u_bar_x(p, fan, x, t);
      return 0.5 * (rho * rho + rho * ux * ux);
    };
    return gauss5(f, -l, 0.0) + gauss5(f, 0.0, l);
  };
  const double u_lo = std::pow(2.0 * p.t_floor, 0.25);
  const int panels = 400;
  double brute = 0.0;
  for (int side = 0; side < 2; ++side) {
    for (int k = 0; k < panels; ++k) {
      const double a = u_lo + (1.0 - u_lo) * k / panels;
      const double b = u_lo + (1.0 - u_lo) * (k + 1) / panels;
      brute += gauss5(
          [&](double u) {
            const double tau = 0.5 * std::pow(u, 4.0);
            return slice_action(side == 0 ? tau : 1.0 - tau) * 2.0 * u * u * u;
          },
          a, b);
    }
  }
  brute += 2.0 * 0.8 * endpoint_tail(p.t_floor);
  const double reduced = rate_functional_of_profile(p);
  EXPECT_NEAR(brute, reduced, 1e-4 * reduced);
}

TEST(RateFunctional, EtaValuesIncreaseTowardLimit) {
  const double limit_value = rate_functional_of_profile(limit());
  const std::vector<double> v{rate_functional_of_profile(eta_profile(0.1)),
                              rate_functional_of_profile(eta_profile(0.05)),
                              rate_functional_of_profile(integrate_eta_profile(0.025))};
  for (std::size_t k = 0; k < v.size(); ++k) {
    EXPECT_LT(v[k], limit_value);
    if (k > 0) {
      EXPECT_GT(v[k], v[k - 1]);
    }
  }
  EXPECT_NEAR(limit_value, 1.3385528204, 1e-8);
}

TEST(RateFunctional, EtaKindChargesInitialPenalization) {
  const auto& p = eta_profile(0.1);
  const double l0 = p.samples.front().l;
  const double r0 = p.r0;
  // int r0 (1 - (x/l0)^2) x^2 / (2 eta) dx = (4/15) r0 l0^3 / (2 eta) = l0^2 / (10 eta) with r0 l0 = 3/4.
  EXPECT_NEAR((4.0 / 15.0) * r0 * l0 * l0 * l0 / (2.0 * 0.1), l0 * l0 / (10.0 * 0.1), 1e-10);
  const double reduced = p.samples.back().j - p.samples.front().j + 0.8 * endpoint_tail(p.t_floor);
  EXPECT_NEAR(rate_functional_of_profile(p) - reduced, l0 * l0 / (10.0 * 0.1), 1e-14);
}
