#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mfgplan/error.hpp"
#include "mfgplan/ode.hpp"

namespace mfgplan {

/// Coefficient of r^3 in the equation for the quadratic coefficient a.
inline constexpr double kProfileCoupling = 32.0 / 9.0;

/// Peak density of the limit profile at its turning time t = 1/2.
inline double limit_turning_density() { return std::pow(3.0 * std::numbers::pi / 8.0, 2.0 / 3.0); }

/// Time from a zero-velocity turning point at peak density r to the collapse
/// of the support (s = 1/r follows s'' = -(32/9)/s^2).
inline double collapse_time(double r_turn) { return 3.0 * std::numbers::pi / 16.0 * std::pow(r_turn, -1.5); }

/// Leading-order integral of (4t)^{-2/3} over [0, tau].
inline double endpoint_tail(double tau) { return 3.0 * std::cbrt(tau) / std::pow(4.0, 2.0 / 3.0); }

/// State of the parabolic profile: value offset k, peak r, half-width l,
/// quadratic coefficient a, and the running reduced action J.
struct ProfileState {
  double k = 0.0;
  double r = 0.0;
  double l = 0.0;
  double a = 0.0;
  double j = 0.0;
};

namespace detail {

using ProfileVec = OdeState<5>;

inline ProfileVec pack(const ProfileState& s) { return {s.k, s.r, s.l, s.a, s.j}; }
inline ProfileState unpack(const ProfileVec& y) { return {y[0], y[1], y[2], y[3], y[4]}; }

/// k' = r, r' = -r a, l' = a l, a' = -(a^2 + (32/9) r^3),
/// J' = (2/5) r + (1/10) a^2 l^2 (reduced action density).
inline ProfileVec profile_rhs(double, const ProfileVec& y) {
  const double r = y[1], l = y[2], a = y[3];
  return {r, -r * a, a * l, -(a * a + kProfileCoupling * r * r * r), 0.4 * r + 0.1 * a * a * l * l};
}

}  // namespace detail

enum class ProfileKind { limit, eta };

struct ProfileSample {
  double t = 0.0;
  double k = 0.0;
  double r = 0.0;
  double l = 0.0;
  double a = 0.0;
  double j = 0.0;
};

/// Sampled parabolic profile rho = r (1 - (x/l)^2)_+, u = k + a x^2 / 2.
struct ProfileSolution {
  ProfileKind kind = ProfileKind::limit;
  double eta = 0.0;
  double t_floor = 0.0;
  std::vector<ProfileSample> samples;  ///< ascending in t
  double t1 = 0.0;      ///< time of minimal peak density (a = 0)
  double r1 = 0.0;      ///< minimal peak density
  double r0 = 0.0;      ///< initial peak density (eta kind)
  double k_end = 0.0;   ///< k at t = 1 including the analytic tail

  double t_begin() const { return samples.front().t; }
  double t_end() const { return samples.back().t; }

  /// Linear interpolation in t; throws outside the sampled range.
  ProfileSample at(double t) const {
    if (!(t >= t_begin() - 1e-15 && t <= t_end() + 1e-15)) {
      std::ostringstream os;
      os << "profile evaluated at t=" << t << " outside [" << t_begin() << ", " << t_end() << "]";
      throw InvalidArgument(os.str());
    }
    auto it = std::lower_bound(samples.begin(), samples.end(), t,
                               [](const ProfileSample& s, double v) { return s.t < v; });
    if (it == samples.begin()) return samples.front();
    if (it == samples.end()) return samples.back();
    const ProfileSample& hi = *it;
    const ProfileSample& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    auto mix = [w](double p, double q) { return p + w * (q - p); };
    return {t, mix(lo.k, hi.k), mix(lo.r, hi.r), mix(lo.l, hi.l), mix(lo.a, hi.a), mix(lo.j, hi.j)};
  }
};

struct LimitProfileOptions {
  std::size_t n_steps = 10000;
  double t_floor = 1e-6;
};

namespace detail {

inline AdaptiveOptions profile_ode_options(std::size_t n_steps) {
  AdaptiveOptions o;
  o.h_max = 0.5 / static_cast<double>(n_steps);
  o.h_initial = o.h_max;
  return o;
}

inline void locate_turning_point(ProfileSolution& p) {
  // The minimum of r sits where a changes sign from positive to negative.
  auto best = std::min_element(p.samples.begin(), p.samples.end(),
                               [](const ProfileSample& x, const ProfileSample& y) { return x.r < y.r; });
  p.t1 = best->t;
  p.r1 = best->r;
  for (std::size_t i = 1; i < p.samples.size(); ++i) {
    const auto& s0 = p.samples[i - 1];
    const auto& s1 = p.samples[i];
    if (s0.a > 0.0 && s1.a <= 0.0) {
      const double w = s0.a / (s0.a - s1.a);
      p.t1 = s0.t + w * (s1.t - s0.t);
      p.r1 = s0.r + w * (s1.r - s0.r);
      return;
    }
  }
}

}  // namespace detail

/// Limit profile, integrated outward from the turning point t = 1/2 where
/// a = 0, on [t_floor, 1 - t_floor]. k is anchored so that k(0) = 0.
inline ProfileSolution integrate_limit_profile(std::size_t n_steps = 10000, double t_floor = 1e-6) {
  detail::require(n_steps >= 100, "n_steps must be at least 100");
  detail::require(t_floor > 0.0 && t_floor <= 1e-3, "t_floor must lie in (0, 1e-3]");
  const double r_turn = limit_turning_density();
  const ProfileState anchor{0.0, r_turn, 0.75 / r_turn, 0.0, 0.0};
  const AdaptiveOptions opt = detail::profile_ode_options(n_steps);

  std::vector<ProfileSample> backward, forward;
  auto record = [](std::vector<ProfileSample>& out) {
    return [&out](double t, const detail::ProfileVec& y) {
      out.push_back({t, y[0], y[1], y[2], y[3], y[4]});
    };
  };
  auto never = [](double, const detail::ProfileVec&) { return false; };

  auto check = [&](const OdeOutcome<5>& o, const char* side) {
    if (o.status != OdeStatus::reached_end) {
      std::ostringstream os;
      os << "limit profile: step-size underflow at t=" << o.t << " while integrating toward the " << side
         << " endpoint (blow-up before t_floor)";
      throw NumericalFailure(os.str());
    }
  };
  check(integrate_adaptive<5>(detail::profile_rhs, 0.5, detail::pack(anchor), t_floor, opt,
                              record(backward), never),
        "initial");
  // The terminal half runs in tau = 1 - t so that times near the blow-up keep full precision.
  auto reversed_rhs = [](double tau, const detail::ProfileVec& y) {
    auto d = detail::profile_rhs(1.0 - tau, y);
    for (double& v : d) v = -v;
    return d;
  };
  auto record_reversed = [&forward](double tau, const detail::ProfileVec& y) {
    forward.push_back({1.0 - tau, y[0], y[1], y[2], y[3], y[4]});
  };
  check(integrate_adaptive<5>(reversed_rhs, 0.5, detail::pack(anchor), t_floor, opt, record_reversed, never),
        "terminal");

  ProfileSolution p;
  p.kind = ProfileKind::limit;
  p.t_floor = t_floor;
  p.samples.reserve(backward.size() + forward.size());
  p.samples.insert(p.samples.end(), backward.rbegin(), backward.rend());
  p.samples.insert(p.samples.end(), forward.begin() + 1, forward.end());

  const double tail = endpoint_tail(t_floor);
  const double k_shift = tail - p.samples.front().k;
  const double j_shift = 0.8 * tail - p.samples.front().j;
  for (auto& s : p.samples) {
    s.k += k_shift;
    s.j += j_shift;
  }
  p.k_end = p.samples.back().k + tail;
  detail::locate_turning_point(p);
  return p;
}

namespace detail {

struct BlowUpProbe {
  bool blew_up = false;
  double time = 0.0;  ///< estimated blow-up time, or the horizon if none
};

/// Marches the eta system from t = 0 and estimates the time at which r blows
/// up, using r ~ (4 (T - t))^{-2/3} once r exceeds r_stop.
inline BlowUpProbe probe_blow_up(double eta, double r0, const AdaptiveOptions& opt, double horizon = 3.0) {
  constexpr double r_stop = 1e6;
  const ProfileState start{0.0, r0, 0.75 / r0, 1.0 / eta, 0.0};
  auto ignore = [](double, const ProfileVec&) {};
  auto stop = [](double, const ProfileVec& y) { return y[1] > r_stop; };
  const auto o = integrate_adaptive<5>(profile_rhs, 0.0, pack(start), horizon, opt, ignore, stop);
  if (o.status == OdeStatus::reached_end) return {false, horizon};
  const double r = o.y[1];
  return {true, o.t + 0.25 * std::pow(r, -1.5)};
}

}  // namespace detail

/// Eta-regularized profile: a(0) = 1/eta, k(0) = 0, with the initial peak
/// r(0) found by bisection so that the support collapses exactly at t = 1.
inline ProfileSolution integrate_eta_profile(double eta, std::size_t n_steps = 10000, double t_floor = 1e-6) {
  detail::require(eta > 0.0 && eta <= 0.5, "eta out of range (0, 0.5]");
  detail::require(n_steps >= 100, "n_steps must be at least 100");
  detail::require(t_floor > 0.0 && t_floor <= 1e-3, "t_floor must lie in (0, 1e-3]");
  AdaptiveOptions opt = detail::profile_ode_options(n_steps);
  // Near t = 0 the eta profile varies on the scale eta.
  opt.h_initial = std::min(opt.h_max, 1e-3 * eta);

  // Larger r(0) means a more concentrated start and an earlier collapse.
  auto late = [&](double r0) {
    const auto p = detail::probe_blow_up(eta, r0, opt);
    return !p.blew_up || p.time > 1.0;
  };
  double lo = limit_turning_density();
  double hi = 10.0 / std::pow(eta, 2.0 / 3.0);
  const bool lo_ok = late(lo);
  const bool hi_ok = !late(hi);
  if (!lo_ok || !hi_ok) {
    std::ostringstream os;
    os << "eta profile: no sign change in bracket [" << lo << ", " << hi << "] for eta=" << eta
       << " (collapse after t=1 at lo: " << lo_ok << ", before t=1 at hi: " << hi_ok << ")";
    throw NumericalFailure(os.str());
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (late(mid) ? lo : hi) = mid;
  }
  const double r0 = 0.5 * (lo + hi);

  ProfileSolution p;
  p.kind = ProfileKind::eta;
  p.eta = eta;
  p.t_floor = t_floor;
  p.r0 = r0;
  const ProfileState start{0.0, r0, 0.75 / r0, 1.0 / eta, 0.0};
  auto record = [&p](double t, const detail::ProfileVec& y) {
    p.samples.push_back({t, y[0], y[1], y[2], y[3], y[4]});
  };
  auto never = [](double, const detail::ProfileVec&) { return false; };
  const auto o = integrate_adaptive<5>(detail::profile_rhs, 0.0, detail::pack(start), 1.0 - t_floor, opt,
                                       record, never);
  if (o.status != OdeStatus::reached_end) {
    std::ostringstream os;
    os << "eta profile: step-size underflow at t=" << o.t << " (collapse before 1 - t_floor)";
    throw NumericalFailure(os.str());
  }
  const double ratio = p.samples.back().r * std::pow(4.0 * t_floor, 2.0 / 3.0);
  if (std::abs(ratio - 1.0) > 0.01) {
    std::ostringstream os;
    os << "eta profile: terminal blow-up rate mismatch, r(1-t_floor)(4 t_floor)^{2/3}=" << ratio;
    throw NumericalFailure(os.str());
  }
  p.k_end = p.samples.back().k + endpoint_tail(t_floor);
  detail::locate_turning_point(p);
  return p;
}

/// r(t) (1 - (x/l(t))^2)_+.
inline double eval_rho_bar(const ProfileSolution& p, double x, double t) {
  const ProfileSample s = p.at(t);
  const double y = x / s.l;
  return y * y >= 1.0 ? 0.0 : s.r * (1.0 - y * y);
}

/// Reduced action: quadrature of (1/2)[rho^2 + rho (d_x u)^2] after the exact
/// x-integration over the support, plus the initial penalization for the eta
/// kind. Endpoint pieces below t_floor use the (4t)^{-2/3} asymptote.
inline double rate_functional_of_profile(const ProfileSolution& p) {
  const double tail = endpoint_tail(p.t_floor);
  double value = p.samples.back().j - p.samples.front().j + 0.8 * tail;
  if (p.kind == ProfileKind::limit) {
    value += 0.8 * tail;
  } else {
    const double l0 = p.samples.front().l;
    value += l0 * l0 / (10.0 * p.eta);
  }
  return value;
}

}  // namespace mfgplan
