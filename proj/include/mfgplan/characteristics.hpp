#pragma once

#include <cmath>
#include <vector>

#include "mfgplan/error.hpp"
#include "mfgplan/profile.hpp"

namespace mfgplan {

/// Support-edge data used to extend u outside the support by straight
/// characteristics tangent to the edge curve x = l(t0).
struct CharacteristicFan {
  std::vector<double> t0;
  std::vector<double> l;
  std::vector<double> ldot;    ///< a(t0) l(t0)
  std::vector<double> u_edge;  ///< k(t0) + a(t0) l(t0)^2 / 2
};

inline CharacteristicFan build_fan(const ProfileSolution& p) {
  CharacteristicFan fan;
  const std::size_t n = p.samples.size();
  fan.t0.reserve(n);
  fan.l.reserve(n);
  fan.ldot.reserve(n);
  fan.u_edge.reserve(n);
  for (const auto& s : p.samples) {
    fan.t0.push_back(s.t);
    fan.l.push_back(s.l);
    fan.ldot.push_back(s.a * s.l);
    fan.u_edge.push_back(s.k + 0.5 * s.a * s.l * s.l);
  }
  return fan;
}

namespace detail {

struct EdgeState {
  double k = 0.0;
  double l = 0.0;
  double a = 0.0;
};

/// Profile coefficients at t, continued past the last sample toward t = 1
/// with the collapse asymptote (only used for the limit-type terminal end).
inline EdgeState edge_state(const ProfileSolution& p, double t) {
  if (t <= p.t_end()) {
    const auto s = p.at(t);
    return {s.k, s.l, s.a};
  }
  if (t > 1.0 + 1e-15) throw InvalidArgument("u evaluated after t = 1");
  const double tau = std::max(0.0, 1.0 - t);
  if (tau == 0.0) return {p.k_end, 0.0, 0.0};
  return {p.k_end - endpoint_tail(tau), 0.75 * std::pow(4.0 * tau, 2.0 / 3.0), -2.0 / (3.0 * tau)};
}

struct ExteriorHit {
  bool from_edge = false;  ///< false: the characteristic starts at t = 0
  double value = 0.0;
  double slope = 0.0;      ///< d_x u, for x > 0
};

inline ExteriorHit exterior_characteristic(const ProfileSolution& p, const CharacteristicFan& fan, double x,
                                           double t) {
  // x > l(t) here. g(t0) = l(t0) + (t - t0) l'(t0) - x decreases in t0 since l is concave.
  auto g_at = [&](std::size_t j) { return fan.l[j] + (t - fan.t0[j]) * fan.ldot[j] - x; };
  std::size_t hi = 0;
  {
    std::size_t lo_i = 0, hi_i = fan.t0.size();
    while (lo_i < hi_i) {
      const std::size_t m = (lo_i + hi_i) / 2;
      if (fan.t0[m] < t) lo_i = m + 1; else hi_i = m;
    }
    hi = lo_i;  // first sample with t0 >= t
  }
  if (hi == 0 || g_at(0) < 0.0) {
    if (p.kind == ProfileKind::eta) return {false, x * x / (2.0 * (t + p.eta)), x / (t + p.eta)};
    return {false, x * x / (2.0 * t), x / t};
  }
  double ta, ga, lda, ua;
  double tb, gb, ldb, ub;
  const std::size_t last = hi - 1;
  if (g_at(last) >= 0.0) {
    const EdgeState e = edge_state(p, t);
    ta = fan.t0[last]; ga = g_at(last); lda = fan.ldot[last]; ua = fan.u_edge[last];
    tb = t; gb = e.l - x; ldb = e.a * e.l; ub = e.k + 0.5 * e.a * e.l * e.l;
  } else {
    std::size_t lo_i = 0, hi_i = last;  // g(lo_i) >= 0 > g(hi_i)
    while (hi_i - lo_i > 1) {
      const std::size_t m = (lo_i + hi_i) / 2;
      (g_at(m) >= 0.0 ? lo_i : hi_i) = m;
    }
    ta = fan.t0[lo_i]; ga = g_at(lo_i); lda = fan.ldot[lo_i]; ua = fan.u_edge[lo_i];
    tb = fan.t0[hi_i]; gb = g_at(hi_i); ldb = fan.ldot[hi_i]; ub = fan.u_edge[hi_i];
  }
  const double w = ga / (ga - gb);
  const double ts = ta + w * (tb - ta);
  const double lds = lda + w * (ldb - lda);
  const double us = ua + w * (ub - ua);
  return {true, us + 0.5 * lds * lds * (t - ts), lds};
}

}  // namespace detail

/// u inside the support is k + a x^2 / 2; outside it is carried by the
/// characteristic tangent to the support edge (or, before the first tangent,
/// by the characteristic from t = 0).
inline double eval_u_bar(const ProfileSolution& p, const CharacteristicFan& fan, double x, double t) {
  if (!(t > 0.0 || (p.kind == ProfileKind::eta && t >= 0.0))) throw InvalidArgument("u evaluated at t <= 0");
  if (p.kind == ProfileKind::eta && t == 0.0) return x * x / (2.0 * p.eta);
  if (t < p.t_begin()) {
    // Below t_floor the limit profile is a point mass; only the free cone remains.
    return x * x / (2.0 * t) + endpoint_tail(t);
  }
  const double ax = std::abs(x);
  const detail::EdgeState e = detail::edge_state(p, t);
  if (ax <= e.l) return e.k + 0.5 * e.a * x * x;
  return detail::exterior_characteristic(p, fan, ax, t).value;
}

/// d_x u, same construction as eval_u_bar.
inline double eval_u_bar_x(const ProfileSolution& p, const CharacteristicFan& fan, double x, double t) {
  if (p.kind == ProfileKind::eta && t == 0.0) return x / p.eta;
  if (!(t > 0.0)) throw InvalidArgument("u evaluated at t <= 0");
  if (t < p.t_begin()) return x / t;
  const double ax = std::abs(x);
  const detail::EdgeState e = detail::edge_state(p, t);
  if (ax <= e.l) return e.a * x;
  const double s = detail::exterior_characteristic(p, fan, ax, t).slope;
  return x < 0.0 ? -s : s;
}

}  // namespace mfgplan
