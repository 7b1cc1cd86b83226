#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace mfgplan {

template <std::size_t N>
using OdeState = std::array<double, N>;

struct AdaptiveOptions {
  double rtol = 1e-11;
  double atol = 1e-13;
  double h_initial = 1e-4;
  double h_max = 1e-4;
  double h_min_rel = 1e-15;  ///< underflow threshold relative to max(|t|, 1)
};

enum class OdeStatus { reached_end, stopped, step_underflow };

template <std::size_t N>
struct OdeOutcome {
  OdeStatus status = OdeStatus::reached_end;
  double t = 0.0;
  OdeState<N> y{};
};

namespace detail {

template <std::size_t N, class Rhs>
OdeState<N> rk4_step(const Rhs& f, double t, const OdeState<N>& y, double h) {
  auto axpy = [](const OdeState<N>& a, double s, const OdeState<N>& b) {
    OdeState<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = a[i] + s * b[i];
    return out;
  };
  const OdeState<N> k1 = f(t, y);
  const OdeState<N> k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
  const OdeState<N> k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
  const OdeState<N> k4 = f(t + h, axpy(y, h, k3));
  OdeState<N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

}  // namespace detail

/// Classical RK4 with step-doubling error control, marching from t0 toward
/// t_end (either direction). `observe(t, y)` sees every accepted step,
/// `stop(t, y)` may end the march early.
template <std::size_t N, class Rhs, class Observe, class Stop>
OdeOutcome<N> integrate_adaptive(const Rhs& f, double t0, OdeState<N> y, double t_end,
                                 const AdaptiveOptions& opt, Observe&& observe, Stop&& stop) {
  const double dir = t_end >= t0 ? 1.0 : -1.0;
  double t = t0;
  double h = std::min(opt.h_initial, opt.h_max);
  observe(t, y);
  while (dir * (t_end - t) > 0.0) {
    const double remaining = std::abs(t_end - t);
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const OdeState<N> full = detail::rk4_step<N>(f, t, y, dir * h);
    const OdeState<N> half = detail::rk4_step<N>(f, t, y, dir * 0.5 * h);
    const OdeState<N> two = detail::rk4_step<N>(f, t + dir * 0.5 * h, half, dir * 0.5 * h);
    double err = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < N; ++i) {
      if (!std::isfinite(two[i])) finite = false;
      const double scale = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(two[i]));
      err = std::max(err, std::abs(two[i] - full[i]) / (15.0 * scale));
    }
    if (finite && err <= 1.0) {
      t = last ? t_end : t + dir * h;
      for (std::size_t i = 0; i < N; ++i) y[i] = two[i] + (two[i] - full[i]) / 15.0;
      observe(t, y);
      if (stop(t, y)) return {OdeStatus::stopped, t, y};
      const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 4.0;
      h = std::min(opt.h_max, h * std::clamp(grow, 0.2, 4.0));
    } else {
      const double shrink = finite ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.5) : 0.25;
      h *= shrink;
    }
    if (h < opt.h_min_rel * std::max(std::abs(t), 1.0)) return {OdeStatus::step_underflow, t, y};
  }
  return {OdeStatus::reached_end, t, y};
}

}  // namespace mfgplan
