#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mfgplan/error.hpp"

namespace mfgplan {

/// Uniform tensor grid on [-x_max, x_max] x [0, 1].
///
/// Nodes are indexed i = 0..n_x-1 with the middle node exactly at x = 0;
/// flux faces f = 0..n_x-2 sit at x_{f+1/2}. Time slices are n = 0..n_t.
struct SpaceTimeGrid {
  double x_max = 0.0;
  std::size_t n_x = 0;
  std::size_t n_t = 0;
  double dx = 0.0;
  double dt = 0.0;

  double x_min() const { return -x_max; }
  std::size_t mid() const { return (n_x - 1) / 2; }
  std::size_t n_faces() const { return n_x - 1; }

  /// Node coordinate; mirrored nodes are exact negatives of each other.
  double x(std::size_t i) const {
    const auto m = static_cast<double>(mid());
    return (static_cast<double>(i) - m) * dx;
  }
  double x_face(std::size_t f) const { return x(f) + 0.5 * dx; }
  double t(std::size_t n) const { return static_cast<double>(n) * dt; }
  double t_mid(std::size_t n) const { return (static_cast<double>(n) + 0.5) * dt; }

  bool operator==(const SpaceTimeGrid&) const = default;
};

inline SpaceTimeGrid build_grid(double x_max, std::size_t n_x, std::size_t n_t) {
  detail::require(std::isfinite(x_max) && x_max > 0.0, "x_max must be positive");
  detail::require(n_x >= 3, "n_x must be at least 3");
  detail::require(n_x % 2 == 1, "n_x must be odd");
  detail::require(n_t >= 2, "n_t must be at least 2");
  SpaceTimeGrid g;
  g.x_max = x_max;
  g.n_x = n_x;
  g.n_t = n_t;
  g.dx = 2.0 * x_max / static_cast<double>(n_x - 1);
  g.dt = 1.0 / static_cast<double>(n_t);
  return g;
}

enum class Quantity { density, value_function };

/// Nodal values on every time slice: (n_t + 1) x n_x, row-major by slice.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(const SpaceTimeGrid& g, Quantity q, double fill = 0.0)
      : n_x_(g.n_x), n_slices_(g.n_t + 1), quantity_(q), values_(n_x_ * n_slices_, fill) {}

  std::size_t n_x() const { return n_x_; }
  std::size_t n_slices() const { return n_slices_; }
  Quantity quantity() const { return quantity_; }

  std::span<double> slice(std::size_t n) { return {values_.data() + n * n_x_, n_x_}; }
  std::span<const double> slice(std::size_t n) const { return {values_.data() + n * n_x_, n_x_}; }
  double& operator()(std::size_t n, std::size_t i) { return values_[n * n_x_ + i]; }
  double operator()(std::size_t n, std::size_t i) const { return values_[n * n_x_ + i]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool matches(const SpaceTimeGrid& g) const { return n_x_ == g.n_x && n_slices_ == g.n_t + 1; }

 private:
  std::size_t n_x_ = 0;
  std::size_t n_slices_ = 0;
  Quantity quantity_ = Quantity::density;
  std::vector<double> values_;
};

/// Staggered values: one slice per time interval [t_n, t_{n+1}], n = 0..n_t-1,
/// each holding n_x - 1 face values (face f sits at x_{f+1/2}).
class FluxField {
 public:
  FluxField() = default;
  explicit FluxField(const SpaceTimeGrid& g, double fill = 0.0)
      : n_faces_(g.n_x - 1), n_slices_(g.n_t), values_(n_faces_ * n_slices_, fill) {}

  std::size_t n_faces() const { return n_faces_; }
  std::size_t n_slices() const { return n_slices_; }

  std::span<double> slice(std::size_t n) { return {values_.data() + n * n_faces_, n_faces_}; }
  std::span<const double> slice(std::size_t n) const { return {values_.data() + n * n_faces_, n_faces_}; }
  double& operator()(std::size_t n, std::size_t f) { return values_[n * n_faces_ + f]; }
  double operator()(std::size_t n, std::size_t f) const { return values_[n * n_faces_ + f]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool matches(const SpaceTimeGrid& g) const { return n_faces_ == g.n_x - 1 && n_slices_ == g.n_t; }

 private:
  std::size_t n_faces_ = 0;
  std::size_t n_slices_ = 0;
  std::vector<double> values_;
};

}  // namespace mfgplan
