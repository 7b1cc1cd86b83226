#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mfgplan/error.hpp"

namespace mfgplan {

/// Thomas algorithm writing into caller-owned storage.
///
/// `lower[i]` multiplies x[i] in row i+1 and `upper[i]` multiplies x[i+1] in
/// row i, so both bands have length n-1. `scratch` must hold n values.
inline void tridiagonal_solve_into(std::span<const double> lower, std::span<const double> diag,
                                   std::span<const double> upper, std::span<const double> rhs,
                                   std::span<double> out, std::span<double> scratch) {
  const std::size_t n = diag.size();
  if (n == 0 || lower.size() + 1 != n || upper.size() + 1 != n || rhs.size() != n ||
      out.size() != n || scratch.size() < n) {
    throw InvalidArgument("tridiagonal_solve: band/rhs length mismatch");
  }
  double scale = 0.0;
  for (double d : diag) scale = std::max(scale, std::abs(d));
  const double tiny = 1e-14 * (scale > 0.0 ? scale : 1.0);

  double pivot = diag[0];
  if (std::abs(pivot) <= tiny) throw NumericalFailure("tridiagonal_solve: near-zero pivot at row 0");
  out[0] = rhs[0] / pivot;
  for (std::size_t i = 1; i < n; ++i) {
    scratch[i] = upper[i - 1] / pivot;
    pivot = diag[i] - lower[i - 1] * scratch[i];
    if (std::abs(pivot) <= tiny) {
      throw NumericalFailure("tridiagonal_solve: near-zero pivot at row " + std::to_string(i));
    }
    out[i] = (rhs[i] - lower[i - 1] * out[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) out[i] -= scratch[i + 1] * out[i + 1];
}

inline std::vector<double> tridiagonal_solve(std::span<const double> lower, std::span<const double> diag,
                                             std::span<const double> upper, std::span<const double> rhs) {
  std::vector<double> out(diag.size()), scratch(diag.size());
  tridiagonal_solve_into(lower, diag, upper, rhs, out, scratch);
  return out;
}

/// y = A x for the tridiagonal A given by its bands.
inline std::vector<double> tridiagonal_apply(std::span<const double> lower, std::span<const double> diag,
                                             std::span<const double> upper, std::span<const double> x) {
  const std::size_t n = diag.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * x[i];
    if (i > 0) s += lower[i - 1] * x[i - 1];
    if (i + 1 < n) s += upper[i] * x[i + 1];
    y[i] = s;
  }
  return y;
}

}  // namespace mfgplan
