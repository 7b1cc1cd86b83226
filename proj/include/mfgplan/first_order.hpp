#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mfgplan/dirac.hpp"
#include "mfgplan/error.hpp"
#include "mfgplan/functional.hpp"
#include "mfgplan/grid.hpp"

namespace mfgplan {

/// prox of tau * kappa * b^2 / (2 w) at (w0, b0), with (0, 0) on the boundary.
/// Returns the point through w_out, b_out.
inline void perspective_prox(double w0, double b0, double tau_kappa, double& w_out, double& b_out) {
  const double p = w0 + tau_kappa;
  const double q = 0.5 * tau_kappa * b0 * b0;
  const double lo = std::max(p, 0.0);
  if (q == 0.0) {
    w_out = std::max(w0, 0.0);
    b_out = 0.0;
    return;
  }
  double s = lo + std::cbrt(q);
  for (int it = 0; it < 100; ++it) {
    const double phi = s * s * (s - p) - q;
    const double dphi = s * (3.0 * s - 2.0 * p);
    double next = s - phi / dphi;
    if (!(next >= lo)) next = 0.5 * (s + lo);
    const bool done = std::abs(next - s) <= 1e-12 * std::max(1.0, s);
    s = next;
    if (done) break;
  }
  if (s <= tau_kappa) {
    w_out = 0.0;
    b_out = 0.0;
    return;
  }
  w_out = s - tau_kappa;
  b_out = b0 * w_out / s;
}

struct MinimizerOptions {
  std::size_t max_iter = 20000;
  double tol = 1e-4;               ///< absolute duality gap
  std::size_t check_every = 50;
  double constraint_scale = 3.0;   ///< multiplies the continuity rows
  double step_ratio = 0.01;        ///< tau / sigma
  std::size_t power_iterations = 100;
  WeightConvention weights{};
};

struct MinimizerResult {
  AdmissiblePair pair;
  FunctionalValue value;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double operator_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> gap_history;
};

namespace detail {

/// Linear operator of the saddle problem and its adjoint. Unknowns are the
/// interior density slices and all fluxes; the dual blocks are the scaled
/// continuity rows (n_t x n_x), the cell densities and the cell fluxes
/// (n_t x (n_x - 1) each).
class FirstOrderOperator {
 public:
  FirstOrderOperator(const SpaceTimeGrid& g, double constraint_scale)
      : g_(g), nx_(g.n_x), nf_(g.n_x - 1), nt_(g.n_t), cs_(constraint_scale), ratio_(g.dt / g.dx) {}

  std::size_t rows_size() const { return nt_ * nx_; }
  std::size_t cells_size() const { return nt_ * nf_; }

  /// (rows, cells, fluxes) = K (rho, beta); rho includes the endpoint slices
  /// when affine is set and they are treated as zero otherwise.
  void apply(const ScalarField& rho, const FluxField& beta, bool affine, std::vector<double>& rows,
             std::vector<double>& cells, std::vector<double>& fluxes) const {
    auto r = [&](std::size_t n, std::size_t i) {
      if (!affine && (n == 0 || n == nt_)) return 0.0;
      return rho(n, i);
    };
    for (std::size_t n = 0; n < nt_; ++n) {
      for (std::size_t i = 0; i < nx_; ++i) {
        const double right = i + 1 < nx_ ? beta(n, i) : 0.0;
        const double left = i > 0 ? beta(n, i - 1) : 0.0;
        rows[n * nx_ + i] = cs_ * (r(n + 1, i) - r(n, i) + ratio_ * (right - left));
      }
      for (std::size_t f = 0; f < nf_; ++f) {
        cells[n * nf_ + f] = 0.25 * (r(n, f) + r(n, f + 1) + r(n + 1, f) + r(n + 1, f + 1));
        fluxes[n * nf_ + f] = beta(n, f);
      }
    }
  }

  /// (rho interior, beta) = K^T (rows, cells, fluxes); endpoint slices of rho are zeroed.
  void adjoint(const std::vector<double>& rows, const std::vector<double>& cells, const std::vector<double>& fluxes,
               ScalarField& rho, FluxField& beta) const {
    for (std::size_t i = 0; i < nx_; ++i) {
      rho(0, i) = 0.0;
      rho(nt_, i) = 0.0;
    }
    for (std::size_t n = 1; n < nt_; ++n) {
      for (std::size_t i = 0; i < nx_; ++i) {
        double acc = cs_ * (rows[(n - 1) * nx_ + i] - rows[n * nx_ + i]);
        double c = 0.0;
        if (i > 0) c += cells[(n - 1) * nf_ + i - 1] + cells[n * nf_ + i - 1];
        if (i < nf_) c += cells[(n - 1) * nf_ + i] + cells[n * nf_ + i];
        rho(n, i) = acc + 0.25 * c;
      }
    }
    for (std::size_t n = 0; n < nt_; ++n) {
      for (std::size_t f = 0; f < nf_; ++f) {
        beta(n, f) = cs_ * ratio_ * (rows[n * nx_ + f] - rows[n * nx_ + f + 1]) + fluxes[n * nf_ + f];
      }
    }
  }

  /// Largest singular value by power iteration on K^T K from a fixed start.
  double norm_estimate(std::size_t iterations) const {
    ScalarField rho(g_, Quantity::density, 1.0);
    FluxField beta(g_);
    for (auto& v : beta.values()) v = 1.0;
    std::vector<double> rows(rows_size()), cells(cells_size()), fluxes(cells_size());
    double estimate = 0.0;
    for (std::size_t k = 0; k < iterations; ++k) {
      apply(rho, beta, false, rows, cells, fluxes);
      adjoint(rows, cells, fluxes, rho, beta);
      double sq = 0.0;
      for (double v : rho.values()) sq += v * v;
      for (double v : beta.values()) sq += v * v;
      const double nrm = std::sqrt(sq);
      if (nrm == 0.0) break;
      estimate = std::sqrt(nrm);
      for (auto& v : rho.values()) v /= nrm;
      for (auto& v : beta.values()) v /= nrm;
    }
    return estimate;
  }

 private:
  const SpaceTimeGrid& g_;
  std::size_t nx_, nf_, nt_;
  double cs_;
  double ratio_;
};

/// Flux fixed by the continuity equation for the given density, accumulated
/// from the nearer wall so that empty tails carry exactly zero flux.
inline FluxField flux_from_density(const ScalarField& rho, const SpaceTimeGrid& g) {
  FluxField beta(g);
  const std::size_t nf = g.n_faces();
  const double ratio = g.dx / g.dt;
  const std::size_t mid = g.mid();
  for (std::size_t n = 0; n < g.n_t; ++n) {
    double acc = 0.0;
    for (std::size_t f = 0; f < mid; ++f) {
      acc -= ratio * (rho(n + 1, f) - rho(n, f));
      beta(n, f) = acc;
    }
    acc = 0.0;
    for (std::size_t f = nf; f-- > mid;) {
      acc += ratio * (rho(n + 1, f + 1) - rho(n, f + 1));
      beta(n, f) = acc;
    }
  }
  return beta;
}

/// Lagrangian dual value at multipliers lambda (one per continuity row, in the
/// units of the scaled objective), with the flux and the density minimized in
/// closed form over beta and rho >= 0.
inline double first_order_dual(const std::vector<double>& lambda, const ScalarField& endpoints_rho,
                               const SpaceTimeGrid& g, const WeightConvention& w) {
  const std::size_t nx = g.n_x, nf = g.n_faces(), nt = g.n_t;
  const double ratio = g.dt / g.dx;
  std::vector<double> cell_gain(nt * nf);
  for (std::size_t n = 0; n < nt; ++n) {
    for (std::size_t f = 0; f < nf; ++f) {
      const double grad = ratio * (lambda[n * nx + f + 1] - lambda[n * nx + f]);
      cell_gain[n * nf + f] = grad * grad / (4.0 * w.kinetic);
    }
  }
  auto node_gain = [&](std::size_t n, std::size_t i) {
    double c = 0.0;
    for (std::size_t m : {n - 1, n}) {
      if (m >= nt) continue;
      if (i > 0) c += cell_gain[m * nf + i - 1];
      if (i < nf) c += cell_gain[m * nf + i];
    }
    return 0.25 * c;
  };
  auto hat = [&](std::size_t i) { return (i == 0 || i + 1 == nx) ? 0.5 : 1.0; };
  double d = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    const double a = endpoints_rho(0, i), b = endpoints_rho(nt, i);
    d += 0.5 * w.congestion * hat(i) * (a * a + b * b);
    d += -lambda[i] * a + lambda[(nt - 1) * nx + i] * b;
    d -= a * node_gain(0, i) + b * node_gain(nt, i);
  }
  for (std::size_t n = 1; n < nt; ++n) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double s = lambda[(n - 1) * nx + i] - lambda[n * nx + i] - node_gain(n, i);
      if (s < 0.0) d -= s * s / (4.0 * w.congestion * hat(i));
    }
  }
  return d * g.dx * g.dt;
}

}  // namespace detail

/// Primal-dual (Chambolle-Pock) minimization of the first-order action between
/// two mollified Diracs. The objective is scaled by 1/(dx dt); the continuity
/// equation enters as scaled rows dt * defect. The reported gap is the primal
/// value of the feasible pair rebuilt from the density iterate minus the dual
/// function at the current multipliers, so it bounds the true suboptimality.
inline MinimizerResult minimize_first_order(const SpaceTimeGrid& g, const MollifiedDirac& endpoint,
                                            const MinimizerOptions& opt = {}) {
  detail::require(opt.max_iter >= 1, "max_iter must be positive");
  detail::require(opt.tol > 0.0, "tol must be positive");
  detail::require(opt.check_every >= 1, "check_every must be positive");
  detail::require(opt.constraint_scale > 0.0, "constraint_scale must be positive");
  detail::require(opt.step_ratio > 0.0, "step_ratio must be positive");
  detail::require(opt.weights.congestion > 0.0 && opt.weights.kinetic > 0.0, "weights must be positive");
  const std::size_t nx = g.n_x, nf = g.n_faces(), nt = g.n_t;
  const auto slice = dirac_slice(g, endpoint);

  detail::FirstOrderOperator op(g, opt.constraint_scale);
  const double norm = op.norm_estimate(opt.power_iterations);
  const double tau = 0.99 * std::sqrt(opt.step_ratio) / norm;
  const double sigma = 0.99 / (std::sqrt(opt.step_ratio) * norm);
  const double kappa = 2.0 * opt.weights.kinetic;
  const double cw = opt.weights.congestion;

  ScalarField rho(g, Quantity::density, 0.0);
  for (std::size_t n = 0; n <= nt; ++n) {
    for (std::size_t i = 0; i < nx; ++i) rho(n, i) = slice[i];
  }
  FluxField beta(g);
  ScalarField rho_bar = rho;
  FluxField beta_bar = beta;
  ScalarField rho_adj(g, Quantity::density, 0.0);
  FluxField beta_adj(g);
  std::vector<double> y_rows(op.rows_size(), 0.0), y_cells(op.cells_size(), 0.0), y_flux(op.cells_size(), 0.0);
  std::vector<double> k_rows(op.rows_size()), k_cells(op.cells_size()), k_flux(op.cells_size());
  std::vector<double> lambda(op.rows_size());

  MinimizerResult res;
  res.operator_norm = norm;
  auto hat = [&](std::size_t i) { return (i == 0 || i + 1 == nx) ? 0.5 : 1.0; };

  auto evaluate = [&](std::size_t iter) {
    ScalarField repaired = rho;
    for (std::size_t n = 1; n < nt; ++n) {
      auto s = repaired.slice(n);
      std::size_t lo = g.mid(), hi = g.mid();
      while (lo > 0 && s[lo - 1] > 0.0) --lo;
      while (hi + 1 < nx && s[hi + 1] > 0.0) ++hi;
      double mass = 0.0;
      for (std::size_t i = 0; i < nx; ++i) {
        if (i < lo || i > hi) s[i] = 0.0;
        mass += s[i];
      }
      mass *= g.dx;
      if (mass > 0.0) {
        for (double& v : s) v /= mass;
      }
    }
    AdmissiblePair pair{repaired, detail::flux_from_density(repaired, g)};
    const auto value = eval_functional(pair, FunctionalSpec::first_order(), g, opt.weights);
    for (std::size_t k = 0; k < lambda.size(); ++k) lambda[k] = opt.constraint_scale * y_rows[k];
    const double dual = detail::first_order_dual(lambda, rho, g, opt.weights);
    res.pair = std::move(pair);
    res.value = value;
    res.primal = value.total;
    res.dual = dual;
    res.gap = value.total - dual;
    res.iterations = iter;
    res.gap_history.push_back(res.gap);
    res.converged = res.gap <= opt.tol;
  };

  for (std::size_t iter = 1; iter <= opt.max_iter; ++iter) {
    op.apply(rho_bar, beta_bar, true, k_rows, k_cells, k_flux);
    for (std::size_t k = 0; k < y_rows.size(); ++k) y_rows[k] += sigma * k_rows[k];
    for (std::size_t c = 0; c < y_cells.size(); ++c) {
      const double a = y_cells[c] + sigma * k_cells[c];
      const double b = y_flux[c] + sigma * k_flux[c];
      double pw = 0.0, pb = 0.0;
      perspective_prox(a / sigma, b / sigma, kappa / sigma, pw, pb);
      y_cells[c] = a - sigma * pw;
      y_flux[c] = b - sigma * pb;
    }
    op.adjoint(y_rows, y_cells, y_flux, rho_adj, beta_adj);
    for (std::size_t n = 1; n < nt; ++n) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double old = rho(n, i);
        const double v = std::max((old - tau * rho_adj(n, i)) / (1.0 + 2.0 * tau * cw * hat(i)), 0.0);
        rho(n, i) = v;
        rho_bar(n, i) = 2.0 * v - old;
      }
    }
    for (std::size_t n = 0; n < nt; ++n) {
      for (std::size_t f = 0; f < nf; ++f) {
        const double old = beta(n, f);
        const double v = old - tau * beta_adj(n, f);
        beta(n, f) = v;
        beta_bar(n, f) = 2.0 * v - old;
      }
    }
    if (iter % opt.check_every == 0 || iter == opt.max_iter) {
      evaluate(iter);
      if (res.converged) return res;
    }
  }
  return res;
}

}  // namespace mfgplan
