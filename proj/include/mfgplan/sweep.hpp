#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "mfgplan/characteristics.hpp"
#include "mfgplan/diagnostics.hpp"
#include "mfgplan/dirac.hpp"
#include "mfgplan/error.hpp"
#include "mfgplan/functional.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/profile.hpp"
#include "mfgplan/sampling.hpp"
#include "mfgplan/viscous_solver.hpp"

namespace mfgplan {

struct GridSpec {
  double x_max = 3.0;
  std::size_t n_x = 401;
  std::size_t n_t = 400;
};

/// eps = c * eta^alpha at every sweep point.
struct CouplingRule {
  double c = 1.0;
  double alpha = 1.0;

  double epsilon(double eta) const { return c * std::pow(eta, alpha); }
};

struct SweepPlan {
  std::vector<double> etas{0.2, 0.1, 0.05, 0.025};
  CouplingRule coupling{};
  GridSpec grid{};
  bool co_refined = false;        ///< dx proportional to sqrt(eta), anchored at the first point
  double mollifier_cells = 2.0;   ///< gaussian Dirac width in units of dx
  FixedPointOptions solver{};
  WeightConvention weights{};
  Window window{};
  double uniqueness_theta = 0.1;
  KpzExponents kpz{};
  double trend_slack = 0.01;      ///< each value must be at most (1 - slack) times its predecessor
  std::size_t workers = 1;

  void validate() const {
    if (etas.empty()) throw InvalidArgument("sweep plan has no points");
    for (std::size_t k = 0; k < etas.size(); ++k) {
      if (!(etas[k] > 0.0)) throw InvalidArgument("eta values must be positive");
      if (k > 0 && !(etas[k] < etas[k - 1])) throw InvalidArgument("eta must be strictly decreasing along the sweep");
    }
    detail::require(coupling.c > 0.0, "coupling constant must be positive");
    detail::require(mollifier_cells >= 1.0, "mollifier width must be at least one cell");
    detail::require(trend_slack >= 0.0 && trend_slack < 1.0, "trend slack must lie in [0, 1)");
    detail::require(workers >= 1, "workers must be at least 1");
    detail::require(uniqueness_theta > 0.0 && uniqueness_theta < 0.4, "uniqueness theta must lie in (0, 0.4)");
    detail::require(window.t_lo >= 0.1, "window must exclude t < 0.1");
    (void)build_grid(grid.x_max, grid.n_x, grid.n_t);
  }

  GridSpec grid_for(std::size_t k) const {
    if (!co_refined || k == 0) return grid;
    const double scale = std::sqrt(etas.front() / etas[k]);
    auto n = static_cast<std::size_t>(std::llround((grid.n_x - 1) * scale));
    n += n % 2;
    return {grid.x_max, n + 1, grid.n_t};
  }
};

struct PointRecord {
  double eta = 0.0;
  double epsilon = 0.0;
  std::size_t n_x = 0;
  std::size_t n_t = 0;
  std::string status = "ok";  ///< ok | not_converged | error
  std::string message;
  std::size_t iterations = 0;
  double update_norm = 0.0;
  bool coupling_holds = false;
  double log_coupling = 0.0;
  double max_mass_error = 0.0;
  double energy_scaled_residual = 0.0;
  double rho_error_eta = 0.0;     ///< ||rho - rho_bar_eta||_L2
  double rho_error_limit = 0.0;   ///< ||rho - rho_bar||_L2
  double functional = 0.0;        ///< I(eps, eta) of the solver pair
  double functional_gap = 0.0;    ///< |I(eps, eta) - I_bar|
  double u_error_local = 0.0;
  double cross_rho_ubar = 0.0;
  double cross_u_rhobar = 0.0;
  double uniqueness = 0.0;
  KpzRecord kpz{};
  double wall_seconds = 0.0;      ///< kept out of the deterministic outputs
};

enum class TrendStatus { pass, fail, insufficient };

inline const char* to_string(TrendStatus s) {
  switch (s) {
    case TrendStatus::pass: return "pass";
    case TrendStatus::fail: return "fail";
    case TrendStatus::insufficient: return "insufficient points";
  }
  return "?";
}

struct TrendVerdict {
  std::string metric;
  TrendStatus status = TrendStatus::insufficient;
  std::vector<double> values;
};

struct ExperimentReport {
  SweepPlan plan;
  double rate_bar = 0.0;   ///< I_bar of the limit profile
  double k_end = 0.0;      ///< k(1) = u_bar(0, 1)
  std::vector<PointRecord> points;
  std::vector<TrendVerdict> verdicts;

  bool all_pass() const {
    for (const auto& v : verdicts) {
      if (v.status == TrendStatus::fail) return false;
    }
    for (const auto& p : points) {
      if (p.status != "ok") return false;
    }
    return true;
  }
};

/// pass when every value is at most (1 - slack) times its predecessor over at
/// least three values.
inline TrendStatus strict_decrease(const std::vector<double>& v, double slack) {
  if (v.size() < 3) return TrendStatus::insufficient;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (!(v[k] < v[k - 1] && v[k] <= (1.0 - slack) * v[k - 1])) return TrendStatus::fail;
  }
  return TrendStatus::pass;
}

/// Solves one sweep point and fills every diagnostic against the shared limit profile.
inline PointRecord run_point(const SweepPlan& plan, std::size_t k, const ProfileSolution& limit,
                             const CharacteristicFan& limit_fan, double rate_bar) {
  PointRecord rec;
  rec.eta = plan.etas[k];
  rec.epsilon = plan.coupling.epsilon(rec.eta);
  const GridSpec gs = plan.grid_for(k);
  rec.n_x = gs.n_x;
  rec.n_t = gs.n_t;
  const auto start = std::chrono::steady_clock::now();
  try {
    const SpaceTimeGrid g = build_grid(gs.x_max, gs.n_x, gs.n_t);
    const auto dirac = MollifiedDirac::gaussian_cells(g, plan.mollifier_cells);
    ViscousParams p{rec.epsilon, rec.eta, {plan.coupling.c, plan.coupling.alpha}};
    rec.coupling_holds = p.coupling_holds();
    rec.log_coupling = p.log_coupling();
    const ViscousSolution sol = solve_fixed_point(p, g, dirac, plan.solver);
    rec.iterations = sol.iterations;
    rec.update_norm = sol.final_update_norm;
    rec.max_mass_error = sol.max_mass_error;
    rec.energy_scaled_residual = sol.energy.scaled_residual;
    if (!sol.converged) rec.status = "not_converged";

    const ProfileSolution eta_profile = integrate_eta_profile(rec.eta);
    const CharacteristicFan eta_fan = build_fan(eta_profile);
    const ScalarField rho_bar = sample_rho_bar(limit, g, dirac);
    const ScalarField rho_bar_eta = sample_rho_bar(eta_profile, g, dirac);
    const ScalarField u_bar_eta = sample_u_bar(eta_profile, eta_fan, g);
    rec.rho_error_eta = l2_spacetime_norm(difference(sol.rho, rho_bar_eta), g);
    rec.rho_error_limit = l2_spacetime_norm(difference(sol.rho, rho_bar), g);
    const auto value = eval_functional({sol.rho, sol.beta}, FunctionalSpec::viscous(rec.epsilon, rec.eta), g,
                                       plan.weights);
    rec.functional = value.total;
    rec.functional_gap = std::abs(value.total - rate_bar);
    rec.u_error_local = local_uniform_u_error(sol, limit, limit_fan, plan.window);
    const CrossTerms ct = cross_terms(sol.rho, sol.u, rho_bar_eta, u_bar_eta, rec.epsilon, g);
    rec.cross_rho_ubar = ct.rho_times_ubar_xx;
    rec.cross_u_rhobar = ct.u_xx_times_rhobar;
    rec.uniqueness = uniqueness_identity_check(sol.u, sol.rho, u_bar_eta, rho_bar_eta, g, plan.uniqueness_theta);
    rec.kpz = kpz_rescale_diagnostics(sol, limit.k_end, value.total, plan.kpz);
  } catch (const std::exception& e) {
    rec.status = "error";
    rec.message = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// Trend verdicts over the points whose solve succeeded, in sweep order.
inline std::vector<TrendVerdict> sweep_verdicts(const std::vector<PointRecord>& points, double slack) {
  struct Metric {
    const char* name;
    double (*get)(const PointRecord&);
  };
  static const Metric metrics[] = {
      {"rho_error_limit", [](const PointRecord& r) { return r.rho_error_limit; }},
      {"functional_gap", [](const PointRecord& r) { return r.functional_gap; }},
      {"u_error_local", [](const PointRecord& r) { return r.u_error_local; }},
      {"cross_rho_ubar", [](const PointRecord& r) { return std::abs(r.cross_rho_ubar); }},
      {"cross_u_rhobar", [](const PointRecord& r) { return std::abs(r.cross_u_rhobar); }},
      {"kpz_a_error", [](const PointRecord& r) { return r.kpz.a_error; }},
      {"kpz_mu_error", [](const PointRecord& r) { return std::abs(r.kpz.mu - 1.0); }},
  };
  std::vector<TrendVerdict> out;
  for (const auto& m : metrics) {
    TrendVerdict v;
    v.metric = m.name;
    for (const auto& p : points) {
      if (p.status == "ok") v.values.push_back(m.get(p));
    }
    v.status = strict_decrease(v.values, slack);
    out.push_back(std::move(v));
  }
  return out;
}

/// Runs every point (concurrently up to plan.workers) and assembles the report.
/// Records are written by index, so the report does not depend on the worker count.
inline ExperimentReport run_sweep(const SweepPlan& plan) {
  plan.validate();
  ExperimentReport report;
  report.plan = plan;
  const ProfileSolution limit = integrate_limit_profile();
  const CharacteristicFan limit_fan = build_fan(limit);
  report.rate_bar = rate_functional_of_profile(limit);
  report.k_end = limit.k_end;
  report.points.resize(plan.etas.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < plan.etas.size(); k = next++) {
      report.points[k] = run_point(plan, k, limit, limit_fan, report.rate_bar);
    }
  };
  const std::size_t n_threads = std::min(plan.workers, plan.etas.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  report.verdicts = sweep_verdicts(report.points, plan.trend_slack);
  return report;
}

}  // namespace mfgplan
