#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfgplan/candidate.hpp"
#include "mfgplan/characteristics.hpp"
#include "mfgplan/diagnostics.hpp"
#include "mfgplan/first_order.hpp"
#include "mfgplan/functional.hpp"
#include "mfgplan/io.hpp"
#include "mfgplan/profile.hpp"
#include "mfgplan/sampling.hpp"
#include "mfgplan/sweep.hpp"
#include "mfgplan/viscous_solver.hpp"

namespace {

using namespace mfgplan;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Raw options as parsed; unset values fall back to per-command defaults.
struct RunConfig {
  std::string command;
  std::optional<double> x_max;
  std::optional<std::size_t> n_x, n_t;
  std::optional<double> epsilon, eta;
  double coupling_c = 1.0;
  double coupling_alpha = 1.0;
  std::optional<double> mollifier_cells;
  std::string mollifier = "gaussian";
  double damping = 0.5;
  std::optional<double> tol;
  std::optional<std::size_t> max_iter;
  double congestion_weight = 0.5;
  double kinetic_weight = 0.5;
  std::string out = "out";
  std::size_t workers = 1;
  std::vector<double> etas{0.2, 0.1, 0.05, 0.025};
  bool co_refined = false;
  double trend_slack = 0.01;
  double window_t_lo = 0.25;
  double alpha_exp = 1.0, beta_exp = 1.5, gamma_exp = 1.0, rate_exp = 2.5;
  double theta = 1.5;
  double constraint_scale = 3.0;
  double step_ratio = 0.01;
  std::size_t snapshot_stride = 20;
};

/// Fully resolved settings for one command.
struct Resolved {
  GridSpec grid;
  double epsilon = 0.05;
  double eta = 0.1;
  bool eta_given = false;
  double mollifier_cells = 2.0;
  MollifierKind kind = MollifierKind::gaussian;
  FixedPointOptions solver;
  double minimizer_tol = 1e-4;
  std::size_t minimizer_max_iter = 20000;
  WeightConvention weights;
};

[[noreturn]] void usage(const std::string& msg) { throw CLI::ValidationError(msg); }

Resolved resolve(const RunConfig& c) {
  Resolved r;
  const bool minimize = c.command == "minimize";
  r.grid.x_max = c.x_max.value_or(3.0);
  r.grid.n_x = c.n_x.value_or(minimize ? 201 : 401);
  r.grid.n_t = c.n_t.value_or(minimize ? 200 : 400);
  r.epsilon = c.epsilon.value_or(0.05);
  r.eta = c.eta.value_or(0.1);
  r.eta_given = c.eta.has_value();
  r.mollifier_cells = c.mollifier_cells.value_or(minimize ? 4.0 : 2.0);
  r.solver.damping = c.damping;
  r.solver.tol = c.tol.value_or(1e-6);
  r.solver.max_iter = c.max_iter.value_or(200);
  r.minimizer_tol = c.tol.value_or(1e-4);
  r.minimizer_max_iter = c.max_iter.value_or(20000);
  r.weights = {c.congestion_weight, c.kinetic_weight};

  if (c.mollifier == "gaussian") {
    r.kind = MollifierKind::gaussian;
  } else if (c.mollifier == "triangle") {
    r.kind = MollifierKind::triangle;
  } else {
    usage("mollifier must be gaussian or triangle");
  }
  if (!(r.grid.x_max > 0.0)) usage("x_max must be positive");
  if (r.grid.n_x < 3 || r.grid.n_x % 2 == 0) usage("n_x must be odd and at least 3");
  if (r.grid.n_t < 2) usage("n_t must be at least 2");
  if (!(r.epsilon > 0.0)) usage("epsilon must be positive");
  if (!(r.eta > 0.0)) usage("eta must be positive");
  if (c.command == "explicit" && r.eta_given && r.eta > 0.5) usage("eta out of range (0, 0.5]");
  if (!(r.mollifier_cells >= 1.0)) usage("mollifier_cells must be at least 1");
  if (!(c.damping > 0.0 && c.damping <= 1.0)) usage("damping must lie in (0, 1]");
  if (!(r.solver.tol > 0.0)) usage("tol must be positive");
  if (r.solver.max_iter < 1) usage("max_iter must be positive");
  if (!(c.congestion_weight > 0.0 && c.kinetic_weight > 0.0)) usage("weights must be positive");
  if (c.workers < 1) usage("workers must be at least 1");
  if (!(c.theta > 1.0 && c.theta < 2.0)) usage("theta must lie in (1, 2)");
  if (!(c.window_t_lo >= 0.1 && c.window_t_lo <= 1.0)) usage("window_t_lo must lie in [0.1, 1]");
  if (!(c.gamma_exp > 0.0)) usage("gamma_exp must be positive");
  if (!(c.constraint_scale > 0.0 && c.step_ratio > 0.0)) usage("minimizer scales must be positive");
  if (c.snapshot_stride < 1) usage("snapshot_stride must be positive");
  if (!(c.trend_slack >= 0.0 && c.trend_slack < 1.0)) usage("trend_slack must lie in [0, 1)");
  return r;
}

Json config_echo(const RunConfig& c, const Resolved& r) {
  return {{"command", c.command},
          {"x_max", r.grid.x_max},
          {"n_x", r.grid.n_x},
          {"n_t", r.grid.n_t},
          {"epsilon", r.epsilon},
          {"eta", r.eta},
          {"coupling_c", c.coupling_c},
          {"coupling_alpha", c.coupling_alpha},
          {"mollifier", c.mollifier},
          {"mollifier_cells", r.mollifier_cells},
          {"damping", r.solver.damping},
          {"tol", c.command == "minimize" ? r.minimizer_tol : r.solver.tol},
          {"max_iter", c.command == "minimize" ? r.minimizer_max_iter : r.solver.max_iter},
          {"weights", r.weights},
          {"out", c.out},
          {"workers", c.workers},
          {"etas", c.etas},
          {"co_refined", c.co_refined},
          {"trend_slack", c.trend_slack},
          {"window_t_lo", c.window_t_lo},
          {"alpha_exp", c.alpha_exp},
          {"beta_exp", c.beta_exp},
          {"gamma_exp", c.gamma_exp},
          {"rate_exp", c.rate_exp},
          {"theta", c.theta},
          {"constraint_scale", c.constraint_scale},
          {"step_ratio", c.step_ratio},
          {"snapshot_stride", c.snapshot_stride}};
}

SpaceTimeGrid make_grid(const Resolved& r) { return build_grid(r.grid.x_max, r.grid.n_x, r.grid.n_t); }

MollifiedDirac make_dirac(const Resolved& r, const SpaceTimeGrid& g) {
  return {r.mollifier_cells * g.dx, r.kind};
}

void write_timing(const std::filesystem::path& dir, double seconds) {
  write_json(dir / "timing.json", Json{{"wall_seconds", seconds}});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_explicit(const RunConfig& c, const Resolved& r) {
  const auto dir = prepare_output_dir(c.out);
  Json report{{"config", config_echo(c, r)}, {"weights", r.weights.name()}};
  if (r.eta_given) {
    const ProfileSolution p = integrate_eta_profile(r.eta);
    const double rate = rate_functional_of_profile(p);
    write_text(dir / "profile.csv", profile_csv(p));
    std::printf("eta=%.6g r0=%.9f k(1)=%.9f I_eta=%.9f (%s)\n", r.eta, p.r0, p.k_end, rate,
                r.weights.name().c_str());
    report.update({{"kind", "eta"}, {"r0", p.r0}, {"t1", p.t1}, {"r1", p.r1}, {"k_end", p.k_end}, {"rate", rate}});
  } else {
    const ProfileSolution p = integrate_limit_profile();
    const double rate = rate_functional_of_profile(p);
    write_text(dir / "profile.csv", profile_csv(p));
    std::printf("t1=%.9f r1=%.9f k(1)=%.9f I_bar=%.9f (%s)\n", p.t1, p.r1, p.k_end, rate, r.weights.name().c_str());
    report.update({{"kind", "limit"}, {"t1", p.t1}, {"r1", p.r1}, {"k_end", p.k_end}, {"rate", rate}});
  }
  write_json(dir / "report.json", report);
  return kExitOk;
}

std::string energy_csv(const EnergyTrace& e, const SpaceTimeGrid& g) {
  using detail::fmt17;
  std::string s = "t,rho_u,rho_sq,kinetic,penalty,mass,residual\n";
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    const bool interval = n < g.n_t;
    s += fmt17(g.t(n)) + ',' + fmt17(e.rho_u[n]) + ',' + fmt17(e.rho_sq[n]) + ',' +
         (interval ? fmt17(e.kinetic[n]) : std::string()) + ',' + fmt17(e.penalty[n]) + ',' + fmt17(e.mass[n]) +
         ',' + (interval ? fmt17(e.residual[n]) : std::string()) + '\n';
  }
  return s;
}

int cmd_solve(const RunConfig& c, const Resolved& r) {
  const auto dir = prepare_output_dir(c.out);
  const auto t0 = std::chrono::steady_clock::now();
  const SpaceTimeGrid g = make_grid(r);
  const MollifiedDirac d = make_dirac(r, g);
  const ViscousParams p{r.epsilon, r.eta, {c.coupling_c, c.coupling_alpha}};
  const ViscousSolution s = solve_fixed_point(p, g, d, r.solver);

  double barrier_violation = 0.0, min_rho = 0.0, asymmetry = 0.0;
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    for (std::size_t i = 0; i < g.n_x; ++i) {
      barrier_violation = std::max(barrier_violation, lower_barrier(g.x(i), g.t(n), p) - s.u(n, i));
      min_rho = std::min(min_rho, s.rho(n, i));
      const std::size_t j = g.n_x - 1 - i;
      asymmetry = std::max({asymmetry, std::abs(s.u(n, i) - s.u(n, j)), std::abs(s.rho(n, i) - s.rho(n, j))});
    }
  }
  const auto value = eval_functional({s.rho, s.beta}, FunctionalSpec::viscous(r.epsilon, r.eta), g, r.weights);
  const bool mass_ok = s.max_mass_error <= 1e-10;
  const bool positive = min_rho >= 0.0 && s.min_rho_before_clamp >= -1e-12;
  std::vector<std::string> failures;
  if (!s.converged) failures.push_back("non-converged");
  if (!mass_ok) failures.push_back("mass");
  if (!positive) failures.push_back("positivity");

  Json report{{"config", config_echo(c, r)},
              {"converged", s.converged},
              {"status", failures.empty() ? "ok" : "failed"},
              {"failures", failures},
              {"iterations", s.iterations},
              {"final_update_norm", s.final_update_norm},
              {"final_damping", s.final_damping},
              {"update_history", s.update_history},
              {"max_mass_error", s.max_mass_error},
              {"min_rho_before_clamp", s.min_rho_before_clamp},
              {"lower_barrier_violation", barrier_violation},
              {"max_asymmetry", asymmetry},
              {"coupling_holds", p.coupling_holds()},
              {"log_coupling", p.log_coupling()},
              {"u_center_terminal", s.u(g.n_t, g.mid())},
              {"energy",
               {{"max_residual", s.energy.max_residual},
                {"scaled_residual", s.energy.scaled_residual},
                {"sup_rho_u", s.energy.sup_rho_u},
                {"total_rho_sq", s.energy.total_rho_sq}}},
              {"functional",
               {{"weights", r.weights.name()},
                {"total", detail::number(value.total)},
                {"penalization", value.penalization},
                {"congestion", value.congestion},
                {"kinetic", value.kinetic},
                {"constraint_residual", value.constraint_residual}}}};
  write_json(dir / "report.json", report);
  write_text(dir / "fields.csv", fields_csv(s.rho, s.u, g, c.snapshot_stride));
  write_text(dir / "energy.csv", energy_csv(s.energy, g));
  write_timing(dir, seconds_since(t0));
  std::printf("converged=%s iterations=%zu update=%.3e mass_error=%.3e u(0,1)=%.9f I=%.9f (%s)\n",
              s.converged ? "true" : "false", s.iterations, s.final_update_norm, s.max_mass_error,
              s.u(g.n_t, g.mid()), value.total, r.weights.name().c_str());
  if (!failures.empty()) {
    for (const auto& f : failures) std::fprintf(stderr, "invariant failure: %s\n", f.c_str());
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_minimize(const RunConfig& c, const Resolved& r) {
  const auto dir = prepare_output_dir(c.out);
  const auto t0 = std::chrono::steady_clock::now();
  const SpaceTimeGrid g = make_grid(r);
  const MollifiedDirac d = make_dirac(r, g);
  MinimizerOptions opt;
  opt.max_iter = r.minimizer_max_iter;
  opt.tol = r.minimizer_tol;
  opt.constraint_scale = c.constraint_scale;
  opt.step_ratio = c.step_ratio;
  opt.weights = r.weights;
  const MinimizerResult m = minimize_first_order(g, d, opt);
  const ProfileSolution limit = integrate_limit_profile();
  const double rate_bar = rate_functional_of_profile(limit);
  Json report{{"config", config_echo(c, r)},
              {"converged", m.converged},
              {"iterations", m.iterations},
              {"operator_norm", m.operator_norm},
              {"primal", detail::number(m.primal)},
              {"dual", m.dual},
              {"gap", detail::number(m.gap)},
              {"gap_history", m.gap_history},
              {"weights", r.weights.name()},
              {"congestion", m.value.congestion},
              {"kinetic", m.value.kinetic},
              {"constraint_residual", m.value.constraint_residual},
              {"rate_bar", rate_bar},
              {"relative_to_rate_bar", (m.primal - rate_bar) / rate_bar}};
  if (r.kind == MollifierKind::gaussian) {
    const auto cand = eval_functional(first_order_candidate(c.theta, g, d), FunctionalSpec::first_order(), g,
                                      r.weights);
    report["candidate_total"] = cand.total;
  }
  write_json(dir / "report.json", report);
  write_text(dir / "fields.csv", fields_csv(m.pair.rho, ScalarField(g, Quantity::value_function), g,
                                            c.snapshot_stride));
  write_timing(dir, seconds_since(t0));
  std::printf("converged=%s iterations=%zu total=%.9f gap=%.3e I_bar=%.9f (%s)\n", m.converged ? "true" : "false",
              m.iterations, m.primal, m.gap, rate_bar, r.weights.name().c_str());
  return m.converged ? kExitOk : kExitFailure;
}

SweepPlan make_plan(const RunConfig& c, const Resolved& r) {
  SweepPlan plan;
  plan.etas = c.etas;
  plan.coupling = {c.coupling_c, c.coupling_alpha};
  plan.grid = r.grid;
  plan.co_refined = c.co_refined;
  plan.mollifier_cells = r.mollifier_cells;
  plan.solver = r.solver;
  plan.weights = r.weights;
  plan.window.t_lo = c.window_t_lo;
  plan.kpz = {c.alpha_exp, c.beta_exp, c.gamma_exp, c.rate_exp};
  plan.trend_slack = c.trend_slack;
  plan.workers = c.workers;
  plan.validate();
  return plan;
}

void write_sweep_outputs(const std::filesystem::path& dir, const RunConfig& c, const Resolved& r,
                         const ExperimentReport& rep) {
  Json j = rep;
  j["config"] = config_echo(c, r);
  write_json(dir / "report.json", j);
  write_text(dir / "points.csv", points_csv(rep.points));
  Json timing = Json::array();
  for (const auto& p : rep.points) timing.push_back({{"eta", p.eta}, {"wall_seconds", p.wall_seconds}});
  write_json(dir / "timing.json", timing);
}

int report_verdicts(const ExperimentReport& rep, const std::vector<std::string>& metrics) {
  bool failed = false, insufficient = false;
  for (const auto& p : rep.points) {
    if (p.status != "ok") {
      std::fprintf(stderr, "point eta=%.6g: %s %s\n", p.eta, p.status.c_str(), p.message.c_str());
      failed = true;
    }
  }
  for (const auto& v : rep.verdicts) {
    if (!metrics.empty() && std::find(metrics.begin(), metrics.end(), v.metric) == metrics.end()) continue;
    std::printf("%-18s %s\n", v.metric.c_str(), to_string(v.status));
    failed = failed || v.status == TrendStatus::fail;
    insufficient = insufficient || v.status == TrendStatus::insufficient;
  }
  if (insufficient) std::fprintf(stderr, "warning: fewer than 3 points, trends not assessed\n");
  return failed ? kExitFailure : kExitOk;
}

int cmd_sweep(const RunConfig& c, const Resolved& r) {
  const SweepPlan plan = make_plan(c, r);
  const auto dir = prepare_output_dir(c.out);
  const ExperimentReport rep = run_sweep(plan);
  write_sweep_outputs(dir, c, r, rep);
  for (const auto& p : rep.points) {
    std::printf("eta=%.6g eps=%.6g rho_err=%.6f I_gap=%.6f u_err=%.6f A=%.6f\n", p.eta, p.epsilon,
                p.rho_error_limit, p.functional_gap, p.u_error_local, p.kpz.a_value);
  }
  return report_verdicts(rep, {});
}

int cmd_kpz(const RunConfig& c, const Resolved& r) {
  const SweepPlan plan = make_plan(c, r);
  const auto dir = prepare_output_dir(c.out);
  const ExperimentReport rep = run_sweep(plan);
  write_sweep_outputs(dir, c, r, rep);
  for (const auto& p : rep.points) {
    std::printf("lambda=%.6g A=%.9f |A-k1|=%.6f mu=%.6f mu_raw=%.6f mass(3/2)=%.6f mass(2/3)=%.6f rate=%.6g\n",
                p.kpz.lambda, p.kpz.a_value, p.kpz.a_error, p.kpz.mu, p.kpz.mu_raw, p.kpz.mass_proxy_three_halves,
                p.kpz.mass_proxy_two_thirds, p.kpz.rate_proxy);
  }
  int status = report_verdicts(rep, {"kpz_a_error", "kpz_mu_error"});

  std::vector<double> a;
  for (const auto& p : rep.points) {
    if (p.status == "ok") a.push_back(p.kpz.a_value);
  }
  if (a.size() >= 2 && rep.points.back().status == "ok") {
    double threshold = std::abs(a[1] - a[0]);
    for (std::size_t k = 2; k < a.size(); ++k) threshold = std::min(threshold, std::abs(a[k] - a[k - 1]));
    const PointRecord& last = rep.points.back();
    const SpaceTimeGrid g = build_grid(plan.grid_for(plan.etas.size() - 1).x_max, last.n_x, last.n_t);
    const ViscousParams p{last.epsilon, 0.5 * last.eta, {plan.coupling.c, plan.coupling.alpha}};
    const ViscousSolution s = solve_fixed_point(p, g, MollifiedDirac::gaussian_cells(g, plan.mollifier_cells),
                                                plan.solver);
    const double change = std::abs(s.u(g.n_t, g.mid()) - last.kpz.a_value);
    const bool stable = s.converged && change < threshold;
    std::printf("eta_stability       %s (|dA|=%.6f threshold=%.6f)\n", stable ? "pass" : "fail", change, threshold);
    Json extra{{"eta_halved", p.eta}, {"epsilon", p.epsilon}, {"a_change", change}, {"threshold", threshold},
               {"converged", s.converged}, {"pass", stable}};
    write_json(dir / "eta_stability.json", extra);
    if (!stable) status = kExitFailure;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solvers for the one-dimensional planning mean field game and its viscous approximation"};
  app.set_config("--config", "", "TOML configuration file (flat keys)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  RunConfig c;

  app.add_option("--x-max,--x_max", c.x_max, "Half-width of the spatial domain");
  app.add_option("--n-x,--n_x", c.n_x, "Spatial node count (odd)");
  app.add_option("--n-t,--n_t", c.n_t, "Time step count");
  app.add_option("--epsilon", c.epsilon, "Viscosity");
  app.add_option("--eta", c.eta, "Initial penalization scale");
  app.add_option("--coupling-c,--coupling_c", c.coupling_c, "Coupling constant C in eps = C eta^alpha");
  app.add_option("--coupling-alpha,--coupling_alpha", c.coupling_alpha, "Coupling exponent alpha");
  app.add_option("--mollifier-cells,--mollifier_cells", c.mollifier_cells, "Dirac width in cells");
  app.add_option("--mollifier", c.mollifier, "Dirac mollifier: gaussian | triangle");
  app.add_option("--damping", c.damping, "Fixed-point damping");
  app.add_option("--tol", c.tol, "Fixed-point update tolerance or minimizer duality-gap tolerance");
  app.add_option("--max-iter,--max_iter", c.max_iter, "Iteration cap");
  app.add_option("--congestion-weight,--congestion_weight", c.congestion_weight, "Weight of rho^2");
  app.add_option("--kinetic-weight,--kinetic_weight", c.kinetic_weight, "Weight of beta^2/rho");
  app.add_option("--out", c.out, "Output directory");
  app.add_option("--workers", c.workers, "Concurrent sweep points");
  app.add_option("--etas", c.etas, "Sweep eta values, strictly decreasing")->delimiter(',');
  app.add_flag("--co-refined,--co_refined", c.co_refined, "Refine dx with sqrt(eta) along the sweep");
  app.add_option("--trend-slack,--trend_slack", c.trend_slack, "Required relative decrease per sweep step");
  app.add_option("--window-t-lo,--window_t_lo", c.window_t_lo, "Lower time of the local u-error window");
  app.add_option("--alpha-exp,--alpha_exp", c.alpha_exp, "Viscosity scaling exponent");
  app.add_option("--beta-exp,--beta_exp", c.beta_exp, "Terminal-mass scaling exponent");
  app.add_option("--gamma-exp,--gamma_exp", c.gamma_exp, "Height scaling exponent");
  app.add_option("--rate-exp,--rate_exp", c.rate_exp, "Rate proxy exponent");
  app.add_option("--theta", c.theta, "Candidate schedule exponent in (1, 2)");
  app.add_option("--constraint-scale,--constraint_scale", c.constraint_scale, "Minimizer continuity row scale");
  app.add_option("--step-ratio,--step_ratio", c.step_ratio, "Minimizer primal/dual step ratio");
  app.add_option("--snapshot-stride,--snapshot_stride", c.snapshot_stride, "Slices between CSV snapshots");

  for (const char* name : {"explicit", "solve", "minimize", "sweep", "kpz"}) {
    app.add_subcommand(name)->fallthrough();
  }
  app.get_subcommand("explicit")->description("Limit or eta profile (set --eta)");
  app.get_subcommand("solve")->description("Single viscous solve");
  app.get_subcommand("minimize")->description("First-order variational minimization");
  app.get_subcommand("sweep")->description("Convergence sweep with trend verdicts");
  app.get_subcommand("kpz")->description("Sweep with rescaling diagnostics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  c.command = app.get_subcommands().front()->get_name();

  Resolved r;
  try {
    r = resolve(c);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  }
  try {
    if (c.command == "explicit") return cmd_explicit(c, r);
    if (c.command == "solve") return cmd_solve(c, r);
    if (c.command == "minimize") return cmd_minimize(c, r);
    if (c.command == "sweep") return cmd_sweep(c, r);
    return cmd_kpz(c, r);
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}
