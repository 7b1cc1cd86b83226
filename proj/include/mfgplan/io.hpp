#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfgplan/error.hpp"
#include "mfgplan/grid.hpp"
#include "mfgplan/profile.hpp"
#include "mfgplan/sweep.hpp"

namespace mfgplan {

using Json = nlohmann::ordered_json;

namespace detail {
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline double number(const Json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline void to_json(Json& j, const GridSpec& g) { j = {{"x_max", g.x_max}, {"n_x", g.n_x}, {"n_t", g.n_t}}; }
inline void from_json(const Json& j, GridSpec& g) {
  g.x_max = j.at("x_max").get<double>();
  g.n_x = j.at("n_x").get<std::size_t>();
  g.n_t = j.at("n_t").get<std::size_t>();
}

inline void to_json(Json& j, const CouplingRule& c) { j = {{"c", c.c}, {"alpha", c.alpha}}; }
inline void from_json(const Json& j, CouplingRule& c) {
  c.c = j.at("c").get<double>();
  c.alpha = j.at("alpha").get<double>();
}

inline void to_json(Json& j, const FixedPointOptions& o) {
  j = {{"damping", o.damping}, {"tol", o.tol}, {"max_iter", o.max_iter}};
}
inline void from_json(const Json& j, FixedPointOptions& o) {
  o.damping = j.at("damping").get<double>();
  o.tol = j.at("tol").get<double>();
  o.max_iter = j.at("max_iter").get<std::size_t>();
}

inline void to_json(Json& j, const WeightConvention& w) {
  j = {{"congestion", w.congestion}, {"kinetic", w.kinetic}, {"name", w.name()}};
}
inline void from_json(const Json& j, WeightConvention& w) {
  w.congestion = j.at("congestion").get<double>();
  w.kinetic = j.at("kinetic").get<double>();
}

inline void to_json(Json& j, const Window& w) {
  j = {{"x_lo", w.x_lo}, {"x_hi", w.x_hi}, {"t_lo", w.t_lo}, {"t_hi", w.t_hi}};
}
inline void from_json(const Json& j, Window& w) {
  w.x_lo = j.at("x_lo").get<double>();
  w.x_hi = j.at("x_hi").get<double>();
  w.t_lo = j.at("t_lo").get<double>();
  w.t_hi = j.at("t_hi").get<double>();
}

inline void to_json(Json& j, const KpzExponents& e) {
  j = {{"alpha", e.alpha}, {"beta", e.beta}, {"gamma", e.gamma}, {"rate", e.rate}};
}
inline void from_json(const Json& j, KpzExponents& e) {
  e.alpha = j.at("alpha").get<double>();
  e.beta = j.at("beta").get<double>();
  e.gamma = j.at("gamma").get<double>();
  e.rate = j.at("rate").get<double>();
}

inline void to_json(Json& j, const SweepPlan& p) {
  j = {{"etas", p.etas},
       {"coupling", p.coupling},
       {"grid", p.grid},
       {"co_refined", p.co_refined},
       {"mollifier_cells", p.mollifier_cells},
       {"solver", p.solver},
       {"weights", p.weights},
       {"window", p.window},
       {"uniqueness_theta", p.uniqueness_theta},
       {"kpz", p.kpz},
       {"trend_slack", p.trend_slack},
       {"workers", p.workers}};
}
inline void from_json(const Json& j, SweepPlan& p) {
  p.etas = j.at("etas").get<std::vector<double>>();
  p.coupling = j.at("coupling").get<CouplingRule>();
  p.grid = j.at("grid").get<GridSpec>();
  p.co_refined = j.at("co_refined").get<bool>();
  p.mollifier_cells = j.at("mollifier_cells").get<double>();
  p.solver = j.at("solver").get<FixedPointOptions>();
  p.weights = j.at("weights").get<WeightConvention>();
  p.window = j.at("window").get<Window>();
  p.uniqueness_theta = j.at("uniqueness_theta").get<double>();
  p.kpz = j.at("kpz").get<KpzExponents>();
  p.trend_slack = j.at("trend_slack").get<double>();
  p.workers = j.at("workers").get<std::size_t>();
}

inline void to_json(Json& j, const KpzRecord& r) {
  using detail::number;
  j = {{"lambda", number(r.lambda)},
       {"a_value", number(r.a_value)},
       {"a_target", number(r.a_target)},
       {"a_error", number(r.a_error)},
       {"mu", number(r.mu)},
       {"mu_raw", number(r.mu_raw)},
       {"eps_rescaled", number(r.eps_rescaled)},
       {"terminal_mass", number(r.terminal_mass)},
       {"rescaled_mass", number(r.rescaled_mass)},
       {"mass_proxy_three_halves", number(r.mass_proxy_three_halves)},
       {"mass_proxy_two_thirds", number(r.mass_proxy_two_thirds)},
       {"rate_proxy", number(r.rate_proxy)}};
}
inline void from_json(const Json& j, KpzRecord& r) {
  using detail::number;
  r.lambda = number(j.at("lambda"));
  r.a_value = number(j.at("a_value"));
  r.a_target = number(j.at("a_target"));
  r.a_error = number(j.at("a_error"));
  r.mu = number(j.at("mu"));
  r.mu_raw = number(j.at("mu_raw"));
  r.eps_rescaled = number(j.at("eps_rescaled"));
  r.terminal_mass = number(j.at("terminal_mass"));
  r.rescaled_mass = number(j.at("rescaled_mass"));
  r.mass_proxy_three_halves = number(j.at("mass_proxy_three_halves"));
  r.mass_proxy_two_thirds = number(j.at("mass_proxy_two_thirds"));
  r.rate_proxy = number(j.at("rate_proxy"));
}

/// Wall time is deliberately absent; it goes to the timing sidecar.
inline void to_json(Json& j, const PointRecord& r) {
  using detail::number;
  j = {{"eta", number(r.eta)},
       {"epsilon", number(r.epsilon)},
       {"n_x", r.n_x},
       {"n_t", r.n_t},
       {"status", r.status},
       {"message", r.message},
       {"iterations", r.iterations},
       {"update_norm", number(r.update_norm)},
       {"coupling_holds", r.coupling_holds},
       {"log_coupling", number(r.log_coupling)},
       {"max_mass_error", number(r.max_mass_error)},
       {"energy_scaled_residual", number(r.energy_scaled_residual)},
       {"rho_error_eta", number(r.rho_error_eta)},
       {"rho_error_limit", number(r.rho_error_limit)},
       {"functional", number(r.functional)},
       {"functional_gap", number(r.functional_gap)},
       {"u_error_local", number(r.u_error_local)},
       {"cross_rho_ubar", number(r.cross_rho_ubar)},
       {"cross_u_rhobar", number(r.cross_u_rhobar)},
       {"uniqueness", number(r.uniqueness)},
       {"kpz", r.kpz}};
}
inline void from_json(const Json& j, PointRecord& r) {
  using detail::number;
  r.eta = number(j.at("eta"));
  r.epsilon = number(j.at("epsilon"));
  r.n_x = j.at("n_x").get<std::size_t>();
  r.n_t = j.at("n_t").get<std::size_t>();
  r.status = j.at("status").get<std::string>();
  r.message = j.at("message").get<std::string>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.update_norm = number(j.at("update_norm"));
  r.coupling_holds = j.at("coupling_holds").get<bool>();
  r.log_coupling = number(j.at("log_coupling"));
  r.max_mass_error = number(j.at("max_mass_error"));
  r.energy_scaled_residual = number(j.at("energy_scaled_residual"));
  r.rho_error_eta = number(j.at("rho_error_eta"));
  r.rho_error_limit = number(j.at("rho_error_limit"));
  r.functional = number(j.at("functional"));
  r.functional_gap = number(j.at("functional_gap"));
  r.u_error_local = number(j.at("u_error_local"));
  r.cross_rho_ubar = number(j.at("cross_rho_ubar"));
  r.cross_u_rhobar = number(j.at("cross_u_rhobar"));
  r.uniqueness = number(j.at("uniqueness"));
  r.kpz = j.at("kpz").get<KpzRecord>();
}

inline void to_json(Json& j, const TrendVerdict& v) {
  Json values = Json::array();
  for (double x : v.values) values.push_back(detail::number(x));
  j = {{"metric", v.metric}, {"status", to_string(v.status)}, {"values", values}};
}
inline void from_json(const Json& j, TrendVerdict& v) {
  v.metric = j.at("metric").get<std::string>();
  const auto s = j.at("status").get<std::string>();
  v.status = s == "pass" ? TrendStatus::pass : s == "fail" ? TrendStatus::fail : TrendStatus::insufficient;
  v.values.clear();
  for (const auto& x : j.at("values")) v.values.push_back(detail::number(x));
}

inline void to_json(Json& j, const ExperimentReport& r) {
  j = {{"plan", r.plan},
       {"rate_bar", r.rate_bar},
       {"k_end", r.k_end},
       {"weights", r.plan.weights.name()},
       {"points", r.points},
       {"verdicts", r.verdicts},
       {"all_pass", r.all_pass()}};
}
inline void from_json(const Json& j, ExperimentReport& r) {
  r.plan = j.at("plan").get<SweepPlan>();
  r.rate_bar = j.at("rate_bar").get<double>();
  r.k_end = j.at("k_end").get<double>();
  r.points = j.at("points").get<std::vector<PointRecord>>();
  r.verdicts = j.at("verdicts").get<std::vector<TrendVerdict>>();
}

/// Creates the directory when missing; throws when it cannot be used.
inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p)) throw NumericalFailure("cannot create output directory " + dir);
  return p;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw NumericalFailure("cannot write " + path.string());
  return out;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw NumericalFailure("write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw NumericalFailure("write failed: " + path.string());
}

inline std::string points_csv(const std::vector<PointRecord>& points) {
  using detail::fmt17;
  std::string s =
      "eta,epsilon,n_x,n_t,status,iterations,update_norm,rho_error_eta,rho_error_limit,functional,functional_gap,"
      "u_error_local,cross_rho_ubar,cross_u_rhobar,uniqueness,a_value,a_error,mu,mu_raw,"
      "mass_proxy_three_halves,mass_proxy_two_thirds,rate_proxy\n";
  for (const auto& r : points) {
    s += fmt17(r.eta) + ',' + fmt17(r.epsilon) + ',' + std::to_string(r.n_x) + ',' + std::to_string(r.n_t) + ',' +
         r.status + ',' + std::to_string(r.iterations) + ',' + fmt17(r.update_norm) + ',' + fmt17(r.rho_error_eta) +
         ',' + fmt17(r.rho_error_limit) + ',' + fmt17(r.functional) + ',' + fmt17(r.functional_gap) + ',' +
         fmt17(r.u_error_local) + ',' + fmt17(r.cross_rho_ubar) + ',' + fmt17(r.cross_u_rhobar) + ',' +
         fmt17(r.uniqueness) + ',' + fmt17(r.kpz.a_value) + ',' + fmt17(r.kpz.a_error) + ',' + fmt17(r.kpz.mu) +
         ',' + fmt17(r.kpz.mu_raw) + ',' + fmt17(r.kpz.mass_proxy_three_halves) + ',' +
         fmt17(r.kpz.mass_proxy_two_thirds) + ',' + fmt17(r.kpz.rate_proxy) + '\n';
  }
  return s;
}

inline std::string profile_csv(const ProfileSolution& p) {
  using detail::fmt17;
  std::string s = "t,k,r,l,a,j\n";
  for (const auto& q : p.samples) {
    s += fmt17(q.t) + ',' + fmt17(q.k) + ',' + fmt17(q.r) + ',' + fmt17(q.l) + ',' + fmt17(q.a) + ',' + fmt17(q.j) +
         '\n';
  }
  return s;
}

/// Long-format snapshot table (t, x, rho, u) every `stride` slices, always
/// including the final slice.
inline std::string fields_csv(const ScalarField& rho, const ScalarField& u, const SpaceTimeGrid& g,
                              std::size_t stride) {
  using detail::fmt17;
  detail::require(stride >= 1, "snapshot stride must be positive");
  std::string s = "t,x,rho,u\n";
  for (std::size_t n = 0; n <= g.n_t; ++n) {
    if (n % stride != 0 && n != g.n_t) continue;
    for (std::size_t i = 0; i < g.n_x; ++i) {
      s += fmt17(g.t(n)) + ',' + fmt17(g.x(i)) + ',' + fmt17(rho(n, i)) + ',' + fmt17(u(n, i)) + '\n';
    }
  }
  return s;
}

}  // namespace mfgplan
