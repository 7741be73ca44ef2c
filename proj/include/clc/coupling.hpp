#pragma once

// Enforcing the real dynamics: find the candidate xhat_{1:T} whose policy,
// run on the real system, reproduces xhat itself,
//
//   xhat_{t+1} = A_true X_t + B_true U_t(X_t; xhat_{1:T}),
//
// using only episodes from the RealSystemOracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clc/clc_dp.hpp"
#include "clc/closed_form.hpp"
#include "clc/errors.hpp"
#include "clc/grid.hpp"
#include "clc/model.hpp"

namespace clc {

struct CouplingSolution {
  CandidateTrajectory candidate;
  std::optional<std::size_t> candidate_index;  // set when the candidate is a grid point
  double residual = std::numeric_limits<double>::infinity();
  double proxy_cost = std::numeric_limits<double>::infinity();
  std::vector<double> controls;
  Trajectory model_traj;
  Trajectory real_traj;
  std::uint64_t episodes_used = 0;
  std::uint64_t candidates_evaluated = 0;
};

struct CouplingOptions {
  /// Accept a solution when residual <= threshold_factor * xhat spacing.
  double threshold_factor = 2.0;
  /// Off-grid coordinate refinement after the exhaustive grid search.
  bool refine = true;
  int refine_sweeps = 3;
  int bisection_steps = 64;
  int bracket_doublings = 24;
  /// Optional per-candidate CSV trace: index, xhat_1..xhat_T, residual, J_c, J_r.
  std::ostream* trace = nullptr;
};

namespace detail {

struct CandidateEval {
  bool feasible = false;
  double residual = std::numeric_limits<double>::infinity();
  double proxy_cost = std::numeric_limits<double>::infinity();
  Trajectory model_traj;
  Trajectory real_traj;
};

/// (i) model rollout under the candidate's policy, (ii) the same controls on
/// the real system, (iii) max-norm mismatch against the candidate.
template <class PolicyFn>
CandidateEval evaluate_candidate(const ProxyProblem& problem, PolicyFn&& policy,
                                 RealSystemOracle& oracle, double x0,
                                 const CandidateTrajectory& xhat) {
  CandidateEval ev;
  const int T = problem.horizon();
  Trajectory model;
  model.states.reserve(static_cast<std::size_t>(T) + 1);
  model.controls.reserve(static_cast<std::size_t>(T));
  model.states.push_back(x0);
  try {
    for (int t = 0; t < T; ++t) {
      const double u = policy(t, model.states.back());
      model.controls.push_back(u);
      model.states.push_back(problem.model.step(model.states.back(), u));
    }
  } catch (const OutOfRange&) {
    return ev;  // the model left the state grid; no episode is spent
  }
  ev.feasible = true;
  ev.real_traj = oracle.rollout(x0, model.controls);
  double res = 0.0;
  for (int t = 0; t < T; ++t)
    res = std::max(res, std::abs(xhat.points[t] - ev.real_traj.states[t + 1]));
  ev.residual = res;
  ev.proxy_cost = eval_jc(problem.cost, problem.beta, xhat, model);
  ev.model_traj = std::move(model);
  return ev;
}

inline void write_trace_row(std::ostream* os, long long index, const CandidateTrajectory& xhat,
                            const CandidateEval& ev, const CostSchedule& cost) {
  if (os == nullptr) return;
  char buf[64];
  *os << index;
  for (double v : xhat.points) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    *os << buf;
  }
  const double jr = ev.feasible ? eval_jr(cost, ev.real_traj)
                                : std::numeric_limits<double>::infinity();
  std::snprintf(buf, sizeof buf, ",%.17g", ev.residual);
  *os << buf;
  std::snprintf(buf, sizeof buf, ",%.17g", ev.proxy_cost);
  *os << buf;
  std::snprintf(buf, sizeof buf, ",%.17g\n", jr);
  *os << buf;
}

inline void write_trace_header(std::ostream* os, int T) {
  if (os == nullptr) return;
  *os << "candidate";
  for (int t = 1; t <= T; ++t) *os << ",xhat_" << t;
  *os << ",residual,J_c,J_r\n";
}

inline bool better(const CandidateEval& a, std::size_t ia, const CandidateEval& b,
                   std::size_t ib) {
  if (a.residual != b.residual) return a.residual < b.residual;
  if (a.proxy_cost != b.proxy_cost) return a.proxy_cost < b.proxy_cost;
  return ia < ib;
}

inline void adopt(CouplingSolution& sol, const CandidateTrajectory& xhat,
                  std::optional<std::size_t> index, CandidateEval&& ev) {
  sol.candidate = xhat;
  sol.candidate_index = index;
  sol.residual = ev.residual;
  sol.proxy_cost = ev.proxy_cost;
  sol.controls = ev.model_traj.controls;
  sol.model_traj = std::move(ev.model_traj);
  sol.real_traj = std::move(ev.real_traj);
}

/// Off-grid refinement, Gauss-Seidel style: for each coordinate t, bracket a
/// sign change of xhat_t - Xreal_t (other coordinates held) and bisect, then
/// move that coordinate to the bracket end with the smaller gap. The
/// reported solution is the best candidate seen, so the residual never grows.
inline void refine_off_grid(const ProxyProblem& problem, RealSystemOracle& oracle, double x0,
                            const CouplingOptions& opt, CouplingSolution& sol) {
  const int T = problem.horizon();
  auto eval_at = [&](const CandidateTrajectory& xh) {
    const CandidatePolicy pol = solve_candidate(problem, xh);
    ++sol.candidates_evaluated;
    CandidateEval ev = evaluate_candidate(
        problem, [&pol](int t, double x) { return pol.query(t, x); }, oracle, x0, xh);
    write_trace_row(opt.trace, -1, xh, ev, problem.cost);
    if (ev.feasible && ev.residual < sol.residual)
      adopt(sol, xh, std::nullopt, CandidateEval(ev));
    return ev;
  };
  auto gap_of = [](const CandidateTrajectory& xh, const CandidateEval& ev, int t) {
    return xh.points[t] - ev.real_traj.states[t + 1];
  };

  CandidateTrajectory z = sol.candidate;
  CandidateEval z_ev;
  z_ev.feasible = true;
  z_ev.real_traj = sol.real_traj;
  for (int sweep = 0; sweep < opt.refine_sweeps && sol.residual > 0.0; ++sweep) {
    const double before = sol.residual;
    for (int t = 0; t < T && sol.residual > 0.0; ++t) {
      const double g0 = gap_of(z, z_ev, t);
      if (g0 == 0.0) continue;
      const bool pos0 = g0 > 0.0;
      double lo = z.points[t], g_lo = g0;
      CandidateEval ev_lo = z_ev;
      double hi = lo, g_hi = g0;
      CandidateEval ev_hi;
      bool bracketed = false;
      double step = -g0;  // first probe is the fixed-point step xhat_t <- Xreal_t
      for (int k = 0; k <= opt.bracket_doublings; ++k, step *= 2.0) {
        CandidateTrajectory probe = z;
        probe.points[t] = z.points[t] + step;
        CandidateEval ev = eval_at(probe);
        if (!ev.feasible) break;
        const double g = gap_of(probe, ev, t);
        if (g == 0.0 || (g > 0.0) != pos0) {
          hi = probe.points[t];
          g_hi = g;
          ev_hi = std::move(ev);
          bracketed = true;
          break;
        }
        lo = probe.points[t];
        g_lo = g;
        ev_lo = std::move(ev);
      }
      if (!bracketed) continue;
      for (int i = 0; i < opt.bisection_steps && g_hi != 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        CandidateTrajectory probe = z;
        probe.points[t] = mid;
        CandidateEval ev = eval_at(probe);
        if (!ev.feasible) break;
        const double g = gap_of(probe, ev, t);
        if (g != 0.0 && (g > 0.0) == pos0) {
          lo = mid;
          g_lo = g;
          ev_lo = std::move(ev);
        } else {
          hi = mid;
          g_hi = g;
          ev_hi = std::move(ev);
        }
      }
      if (std::abs(g_hi) <= std::abs(g_lo)) {
        z.points[t] = hi;
        z_ev = std::move(ev_hi);
      } else {
        z.points[t] = lo;
        z_ev = std::move(ev_lo);
      }
    }
    if (!(sol.residual < before) && sweep > 0) break;
  }
}

inline void check_threshold(const GridSpec& grids, const CouplingOptions& opt,
                            const CouplingSolution& sol) {
  const double threshold = opt.threshold_factor * grids.xhat.spacing();
  if (!(sol.residual <= threshold))
    throw NoFixedPoint("solve_coupled: best residual " + std::to_string(sol.residual) +
                           " exceeds threshold " + std::to_string(threshold),
                       sol.residual);
}

}  // namespace detail

/// Exhaustive direct search over the candidate grid (one episode per
/// feasible candidate), then optional off-grid refinement. Selection order
/// is (residual, J_c, candidate index).
inline CouplingSolution solve_coupled(const PolicyTable& table, RealSystemOracle& oracle,
                                      double x0, const CouplingOptions& opt = {}) {
  const ProxyProblem& problem = table.problem();
  const std::uint64_t start = oracle.episodes();
  CouplingSolution sol;
  detail::CandidateEval best;
  std::size_t best_index = 0;
  bool have = false;
  detail::write_trace_header(opt.trace, problem.horizon());
  const std::size_t N = table.candidate_count();
  for (std::size_t c = 0; c < N; ++c) {
    const CandidateTrajectory xhat = table.candidate(c);
    detail::CandidateEval ev = detail::evaluate_candidate(
        problem, [&table, c](int t, double x) { return query_policy(table, t, x, c); },
        oracle, x0, xhat);
    ++sol.candidates_evaluated;
    detail::write_trace_row(opt.trace, static_cast<long long>(c), xhat, ev, problem.cost);
    if (!ev.feasible) continue;
    if (!have || detail::better(ev, c, best, best_index)) {
      best = std::move(ev);
      best_index = c;
      have = true;
    }
  }
  if (!have)
    throw NoFixedPoint("solve_coupled: every candidate drove the model off the state grid",
                       std::numeric_limits<double>::infinity());
  detail::adopt(sol, table.candidate(best_index), best_index, std::move(best));
  if (opt.refine && sol.residual > 0.0) detail::refine_off_grid(problem, oracle, x0, opt, sol);
  sol.episodes_used = oracle.episodes() - start;
  detail::check_threshold(problem.grids, opt, sol);
  return sol;
}

/// Re-runs the reported candidate (one more episode) and returns its residual.
inline double reevaluate_residual(const PolicyTable& table, RealSystemOracle& oracle, double x0,
                                  const CouplingSolution& sol) {
  const ProxyProblem& problem = table.problem();
  detail::CandidateEval ev;
  if (sol.candidate_index) {
    const std::size_t c = *sol.candidate_index;
    ev = detail::evaluate_candidate(
        problem, [&table, c](int t, double x) { return query_policy(table, t, x, c); },
        oracle, x0, sol.candidate);
  } else {
    const CandidatePolicy pol = solve_candidate(problem, sol.candidate);
    ev = detail::evaluate_candidate(
        problem, [&pol](int t, double x) { return pol.query(t, x); }, oracle, x0,
        sol.candidate);
  }
  return ev.residual;
}

struct AffineCouplingOptions {
  double probe_step = 1.0;
  int newton_steps = 3;
  double tolerance = 1e-9;
};

/// Coupled equations for the grid-free policy. The map xhat -> real states
/// is affine, so T+1 probe episodes identify it; chord-Newton steps (one
/// episode each) then solve it. Nothing about (a_true, b_true) is read.
inline CouplingSolution solve_coupled_closed_form(Dynamics model, const CostSchedule& cost,
                                                  const BetaVector& beta,
                                                  RealSystemOracle& oracle, double x0,
                                                  const AffineCouplingOptions& opt = {}) {
  const int T = cost.horizon();
  const auto n = static_cast<std::size_t>(T);
  const std::uint64_t start = oracle.episodes();
  ProxyProblem problem{model, cost, beta, GridSpec{}};
  CouplingSolution sol;

  auto eval_at = [&](const CandidateTrajectory& xh) {
    const AffinePolicy pol = solve_affine_policy(model, cost, beta, xh);
    ++sol.candidates_evaluated;
    return detail::evaluate_candidate(
        problem, [&pol](int t, double x) { return pol.control(t, x); }, oracle, x0, xh);
  };
  auto gap = [n](const CandidateTrajectory& xh, const detail::CandidateEval& ev) {
    std::vector<double> g(n);
    for (std::size_t t = 0; t < n; ++t) g[t] = xh.points[t] - ev.real_traj.states[t + 1];
    return g;
  };

  CandidateTrajectory xh{std::vector<double>(n, 0.0)};
  detail::CandidateEval ev0 = eval_at(xh);
  const std::vector<double> g0 = gap(xh, ev0);
  std::vector<double> jac(n * n);  // row-major d gap_i / d xhat_j
  for (std::size_t j = 0; j < n; ++j) {
    CandidateTrajectory probe = xh;
    probe.points[j] += opt.probe_step;
    const auto gj = gap(probe, eval_at(probe));
    for (std::size_t i = 0; i < n; ++i) jac[i * n + j] = (gj[i] - g0[i]) / opt.probe_step;
  }
  // LU with partial pivoting, reused across chord steps.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(jac[i * n + k]) > std::abs(jac[piv * n + k])) piv = i;
    if (jac[piv * n + k] == 0.0)
      throw NoFixedPoint("solve_coupled_closed_form: singular coupling Jacobian",
                         std::numeric_limits<double>::infinity());
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(jac[k * n + j], jac[piv * n + j]);
      std::swap(perm[k], perm[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      jac[i * n + k] /= jac[k * n + k];
      for (std::size_t j = k + 1; j < n; ++j) jac[i * n + j] -= jac[i * n + k] * jac[k * n + j];
    }
  }
  auto lu_solve = [&](const std::vector<double>& rhs) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = rhs[perm[i]];
      for (std::size_t j = 0; j < i; ++j) s -= jac[i * n + j] * y[j];
      y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= jac[i * n + j] * y[j];
      y[i] = s / jac[i * n + i];
    }
    return y;
  };

  std::vector<double> g = g0;
  detail::CandidateEval ev = std::move(ev0);
  for (int it = 0; it < opt.newton_steps; ++it) {
    const auto step = lu_solve(g);
    for (std::size_t i = 0; i < n; ++i) xh.points[i] -= step[i];
    ev = eval_at(xh);
    g = gap(xh, ev);
    if (ev.residual <= opt.tolerance * (1.0 + std::abs(x0))) break;
  }
  detail::adopt(sol, xh, std::nullopt, std::move(ev));
  sol.episodes_used = oracle.episodes() - start;
  return sol;
}

enum class Evaluator { grid, closed_form };

inline const char* to_string(Evaluator e) {
  return e == Evaluator::grid ? "grid" : "closed_form";
}

/// Model side of a CLC run: everything except the real system.
struct ClcSetup {
  Dynamics model;
  CostSchedule cost;
  double x0 = 0.0;
  GridSpec grids;
  Evaluator evaluator = Evaluator::grid;
  BuildOptions build;
  CouplingOptions coupling;
  AffineCouplingOptions closed_form;
};

struct ClcResult {
  std::vector<double> controls;
  double jr = 0.0;
  std::uint64_t episodes = 0;
  Trajectory real_traj;
  CouplingSolution coupling;
};

/// DP -> coupled equations -> one final real rollout under the resolved controls.
inline ClcResult execute_clc(const BetaVector& beta, const ClcSetup& setup,
                             RealSystemOracle& oracle) {
  const std::uint64_t start = oracle.episodes();
  ClcResult out;
  if (setup.evaluator == Evaluator::grid) {
    const ProxyProblem problem{setup.model, setup.cost, beta, setup.grids};
    const PolicyTable table = build_policy_table(problem, setup.build);
    out.coupling = solve_coupled(table, oracle, setup.x0, setup.coupling);
  } else {
    setup.cost.validate();
    beta.validate(setup.cost.horizon());
    out.coupling = solve_coupled_closed_form(setup.model, setup.cost, beta, oracle, setup.x0,
                                             setup.closed_form);
  }
  out.controls = out.coupling.controls;
  out.real_traj = oracle.rollout(setup.x0, out.controls);
  out.jr = eval_jr(setup.cost, out.real_traj);
  out.episodes = oracle.episodes() - start;
  return out;
}

}  // namespace clc
