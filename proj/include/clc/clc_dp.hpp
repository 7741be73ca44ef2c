#pragma once

// Backward dynamic programming for the proxy cost
//
//   J_c = sum_t [ q_t X_t^2 + r_t U_t^2 + beta_{t+1} (X_{t+1} - xhat_{t+1})^2 ] + q_T X_T^2
//
// over the model dynamics, on uniform state/control grids, for every
// candidate trajectory xhat_{1:T} drawn from the candidate grid.
//
// Conventions shared by every pass in this file:
//  * V_T(x) = q_T x^2 is evaluated exactly; V_{t+1} for t+1 < T is
//    interpolated from its node values with grids.interpolation (quadratic
//    by default, linear on request), clamped outside the axis.
//  * A control is admissible at a node only if its successor stays inside
//    [x.min, x.max]. If no control is admissible, every control is scanned.
//  * The stage objective is evaluated as (r u^2 + V_{t+1}(x')) + beta (x' - xhat)^2;
//    the minimizer is the smallest control index attaining the minimum.
//  * The stage-t control depends on xhat_{t+1..T} only, so tables are stored
//    per suffix: candidate c uses suffix code c mod n_xhat^(T-t).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "clc/errors.hpp"
#include "clc/grid.hpp"
#include "clc/model.hpp"

namespace clc {

/// Everything the proxy-cost DP needs: model, cost, penalties, grids.
struct ProxyProblem {
  Dynamics model;
  CostSchedule cost;
  BetaVector beta;
  GridSpec grids;

  int horizon() const { return cost.horizon(); }

  void validate() const {
    if (model.b == 0.0) throw InvalidInput("proxy problem: b_model must be nonzero");
    cost.validate();
    beta.validate(cost.horizon());
    grids.validate();
  }
};

inline constexpr double kDefaultCandidateBudget = 1e6;

struct BuildOptions {
  double candidate_budget = kDefaultCandidateBudget;
  unsigned threads = 0;  // 0: hardware concurrency
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Receives (stage t, suffix code, control indices per x node, V_t per x node).
using StageSink = std::function<void(int, std::size_t, std::span<const std::uint32_t>,
                                     std::span<const double>)>;

class BackwardPass {
 public:
  /// xhat_values[t] lists the values xhat_{t+1} may take.
  BackwardPass(const ProxyProblem& p, const std::vector<std::vector<double>>& xhat_values)
      : p_(p), xhat_(xhat_values), T_(p.horizon()) {
    nx_ = static_cast<std::size_t>(p.grids.x.n);
    nu_ = static_cast<std::size_t>(p.grids.u.n);
    xs_.resize(nx_);
    us_.resize(nu_);
    for (std::size_t i = 0; i < nx_; ++i) xs_[i] = p.grids.x.point(static_cast<int>(i));
    for (std::size_t k = 0; k < nu_; ++k) us_[k] = p.grids.u.point(static_cast<int>(k));
    // suffix_count_[t] = number of distinct xhat_{t+1..T}.
    suffix_count_.assign(static_cast<std::size_t>(T_) + 1, 1);
    for (int t = T_ - 1; t >= 0; --t)
      suffix_count_[t] = suffix_count_[t + 1] * xhat_[t].size();
  }

  std::size_t suffix_count(int t) const { return suffix_count_[t]; }

  /// Runs the whole pass. Subtrees rooted at distinct xhat_T values are
  /// independent and are spread over `threads` workers.
  void run(const StageSink& sink, unsigned threads) const {
    const std::size_t top = xhat_[T_ - 1].size();
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, top));
    if (threads <= 1) {
      Workspace ws(T_, nx_, nu_);
      for (std::size_t j = 0; j < top; ++j) descend_top(j, ws, sink);
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([this, w, threads, top, &sink] {
        Workspace ws(T_, nx_, nu_);
        for (std::size_t j = w; j < top; j += threads) descend_top(j, ws, sink);
      });
    }
    for (auto& th : pool) th.join();
  }

 private:
  struct Workspace {
    Workspace(int T, std::size_t nx, std::size_t nu)
        : base(static_cast<std::size_t>(T), std::vector<double>(nx * nu)),
          succ(static_cast<std::size_t>(T), std::vector<double>(nx * nu)),
          values(static_cast<std::size_t>(T), std::vector<double>(nx)),
          controls(static_cast<std::size_t>(T), std::vector<std::uint32_t>(nx)) {}
    std::vector<std::vector<double>> base, succ, values;
    std::vector<std::vector<std::uint32_t>> controls;
  };

  void descend_top(std::size_t j, Workspace& ws, const StageSink& sink) const {
    const int t = T_ - 1;
    prepare_base(t, {}, ws);
    finish_stage(t, j, 0, ws, sink);
  }

  // base = r u^2 + V_{t+1}(x'), or +inf for inadmissible successors.
  void prepare_base(int t, std::span<const double> v_next, Workspace& ws) const {
    const double r = p_.cost.r[t];
    const double qT = p_.cost.q[T_];
    const bool terminal = (t == T_ - 1);
    const GridAxis& gx = p_.grids.x;
    const Interpolation rule = p_.grids.interpolation;
    auto& base = ws.base[t];
    auto& succ = ws.succ[t];
    for (std::size_t i = 0; i < nx_; ++i) {
      bool any = false;
      for (std::size_t k = 0; k < nu_; ++k) {
        const double xp = p_.model.step(xs_[i], us_[k]);
        succ[i * nu_ + k] = xp;
        if (!gx.contains(xp)) {
          base[i * nu_ + k] = kInf;
          continue;
        }
        any = true;
        const double v = terminal ? qT * xp * xp : gx.interpolate(v_next, xp, rule);
        base[i * nu_ + k] = r * us_[k] * us_[k] + v;
      }
      if (!any) {
        for (std::size_t k = 0; k < nu_; ++k) {
          const double xp = succ[i * nu_ + k];
          const double v = terminal ? qT * xp * xp : gx.interpolate(v_next, xp, rule);
          base[i * nu_ + k] = r * us_[k] * us_[k] + v;
        }
      }
    }
  }

  void finish_stage(int t, std::size_t j, std::size_t suffix_next, Workspace& ws,
                    const StageSink& sink) const {
    const double xh = xhat_[t][j];
    const double beta = p_.beta.values[t];
    const double q = p_.cost.q[t];
    const auto& base = ws.base[t];
    const auto& succ = ws.succ[t];
    auto& values = ws.values[t];
    auto& controls = ws.controls[t];
    for (std::size_t i = 0; i < nx_; ++i) {
      double best = kInf;
      std::uint32_t arg = 0;
      bool found = false;
      for (std::size_t k = 0; k < nu_; ++k) {
        const double b = base[i * nu_ + k];
        if (b == kInf) continue;
        const double gap = succ[i * nu_ + k] - xh;
        const double obj = b + beta * gap * gap;
        if (!found || obj < best) {
          best = obj;
          arg = static_cast<std::uint32_t>(k);
          found = true;
        }
      }
      controls[i] = arg;
      values[i] = q * xs_[i] * xs_[i] + best;
    }
    const std::size_t code = j * suffix_count_[t + 1] + suffix_next;
    sink(t, code, controls, values);
    if (t == 0) return;
    prepare_base(t - 1, values, ws);
    for (std::size_t jj = 0; jj < xhat_[t - 1].size(); ++jj)
      finish_stage(t - 1, jj, code, ws, sink);
  }

  const ProxyProblem& p_;
  const std::vector<std::vector<double>>& xhat_;
  int T_;
  std::size_t nx_ = 0, nu_ = 0;
  std::vector<double> xs_, us_;
  std::vector<std::size_t> suffix_count_;
};

}  // namespace detail

/// Lookup table U_t(X_t; xhat_{1:T}) over the full candidate grid.
class PolicyTable {
 public:
  PolicyTable(ProxyProblem problem, std::vector<std::vector<std::uint32_t>> stage_controls)
      : problem_(std::move(problem)), stage_controls_(std::move(stage_controls)) {}

  const ProxyProblem& problem() const { return problem_; }
  const GridSpec& grids() const { return problem_.grids; }
  const BetaVector& beta() const { return problem_.beta; }
  int horizon() const { return problem_.horizon(); }

  std::size_t candidate_count() const {
    std::size_t n = 1;
    for (int t = 0; t < horizon(); ++t) n *= static_cast<std::size_t>(grids().xhat.n);
    return n;
  }

  /// Candidate points from a row-major index (xhat_1 most significant).
  CandidateTrajectory candidate(std::size_t index) const {
    const int T = horizon();
    const auto n = static_cast<std::size_t>(grids().xhat.n);
    CandidateTrajectory c;
    c.points.assign(static_cast<std::size_t>(T), 0.0);
    for (int t = T - 1; t >= 0; --t) {
      c.points[t] = grids().xhat.point(static_cast<int>(index % n));
      index /= n;
    }
    return c;
  }

  std::size_t candidate_index(const CandidateTrajectory& c) const {
    if (c.size() != horizon()) throw InvalidInput("candidate: wrong length");
    std::size_t index = 0;
    for (double v : c.points) {
      const int i = grids().xhat.exact_index(v);
      if (i < 0)
        throw InvalidInput("candidate: value " + std::to_string(v) +
                           " is not a point of the xhat grid");
      index = index * static_cast<std::size_t>(grids().xhat.n) + static_cast<std::size_t>(i);
    }
    return index;
  }

  std::uint32_t control_index(int t, int ix, std::size_t candidate) const {
    const std::size_t suffix = candidate % suffix_count(t);
    return stage_controls_[t][suffix * static_cast<std::size_t>(grids().x.n) +
                              static_cast<std::size_t>(ix)];
  }

  double control(int t, int ix, std::size_t candidate) const {
    return grids().u.point(static_cast<int>(control_index(t, ix, candidate)));
  }

  std::size_t suffix_count(int t) const {
    std::size_t n = 1;
    for (int k = t; k < horizon(); ++k) n *= static_cast<std::size_t>(grids().xhat.n);
    return n;
  }

  const std::vector<std::vector<std::uint32_t>>& stage_controls() const {
    return stage_controls_;
  }

 private:
  ProxyProblem problem_;
  std::vector<std::vector<std::uint32_t>> stage_controls_;  // [t][suffix * n_x + ix]
};

inline double candidate_space_size(const GridSpec& grids, int horizon) {
  return std::pow(static_cast<double>(grids.xhat.n), horizon);
}

inline PolicyTable build_policy_table(const ProxyProblem& problem,
                                      const BuildOptions& options = {}) {
  problem.validate();
  const int T = problem.horizon();
  const double size = candidate_space_size(problem.grids, T);
  if (size > options.candidate_budget)
    throw CapacityError("build_policy_table: candidate space n_xhat^T = " +
                            std::to_string(size) + " exceeds budget " +
                            std::to_string(options.candidate_budget),
                        size);
  std::vector<double> axis(static_cast<std::size_t>(problem.grids.xhat.n));
  for (int i = 0; i < problem.grids.xhat.n; ++i) axis[i] = problem.grids.xhat.point(i);
  const std::vector<std::vector<double>> values(static_cast<std::size_t>(T), axis);

  detail::BackwardPass pass(problem, values);
  const auto nx = static_cast<std::size_t>(problem.grids.x.n);
  std::vector<std::vector<std::uint32_t>> stage(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) stage[t].assign(pass.suffix_count(t) * nx, 0);
  pass.run(
      [&stage, nx](int t, std::size_t code, std::span<const std::uint32_t> controls,
                   std::span<const double>) {
        std::copy(controls.begin(), controls.end(), stage[t].begin() + code * nx);
      },
      options.threads);
  return PolicyTable(problem, std::move(stage));
}

/// Nearest-node lookup of the stored control.
inline double query_policy(const PolicyTable& table, int t, double x, std::size_t candidate) {
  if (t < 0 || t >= table.horizon()) throw InvalidInput("query_policy: stage out of range");
  if (candidate >= table.candidate_count())
    throw InvalidInput("query_policy: candidate index out of range");
  const int ix = table.grids().x.nearest_checked(x, "query_policy");
  return table.control(t, ix, candidate);
}

inline double query_policy(const PolicyTable& table, int t, double x,
                           const CandidateTrajectory& candidate) {
  return query_policy(table, t, x, table.candidate_index(candidate));
}

/// Policy and node values for one candidate, which need not lie on the
/// candidate grid. Used by off-grid refinement of the coupled equations.
struct CandidatePolicy {
  GridAxis x_axis;
  GridAxis u_axis;
  std::vector<std::vector<std::uint32_t>> controls;  // [t][ix]
  std::vector<std::vector<double>> values;           // [t][ix], V_t at nodes

  double query(int t, double x) const {
    const int ix = x_axis.nearest_checked(x, "candidate policy");
    return u_axis.point(static_cast<int>(controls[t][ix]));
  }
};

inline CandidatePolicy solve_candidate(const ProxyProblem& problem,
                                       const CandidateTrajectory& xhat) {
  problem.validate();
  const int T = problem.horizon();
  if (xhat.size() != T) throw InvalidInput("solve_candidate: candidate length mismatch");
  std::vector<std::vector<double>> values(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) values[t] = {xhat.points[t]};
  CandidatePolicy pol{problem.grids.x, problem.grids.u,
                      std::vector<std::vector<std::uint32_t>>(static_cast<std::size_t>(T)),
                      std::vector<std::vector<double>>(static_cast<std::size_t>(T))};
  detail::BackwardPass pass(problem, values);
  pass.run(
      [&pol](int t, std::size_t, std::span<const std::uint32_t> c, std::span<const double> v) {
        pol.controls[t].assign(c.begin(), c.end());
        pol.values[t].assign(v.begin(), v.end());
      },
      1);
  return pol;
}

// Binary layout (native little-endian):
//   char[8]  "CLCPTBL1"
//   u32      T
//   f64      a_model, b_model
//   f64[T+1] q;  f64[T] r;  f64[T] beta
//   for axis in (x, u, xhat): f64 min, f64 max, u32 n
//   u32      interpolation (0 linear, 1 quadratic)
//   u64      candidate count N = n_xhat^T
//   f64[T * n_x * N] controls, index (t * n_x + ix) * N + candidate
namespace detail {
inline constexpr char kTableMagic[8] = {'C', 'L', 'C', 'P', 'T', 'B', 'L', '1'};

template <class V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <class V>
V get(std::istream& is) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V)))
    throw InvalidInput("policy table: truncated input");
  return v;
}
}  // namespace detail

inline void write_policy_table(std::ostream& os, const PolicyTable& table) {
  static_assert(std::endian::native == std::endian::little);
  using detail::put;
  const auto& p = table.problem();
  const int T = table.horizon();
  os.write(detail::kTableMagic, sizeof(detail::kTableMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(T));
  put(os, p.model.a);
  put(os, p.model.b);
  for (double v : p.cost.q) put(os, v);
  for (double v : p.cost.r) put(os, v);
  for (double v : p.beta.values) put(os, v);
  for (const GridAxis* ax : {&p.grids.x, &p.grids.u, &p.grids.xhat}) {
    put(os, ax->min);
    put(os, ax->max);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ax->n));
  }
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.grids.interpolation));
  const std::size_t N = table.candidate_count();
  put<std::uint64_t>(os, N);
  for (int t = 0; t < T; ++t)
    for (int ix = 0; ix < p.grids.x.n; ++ix)
      for (std::size_t c = 0; c < N; ++c) put(os, table.control(t, ix, c));
}

inline PolicyTable read_policy_table(std::istream& is) {
  using detail::get;
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, detail::kTableMagic, 8) != 0)
    throw InvalidInput("policy table: bad magic");
  const auto T = static_cast<int>(get<std::uint32_t>(is));
  if (T < 1 || T > 64) throw InvalidInput("policy table: implausible horizon");
  ProxyProblem p;
  p.model.a = get<double>(is);
  p.model.b = get<double>(is);
  p.cost.q.resize(static_cast<std::size_t>(T) + 1);
  p.cost.r.resize(static_cast<std::size_t>(T));
  p.beta.values.resize(static_cast<std::size_t>(T));
  for (double& v : p.cost.q) v = get<double>(is);
  for (double& v : p.cost.r) v = get<double>(is);
  for (double& v : p.beta.values) v = get<double>(is);
  for (GridAxis* ax : {&p.grids.x, &p.grids.u, &p.grids.xhat}) {
    ax->min = get<double>(is);
    ax->max = get<double>(is);
    ax->n = static_cast<int>(get<std::uint32_t>(is));
  }
  const auto rule = get<std::uint32_t>(is);
  if (rule > 1) throw InvalidInput("policy table: unknown interpolation rule");
  p.grids.interpolation = static_cast<Interpolation>(rule);
  p.validate();
  const auto N = get<std::uint64_t>(is);
  if (static_cast<double>(N) != candidate_space_size(p.grids, T))
    throw InvalidInput("policy table: candidate count does not match grid");
  const auto nx = static_cast<std::size_t>(p.grids.x.n);
  std::vector<std::vector<std::uint32_t>> stage(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    std::size_t suffixes = 1;
    for (int k = t; k < T; ++k) suffixes *= static_cast<std::size_t>(p.grids.xhat.n);
    stage[t].assign(suffixes * nx, 0);
    std::vector<bool> seen(suffixes * nx, false);
    for (std::size_t ix = 0; ix < nx; ++ix) {
      for (std::size_t c = 0; c < N; ++c) {
        const double u = get<double>(is);
        const int k = p.grids.u.exact_index(u);
        if (k < 0) throw InvalidInput("policy table: stored control is not a grid point");
        const std::size_t slot = (c % suffixes) * nx + ix;
        if (seen[slot] && stage[t][slot] != static_cast<std::uint32_t>(k))
          throw InvalidInput("policy table: stage control depends on earlier candidate stages");
        stage[t][slot] = static_cast<std::uint32_t>(k);
        seen[slot] = true;
      }
    }
  }
  return PolicyTable(std::move(p), std::move(stage));
}

}  // namespace clc
