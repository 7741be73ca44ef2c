#pragma once

// Scalar LTI system and cost data, open/closed-loop rollouts, and the real
// (J_r) and proxy (J_c) cost functionals.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clc/errors.hpp"

namespace clc {

/// Scalar dynamics x' = a x + b u.
struct Dynamics {
  double a = 0.0;
  double b = 0.0;

  double step(double x, double u) const { return a * x + b * u; }
};

/// True and model dynamics sharing one initial state and horizon.
struct SystemInstance {
  double a_true = 0.0;
  double b_true = 0.0;
  double a_model = 0.0;
  double b_model = 0.0;
  double x0 = 0.0;
  int horizon = 1;

  Dynamics true_dynamics() const { return {a_true, b_true}; }
  Dynamics model_dynamics() const { return {a_model, b_model}; }

  void validate() const {
    if (b_true == 0.0 || b_model == 0.0)
      throw InvalidInput("system instance: b_true and b_model must be nonzero");
    if (horizon < 1) throw InvalidInput("system instance: horizon must be >= 1");
    if (!std::isfinite(a_true) || !std::isfinite(b_true) ||
        !std::isfinite(a_model) || !std::isfinite(b_model) ||
        !std::isfinite(x0))
      throw InvalidInput("system instance: non-finite parameter");
  }
};

/// Stage weights: q = (Q_0..Q_T), r = (R_0..R_{T-1}).
struct CostSchedule {
  std::vector<double> q;
  std::vector<double> r;

  int horizon() const { return static_cast<int>(r.size()); }
  double terminal() const { return q.back(); }

  void validate() const {
    if (r.empty()) throw InvalidInput("cost schedule: r must have T >= 1 entries");
    if (q.size() != r.size() + 1)
      throw InvalidInput("cost schedule: q must have exactly T+1 entries (got " +
                         std::to_string(q.size()) + " for T=" +
                         std::to_string(r.size()) + ")");
    for (double v : q)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InvalidInput("cost schedule: q entries must be finite and >= 0");
    for (double v : r)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InvalidInput("cost schedule: r entries must be finite and >= 0");
    if (!(q.back() > 0.0))
      throw InvalidInput("cost schedule: terminal weight Q_T must be > 0");
  }

  void validate(int horizon) const {
    validate();
    if (this->horizon() != horizon)
      throw InvalidInput("cost schedule: horizon " +
                         std::to_string(this->horizon()) +
                         " does not match system horizon " +
                         std::to_string(horizon));
  }
};

/// States X_0..X_T and controls U_0..U_{T-1}.
struct Trajectory {
  std::vector<double> states;
  std::vector<double> controls;

  int horizon() const { return static_cast<int>(controls.size()); }
};

/// Per-stage penalty weights (beta_1, ..., beta_T); values[t] is beta_{t+1}.
struct BetaVector {
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  void validate(int horizon) const {
    if (size() != horizon)
      throw InvalidInput("beta vector: expected " + std::to_string(horizon) +
                         " entries, got " + std::to_string(size()));
    for (double v : values)
      if (!std::isfinite(v)) throw InvalidInput("beta vector: non-finite entry");
  }
};

/// Hypothesized real trajectory (xhat_1, ..., xhat_T); points[t] is xhat_{t+1}.
struct CandidateTrajectory {
  std::vector<double> points;

  int size() const { return static_cast<int>(points.size()); }
};

inline Trajectory rollout(Dynamics d, double x0, std::span<const double> controls) {
  if (controls.empty()) throw InvalidInput("rollout: empty control sequence");
  Trajectory traj;
  traj.controls.assign(controls.begin(), controls.end());
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(x0);
  for (double u : controls) traj.states.push_back(d.step(traj.states.back(), u));
  return traj;
}

namespace detail {
inline void check_traj(const CostSchedule& cost, const Trajectory& traj,
                       const char* who) {
  const auto t = static_cast<std::size_t>(cost.horizon());
  if (traj.controls.size() != t || traj.states.size() != t + 1 ||
      cost.q.size() != t + 1)
    throw InvalidInput(std::string(who) + ": trajectory/cost length mismatch");
}
}  // namespace detail

/// Real cost sum_t (Q_t x_t^2 + R_t u_t^2) + Q_T x_T^2.
inline double eval_jr(const CostSchedule& cost, const Trajectory& traj) {
  detail::check_traj(cost, traj, "eval_jr");
  const std::size_t T = traj.controls.size();
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    total += cost.q[t] * traj.states[t] * traj.states[t] +
             cost.r[t] * traj.controls[t] * traj.controls[t];
  }
  total += cost.q[T] * traj.states[T] * traj.states[T];
  return total;
}

/// Proxy cost: J_r of the (model) trajectory plus beta_{t+1} (X_{t+1} - xhat_{t+1})^2.
inline double eval_jc(const CostSchedule& cost, const BetaVector& beta,
                      const CandidateTrajectory& xhat, const Trajectory& traj) {
  detail::check_traj(cost, traj, "eval_jc");
  const std::size_t T = traj.controls.size();
  if (beta.values.size() != T || xhat.points.size() != T)
    throw InvalidInput("eval_jc: beta/candidate length mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double gap = traj.states[t + 1] - xhat.points[t];
    total += cost.q[t] * traj.states[t] * traj.states[t] +
             cost.r[t] * traj.controls[t] * traj.controls[t] +
             beta.values[t] * gap * gap;
  }
  total += cost.q[T] * traj.states[T] * traj.states[T];
  return total;
}

/// Count of real-system episodes. Safe to bump from concurrent rollouts.
class EpisodeLedger {
 public:
  std::uint64_t episodes() const { return count_.load(std::memory_order_relaxed); }
  void record(std::uint64_t n = 1) { count_.fetch_add(n, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

/// Black-box access to the real system. Everything a learner knows about
/// (a_true, b_true) comes through step calls made by these rollouts, and
/// every completed rollout is one episode in the ledger.
class RealSystemOracle {
 public:
  using StepFn = std::function<double(double x, double u)>;

  explicit RealSystemOracle(StepFn step) : step_(std::move(step)) {}

  RealSystemOracle(const RealSystemOracle&) = delete;
  RealSystemOracle& operator=(const RealSystemOracle&) = delete;

  static RealSystemOracle from_instance(const SystemInstance& inst) {
    inst.validate();
    const Dynamics d = inst.true_dynamics();
    return RealSystemOracle([d](double x, double u) { return d.step(x, u); });
  }

  /// Open-loop episode.
  Trajectory rollout(double x0, std::span<const double> controls) {
    if (controls.empty()) throw InvalidInput("oracle rollout: empty control sequence");
    Trajectory traj;
    traj.controls.assign(controls.begin(), controls.end());
    traj.states.reserve(controls.size() + 1);
    traj.states.push_back(x0);
    for (double u : controls) traj.states.push_back(step_(traj.states.back(), u));
    ledger_.record();
    return traj;
  }

  /// Closed-loop episode; policy(t, x) returns U_t.
  template <class Policy>
  Trajectory run(double x0, int horizon, Policy&& policy) {
    if (horizon < 1) throw InvalidInput("oracle run: horizon must be >= 1");
    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
    traj.controls.reserve(static_cast<std::size_t>(horizon));
    traj.states.push_back(x0);
    for (int t = 0; t < horizon; ++t) {
      const double u = policy(t, traj.states.back());
      traj.controls.push_back(u);
      traj.states.push_back(step_(traj.states.back(), u));
    }
    ledger_.record();
    return traj;
  }

  std::uint64_t episodes() const { return ledger_.episodes(); }
  const EpisodeLedger& ledger() const { return ledger_; }

 private:
  StepFn step_;
  EpisodeLedger ledger_;
};

}  // namespace clc
