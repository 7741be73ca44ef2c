#pragma once

// Finite-horizon scalar LQR with known dynamics: the backward Riccati
// recursion. This is the ground truth every learner is judged against.

#include <cmath>
#include <string>
#include <vector>

#include "clc/errors.hpp"
#include "clc/model.hpp"

namespace clc::riccati {

struct RiccatiSolution {
  std::vector<double> gains;         // K_0..K_{T-1}, U_t = K_t X_t
  std::vector<double> value_coeffs;  // P_0..P_T, V_t(x) = P_t x^2
  double optimal_cost = 0.0;         // P_0 x0^2
};

/// P_T = Q_T,
/// P_t = q_t + P_{t+1} a^2 - (P_{t+1} a b)^2 / (r_t + P_{t+1} b^2).
inline RiccatiSolution solve(double a, double b, const CostSchedule& cost, double x0) {
  if (b == 0.0) throw InvalidInput("riccati::solve: b must be nonzero");
  if (cost.r.empty() || cost.q.size() != cost.r.size() + 1)
    throw InvalidInput("riccati::solve: malformed cost schedule");
  const int T = cost.horizon();
  RiccatiSolution sol;
  sol.gains.assign(static_cast<std::size_t>(T), 0.0);
  sol.value_coeffs.assign(static_cast<std::size_t>(T) + 1, 0.0);
  sol.value_coeffs[T] = cost.q[T];
  for (int t = T - 1; t >= 0; --t) {
    const double p_next = sol.value_coeffs[t + 1];
    const double denom = cost.r[t] + p_next * b * b;
    if (!(denom > 0.0))
      throw DegenerateCost("riccati::solve: r_t + P_{t+1} b^2 = " +
                               std::to_string(denom) + " at stage " + std::to_string(t),
                           t);
    const double k = -(p_next * a * b) / denom;
    sol.gains[t] = k;
    // Joseph-like form q + r k^2 + P (a + b k)^2 keeps P_t >= 0 numerically.
    const double closed = a + b * k;
    sol.value_coeffs[t] = cost.q[t] + cost.r[t] * k * k + p_next * closed * closed;
  }
  sol.optimal_cost = sol.value_coeffs[0] * x0 * x0;
  return sol;
}

/// Closed-loop rollout of U_t = K_t X_t on dynamics (a, b).
inline Trajectory optimal_policy_controls(const RiccatiSolution& sol, double a, double b,
                                          double x0) {
  const std::size_t T = sol.gains.size();
  if (T == 0) throw InvalidInput("optimal_policy_controls: empty solution");
  Trajectory traj;
  traj.states.reserve(T + 1);
  traj.controls.reserve(T);
  traj.states.push_back(x0);
  const Dynamics d{a, b};
  for (std::size_t t = 0; t < T; ++t) {
    const double u = sol.gains[t] * traj.states.back();
    traj.controls.push_back(u);
    traj.states.push_back(d.step(traj.states.back(), u));
  }
  return traj;
}

}  // namespace clc::riccati
