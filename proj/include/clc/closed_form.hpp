#pragma once

// Grid-free proxy-cost DP. With V_{t+1}(x) = p x^2 + 2 s x + const, the
// stage minimizer is affine, U_t = k_t X_t + m_t(xhat), so the whole
// recursion stays in closed form for any horizon.

#include <string>
#include <vector>

#include "clc/errors.hpp"
#include "clc/model.hpp"

namespace clc {

struct AffinePolicy {
  std::vector<double> gain;    // k_t
  std::vector<double> offset;  // m_t, depends on the candidate

  double control(int t, double x) const { return gain[t] * x + offset[t]; }
};

/// Requires r_t + b^2 (p_{t+1} + beta_{t+1}) > 0 at every stage; otherwise
/// the proxy stage objective has no minimizer and DegenerateCost is thrown.
inline AffinePolicy solve_affine_policy(Dynamics model, const CostSchedule& cost,
                                        const BetaVector& beta,
                                        const CandidateTrajectory& xhat) {
  const int T = cost.horizon();
  if (beta.size() != T || xhat.size() != T)
    throw InvalidInput("solve_affine_policy: beta/candidate length mismatch");
  const double a = model.a;
  const double b = model.b;
  AffinePolicy pol;
  pol.gain.assign(static_cast<std::size_t>(T), 0.0);
  pol.offset.assign(static_cast<std::size_t>(T), 0.0);
  double p = cost.q[T];
  double s = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double w = beta[t] + p;
    const double lin = s - beta[t] * xhat.points[t];
    const double denom = cost.r[t] + b * b * w;
    if (!(denom > 0.0))
      throw DegenerateCost("solve_affine_policy: proxy stage objective not strictly convex "
                           "(r_t + b^2 (p_{t+1} + beta_{t+1}) = " +
                               std::to_string(denom) + ") at stage " + std::to_string(t),
                           t);
    const double k = -a * b * w / denom;
    const double m = -b * lin / denom;
    pol.gain[t] = k;
    pol.offset[t] = m;
    const double g = a + b * k;
    const double h = b * m;
    const double p_new = cost.q[t] + cost.r[t] * k * k + w * g * g;
    s = cost.r[t] * k * m + w * g * h + lin * g;
    p = p_new;
  }
  return pol;
}

}  // namespace clc
