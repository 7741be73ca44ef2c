#pragma once

// Learning the penalty vector beta by finite-difference gradient descent on
// Jtilde(beta) = J_r(g_clc(beta)), plus the two closed-form prescriptions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clc/csv.hpp"
#include "clc/errors.hpp"
#include "clc/model.hpp"

namespace clc {

/// beta_t = -Q_t + epsilon for t = 1..T (no-effort-cost setting).
inline BetaVector inversion_beta(const CostSchedule& cost, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw InvalidInput("inversion_beta: epsilon must be finite and > 0");
  cost.validate();
  BetaVector beta;
  for (int t = 1; t <= cost.horizon(); ++t) beta.values.push_back(-cost.q[t] + epsilon);
  return beta;
}

inline double terminal_beta(const CostSchedule& cost) { return -cost.terminal(); }

struct Evaluation {
  double value = 0.0;
  std::uint64_t episodes = 0;
};

using BetaEvaluator = std::function<Evaluation(const BetaVector&)>;

/// An evaluator call inside fd_gradient failed; probe() is the perturbed
/// coordinate (0-based), or -1 for the base point.
class ProbeError : public Error {
 public:
  ProbeError(const std::string& what, int probe) : Error(what), probe_(probe) {}
  int probe() const { return probe_; }

 private:
  int probe_;
};

struct FdResult {
  std::vector<double> gradient;
  double value = 0.0;  // Jtilde at the base point
  std::uint64_t episodes = 0;
};

/// Forward differences. With fix_terminal the last coordinate is not probed
/// and its component is 0.
inline FdResult fd_gradient(const BetaVector& beta, double delta, const BetaEvaluator& evaluator,
                            bool fix_terminal = false) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw InvalidInput("fd_gradient: delta must be finite and > 0");
  const int T = beta.size();
  if (T < 1) throw InvalidInput("fd_gradient: empty beta");
  auto call = [&](const BetaVector& b, int probe) {
    try {
      return evaluator(b);
    } catch (const std::exception& e) {
      throw ProbeError("fd_gradient: evaluator failed at " +
                           (probe < 0 ? std::string("base point")
                                      : "probe beta_" + std::to_string(probe + 1)) +
                           ": " + e.what(),
                       probe);
    }
  };
  FdResult out;
  out.gradient.assign(static_cast<std::size_t>(T), 0.0);
  const Evaluation base = call(beta, -1);
  out.value = base.value;
  out.episodes = base.episodes;
  const int probed = fix_terminal ? T - 1 : T;
  for (int t = 0; t < probed; ++t) {
    BetaVector b = beta;
    b[static_cast<std::size_t>(t)] += delta;
    const Evaluation e = call(b, t);
    out.episodes += e.episodes;
    out.gradient[static_cast<std::size_t>(t)] = (e.value - base.value) / delta;
  }
  return out;
}

/// alpha_k = alpha / (1 + k / kappa); kappa = infinity gives a constant step.
struct StepSchedule {
  double alpha = 0.8;
  double kappa = std::numeric_limits<double>::infinity();

  double at(int k) const { return std::isinf(kappa) ? alpha : alpha / (1.0 + k / kappa); }
};

struct BetaLearnConfig {
  BetaVector beta_init;
  StepSchedule step;
  double fd_delta = 0.2;
  int max_iters = 25;
  double convergence_tol = 1e-6;
  /// Keep the terminal component at its initial value (set it to terminal_beta()).
  bool fix_terminal = true;
  double divergence_factor = 100.0;

  void validate() const {
    if (beta_init.size() < 1) throw InvalidInput("learn_beta: beta_init is empty");
    beta_init.validate(beta_init.size());
    if (!(step.alpha >= 0.0) || !std::isfinite(step.alpha))
      throw InvalidInput("learn_beta: step size must be finite and >= 0");
    if (!(step.kappa > 0.0)) throw InvalidInput("learn_beta: schedule kappa must be > 0");
    if (!(fd_delta > 0.0)) throw InvalidInput("learn_beta: fd_delta must be > 0");
    if (max_iters < 0) throw InvalidInput("learn_beta: max_iters must be >= 0");
    if (!(convergence_tol > 0.0)) throw InvalidInput("learn_beta: convergence_tol must be > 0");
    if (!(divergence_factor > 1.0))
      throw InvalidInput("learn_beta: divergence_factor must be > 1");
  }
};

struct BetaIterate {
  int k = 0;
  BetaVector beta;
  double value = 0.0;
  std::uint64_t episodes_cumulative = 0;
};

struct BetaTrace {
  std::vector<BetaIterate> iterates;
  std::size_t best = 0;  // iterate with the smallest Jtilde (earliest on ties)
  bool converged = false;
  bool diverged = false;
  std::string divergence_report;

  const BetaIterate& best_iterate() const { return iterates.at(best); }
  std::uint64_t episodes() const {
    return iterates.empty() ? 0 : iterates.back().episodes_cumulative;
  }
};

/// Iterate k records beta_k and Jtilde(beta_k), the base value of the
/// gradient probe at beta_k. After the last update the final beta is
/// evaluated once more so every iterate carries a value.
inline BetaTrace learn_beta(const BetaLearnConfig& config, const BetaEvaluator& evaluator) {
  config.validate();
  BetaTrace trace;
  BetaVector beta = config.beta_init;
  std::uint64_t episodes = 0;
  double initial = 0.0;
  auto record = [&](int k, double value) {
    trace.iterates.push_back({k, beta, value, episodes});
    if (value < trace.iterates[trace.best].value) trace.best = trace.iterates.size() - 1;
  };
  auto diverging = [&](double value) {
    if (!std::isfinite(value) || (initial > 0.0 && value > config.divergence_factor * initial)) {
      trace.diverged = true;
      trace.divergence_report = "learn_beta: Jtilde = " + csv::fmt(value) + " exceeds " +
                                csv::fmt(config.divergence_factor) + "x the initial value " +
                                csv::fmt(initial);
      return true;
    }
    return false;
  };

  for (int k = 0;; ++k) {
    if (k == config.max_iters) {
      const Evaluation e = evaluator(beta);
      episodes += e.episodes;
      record(k, e.value);
      diverging(e.value);
      break;
    }
    const FdResult fd = fd_gradient(beta, config.fd_delta, evaluator, config.fix_terminal);
    episodes += fd.episodes;
    if (k == 0) initial = fd.value;
    record(k, fd.value);
    if (diverging(fd.value)) break;
    const double alpha = config.step.at(k);
    double change = 0.0;
    for (std::size_t t = 0; t < fd.gradient.size(); ++t) {
      const double next = beta[t] - alpha * fd.gradient[t];
      if (!std::isfinite(next)) {
        trace.diverged = true;
        trace.divergence_report = "learn_beta: non-finite iterate at k = " + std::to_string(k);
        return trace;
      }
      change = std::max(change, std::abs(next - beta[t]));
      beta[t] = next;
    }
    if (change <= config.convergence_tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

/// Columns k, beta_1..beta_T, J_tilde, episodes_cumulative, plus a trailing
/// riccati_optimal column when a reference cost is given.
inline void write_beta_trace_csv(std::ostream& os, const BetaTrace& trace,
                                 std::optional<double> reference = std::nullopt) {
  const int T = trace.iterates.empty() ? 0 : trace.iterates.front().beta.size();
  os << "k";
  for (int t = 1; t <= T; ++t) os << ",beta_" << t;
  os << ",J_tilde,episodes_cumulative";
  if (reference) os << ",riccati_optimal";
  os << '\n';
  for (const BetaIterate& it : trace.iterates) {
    os << it.k;
    for (double b : it.beta.values) os << ',' << csv::fmt(b);
    os << ',' << csv::fmt(it.value) << ',' << it.episodes_cumulative;
    if (reference) os << ',' << csv::fmt(*reference);
    os << '\n';
  }
}

}  // namespace clc
