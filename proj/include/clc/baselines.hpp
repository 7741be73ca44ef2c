#pragma once

// Model-free comparison learners. All of them touch the real system only
// through RealSystemOracle episodes, and every greedy evaluation is itself
// an episode.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "clc/csv.hpp"
#include "clc/errors.hpp"
#include "clc/grid.hpp"
#include "clc/model.hpp"

namespace clc {

struct CurvePoint {
  std::uint64_t episodes = 0;  // ledger snapshot after the greedy evaluation
  double greedy_jr = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
  double final_gain = std::numeric_limits<double>::quiet_NaN();  // PG/RS only
};

/// Columns method, seed, episodes, greedy_Jr, plus a trailing riccati_optimal
/// column when a reference cost is given.
inline void write_curve_header(std::ostream& os, bool with_reference = false) {
  os << "method,seed,episodes,greedy_Jr" << (with_reference ? ",riccati_optimal\n" : "\n");
}

inline void write_curve_rows(std::ostream& os, const std::string& method, std::uint64_t seed,
                             const LearningCurve& curve,
                             std::optional<double> reference = std::nullopt) {
  for (const CurvePoint& p : curve.points) {
    if (reference)
      csv::row(os, method, static_cast<unsigned long long>(seed),
               static_cast<unsigned long long>(p.episodes), p.greedy_jr, *reference);
    else
      csv::row(os, method, static_cast<unsigned long long>(seed),
               static_cast<unsigned long long>(p.episodes), p.greedy_jr);
  }
}

namespace detail {

inline double constant_gain_cost(RealSystemOracle& oracle, const CostSchedule& cost, double x0,
                                 double k) {
  const Trajectory traj =
      oracle.run(x0, cost.horizon(), [k](int, double x) { return k * x; });
  return eval_jr(cost, traj);
}

inline void check_gain(double k_next, double k_last, const char* who) {
  if (!std::isfinite(k_next))
    throw Divergence(std::string(who) + ": gain became non-finite (last finite K = " +
                         csv::fmt(k_last) + ")",
                     k_last);
}

inline void check_cost(double j, double k, const char* who) {
  if (!std::isfinite(j))
    throw Divergence(std::string(who) + ": episode cost overflowed at K = " + csv::fmt(k), k);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Policy gradient

struct PGConfig {
  double k_init = 0.0;
  double sigma = 0.1;
  double step_size = 0.02;
  int episodes_per_update = 10;
  int max_updates = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma > 0.0)) throw InvalidInput("pg: sigma must be > 0");
    if (!(step_size > 0.0)) throw InvalidInput("pg: step_size must be > 0");
    if (episodes_per_update < 1) throw InvalidInput("pg: episodes_per_update must be >= 1");
    if (max_updates < 0) throw InvalidInput("pg: max_updates must be >= 0");
    if (!std::isfinite(k_init)) throw InvalidInput("pg: k_init must be finite");
  }
};

/// REINFORCE on a constant gain, U_t = K X_t + sigma eta_t, with the running
/// mean of all exploratory episode costs as baseline (seeded by the initial
/// greedy cost).
inline LearningCurve run_pg(const PGConfig& config, RealSystemOracle& oracle,
                            const CostSchedule& cost, double x0) {
  config.validate();
  cost.validate();
  const int T = cost.horizon();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LearningCurve curve;
  double k = config.k_init;
  const double j0 = detail::constant_gain_cost(oracle, cost, x0, k);
  detail::check_cost(j0, k, "pg");
  curve.points.push_back({oracle.episodes(), j0});
  double baseline = j0;
  std::uint64_t seen = 1;
  std::vector<double> eta(static_cast<std::size_t>(T));
  for (int update = 0; update < config.max_updates; ++update) {
    double grad = 0.0;
    for (int e = 0; e < config.episodes_per_update; ++e) {
      for (double& v : eta) v = normal(rng);
      const Trajectory traj = oracle.run(x0, T, [&](int t, double x) {
        return k * x + config.sigma * eta[static_cast<std::size_t>(t)];
      });
      const double j = eval_jr(cost, traj);
      detail::check_cost(j, k, "pg");
      double score = 0.0;
      for (int t = 0; t < T; ++t) score += eta[static_cast<std::size_t>(t)] * traj.states[t];
      grad += (j - baseline) * score / config.sigma;
      ++seen;
      baseline += (j - baseline) / static_cast<double>(seen);
    }
    grad /= config.episodes_per_update;
    const double next = k - config.step_size * grad;
    detail::check_gain(next, k, "pg");
    k = next;
    const double jg = detail::constant_gain_cost(oracle, cost, x0, k);
    detail::check_cost(jg, k, "pg");
    curve.points.push_back({oracle.episodes(), jg});
  }
  curve.final_gain = k;
  return curve;
}

// ---------------------------------------------------------------------------
// Random search

struct RSConfig {
  double k_init = 0.0;
  double sigma = 0.05;
  double step_size = 0.02;
  int directions_per_update = 1;
  int max_updates = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma > 0.0)) throw InvalidInput("rs: sigma must be > 0");
    if (!(step_size > 0.0)) throw InvalidInput("rs: step_size must be > 0");
    if (directions_per_update < 1) throw InvalidInput("rs: directions_per_update must be >= 1");
    if (max_updates < 0) throw InvalidInput("rs: max_updates must be >= 0");
    if (!std::isfinite(k_init)) throw InvalidInput("rs: k_init must be finite");
  }
};

/// Antithetic two-point search: J at K +- sigma xi, one episode each.
inline LearningCurve run_rs(const RSConfig& config, RealSystemOracle& oracle,
                            const CostSchedule& cost, double x0) {
  config.validate();
  cost.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LearningCurve curve;
  double k = config.k_init;
  const double j0 = detail::constant_gain_cost(oracle, cost, x0, k);
  detail::check_cost(j0, k, "rs");
  curve.points.push_back({oracle.episodes(), j0});
  for (int update = 0; update < config.max_updates; ++update) {
    double grad = 0.0;
    for (int d = 0; d < config.directions_per_update; ++d) {
      double xi = 0.0;
      while (config.sigma * xi == 0.0) xi = normal(rng);
      const double jp = detail::constant_gain_cost(oracle, cost, x0, k + config.sigma * xi);
      const double jm = detail::constant_gain_cost(oracle, cost, x0, k - config.sigma * xi);
      detail::check_cost(jp, k, "rs");
      detail::check_cost(jm, k, "rs");
      grad += (jp - jm) / (2.0 * config.sigma) * xi;
    }
    grad /= config.directions_per_update;
    const double next = k - config.step_size * grad;
    detail::check_gain(next, k, "rs");
    k = next;
    const double jg = detail::constant_gain_cost(oracle, cost, x0, k);
    detail::check_cost(jg, k, "rs");
    curve.points.push_back({oracle.episodes(), jg});
  }
  curve.final_gain = k;
  return curve;
}

// ---------------------------------------------------------------------------
// Tabular Q-learning

struct QLearnConfig {
  GridAxis state_grid{-5.0, 5.0, 201};
  GridAxis action_grid{-2.0, 1.0, 61};
  double a_step = 1.0;
  double b_step = 1.0;
  double explore_eps = 0.3;
  int max_episodes = 20000;
  /// Learning episodes between greedy evaluations.
  int eval_interval = 250;
  double q_init = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    state_grid.validate("q state");
    action_grid.validate("q action");
    if (!(a_step > 0.0) || !(b_step > 0.0)) throw InvalidInput("q: a_step, b_step must be > 0");
    if (!(explore_eps >= 0.0 && explore_eps <= 1.0))
      throw InvalidInput("q: explore_eps must be in [0, 1]");
    if (max_episodes < 0) throw InvalidInput("q: max_episodes must be >= 0");
    if (eval_interval < 1) throw InvalidInput("q: eval_interval must be >= 1");
  }
};

/// Stage-indexed Q tables, Q_t(ix, iu) for t < T, with the terminal rule
/// Q_T(x) = Q_T x^2 applied to the unsnapped final state.
class QTables {
 public:
  QTables(int horizon, const QLearnConfig& config)
      : T_(horizon),
        nx_(static_cast<std::size_t>(config.state_grid.n)),
        nu_(static_cast<std::size_t>(config.action_grid.n)),
        values_(static_cast<std::size_t>(horizon) * nx_ * nu_, config.q_init),
        visits_(values_.size(), 0) {}

  double& value(int t, int ix, int iu) { return values_[index(t, ix, iu)]; }
  double value(int t, int ix, int iu) const { return values_[index(t, ix, iu)]; }
  std::uint64_t& visits(int t, int ix, int iu) { return visits_[index(t, ix, iu)]; }
  std::uint64_t visits(int t, int ix, int iu) const { return visits_[index(t, ix, iu)]; }

  /// Greedy action index; ties go to the lowest index.
  int argmin(int t, int ix) const {
    const double* row = &values_[index(t, ix, 0)];
    int best = 0;
    for (std::size_t k = 1; k < nu_; ++k)
      if (row[k] < row[best]) best = static_cast<int>(k);
    return best;
  }

  double min(int t, int ix) const { return value(t, ix, argmin(t, ix)); }
  int horizon() const { return T_; }

 private:
  std::size_t index(int t, int ix, int iu) const {
    return (static_cast<std::size_t>(t) * nx_ + static_cast<std::size_t>(ix)) * nu_ +
           static_cast<std::size_t>(iu);
  }
  int T_;
  std::size_t nx_, nu_;
  std::vector<double> values_;
  std::vector<std::uint64_t> visits_;
};

inline double q_terminal(const CostSchedule& cost, double x) { return cost.terminal() * x * x; }

inline double q_stepsize(const QLearnConfig& config, std::uint64_t m) {
  return config.b_step / (config.a_step + static_cast<double>(m));
}

struct QLearnResult {
  LearningCurve curve;
  QTables tables;
};

namespace detail {

inline double q_greedy_cost(RealSystemOracle& oracle, const CostSchedule& cost, double x0,
                            const QLearnConfig& config, const QTables& tables) {
  const Trajectory traj = oracle.run(x0, cost.horizon(), [&](int t, double x) {
    const int ix = config.state_grid.nearest_checked(x, "q-learning greedy state");
    return config.action_grid.point(tables.argmin(t, ix));
  });
  return eval_jr(cost, traj);
}

}  // namespace detail

/// One episode: act epsilon-greedily on snapped states, then apply
///   Q_t(x,u) <- (1 - g) Q_t(x,u) + g (c_t + min_u' Q_{t+1}(x',u')),  g = b/(a+m),
/// from the last stage backwards so fresh terminal information propagates
/// within the episode.
inline QLearnResult run_q_tables(const QLearnConfig& config, RealSystemOracle& oracle,
                                 const CostSchedule& cost, double x0, int horizon) {
  config.validate();
  cost.validate(horizon);
  const int T = horizon;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> any_action(0, config.action_grid.n - 1);
  QLearnResult out{LearningCurve{}, QTables(T, config)};
  QTables& q = out.tables;

  auto evaluate = [&] {
    const double jr = detail::q_greedy_cost(oracle, cost, x0, config, q);
    out.curve.points.push_back({oracle.episodes(), jr});
  };
  evaluate();
  std::vector<int> ixs(static_cast<std::size_t>(T) + 1), ius(static_cast<std::size_t>(T));
  for (int episode = 1; episode <= config.max_episodes; ++episode) {
    const Trajectory traj = oracle.run(x0, T, [&](int t, double x) {
      const int ix = config.state_grid.nearest_checked(x, "q-learning state");
      const int iu = coin(rng) < config.explore_eps ? any_action(rng) : q.argmin(t, ix);
      ixs[static_cast<std::size_t>(t)] = ix;
      ius[static_cast<std::size_t>(t)] = iu;
      return config.action_grid.point(iu);
    });
    for (int t = T - 1; t >= 0; --t) {
      const double x = traj.states[t];
      const double u = traj.controls[t];
      const double c = cost.q[t] * x * x + cost.r[t] * u * u;
      double target = c;
      if (t == T - 1) {
        target += q_terminal(cost, traj.states[T]);
      } else {
        target += q.min(t + 1, config.state_grid.nearest_checked(traj.states[t + 1],
                                                                 "q-learning state"));
      }
      const int ix = ixs[static_cast<std::size_t>(t)];
      const int iu = ius[static_cast<std::size_t>(t)];
      std::uint64_t& m = q.visits(t, ix, iu);
      const double g = q_stepsize(config, m);
      double& entry = q.value(t, ix, iu);
      entry = (1.0 - g) * entry + g * target;
      ++m;
    }
    if (episode % config.eval_interval == 0 || episode == config.max_episodes) evaluate();
  }
  return out;
}

inline LearningCurve run_q(const QLearnConfig& config, RealSystemOracle& oracle,
                           const CostSchedule& cost, double x0, int horizon) {
  return run_q_tables(config, oracle, cost, x0, horizon).curve;
}

}  // namespace clc
