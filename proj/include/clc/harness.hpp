#pragma once

// Experiment runner behind the command-line tool: config -> typed
// experiment -> CSV files plus a run manifest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "clc/baselines.hpp"
#include "clc/beta_learn.hpp"
#include "clc/config.hpp"
#include "clc/coupling.hpp"
#include "clc/csv.hpp"
#include "clc/errors.hpp"
#include "clc/model.hpp"
#include "clc/riccati.hpp"
#include "clc/version.hpp"

namespace clc {

enum class Method { riccati, clc, learn_beta, pg, rs, q, sweep_beta, compare };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::riccati: return "riccati";
    case Method::clc: return "clc";
    case Method::learn_beta: return "learn-beta";
    case Method::pg: return "pg";
    case Method::rs: return "rs";
    case Method::q: return "q";
    case Method::sweep_beta: return "sweep-beta";
    case Method::compare: return "compare";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::riccati, Method::clc, Method::learn_beta, Method::pg, Method::rs,
                   Method::q, Method::sweep_beta, Method::compare})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method '" + s + "'");
}

struct SweepConfig {
  std::vector<double> a_true_values{1.5, 2.0, 2.5};
  double beta1_min = -3.0;
  double beta1_max = 1.0;
  int beta1_n = 41;

  double beta1(int i) const {
    return beta1_n == 1 ? beta1_min
                        : beta1_min + (i * (beta1_max - beta1_min)) / (beta1_n - 1);
  }
};

struct CompareConfig {
  int seeds = 10;
  std::vector<std::string> methods{"clc", "pg", "rs", "q"};
};

struct ExperimentConfig {
  Method method = Method::riccati;
  SystemInstance instance;
  CostSchedule cost;
  GridSpec grids;
  Evaluator evaluator = Evaluator::grid;
  BuildOptions build;
  CouplingOptions coupling;
  BetaVector clc_beta;
  bool clc_trace = false;
  BetaLearnConfig learn;
  PGConfig pg;
  RSConfig rs;
  QLearnConfig q;
  SweepConfig sweep;
  CompareConfig compare;
  std::uint64_t seed = 0;
  std::string output_path = "out";
  Config source;  // echoed into the manifest

  ClcSetup clc_setup() const {
    ClcSetup s;
    s.model = instance.model_dynamics();
    s.cost = cost;
    s.x0 = instance.x0;
    s.grids = grids;
    s.evaluator = evaluator;
    s.build = build;
    s.coupling = coupling;
    return s;
  }
};

namespace detail {

/// Documented key list per section. Top-level keys have section "".
inline const std::map<std::string, std::vector<std::string>>& config_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"", {"method", "seed", "output"}},
      {"instance", {"a_true", "b_true", "a_model", "b_model", "x0", "horizon"}},
      {"cost", {"q", "r"}},
      {"grids",
       {"x_min", "x_max", "x_n", "u_min", "u_max", "u_n", "xhat_min", "xhat_max", "xhat_n",
        "interpolation"}},
      {"evaluator",
       {"kind", "threshold_factor", "refine", "refine_sweeps", "threads", "candidate_budget"}},
      {"clc", {"beta", "trace"}},
      {"learn_beta",
       {"beta_init", "alpha", "kappa", "fd_delta", "max_iters", "convergence_tol",
        "fix_terminal", "divergence_factor"}},
      {"pg", {"k_init", "sigma", "step_size", "episodes_per_update", "max_updates"}},
      {"rs", {"k_init", "sigma", "step_size", "directions_per_update", "max_updates"}},
      {"q",
       {"state_min", "state_max", "state_n", "action_min", "action_max", "action_n", "a_step",
        "b_step", "explore_eps", "max_episodes", "eval_interval", "q_init"}},
      {"sweep", {"a_true_values", "beta1_min", "beta1_max", "beta1_n"}},
      {"compare", {"seeds", "methods"}},
  };
  return keys;
}

/// Sections a method may use besides the top level.
inline std::set<std::string> allowed_sections(Method m) {
  switch (m) {
    case Method::riccati: return {"instance", "cost"};
    case Method::clc: return {"instance", "cost", "grids", "evaluator", "clc"};
    case Method::learn_beta: return {"instance", "cost", "grids", "evaluator", "learn_beta"};
    case Method::pg: return {"instance", "cost", "pg"};
    case Method::rs: return {"instance", "cost", "rs"};
    case Method::q: return {"instance", "cost", "q"};
    case Method::sweep_beta: return {"instance", "cost", "grids", "evaluator", "sweep"};
    case Method::compare:
      return {"instance", "cost", "grids", "evaluator", "learn_beta", "pg", "rs", "q", "compare"};
  }
  return {};
}

inline void check_keys(const Config& cfg, Method m) {
  const auto& known = config_keys();
  const auto allowed = allowed_sections(m);
  for (const std::string& key : cfg.keys()) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    const auto it = known.find(section);
    if (it == known.end() ||
        std::find(it->second.begin(), it->second.end(), name) == it->second.end())
      throw ConfigError("unknown config key '" + key + "'");
    if (!section.empty() && allowed.count(section) == 0)
      throw ConfigError("config section '" + section + "' is not used by method '" +
                        to_string(m) + "' (key '" + key + "')");
  }
}

inline int to_count(long long v, const std::string& key, long long lo) {
  if (v < lo || v > std::numeric_limits<int>::max())
    throw ConfigError("key '" + key + "': value " + std::to_string(v) + " out of range");
  return static_cast<int>(v);
}

inline GridAxis read_axis(const Config& c, const std::string& prefix, const std::string& lo,
                          const std::string& hi, const std::string& n, GridAxis fallback) {
  GridAxis ax;
  ax.min = c.get_double(prefix + lo, fallback.min);
  ax.max = c.get_double(prefix + hi, fallback.max);
  ax.n = to_count(c.get_int(prefix + n, fallback.n), prefix + n, 2);
  return ax;
}

}  // namespace detail

/// Builds a typed experiment from a parsed config. `method` is the
/// subcommand; a `method` key in the file must agree with it.
inline ExperimentConfig load_experiment(const Config& cfg, Method method) {
  if (cfg.has("method") && parse_method(cfg.raw("method")) != method)
    throw ConfigError("config method '" + cfg.raw("method") + "' does not match subcommand '" +
                      to_string(method) + "'");
  detail::check_keys(cfg, method);
  ExperimentConfig e;
  e.method = method;
  e.source = cfg;
  const long long seed = cfg.get_int("seed", 0);
  if (seed < 0) throw ConfigError("key 'seed' must be >= 0");
  e.seed = static_cast<std::uint64_t>(seed);
  e.output_path = cfg.get_string("output", "out");

  e.cost.q = cfg.get_list("cost.q");
  e.cost.r = cfg.get_list("cost.r");
  e.cost.validate();
  const int T = e.cost.horizon();
  e.instance.a_true = cfg.get_double("instance.a_true");
  e.instance.b_true = cfg.get_double("instance.b_true");
  e.instance.a_model = cfg.get_double("instance.a_model");
  e.instance.b_model = cfg.get_double("instance.b_model");
  e.instance.x0 = cfg.get_double("instance.x0");
  e.instance.horizon = detail::to_count(cfg.get_int("instance.horizon", T), "instance.horizon", 1);
  e.instance.validate();
  e.cost.validate(e.instance.horizon);

  const GridSpec dg;
  e.grids.x = detail::read_axis(cfg, "grids.", "x_min", "x_max", "x_n", dg.x);
  e.grids.u = detail::read_axis(cfg, "grids.", "u_min", "u_max", "u_n", dg.u);
  e.grids.xhat = detail::read_axis(cfg, "grids.", "xhat_min", "xhat_max", "xhat_n", dg.xhat);
  const std::string interp = cfg.get_string("grids.interpolation", "quadratic");
  if (interp == "quadratic") e.grids.interpolation = Interpolation::quadratic;
  else if (interp == "linear") e.grids.interpolation = Interpolation::linear;
  else throw ConfigError("grids.interpolation must be 'linear' or 'quadratic'");
  e.grids.validate();

  const std::string kind = cfg.get_string("evaluator.kind", "grid");
  if (kind == "grid") e.evaluator = Evaluator::grid;
  else if (kind == "closed_form") e.evaluator = Evaluator::closed_form;
  else throw ConfigError("evaluator.kind must be 'grid' or 'closed_form'");
  e.coupling.threshold_factor = cfg.get_double("evaluator.threshold_factor", 2.0);
  if (!(e.coupling.threshold_factor > 0.0))
    throw ConfigError("evaluator.threshold_factor must be > 0");
  e.coupling.refine = cfg.get_bool("evaluator.refine", true);
  e.coupling.refine_sweeps =
      detail::to_count(cfg.get_int("evaluator.refine_sweeps", 3), "evaluator.refine_sweeps", 0);
  e.build.threads =
      static_cast<unsigned>(detail::to_count(cfg.get_int("evaluator.threads", 0),
                                             "evaluator.threads", 0));
  e.build.candidate_budget = cfg.get_double("evaluator.candidate_budget", kDefaultCandidateBudget);

  if (method == Method::clc) {
    e.clc_beta.values = cfg.get_list("clc.beta");
    e.clc_beta.validate(T);
    e.clc_trace = cfg.get_bool("clc.trace", false);
  }

  if (method == Method::learn_beta || method == Method::compare) {
    BetaLearnConfig& l = e.learn;
    l.beta_init.values = cfg.get_list("learn_beta.beta_init");
    l.beta_init.validate(T);
    l.step.alpha = cfg.get_double("learn_beta.alpha", l.step.alpha);
    if (cfg.has("learn_beta.kappa")) l.step.kappa = cfg.get_double("learn_beta.kappa");
    l.fd_delta = cfg.get_double("learn_beta.fd_delta", l.fd_delta);
    l.max_iters =
        detail::to_count(cfg.get_int("learn_beta.max_iters", l.max_iters), "learn_beta.max_iters", 0);
    l.convergence_tol = cfg.get_double("learn_beta.convergence_tol", l.convergence_tol);
    l.fix_terminal = cfg.get_bool("learn_beta.fix_terminal", l.fix_terminal);
    l.divergence_factor = cfg.get_double("learn_beta.divergence_factor", l.divergence_factor);
    if (l.fix_terminal && l.beta_init.values.back() != terminal_beta(e.cost))
      throw ConfigError("learn_beta.beta_init: with fix_terminal the last entry must equal -Q_T = " +
                        csv::fmt(terminal_beta(e.cost)));
    try {
      l.validate();
    } catch (const InvalidInput& err) {
      throw ConfigError(err.what());
    }
  }

  if (method == Method::pg || method == Method::compare) {
    PGConfig& p = e.pg;
    p.k_init = cfg.get_double("pg.k_init", p.k_init);
    p.sigma = cfg.get_double("pg.sigma", p.sigma);
    p.step_size = cfg.get_double("pg.step_size", p.step_size);
    p.episodes_per_update = detail::to_count(
        cfg.get_int("pg.episodes_per_update", p.episodes_per_update), "pg.episodes_per_update", 1);
    p.max_updates =
        detail::to_count(cfg.get_int("pg.max_updates", p.max_updates), "pg.max_updates", 0);
    p.seed = e.seed;
    try {
      p.validate();
    } catch (const InvalidInput& err) {
      throw ConfigError(err.what());
    }
  }

  if (method == Method::rs || method == Method::compare) {
    RSConfig& r = e.rs;
    r.k_init = cfg.get_double("rs.k_init", r.k_init);
    r.sigma = cfg.get_double("rs.sigma", r.sigma);
    r.step_size = cfg.get_double("rs.step_size", r.step_size);
    r.directions_per_update =
        detail::to_count(cfg.get_int("rs.directions_per_update", r.directions_per_update),
                         "rs.directions_per_update", 1);
    r.max_updates =
        detail::to_count(cfg.get_int("rs.max_updates", r.max_updates), "rs.max_updates", 0);
    r.seed = e.seed;
    try {
      r.validate();
    } catch (const InvalidInput& err) {
      throw ConfigError(err.what());
    }
  }

  if (method == Method::q || method == Method::compare) {
    QLearnConfig& q = e.q;
    q.state_grid = detail::read_axis(cfg, "q.", "state_min", "state_max", "state_n", q.state_grid);
    q.action_grid =
        detail::read_axis(cfg, "q.", "action_min", "action_max", "action_n", q.action_grid);
    q.a_step = cfg.get_double("q.a_step", q.a_step);
    q.b_step = cfg.get_double("q.b_step", q.b_step);
    q.explore_eps = cfg.get_double("q.explore_eps", q.explore_eps);
    q.max_episodes =
        detail::to_count(cfg.get_int("q.max_episodes", q.max_episodes), "q.max_episodes", 0);
    q.eval_interval =
        detail::to_count(cfg.get_int("q.eval_interval", q.eval_interval), "q.eval_interval", 1);
    q.q_init = cfg.get_double("q.q_init", q.q_init);
    q.seed = e.seed;
    try {
      q.validate();
    } catch (const InvalidInput& err) {
      throw ConfigError(err.what());
    }
  }

  if (method == Method::sweep_beta) {
    if (T != 2) throw ConfigError("sweep-beta requires horizon T = 2");
    e.sweep.a_true_values = cfg.get_list("sweep.a_true_values", e.sweep.a_true_values);
    e.sweep.beta1_min = cfg.get_double("sweep.beta1_min", e.sweep.beta1_min);
    e.sweep.beta1_max = cfg.get_double("sweep.beta1_max", e.sweep.beta1_max);
    e.sweep.beta1_n =
        detail::to_count(cfg.get_int("sweep.beta1_n", e.sweep.beta1_n), "sweep.beta1_n", 1);
    if (!(e.sweep.beta1_min <= e.sweep.beta1_max))
      throw ConfigError("sweep.beta1_min must be <= sweep.beta1_max");
  }

  if (method == Method::compare) {
    e.compare.seeds =
        detail::to_count(cfg.get_int("compare.seeds", e.compare.seeds), "compare.seeds", 1);
    e.compare.methods = cfg.get_words("compare.methods", e.compare.methods);
    for (const std::string& m : e.compare.methods)
      if (m != "clc" && m != "pg" && m != "rs" && m != "q")
        throw ConfigError("compare.methods: unknown method '" + m + "'");
  }
  return e;
}

/// Output of one run: files written under the output directory, and the
/// manifest as ordered key/value pairs.
struct RunReport {
  std::vector<std::string> files;
  std::vector<std::pair<std::string, std::string>> manifest;
  std::map<std::string, std::uint64_t> phase_episodes;

  std::uint64_t total_episodes() const {
    std::uint64_t total = 0;
    for (const auto& [phase, n] : phase_episodes) total += n;
    return total;
  }
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + csv::fmt(v[i]);
  return s;
}

class OutputDir {
 public:
  OutputDir(const std::string& path, RunReport& report) : dir_(path), report_(report) {
    std::filesystem::create_directories(dir_);
  }

  std::ofstream open(const std::string& name) {
    const std::filesystem::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write output file '" + p.string() + "'");
    report_.files.push_back(p.string());
    return os;
  }

 private:
  std::filesystem::path dir_;
  RunReport& report_;
};

inline double riccati_reference(const SystemInstance& inst, const CostSchedule& cost) {
  return riccati::solve(inst.a_true, inst.b_true, cost, inst.x0).optimal_cost;
}

/// Jtilde evaluator for learn-beta: a fresh CLC run per call on its own oracle.
inline BetaEvaluator clc_evaluator(const ExperimentConfig& e) {
  const ClcSetup setup = e.clc_setup();
  const SystemInstance inst = e.instance;
  return [setup, inst](const BetaVector& beta) {
    RealSystemOracle oracle = RealSystemOracle::from_instance(inst);
    const ClcResult r = execute_clc(beta, setup, oracle);
    return Evaluation{r.jr, r.episodes};
  };
}

/// Episodes consumed until the curve first reaches `target` (infinity if never).
inline double episodes_to_target(const LearningCurve& curve, double target) {
  for (const CurvePoint& p : curve.points)
    if (p.greedy_jr <= target) return static_cast<double>(p.episodes);
  return std::numeric_limits<double>::infinity();
}

inline LearningCurve best_so_far(LearningCurve c) {
  double best = std::numeric_limits<double>::infinity();
  for (CurvePoint& p : c.points) {
    best = std::min(best, p.greedy_jr);
    p.greedy_jr = best;
  }
  return c;
}

inline LearningCurve trace_curve(const BetaTrace& trace) {
  LearningCurve c;
  for (const BetaIterate& it : trace.iterates) c.points.push_back({it.episodes_cumulative, it.value});
  return c;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Runs the experiment and writes its CSV files and `manifest.txt`.
inline RunReport run(const ExperimentConfig& e) {
  RunReport report;
  detail::OutputDir out(e.output_path, report);
  auto put = [&report](const std::string& k, const std::string& v) {
    report.manifest.emplace_back(k, v);
  };
  const double reference = detail::riccati_reference(e.instance, e.cost);
  const int T = e.cost.horizon();

  switch (e.method) {
    case Method::riccati: {
      const auto sol = riccati::solve(e.instance.a_true, e.instance.b_true, e.cost, e.instance.x0);
      const Trajectory traj = riccati::optimal_policy_controls(sol, e.instance.a_true,
                                                               e.instance.b_true, e.instance.x0);
      auto os = out.open("riccati.csv");
      os << "t,gain,value_coeff,state,control\n";
      for (int t = 0; t <= T; ++t) {
        if (t < T)
          csv::row(os, t, sol.gains[t], sol.value_coeffs[t], traj.states[t], traj.controls[t]);
        else
          os << t << ",," << csv::fmt(sol.value_coeffs[t]) << ',' << csv::fmt(traj.states[t])
             << ",\n";
      }
      report.phase_episodes["riccati"] = 0;
      put("result.optimal_cost", csv::fmt(sol.optimal_cost));
      put("result.gains", detail::join(sol.gains));
      put("result.value_coeffs", detail::join(sol.value_coeffs));
      break;
    }
    case Method::clc: {
      RealSystemOracle oracle = RealSystemOracle::from_instance(e.instance);
      ClcSetup setup = e.clc_setup();
      std::ofstream trace;
      if (e.clc_trace && e.evaluator == Evaluator::grid) {
        trace = out.open("coupling_trace.csv");
        setup.coupling.trace = &trace;
      }
      const ClcResult r = execute_clc(e.clc_beta, setup, oracle);
      auto os = out.open("clc.csv");
      os << "t,xhat,model_state,real_state,control\n";
      for (int t = 0; t <= T; ++t) {
        os << t << ',' << (t == 0 ? std::string() : csv::fmt(r.coupling.candidate.points[t - 1]))
           << ',' << csv::fmt(r.coupling.model_traj.states[t]) << ','
           << csv::fmt(r.real_traj.states[t]) << ','
           << (t < T ? csv::fmt(r.controls[t]) : std::string()) << '\n';
      }
      auto summary = out.open("clc_summary.csv");
      summary << "J_r,riccati_optimal,residual,J_c,episodes\n";
      csv::row(summary, r.jr, reference, r.coupling.residual, r.coupling.proxy_cost,
               static_cast<unsigned long long>(r.episodes));
      report.phase_episodes["coupling"] = r.coupling.episodes_used;
      report.phase_episodes["final_rollout"] = r.episodes - r.coupling.episodes_used;
      put("result.J_r", csv::fmt(r.jr));
      put("result.riccati_optimal_cost", csv::fmt(reference));
      put("result.controls", detail::join(r.controls));
      put("result.residual", csv::fmt(r.coupling.residual));
      break;
    }
    case Method::learn_beta: {
      const BetaTrace trace = learn_beta(e.learn, detail::clc_evaluator(e));
      auto os = out.open("beta_trace.csv");
      write_beta_trace_csv(os, trace, reference);
      report.phase_episodes["learn_beta"] = trace.episodes();
      const BetaIterate& best = trace.best_iterate();
      put("result.best_k", std::to_string(best.k));
      put("result.best_beta", detail::join(best.beta.values));
      put("result.best_J_tilde", csv::fmt(best.value));
      put("result.riccati_optimal_cost", csv::fmt(reference));
      put("result.converged", trace.converged ? "true" : "false");
      put("result.diverged", trace.diverged ? "true" : "false");
      if (trace.diverged) put("result.divergence_report", trace.divergence_report);
      break;
    }
    case Method::pg:
    case Method::rs:
    case Method::q: {
      RealSystemOracle oracle = RealSystemOracle::from_instance(e.instance);
      LearningCurve curve;
      if (e.method == Method::pg) curve = run_pg(e.pg, oracle, e.cost, e.instance.x0);
      else if (e.method == Method::rs) curve = run_rs(e.rs, oracle, e.cost, e.instance.x0);
      else curve = run_q(e.q, oracle, e.cost, e.instance.x0, T);
      auto os = out.open("curve.csv");
      write_curve_header(os, true);
      write_curve_rows(os, to_string(e.method), e.seed, curve, reference);
      report.phase_episodes[to_string(e.method)] = oracle.episodes();
      put("result.final_greedy_Jr", csv::fmt(curve.points.back().greedy_jr));
      put("result.riccati_optimal_cost", csv::fmt(reference));
      if (!std::isnan(curve.final_gain)) put("result.final_gain", csv::fmt(curve.final_gain));
      break;
    }
    case Method::sweep_beta: {
      struct Row {
        double a_true, beta1, jr, ref;
        std::uint64_t episodes;
        std::string status;
      };
      std::vector<Row> rows;
      std::uint64_t episodes = 0;
      const ClcSetup setup = e.clc_setup();
      for (double a : e.sweep.a_true_values) {
        SystemInstance inst = e.instance;
        inst.a_true = a;
        const double ref = detail::riccati_reference(inst, e.cost);
        for (int i = 0; i < e.sweep.beta1_n; ++i) {
          const BetaVector beta{{e.sweep.beta1(i), terminal_beta(e.cost)}};
          RealSystemOracle oracle = RealSystemOracle::from_instance(inst);
          Row row{a, beta[0], std::numeric_limits<double>::quiet_NaN(), ref, 0, "ok"};
          try {
            row.jr = execute_clc(beta, setup, oracle).jr;
          } catch (const NoFixedPoint&) {
            row.status = "no_fixed_point";
          } catch (const DegenerateCost&) {
            row.status = "degenerate_cost";
          }
          row.episodes = oracle.episodes();
          episodes += row.episodes;
          rows.push_back(row);
        }
      }
      std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
        return std::pair(x.a_true, x.beta1) < std::pair(y.a_true, y.beta1);
      });
      auto os = out.open("sweep.csv");
      os << "a_true,beta_1,J_r,riccati_optimal,episodes,status\n";
      for (const Row& r : rows)
        csv::row(os, r.a_true, r.beta1, r.jr, r.ref, static_cast<unsigned long long>(r.episodes),
                 r.status);
      report.phase_episodes["sweep"] = episodes;
      break;
    }
    case Method::compare: {
      struct Row {
        std::string method;
        std::uint64_t seed;
        LearningCurve curve;
      };
      std::vector<Row> rows;
      std::map<std::string, std::vector<double>> to_target;
      const double target = 1.1 * reference;
      auto has = [&](const char* m) {
        return std::find(e.compare.methods.begin(), e.compare.methods.end(), m) !=
               e.compare.methods.end();
      };
      if (has("clc")) {
        // Deterministic in the seed: learned once, reported for every seed.
        const BetaTrace trace = learn_beta(e.learn, detail::clc_evaluator(e));
        const LearningCurve c = detail::best_so_far(detail::trace_curve(trace));
        report.phase_episodes["clc"] = trace.episodes();
        for (int s = 0; s < e.compare.seeds; ++s)
          rows.push_back({"clc", e.seed + static_cast<std::uint64_t>(s), c});
      }
      for (int s = 0; s < e.compare.seeds; ++s) {
        const std::uint64_t seed = e.seed + static_cast<std::uint64_t>(s);
        auto record = [&](const char* m, const LearningCurve& c, std::uint64_t used) {
          rows.push_back({m, seed, detail::best_so_far(c)});
          report.phase_episodes[m] += used;
        };
        if (has("pg")) {
          RealSystemOracle oracle = RealSystemOracle::from_instance(e.instance);
          PGConfig p = e.pg;
          p.seed = seed;
          const LearningCurve c = run_pg(p, oracle, e.cost, e.instance.x0);
          record("pg", c, oracle.episodes());
        }
        if (has("rs")) {
          RealSystemOracle oracle = RealSystemOracle::from_instance(e.instance);
          RSConfig r = e.rs;
          r.seed = seed;
          const LearningCurve c = run_rs(r, oracle, e.cost, e.instance.x0);
          record("rs", c, oracle.episodes());
        }
        if (has("q")) {
          RealSystemOracle oracle = RealSystemOracle::from_instance(e.instance);
          QLearnConfig q = e.q;
          q.seed = seed;
          const LearningCurve c = run_q(q, oracle, e.cost, e.instance.x0, T);
          record("q", c, oracle.episodes());
        }
      }
      std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
        return std::pair(x.method, x.seed) < std::pair(y.method, y.seed);
      });
      auto os = out.open("compare.csv");
      os << "method,seed,episodes,best_Jr,riccati_optimal\n";
      for (const Row& r : rows) {
        write_curve_rows(os, r.method, r.seed, r.curve, reference);
        to_target[r.method].push_back(detail::episodes_to_target(r.curve, target));
      }
      auto summary = out.open("compare_summary.csv");
      summary << "method,seeds,median_episodes_to_10pct,reached\n";
      for (const auto& [m, v] : to_target) {
        const auto reached = std::count_if(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        csv::row(summary, m, static_cast<unsigned long long>(v.size()), detail::median(v),
                 static_cast<unsigned long long>(reached));
      }
      put("result.riccati_optimal_cost", csv::fmt(reference));
      break;
    }
  }

  std::vector<std::pair<std::string, std::string>> head{
      {"method", to_string(e.method)},
      {"version", kVersion},
      {"seed", std::to_string(e.seed)},
      {"timestamp", detail::utc_timestamp()},
  };
  for (const std::string& k : e.source.keys()) head.emplace_back("config." + k, e.source.raw(k));
  for (const auto& [phase, n] : report.phase_episodes)
    head.emplace_back("episodes." + phase, std::to_string(n));
  head.emplace_back("total_episodes", std::to_string(report.total_episodes()));
  report.manifest.insert(report.manifest.begin(), head.begin(), head.end());

  auto os = out.open("manifest.txt");
  for (const auto& [k, v] : report.manifest) os << k << " = " << v << '\n';
  return report;
}

}  // namespace clc
