#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "clc/beta_learn.hpp"
#include "clc/coupling.hpp"
#include "clc/riccati.hpp"
#include "oracles.hpp"

using namespace clc;

namespace {
const SystemInstance kExample{2.0, 1.0, 1.0, 1.0, 0.5, 2};
const CostSchedule kExampleCost{{0.0, 1.0, 1.0}, {1.0, 1.0}};

ClcSetup example_setup(Evaluator ev) {
  ClcSetup s;
  s.model = kExample.model_dynamics();
  s.cost = kExampleCost;
  s.x0 = kExample.x0;
  s.evaluator = ev;
  return s;
}
}  // namespace

TEST(Coupling, ExampleInstanceAtOptimalBetaGrid) {
  auto oracle = RealSystemOracle::from_instance(kExample);
  const ClcResult r = execute_clc({{-1.5, -1.0}}, example_setup(Evaluator::grid), oracle);
  const double du = GridSpec{}.u.spacing();
  EXPECT_NEAR(r.controls[0], oracle::kU0, du);
  EXPECT_NEAR(r.controls[1], oracle::kU1, du);
  EXPECT_NEAR(r.coupling.candidate.points[0], oracle::kX1, GridSpec{}.xhat.spacing());
  EXPECT_NEAR(r.coupling.candidate.points[1], oracle::kX2, GridSpec{}.xhat.spacing());
  EXPECT_LE(r.jr, 1.01 * oracle::kOptimalCost);
  EXPECT_EQ(r.episodes, oracle.episodes());
  EXPECT_EQ(r.episodes, r.coupling.episodes_used + 1);
}

TEST(Coupling, ClosedFormMatchesHandDerivedObjective) {
  for (double beta1 : {-1.9, -1.5, -1.0, 0.0, 2.0}) {
    auto oracle = RealSystemOracle::from_instance(kExample);
    const ClcResult r = execute_clc({{beta1, -1.0}}, example_setup(Evaluator::closed_form), oracle);
    EXPECT_NEAR(r.jr, oracle::example_jtilde(beta1), 1e-9) << beta1;
    EXPECT_NEAR(r.controls[0], oracle::example_u0(beta1), 1e-9) << beta1;
    EXPECT_LE(r.coupling.residual, 1e-9);
  }
}

TEST(Coupling, GridObjectiveTracksClosedForm) {
  for (double beta1 : {-1.5, 0.0, 2.0}) {
    auto o1 = RealSystemOracle::from_instance(kExample);
    const double grid = execute_clc({{beta1, -1.0}}, example_setup(Evaluator::grid), o1).jr;
    EXPECT_NEAR(grid, oracle::example_jtilde(beta1), 0.05) << beta1;
  }
}

TEST(Coupling, MatchedDynamicsZeroPenaltyGivesModelOptimum) {
  const SystemInstance inst{1.0, 1.0, 1.0, 1.0, 0.5, 2};
  auto oracle = RealSystemOracle::from_instance(inst);
  ClcSetup s = example_setup(Evaluator::grid);
  const ClcResult r = execute_clc({{0.0, 0.0}}, s, oracle);
  const auto sol = riccati::solve(1.0, 1.0, kExampleCost, 0.5);
  const Trajectory opt = riccati::optimal_policy_controls(sol, 1.0, 1.0, 0.5);
  for (int t = 0; t < 2; ++t) {
    EXPECT_NEAR(r.coupling.candidate.points[t], opt.states[t + 1], s.grids.xhat.spacing());
    EXPECT_NEAR(r.controls[t], opt.controls[t], s.grids.u.spacing());
  }
}

TEST(Coupling, NoEffortCostDeadbeatExample) {
  const SystemInstance inst{2.0, 1.0, 1.0, 1.0, 0.5, 2};
  const CostSchedule cost{{1.0, 1.0, 1.0}, {0.0, 0.0}};
  const BetaVector beta = inversion_beta(cost, 1e-6);
  for (Evaluator ev : {Evaluator::grid, Evaluator::closed_form}) {
    auto oracle = RealSystemOracle::from_instance(inst);
    ClcSetup s = example_setup(ev);
    s.cost = cost;
    const ClcResult r = execute_clc(beta, s, oracle);
    EXPECT_NEAR(r.controls[0], -1.0, s.grids.u.spacing()) << to_string(ev);
    EXPECT_NEAR(r.controls[1], 0.0, s.grids.u.spacing()) << to_string(ev);
    EXPECT_NEAR(r.real_traj.states[1], 0.0, s.grids.u.spacing());
    EXPECT_NEAR(r.real_traj.states[2], 0.0, 2 * s.grids.u.spacing());
  }
}

TEST(Coupling, TraceHasOneRowPerEvaluatedCandidate) {
  auto oracle = RealSystemOracle::from_instance(kExample);
  ClcSetup s = example_setup(Evaluator::grid);
  s.grids.xhat = {-1.0, 1.0, 9};
  std::stringstream trace;
  s.coupling.trace = &trace;
  const ClcResult r = execute_clc({{-1.0, -1.0}}, s, oracle);
  std::string line;
  std::getline(trace, line);
  EXPECT_EQ(line, "candidate,xhat_1,xhat_2,residual,J_c,J_r");
  std::size_t rows = 0;
  while (std::getline(trace, line)) ++rows;
  EXPECT_EQ(rows, r.coupling.candidates_evaluated);
  EXPECT_GE(rows, 81u);
  // Infeasible candidates spend no episode.
  EXPECT_LE(r.coupling.episodes_used, r.coupling.candidates_evaluated);
}

TEST(Coupling, RefinementNeverIncreasesResidual) {
  for (double beta1 : {-1.2, 0.5}) {
    ClcSetup s = example_setup(Evaluator::grid);
    s.grids.xhat = {-1.0, 1.0, 9};
    auto o1 = RealSystemOracle::from_instance(kExample);
    auto o2 = RealSystemOracle::from_instance(kExample);
    s.coupling.refine = false;
    s.coupling.threshold_factor = 100;
    const double plain = execute_clc({{beta1, -1.0}}, s, o1).coupling.residual;
    s.coupling.refine = true;
    const double refined = execute_clc({{beta1, -1.0}}, s, o2).coupling.residual;
    EXPECT_LE(refined, plain);
  }
}

TEST(Coupling, ResidualAboveThresholdIsReported) {
  ClcSetup s = example_setup(Evaluator::grid);
  auto oracle = RealSystemOracle::from_instance(kExample);
  try {
    execute_clc({{-3.0, -1.0}}, s, oracle);
    FAIL() << "expected NoFixedPoint";
  } catch (const NoFixedPoint& e) {
    EXPECT_GT(e.best_residual(), 2 * s.grids.xhat.spacing());
  }
}

TEST(Coupling, ReevaluationReproducesResidual) {
  ClcSetup s = example_setup(Evaluator::grid);
  const ProxyProblem problem{s.model, s.cost, {{-1.5, -1.0}}, s.grids};
  const PolicyTable table = build_policy_table(problem);
  auto oracle = RealSystemOracle::from_instance(kExample);
  const CouplingSolution sol = solve_coupled(table, oracle, s.x0);
  const auto before = oracle.episodes();
  EXPECT_DOUBLE_EQ(reevaluate_residual(table, oracle, s.x0, sol), sol.residual);
  EXPECT_EQ(oracle.episodes(), before + 1);
}
