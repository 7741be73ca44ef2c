#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "clc/beta_learn.hpp"

using namespace clc;

namespace {
BetaEvaluator analytic(std::function<double(const BetaVector&)> f, std::uint64_t episodes = 1) {
  return [f, episodes](const BetaVector& b) { return Evaluation{f(b), episodes}; };
}
}  // namespace

TEST(BetaRules, InversionBeta) {
  const CostSchedule cost{{0.0, 1.0, 1.0}, {0.0, 0.0}};
  const BetaVector b = inversion_beta(cost, 1e-6);
  EXPECT_EQ(b.values, (std::vector<double>{-1.0 + 1e-6, -1.0 + 1e-6}));
  const CostSchedule flat{{2.0, 2.0, 2.0, 2.0}, {0, 0, 0}};
  for (double v : inversion_beta(flat, 0.5).values) EXPECT_EQ(v, -1.5);
  EXPECT_THROW(inversion_beta(cost, 0.0), InvalidInput);
  EXPECT_THROW(inversion_beta(cost, -1e-3), InvalidInput);
}

TEST(BetaRules, TerminalBeta) {
  EXPECT_EQ(terminal_beta({{0, 1, 1}, {1, 1}}), -1.0);
  EXPECT_EQ(terminal_beta({{0, 5}, {1}}), -5.0);
  EXPECT_EQ(terminal_beta({{0, 0.25}, {1}}), -0.25);
}

TEST(FdGradient, ForwardDifferenceBiasOnQuadratic) {
  const double c = 0.7, delta = 1e-3;
  const FdResult fd =
      fd_gradient({{2.0}}, delta, analytic([c](const BetaVector& b) { return (b[0] - c) * (b[0] - c); }));
  EXPECT_NEAR(fd.gradient[0], 2 * (2.0 - c) + delta, 1e-9);
  EXPECT_EQ(fd.episodes, 2u);
}

TEST(FdGradient, ConstantGivesZero) {
  const FdResult fd = fd_gradient({{1.0, 2.0, 3.0}}, 0.1, analytic([](const BetaVector&) { return 4.0; }, 3));
  for (double g : fd.gradient) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(fd.episodes, 12u);
}

TEST(FdGradient, ClampedTerminalIsNotProbed) {
  int calls = 0;
  BetaEvaluator ev = [&calls](const BetaVector& b) {
    ++calls;
    return Evaluation{b[0] * b[0] + b[1] * b[1] + b[2] * b[2], 5};
  };
  const FdResult fd = fd_gradient({{1.0, 1.0, 1.0}}, 1e-4, ev, true);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(fd.episodes, 15u);
  EXPECT_EQ(fd.gradient[2], 0.0);
}

TEST(FdGradient, ConsistencyOnAnalyticFunctions) {
  struct Case {
    std::function<double(double, double)> f;
    std::function<double(double, double)> dx, dy;
    double curvature;  // bound on |second derivative| near the probe point
  };
  const Case cases[] = {
      {[](double x, double y) { return 3 * x * x + x * y - 2 * y * y; },
       [](double x, double y) { return 6 * x + y; }, [](double x, double y) { return x - 4 * y; }, 6},
      {[](double x, double y) { return std::sin(x) * std::cos(y); },
       [](double x, double y) { return std::cos(x) * std::cos(y); },
       [](double x, double y) { return -std::sin(x) * std::sin(y); }, 1},
      {[](double x, double y) { return std::exp(0.5 * x) + std::log(2 + y * y); },
       [](double x, double) { return 0.5 * std::exp(0.5 * x); },
       [](double, double y) { return 2 * y / (2 + y * y); }, 1},
  };
  for (const Case& c : cases) {
    for (double delta : {1e-2, 1e-3, 1e-4}) {
      for (auto [x, y] : {std::pair{0.3, -0.8}, std::pair{-1.1, 0.4}}) {
        const FdResult fd = fd_gradient(
            {{x, y}}, delta, analytic([&c](const BetaVector& b) { return c.f(b[0], b[1]); }));
        EXPECT_LE(std::abs(fd.gradient[0] - c.dx(x, y)), c.curvature * delta);
        EXPECT_LE(std::abs(fd.gradient[1] - c.dy(x, y)), c.curvature * delta);
      }
    }
  }
}

TEST(FdGradient, ProbeFailureNamesTheProbe) {
  BetaEvaluator ev = [](const BetaVector& b) {
    if (b[1] > 0.5) throw NoFixedPoint("no fixed point", 3.0);
    return Evaluation{0.0, 1};
  };
  try {
    fd_gradient({{0.0, 0.45}}, 0.1, ev);
    FAIL();
  } catch (const ProbeError& e) {
    EXPECT_EQ(e.probe(), 1);
    EXPECT_NE(std::string(e.what()).find("beta_2"), std::string::npos);
  }
  EXPECT_THROW(fd_gradient({{0.0}}, 0.0, ev), InvalidInput);
}

TEST(LearnBeta, ConvergesOnQuadratic) {
  BetaLearnConfig cfg;
  cfg.beta_init = {{2.0, -1.0}};
  cfg.step.alpha = 0.3;
  cfg.fd_delta = 1e-7;
  cfg.max_iters = 200;
  const BetaTrace tr =
      learn_beta(cfg, analytic([](const BetaVector& b) { return (b[0] + 1.5) * (b[0] + 1.5); }));
  EXPECT_NEAR(tr.iterates.back().beta[0], -1.5, 1e-3);
  EXPECT_TRUE(tr.converged);
  for (const BetaIterate& it : tr.iterates) EXPECT_EQ(it.beta[1], -1.0);
  for (std::size_t i = 1; i < tr.iterates.size(); ++i)
    EXPECT_LE(tr.iterates[i].value, tr.iterates[i - 1].value + 1e-15);
}

TEST(LearnBeta, DescentOnConvexQuadraticsForAllowedSteps) {
  for (double alpha : {0.05, 0.2, 0.45}) {
    for (double c : {-2.0, 0.0, 3.0}) {
      BetaLearnConfig cfg;
      cfg.beta_init = {{1.0}};
      cfg.fix_terminal = false;
      cfg.step.alpha = alpha;
      cfg.fd_delta = 1e-6;
      cfg.max_iters = 40;
      const BetaTrace tr =
          learn_beta(cfg, analytic([c](const BetaVector& b) { return (b[0] - c) * (b[0] - c); }));
      for (std::size_t i = 1; i < tr.iterates.size(); ++i)
        EXPECT_LE(tr.iterates[i].value, tr.iterates[i - 1].value + 1e-12);
    }
  }
}

TEST(LearnBeta, ZeroStepKeepsInitialBeta) {
  BetaLearnConfig cfg;
  cfg.beta_init = {{2.0, -1.0}};
  cfg.step.alpha = 0.0;
  cfg.max_iters = 5;
  const BetaTrace tr = learn_beta(cfg, analytic([](const BetaVector& b) { return b[0] * b[0]; }));
  for (const BetaIterate& it : tr.iterates) EXPECT_EQ(it.beta.values, cfg.beta_init.values);
}

TEST(LearnBeta, EpisodeBookkeeping) {
  BetaLearnConfig cfg;
  cfg.beta_init = {{2.0, 0.5, -1.0}};
  cfg.max_iters = 7;
  cfg.step.alpha = 0.1;
  std::uint64_t reported = 0;
  BetaEvaluator ev = [&reported](const BetaVector& b) {
    const std::uint64_t n = 3 + static_cast<std::uint64_t>(std::abs(b[0]) * 10) % 5;
    reported += n;
    return Evaluation{b[0] * b[0] + b[1] * b[1], n};
  };
  const BetaTrace tr = learn_beta(cfg, ev);
  EXPECT_EQ(tr.episodes(), reported);
  for (std::size_t i = 1; i < tr.iterates.size(); ++i)
    EXPECT_GE(tr.iterates[i].episodes_cumulative, tr.iterates[i - 1].episodes_cumulative);
  EXPECT_EQ(tr.iterates.size(), 8u);
}

TEST(LearnBeta, DivergenceGuardStopsAndKeepsBest) {
  BetaLearnConfig cfg;
  cfg.beta_init = {{1.0}};
  cfg.fix_terminal = false;
  cfg.step.alpha = 3.0;  // overshoots x^2 by a factor 5 per step
  cfg.fd_delta = 1e-6;
  cfg.max_iters = 50;
  const BetaTrace tr = learn_beta(cfg, analytic([](const BetaVector& b) { return b[0] * b[0]; }));
  EXPECT_TRUE(tr.diverged);
  EXPECT_LT(tr.iterates.size(), 10u);
  EXPECT_EQ(tr.best, 0u);
  EXPECT_FALSE(tr.divergence_report.empty());
}

TEST(LearnBeta, DiminishingSchedule) {
  const StepSchedule s{1.0, 2.0};
  EXPECT_DOUBLE_EQ(s.at(0), 1.0);
  EXPECT_DOUBLE_EQ(s.at(2), 0.5);
  EXPECT_DOUBLE_EQ(StepSchedule{0.3}.at(100), 0.3);
}

TEST(LearnBeta, TraceCsv) {
  BetaLearnConfig cfg;
  cfg.beta_init = {{0.5, -1.0}};
  cfg.max_iters = 1;
  cfg.step.alpha = 0.25;
  const BetaTrace tr = learn_beta(cfg, analytic([](const BetaVector& b) { return b[0] * b[0]; }, 2));
  std::ostringstream os;
  write_beta_trace_csv(os, tr);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "k,beta_1,beta_2,J_tilde,episodes_cumulative");
  std::ostringstream with_ref;
  write_beta_trace_csv(with_ref, tr, 0.75);
  EXPECT_NE(with_ref.str().find(",riccati_optimal\n"), std::string::npos);
  EXPECT_NE(with_ref.str().find("\n0,0.5,-1,0.25,4,0.75\n"), std::string::npos);
}
