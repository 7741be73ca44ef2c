#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "clc/harness.hpp"

using namespace clc;
namespace fs = std::filesystem;

namespace {

const char* kExampleBlock =
    "instance.a_true = 2\n"
    "instance.b_true = 1\n"
    "instance.a_model = 1\n"
    "instance.b_model = 1\n"
    "instance.x0 = 0.5\n"
    "cost.q = 0, 1, 1\n"
    "cost.r = 1, 1\n";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("clc_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> manifest(const fs::path& dir) {
  std::map<std::string, std::string> m;
  std::ifstream in(dir / "manifest.txt");
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    m[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return m;
}

RunReport run_text(const std::string& text, Method m, const fs::path& out) {
  Config cfg = Config::parse(text);
  cfg.set("output", out.string());
  return run(load_experiment(cfg, m));
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndLists) {
  const Config c = Config::parse("# comment\n a.b = 1.5 # trailing\n\nlist = 1, -2.5 ,3\nflag = true");
  EXPECT_DOUBLE_EQ(c.get_double("a.b"), 1.5);
  EXPECT_EQ(c.get_list("list"), (std::vector<double>{1, -2.5, 3}));
  EXPECT_TRUE(c.get_bool("flag", false));
  EXPECT_EQ(c.keys(), (std::vector<std::string>{"a.b", "list", "flag"}));
}

TEST(Config, Errors) {
  EXPECT_THROW(Config::parse("a = 1\na = 2"), ConfigError);
  EXPECT_THROW(Config::parse("just words"), ConfigError);
  EXPECT_THROW(Config::parse("x = abc").get_double("x"), ConfigError);
  EXPECT_THROW(Config::parse("x = 1,,2").get_list("x"), ConfigError);
  EXPECT_THROW(Config::parse("x = 1.5").get_int("x"), ConfigError);
}

TEST(Experiment, UnknownKeyIsAnError) {
  const std::string text = std::string(kExampleBlock) + "clc.beta = -1.5, -1\nclc.betta = 0\n";
  try {
    load_experiment(Config::parse(text), Method::clc);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("clc.betta"), std::string::npos);
  }
}

TEST(Experiment, MissingBetaNamesTheKey) {
  try {
    load_experiment(Config::parse(kExampleBlock), Method::clc);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("clc.beta"), std::string::npos);
  }
}

TEST(Experiment, ForeignSectionAndMethodMismatchAreErrors) {
  EXPECT_THROW(load_experiment(Config::parse(std::string(kExampleBlock) + "pg.sigma = 0.1\n"),
                               Method::riccati),
               ConfigError);
  EXPECT_THROW(load_experiment(Config::parse(std::string(kExampleBlock) + "method = pg\n"),
                               Method::riccati),
               ConfigError);
  EXPECT_THROW(parse_method("dqn"), ConfigError);
  EXPECT_THROW(load_experiment(Config::parse(std::string(kExampleBlock) +
                                             "learn_beta.beta_init = 2, -0.5\n"),
                               Method::learn_beta),
               ConfigError);
}

TEST(Run, RiccatiManifest) {
  const fs::path out = scratch("riccati");
  run_text(kExampleBlock, Method::riccati, out);
  auto m = manifest(out);
  EXPECT_EQ(m["result.optimal_cost"], "0.75");
  EXPECT_EQ(m["result.gains"], "-1.5, -1");
  EXPECT_EQ(m["total_episodes"], "0");
  EXPECT_EQ(m["method"], "riccati");
  EXPECT_EQ(m["config.instance.a_true"], "2");
  EXPECT_TRUE(m.count("timestamp"));
  EXPECT_TRUE(m.count("version"));
}

TEST(Run, ClcReportsCostAndLedger) {
  const fs::path out = scratch("clc");
  const RunReport r =
      run_text(std::string(kExampleBlock) + "clc.beta = -1.5, -1\nclc.trace = true\n", Method::clc, out);
  auto m = manifest(out);
  EXPECT_NEAR(std::stod(m["result.J_r"]), 0.75, 0.0075);
  EXPECT_EQ(std::stoull(m["total_episodes"]),
            std::stoull(m["episodes.coupling"]) + std::stoull(m["episodes.final_rollout"]));
  EXPECT_EQ(r.total_episodes(), std::stoull(m["total_episodes"]));
  EXPECT_TRUE(fs::exists(out / "coupling_trace.csv"));
  const std::string summary = slurp(out / "clc_summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "J_r,riccati_optimal,residual,J_c,episodes");
}

TEST(Run, SeedDeterminismAndLedgerConservation) {
  const std::string text = std::string(kExampleBlock) +
                           "seed = 4\ncompare.seeds = 2\ncompare.methods = pg, rs, q\n"
                           "learn_beta.beta_init = 2, -1\npg.max_updates = 30\n"
                           "rs.max_updates = 30\nq.max_episodes = 3000\n";
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_text(text, Method::compare, a);
  run_text(text, Method::compare, b);
  EXPECT_EQ(slurp(a / "compare.csv"), slurp(b / "compare.csv"));
  EXPECT_EQ(slurp(a / "compare_summary.csv"), slurp(b / "compare_summary.csv"));
  auto m = manifest(a);
  std::uint64_t sum = 0;
  for (const auto& [k, v] : m)
    if (k.rfind("episodes.", 0) == 0) sum += std::stoull(v);
  EXPECT_EQ(sum, std::stoull(m["total_episodes"]));
  // Two seeds x (31 PG greedy + 300 PG exploratory) etc.: check one method directly.
  EXPECT_EQ(std::stoull(m["episodes.rs"]), 2u * (1 + 30 * 3));
}

TEST(Run, ZeroBudgetCompareHasOnlyInitialPoints) {
  const std::string text = std::string(kExampleBlock) +
                           "compare.seeds = 1\nlearn_beta.beta_init = 2, -1\n"
                           "learn_beta.max_iters = 0\npg.max_updates = 0\n"
                           "rs.max_updates = 0\nq.max_episodes = 0\n";
  const fs::path out = scratch("zero");
  run_text(text, Method::compare, out);
  std::istringstream csv(slurp(out / "compare.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "method,seed,episodes,best_Jr,riccati_optimal");
  std::map<std::string, int> rows;
  while (std::getline(csv, line)) ++rows[line.substr(0, line.find(','))];
  EXPECT_EQ(rows, (std::map<std::string, int>{{"clc", 1}, {"pg", 1}, {"q", 1}, {"rs", 1}}));
}

TEST(Run, ReportedCostsNeverBeatTheReference) {
  const fs::path out = scratch("ref");
  run_text(std::string(kExampleBlock) + "q.max_episodes = 3000\n", Method::q, out);
  std::istringstream csv(slurp(out / "curve.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "method,seed,episodes,greedy_Jr,riccati_optimal");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string f[5];
    for (auto& s : f) std::getline(ss, s, ',');
    EXPECT_GE(std::stod(f[3]), std::stod(f[4]) - 1e-9);
    ++rows;
  }
  EXPECT_GT(rows, 1);
}

TEST(Run, SweepRecordsReferenceAndStatus) {
  const std::string text = std::string(kExampleBlock) +
                           "evaluator.kind = closed_form\nsweep.a_true_values = 1, 2\n"
                           "sweep.beta1_min = -2.5\nsweep.beta1_max = 0.5\nsweep.beta1_n = 7\n";
  const fs::path out = scratch("sweep");
  run_text(text, Method::sweep_beta, out);
  std::istringstream csv(slurp(out / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "a_true,beta_1,J_r,riccati_optimal,episodes,status");
  int ok = 0, degenerate = 0;
  bool matched_touches_reference = false;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string f[6];
    for (auto& s : f) std::getline(ss, s, ',');
    if (f[5] == "ok") {
      ++ok;
      EXPECT_GE(std::stod(f[2]), std::stod(f[3]) - 1e-9);
      // Matched dynamics with no penalty: the model-optimal controller is optimal.
      if (f[0] == "1" && f[1] == "0")
        matched_touches_reference = std::abs(std::stod(f[2]) - std::stod(f[3])) < 1e-9;
    } else {
      EXPECT_EQ(f[5], "degenerate_cost");
      ++degenerate;
    }
  }
  EXPECT_TRUE(matched_touches_reference);
  EXPECT_EQ(ok + degenerate, 14);
  EXPECT_GT(degenerate, 0);
}
