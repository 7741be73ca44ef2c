#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "clc/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::int64_t seed = -1;
  std::string out;
};

int dispatch(clc::Method method, const Options& opt) {
  clc::Config cfg = clc::Config::load(opt.config);
  if (opt.seed >= 0) cfg.set("seed", std::to_string(opt.seed));
  if (!opt.out.empty()) cfg.set("output", opt.out);
  const clc::ExperimentConfig exp = clc::load_experiment(cfg, method);
  const clc::RunReport report = clc::run(exp);
  for (const auto& [k, v] : report.manifest)
    if (k.rfind("result.", 0) == 0 || k == "total_episodes") std::cout << k << " = " << v << '\n';
  for (const std::string& f : report.files) std::cout << "wrote " << f << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Combined learning and control experiments for scalar LQ systems"};
  app.set_version_flag("--version", std::string(clc::kVersion));
  app.require_subcommand(1);

  Options opt;
  const std::pair<clc::Method, const char*> commands[] = {
      {clc::Method::riccati, "Known-dynamics Riccati solution"},
      {clc::Method::clc, "Run the CLC controller for a fixed beta"},
      {clc::Method::learn_beta, "Learn beta_1..beta_{T-1} by finite-difference descent"},
      {clc::Method::pg, "Policy-gradient baseline"},
      {clc::Method::rs, "Random-search baseline"},
      {clc::Method::q, "Tabular Q-learning baseline"},
      {clc::Method::sweep_beta, "Sweep beta_1 across several true systems"},
      {clc::Method::compare, "Sample-efficiency comparison of all learners"},
  };
  for (const auto& [method, help] : commands) {
    CLI::App* sub = app.add_subcommand(clc::to_string(method), help);
    sub->add_option("--config", opt.config, "Experiment config file")->required();
    sub->add_option("--seed", opt.seed, "Override the config seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", opt.out, "Override the output directory");
  }

  CLI11_PARSE(app, argc, argv);
  for (const auto& [method, help] : commands) {
    if (!app.got_subcommand(clc::to_string(method))) continue;
    try {
      return dispatch(method, opt);
    } catch (const clc::ConfigError& e) {
      std::cerr << "error: config: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
