// declab - command line front end for the decoding laboratory.
//
// Subcommands:
//   run             execute a configured experiment and write reports
//   validate        check a config file and the inputs it references
//   spec-exactness  enumerate speculative vs. direct sampling exactly
//   mock-nli        serve the mock entailment scorer over HTTP

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "declab/declab.hpp"

namespace {

using namespace declab;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out_dir, std::optional<int> workers) {
  harness::ExperimentConfig config = harness::load_config(config_path);
  if (seed) config.master_seed = *seed;
  if (out_dir) config.out_dir = *out_dir;
  if (workers) config.workers = *workers;
  config.validate();
  harness::ensure_writable(config.out_dir);

  harness::MetricReport report = harness::run_experiment(config);
  for (const auto& failure : report.failures) std::cerr << "warning: " << failure << "\n";
  const auto written = harness::emit_outputs(report, config.out_dir);

  std::cout << "prompts x decoders: " << report.rows.size() << " rows";
  if (!report.failures.empty()) std::cout << ", " << report.failures.size() << " failed";
  std::cout << "\n";
  for (const auto& path : written) std::cout << "wrote " << path.string() << "\n";
  if (report.rows.empty()) {
    std::cerr << "error: every prompt x decoder cell failed\n";
    return 1;
  }
  return 0;
}

int cmd_validate(const std::string& config_path) {
  harness::ExperimentConfig config = harness::load_config(config_path);
  config.validate();
  auto check_file = [](const std::string& what, const std::string& path) {
    if (!std::filesystem::is_regular_file(path))
      throw InputError("config: " + what + " '" + path + "' does not exist");
  };
  check_file("dataset", config.dataset);
  check_file("target_model.path", config.target_model.path);
  if (config.draft_model) check_file("draft_model.path", config.draft_model->path);
  if (config.pass_fail) check_file("pass_fail.path", config.pass_fail->path);
  std::cout << "config ok: " << config_path << "\n";
  return 0;
}

int cmd_spec_exactness(const std::string& target_path, const std::string& draft_path,
                       const std::string& prompt, int gamma, std::size_t horizon, double tau,
                       double top_p, double tolerance) {
  lm::TabularMarkovModel target = lm::load_tabular(target_path);
  lm::TabularMarkovModel draft = lm::load_tabular(draft_path);

  lm::SamplingParams params;
  params.tau = tau;
  if (top_p > 0.0 && top_p < 1.0) params.top_p = top_p;

  const std::vector<lm::TokenId> prompt_tokens = target.vocab().tokenize(prompt);
  const auto direct =
      oracle::exact_autoregressive_distribution(target, prompt_tokens, params, horizon);
  const auto spec = oracle::exact_speculative_distribution(target, draft, prompt_tokens, params,
                                                           gamma, horizon);

  const double max_diff = oracle::max_abs_difference(direct, spec);
  const double tv = oracle::total_variation(direct, spec);
  std::printf("sequences (direct):      %zu\n", direct.size());
  std::printf("sequences (speculative): %zu\n", spec.size());
  std::printf("max |dp|:                %.3e\n", max_diff);
  std::printf("total variation:         %.3e\n", tv);
  if (max_diff < tolerance) {
    std::printf("PASS (tolerance %.1e)\n", tolerance);
    return 0;
  }
  std::printf("FAIL (tolerance %.1e)\n", tolerance);
  return 1;
}

int cmd_mock_nli(const std::string& host, int port, const std::string& fixtures) {
  nli::MockNliServer server;
  if (!fixtures.empty()) server.load_fixtures(fixtures);
  std::cout << "mock-nli listening on http://" << host << ":" << port << "\n";
  server.run_blocking(host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"declab - decoding strategies and semantic uncertainty at desk scale"};
  app.require_subcommand(0, 1);
  bool print_default_config = false;
  app.add_flag("--print-default-config", print_default_config,
               "Print a config template to stdout and exit");

  auto* run = app.add_subcommand("run", "Run a configured experiment");
  std::string run_config;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_out;
  std::optional<int> run_workers;
  run->add_option("--config", run_config, "Experiment config JSON")->required();
  run->add_option("--seed", run_seed, "Override master_seed");
  run->add_option("--out", run_out, "Override out_dir");
  run->add_option("--workers", run_workers, "Override worker count");

  auto* validate = app.add_subcommand("validate", "Validate a config and its inputs");
  std::string validate_config;
  validate->add_option("--config", validate_config, "Experiment config JSON")->required();

  auto* exact = app.add_subcommand(
      "spec-exactness", "Compare exact speculative and direct sampling distributions");
  std::string exact_target, exact_draft, exact_prompt;
  int exact_gamma = 2;
  std::size_t exact_horizon = 3;
  double exact_tau = 1.0, exact_top_p = 1.0, exact_tolerance = 1e-9;
  exact->add_option("--target", exact_target, "Target model table")->required();
  exact->add_option("--draft", exact_draft, "Draft model table")->required();
  exact->add_option("--prompt", exact_prompt, "Prompt text (may be empty)");
  exact->add_option("--gamma", exact_gamma, "Draft window");
  exact->add_option("--horizon", exact_horizon, "Enumeration horizon in tokens");
  exact->add_option("--tau", exact_tau, "Sampling temperature");
  exact->add_option("--top-p", exact_top_p, "Nucleus mass (1.0 disables)");
  exact->add_option("--tolerance", exact_tolerance, "Max allowed |dp|");

  auto* mock = app.add_subcommand("mock-nli", "Serve the mock entailment scorer");
  std::string mock_host = "127.0.0.1";
  int mock_port = 8080;
  std::string mock_fixtures;
  mock->add_option("--host", mock_host, "Bind address");
  mock->add_option("--port", mock_port, "Bind port");
  mock->add_option("--fixtures", mock_fixtures, "Fixture JSON for canned verdicts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (print_default_config) {
      std::cout << harness::config_to_json(harness::ExperimentConfig{}).dump(2) << "\n";
      return 0;
    }
    if (run->parsed()) return cmd_run(run_config, run_seed, run_out, run_workers);
    if (validate->parsed()) return cmd_validate(validate_config);
    if (exact->parsed())
      return cmd_spec_exactness(exact_target, exact_draft, exact_prompt, exact_gamma,
                                exact_horizon, exact_tau, exact_top_p, exact_tolerance);
    if (mock->parsed()) return cmd_mock_nli(mock_host, mock_port, mock_fixtures);
    std::cout << app.help();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
