#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fisherflow/fisherflow.hpp"

namespace {

using namespace fisherflow;

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is.good()) fail(errc::io, "cannot read " + path);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

struct CommonOpts {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool lenient = false;
};

int run_scenario_file(const std::string& path, const CommonOpts& opts,
                      std::optional<runner::TaskConfig::Kind> expected_kind) {
  std::vector<std::string> errors;
  auto sc = runner::parse_scenario_collect(read_file(path), errors, !opts.lenient);
  if (!sc) {
    std::fprintf(stderr, "scenario validation failed:\n");
    for (const auto& e : errors) std::fprintf(stderr, "  - %s\n", e.c_str());
    return 2;
  }
  if (expected_kind && sc->task.kind != *expected_kind) {
    std::fprintf(stderr, "scenario '%s' does not carry the task this subcommand runs\n",
                 sc->name.c_str());
    return 2;
  }
  runner::RunOptions ropt;
  ropt.out_dir = opts.out;
  ropt.seed = opts.seed;
  runner::RunResult result = runner::run(*sc, ropt);
  if (result.exit_code != 0) {
    std::fprintf(stderr, "task failed: %s\n",
                 result.summary.contains("error")
                     ? result.summary["error"]["message"].get<std::string>().c_str()
                     : "unknown error");
    return result.exit_code;
  }
  const auto checks = runner::evaluate_checks(*sc, result);
  bool all = true;
  for (const auto& c : checks) {
    std::printf("%s %s: %s\n", c.passed ? "ok " : "BAD", c.name.c_str(), c.detail.c_str());
    all = all && c.passed;
  }
  std::printf("%s: done (outputs in %s)\n", sc->name.c_str(),
              opts.out ? opts.out->c_str() : sc->output.directory.c_str());
  return all ? 0 : 4;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"fisherflow: simulator and property checker for information-constrained "
               "quantum dynamics"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string out_buffer;
  std::uint64_t seed_buffer = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option_function<std::string>(
        "--out", [&](const std::string& v) { opts.out = v; }, "override the output directory");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { opts.seed = v; }, "override the scenario seed");
    cmd->add_flag("--lenient", opts.lenient, "warn on unknown scenario keys instead of failing");
    cmd->add_flag("--strict", [](std::int64_t) {}, "strict scenario parsing (default)");
  };

  std::string scenario_path, suite_dir;

  CLI::App* cmd_run = app.add_subcommand("run", "run a scenario file");
  cmd_run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  add_common(cmd_run);

  CLI::App* cmd_axioms =
      app.add_subcommand("check-axioms", "run an axiom-classification scenario");
  cmd_axioms->add_option("scenario", scenario_path, "scenario JSON file")->required();
  add_common(cmd_axioms);

  CLI::App* cmd_scan = app.add_subcommand("scan", "run a parameter-scan scenario");
  cmd_scan->add_option("scenario", scenario_path, "scenario JSON file")->required();
  add_common(cmd_scan);

  CLI::App* cmd_suite =
      app.add_subcommand("verify-suite", "run every scenario in a directory and check it");
  cmd_suite->add_option("dir", suite_dir, "directory of scenario JSON files")->required();
  add_common(cmd_suite);

  (void)out_buffer;
  (void)seed_buffer;

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) return run_scenario_file(scenario_path, opts, std::nullopt);
    if (cmd_axioms->parsed())
      return run_scenario_file(scenario_path, opts, runner::TaskConfig::Kind::axioms);
    if (cmd_scan->parsed())
      return run_scenario_file(scenario_path, opts, runner::TaskConfig::Kind::scan);
    if (cmd_suite->parsed()) {
      const std::string out_base = opts.out ? *opts.out : "out/verify_suite";
      const auto outcome = runner::verify_suite(suite_dir, out_base, !opts.lenient);
      std::printf("%d/%d scenarios passed\n", outcome.passed, outcome.scenarios);
      return outcome.exit_code;
    }
  } catch (const error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", errc_name(e.code()), e.what());
    switch (e.code()) {
      case errc::validation: return 2;
      default: return 3;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
