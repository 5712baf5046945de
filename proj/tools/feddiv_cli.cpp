// feddiv command line: run, sweep, compare, rf, theorem-check.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "feddiv/arch/arch.hpp"
#include "feddiv/harness/harness.hpp"

namespace {

using namespace feddiv;

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

void report(const Error& e) { std::cerr << "error: " << e.what() << '\n'; }

int run_config(const std::string& path, std::optional<harness::RunKind> require, bool force_theorem) {
  harness::ExperimentConfig config;
  try {
    config = harness::parse_config(path);
    if (force_theorem) config.kind = harness::RunKind::theorem_check;
    if (require && config.kind != *require)
      throw ConfigError(std::string("expected kind '") + harness::run_kind_name(*require) + "'", "kind");
  } catch (const Error& e) {
    report(e);
    return kConfigError;
  }
  const auto dir = harness::run(config);
  std::cout << dir.string() << '\n';
  if (force_theorem) {
    std::ifstream in(dir / "summary.json");
    if (in) std::cout << in.rdbuf();
  }
  return 0;
}

int compare(const std::vector<std::string>& dirs, std::optional<double> threshold, const std::string& out) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const auto comparison = harness::compare_sweep(paths, threshold);
  if (out.empty())
    std::cout << harness::comparison_csv(comparison);
  else
    harness::write_comparison_csv(out, comparison);
  for (const auto& v : comparison.verdicts) std::cerr << v.verdict << " (spearman " << v.spearman << ")\n";
  return 0;
}

int rf(const std::string& path, bool as_json) {
  nn::ModelSpec spec;
  try {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file", path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("invalid JSON: ") + e.what(), path);
    }
    spec = arch::model_spec_from_json(j);
    nn::validate_structure(spec);
  } catch (const Error& e) {
    report(e);
    return kConfigError;
  }
  const auto report = arch::receptive_field(spec);
  if (as_json)
    std::cout << arch::to_json(report).dump(2) << '\n';
  else
    std::cout << arch::render_table(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated divergence laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config");
  run_cmd->add_option("config", config_path, "Experiment JSON")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a sweep config and compare its variants");
  sweep_cmd->add_option("config", config_path, "Sweep JSON")->required();

  std::vector<std::string> dirs;
  std::optional<double> threshold;
  std::string out;
  auto* compare_cmd = app.add_subcommand("compare", "Compare completed sweep run directories");
  compare_cmd->add_option("dirs", dirs, "Run directories")->required();
  compare_cmd->add_option("--threshold", threshold, "Accuracy threshold for rounds-to-threshold");
  compare_cmd->add_option("--out", out, "Write the comparison CSV here instead of stdout");

  std::string model_path;
  bool as_json = false;
  auto* rf_cmd = app.add_subcommand("rf", "Receptive field of every layer of a model");
  rf_cmd->add_option("model", model_path, "Model JSON")->required();
  rf_cmd->add_flag("--json", as_json, "Print JSON instead of a table");

  auto* theorem_cmd = app.add_subcommand("theorem-check", "Monte-Carlo check of the gradient decomposition");
  theorem_cmd->add_option("config", config_path, "Experiment JSON (its theorem block is used)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return run_config(config_path, std::nullopt, false);
    if (*sweep_cmd) return run_config(config_path, harness::RunKind::sweep, false);
    if (*compare_cmd) return compare(dirs, threshold, out);
    if (*rf_cmd) return rf(model_path, as_json);
    if (*theorem_cmd) return run_config(config_path, std::nullopt, true);
  } catch (const ConfigError& e) {
    report(e);
    return kConfigError;
  } catch (const Error& e) {
    report(e);
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
