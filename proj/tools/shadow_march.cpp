#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "shadow/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sensitivities of long-time averages of chaotic systems by the stabilized adjoint march"};
  app.set_version_flag("--version", std::string(SHADOW_MARCH_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  shadow::cli::CommandOptions options;
  const char* summaries[][2] = {
      {"run", "primal solve, backward sweep, march; writes summary.json, segments.csv, adjoint.csv"},
      {"lyapunov", "finite-time Lyapunov spectrum only; writes spectrum.csv"},
      {"converge", "sensitivity error vs T or neutral defect vs dt; writes study.csv and the fitted slope"},
      {"oracle", "dense-solve and finite-difference cross-checks against the march"},
  };
  for (const auto& [name, help] : summaries) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto* cfg = sub->add_option("config", config_path, "JSON run configuration");
    sub->add_flag("--dry-run", options.dry_run, "validate and print derived sizes without computing");
    if (std::string(name) == "converge") {
      sub->add_flag("--self-test", options.self_test, "check the slope fit on synthetic power laws");
    } else {
      cfg->required();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : shadow::cli::kExitInvalidConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "converge" && !options.self_test && config_path.empty()) {
    std::cerr << "error: converge needs a config file unless --self-test is given\n";
    return shadow::cli::kExitInvalidConfig;
  }
  return shadow::cli::run_command(command, config_path, options, std::cout, std::cerr);
}
