// SPDX-License-Identifier: Apache-2.0
//
// infograd_cli <command> [--config PATH] [--out DIR] [--seed N] [--override key=value ...]
// Exit codes: 0 pass, 2 check failed, 1 error.
#include "infograd/error.hpp"
#include "infograd/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Information-gradient experiments"};
  app.set_version_flag("--version", infograd::version_string());
  app.require_subcommand(1);

  infograd::RunOptions options;
  for (const auto& name : infograd::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config_path, "JSON file of config overrides")->check(CLI::ExistingFile);
    sub->add_option("--out", options.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", options.seed, "base random seed")->capture_default_str();
    sub->add_option("--override", options.overrides, "key=value, value parsed as JSON")->take_all();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return infograd::run_command(command, options, std::cout);
  } catch (const infograd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
