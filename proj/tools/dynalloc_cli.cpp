// dynalloc: ingest -> analytics -> allocation -> training -> backtest -> report.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "dynalloc/config.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/kernels.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Risk-aware dynamic portfolio allocation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);

  std::string config_path;
  std::string seed;
  std::string out;
  std::map<std::string, std::string> overrides;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--seed", seed, "top-level seed");
  app.add_option("--out", out, "output directory");
  for (std::string_view key : dynalloc::config_keys()) {
    if (key == "seed" || key == "out") continue;
    const std::string k(key);
    app.add_option_function<std::string>(
        "--" + k, [&overrides, k](const std::string& v) { overrides[k] = v; }, "override '" + k + "'");
  }

  std::string command;
  for (std::string_view name : dynalloc::cli::command_names()) {
    app.add_subcommand(std::string(name))->final_callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::vector<std::pair<std::string, std::string>> settings(overrides.begin(), overrides.end());
  if (!seed.empty()) settings.emplace_back("seed", seed);
  if (!out.empty()) settings.emplace_back("out", out);

  dynalloc::RunConfig cfg;
  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw dynalloc::Error("cannot open config file " + config_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    cfg = dynalloc::validate_config(text, settings);
  } catch (const dynalloc::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    std::clog << "kernels: " << dynalloc::kernels::backend_name(dynalloc::kernels::active().backend) << "\n";
    dynalloc::cli::dispatch(command, cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
