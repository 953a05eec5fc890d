#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "app.hpp"

namespace {
std::atomic<bool> interrupted{false};
extern "C" void on_sigint(int) { interrupted = true; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Prompt-optimized zero-shot re-ranking: BM25 retrieval, LLM re-ranking, "
               "discriminator-guided prompt search and IR evaluation."};
  cli.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  for (const auto& name : coprompt::app::command_names()) {
    auto* sub = cli.add_subcommand(name);
    sub->add_option("-c,--config", config_path, "JSON config file");
    sub->add_option("-s,--set", overrides, "Override a setting: key=value (repeatable)");
  }
  CLI11_PARSE(cli, argc, argv);

  const std::string command = cli.get_subcommands().front()->get_name();
  coprompt::app::Config config;
  try {
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& s : overrides) config.set(s);
  } catch (const std::exception& e) {
    std::cerr << "error [" << command << "] config: " << e.what() << "\n";
    return 1;
  }

  std::signal(SIGINT, on_sigint);
  return coprompt::app::run_command(command, config, std::cout, std::cerr, &interrupted);
}
