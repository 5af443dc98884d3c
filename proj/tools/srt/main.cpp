#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  using namespace srt::cli;
  CLI::App app{"Stochastic ratio tracking: adaptive step lengths for SGD"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  for (const char* name : {"run", "ratios", "verify", "fetch"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--output", output, "output directory (fetch: destination)");
    sub->add_option("--seed", seed, "overrides run.seed");
    sub->add_option("--threads", threads, "worker threads (default: SRT_THREADS or 1)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  try {
    ExperimentConfig config = load_config(config_path);
    if (sub->count("--seed") > 0) config.run.seed = seed;
    if (!output.empty()) {
      if (command == "fetch") {
        config.fetch.destination = std::filesystem::absolute(output);
      } else {
        config.output.directory = std::filesystem::absolute(output);
      }
    }
    Options options;
    if (const char* env = std::getenv("SRT_THREADS")) {
      try {
        options.threads = std::stoul(env);
      } catch (const std::exception&) {
        throw ConfigError("config error: SRT_THREADS must be a positive integer");
      }
    }
    if (sub->count("--threads") > 0) options.threads = threads;
    if (options.threads == 0) throw ConfigError("config error: thread count must be positive");

    if (command == "run") return cmd_run(config, options);
    if (command == "ratios") return cmd_ratios(config, options);
    if (command == "verify") return cmd_verify(config, options);
    return cmd_fetch(config, options);
  } catch (const ConfigError& e) {
    std::cerr << "srt: " << e.what() << '\n';
    return exit_config;
  } catch (const srt::MissingDataError& e) {
    std::cerr << "srt: missing data: " << e.what() << '\n';
    return exit_missing_data;
  } catch (const srt::ParameterError& e) {
    std::cerr << "srt: config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "srt: error: " << e.what() << '\n';
    return exit_error;
  }
}
