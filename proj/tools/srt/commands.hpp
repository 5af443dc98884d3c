#pragma once

#include "config.hpp"

#include <cstddef>

namespace srt::cli {

// Process exit codes.
enum ExitCode : int {
  exit_ok = 0,
  exit_error = 1,
  exit_config = 2,
  exit_diverged = 3,
  exit_missing_data = 4,
  exit_check_failed = 5,
  exit_network = 6,
  exit_checksum = 7,
};

struct Options {
  std::size_t threads = 1;
};

int cmd_run(const ExperimentConfig& config, const Options& options);
int cmd_ratios(const ExperimentConfig& config, const Options& options);
int cmd_verify(const ExperimentConfig& config, const Options& options);
int cmd_fetch(const ExperimentConfig& config, const Options& options);

}  // namespace srt::cli
