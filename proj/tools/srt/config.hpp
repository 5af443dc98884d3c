#pragma once

#include <srt/srt.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace srt::cli {

/// Bad or unknown configuration value; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  std::string kind = "synthetic_quadratic";  // synthetic_quadratic | synthetic_logistic | libsvm | idx
  // synthetic_quadratic
  std::string noise = "noiseless";
  std::size_t n = 64;
  std::size_t d = 10;
  double mu = 1.0;
  double L = 4.0;
  double noise_level = 0.0;
  // synthetic_logistic
  double signal = 3.0;
  // both synthetic kinds
  std::uint64_t seed = 0;
  // libsvm
  std::filesystem::path path;
  std::size_t dimension = 0;
  // idx
  std::filesystem::path images;
  std::filesystem::path labels;
  std::optional<int> num_classes;
  // real data
  bool normalize = false;
  bool float32 = false;
};

struct ModelConfig {
  std::string kind;  // logistic_regression | mlp | quadratic; empty = default for the problem
  std::vector<std::size_t> hidden_dims{128, 64};
  double l2_penalty = 0.0;
};

struct RatiosConfig {
  std::vector<double> alphas;
  std::vector<std::size_t> batch_sizes;
};

struct VerifyConfig {
  std::size_t num_seeds = 1;
  std::uint64_t horizon = 2000;
  std::uint64_t settling_horizon = 5000;
  std::optional<double> M_V;  ///< default: sampling constant of the problem
  std::optional<double> M;
  bool diagnostic_estimated = false;
};

struct FetchConfig {
  std::string dataset;
  std::filesystem::path destination = "data";
  std::string base_url;  ///< empty: the dataset's canonical location
};

struct OutputConfig {
  std::filesystem::path directory = "srt_output";
  bool overwrite = false;
};

struct ExperimentConfig {
  ProblemConfig problem;
  ModelConfig model;
  RunConfig run;
  RatiosConfig ratios;
  VerifyConfig verify;
  FetchConfig fetch;
  OutputConfig output;
  bool has_ratios = false;
  bool has_verify = false;
  bool has_fetch = false;
};

/// Parses a config document. Relative paths are resolved against `base_dir`.
/// Unknown keys and wrongly typed values raise ConfigError naming "section.key".
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field with its effective value; parsing it back yields the same config.
nlohmann::json resolved_json(const ExperimentConfig& config);

}  // namespace srt::cli
