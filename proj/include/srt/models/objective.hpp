#pragma once

#include <srt/datasets/batches.hpp>
#include <srt/errors.hpp>
#include <srt/numerics.hpp>

#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srt {

enum class ModelKind { logistic_regression, mlp };

inline std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::logistic_regression ? "logistic_regression" : "mlp";
}

struct ModelSpec {
  ModelKind kind = ModelKind::logistic_regression;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden_dims;  ///< mlp only
  double l2_penalty = 0.0;

  /// Layer widths from input to output, e.g. {784, 128, 64, 10}.
  std::vector<std::size_t> layer_widths() const {
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), hidden_dims.begin(), hidden_dims.end());
    widths.push_back(output_dim);
    return widths;
  }

  std::size_t parameter_count() const {
    if (kind == ModelKind::logistic_regression) return input_dim + 1;
    const auto widths = layer_widths();
    std::size_t count = 0;
    for (std::size_t l = 1; l < widths.size(); ++l) count += widths[l] * widths[l - 1] + widths[l];
    return count;
  }

  void validate() const {
    if (input_dim == 0) throw ParameterError("model: input_dim must be positive");
    if (!(l2_penalty >= 0.0)) throw ParameterError("model: l2_penalty must be >= 0");
    if (kind == ModelKind::logistic_regression) {
      if (output_dim != 1) throw ParameterError("model: logistic_regression requires output_dim = 1");
      if (!hidden_dims.empty()) throw ParameterError("model: logistic_regression takes no hidden layers");
    } else {
      if (hidden_dims.empty()) throw ParameterError("model: mlp needs at least one hidden layer");
      if (output_dim < 2) throw ParameterError("model: mlp output_dim must be >= 2");
      for (std::size_t h : hidden_dims) {
        if (h == 0) throw ParameterError("model: hidden layer widths must be positive");
      }
    }
  }
};

/// Everything one iteration needs from the model at (w, S_k).
struct BatchEvaluation {
  double loss = 0.0;                     ///< F_S(w) = mean_i f_i(w)
  DenseVector gradient;                  ///< mean_i grad f_i(w)
  double mean_per_sample_sq_norm = 0.0;  ///< mean_i ||grad f_i(w)||^2, exact
  std::size_t batch_size = 0;
};

/// A finite-sum objective F(w) = mean_i f_i(w) that can be evaluated on index subsets.
/// `evaluate_loss` must reproduce `evaluate_batch(...).loss` bit for bit.
template <typename T>
concept BatchObjective = requires(const T& f, const DenseVector& w, std::span<const std::size_t> batch) {
  { f.parameter_count() } -> std::convertible_to<std::size_t>;
  { f.sample_count() } -> std::convertible_to<std::size_t>;
  { f.evaluate_batch(w, batch) } -> std::same_as<BatchEvaluation>;
  { f.evaluate_loss(w, batch) } -> std::same_as<double>;
  { f.full_loss(w) } -> std::same_as<double>;
};

namespace detail {

inline void check_call(std::size_t expected_params, std::size_t samples, const DenseVector& w,
                       std::span<const std::size_t> batch) {
  if (w.size() != expected_params) {
    throw DimensionError("parameter vector has length " + std::to_string(w.size()) + ", model expects " +
                         std::to_string(expected_params));
  }
  if (batch.empty()) throw DimensionError("empty batch");
  for (std::size_t i : batch) {
    if (i >= samples) {
      throw DimensionError("batch index " + std::to_string(i) + " out of range (n = " + std::to_string(samples) +
                           ")");
    }
  }
}

}  // namespace detail

template <BatchObjective Objective>
BatchEvaluation evaluate_batch(const Objective& f, const DenseVector& w, const BatchIndexSet& batch) {
  return f.evaluate_batch(w, batch.indices);
}

template <BatchObjective Objective>
double evaluate_loss(const Objective& f, const DenseVector& w, const BatchIndexSet& batch) {
  return f.evaluate_loss(w, batch.indices);
}

}  // namespace srt
