#pragma once

#include <srt/errors.hpp>
#include <srt/numerics.hpp>

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace srt {

/// Feature matrix (one row per sample) plus integer class labels in [0, num_classes).
/// Immutable once built; safe for concurrent reads.
template <typename Feature = double>
struct LabeledDataset {
  Matrix<Feature> features;
  std::vector<int> labels;
  int num_classes = 2;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dimension() const noexcept { return features.cols(); }

  std::span<const Feature> sample(std::size_t i) const noexcept { return features.row(i); }

  void validate() const {
    if (labels.empty()) throw ParameterError("LabeledDataset: no samples");
    if (features.rows() != labels.size()) {
      throw DimensionError("LabeledDataset: " + std::to_string(features.rows()) + " feature rows but " +
                           std::to_string(labels.size()) + " labels");
    }
    if (num_classes < 2) throw ParameterError("LabeledDataset: num_classes must be >= 2");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= num_classes) {
        throw ParameterError("LabeledDataset: label " + std::to_string(labels[i]) + " of sample " +
                             std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Copy with a different feature storage type (e.g. 32-bit to save memory).
template <typename To, typename From>
LabeledDataset<To> convert_features(const LabeledDataset<From>& data) {
  std::vector<To> values(data.features.values().begin(), data.features.values().end());
  return {Matrix<To>(data.features.rows(), data.features.cols(), std::move(values)), data.labels,
          data.num_classes};
}

/// Rescales every feature column to [0, 1]. Constant columns become 0.
template <typename Feature>
void min_max_normalize(LabeledDataset<Feature>& data) {
  const std::size_t rows = data.features.rows();
  const std::size_t cols = data.features.cols();
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = static_cast<double>(data.features(0, c));
    double hi = lo;
    for (std::size_t r = 1; r < rows; ++r) {
      lo = std::min(lo, static_cast<double>(data.features(r, c)));
      hi = std::max(hi, static_cast<double>(data.features(r, c)));
    }
    const double span = hi - lo;
    for (std::size_t r = 0; r < rows; ++r) {
      const double v = static_cast<double>(data.features(r, c));
      data.features(r, c) = static_cast<Feature>(span > 0.0 ? (v - lo) / span : 0.0);
    }
  }
}

}  // namespace srt
