#pragma once

#include <srt/datasets/labeled_dataset.hpp>
#include <srt/models/objective.hpp>
#include <srt/numerics.hpp>

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace srt {

/// log(1 + exp(-t)) without overflow for either sign of t.
inline double log1p_exp_neg(double t) noexcept {
  return t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Binary logistic regression with bias. Parameters are laid out as
/// [w_1 .. w_d, bias]; the optional L2 term (lambda/2)||w||^2 covers the weights
/// only and is part of every per-sample loss f_i.
template <typename Feature = double>
class LogisticRegression {
 public:
  explicit LogisticRegression(const LabeledDataset<Feature>& data, double l2_penalty = 0.0)
      : data_(&data), l2_(l2_penalty), all_(data.size()) {
    data.validate();
    if (data.num_classes != 2) throw ParameterError("LogisticRegression: dataset must be binary");
    if (!(l2_penalty >= 0.0)) throw ParameterError("LogisticRegression: l2_penalty must be >= 0");
    std::iota(all_.begin(), all_.end(), std::size_t{0});
  }

  std::size_t parameter_count() const noexcept { return data_->dimension() + 1; }
  std::size_t sample_count() const noexcept { return data_->size(); }

  DenseVector initial_parameters() const { return DenseVector(parameter_count()); }

  double evaluate_loss(const DenseVector& w, std::span<const std::size_t> batch) const {
    detail::check_call(parameter_count(), sample_count(), w, batch);
    double sum = 0.0;
    for (std::size_t i : batch) sum += sample_loss(margin(w, i), data_->labels[i]);
    return sum / static_cast<double>(batch.size()) + penalty(w);
  }

  BatchEvaluation evaluate_batch(const DenseVector& w, std::span<const std::size_t> batch) const {
    detail::check_call(parameter_count(), sample_count(), w, batch);
    const std::size_t d = data_->dimension();
    const auto weights = w.span().first(d);
    const double weight_sq = l2_ > 0.0 ? squared_norm<double>(weights) : 0.0;

    DenseVector grad(parameter_count());
    double loss_sum = 0.0;
    double sq_norm_sum = 0.0;
    for (std::size_t i : batch) {
      const auto x = data_->sample(i);
      const double z = margin(w, i);
      const int y = data_->labels[i];
      loss_sum += sample_loss(z, y);
      const double s = sigmoid(z) - static_cast<double>(y);  // d f_i / d z
      axpy_into<Feature>(s, x, grad.span().first(d));
      grad[d] += s;
      // ||s [x; 1] + lambda [w; 0]||^2 expanded, no per-sample vector needed.
      double sq = s * s * (squared_norm<Feature>(x) + 1.0);
      if (l2_ > 0.0) sq += 2.0 * s * l2_ * dot<Feature, double>(x, weights) + l2_ * l2_ * weight_sq;
      sq_norm_sum += sq;
    }
    const double m = static_cast<double>(batch.size());
    for (double& g : grad) g /= m;
    if (l2_ > 0.0) axpy_into<double>(l2_, weights, grad.span().first(d));
    // a single sample's gradient is the batch gradient; use its norm directly
    const double mean_sq = batch.size() == 1 ? squared_norm(grad) : sq_norm_sum / m;
    return {loss_sum / m + penalty(w), std::move(grad), mean_sq, batch.size()};
  }

  double full_loss(const DenseVector& w) const { return evaluate_loss(w, all_); }

 private:
  double margin(const DenseVector& w, std::size_t i) const {
    const std::size_t d = data_->dimension();
    return dot<Feature, double>(data_->sample(i), w.span().first(d)) + w[d];
  }

  static double sample_loss(double z, int y) noexcept { return log1p_exp_neg(y == 1 ? z : -z); }

  double penalty(const DenseVector& w) const {
    return l2_ > 0.0 ? 0.5 * l2_ * squared_norm<double>(w.span().first(data_->dimension())) : 0.0;
  }

  const LabeledDataset<Feature>* data_;
  double l2_;
  std::vector<std::size_t> all_;
};

}  // namespace srt
