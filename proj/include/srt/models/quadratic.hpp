#pragma once

#include <srt/datasets/synthetic.hpp>
#include <srt/models/objective.hpp>
#include <srt/numerics.hpp>

#include <span>

namespace srt {

/// Batch objective over a SyntheticQuadratic. Per-sample gradients are
/// (1 + e_i) A u + b_i with u = w - minimizer.
class QuadraticObjective {
 public:
  explicit QuadraticObjective(const SyntheticQuadratic& problem) : q_(&problem) {}

  const SyntheticQuadratic& problem() const noexcept { return *q_; }
  std::size_t parameter_count() const noexcept { return q_->dimension(); }
  std::size_t sample_count() const noexcept { return q_->size(); }

  DenseVector initial_parameters() const { return q_->start; }

  double evaluate_loss(const DenseVector& w, std::span<const std::size_t> batch) const {
    detail::check_call(parameter_count(), sample_count(), w, batch);
    const DenseVector u = shifted(w);
    const double curv = quadratic_form(u);
    double sum = 0.0;
    for (std::size_t i : batch) sum += sample_loss(u, curv, i);
    return sum / static_cast<double>(batch.size());
  }

  BatchEvaluation evaluate_batch(const DenseVector& w, std::span<const std::size_t> batch) const {
    detail::check_call(parameter_count(), sample_count(), w, batch);
    const std::size_t d = parameter_count();
    const DenseVector u = shifted(w);
    const double curv = quadratic_form(u);
    DenseVector au(d);
    for (std::size_t j = 0; j < d; ++j) au[j] = q_->curvature[j] * u[j];
    const double au_sq = squared_norm(au);

    // Batch means of the noise terms; with s_i = 1 + e_i,
    //   grad    = mean(s) A u + mean(b)
    //   mean_sq = mean(s^2) ||A u||^2 + 2 mean(s b) . A u + mean(||b||^2)
    // so a noiseless batch gives mean_sq == ||grad||^2 exactly.
    double loss_sum = 0.0;
    double s_sum = 0.0;
    double s2_sum = 0.0;
    double b2_sum = 0.0;
    DenseVector b_sum(d);
    DenseVector sb_sum(d);
    for (std::size_t i : batch) {
      loss_sum += sample_loss(u, curv, i);
      const double s = 1.0 + q_->scales[i];
      const DenseVector& b = q_->offsets[i];
      s_sum += s;
      s2_sum += s * s;
      b2_sum += squared_norm(b);
      for (std::size_t j = 0; j < d; ++j) {
        b_sum[j] += b[j];
        sb_sum[j] += s * b[j];
      }
    }
    const double m = static_cast<double>(batch.size());
    const double s_mean = s_sum / m;
    DenseVector grad(d);
    for (std::size_t j = 0; j < d; ++j) {
      grad[j] = s_mean * au[j] + b_sum[j] / m;
      sb_sum[j] /= m;
    }
    const double mean_sq = (s2_sum / m) * au_sq + 2.0 * dot(sb_sum, au) + b2_sum / m;
    return {loss_sum / m, std::move(grad), mean_sq, batch.size()};
  }

  /// Optimality gap F(w) - F* = 1/2 u^T A u (the noise terms average out exactly by construction).
  double full_loss(const DenseVector& w) const {
    if (w.size() != parameter_count()) throw DimensionError("QuadraticObjective: parameter length mismatch");
    return 0.5 * quadratic_form(shifted(w));
  }

 private:
  DenseVector shifted(const DenseVector& w) const { return axpy(-1.0, q_->minimizer, w); }

  double quadratic_form(const DenseVector& u) const {
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) s += q_->curvature[j] * u[j] * u[j];
    return s;
  }

  double sample_loss(const DenseVector& u, double curv, std::size_t i) const {
    return 0.5 * (1.0 + q_->scales[i]) * curv + dot(q_->offsets[i], u);
  }

  const SyntheticQuadratic* q_;
};

}  // namespace srt
