#pragma once

// Small hand-built problems shared by the unit tests.

#include <srt/srt.hpp>

#include <span>
#include <vector>

namespace srt::testing {

/// A single-sample noiseless quadratic 1/2 sum_j a_j (w_j - m_j)^2.
inline SyntheticQuadratic diagonal_quadratic(const DenseVector& curvature, const DenseVector& start,
                                             std::size_t n = 1) {
  SyntheticQuadratic q;
  q.curvature = curvature;
  q.offsets.assign(n, DenseVector(curvature.size()));
  q.scales.assign(n, 0.0);
  q.minimizer = DenseVector(curvature.size());
  q.start = start;
  q.mu = *std::min_element(curvature.begin(), curvature.end());
  q.L = *std::max_element(curvature.begin(), curvature.end());
  return q;
}

/// f_i(w) = c^T w for every sample.
struct LinearObjective {
  DenseVector c;
  std::size_t n = 4;

  std::size_t parameter_count() const { return c.size(); }
  std::size_t sample_count() const { return n; }
  double evaluate_loss(const DenseVector& w, std::span<const std::size_t>) const { return dot(c, w); }
  BatchEvaluation evaluate_batch(const DenseVector& w, std::span<const std::size_t> batch) const {
    return {dot(c, w), c, squared_norm(c), batch.size()};
  }
  double full_loss(const DenseVector& w) const { return dot(c, w); }
};

/// gamma * F for any batch objective.
template <BatchObjective Objective>
struct ScaledObjective {
  const Objective* f;
  double gamma;

  std::size_t parameter_count() const { return f->parameter_count(); }
  std::size_t sample_count() const { return f->sample_count(); }
  double evaluate_loss(const DenseVector& w, std::span<const std::size_t> b) const {
    return gamma * f->evaluate_loss(w, b);
  }
  BatchEvaluation evaluate_batch(const DenseVector& w, std::span<const std::size_t> b) const {
    BatchEvaluation e = f->evaluate_batch(w, b);
    e.loss *= gamma;
    e.gradient = scaled(gamma, e.gradient);
    e.mean_per_sample_sq_norm *= gamma * gamma;
    return e;
  }
  double full_loss(const DenseVector& w) const { return gamma * f->full_loss(w); }
};

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace srt::testing
