#pragma once

#include <srt/datasets/labeled_dataset.hpp>
#include <srt/errors.hpp>
#include <srt/numerics.hpp>

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace srt {

enum class NoiseKind { additive, multiplicative, noiseless };

inline std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::additive: return "additive";
    case NoiseKind::multiplicative: return "multiplicative";
    case NoiseKind::noiseless: return "noiseless";
  }
  return "?";
}

/// Finite-sum quadratic with known constants:
///
///   f_i(w) = 1/2 (1 + e_i) u^T A u + b_i^T u,   u = w - minimizer,
///
/// A diagonal with eigenvalues in [mu, L], sum_i b_i = 0 and sum_i e_i = 0, so the
/// population objective is F(w) = 1/2 u^T A u with F* = 0 at the minimizer.
struct SyntheticQuadratic {
  NoiseKind kind = NoiseKind::noiseless;
  DenseVector curvature;             ///< diagonal of A
  std::vector<DenseVector> offsets;  ///< b_i (all zero unless additive)
  std::vector<double> scales;        ///< e_i (all zero unless multiplicative)
  DenseVector minimizer;
  DenseVector start;  ///< default initial iterate, drawn with the problem
  double mu = 1.0;
  double L = 1.0;

  std::size_t size() const noexcept { return scales.size(); }
  std::size_t dimension() const noexcept { return curvature.size(); }

  DenseMatrix hessian() const {
    DenseMatrix a(dimension(), dimension());
    for (std::size_t j = 0; j < dimension(); ++j) a(j, j) = curvature[j];
    return a;
  }

  /// mean_i ||b_i||^2: the single-sample additive variance.
  double offset_variance() const {
    double sum = 0.0;
    for (const auto& b : offsets) sum += squared_norm(b);
    return sum / static_cast<double>(size());
  }

  /// mean_i e_i^2: the single-sample relative variance.
  double scale_variance() const {
    double sum = 0.0;
    for (double e : scales) sum += e * e;
    return sum / static_cast<double>(size());
  }
};

/// Builds a synthetic quadratic. `noise_level` is the root-mean-square size of
/// the per-sample perturbation: after centering, the b_i (additive) or e_i
/// (multiplicative) are rescaled so that mean ||b_i||^2 or mean e_i^2 equals
/// noise_level^2 exactly up to rounding. The minimizer is the origin; the start
/// point has i.i.d. N(0, 1) entries.
inline SyntheticQuadratic make_synthetic(NoiseKind kind, std::size_t n, std::size_t d, double mu, double L,
                                         double noise_level, Rng& rng) {
  if (n < 2) throw ParameterError("make_synthetic: n must be >= 2");
  if (d < 1) throw ParameterError("make_synthetic: d must be >= 1");
  if (!(mu > 0.0)) throw ParameterError("make_synthetic: mu must be positive");
  if (mu > L) throw ParameterError("make_synthetic: mu > L");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) {
    throw ParameterError("make_synthetic: noise_level must be >= 0");
  }

  SyntheticQuadratic q;
  q.kind = kind;
  q.mu = mu;
  q.L = L;
  q.curvature = DenseVector(d, mu);
  for (std::size_t j = 0; j < d && d > 1; ++j) {
    q.curvature[j] = mu + (L - mu) * static_cast<double>(j) / static_cast<double>(d - 1);
  }
  if (d > 1) q.curvature[d - 1] = L;
  q.offsets.assign(n, DenseVector(d));
  q.scales.assign(n, 0.0);
  const double nd = static_cast<double>(n);

  if (kind == NoiseKind::additive && noise_level > 0.0) {
    DenseVector mean(d);
    for (auto& b : q.offsets) {
      b = gaussian_vector(rng, d, 1.0);
      axpy_into<double>(1.0 / nd, b.span(), mean.span());
    }
    double second_moment = 0.0;
    for (auto& b : q.offsets) {
      axpy_into<double>(-1.0, mean.span(), b.span());
      second_moment += squared_norm(b);
    }
    const double scale = noise_level / std::sqrt(second_moment / nd);
    for (auto& b : q.offsets) {
      for (double& v : b) v *= scale;
    }
  } else if (kind == NoiseKind::multiplicative && noise_level > 0.0) {
    double mean = 0.0;
    for (double& e : q.scales) {
      e = rng.uniform(-1.0, 1.0);
      mean += e / nd;
    }
    double second_moment = 0.0;
    for (double& e : q.scales) {
      e -= mean;
      second_moment += e * e;
    }
    const double scale = noise_level / std::sqrt(second_moment / nd);
    for (double& e : q.scales) e *= scale;
  }

  q.minimizer = DenseVector(d);
  q.start = gaussian_vector(rng, d, 1.0);
  return q;
}

/// Binary classification data from a planted logistic model: x ~ N(0, I_d),
/// y ~ Bernoulli(sigmoid(w*^T x)) with w* ~ N(0, I_d / d) scaled by `signal`.
inline LabeledDataset<double> make_logistic_synthetic(std::size_t n, std::size_t d, Rng& rng,
                                                      double signal = 3.0) {
  if (n < 1 || d < 1) throw ParameterError("make_logistic_synthetic: n and d must be positive");
  const DenseVector truth = gaussian_vector(rng, d, signal / std::sqrt(static_cast<double>(d)));
  DenseMatrix x(n, d);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    for (double& v : row) v = rng.normal();
    const double z = dot<double, double>(row, truth.span());
    const double p = 1.0 / (1.0 + std::exp(-z));
    labels[i] = rng.uniform() < p ? 1 : 0;
  }
  return {std::move(x), std::move(labels), 2};
}

}  // namespace srt
