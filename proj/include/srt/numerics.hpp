#pragma once

#include <srt/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace srt {

namespace detail {

template <typename T>
void require_finite(std::span<const T> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(static_cast<double>(values[i]))) {
      throw ParameterError(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

inline void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

}  // namespace detail

/// Dense vector of 64-bit floats. Used for parameters, gradients and search directions.
///
/// The value constructors reject empty input and non-finite entries; element access
/// afterwards is unchecked. A default-constructed vector is empty and only serves as
/// a placeholder to be assigned into.
class DenseVector {
 public:
  DenseVector() = default;

  explicit DenseVector(std::size_t n, double fill = 0.0) : values_(n, fill) {
    if (n == 0) throw DimensionError("DenseVector: length must be positive");
    if (!std::isfinite(fill)) throw ParameterError("DenseVector: non-finite fill value");
  }

  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DimensionError("DenseVector: length must be positive");
    detail::require_finite<double>(values_, "DenseVector");
  }

  DenseVector(std::initializer_list<double> values) : DenseVector(std::vector<double>(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> values_;
};

/// Row-major dense matrix. `Matrix<float>` is used for compact feature storage;
/// `DenseMatrix` is the 64-bit default.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw DimensionError("Matrix: rows and cols must be positive");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows == 0 || cols == 0) throw DimensionError("Matrix: rows and cols must be positive");
    if (values_.size() != rows * cols) {
      throw DimensionError("Matrix: expected " + std::to_string(rows * cols) + " values, got " +
                           std::to_string(values_.size()));
    }
    detail::require_finite<T>(values_, "Matrix");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  T& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

using DenseMatrix = Matrix<double>;

// Reductions accumulate in double, strictly left to right. Records must be
// bit-reproducible, so nothing here is allowed to reorder a sum.

template <typename A, typename B>
double dot(std::span<const A> a, std::span<const B> b) {
  detail::require_same_length(a.size(), b.size(), "dot");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

inline double dot(const DenseVector& a, const DenseVector& b) {
  return dot<double, double>(a.span(), b.span());
}

template <typename A>
double squared_norm(std::span<const A> a) {
  double sum = 0.0;
  for (const A v : a) sum += static_cast<double>(v) * static_cast<double>(v);
  return sum;
}

inline double squared_norm(const DenseVector& a) { return squared_norm<double>(a.span()); }

/// y + alpha * x. Inputs are left unmodified.
inline DenseVector axpy(double alpha, const DenseVector& x, const DenseVector& y) {
  detail::require_same_length(x.size(), y.size(), "axpy");
  DenseVector out = y;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
  return out;
}

/// y += alpha * x
template <typename A>
void axpy_into(double alpha, std::span<const A> x, std::span<double> y) {
  detail::require_same_length(x.size(), y.size(), "axpy_into");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * static_cast<double>(x[i]);
}

inline DenseVector scaled(double alpha, const DenseVector& x) {
  DenseVector out = x;
  for (double& v : out) v *= alpha;
  return out;
}

/// splitmix64 finalizer applied to (seed, stream). Used to derive independent
/// generator seeds for batching, initialization and per-seed replicas.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seeded generator: std::mt19937_64 underneath, with the uniform, bounded-integer
/// and normal transforms implemented here so the stream does not depend on the
/// standard library's (implementation-defined) distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on {0, ..., n-1} by rejection (no modulo bias).
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw ParameterError("uniform_index: n must be positive");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % bound);
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// n independent draws from N(0, sigma^2).
inline DenseVector gaussian_vector(Rng& rng, std::size_t n, double sigma) {
  if (n == 0) throw DimensionError("gaussian_vector: n must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("gaussian_vector: sigma must be >= 0");
  DenseVector out(n);
  if (sigma == 0.0) return out;
  for (double& v : out) v = sigma * rng.normal();
  return out;
}

/// Incremental arithmetic mean.
class RunningMean {
 public:
  void add(double x) noexcept {
    ++count_;
    mean_ += (x - mean_) / static_cast<double>(count_);
  }

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
};

/// Welford mean/variance accumulator.
class RunningMoments {
 public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }

  /// Unbiased sample variance; 0 with fewer than two samples.
  double variance() const noexcept {
    return count_ < 2 ? 0.0 : m2_ / static_cast<double>(count_ - 1);
  }
  double stddev() const noexcept { return std::sqrt(variance()); }

  /// Standard error of the mean.
  double standard_error() const noexcept {
    return count_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(count_));
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace srt
