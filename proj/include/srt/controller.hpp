#pragma once

#include <srt/errors.hpp>
#include <srt/models/objective.hpp>
#include <srt/numerics.hpp>
#include <srt/telemetry.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srt {

struct SrtConfig {
  double initial_step = 0.1;     ///< alpha_0
  double lower_threshold = 0.25; ///< c1: mean ratio below this shrinks the step
  double upper_threshold = 0.75; ///< c2: mean ratio above this grows the step
  double step_factor = 2.0;      ///< tau
  std::size_t buffer_len = 100;  ///< N
  /// When set, this value replaces the estimated variance ratio in v_M (oracle mode).
  std::optional<double> oracle_variance_ratio;
  double denominator_floor = 1e-12;
  bool adapt_step = true;

  void validate() const {
    if (!(initial_step > 0.0) || !std::isfinite(initial_step)) throw ParameterError("srt.alpha0 must be positive");
    if (!(lower_threshold > 0.0 && lower_threshold <= upper_threshold && upper_threshold < 1.0)) {
      throw ParameterError("srt.c1/srt.c2 must satisfy 0 < c1 <= c2 < 1");
    }
    if (!(step_factor > 1.0) || !std::isfinite(step_factor)) throw ParameterError("srt.tau must be > 1");
    if (buffer_len < 1) throw ParameterError("srt.buffer_len must be >= 1");
    if (!(denominator_floor > 0.0)) throw ParameterError("srt.denom_floor must be positive");
    if (oracle_variance_ratio && !(*oracle_variance_ratio >= 0.0 && std::isfinite(*oracle_variance_ratio))) {
      throw ParameterError("srt.variance_mode oracle M_V must be >= 0");
    }
  }
};

/// Fixed-capacity FIFO of ratio samples; pushing into a full buffer evicts the oldest.
class RatioBuffer {
 public:
  explicit RatioBuffer(std::size_t capacity) : values_(capacity) {
    if (capacity == 0) throw ParameterError("RatioBuffer: capacity must be positive");
  }

  std::size_t capacity() const noexcept { return values_.size(); }
  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  bool full() const noexcept { return size_ == values_.size(); }

  void push(double v) {
    values_[(head_ + size_) % values_.size()] = v;
    if (full()) {
      head_ = (head_ + 1) % values_.size();
    } else {
      ++size_;
    }
  }

  void clear() noexcept {
    head_ = 0;
    size_ = 0;
  }

  /// i-th element counting from the oldest.
  double operator[](std::size_t i) const noexcept { return values_[(head_ + i) % values_.size()]; }

  /// Mean summed oldest to newest; 0 for an empty buffer.
  double mean() const noexcept {
    if (size_ == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < size_; ++i) sum += (*this)[i];
    return sum / static_cast<double>(size_);
  }

  std::vector<double> contents() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size_; ++i) out.push_back((*this)[i]);
    return out;
  }

 private:
  std::vector<double> values_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

struct SrtState {
  double alpha = 0.0;
  RatioBuffer rho_buffer;
  RatioBuffer m_buffer;
  std::uint64_t increases = 0;
  std::uint64_t decreases = 0;
  std::uint64_t iteration = 0;

  static SrtState initial(const SrtConfig& config) {
    config.validate();
    return {config.initial_step, RatioBuffer(config.buffer_len), RatioBuffer(config.buffer_len)};
  }

  std::uint64_t adjustments() const noexcept { return increases + decreases; }
};

struct RatioSample {
  double rho_hat = 0.0;  ///< 0 when invalid
  double m_hat = 0.0;
  double v_hat = 0.0;
  bool valid_rho = false;
};

struct ProgressRatio {
  double rho_hat;
  bool valid;
};

/// (F_S(w + alpha d) - F_S(w)) / (alpha grad^T d). Invalid when the denominator
/// is below the floor in magnitude or the trial loss is not finite.
inline ProgressRatio progress_ratio(double loss_at_trial, double loss_at_w, double alpha, double grad_dot_d,
                                    double denom_floor) noexcept {
  const double denom = alpha * grad_dot_d;
  if (!(std::abs(denom) >= denom_floor) || !std::isfinite(loss_at_trial) || !std::isfinite(loss_at_w)) {
    return {0.0, false};
  }
  const double rho = (loss_at_trial - loss_at_w) / denom;
  if (!std::isfinite(rho)) return {0.0, false};
  return {rho, true};
}

struct VarianceRatio {
  double m_hat;
  double v_hat;
};

inline VarianceRatio variance_ratio(double mean_per_sample_sq_norm, double grad_sq_norm, double denom_floor) noexcept {
  const double v = std::max(0.0, mean_per_sample_sq_norm - grad_sq_norm);
  return {v / std::max(grad_sq_norm, denom_floor), v};
}

inline double effective_step(double alpha, const RatioBuffer& m_buffer) noexcept {
  return alpha / (m_buffer.mean() + 1.0);
}

enum class Adjustment { unchanged, increased, decreased };

inline std::string_view to_string(Adjustment a) {
  switch (a) {
    case Adjustment::increased: return "increased";
    case Adjustment::decreased: return "decreased";
    case Adjustment::unchanged: return "unchanged";
  }
  return "?";
}

// alpha is kept inside [min_step, max_step]; an adjustment that would leave the
// range is refused (reported as unchanged, v_rho keeps sliding).
inline constexpr double min_step = 1e-300;
inline constexpr double max_step = 1e300;

inline Adjustment maybe_adjust(SrtState& state, const SrtConfig& config) {
  if (!state.rho_buffer.full()) return Adjustment::unchanged;
  const double m = state.rho_buffer.mean();
  if (m > config.upper_threshold) {
    const double next = state.alpha * config.step_factor;
    if (!(next <= max_step)) return Adjustment::unchanged;
    state.alpha = next;
    state.rho_buffer.clear();
    ++state.increases;
    return Adjustment::increased;
  }
  if (m < config.lower_threshold) {
    const double next = state.alpha / config.step_factor;
    if (!(next >= min_step)) return Adjustment::unchanged;
    state.alpha = next;
    state.rho_buffer.clear();
    ++state.decreases;
    return Adjustment::decreased;
  }
  return Adjustment::unchanged;
}

/// Search direction hook. Only steepest descent d = -grad F_S is provided.
struct SteepestDescent {
  DenseVector operator()(const BatchEvaluation& eval) const { return scaled(-1.0, eval.gradient); }
};

/// Ratio measurements at (w, S): one extra loss evaluation at the trial point w + alpha d.
template <BatchObjective Objective>
RatioSample measure_ratios(const Objective& f, const DenseVector& w, std::span<const std::size_t> batch,
                           const BatchEvaluation& eval, const DenseVector& d, double alpha, double denom_floor) {
  RatioSample s;
  const double grad_sq = squared_norm(eval.gradient);
  const auto vr = variance_ratio(eval.mean_per_sample_sq_norm, grad_sq, denom_floor);
  s.m_hat = vr.m_hat;
  s.v_hat = vr.v_hat;
  double trial_loss;
  try {
    trial_loss = f.evaluate_loss(axpy(alpha, d, w), batch);
  } catch (const ParameterError&) {
    // the trial point overflowed to a non-finite parameter
    trial_loss = std::numeric_limits<double>::quiet_NaN();
  }
  const auto pr = progress_ratio(trial_loss, eval.loss, alpha, dot(eval.gradient, d), denom_floor);
  s.rho_hat = pr.rho_hat;
  s.valid_rho = pr.valid;
  return s;
}

struct SrtStepResult {
  DenseVector next;
  IterationRecord record;
  Adjustment adjustment = Adjustment::unchanged;
  RatioSample sample;
};

/// One iteration of the controller: evaluate, measure ratios at alpha_k, append,
/// adjust (setting alpha_{k+1}), then step with alpha_k / (mean(v_M) + 1).
template <BatchObjective Objective, typename Direction = SteepestDescent>
SrtStepResult srt_step(SrtState& state, const SrtConfig& config, const Objective& f, const DenseVector& w,
                       std::span<const std::size_t> batch, std::uint64_t epoch = 0, Direction direction = {}) {
  const BatchEvaluation eval = f.evaluate_batch(w, batch);
  const DenseVector d = direction(eval);
  const double alpha = state.alpha;
  RatioSample sample = measure_ratios(f, w, batch, eval, d, alpha, config.denominator_floor);
  if (config.oracle_variance_ratio) sample.m_hat = *config.oracle_variance_ratio;

  if (sample.valid_rho) state.rho_buffer.push(sample.rho_hat);
  state.m_buffer.push(sample.m_hat);
  const Adjustment adj = config.adapt_step ? maybe_adjust(state, config) : Adjustment::unchanged;
  const double step = effective_step(alpha, state.m_buffer);

  IterationRecord rec;
  rec.iteration = state.iteration;
  rec.epoch = epoch;
  rec.batch_loss = eval.loss;
  rec.alpha = alpha;
  rec.alpha_eff = step;
  if (sample.valid_rho) rec.rho_hat = sample.rho_hat;
  rec.m_hat = sample.m_hat;
  rec.v_hat = sample.v_hat;
  rec.grad_sq_norm = squared_norm(eval.gradient);
  ++state.iteration;
  return {axpy(step, d, w), rec, adj, sample};
}

}  // namespace srt
