#pragma once

#include <srt/controller.hpp>
#include <srt/datasets/batches.hpp>
#include <srt/models/objective.hpp>
#include <srt/numerics.hpp>
#include <srt/telemetry.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace srt {

struct SrtMode {};
struct FixedMode {
  double alpha = 0.0;
};
/// alpha = 1 / (L (M_V + 1)), held constant.
struct TheoreticalMode {
  double L = 1.0;
  double M_V = 0.0;
};
using StepMode = std::variant<SrtMode, FixedMode, TheoreticalMode>;

inline std::string_view mode_name(const StepMode& mode) {
  if (std::holds_alternative<SrtMode>(mode)) return "srt";
  if (std::holds_alternative<FixedMode>(mode)) return "fixed";
  return "theoretical";
}

struct RunConfig {
  StepMode mode = SrtMode{};
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  /// nullopt: once per epoch (at each epoch's first iteration); 0: never.
  std::optional<std::uint64_t> eval_full_loss_every;
  SrtConfig srt;
  /// Stop after this many iterations even if epochs remain.
  std::optional<std::uint64_t> max_iterations;
  /// Batch loss above this counts as divergence; nullopt keeps only the non-finite test.
  std::optional<double> divergence_threshold = 1e12;

  void validate() const {
    if (epochs < 1) throw ParameterError("run.epochs must be >= 1");
    if (batch_size < 1) throw ParameterError("run.batch_size must be >= 1");
    if (const auto* f = std::get_if<FixedMode>(&mode); f && !(f->alpha > 0.0 && std::isfinite(f->alpha))) {
      throw ParameterError("run.alpha must be positive");
    }
    if (const auto* t = std::get_if<TheoreticalMode>(&mode)) {
      if (!(t->L > 0.0 && std::isfinite(t->L))) throw ParameterError("run.L must be positive");
      if (!(t->M_V >= 0.0 && std::isfinite(t->M_V))) throw ParameterError("run.M_V must be >= 0");
    }
    if (std::holds_alternative<SrtMode>(mode)) srt.validate();
  }
};

enum class RunStatus { completed, diverged, failed };

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::diverged: return "diverged";
    case RunStatus::failed: return "failed";
  }
  return "?";
}

struct TrainResult {
  DenseVector parameters;
  std::vector<IterationRecord> records;
  RunStatus status = RunStatus::completed;
  std::optional<SrtState> state;  ///< srt mode only
  std::string message;
};

// Independent generator streams derived from the run seed.
inline Rng batch_rng(std::uint64_t seed) { return Rng(derive_seed(seed, 1)); }
inline Rng init_rng(std::uint64_t seed) { return Rng(derive_seed(seed, 2)); }

namespace detail {

inline bool record_finite(const IterationRecord& r) {
  for (double v : {r.batch_loss, r.alpha, r.alpha_eff, r.m_hat, r.v_hat, r.grad_sq_norm}) {
    if (!std::isfinite(v)) return false;
  }
  return !r.full_loss || std::isfinite(*r.full_loss);
}

}  // namespace detail

/// Runs epochs x ceil(n/m) iterations from w0. Every record is passed to
/// `on_record` (if given) as soon as it is complete and also kept in the result.
template <BatchObjective Objective>
TrainResult train(const Objective& f, DenseVector w0, const RunConfig& config,
                  const std::function<void(const IterationRecord&)>& on_record = {}) {
  config.validate();
  if (w0.size() != f.parameter_count()) throw DimensionError("train: initial parameters have wrong length");
  const std::size_t n = f.sample_count();
  if (config.batch_size > n) {
    throw ParameterError("run.batch_size " + std::to_string(config.batch_size) + " exceeds sample count " +
                         std::to_string(n));
  }
  const std::uint64_t full_every =
      config.eval_full_loss_every.value_or(batches_per_epoch(n, config.batch_size));

  TrainResult result;
  const bool srt_mode = std::holds_alternative<SrtMode>(config.mode);
  double constant_alpha = 0.0;
  if (const auto* fm = std::get_if<FixedMode>(&config.mode)) constant_alpha = fm->alpha;
  if (const auto* tm = std::get_if<TheoreticalMode>(&config.mode)) constant_alpha = 1.0 / (tm->L * (tm->M_V + 1.0));
  std::optional<SrtState> state;
  if (srt_mode) state = SrtState::initial(config.srt);

  Rng rng = batch_rng(config.seed);
  DenseVector w = std::move(w0);
  std::uint64_t k = 0;
  const std::uint64_t limit = config.max_iterations.value_or(UINT64_MAX);
  for (std::size_t epoch = 0; epoch < config.epochs && k < limit; ++epoch) {
    for (const BatchIndexSet& batch : epoch_batches(n, config.batch_size, rng, k)) {
      if (k >= limit) break;
      std::optional<double> full;
      if (full_every > 0 && k % full_every == 0) full = f.full_loss(w);

      IterationRecord rec;
      DenseVector next;
      if (srt_mode) {
        SrtStepResult step = srt_step(*state, config.srt, f, w, batch.indices, epoch);
        rec = step.record;
        next = std::move(step.next);
      } else {
        const BatchEvaluation eval = f.evaluate_batch(w, batch.indices);
        const DenseVector d = scaled(-1.0, eval.gradient);
        const RatioSample s =
            measure_ratios(f, w, batch.indices, eval, d, constant_alpha, config.srt.denominator_floor);
        rec.iteration = k;
        rec.epoch = epoch;
        rec.batch_loss = eval.loss;
        rec.alpha = constant_alpha;
        rec.alpha_eff = constant_alpha;
        if (s.valid_rho) rec.rho_hat = s.rho_hat;
        rec.m_hat = s.m_hat;
        rec.v_hat = s.v_hat;
        rec.grad_sq_norm = squared_norm(eval.gradient);
        next = axpy(constant_alpha, d, w);
      }
      rec.full_loss = full;

      const bool too_big = config.divergence_threshold && rec.batch_loss > *config.divergence_threshold;
      if (too_big || !detail::record_finite(rec)) {
        result.status = RunStatus::diverged;
        result.message = "diverged at iteration " + std::to_string(k) + " (batch loss " +
                         std::to_string(rec.batch_loss) + ")";
        result.parameters = std::move(w);
        result.state = std::move(state);
        return result;
      }
      if (on_record) on_record(rec);
      result.records.push_back(rec);
      w = std::move(next);
      ++k;
    }
  }
  result.parameters = std::move(w);
  result.state = std::move(state);
  return result;
}

/// Summary statistics of one column over a record stream (rho_hat skips invalid rows).
struct ColumnStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

inline ColumnStats rho_stats(const std::vector<IterationRecord>& records) {
  RunningMoments m;
  for (const auto& r : records) {
    if (r.rho_hat) m.add(*r.rho_hat);
  }
  return {m.count(), m.mean(), m.stddev()};
}

inline ColumnStats m_hat_stats(const std::vector<IterationRecord>& records) {
  RunningMoments m;
  for (const auto& r : records) m.add(r.m_hat);
  return {m.count(), m.mean(), m.stddev()};
}

struct GridCell {
  double alpha = 0.0;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  TrainResult result;
  std::string error;  ///< non-empty when train threw
  ColumnStats rho;
  ColumnStats m_hat;
};

/// File name for one cell, e.g. "alpha_0.003_batch_8.csv".
inline std::string cell_csv_name(double alpha, std::size_t batch_size) {
  std::string name = "alpha_";
  detail::append_number(name, alpha);
  name += "_batch_";
  detail::append_number(name, batch_size);
  return name + ".csv";
}

/// Fixed-step runs over alphas x batch_sizes (alpha-major order). Cell c uses
/// seed ^ c; all cells start from w0. A failing cell is reported in its
/// `error` field and the remaining cells still run. `threads` > 1 runs cells
/// concurrently; results do not depend on it.
template <BatchObjective Objective>
std::vector<GridCell> fixed_step_ratio_study(const Objective& f, const DenseVector& w0,
                                             const std::vector<double>& alphas,
                                             const std::vector<std::size_t>& batch_sizes, std::size_t epochs,
                                             std::uint64_t seed, std::size_t threads = 1,
                                             const RunConfig& base = {}) {
  if (alphas.empty() || batch_sizes.empty()) throw ParameterError("ratios: alpha and batch_size lists must be nonempty");
  std::vector<GridCell> cells;
  for (double a : alphas) {
    for (std::size_t m : batch_sizes) {
      const auto index = static_cast<std::uint64_t>(cells.size());
      GridCell& c = cells.emplace_back();
      c.alpha = a;
      c.batch_size = m;
      c.seed = seed ^ index;
    }
  }
  auto run_cell = [&](GridCell& c) {
    RunConfig rc = base;
    rc.mode = FixedMode{c.alpha};
    rc.epochs = epochs;
    rc.batch_size = c.batch_size;
    rc.seed = c.seed;
    try {
      c.result = train(f, w0, rc);
      c.rho = rho_stats(c.result.records);
      c.m_hat = m_hat_stats(c.result.records);
    } catch (const std::exception& e) {
      c.result.status = RunStatus::failed;
      c.error = e.what();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, cells.size()));
  if (workers == 1) {
    for (auto& c : cells) run_cell(c);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
    });
  }
  for (auto& th : pool) th.join();
  return cells;
}

}  // namespace srt
