#pragma once

#include <srt/controller.hpp>
#include <srt/datasets/synthetic.hpp>
#include <srt/models/quadratic.hpp>
#include <srt/numerics.hpp>
#include <srt/trainer.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace srt {

struct TheoremConstants {
  double mu = 1.0;
  double L = 1.0;
  double M_V = 0.0;
  double M = 0.0;
  double tau = 2.0;
  double c1 = 0.5;
  double c2 = 0.6;
  std::size_t N = 1;
  double alpha0 = 1.0;

  /// Controller settings the theorem talks about, with v_M fed the true M_V.
  SrtConfig controller() const {
    SrtConfig c;
    c.initial_step = alpha0;
    c.lower_threshold = c1;
    c.upper_threshold = c2;
    c.step_factor = tau;
    c.buffer_len = N;
    c.oracle_variance_ratio = M_V;
    return c;
  }

  /// The interval [mu / (tau L^2), 1 / L] the step must settle in.
  double settle_lo() const { return mu / (tau * L * L); }
  double settle_hi() const { return 1.0 / L; }
};

struct AdmissibilityReport {
  bool admissible = false;
  double lower = 0.0;  ///< 1 - mu / (2L)
  double upper = 0.0;  ///< 1 - mu / (2 tau L)
  std::vector<std::string> violations;

  std::string diagnostic() const {
    std::string out;
    for (const auto& v : violations) out += (out.empty() ? "" : "; ") + v;
    return out;
  }
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

inline void check_basic(const TheoremConstants& tc) {
  if (!(tc.mu > 0.0) || !(tc.L >= tc.mu) || !std::isfinite(tc.L)) throw ParameterError("theory: need 0 < mu <= L");
  if (!(tc.tau > 1.0)) throw ParameterError("theory: tau must be > 1");
  if (!(tc.M_V >= 0.0) || !(tc.M >= 0.0)) throw ParameterError("theory: M_V and M must be >= 0");
  if (tc.N < 1) throw ParameterError("theory: N must be >= 1");
  if (!(tc.alpha0 > 0.0)) throw ParameterError("theory: alpha0 must be positive");
}

}  // namespace detail

/// Strict chain 1 - mu/(2L) < c1 < c2 < 1 - mu/(2 tau L); each broken link is named.
inline AdmissibilityReport check_admissible(const TheoremConstants& tc) {
  AdmissibilityReport r;
  r.lower = 1.0 - tc.mu / (2.0 * tc.L);
  r.upper = 1.0 - tc.mu / (2.0 * tc.tau * tc.L);
  if (!(r.lower < tc.c1)) {
    r.violations.push_back("c1 = " + detail::num(tc.c1) + " must exceed 1 - mu/(2L) = " + detail::num(r.lower));
  }
  if (!(tc.c1 < tc.c2)) {
    r.violations.push_back("c1 = " + detail::num(tc.c1) + " must be strictly below c2 = " + detail::num(tc.c2));
  }
  if (!(tc.c2 < r.upper)) {
    r.violations.push_back("c2 = " + detail::num(tc.c2) + " must be below 1 - mu/(2 tau L) = " + detail::num(r.upper));
  }
  r.admissible = r.violations.empty();
  return r;
}

/// Ceiling that forgives rounding noise: values within 1e-9 of an integer snap to it.
inline double tolerant_ceil(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : std::ceil(x);
}

inline double log_base(double base, double x) { return std::log(x) / std::log(base); }

// The formulas below do not require admissibility; derive_constants does.

/// eta = tau M / (4 mu (1 - c1) (M_V + 1))
inline double noise_floor(const TheoremConstants& tc) {
  return tc.tau * tc.M / (4.0 * tc.mu * (1.0 - tc.c1) * (tc.M_V + 1.0));
}

/// 1 - 2 (1 - c1) mu / (tau (M_V + 1) L)
inline double contraction_rate(const TheoremConstants& tc) {
  return 1.0 - 2.0 * (1.0 - tc.c1) * tc.mu / (tc.tau * (tc.M_V + 1.0) * tc.L);
}

struct SettlingIterations {
  double printed = 0.0;      ///< N ceil(max(0, log(mu/(tau L^2 a0)), log(a0 / L)))
  double alternative = 0.0;  ///< same with log(a0 L) as the last term
};

inline SettlingIterations settling_iterations(const TheoremConstants& tc) {
  const double up = log_base(tc.tau, tc.mu / (tc.tau * tc.L * tc.L * tc.alpha0));
  const double n = static_cast<double>(tc.N);
  return {n * tolerant_ceil(std::max({0.0, up, log_base(tc.tau, tc.alpha0 / tc.L)})),
          n * tolerant_ceil(std::max({0.0, up, log_base(tc.tau, tc.alpha0 * tc.L)}))};
}

struct TheoremDerived {
  double k0 = 0.0;
  double k0_alternative = 0.0;
  double eta = 0.0;
  double rate = 0.0;
};

inline TheoremDerived derive_constants(const TheoremConstants& tc) {
  detail::check_basic(tc);
  const auto adm = check_admissible(tc);
  if (!adm.admissible) throw ParameterError("inadmissible constants: " + adm.diagnostic());
  const auto k0 = settling_iterations(tc);
  return {k0.printed, k0.alternative, noise_floor(tc), contraction_rate(tc)};
}

/// Iteration budget for the step to settle from alpha0 on a deterministic
/// quadratic: N x (number of tau-adjustments needed + 1). The count is one-sided:
/// ceil(log_tau(alpha0 L)) decreases when alpha0 > 1/L, or
/// ceil(log_tau(tau L^2 / (mu alpha0))) increases when alpha0 < mu/(tau L^2).
/// `increase_tight` uses ceil(log_tau(mu / (tau L^2 alpha0))) instead, the exact
/// number of tau-steps needed to reach the interval.
struct SettlingBound {
  double decreases = 0.0;
  double increases = 0.0;
  double increases_tight = 0.0;
  double bound = 0.0;
  double bound_tight = 0.0;
};

inline SettlingBound settling_bound(const TheoremConstants& tc) {
  SettlingBound b;
  const double n = static_cast<double>(tc.N);
  b.decreases = std::max(0.0, tolerant_ceil(log_base(tc.tau, tc.alpha0 * tc.L)));
  if (tc.alpha0 < tc.settle_lo()) {
    b.increases = std::max(0.0, tolerant_ceil(log_base(tc.tau, tc.tau * tc.L * tc.L / (tc.mu * tc.alpha0))));
    b.increases_tight = std::max(0.0, tolerant_ceil(log_base(tc.tau, tc.mu / (tc.tau * tc.L * tc.L * tc.alpha0))));
  }
  const double dec = tc.alpha0 > tc.settle_hi() ? b.decreases : 0.0;
  b.bound = n * (dec + b.increases + 1.0);
  b.bound_tight = n * (dec + b.increases_tight + 1.0);
  return b;
}

struct SettlingReport {
  TheoremConstants constants;
  TheoremDerived derived;
  SettlingBound budget;
  std::uint64_t horizon = 0;
  bool entered = false;
  std::uint64_t first_entry = 0;  ///< first k with alpha_k in the interval
  std::uint64_t stays_from = 0;   ///< alpha_k in the interval for every k >= stays_from
  std::uint64_t k_obs = 0;        ///< alpha_k bitwise constant for every k >= k_obs
  double final_alpha = 0.0;
  bool settled = false;
  bool within_bound = false;
  std::vector<double> alpha_trace;
  std::vector<double> gap_trace;  ///< F(w_k) - F*, k = 0..horizon
  std::string note;

  bool passed() const { return settled && within_bound; }
};

/// Runs the controller with the full batch (deterministic) on `problem` for
/// horizon + 1 iterations and locates the settling point. v_M is fed tc.M_V.
/// No divergence cut-off: a large alpha0 may blow the iterate up before the
/// step shrinks, which is part of what is being measured.
inline SettlingReport settling_check(const SyntheticQuadratic& problem, const TheoremConstants& tc,
                                     std::uint64_t horizon) {
  SettlingReport r;
  r.constants = tc;
  r.derived = derive_constants(tc);
  r.budget = settling_bound(tc);
  r.horizon = horizon;

  const QuadraticObjective f(problem);
  RunConfig rc;
  rc.mode = SrtMode{};
  rc.srt = tc.controller();
  rc.batch_size = problem.size();
  rc.epochs = horizon + 1;
  rc.max_iterations = horizon + 1;
  rc.eval_full_loss_every = 1;
  rc.divergence_threshold = std::nullopt;
  const TrainResult run = train(f, f.initial_parameters(), rc);
  for (const auto& rec : run.records) {
    r.alpha_trace.push_back(rec.alpha);
    r.gap_trace.push_back(*rec.full_loss);
  }
  if (run.status != RunStatus::completed || r.alpha_trace.size() != horizon + 1) {
    r.note = "run stopped early: " + run.message;
    return r;
  }

  const double lo = tc.settle_lo();
  const double hi = tc.settle_hi();
  const auto inside = [&](double a) { return a >= lo && a <= hi; };
  const std::size_t len = r.alpha_trace.size();
  for (std::size_t k = 0; k < len; ++k) {
    if (inside(r.alpha_trace[k])) {
      r.entered = true;
      r.first_entry = k;
      break;
    }
  }
  std::size_t stays = len;
  while (stays > 0 && inside(r.alpha_trace[stays - 1])) --stays;
  r.stays_from = stays;
  std::size_t constant = len - 1;
  while (constant > 0 && r.alpha_trace[constant - 1] == r.alpha_trace[len - 1]) --constant;
  r.k_obs = constant;
  r.final_alpha = r.alpha_trace.back();

  // A tail shorter than N would not have given the buffer a chance to move alpha.
  const bool confirmed = (len - 1 - r.k_obs) > tc.N;
  r.settled = r.entered && inside(r.final_alpha) && confirmed;
  r.within_bound = static_cast<double>(r.k_obs) <= r.budget.bound;
  if (!r.entered) {
    r.note = "alpha never entered the interval within the horizon";
  } else if (!r.settled) {
    r.note = "alpha did not stay constant inside the interval for the rest of the horizon";
  } else if (!r.within_bound) {
    r.note = "settled, but later than the iteration budget";
  }
  return r;
}

struct EnvelopeOptions {
  std::size_t num_seeds = 1;
  std::uint64_t horizon = 1000;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// false runs the controller on the estimated variance ratio (diagnostic only).
  bool oracle_variance = true;
};

struct EnvelopePoint {
  std::uint64_t k = 0;
  double mean_gap = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct EnvelopeReport {
  TheoremConstants constants;
  TheoremDerived derived;
  EnvelopeOptions options;
  std::uint64_t k_obs = 0;  ///< max over seeds of the first k after which alpha stays in the interval
  double gap_at_k_obs = 0.0;
  std::vector<EnvelopePoint> points;  ///< k_obs < k <= horizon
  double worst_margin = std::numeric_limits<double>::infinity();
  std::uint64_t worst_k = 0;
  std::size_t failures = 0;
  std::size_t diverged_seeds = 0;
  std::string note;

  bool vacuous() const { return points.empty(); }
  bool passed() const { return failures == 0 && diverged_seeds == 0; }
};

/// Sampling constants of a synthetic quadratic for batches of m drawn without
/// replacement: E||grad F_S||^2 - ||grad F||^2 = M_V ||grad F||^2 + M.
struct SamplingConstants {
  double M_V = 0.0;
  double M = 0.0;
};

inline SamplingConstants sampling_constants(const SyntheticQuadratic& q, std::size_t m) {
  const double n = static_cast<double>(q.size());
  const double md = static_cast<double>(m);
  const double fpc = (n - md) / (md * (n - 1.0));
  return {q.scale_variance() * fpc, q.offset_variance() * fpc};
}

inline EnvelopeReport envelope_check(const SyntheticQuadratic& problem, const TheoremConstants& tc,
                                     const EnvelopeOptions& opt) {
  EnvelopeReport r;
  r.constants = tc;
  r.options = opt;
  r.derived = derive_constants(tc);
  if (tc.mu != problem.mu || tc.L != problem.L) {
    throw ParameterError("envelope_check: theorem mu/L differ from the problem's (" + detail::num(problem.mu) + ", " +
                         detail::num(problem.L) + ")");
  }
  if (opt.num_seeds < 1) throw ParameterError("envelope_check: num_seeds must be >= 1");
  const SamplingConstants sc = sampling_constants(problem, opt.batch_size);
  const double slack = 1e-12;
  if (tc.M_V < sc.M_V * (1.0 - slack) || tc.M < sc.M * (1.0 - slack)) {
    throw ParameterError("envelope_check: theorem constants (M_V = " + detail::num(tc.M_V) + ", M = " +
                         detail::num(tc.M) + ") understate the problem's (M_V = " + detail::num(sc.M_V) +
                         ", M = " + detail::num(sc.M) + ")");
  }

  const QuadraticObjective f(problem);
  const std::size_t len = opt.horizon + 1;
  const double lo = tc.settle_lo();
  const double hi = tc.settle_hi();
  std::vector<std::vector<double>> gaps(opt.num_seeds);
  std::vector<std::uint64_t> stays(opt.num_seeds, 0);
  std::vector<char> diverged(opt.num_seeds, 0);

  auto run_seed = [&](std::size_t s) {
    RunConfig rc;
    rc.mode = SrtMode{};
    rc.srt = tc.controller();
    if (!opt.oracle_variance) rc.srt.oracle_variance_ratio.reset();
    rc.batch_size = opt.batch_size;
    rc.seed = derive_seed(opt.seed, s);
    rc.epochs = len / batches_per_epoch(problem.size(), opt.batch_size) + 1;
    rc.max_iterations = len;
    rc.eval_full_loss_every = 1;
    rc.divergence_threshold = std::nullopt;
    const TrainResult run = train(f, f.initial_parameters(), rc);
    if (run.status != RunStatus::completed || run.records.size() != len) {
      diverged[s] = 1;
      return;
    }
    std::uint64_t from = len;
    while (from > 0 && run.records[from - 1].alpha >= lo && run.records[from - 1].alpha <= hi) --from;
    stays[s] = from;
    gaps[s].reserve(len);
    for (const auto& rec : run.records) gaps[s].push_back(*rec.full_loss);
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(opt.threads, opt.num_seeds));
  if (workers == 1) {
    for (std::size_t s = 0; s < opt.num_seeds; ++s) run_seed(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t s = next++; s < opt.num_seeds; s = next++) run_seed(s);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (char d : diverged) r.diverged_seeds += d ? 1 : 0;
  if (r.diverged_seeds > 0) {
    r.note = std::to_string(r.diverged_seeds) + " seed(s) stopped before the horizon";
    return r;
  }
  r.k_obs = *std::max_element(stays.begin(), stays.end());
  if (r.k_obs >= opt.horizon) {
    r.note = "no post-settling iterations to check";
    return r;
  }

  // Seeds are aggregated in index order so the report does not depend on thread count.
  std::vector<RunningMoments> moments(len);
  for (std::size_t s = 0; s < opt.num_seeds; ++s) {
    for (std::size_t k = r.k_obs; k < len; ++k) moments[k].add(gaps[s][k]);
  }
  r.gap_at_k_obs = moments[r.k_obs].mean();
  const double eta = r.derived.eta;
  const double rate = r.derived.rate;
  for (std::size_t k = r.k_obs + 1; k < len; ++k) {
    EnvelopePoint p;
    p.k = k;
    p.mean_gap = moments[k].mean();
    p.standard_error = moments[k].standard_error();
    p.bound = eta + std::pow(rate, static_cast<double>(k - r.k_obs)) * (r.gap_at_k_obs - eta) + 3.0 * p.standard_error;
    p.pass = p.mean_gap <= p.bound;
    if (!p.pass) ++r.failures;
    const double margin = p.bound - p.mean_gap;
    if (margin < r.worst_margin) {
      r.worst_margin = margin;
      r.worst_k = k;
    }
    r.points.push_back(p);
  }
  return r;
}

inline void write_constants(std::ostream& out, const TheoremConstants& tc) {
  out << "constants: mu=" << detail::num(tc.mu) << " L=" << detail::num(tc.L) << " M_V=" << detail::num(tc.M_V)
      << " M=" << detail::num(tc.M) << " tau=" << detail::num(tc.tau) << " c1=" << detail::num(tc.c1)
      << " c2=" << detail::num(tc.c2) << " N=" << tc.N << " alpha0=" << detail::num(tc.alpha0) << '\n';
}

inline void write_admissibility(std::ostream& out, const AdmissibilityReport& a) {
  out << "admissible: " << (a.admissible ? "yes" : "no") << " (need " << detail::num(a.lower) << " < c1 < c2 < "
      << detail::num(a.upper) << ")\n";
  for (const auto& v : a.violations) out << "  violated: " << v << '\n';
}

inline void write_derived(std::ostream& out, const TheoremDerived& d) {
  out << "derived: k0=" << detail::num(d.k0) << " k0_alternative=" << detail::num(d.k0_alternative)
      << " eta=" << detail::num(d.eta) << " rate=" << detail::num(d.rate) << '\n';
}

inline void write_settling_report(std::ostream& out, const SettlingReport& r) {
  out << "[settling]\n";
  out << "interval: [" << detail::num(r.constants.settle_lo()) << ", " << detail::num(r.constants.settle_hi())
      << "]\n";
  out << "horizon: " << r.horizon << '\n';
  out << "entered: " << (r.entered ? "yes" : "no") << " first_entry=" << r.first_entry
      << " stays_from=" << r.stays_from << '\n';
  out << "K_obs: " << r.k_obs << " final_alpha=" << detail::num(r.final_alpha) << '\n';
  out << "k0 printed=" << detail::num(r.derived.k0) << " (K_obs " << (r.k_obs <= r.derived.k0 ? "<=" : ">")
      << " k0), alternative=" << detail::num(r.derived.k0_alternative) << " (K_obs "
      << (r.k_obs <= r.derived.k0_alternative ? "<=" : ">") << " k0)\n";
  out << "budget: decreases=" << detail::num(r.budget.decreases) << " increases=" << detail::num(r.budget.increases)
      << " bound=" << detail::num(r.budget.bound) << " (tight increase count "
      << detail::num(r.budget.increases_tight) << ", bound " << detail::num(r.budget.bound_tight) << ")\n";
  out << "settled: " << (r.settled ? "yes" : "no") << " within_bound: " << (r.within_bound ? "yes" : "no") << '\n';
  if (!r.note.empty()) out << "note: " << r.note << '\n';
  out << "result: " << (r.passed() ? "PASS" : "FAIL") << '\n';
  if (!r.passed()) {
    out << "alpha trace (k:alpha at each change):";
    for (std::size_t k = 0; k < r.alpha_trace.size(); ++k) {
      if (k == 0 || r.alpha_trace[k] != r.alpha_trace[k - 1]) out << ' ' << k << ':' << detail::num(r.alpha_trace[k]);
    }
    out << '\n';
  }
}

inline void write_envelope_report(std::ostream& out, const EnvelopeReport& r, bool per_k = true) {
  out << "[envelope]\n";
  out << "seeds: " << r.options.num_seeds << " horizon: " << r.options.horizon << " batch_size: "
      << r.options.batch_size << " variance: " << (r.options.oracle_variance ? "oracle" : "estimated") << '\n';
  out << "K_obs: " << r.k_obs << " mean_gap_at_K_obs=" << detail::num(r.gap_at_k_obs) << '\n';
  if (!r.note.empty()) out << "note: " << r.note << '\n';
  if (!r.vacuous()) {
    out << "checked: " << r.points.size() << " failures: " << r.failures << " worst_margin="
        << detail::num(r.worst_margin) << " at k=" << r.worst_k << '\n';
  }
  out << "result: " << (r.passed() ? "PASS" : "FAIL") << '\n';
  if (per_k) {
    out << "k,mean_gap,se,bound,pass\n";
    for (const auto& p : r.points) {
      out << p.k << ',' << detail::num(p.mean_gap) << ',' << detail::num(p.standard_error) << ','
          << detail::num(p.bound) << ',' << (p.pass ? "pass" : "FAIL") << '\n';
    }
  }
}

}  // namespace srt
