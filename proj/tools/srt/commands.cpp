#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

namespace srt::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

NoiseKind parse_noise(const std::string& s) {
  if (s == "additive") return NoiseKind::additive;
  if (s == "multiplicative") return NoiseKind::multiplicative;
  return NoiseKind::noiseless;
}

SyntheticQuadratic build_quadratic(const ProblemConfig& pc) {
  Rng rng(pc.seed);
  return make_synthetic(parse_noise(pc.noise), pc.n, pc.d, pc.mu, pc.L, pc.noise_level, rng);
}

template <typename Feature>
LabeledDataset<Feature> load_dataset(const ProblemConfig& pc) {
  LabeledDataset<Feature> data;
  if (pc.kind == "libsvm") {
    data = load_libsvm_file<Feature>(pc.path, pc.dimension);
  } else {
    data = load_idx_dataset<Feature>(pc.images, pc.labels, pc.num_classes);
  }
  if (pc.normalize) min_max_normalize(data);
  return data;
}

template <typename Feature, typename Fn>
void with_model(const ExperimentConfig& c, const LabeledDataset<Feature>& data, Fn&& fn) {
  if (c.model.kind == "logistic_regression") {
    if (data.num_classes != 2) {
      throw ConfigError("config error: 'model.kind' logistic_regression needs a binary dataset (found " +
                        std::to_string(data.num_classes) + " classes)");
    }
    const LogisticRegression<Feature> f(data, c.model.l2_penalty);
    fn(f, f.initial_parameters());
  } else {
    ModelSpec spec{ModelKind::mlp, data.dimension(), static_cast<std::size_t>(data.num_classes), c.model.hidden_dims,
                   c.model.l2_penalty};
    const Mlp<Feature> f(spec, data);
    Rng rng = init_rng(c.run.seed);
    fn(f, f.initialize(rng));
  }
}

/// Builds the configured objective and its starting point, then calls fn(objective, w0).
template <typename Fn>
void with_objective(const ExperimentConfig& c, Fn&& fn) {
  const auto& pc = c.problem;
  if (pc.kind == "synthetic_quadratic") {
    const SyntheticQuadratic q = build_quadratic(pc);
    const QuadraticObjective f(q);
    fn(f, f.initial_parameters());
  } else if (pc.kind == "synthetic_logistic") {
    Rng rng(pc.seed);
    const auto data = make_logistic_synthetic(pc.n, pc.d, rng, pc.signal);
    with_model(c, data, fn);
  } else if (pc.float32) {
    const auto data = load_dataset<float>(pc);
    with_model(c, data, fn);
  } else {
    const auto data = load_dataset<double>(pc);
    with_model(c, data, fn);
  }
}

bool is_output_file(const fs::path& p) {
  static const std::regex cell(R"(alpha_.*_batch_[0-9]+\.csv)");
  const std::string name = p.filename().string();
  return name == "records.csv" || name == "resolved_config.json" || name == "summary.json" ||
         name == "grid_summary.csv" || name == "verify_report.txt" || std::regex_match(name, cell);
}

/// Creates the output directory. An existing nonempty directory is only reused
/// with output.overwrite, and then only files this tool writes are removed.
void prepare_output(const OutputConfig& out) {
  if (fs::exists(out.directory)) {
    if (!fs::is_directory(out.directory)) {
      throw ConfigError("config error: 'output.directory' " + out.directory.string() + " is not a directory");
    }
    if (!fs::is_empty(out.directory)) {
      if (!out.overwrite) {
        throw ConfigError("config error: 'output.directory' " + out.directory.string() +
                          " is not empty (set output.overwrite to reuse it)");
      }
      for (const auto& entry : fs::directory_iterator(out.directory)) {
        if (entry.is_regular_file() && is_output_file(entry.path())) fs::remove(entry.path());
      }
    }
  }
  fs::create_directories(out.directory);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

}  // namespace

int cmd_run(const ExperimentConfig& c, const Options&) {
  prepare_output(c.output);
  write_json(c.output.directory / "resolved_config.json", resolved_json(c));
  int code = exit_ok;
  with_objective(c, [&](const auto& f, DenseVector w0) {
    TrainResult result;
    {
      CsvRecordWriter writer(c.output.directory / "records.csv");
      result = train(f, std::move(w0), c.run, [&](const IterationRecord& r) { writer.write(r); });
    }
    json summary{{"command", "run"},
                 {"mode", std::string(mode_name(c.run.mode))},
                 {"status", std::string(to_string(result.status))},
                 {"iterations", result.records.size()}};
    if (!result.message.empty()) summary["message"] = result.message;
    if (!result.records.empty()) {
      summary["final_alpha"] = result.state ? result.state->alpha : result.records.back().alpha;
      summary["final_batch_loss"] = result.records.back().batch_loss;
    }
    if (result.state) {
      summary["increases"] = result.state->increases;
      summary["decreases"] = result.state->decreases;
      summary["adjustments"] = result.state->adjustments();
    } else {
      summary["adjustments"] = 0;
    }
    if (result.status == RunStatus::completed) summary["final_full_loss"] = f.full_loss(result.parameters);
    write_json(c.output.directory / "summary.json", summary);

    std::cout << "status=" << summary["status"].get<std::string>() << " iterations=" << result.records.size();
    if (summary.contains("final_alpha")) std::cout << " final_alpha=" << summary["final_alpha"].dump();
    if (summary.contains("final_batch_loss")) std::cout << " final_batch_loss=" << summary["final_batch_loss"].dump();
    std::cout << " adjustments=" << summary["adjustments"].dump() << '\n';
    if (result.status == RunStatus::diverged) {
      std::cerr << "srt: " << result.message << '\n';
      code = exit_diverged;
    }
  });
  return code;
}

int cmd_ratios(const ExperimentConfig& c, const Options& options) {
  if (!c.has_ratios) throw ConfigError("config error: 'ratios' section is required for the ratios command");
  if (c.ratios.alphas.empty()) throw ConfigError("config error: 'ratios.alphas' must be a nonempty list");
  if (c.ratios.batch_sizes.empty()) throw ConfigError("config error: 'ratios.batch_sizes' must be a nonempty list");
  prepare_output(c.output);
  write_json(c.output.directory / "resolved_config.json", resolved_json(c));
  with_objective(c, [&](const auto& f, DenseVector w0) {
    const auto cells = fixed_step_ratio_study(f, w0, c.ratios.alphas, c.ratios.batch_sizes, c.run.epochs, c.run.seed,
                                              options.threads, c.run);
    std::ostringstream table;
    table << "alpha,batch_size,seed,status,iterations,rho_mean,rho_std,rho_count,m_hat_mean,m_hat_std\n";
    for (const auto& cell : cells) {
      {
        std::ofstream out(c.output.directory / cell_csv_name(cell.alpha, cell.batch_size), std::ios::binary);
        write_records_csv(out, cell.result.records);
      }
      std::string row;
      detail::append_number(row, cell.alpha);
      row += ',' + std::to_string(cell.batch_size) + ',' + std::to_string(cell.seed) + ',' +
             std::string(to_string(cell.result.status)) + ',' + std::to_string(cell.result.records.size());
      for (double v : {cell.rho.mean, cell.rho.stddev}) {
        row += ',';
        detail::append_number(row, v);
      }
      row += ',' + std::to_string(cell.rho.count);
      for (double v : {cell.m_hat.mean, cell.m_hat.stddev}) {
        row += ',';
        detail::append_number(row, v);
      }
      table << row << '\n';
      if (!cell.error.empty()) std::cerr << "srt: cell " << cell_csv_name(cell.alpha, cell.batch_size) << ": " << cell.error << '\n';
      if (cell.result.status == RunStatus::diverged) {
        std::cerr << "srt: cell " << cell_csv_name(cell.alpha, cell.batch_size) << " " << cell.result.message << '\n';
      }
    }
    write_text(c.output.directory / "grid_summary.csv", table.str());
    std::cout << table.str();
  });
  return exit_ok;
}

int cmd_verify(const ExperimentConfig& c, const Options& options) {
  if (c.problem.kind != "synthetic_quadratic") {
    throw ConfigError("config error: 'problem.kind' must be synthetic_quadratic for verify");
  }
  prepare_output(c.output);
  write_json(c.output.directory / "resolved_config.json", resolved_json(c));

  const SyntheticQuadratic problem = build_quadratic(c.problem);
  const auto sampling = sampling_constants(problem, c.run.batch_size);
  TheoremConstants tc;
  tc.mu = problem.mu;
  tc.L = problem.L;
  tc.M_V = c.verify.M_V.value_or(sampling.M_V);
  tc.M = c.verify.M.value_or(sampling.M);
  tc.tau = c.run.srt.step_factor;
  tc.c1 = c.run.srt.lower_threshold;
  tc.c2 = c.run.srt.upper_threshold;
  tc.N = c.run.srt.buffer_len;
  tc.alpha0 = c.run.srt.initial_step;

  std::ostringstream report;
  write_constants(report, tc);
  const auto adm = check_admissible(tc);
  write_admissibility(report, adm);
  if (!adm.admissible) {
    write_text(c.output.directory / "verify_report.txt", report.str());
    throw ConfigError("config error: inadmissible 'srt.c1'/'srt.c2': " + adm.diagnostic());
  }
  write_derived(report, derive_constants(tc));

  // The settling argument is deterministic: it runs on the noiseless version of the problem.
  SyntheticQuadratic twin = problem;
  for (auto& b : twin.offsets) b = DenseVector(problem.dimension());
  std::fill(twin.scales.begin(), twin.scales.end(), 0.0);
  TheoremConstants tc_settle = tc;
  tc_settle.M_V = 0.0;
  tc_settle.M = 0.0;
  const SettlingReport settling = settling_check(twin, tc_settle, c.verify.settling_horizon);
  write_settling_report(report, settling);

  EnvelopeOptions eo;
  eo.num_seeds = c.verify.num_seeds;
  eo.horizon = c.verify.horizon;
  eo.batch_size = c.run.batch_size;
  eo.seed = c.run.seed;
  eo.threads = options.threads;
  const EnvelopeReport envelope = envelope_check(problem, tc, eo);
  write_envelope_report(report, envelope);

  if (c.verify.diagnostic_estimated) {
    eo.oracle_variance = false;
    report << "[diagnostic: estimated variance ratio, not part of the verdict]\n";
    write_envelope_report(report, envelope_check(problem, tc, eo), false);
  }
  const bool ok = settling.passed() && envelope.passed();
  report << "verdict: " << (ok ? "PASS" : "FAIL") << '\n';
  write_text(c.output.directory / "verify_report.txt", report.str());

  json summary{{"command", "verify"},
               {"settling", settling.passed() ? "pass" : "fail"},
               {"settling_k_obs", settling.k_obs},
               {"settling_final_alpha", settling.final_alpha},
               {"envelope", envelope.passed() ? "pass" : "fail"},
               {"envelope_k_obs", envelope.k_obs},
               {"envelope_checked", envelope.points.size()},
               {"envelope_worst_margin", envelope.vacuous() ? json(nullptr) : json(envelope.worst_margin)},
               {"verdict", ok ? "pass" : "fail"}};
  write_json(c.output.directory / "summary.json", summary);
  std::cout << "settling=" << summary["settling"].get<std::string>() << " (K_obs=" << settling.k_obs
            << ") envelope=" << summary["envelope"].get<std::string>() << " (checked " << envelope.points.size()
            << ") verdict=" << summary["verdict"].get<std::string>() << '\n';
  return ok ? exit_ok : exit_check_failed;
}

}  // namespace srt::cli
