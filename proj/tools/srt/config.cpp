#include "config.hpp"

#include <fstream>
#include <set>

namespace srt::cli {

using nlohmann::json;

namespace {

// Reads one config section, remembering which keys were used so leftovers can
// be reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      node_ = &doc.at(name_);
      if (!node_->is_object()) throw ConfigError("config error: '" + name_ + "' must be an object");
    }
  }

  bool present() const { return node_ != nullptr; }
  bool has(const std::string& key) const { return node_ && node_->contains(key); }
  std::string key(const std::string& k) const { return name_ + "." + k; }

  template <typename T>
  void get(const std::string& k, T& out) {
    if (!has(k)) return;
    used_.insert(k);
    try {
      out = node_->at(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config error: '" + key(k) + "' has the wrong type");
    }
  }

  template <typename T>
  void get(const std::string& k, std::optional<T>& out) {
    if (!has(k)) return;
    used_.insert(k);
    if (node_->at(k).is_null()) {
      out.reset();
      return;
    }
    T value{};
    try {
      value = node_->at(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config error: '" + key(k) + "' has the wrong type");
    }
    out = value;
  }

  const json& raw(const std::string& k) {
    used_.insert(k);
    return node_->at(k);
  }

  void finish() const {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("config error: unknown key '" + key(it.key()) + "'");
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> used_;
};

void expect(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config error: '" + key + "' " + what);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return std::filesystem::absolute(base / p).lexically_normal();
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config error: top level must be an object");
  static const std::set<std::string> sections{"problem", "model", "run", "srt", "ratios", "verify", "fetch", "output"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!sections.count(it.key())) throw ConfigError("config error: unknown section '" + it.key() + "'");
  }

  ExperimentConfig c;

  Section p(doc, "problem");
  auto& pc = c.problem;
  p.get("kind", pc.kind);
  expect(pc.kind == "synthetic_quadratic" || pc.kind == "synthetic_logistic" || pc.kind == "libsvm" || pc.kind == "idx",
         "problem.kind", "must be synthetic_quadratic, synthetic_logistic, libsvm or idx");
  if (pc.kind == "synthetic_quadratic") {
    p.get("noise", pc.noise);
    expect(pc.noise == "additive" || pc.noise == "multiplicative" || pc.noise == "noiseless", "problem.noise",
           "must be additive, multiplicative or noiseless");
    p.get("n", pc.n);
    p.get("d", pc.d);
    p.get("mu", pc.mu);
    p.get("L", pc.L);
    p.get("noise_level", pc.noise_level);
    p.get("seed", pc.seed);
    expect(pc.n >= 2, "problem.n", "must be >= 2");
    expect(pc.d >= 1, "problem.d", "must be >= 1");
    expect(pc.mu > 0.0 && pc.mu <= pc.L, "problem.mu", "must satisfy 0 < mu <= L");
    expect(pc.noise_level >= 0.0, "problem.noise_level", "must be >= 0");
  } else if (pc.kind == "synthetic_logistic") {
    p.get("n", pc.n);
    p.get("d", pc.d);
    p.get("signal", pc.signal);
    p.get("seed", pc.seed);
    expect(pc.n >= 1, "problem.n", "must be >= 1");
    expect(pc.d >= 1, "problem.d", "must be >= 1");
  } else if (pc.kind == "libsvm") {
    std::string path;
    p.get("path", path);
    expect(!path.empty(), "problem.path", "is required for libsvm problems");
    pc.path = resolve(base_dir, path);
    p.get("dimension", pc.dimension);
    expect(pc.dimension >= 1, "problem.dimension", "is required and must be >= 1");
  } else {
    std::string images, labels;
    p.get("images", images);
    p.get("labels", labels);
    expect(!images.empty(), "problem.images", "is required for idx problems");
    expect(!labels.empty(), "problem.labels", "is required for idx problems");
    pc.images = resolve(base_dir, images);
    pc.labels = resolve(base_dir, labels);
    p.get("num_classes", pc.num_classes);
    expect(!pc.num_classes || *pc.num_classes >= 2, "problem.num_classes", "must be >= 2");
  }
  if (pc.kind == "libsvm" || pc.kind == "idx") {
    p.get("normalize", pc.normalize);
    p.get("float32", pc.float32);
  }
  p.finish();

  Section m(doc, "model");
  auto& mc = c.model;
  m.get("kind", mc.kind);
  if (mc.kind.empty()) mc.kind = pc.kind == "synthetic_quadratic" ? "quadratic" : pc.kind == "idx" ? "mlp" : "logistic_regression";
  if (pc.kind == "synthetic_quadratic") {
    expect(mc.kind == "quadratic", "model.kind", "must be quadratic for synthetic_quadratic problems");
  } else {
    expect(mc.kind == "logistic_regression" || mc.kind == "mlp", "model.kind", "must be logistic_regression or mlp");
    if (mc.kind == "mlp") {
      m.get("hidden_dims", mc.hidden_dims);
      expect(!mc.hidden_dims.empty(), "model.hidden_dims", "needs at least one hidden layer");
      for (std::size_t h : mc.hidden_dims) expect(h > 0, "model.hidden_dims", "entries must be positive");
    }
    m.get("l2_penalty", mc.l2_penalty);
    expect(mc.l2_penalty >= 0.0, "model.l2_penalty", "must be >= 0");
  }
  m.finish();

  Section r(doc, "run");
  auto& rc = c.run;
  std::string mode = "srt";
  r.get("mode", mode);
  if (mode == "srt") {
    rc.mode = SrtMode{};
  } else if (mode == "fixed") {
    FixedMode f;
    expect(r.has("alpha"), "run.alpha", "is required in fixed mode");
    r.get("alpha", f.alpha);
    expect(f.alpha > 0.0, "run.alpha", "must be positive");
    rc.mode = f;
  } else if (mode == "theoretical") {
    TheoreticalMode t;
    expect(r.has("L"), "run.L", "is required in theoretical mode");
    r.get("L", t.L);
    r.get("M_V", t.M_V);
    expect(t.L > 0.0, "run.L", "must be positive");
    expect(t.M_V >= 0.0, "run.M_V", "must be >= 0");
    rc.mode = t;
  } else {
    throw ConfigError("config error: 'run.mode' must be srt, fixed or theoretical");
  }
  r.get("epochs", rc.epochs);
  r.get("batch_size", rc.batch_size);
  r.get("seed", rc.seed);
  r.get("eval_full_loss_every", rc.eval_full_loss_every);
  r.get("max_iterations", rc.max_iterations);
  r.get("divergence_threshold", rc.divergence_threshold);
  expect(rc.epochs >= 1, "run.epochs", "must be >= 1");
  expect(rc.batch_size >= 1, "run.batch_size", "must be >= 1");
  expect(!rc.divergence_threshold || *rc.divergence_threshold > 0.0, "run.divergence_threshold", "must be positive");
  r.finish();

  Section s(doc, "srt");
  auto& sc = rc.srt;
  s.get("alpha0", sc.initial_step);
  s.get("c1", sc.lower_threshold);
  s.get("c2", sc.upper_threshold);
  s.get("tau", sc.step_factor);
  s.get("buffer_len", sc.buffer_len);
  s.get("denom_floor", sc.denominator_floor);
  if (s.has("variance_mode")) {
    const json& vm = s.raw("variance_mode");
    if (vm.is_string() && vm.get<std::string>() == "estimated") {
      sc.oracle_variance_ratio.reset();
    } else if (vm.is_object() && vm.size() == 1 && vm.contains("oracle") && vm.at("oracle").is_number()) {
      sc.oracle_variance_ratio = vm.at("oracle").get<double>();
    } else {
      throw ConfigError("config error: 'srt.variance_mode' must be \"estimated\" or {\"oracle\": <M_V>}");
    }
  }
  expect(sc.initial_step > 0.0, "srt.alpha0", "must be positive");
  expect(sc.lower_threshold > 0.0 && sc.lower_threshold < 1.0, "srt.c1", "must lie in (0, 1)");
  expect(sc.upper_threshold >= sc.lower_threshold && sc.upper_threshold < 1.0, "srt.c2", "must satisfy c1 <= c2 < 1");
  expect(sc.step_factor > 1.0, "srt.tau", "must be > 1");
  expect(sc.buffer_len >= 1, "srt.buffer_len", "must be >= 1");
  expect(sc.denominator_floor > 0.0, "srt.denom_floor", "must be positive");
  expect(!sc.oracle_variance_ratio || *sc.oracle_variance_ratio >= 0.0, "srt.variance_mode", "oracle M_V must be >= 0");
  s.finish();

  Section g(doc, "ratios");
  c.has_ratios = g.present();
  g.get("alphas", c.ratios.alphas);
  g.get("batch_sizes", c.ratios.batch_sizes);
  for (double a : c.ratios.alphas) expect(a > 0.0, "ratios.alphas", "entries must be positive");
  for (std::size_t b : c.ratios.batch_sizes) expect(b >= 1, "ratios.batch_sizes", "entries must be >= 1");
  g.finish();

  Section v(doc, "verify");
  c.has_verify = v.present();
  v.get("num_seeds", c.verify.num_seeds);
  v.get("horizon", c.verify.horizon);
  v.get("settling_horizon", c.verify.settling_horizon);
  v.get("M_V", c.verify.M_V);
  v.get("M", c.verify.M);
  v.get("diagnostic_estimated", c.verify.diagnostic_estimated);
  expect(c.verify.num_seeds >= 1, "verify.num_seeds", "must be >= 1");
  expect(!c.verify.M_V || *c.verify.M_V >= 0.0, "verify.M_V", "must be >= 0");
  expect(!c.verify.M || *c.verify.M >= 0.0, "verify.M", "must be >= 0");
  v.finish();

  Section f(doc, "fetch");
  c.has_fetch = f.present();
  f.get("dataset", c.fetch.dataset);
  std::string dest = c.fetch.destination.string();
  f.get("destination", dest);
  c.fetch.destination = resolve(base_dir, dest);
  f.get("base_url", c.fetch.base_url);
  f.finish();

  Section o(doc, "output");
  std::string dir = c.output.directory.string();
  o.get("directory", dir);
  c.output.directory = resolve(base_dir, dir);
  o.get("overwrite", c.output.overwrite);
  o.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot read '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config error: '" + path.string() + "' is not valid JSON (" + e.what() + ")");
  }
  return parse_config(doc, std::filesystem::absolute(path).parent_path());
}

json resolved_json(const ExperimentConfig& c) {
  json doc;
  const auto& pc = c.problem;
  json p{{"kind", pc.kind}};
  if (pc.kind == "synthetic_quadratic") {
    p.update({{"noise", pc.noise}, {"n", pc.n}, {"d", pc.d}, {"mu", pc.mu}, {"L", pc.L},
              {"noise_level", pc.noise_level}, {"seed", pc.seed}});
  } else if (pc.kind == "synthetic_logistic") {
    p.update({{"n", pc.n}, {"d", pc.d}, {"signal", pc.signal}, {"seed", pc.seed}});
  } else if (pc.kind == "libsvm") {
    p.update({{"path", pc.path.string()}, {"dimension", pc.dimension}});
  } else {
    p.update({{"images", pc.images.string()}, {"labels", pc.labels.string()}});
    p["num_classes"] = pc.num_classes ? json(*pc.num_classes) : json(nullptr);
  }
  if (pc.kind == "libsvm" || pc.kind == "idx") p.update({{"normalize", pc.normalize}, {"float32", pc.float32}});
  doc["problem"] = p;

  json m{{"kind", c.model.kind}};
  if (c.model.kind != "quadratic") {
    if (c.model.kind == "mlp") m["hidden_dims"] = c.model.hidden_dims;
    m["l2_penalty"] = c.model.l2_penalty;
  }
  doc["model"] = m;

  const auto& rc = c.run;
  json r{{"mode", std::string(mode_name(rc.mode))}};
  if (const auto* f = std::get_if<FixedMode>(&rc.mode)) r["alpha"] = f->alpha;
  if (const auto* t = std::get_if<TheoreticalMode>(&rc.mode)) r.update({{"L", t->L}, {"M_V", t->M_V}});
  r.update({{"epochs", rc.epochs}, {"batch_size", rc.batch_size}, {"seed", rc.seed}});
  r["eval_full_loss_every"] = rc.eval_full_loss_every ? json(*rc.eval_full_loss_every) : json(nullptr);
  r["max_iterations"] = rc.max_iterations ? json(*rc.max_iterations) : json(nullptr);
  r["divergence_threshold"] = rc.divergence_threshold ? json(*rc.divergence_threshold) : json(nullptr);
  doc["run"] = r;

  const auto& sc = rc.srt;
  doc["srt"] = {{"alpha0", sc.initial_step},
                {"c1", sc.lower_threshold},
                {"c2", sc.upper_threshold},
                {"tau", sc.step_factor},
                {"buffer_len", sc.buffer_len},
                {"denom_floor", sc.denominator_floor},
                {"variance_mode", sc.oracle_variance_ratio ? json{{"oracle", *sc.oracle_variance_ratio}}
                                                           : json("estimated")}};
  if (c.has_ratios) doc["ratios"] = {{"alphas", c.ratios.alphas}, {"batch_sizes", c.ratios.batch_sizes}};
  if (c.has_verify) {
    doc["verify"] = {{"num_seeds", c.verify.num_seeds},
                     {"horizon", c.verify.horizon},
                     {"settling_horizon", c.verify.settling_horizon},
                     {"M_V", c.verify.M_V ? json(*c.verify.M_V) : json(nullptr)},
                     {"M", c.verify.M ? json(*c.verify.M) : json(nullptr)},
                     {"diagnostic_estimated", c.verify.diagnostic_estimated}};
  }
  if (c.has_fetch) {
    doc["fetch"] = {{"dataset", c.fetch.dataset},
                    {"destination", c.fetch.destination.string()},
                    {"base_url", c.fetch.base_url}};
  }
  doc["output"] = {{"directory", c.output.directory.string()}, {"overwrite", c.output.overwrite}};
  return doc;
}

}  // namespace srt::cli
