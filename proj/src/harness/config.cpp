#include "sharpline/harness/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "sharpline/errors.hpp"
#include "sharpline/rng.hpp"

namespace sharpline::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size();
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-' || s[0] == '+') return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtoull(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

}  // namespace

ConfigReader ConfigReader::from_string(const std::string& text, const std::string& origin) {
  ConfigReader r;
  r.origin_ = origin;
  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (r.entries_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    r.entries_[key] = Entry{trim(line.substr(eq + 1)), line_no};
  }
  return r;
}

ConfigReader ConfigReader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path.string());
}

bool ConfigReader::has(const std::string& key) const { return entries_.count(key) != 0; }

void ConfigReader::set(const std::string& key, const std::string& value) {
  entries_[key] = Entry{value, 0};
}

const ConfigReader::Entry* ConfigReader::lookup(const std::string& key) {
  used_.insert(key);
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void ConfigReader::bad(const std::string& key, const std::string& why) const {
  const auto it = entries_.find(key);
  const std::string where = it == entries_.end() || it->second.line == 0
                                ? origin_
                                : origin_ + ":" + std::to_string(it->second.line);
  throw ConfigError(where + ": " + key + ": " + why);
}

std::string ConfigReader::str(const std::string& key, const std::string& fallback) {
  const Entry* e = lookup(key);
  return e ? e->value : fallback;
}

double ConfigReader::real(const std::string& key, double fallback) {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  double v = 0;
  if (!parse_double(e->value, v)) bad(key, "expected a number, got '" + e->value + "'");
  return v;
}

std::size_t ConfigReader::count(const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(u64(key, fallback));
}

std::uint64_t ConfigReader::u64(const std::string& key, std::uint64_t fallback) {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  if (!parse_u64(e->value, v)) bad(key, "expected a nonnegative integer, got '" + e->value + "'");
  return v;
}

bool ConfigReader::flag(const std::string& key, bool fallback) {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  bad(key, "expected true or false, got '" + e->value + "'");
}

std::vector<double> ConfigReader::reals(const std::string& key, const std::vector<double>& fallback) {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(e->value)) {
    double v = 0;
    if (!parse_double(item, v)) bad(key, "expected a number, got '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> ConfigReader::counts(const std::string& key,
                                              const std::vector<std::size_t>& fallback) {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::vector<std::size_t> out;
  for (const auto& item : split_list(e->value)) {
    std::uint64_t v = 0;
    if (!parse_u64(item, v)) bad(key, "expected a nonnegative integer, got '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::string> ConfigReader::strs(const std::string& key, const std::vector<std::string>& fallback) {
  const Entry* e = lookup(key);
  return e ? split_list(e->value) : fallback;
}

void ConfigReader::finish() const {
  std::vector<std::string> unknown;
  for (const auto& [key, entry] : entries_) {
    if (!used_.count(key)) unknown.push_back(key + " (line " + std::to_string(entry.line) + ")");
  }
  if (unknown.empty()) return;
  std::string msg = origin_ + ": unknown key";
  msg += unknown.size() > 1 ? "s: " : ": ";
  for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", " : "") + unknown[i];
  throw ConfigError(msg);
}

std::string to_string(ProbeKind k) {
  switch (k) {
    case ProbeKind::critical: return "critical";
    case ProbeKind::directional: return "directional";
    case ProbeKind::hessian: return "hessian";
    case ProbeKind::preconditioned: return "preconditioned";
    case ProbeKind::relative: return "relative";
  }
  return "?";
}

ProbeKind parse_probe_kind(const std::string& s) {
  for (ProbeKind k : {ProbeKind::critical, ProbeKind::directional, ProbeKind::hessian,
                      ProbeKind::preconditioned, ProbeKind::relative}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown probe kind '" + s + "'");
}

bool ProbeConfig::wants(ProbeKind k) const {
  return std::find(menu.begin(), menu.end(), k) != menu.end();
}

std::string to_string(PlotKind k) {
  switch (k) {
    case PlotKind::sharpness_vs_step: return "sharpness-vs-step";
    case PlotKind::boundary_map: return "boundary-map";
    case PlotKind::sweep: return "sweep";
  }
  return "?";
}

PlotKind parse_plot_kind(const std::string& s) {
  for (PlotKind k : {PlotKind::sharpness_vs_step, PlotKind::boundary_map, PlotKind::sweep}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown plot kind '" + s + "'");
}

namespace {

template <typename F>
auto rethrow_as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

data::TaskSpec read_task(ConfigReader& r, const std::string& prefix, std::uint64_t seed,
                          std::uint64_t sample_salt = 12) {
  data::TaskSpec t;
  t.kind = rethrow_as_config(prefix + ".kind", [&] {
    return data::parse_task_kind(r.str(prefix + ".kind", "gaussian-mixture-classify"));
  });
  t.dim = r.count(prefix + ".dim", t.dim);
  t.classes = r.count(prefix + ".classes", t.classes);
  t.separation = r.real(prefix + ".separation", t.separation);
  t.noise = r.real(prefix + ".noise", t.noise);
  t.structure_seed = r.u64(prefix + ".structure_seed", mix_seed(seed, 11));
  t.sample_seed = r.u64(prefix + ".sample_seed", mix_seed(seed, sample_salt));
  t.rotation_seed = r.u64(prefix + ".rotation_seed", mix_seed(seed, 13));
  t.angle = r.real(prefix + ".angle", t.angle);
  rethrow_as_config(prefix, [&] { t.validate(); return 0; });
  return t;
}

ModelSpec read_mlp(ConfigReader& r, std::uint64_t seed) {
  ModelSpec m;
  m.widths = r.counts("model.widths", {8, 32, 4});
  m.activation = rethrow_as_config("model.activation", [&] {
    return parse_activation(r.str("model.activation", "gelu"));
  });
  m.init_seed = r.u64("model.init_seed", mix_seed(seed, 1));
  m.init_scale = r.real("model.init_scale", m.init_scale);
  return m;
}

optim::Config read_optimizer(ConfigReader& r, const std::string& fallback_kind) {
  optim::Config c;
  c.kind = rethrow_as_config("optimizer", [&] { return optim::parse_kind(r.str("optimizer", fallback_kind)); });
  c.lr = r.real("optimizer.lr", c.lr);
  c.beta1 = r.real("optimizer.beta1", c.beta1);
  c.beta2 = r.real("optimizer.beta2", c.beta2);
  c.eps = r.real("optimizer.eps", c.eps);
  c.weight_decay = r.real("optimizer.weight_decay", c.weight_decay);
  rethrow_as_config("optimizer", [&] { c.validate(); return 0; });
  return c;
}

probes::ProbeSettings read_search(ConfigReader& r) {
  probes::ProbeSettings s;
  s.eta0 = r.real("probe.eta0", s.eta0);
  s.epsilon = r.real("probe.epsilon", s.epsilon);
  s.max_exponential_iters = r.count("probe.max_iters", s.max_exponential_iters);
  rethrow_as_config("probe", [&] { s.validate(); return 0; });
  return s;
}

std::filesystem::path read_out(ConfigReader& r, const std::filesystem::path& override_dir) {
  const std::string configured = r.str("out", ".");
  return override_dir.empty() ? std::filesystem::path(configured) : override_dir;
}

}  // namespace

void TrainConfig::validate() const {
  if (model == ModelKind::mlp) {
    try {
      mlp.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  } else {
    if (quadratic.eigenvalues.empty()) throw ConfigError("quadratic.eigenvalues must be nonempty");
    const std::size_t n = quadratic.eigenvalues.size();
    if (!quadratic.offset.empty() && quadratic.offset.size() != n) {
      throw ConfigError("quadratic.offset must match quadratic.eigenvalues in length");
    }
    if (!quadratic.init.empty() && quadratic.init.size() != n) {
      throw ConfigError("quadratic.init must match quadratic.eigenvalues in length");
    }
  }
  if (probe.every < 1) throw ConfigError("probe.every must be >= 1");
  if (probe.menu.empty()) throw ConfigError("probe.menu must name at least one probe");
  if (probe.wants(ProbeKind::preconditioned) && !optim::is_adaptive(optimizer.kind)) {
    throw ConfigError("probe.menu: preconditioned needs optimizer adam or adamw");
  }
  if (probe.wants(ProbeKind::relative) && model == ModelKind::quadratic) {
    throw ConfigError("probe.menu: relative needs a data-backed model");
  }
  if (data.batch_size < 1) throw ConfigError("data.batch_size must be >= 1");
  if (data.source == DataSource::synthetic && model == ModelKind::mlp) {
    if (mlp.input_width() != data.task.dim) throw ConfigError("model.widths must start with task.dim");
    if (mlp.output_width() != data.task.classes) throw ConfigError("model.widths must end with task.classes");
  }
  if (data.source != DataSource::synthetic && data.path.empty()) throw ConfigError("data.path is required");
  if (data.source == DataSource::idx_pair && data.labels_path.empty()) {
    throw ConfigError("data.labels_path is required for idx-pair");
  }
}

TrainConfig load_train(ConfigReader r, const std::filesystem::path& out_override) {
  TrainConfig c;
  c.seed = r.u64("seed", 0);
  c.steps = r.count("steps", c.steps);
  const std::string model = r.str("model", "mlp");
  if (model == "mlp") {
    c.model = ModelKind::mlp;
  } else if (model == "quadratic") {
    c.model = ModelKind::quadratic;
  } else {
    throw ConfigError("model: expected mlp or quadratic, got '" + model + "'");
  }
  if (c.model == ModelKind::mlp) {
    c.mlp = read_mlp(r, c.seed);
    const std::string src = r.str("data", "synthetic");
    if (src == "synthetic") {
      c.data.source = DataSource::synthetic;
      c.data.task = read_task(r, "task", c.seed);
    } else if (src == "csv-labeled") {
      c.data.source = DataSource::csv_labeled;
    } else if (src == "idx-pair") {
      c.data.source = DataSource::idx_pair;
    } else {
      throw ConfigError("data: expected synthetic, csv-labeled or idx-pair, got '" + src + "'");
    }
    c.data.path = r.str("data.path", "");
    c.data.labels_path = r.str("data.labels_path", "");
    c.data.batch_size = r.count("data.batch_size", c.data.batch_size);
    c.data.pool = r.count("data.pool", c.data.pool);
    const bool regression = c.data.source == DataSource::synthetic && !c.data.task.is_classification();
    c.mlp.head = rethrow_as_config("model.head", [&] {
      return parse_output_head(r.str("model.head", regression ? "mse" : "cross-entropy"));
    });
    if (regression && c.mlp.head != OutputHead::mse) throw ConfigError("model.head: regression needs mse");
  } else {
    c.quadratic.eigenvalues = r.reals("quadratic.eigenvalues");
    c.quadratic.offset = r.reals("quadratic.offset");
    c.quadratic.init = r.reals("quadratic.init");
  }
  c.optimizer = read_optimizer(r, "gd");

  c.probe.every = r.count("probe.every", c.probe.every);
  std::vector<ProbeKind> menu;
  for (const auto& s : r.strs("probe.menu", {"critical"})) menu.push_back(parse_probe_kind(s));
  c.probe.menu = menu;
  c.probe.search = read_search(r);
  c.probe.warm_start = r.flag("probe.warm_start", c.probe.warm_start);
  c.probe.power.tol = r.real("probe.power_tol", c.probe.power.tol);
  c.probe.power.max_iter = r.count("probe.power_max_iter", c.probe.power.max_iter);
  c.probe.power.seed = r.u64("probe.power_seed", mix_seed(c.seed, 3));
  c.probe.hvp_eps = r.real("probe.hvp_eps", c.probe.hvp_eps);
  c.probe.holdout = r.count("probe.holdout", c.probe.holdout);

  c.out_dir = read_out(r, out_override);
  r.finish();
  c.validate();
  return c;
}

void QuadGridConfig::validate() const {
  if (optimizers.empty()) throw ConfigError("grid.optimizers is empty");
  for (const auto& o : optimizers) {
    if (o != "gd" && o != "adamw") throw ConfigError("grid.optimizers: expected gd or adamw, got '" + o + "'");
    if (o == "gd" && (lambdas.empty() || gammas.empty())) {
      throw ConfigError("empty gd grid: set grid.lambdas and grid.gammas");
    }
    if (o == "adamw" && (etas.empty() || gammas.empty() || beta1s.empty())) {
      throw ConfigError("empty adamw grid: set grid.etas, grid.gammas and grid.beta1s");
    }
  }
  if (!(bisect_tol > 0)) throw ConfigError("grid.bisect_tol must be positive");
  if (gd_steps < 1 || adamw_steps < 2) throw ConfigError("grid step budgets too small");
}

QuadGridConfig load_quad_grid(ConfigReader r, const std::filesystem::path& out_override) {
  QuadGridConfig c;
  c.optimizers = r.strs("grid.optimizers");
  c.lambdas = r.reals("grid.lambdas");
  c.gammas = r.reals("grid.gammas", c.gammas);
  c.etas = r.reals("grid.etas");
  c.beta1s = r.reals("grid.beta1s");
  c.gd_steps = r.count("grid.gd_steps", c.gd_steps);
  c.adamw_steps = r.count("grid.adamw_steps", c.adamw_steps);
  c.bisect_tol = r.real("grid.bisect_tol", c.bisect_tol);
  c.gd_tolerance = r.real("grid.gd_tolerance", c.gd_tolerance);
  c.adamw_tolerance = r.real("grid.adamw_tolerance", c.adamw_tolerance);
  c.out_dir = read_out(r, out_override);
  r.finish();
  c.validate();
  return c;
}

void MixSweepConfig::validate() const {
  try {
    mlp.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (!optim::is_adaptive(optimizer.kind)) throw ConfigError("mix-sweep needs optimizer adam or adamw");
  if (ratios.empty()) throw ConfigError("mix.ratios is empty");
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("mix.ratios must lie in [0, 1]");
  }
  if (task_a.dim != task_b.dim || task_a.classes != task_b.classes ||
      task_a.is_classification() != task_b.is_classification()) {
    throw ConfigError("task_a and task_b must share dim, classes and head");
  }
  if (mlp.input_width() != task_a.dim || mlp.output_width() != task_a.classes) {
    throw ConfigError("model.widths must run from task dim to task classes");
  }
  if (batch_size < 1 || probe_batches < 1) throw ConfigError("mix.batch_size and mix.probe_batches must be >= 1");
}

MixSweepConfig load_mix_sweep(ConfigReader r, const std::filesystem::path& out_override) {
  MixSweepConfig c;
  c.seed = r.u64("seed", 0);
  c.mlp = read_mlp(r, c.seed);
  c.optimizer = read_optimizer(r, "adam");
  c.task_a = read_task(r, "task_a", c.seed);
  c.task_b = read_task(r, "task_b", c.seed, 14);
  c.mlp.head = c.task_a.is_classification() ? OutputHead::cross_entropy : OutputHead::mse;
  c.ratios = r.reals("mix.ratios");
  c.batch_size = r.count("mix.batch_size", c.batch_size);
  c.warmup_steps = r.count("mix.warmup_steps", c.warmup_steps);
  c.probe_batches = r.count("mix.probe_batches", c.probe_batches);
  c.eval_seed = r.u64("mix.eval_seed", mix_seed(c.seed, 21));
  c.search = read_search(r);
  c.checkpoint = r.str("checkpoint", "");
  c.pretrain_steps = r.count("pretrain.steps", 0);
  c.pretrain_loss_threshold = r.real("pretrain.loss_threshold", 0.0);
  c.pretrain_batch_size = r.count("pretrain.batch_size", c.pretrain_batch_size);
  c.pretrain_lr = r.real("pretrain.lr", c.optimizer.lr);
  c.out_dir = read_out(r, out_override);
  r.finish();
  c.validate();
  return c;
}

PlotConfig load_plot(ConfigReader r, const std::filesystem::path& out_override) {
  PlotConfig c;
  c.input = r.str("plot.input", "");
  if (c.input.empty()) throw ConfigError("plot.input is required");
  c.kind = parse_plot_kind(r.str("plot.kind", "sharpness-vs-step"));
  c.title = r.str("plot.title", "");
  const std::filesystem::path out = read_out(r, out_override);
  const std::string output = r.str("plot.output", "");
  c.output = output.empty() ? out / (to_string(c.kind) + ".svg") : std::filesystem::path(output);
  r.finish();
  return c;
}

std::size_t thread_count() {
  if (const char* env = std::getenv("SHARPLINE_THREADS")) {
    std::uint64_t v = 0;
    if (parse_u64(env, v) && v >= 1) return static_cast<std::size_t>(v);
    throw ConfigError("SHARPLINE_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace sharpline::harness
