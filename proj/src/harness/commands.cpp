#include "sharpline/harness/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sharpline/datasets.hpp"
#include "sharpline/errors.hpp"
#include "sharpline/harness/logs.hpp"
#include "sharpline/harness/svg.hpp"
#include "sharpline/quadratic.hpp"
#include "sharpline/rng.hpp"

namespace sharpline::harness {

namespace {

// Runs job(i) for i in [0, n) on up to thread_count() workers. The first
// exception is rethrown after every worker has stopped.
template <typename F>
void parallel_for(std::size_t n, F&& job) {
  const std::size_t workers = std::min(n, thread_count());
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string opt_cell(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

Batch slice(const Batch& pool, std::size_t start, std::size_t count) {
  Batch b;
  const std::size_t n = pool.size();
  b.inputs = Matrix(count, pool.inputs.cols);
  if (!pool.targets.data.empty()) b.targets = Matrix(count, pool.targets.cols);
  if (!pool.labels.empty()) b.labels.resize(count);
  b.id = static_cast<std::int64_t>(start);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = (start + i) % n;
    std::copy(pool.inputs.row(src).begin(), pool.inputs.row(src).end(), b.inputs.row(i).begin());
    if (!pool.targets.data.empty()) {
      std::copy(pool.targets.row(src).begin(), pool.targets.row(src).end(), b.targets.row(i).begin());
    }
    if (!pool.labels.empty()) b.labels[i] = pool.labels[src];
  }
  return b;
}

// Training batches for an MLP run, plus the held-out batch for relative
// probes.
class BatchSource {
 public:
  explicit BatchSource(const TrainConfig& c)
      : config_(c.data), one_hot_(c.mlp.head == OutputHead::mse && !c.mlp.widths.empty() &&
                                  !(c.data.source == DataSource::synthetic && !c.data.task.is_classification())),
        classes_(c.mlp.output_width()) {
    if (config_.source == DataSource::synthetic) {
      if (config_.pool > 0) pool_ = data::generate(config_.task, 0, config_.pool);
    } else {
      const auto fmt_kind =
          config_.source == DataSource::csv_labeled ? data::FileFormat::csv_labeled : data::FileFormat::idx_pair;
      dataset_ = std::make_unique<data::Dataset>(data::ingest(config_.path, fmt_kind, config_.labels_path));
      if (dataset_->dim() != c.mlp.input_width()) {
        throw ConfigError("model.widths starts with " + std::to_string(c.mlp.input_width()) +
                          " but the data has " + std::to_string(dataset_->dim()) + " features");
      }
      if (dataset_->classes() > c.mlp.output_width()) {
        throw ConfigError("model.widths ends with " + std::to_string(c.mlp.output_width()) +
                          " but the data has " + std::to_string(dataset_->classes()) + " classes");
      }
      pool_ = dataset_->batch(0, config_.pool > 0 ? std::min(config_.pool, dataset_->size()) : dataset_->size());
    }
  }

  Batch batch(std::size_t step) const {
    const std::size_t B = config_.batch_size;
    if (config_.source == DataSource::synthetic && config_.pool == 0) {
      return finish(data::generate(config_.task, step * B, B));
    }
    Batch b = slice(pool_, (step * B) % pool_.size(), B);
    b.id = static_cast<std::int64_t>(step);
    return finish(std::move(b));
  }

  Batch holdout(std::size_t count) const {
    if (config_.source == DataSource::synthetic) {
      data::TaskSpec t = config_.task;
      t.sample_seed = mix_seed(t.sample_seed, 0x401d);
      return finish(data::generate(t, 0, count));
    }
    return finish(slice(pool_, 0, std::min(count, pool_.size())));
  }

 private:
  Batch finish(Batch b) const {
    if (one_hot_) data::attach_one_hot(b, classes_);
    return b;
  }

  DataConfig config_;
  bool one_hot_;
  std::size_t classes_;
  Batch pool_;
  std::unique_ptr<data::Dataset> dataset_;
};

nlohmann::json estimate_json(std::size_t step, const std::string& probe, const probes::SharpnessEstimate& e) {
  nlohmann::json j;
  j["step"] = step;
  j["probe"] = probe;
  j["eta_c"] = e.eta_c;
  j["lambda_c"] = e.lambda_c;
  j["eta_lower"] = e.bracket.eta_lower;
  j["eta_upper"] = e.bracket.eta_upper;
  j["forward_passes"] = e.forward_passes;
  j["degenerate"] = e.degenerate();
  j["warm_started"] = e.warm_started;
  j["loss_ids"] = e.loss_ids;
  return j;
}

nlohmann::json eigen_json(std::size_t step, const std::string& probe, const probes::Eigenpair& e) {
  nlohmann::json j;
  j["step"] = step;
  j["probe"] = probe;
  j["lambda"] = e.lambda;
  j["iterations"] = e.iterations;
  j["converged"] = e.converged;
  return j;
}

const std::vector<std::string> kSharpnessColumns{
    "step",      "lr",         "eos_line",       "threshold",     "lambda_c",   "eta_c",
    "eta_lower", "eta_upper",  "forward_passes", "degenerate",    "warm_started", "lambda_dir",
    "lambda_h",  "lambda_ph",  "lambda_rel"};

std::vector<std::string> sharpness_cells(const ProbeRecord& r) {
  std::vector<std::string> cells{fmt(r.step), fmt(r.lr), fmt(r.eos_line), fmt(r.threshold)};
  if (r.critical) {
    const auto& e = *r.critical;
    for (const auto& s : {fmt(e.lambda_c), fmt(e.eta_c), fmt(e.bracket.eta_lower), fmt(e.bracket.eta_upper),
                          fmt(e.forward_passes), fmt(e.degenerate()), fmt(e.warm_started)}) {
      cells.push_back(s);
    }
  } else {
    cells.insert(cells.end(), 7, "");
  }
  cells.push_back(opt_cell(r.lambda_dir));
  cells.push_back(r.hessian ? fmt(r.hessian->lambda) : "");
  cells.push_back(r.preconditioned ? fmt(r.preconditioned->lambda) : "");
  cells.push_back(r.relative ? fmt(r.relative->lambda_c) : "");
  return cells;
}

}  // namespace

double reference_threshold(const optim::Config& c) {
  switch (c.kind) {
    case optim::Kind::gd:
      return quadratic::gd_wd_threshold(c.lr, c.weight_decay);
    case optim::Kind::adamw:
      return quadratic::adamw_threshold(c.lr, c.weight_decay, c.beta1);
    case optim::Kind::sgd_momentum:
    case optim::Kind::adam:
      return quadratic::adamw_threshold(c.lr, 0.0, c.beta1) - c.weight_decay;
  }
  throw InvalidArgument("unknown optimizer");
}

Prober::Prober(ProbeConfig probe, optim::Config optimizer)
    : probe_(std::move(probe)), optimizer_(optimizer), critical_(probe_.search), relative_(probe_.search) {}

ProbeRecord Prober::measure(std::size_t step, const std::shared_ptr<const Objective>& objective,
                            const ParamVector& params, const optim::State& state, const ParamVector& grad,
                            const std::shared_ptr<const Objective>& holdout) {
  ProbeRecord rec;
  rec.step = step;
  rec.lr = optimizer_.lr;
  rec.eos_line = 2.0 / optimizer_.lr;
  rec.threshold = reference_threshold(optimizer_);

  const optim::StepResult next = optim::step(optimizer_, state, params, grad);
  const ParamVector& delta = next.direction.delta;

  auto search = [&](probes::WarmStartedProber& warm, LossProbe& lp, const std::string* l2) {
    if (probe_.warm_start) {
      return l2 ? warm.probe_relative(lp, *l2) : warm.probe(lp);
    }
    return l2 ? probes::relative_critical_lr(lp, probe_.search, *l2) : probes::critical_lr(lp, probe_.search);
  };

  if (probe_.wants(ProbeKind::critical)) {
    try {
      LossProbe lp = make_probe(objective, params, delta, "train");
      rec.critical = search(critical_, lp, nullptr);
    } catch (const ZeroDirectionError&) {
    }
  }
  if (probe_.wants(ProbeKind::relative) && holdout) {
    try {
      LossProbe lp = make_probe(holdout, params, delta, "heldout");
      const std::string l2 = "train";
      rec.relative = search(relative_, lp, &l2);
    } catch (const ZeroDirectionError&) {
    }
  }
  if (probe_.wants(ProbeKind::directional)) {
    try {
      const ParamVector hd = hvp(*objective, params, delta, probe_.hvp_eps);
      rec.lambda_dir = probes::directional_sharpness(grad, delta, hd);
    } catch (const ZeroDirectionError&) {
    } catch (const DegenerateDenominatorError&) {
    }
  }
  if (probe_.wants(ProbeKind::hessian)) {
    rec.hessian = probes::hessian_sharpness(*objective, params, probe_.power, probe_.hvp_eps);
  }
  if (probe_.wants(ProbeKind::preconditioned)) {
    const ParamVector P = optim::preconditioner(optimizer_, next.state);
    rec.preconditioned = probes::preconditioned_sharpness(
        [&](const ParamVector& v) { return hvp(*objective, params, v, probe_.hvp_eps); }, P, probe_.power);
  }
  return rec;
}

TrainResult run_train(const TrainConfig& c, bool write_files) {
  c.validate();
  TrainResult result;

  std::unique_ptr<BatchSource> source;
  std::shared_ptr<const Objective> fixed_objective;
  ParamVector params;
  if (c.model == ModelKind::mlp) {
    source = std::make_unique<BatchSource>(c);
    params = c.mlp.init_params();
  } else {
    const auto& q = c.quadratic;
    const std::size_t n = q.eigenvalues.size();
    fixed_objective = std::make_shared<quadratic::QuadraticProblem>(
        q.eigenvalues, q.offset.empty() ? std::vector<double>(n, 0.0) : q.offset, 0.0);
    if (q.init.empty()) {
      Rng rng(mix_seed(c.seed, 5));
      std::vector<double> init(n);
      for (double& x : init) x = rng.normal();
      params = ParamVector(std::move(init));
    } else {
      params = ParamVector(q.init);
    }
  }
  optim::State state = optim::init_state(c.optimizer, params.size());
  std::shared_ptr<const Objective> holdout;
  if (source && c.probe.wants(ProbeKind::relative)) {
    holdout = std::make_shared<MlpObjective>(c.mlp, source->holdout(c.probe.holdout));
  }

  std::unique_ptr<CsvWriter> train_csv, sharp_csv;
  std::unique_ptr<JsonlWriter> jsonl;
  if (write_files) {
    std::filesystem::create_directories(c.out_dir);
    train_csv = std::make_unique<CsvWriter>(c.out_dir / "train.csv",
                                            std::vector<std::string>{"step", "loss", "lr", "eos_line", "threshold"});
    sharp_csv = std::make_unique<CsvWriter>(c.out_dir / "sharpness.csv", kSharpnessColumns);
    jsonl = std::make_unique<JsonlWriter>(c.out_dir / "probes.jsonl");
  }

  Prober prober(c.probe, c.optimizer);
  const double eos = 2.0 / c.optimizer.lr;
  const double threshold = reference_threshold(c.optimizer);
  const ParamVector no_grad;

  for (std::size_t s = 0; s < c.steps; ++s) {
    std::shared_ptr<const Objective> objective =
        fixed_objective ? fixed_objective : std::make_shared<MlpObjective>(c.mlp, source->batch(s));
    try {
      std::vector<double> g(params.size());
      const double loss = objective->loss_and_gradient(params.span(), g);
      if (!std::isfinite(loss)) throw NonFiniteError("loss");
      const ParamVector grad(std::move(g));

      const TrainRow row{s, loss, c.optimizer.lr, eos, threshold};
      result.rows.push_back(row);
      if (train_csv) train_csv->row({fmt(s), fmt(loss), fmt(row.lr), fmt(eos), fmt(threshold)});

      if (s % c.probe.every == 0) {
        ProbeRecord rec = prober.measure(s, objective, params, state, grad, holdout);
        if (jsonl) {
          if (rec.critical) jsonl->line(estimate_json(s, "critical", *rec.critical).dump());
          if (rec.lambda_dir) {
            nlohmann::json j;
            j["step"] = s;
            j["probe"] = "directional";
            j["lambda"] = *rec.lambda_dir;
            jsonl->line(j.dump());
          }
          if (rec.hessian) jsonl->line(eigen_json(s, "hessian", *rec.hessian).dump());
          if (rec.preconditioned) jsonl->line(eigen_json(s, "preconditioned", *rec.preconditioned).dump());
          if (rec.relative) jsonl->line(estimate_json(s, "relative", *rec.relative).dump());
        }
        if (sharp_csv) sharp_csv->row(sharpness_cells(rec));
        result.probes.push_back(std::move(rec));
      }

      optim::StepResult next = optim::step(c.optimizer, state, params, grad);
      params = std::move(next.params);
      state = std::move(next.state);
      result.steps_completed = s + 1;
    } catch (const NonFiniteError& e) {
      result.diverged = true;
      result.exit_code = kExitDivergence;
      result.message = "diverged at step " + std::to_string(s) + ": non-finite " + e.where();
      break;
    }
  }

  result.params = params;
  result.state = state;
  if (write_files) {
    Checkpoint ckpt;
    ckpt.steps = result.steps_completed;
    if (c.model == ModelKind::mlp) ckpt.spec = c.mlp;
    ckpt.params = params;
    write_checkpoint(c.out_dir / "checkpoint.txt", ckpt);
  }
  return result;
}

QuadValidateResult run_quad_validate(const QuadGridConfig& c, bool write_files) {
  c.validate();
  std::vector<BoundaryCell> cells;
  for (const auto& o : c.optimizers) {
    if (o == "gd") {
      for (double lambda : c.lambdas) {
        for (double gamma : c.gammas) {
          BoundaryCell cell;
          cell.optimizer = "gd";
          cell.variable = "eta";
          cell.lambda = lambda;
          cell.gamma = gamma;
          cell.predicted = 2.0 / (lambda + gamma);
          cell.tolerance = c.gd_tolerance;
          cells.push_back(cell);
        }
      }
    } else {
      for (double eta : c.etas) {
        for (double gamma : c.gammas) {
          for (double beta1 : c.beta1s) {
            BoundaryCell cell;
            cell.optimizer = "adamw";
            cell.variable = "lambda";
            cell.eta = eta;
            cell.gamma = gamma;
            cell.beta1 = beta1;
            cell.predicted = quadratic::adamw_threshold(eta, gamma, beta1);
            cell.tolerance = c.adamw_tolerance;
            cells.push_back(cell);
          }
        }
      }
    }
  }

  parallel_for(cells.size(), [&](std::size_t i) {
    BoundaryCell& cell = cells[i];
    quadratic::SimulationArgs args;
    args.lambda = cell.lambda;
    args.eta = cell.eta;
    args.gamma = cell.gamma;
    args.beta1 = cell.beta1;
    const bool gd = cell.optimizer == "gd";
    args.steps = gd ? c.gd_steps : c.adamw_steps;
    if (!(cell.predicted > 0.0) || !std::isfinite(cell.predicted)) {
      cell.status = "no-boundary";
      cell.empirical = std::nan("");
      cell.rel_error = std::nan("");
      return;
    }
    try {
      cell.empirical = quadratic::empirical_boundary(
          gd ? quadratic::Simulator::gd_wd : quadratic::Simulator::adamw_frozen, args,
          gd ? quadratic::SearchVariable::eta : quadratic::SearchVariable::lambda, 0.5 * cell.predicted,
          2.0 * cell.predicted, c.bisect_tol);
      cell.rel_error = std::abs(cell.empirical - cell.predicted) / std::abs(cell.predicted);
      cell.status = cell.rel_error <= cell.tolerance ? "ok" : "exceeds";
    } catch (const NoBoundaryError&) {
      cell.status = "no-boundary";
      cell.empirical = std::nan("");
      cell.rel_error = std::nan("");
    }
  });

  QuadValidateResult result;
  result.cells = cells;
  for (const auto& cell : cells) {
    if (cell.status == "exceeds") result.exit_code = kExitValidation;
  }
  if (write_files) {
    std::filesystem::create_directories(c.out_dir);
    CsvWriter out(c.out_dir / "boundary_map.csv",
                  {"optimizer", "variable", "lambda", "eta", "gamma", "beta1", "predicted", "empirical", "rel_error",
                   "tolerance", "status"});
    for (const auto& cell : cells) {
      const bool gd = cell.optimizer == "gd";
      out.row({cell.optimizer, cell.variable, gd ? fmt(cell.lambda) : "", gd ? "" : fmt(cell.eta), fmt(cell.gamma),
               gd ? "" : fmt(cell.beta1), fmt(cell.predicted), fmt(cell.empirical), fmt(cell.rel_error),
               fmt(cell.tolerance), cell.status});
    }
  }
  return result;
}

void summarize(const std::vector<probes::SharpnessEstimate>& estimates, double& mean, double& sd,
               std::size_t& degenerate) {
  degenerate = 0;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : estimates) {
    if (e.degenerate()) {
      ++degenerate;
      continue;
    }
    sum += e.lambda_c;
    ++n;
  }
  if (n == 0) {
    mean = HUGE_VAL;
    sd = std::nan("");
    return;
  }
  mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& e : estimates) {
    if (!e.degenerate()) ss += (e.lambda_c - mean) * (e.lambda_c - mean);
  }
  sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
}

MixSweepResult run_mix_sweep(const MixSweepConfig& c, bool write_files) {
  c.validate();
  MixSweepResult result;
  const ModelSpec& spec = c.mlp;

  if (!c.checkpoint.empty()) {
    const Checkpoint ckpt = read_checkpoint(c.checkpoint);
    if (ckpt.steps == 0) {
      throw ConfigError("checkpoint " + c.checkpoint +
                        " has not been trained; run `sharpline train` on task A first or set pretrain.steps");
    }
    if (ckpt.spec.widths != spec.widths || ckpt.spec.activation != spec.activation) {
      throw ConfigError("checkpoint " + c.checkpoint + " does not match model.widths / model.activation");
    }
    result.params = ckpt.params;
    result.pretrain_steps = ckpt.steps;
    result.pretrain_loss = std::nan("");
  } else {
    if (c.pretrain_steps == 0) {
      throw ConfigError("mix-sweep needs a model pre-trained on task A: set checkpoint = <train out>/checkpoint.txt "
                        "or pretrain.steps = N");
    }
    optim::Config opt = c.optimizer;
    opt.lr = c.pretrain_lr;
    ParamVector params = spec.init_params();
    optim::State state = optim::init_state(opt, params.size());
    double last = std::nan("");
    std::size_t s = 0;
    for (; s < c.pretrain_steps; ++s) {
      const Batch batch = data::generate(c.task_a, s * c.pretrain_batch_size, c.pretrain_batch_size);
      std::vector<double> g(params.size());
      last = MlpObjective(spec, batch).loss_and_gradient(params.span(), g);
      if (c.pretrain_loss_threshold > 0.0 && last < c.pretrain_loss_threshold) break;
      optim::StepResult next = optim::step(opt, state, params, ParamVector(std::move(g)));
      params = std::move(next.params);
      state = std::move(next.state);
    }
    result.params = params;
    result.pretrain_steps = s;
    result.pretrain_loss = last;
  }
  const ParamVector& params = result.params;

  data::TaskSpec eval_a = c.task_a, eval_b = c.task_b;
  eval_a.sample_seed = c.eval_seed;
  eval_b.sample_seed = mix_seed(c.eval_seed, 1);
  const std::size_t B = c.batch_size;

  auto grad_of = [&](const Batch& b) { return gradient(params, spec, b); };
  auto warmed = [&](const std::function<Batch(std::size_t)>& stream) {
    return optim::warmup_moments(c.optimizer, optim::init_state(c.optimizer, params.size()), params, spec, stream,
                                 c.warmup_steps);
  };

  // Warm-up batches follow the probe batches in the same stream.
  {
    const optim::State state = warmed([&](std::size_t k) { return data::generate(eval_a, (c.probe_batches + k) * B, B); });
    probes::WarmStartedProber prober(c.search);
    for (std::size_t k = 0; k < c.probe_batches; ++k) {
      const Batch a = data::generate(eval_a, k * B, B);
      const ParamVector delta = optim::peek_direction(c.optimizer, state, params, grad_of(a)).delta;
      LossProbe lp = make_probe(params, spec, a, delta, "A");
      result.plain_a.push_back(prober.probe(lp));
    }
    double sd = 0;
    std::size_t deg = 0;
    summarize(result.plain_a, result.plain_a_mean, sd, deg);
  }

  result.ratios.resize(c.ratios.size());
  parallel_for(c.ratios.size(), [&](std::size_t i) {
    RatioSummary& row = result.ratios[i];
    row.ratio = c.ratios[i];
    const data::MixSpec mix{eval_a, eval_b, row.ratio, B, mix_seed(c.seed, 31)};
    const optim::State state = warmed([&](std::size_t k) { return data::mix_batch(mix, c.probe_batches + k); });
    probes::WarmStartedProber to_a(c.search), to_b(c.search);
    for (std::size_t k = 0; k < c.probe_batches; ++k) {
      const ParamVector delta = optim::peek_direction(c.optimizer, state, params, grad_of(data::mix_batch(mix, k))).delta;
      LossProbe la = make_probe(params, spec, data::generate(eval_a, k * B, B), delta, "A");
      row.to_a.push_back(to_a.probe_relative(la, "mix"));
      LossProbe lb = make_probe(params, spec, data::generate(eval_b, k * B, B), delta, "B");
      row.to_b.push_back(to_b.probe_relative(lb, "mix"));
    }
    summarize(row.to_a, row.a_mean, row.a_sd, row.a_degenerate);
    summarize(row.to_b, row.b_mean, row.b_sd, row.b_degenerate);
  });

  if (write_files) {
    std::filesystem::create_directories(c.out_dir);
    CsvWriter sweep(c.out_dir / "sweep.csv",
                    {"ratio", "lambda_a_mean", "lambda_a_sd", "lambda_b_mean", "lambda_b_sd", "lambda_plain_a",
                     "probe_batches", "degenerate_a", "degenerate_b"});
    CsvWriter detail(c.out_dir / "sweep_probes.csv",
                     {"ratio", "batch", "target", "lambda_c", "eta_c", "eta_lower", "eta_upper", "forward_passes",
                      "degenerate"});
    for (const auto& row : result.ratios) {
      sweep.row({fmt(row.ratio), fmt(row.a_mean), fmt(row.a_sd), fmt(row.b_mean), fmt(row.b_sd),
                 fmt(result.plain_a_mean), fmt(c.probe_batches), fmt(row.a_degenerate), fmt(row.b_degenerate)});
      for (std::size_t k = 0; k < c.probe_batches; ++k) {
        for (const auto* est : {&row.to_a[k], &row.to_b[k]}) {
          detail.row({fmt(row.ratio), fmt(k), est == &row.to_a[k] ? "A" : "B", fmt(est->lambda_c), fmt(est->eta_c),
                      fmt(est->bracket.eta_lower), fmt(est->bracket.eta_upper), fmt(est->forward_passes),
                      fmt(est->degenerate())});
        }
      }
    }
  }
  return result;
}

std::string run_plot(const PlotConfig& c) {
  const CsvTable table = read_csv(c.input);
  const std::string svg = render_svg(chart_from_table(c.kind, table, c.title));
  if (c.output.has_parent_path()) std::filesystem::create_directories(c.output.parent_path());
  std::ofstream out(c.output, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + c.output.string());
  out << svg;
  return svg;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "# sharpline checkpoint\n";
  out << "steps = " << ckpt.steps << '\n';
  out << "widths = ";
  for (std::size_t i = 0; i < ckpt.spec.widths.size(); ++i) out << (i ? "," : "") << ckpt.spec.widths[i];
  out << '\n';
  out << "activation = " << to_string(ckpt.spec.activation) << '\n';
  out << "values = " << ckpt.params.size() << '\n';
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) out << fmt(ckpt.params[i]) << '\n';
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  Checkpoint ckpt;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  bool in_values = false;
  std::vector<double> values;
  auto fail = [&](const std::string& msg) { throw ParseError(path.string(), line_no, msg); };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (in_values) {
      char* end = nullptr;
      const double v = std::strtod(line.c_str(), &end);
      if (end != line.c_str() + line.size()) fail("bad parameter value");
      values.push_back(v);
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    try {
      if (key == "steps") {
        ckpt.steps = std::stoull(value);
      } else if (key == "widths") {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) ckpt.spec.widths.push_back(std::stoull(item));
      } else if (key == "activation") {
        ckpt.spec.activation = parse_activation(value);
      } else if (key == "values") {
        expected = std::stoull(value);
        in_values = true;
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      fail("bad value for " + key);
    }
  }
  if (!in_values || values.size() != expected) fail("parameter count mismatch");
  ckpt.params = ParamVector(std::move(values));
  return ckpt;
}

}  // namespace sharpline::harness
