#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sharpline/errors.hpp"
#include "sharpline/harness/commands.hpp"
#include "sharpline/harness/config.hpp"
#include "sharpline/harness/logs.hpp"
#include "sharpline/model.hpp"
#include "sharpline/probes.hpp"
#include "sharpline/quadratic.hpp"
#include "sharpline/rng.hpp"

using namespace sharpline;
namespace fs = std::filesystem;
namespace sh = sharpline::harness;

namespace {

// 0.5 theta' H theta + b' theta with a dense symmetric H.
class DenseQuadratic final : public Objective {
 public:
  DenseQuadratic(Eigen::MatrixXd h, Eigen::VectorXd b) : h_(std::move(h)), b_(std::move(b)) {}
  std::size_t dim() const override { return static_cast<std::size_t>(b_.size()); }
  double loss(std::span<const double> p) const override {
    const Eigen::Map<const Eigen::VectorXd> x(p.data(), b_.size());
    return 0.5 * x.dot(h_ * x) + b_.dot(x);
  }
  double loss_and_gradient(std::span<const double> p, std::span<double> g) const override {
    const Eigen::Map<const Eigen::VectorXd> x(p.data(), b_.size());
    Eigen::Map<Eigen::VectorXd> out(g.data(), b_.size());
    out = h_ * x + b_;
    return 0.5 * x.dot(h_ * x) + b_.dot(x);
  }
  const Eigen::MatrixXd& h() const { return h_; }

 private:
  Eigen::MatrixXd h_;
  Eigen::VectorXd b_;
};

Eigen::VectorXd to_eigen(const ParamVector& v) { return Eigen::Map<const Eigen::VectorXd>(v.span().data(), v.size()); }

ParamVector from_eigen(const Eigen::VectorXd& v) { return ParamVector(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd normal_vector(Rng& rng, std::size_t n) {
  Eigen::VectorXd v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Random orthogonal basis with a log-uniform positive spectrum.
Eigen::MatrixXd random_spd(Rng& rng, std::size_t n, double lo, double hi) {
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = std::exp(rng.uniform(std::log(lo), std::log(hi)));
  return q * d.asDiagonal() * q.transpose();
}

Eigen::MatrixXd random_symmetric(Rng& rng, std::size_t n) {
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.normal();
  return 0.5 * (a + a.transpose());
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string num(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sharpline_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A5 and A7 share one training run.
struct SharpeningRun {
  bool done = false;
  sh::TrainConfig config;
  sh::TrainResult result;
  double seconds = 0;
};
SharpeningRun g_sharpening;

const SharpeningRun& sharpening_run() {
  if (!g_sharpening.done) {
    const auto t0 = std::chrono::steady_clock::now();
    g_sharpening.config = sh::load_train(sh::ConfigReader::from_file(fs::path(SHARPLINE_CONFIG_DIR) / "sharpening.cfg"),
                                         work_dir("sharpening"));
    g_sharpening.result = sh::run_train(g_sharpening.config);
    g_sharpening.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g_sharpening.done = true;
  }
  return g_sharpening;
}

Outcome a1() {
  Rng rng(101);
  const probes::ProbeSettings s;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    auto q = std::make_shared<DenseQuadratic>(random_spd(rng, n, 1e-2, 1e2), normal_vector(rng, n));
    const ParamVector theta = from_eigen(normal_vector(rng, n));
    const ParamVector g = gradient(*q, theta);
    const Eigen::VectorXd ge = to_eigen(g);
    const double lambda_dir = ge.dot(q->h() * ge) / ge.squaredNorm();
    LossProbe probe = make_probe(q, theta, g);
    const probes::SharpnessEstimate est = probes::critical_lr(probe, s);
    worst = std::max(worst, rel(est.lambda_c, lambda_dir));
  }
  return {worst <= s.epsilon, "max |lambda_c - lambda_dir|/lambda_dir = " + num("%.4f", worst) + " over 100 quadratics (limit 0.0625)"};
}

Outcome a2() {
  Rng rng(202);
  double worst_gd = 0, worst_pre = 0;
  std::size_t bound_violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(31);
    const Eigen::MatrixXd H = trial % 2 ? random_spd(rng, n, 1e-2, 1e2) : random_symmetric(rng, n);
    const DenseQuadratic q(H, Eigen::VectorXd::Zero(n));
    const ParamVector theta = from_eigen(normal_vector(rng, n));
    const ParamVector g = from_eigen(normal_vector(rng, n));
    Eigen::VectorXd p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(rng.uniform(-3.0, 3.0));

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::VectorXd c = es.eigenvectors().transpose() * to_eigen(g);
    const double weighted = (c.array().square() * es.eigenvalues().array()).sum() / c.squaredNorm();
    const double lambda_dir = probes::directional_sharpness(g, g, hvp(q, theta, g));
    worst_gd = std::max(worst_gd, rel(lambda_dir, weighted));
    if (lambda_dir > es.eigenvalues().maxCoeff() * (1 + 1e-10)) ++bound_violations;

    const Eigen::VectorXd inv_sqrt = p.array().rsqrt();
    const Eigen::MatrixXd PH = inv_sqrt.asDiagonal() * H * inv_sqrt.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(PH);
    const Eigen::VectorXd a = pes.eigenvectors().transpose() * (inv_sqrt.asDiagonal() * to_eigen(g));
    const double pweighted = (a.array().square() * pes.eigenvalues().array()).sum() / a.squaredNorm();
    const ParamVector delta = from_eigen(to_eigen(g).cwiseQuotient(p));
    const double lambda_pdir = probes::directional_sharpness(g, delta, hvp(q, theta, delta));
    worst_pre = std::max(worst_pre, rel(lambda_pdir, pweighted));
    if (lambda_pdir > pes.eigenvalues().maxCoeff() * (1 + 1e-10)) ++bound_violations;
  }
  const bool ok = worst_gd <= 1e-8 && worst_pre <= 1e-8 && bound_violations == 0;
  return {ok, "max rel err " + num("%.2e", worst_gd) + " (H), " + num("%.2e", worst_pre) +
                  " (P^-1/2 H P^-1/2) over 200 triples, " + std::to_string(bound_violations) + " bound violations"};
}

Outcome a3() {
  sh::QuadGridConfig c;
  c.optimizers = {"gd"};
  c.lambdas = {0.1, 1, 10, 100, 1000};
  c.gammas = {0, 1e-3, 0.01, 0.1, 1};
  const sh::QuadValidateResult r = sh::run_quad_validate(c, false);
  double worst = 0;
  bool ok = r.cells.size() == 25;
  for (const auto& cell : r.cells) {
    ok = ok && cell.status == "ok";
    if (std::isfinite(cell.rel_error)) worst = std::max(worst, cell.rel_error);
  }
  return {ok && worst <= 1e-3, "max rel err " + num("%.2e", worst) + " vs 2/(lambda+gamma) over " +
                                   std::to_string(r.cells.size()) + " cells (limit 1e-3)"};
}

Outcome a4() {
  sh::QuadGridConfig c;
  c.optimizers = {"adamw"};
  c.etas = {1e-3, 1e-2, 0.1};
  c.gammas = {0, 0.01, 0.1};
  c.beta1s = {0, 0.5, 0.9};
  const sh::QuadValidateResult r = sh::run_quad_validate(c, false);
  double worst = 0;
  bool ok = r.cells.size() == 27;
  bool exact = true;
  for (const auto& cell : r.cells) {
    ok = ok && cell.status == "ok";
    if (std::isfinite(cell.rel_error)) worst = std::max(worst, cell.rel_error);
    if (cell.beta1 == 0.0) {
      exact = exact && quadratic::adamw_threshold(cell.eta, cell.gamma, 0.0) ==
                           quadratic::gd_wd_threshold(cell.eta, cell.gamma);
      // Same recursion as GD+WD: identical trajectories either side of the boundary.
      for (double f : {0.99, 1.01}) {
        const double lambda = f * cell.predicted;
        const auto adam = quadratic::simulate_adamw_frozen(lambda, cell.eta, cell.gamma, 0.0, 2000, 1.0, 1.0);
        const auto gd = quadratic::simulate_gd_wd(lambda, cell.eta, cell.gamma, 2000, 1.0);
        exact = exact && adam.diverged == gd.diverged;
      }
    }
  }
  return {ok && exact && worst <= 1e-2,
          "max rel err " + num("%.2e", worst) + " over " + std::to_string(r.cells.size()) +
              " cells (limit 1e-2); beta1 = 0 reduces to gd+wd: " + (exact ? "yes" : "no")};
}

Outcome a5() {
  const SharpeningRun& run = sharpening_run();
  if (run.result.exit_code != sh::kExitOk) return {false, "training failed: " + run.result.message};
  const double eos = 2.0 / run.config.optimizer.lr;
  std::vector<std::pair<std::size_t, double>> series;
  for (const auto& p : run.result.probes) {
    if (p.critical && !p.critical->degenerate()) series.emplace_back(p.step, p.critical->lambda_c / eos);
  }
  if (series.empty()) return {false, "no probes"};
  const double start = series.front().second;
  std::size_t entered = 0;
  bool in_band = false;
  for (const auto& [step, r] : series) {
    if (r >= 0.6 && r <= 1.1) {
      entered = step;
      in_band = true;
      break;
    }
  }
  const std::size_t last = run.result.steps_completed - 1;
  const std::size_t from = last >= 500 ? last - 500 : 0;
  double sum = 0, lo = HUGE_VAL, hi = -HUGE_VAL;
  std::size_t n = 0;
  for (const auto& [step, r] : series) {
    if (step <= from) continue;
    sum += r;
    ++n;
    lo = std::min(lo, sum / n);
    hi = std::max(hi, sum / n);
  }
  const bool ok = run.result.steps_completed <= 2000 && start < 0.3 && in_band && n > 0 && lo >= 0.7 && hi <= 1.05;

  std::string golden = "differs from";
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  if (slurp(run.config.out_dir / "sharpness.csv") == slurp(fs::path(SHARPLINE_FIXTURE_DIR) / "sharpening_golden.csv")) {
    golden = "matches";
  }
  return {ok, "lambda_c/(2/eta) starts at " + num("%.3f", start) + ", enters [0.6, 1.1] at step " +
                  (in_band ? std::to_string(entered) : std::string("never")) + ", final-500 running mean in [" +
                  num("%.3f", lo) + ", " + num("%.3f", hi) + "]; log " + golden + " golden"};
}

Outcome a6() {
  const sh::MixSweepConfig c =
      sh::load_mix_sweep(sh::ConfigReader::from_file(fs::path(SHARPLINE_CONFIG_DIR) / "mix_sweep.cfg"), work_dir("mix"));
  const sh::MixSweepResult r = sh::run_mix_sweep(c);
  const sh::RatioSummary* zero = nullptr;
  const sh::RatioSummary* one = nullptr;
  for (const auto& row : r.ratios) {
    if (row.ratio == 0.0) zero = &row;
    if (row.ratio == 1.0) one = &row;
  }
  if (!zero || !one) return {false, "sweep must include ratios 0 and 1"};
  const double factor = zero->a_mean / one->a_mean;
  const double match = rel(one->a_mean, r.plain_a_mean);
  const bool ok = factor >= 3.0 && match <= c.search.epsilon;
  return {ok, "lambda_c A->mix " + num("%.4g", zero->a_mean) + " at rho=0 vs " + num("%.4g", one->a_mean) +
                  " at rho=1 (factor " + num("%.2f", factor) + ", need 3); rho=1 vs plain A rel diff " +
                  num("%.2e", match) + " (limit 0.0625); degenerate probes " + std::to_string(zero->a_degenerate) +
                  "/" + std::to_string(zero->to_a.size()) + " at rho=0"};
}

Outcome a7() {
  const SharpeningRun& run = sharpening_run();
  std::vector<std::size_t> passes;
  for (const auto& p : run.result.probes) {
    if (p.critical && p.critical->warm_started) passes.push_back(p.critical->forward_passes);
  }
  if (passes.empty()) return {false, "no warm-started probes"};
  std::sort(passes.begin(), passes.end());
  const double median = passes.size() % 2 ? static_cast<double>(passes[passes.size() / 2])
                                          : 0.5 * static_cast<double>(passes[passes.size() / 2 - 1] + passes[passes.size() / 2]);
  const double within9 = static_cast<double>(std::count_if(passes.begin(), passes.end(), [](std::size_t k) { return k <= 9; })) /
                         static_cast<double>(passes.size());
  return {median <= 7 && within9 >= 0.9, "median " + num("%.1f", median) + " forward passes, " +
                                             num("%.1f", 100 * within9) + "% within 9, over " +
                                             std::to_string(passes.size()) + " warm-started probes"};
}

Outcome a8() {
  std::vector<std::string> failures;
  const probes::ProbeSettings s;

  auto q = std::make_shared<quadratic::QuadraticProblem>(std::vector<double>{3.0, 0.5}, std::vector<double>{0.2, -0.1});
  const ParamVector theta{1.0, -2.0};
  const ParamVector g = gradient(*q, theta);
  LossProbe ascent = make_probe(q, theta, -1.0 * g);
  const probes::SharpnessEstimate up = probes::critical_lr(ascent, s);
  if (!up.degenerate()) failures.push_back("quadratic ascent not flagged");
  if (up.forward_passes != 1 + s.max_exponential_iters) failures.push_back("quadratic ascent pass count");

  ModelSpec spec;
  spec.widths = {4, 8, 3};
  Batch batch;
  batch.inputs = Matrix(16, 4);
  Rng rng(8);
  for (double& x : batch.inputs.data) x = rng.normal();
  batch.labels.resize(16);
  for (int& y : batch.labels) y = static_cast<int>(rng.below(3));
  const ParamVector params = spec.init_params();
  const ParamVector mg = gradient(params, spec, batch);
  LossProbe mlp_up = make_probe(params, spec, batch, -1.0 * mg, "A");
  const probes::SharpnessEstimate rel_up = probes::relative_critical_lr(mlp_up, s, "B");
  if (!rel_up.degenerate()) failures.push_back("mlp relative ascent not flagged");

  bool zero_threw = false;
  try {
    LossProbe zero = make_probe(q, theta, ParamVector::zeros(2));
    probes::critical_lr(zero, s);
  } catch (const ZeroDirectionError&) {
    zero_threw = true;
  }
  if (!zero_threw) failures.push_back("zero direction accepted");

  // A linear loss descends forever: the doubling search must stop at the cap.
  auto linear = std::make_shared<quadratic::QuadraticProblem>(std::vector<double>{0.0}, std::vector<double>{1.0});
  LossProbe flat_probe = make_probe(linear, ParamVector{0.0}, ParamVector{1.0});
  const probes::Bracket b = probes::exponential_search(flat_probe, s);
  const std::size_t flat_evals = flat_probe.evaluations();
  if (!b.degenerate || flat_evals != 41 || b.eta_upper != s.eta0 * std::ldexp(1.0, 39)) {
    failures.push_back("cap not honored");
  }

  std::string detail = "ascent degenerate after " + std::to_string(up.forward_passes) +
                       " passes; zero direction " + (zero_threw ? "raises" : "accepted") + "; cap stops at " +
                       std::to_string(flat_evals - 1) + " trial steps";
  for (const auto& f : failures) detail += "; FAILED: " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"A1", "quadratic exactness", 10, a1},
      {"A2", "directional sharpness identities", 10, a2},
      {"A3", "gd+wd stability threshold", 30, a3},
      {"A4", "adamw stability threshold", 60, a4},
      {"A5", "progressive sharpening and edge of stability", 300, a5},
      {"A6", "relative sharpness vs mix ratio", 300, a6},
      {"A7", "warm-start forward-pass budget", 300, a7},
      {"A8", "degenerate and edge behavior", 10, a8},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (std::string(c.id) == "A7") secs += g_sharpening.seconds;
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %s  %s: %s [%.1f s, limit %.0f s]\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
