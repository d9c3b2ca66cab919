#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sharpline/harness/config.hpp"
#include "sharpline/model.hpp"
#include "sharpline/optim.hpp"
#include "sharpline/probes.hpp"

namespace sharpline::harness {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitValidation = 2, kExitDivergence = 3 };

// Stability threshold on the sharpness measure matched to the optimizer:
//   gd:                  2/eta - gamma
//   adamw:               (2/eta - gamma)(1 + b1)/(1 - b1)
//   sgd-momentum, adam:  (2/eta)(1 + b1)/(1 - b1) - gamma   (coupled decay)
double reference_threshold(const optim::Config& config);

struct ProbeRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double eos_line = 0.0;
  double threshold = 0.0;
  std::optional<probes::SharpnessEstimate> critical;
  std::optional<probes::SharpnessEstimate> relative;
  std::optional<double> lambda_dir;
  std::optional<probes::Eigenpair> hessian;
  std::optional<probes::Eigenpair> preconditioned;
};

// Runs the configured probe menu. Every measurement works on copies: the
// arguments are read-only and nothing here can reach the training state.
class Prober {
 public:
  Prober(ProbeConfig probe, optim::Config optimizer);

  // `objective` is the current training batch, `grad` its gradient at
  // `params`, `holdout` the held-out objective for the relative probe (may be
  // null when that probe is not requested).
  ProbeRecord measure(std::size_t step, const std::shared_ptr<const Objective>& objective,
                      const ParamVector& params, const optim::State& state, const ParamVector& grad,
                      const std::shared_ptr<const Objective>& holdout);

 private:
  ProbeConfig probe_;
  optim::Config optimizer_;
  probes::WarmStartedProber critical_;
  probes::WarmStartedProber relative_;
};

struct TrainRow {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double eos_line = 0.0;
  double threshold = 0.0;
};

struct TrainResult {
  int exit_code = kExitOk;
  bool diverged = false;
  std::string message;
  std::vector<TrainRow> rows;
  std::vector<ProbeRecord> probes;
  ParamVector params;
  optim::State state;
  std::size_t steps_completed = 0;
};

// Trains and probes. With write_files, writes train.csv, sharpness.csv,
// probes.jsonl and checkpoint.txt under config.out_dir. A non-finite loss or
// update stops the run with kExitDivergence after logging the last finite
// state.
TrainResult run_train(const TrainConfig& config, bool write_files = true);

struct BoundaryCell {
  std::string optimizer;
  std::string variable;
  double lambda = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double beta1 = 0.0;
  double predicted = 0.0;
  double empirical = 0.0;
  double rel_error = 0.0;
  double tolerance = 0.0;
  // ok, exceeds or no-boundary
  std::string status;
};

struct QuadValidateResult {
  int exit_code = kExitOk;
  std::vector<BoundaryCell> cells;
};

// gd cells search eta at fixed (lambda, gamma); adamw cells search the
// pre-conditioned sharpness at fixed (eta, gamma, beta1). Cells run in
// parallel and are written in grid order to boundary_map.csv.
QuadValidateResult run_quad_validate(const QuadGridConfig& config, bool write_files = true);

struct RatioSummary {
  double ratio = 0.0;
  std::vector<probes::SharpnessEstimate> to_a;
  std::vector<probes::SharpnessEstimate> to_b;
  double a_mean = 0.0, a_sd = 0.0, b_mean = 0.0, b_sd = 0.0;
  std::size_t a_degenerate = 0, b_degenerate = 0;
};

struct MixSweepResult {
  std::size_t pretrain_steps = 0;
  double pretrain_loss = 0.0;
  ParamVector params;
  // Plain critical sharpness on the task-A evaluation batches with moments
  // warmed on task A alone.
  std::vector<probes::SharpnessEstimate> plain_a;
  double plain_a_mean = 0.0;
  std::vector<RatioSummary> ratios;
};

// Mean and sample sd of lambda_c over the non-degenerate estimates; the mean
// is +inf when every estimate is degenerate.
void summarize(const std::vector<probes::SharpnessEstimate>& estimates, double& mean, double& sd,
               std::size_t& degenerate);

// Pre-trains on task A (or loads a checkpoint), then for every ratio warms
// Adam moments on the mix with parameters frozen and measures relative
// critical sharpness of the pure-A and pure-B evaluation losses along the
// mix update direction. Parameters never change after pre-training.
MixSweepResult run_mix_sweep(const MixSweepConfig& config, bool write_files = true);

// Renders config.input and writes config.output; returns the SVG text.
std::string run_plot(const PlotConfig& config);

struct Checkpoint {
  std::size_t steps = 0;
  ModelSpec spec;
  ParamVector params;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace sharpline::harness
