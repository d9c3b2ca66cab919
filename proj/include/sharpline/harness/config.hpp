#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sharpline/datasets.hpp"
#include "sharpline/model.hpp"
#include "sharpline/optim.hpp"
#include "sharpline/probes.hpp"

namespace sharpline::harness {

// Flat `key = value` file. '#' starts a comment; blank lines are skipped.
// Every key a command does not consume is reported as unknown.
class ConfigReader {
 public:
  ConfigReader() = default;
  static ConfigReader from_file(const std::filesystem::path& path);
  static ConfigReader from_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string str(const std::string& key, const std::string& fallback);
  double real(const std::string& key, double fallback);
  std::size_t count(const std::string& key, std::size_t fallback);
  std::uint64_t u64(const std::string& key, std::uint64_t fallback);
  bool flag(const std::string& key, bool fallback);
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback = {});
  std::vector<std::size_t> counts(const std::string& key, const std::vector<std::size_t>& fallback = {});
  std::vector<std::string> strs(const std::string& key, const std::vector<std::string>& fallback = {});

  // Throws ConfigError naming every key that was never read.
  void finish() const;

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  const Entry* lookup(const std::string& key);
  [[noreturn]] void bad(const std::string& key, const std::string& why) const;

  std::string origin_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

enum class ModelKind { mlp, quadratic };
enum class DataSource { synthetic, csv_labeled, idx_pair };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  data::TaskSpec task;
  std::string path;
  std::string labels_path;
  std::size_t batch_size = 64;
  // 0: fresh examples every step; otherwise cycle a fixed pool of this size.
  std::size_t pool = 0;
};

enum class ProbeKind { critical, directional, hessian, preconditioned, relative };
std::string to_string(ProbeKind k);
ProbeKind parse_probe_kind(const std::string& s);

struct ProbeConfig {
  std::size_t every = 10;
  std::vector<ProbeKind> menu{ProbeKind::critical};
  probes::ProbeSettings search;
  bool warm_start = true;
  probes::PowerSettings power;
  double hvp_eps = kDefaultHvpEps;
  // Size of the held-out batch the relative probe evaluates.
  std::size_t holdout = 256;

  bool wants(ProbeKind k) const;
};

struct QuadraticModel {
  std::vector<double> eigenvalues;
  std::vector<double> offset;
  std::vector<double> init;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t steps = 100;
  ModelKind model = ModelKind::mlp;
  ModelSpec mlp;
  QuadraticModel quadratic;
  optim::Config optimizer;
  DataConfig data;
  ProbeConfig probe;
  std::filesystem::path out_dir = ".";

  void validate() const;
};

struct QuadGridConfig {
  std::vector<std::string> optimizers;
  std::vector<double> lambdas;
  std::vector<double> gammas{0.0};
  std::vector<double> etas;
  std::vector<double> beta1s;
  std::size_t gd_steps = 200'000;
  std::size_t adamw_steps = 10'000;
  double bisect_tol = 1e-5;
  double gd_tolerance = 1e-3;
  double adamw_tolerance = 1e-2;
  std::filesystem::path out_dir = ".";

  void validate() const;
};

struct MixSweepConfig {
  std::uint64_t seed = 0;
  ModelSpec mlp;
  optim::Config optimizer;
  data::TaskSpec task_a;
  data::TaskSpec task_b;
  std::vector<double> ratios;
  std::size_t batch_size = 64;
  std::size_t warmup_steps = 50;
  std::size_t probe_batches = 5;
  std::uint64_t eval_seed = 0;
  probes::ProbeSettings search;

  std::string checkpoint;
  std::size_t pretrain_steps = 0;
  double pretrain_loss_threshold = 0.0;
  std::size_t pretrain_batch_size = 64;
  double pretrain_lr = 0.0;

  std::filesystem::path out_dir = ".";

  void validate() const;
};

enum class PlotKind { sharpness_vs_step, boundary_map, sweep };
std::string to_string(PlotKind k);
PlotKind parse_plot_kind(const std::string& s);

struct PlotConfig {
  std::filesystem::path input;
  PlotKind kind = PlotKind::sharpness_vs_step;
  std::filesystem::path output;
  std::string title;
};

// Each loader consumes its keys and rejects the rest. `out_override`, when
// non-empty, replaces the `out` key.
TrainConfig load_train(ConfigReader reader, const std::filesystem::path& out_override = {});
QuadGridConfig load_quad_grid(ConfigReader reader, const std::filesystem::path& out_override = {});
MixSweepConfig load_mix_sweep(ConfigReader reader, const std::filesystem::path& out_override = {});
PlotConfig load_plot(ConfigReader reader, const std::filesystem::path& out_override = {});

// Worker count for independent jobs: SHARPLINE_THREADS if set, else the
// hardware concurrency (at least 1).
std::size_t thread_count();

}  // namespace sharpline::harness
