#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sharpline/errors.hpp"
#include "sharpline/harness/commands.hpp"
#include "sharpline/harness/config.hpp"

namespace sh = sharpline::harness;

namespace {

int train(const std::string& config, const std::string& out) {
  const sh::TrainConfig c = sh::load_train(sh::ConfigReader::from_file(config), out);
  const sh::TrainResult r = sh::run_train(c);
  std::printf("train: %zu/%zu steps, %zu probes -> %s\n", r.steps_completed, c.steps, r.probes.size(),
              c.out_dir.string().c_str());
  if (r.diverged) std::fprintf(stderr, "sharpline: %s\n", r.message.c_str());
  return r.exit_code;
}

int quad_validate(const std::string& config, const std::string& out) {
  const sh::QuadGridConfig c = sh::load_quad_grid(sh::ConfigReader::from_file(config), out);
  const sh::QuadValidateResult r = sh::run_quad_validate(c);
  std::size_t ok = 0, bad = 0, none = 0;
  for (const auto& cell : r.cells) {
    if (cell.status == "ok") ++ok;
    else if (cell.status == "exceeds") ++bad;
    else ++none;
  }
  std::printf("quad-validate: %zu cells, %zu within tolerance, %zu exceed, %zu without boundary -> %s\n",
              r.cells.size(), ok, bad, none, (c.out_dir / "boundary_map.csv").string().c_str());
  return r.exit_code;
}

int mix_sweep(const std::string& config, const std::string& out) {
  const sh::MixSweepConfig c = sh::load_mix_sweep(sh::ConfigReader::from_file(config), out);
  const sh::MixSweepResult r = sh::run_mix_sweep(c);
  std::printf("mix-sweep: pre-trained %zu steps (loss %.4g), plain lambda_c on A %.4g\n", r.pretrain_steps,
              r.pretrain_loss, r.plain_a_mean);
  for (const auto& row : r.ratios) {
    std::printf("  ratio %.3g: A->mix %.4g +- %.3g (%zu degenerate), B->mix %.4g +- %.3g (%zu degenerate)\n",
                row.ratio, row.a_mean, row.a_sd, row.a_degenerate, row.b_mean, row.b_sd, row.b_degenerate);
  }
  return sh::kExitOk;
}

int plot(const std::string& config, const std::string& out) {
  const sh::PlotConfig c = sh::load_plot(sh::ConfigReader::from_file(config), out);
  sh::run_plot(c);
  std::printf("plot: %s\n", c.output.string().c_str());
  return sh::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sharpline: critical-sharpness probes and stability experiments"};
  app.require_subcommand(1);
  std::string config, out;
  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "key = value config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides `out` in the config)");
    return sub;
  };
  CLI::App* train_cmd = add("train", "train a model and log periodic sharpness probes");
  CLI::App* quad_cmd = add("quad-validate", "compare predicted and simulated stability boundaries");
  CLI::App* mix_cmd = add("mix-sweep", "relative critical sharpness across mix ratios");
  CLI::App* plot_cmd = add("plot", "render a log as SVG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sh::kExitOk : sh::kExitUsage;
  }

  try {
    if (*train_cmd) return train(config, out);
    if (*quad_cmd) return quad_validate(config, out);
    if (*mix_cmd) return mix_sweep(config, out);
    if (*plot_cmd) return plot(config, out);
  } catch (const sharpline::ConfigError& e) {
    std::fprintf(stderr, "sharpline: %s\n", e.what());
    return sh::kExitUsage;
  } catch (const sharpline::Error& e) {
    std::fprintf(stderr, "sharpline: %s\n", e.what());
    return sh::kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sharpline: %s\n", e.what());
    return sh::kExitValidation;
  }
  return sh::kExitUsage;
}
