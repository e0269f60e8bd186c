#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "spdcsim/pipeline.hpp"

namespace fs = std::filesystem;
using namespace spdcsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInsufficientData = 3;
constexpr int kExitIo = 4;

ExperimentConfig resolve_config(const std::string& config_path,
                                std::optional<std::uint64_t> seed_override) {
  ExperimentConfig cfg =
      config_path.empty() ? default_config() : load_config(config_path);
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.plan.rng_seed = *seed_override;
  }
  cfg.validate();
  return cfg;
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InsufficientDataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInsufficientData;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Photon-pair experiment simulator and analysis chain: time-tag "
      "simulation, coincidence histograms, state tomography, CHSH Bell test"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "run";
  std::optional<std::uint64_t> seed_override;
  bool reproducible = false;
  app.add_option("--config", config_path, "Experiment config JSON")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed_override, "Override the config seed");
  app.add_flag("--reproducible", reproducible,
               "Exclude timestamps from outputs (outputs carry none; the "
               "flag is accepted for pipeline compatibility)");

  auto* sim = app.add_subcommand("simulate",
                                 "Generate time-tag streams and a manifest");

  auto* hist = app.add_subcommand(
      "histogram", "Time-correlation histogram of one stream pair");
  std::string signal_path, idler_path;
  double hist_power_nw = 100.0;
  hist->add_option("--signal", signal_path, "Signal .ttag file")->required();
  hist->add_option("--idler", idler_path, "Idler .ttag file")->required();
  hist->add_option("--power-nw", hist_power_nw,
                   "Mean pump power for normalization");

  auto* tomo = app.add_subcommand(
      "tomo", "Density-matrix reconstruction from a count table");
  std::string count_table_path;
  tomo->add_option("--counts", count_table_path, "CountRecord CSV")
      ->required();

  auto* chsh_cmd =
      app.add_subcommand("chsh", "CHSH parameter from a count table");
  std::string chsh_counts_path, chsh_rho_path;
  chsh_cmd->add_option("--counts", chsh_counts_path, "CountRecord CSV")
      ->required();
  chsh_cmd->add_option("--rho", chsh_rho_path,
                       "Density matrix JSON for the prediction curves");

  auto* report_cmd =
      app.add_subcommand("report", "Consolidated report over run dirs");
  std::vector<std::string> run_dirs;
  report_cmd->add_option("--run", run_dirs, "Run directory (repeatable)")
      ->expected(-1);

  auto* pipe = app.add_subcommand(
      "pipeline", "simulate + histogram + tomo + chsh + report in one go");

  // Let the global --config/--out/--seed flags appear after the subcommand.
  for (auto* sub : {sim, hist, tomo, chsh_cmd, report_cmd, pipe}) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    return run_guarded([&] {
      run_simulate(resolve_config(config_path, seed_override), out_dir);
      std::cout << "wrote streams and manifest to " << out_dir << "\n";
    });
  }

  if (hist->parsed()) {
    return run_guarded([&] {
      const auto cfg = resolve_config(config_path, seed_override);
      const auto signal = read_stream(signal_path);
      const auto idler = read_stream(idler_path);
      auto opts = cfg.correlator;
      opts.reference_power_nw = cfg.correlator.reference_power_nw;
      const auto summary =
          run_histogram(signal, idler, opts, hist_power_nw);
      fs::create_directories(out_dir);
      write_histogram_csv(summary.histogram,
                          fs::path(out_dir) / "histogram.csv");
      nlohmann::json j = {
          {"center_ps", summary.center_ps},
          {"window_count", summary.window_count},
          {"accidental_per_window",
           summary.accidental ? nlohmann::json(*summary.accidental)
                              : nlohmann::json(nullptr)},
          {"normalized_rate", summary.normalized_rate}};
      write_json_atomic(fs::path(out_dir) / "histogram_summary.json", j);
      std::cout << "window count " << summary.window_count
                << ", accidentals/window "
                << (summary.accidental
                        ? std::to_string(*summary.accidental)
                        : std::string("insufficient data"))
                << ", normalized rate " << summary.normalized_rate << "\n";
    });
  }

  if (tomo->parsed()) {
    return run_guarded([&] {
      const auto cfg = resolve_config(config_path, seed_override);
      const auto records = read_count_table(count_table_path);
      const auto input = TomographyInput::from_records(records);
      const auto result =
          run_tomography(input, cfg.tomography.bootstrap_n, cfg.seed);
      fs::create_directories(out_dir);
      write_json_atomic(fs::path(out_dir) / "tomography.json",
                        result.to_json());
      std::cout << "C = " << result.concurrence_value << " +- "
                << result.stds.concurrence << ", P = " << result.purity_value
                << " +- " << result.stds.purity
                << ", F = " << result.fidelity_value << " +- "
                << result.stds.fidelity << "\n";
    });
  }

  if (chsh_cmd->parsed()) {
    return run_guarded([&] {
      const auto cfg = resolve_config(config_path, seed_override);
      const auto records = read_count_table(chsh_counts_path);
      const auto result = chsh_from_counts(records, cfg.chsh);
      fs::create_directories(out_dir);
      write_json_atomic(fs::path(out_dir) / "chsh.json", result.to_json());
      std::cout << "S = " << result.s_value.value << " +- "
                << result.s_value.std_dev << " ("
                << result.violation_sigmas << " sigma violation)\n";
    });
  }

  if (report_cmd->parsed()) {
    return run_guarded([&] {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      if (dirs.empty()) dirs.push_back(out_dir);
      const auto report = build_report(dirs);
      write_report(report, out_dir);
      std::cout << "wrote report to " << out_dir << "\n";
    });
  }

  if (pipe->parsed()) {
    return run_guarded([&] {
      run_pipeline(resolve_config(config_path, seed_override), out_dir);
      std::cout << "pipeline artifacts in " << out_dir << "\n";
    });
  }

  return kExitOk;
}
