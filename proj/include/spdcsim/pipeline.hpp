#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "spdcsim/chsh.hpp"
#include "spdcsim/config.hpp"
#include "spdcsim/correlate.hpp"
#include "spdcsim/tomography.hpp"

#include <nlohmann/json_fwd.hpp>

namespace spdcsim {

// Simulates the plan and writes one stream file pair per setting plus
// manifest.json under out_dir/streams. Deterministic for a fixed config.
void run_simulate(const ExperimentConfig& config,
                  const std::filesystem::path& out_dir);

struct HistogramSummary {
  Histogram histogram;
  std::int64_t center_ps = 0;
  std::uint64_t window_count = 0;
  std::optional<double> accidental;  // unset when the tail is empty
  double normalized_rate = 0.0;      // window counts at the reference power
};

// Delay-histogram stage for one stream pair.
HistogramSummary run_histogram(const TimeTagStream& signal,
                               const TimeTagStream& idler,
                               const CorrelatorOptions& options,
                               double mean_power_nw);

// Reduces every simulated setting to a CountRecord row.
std::vector<CountRecord> reduce_to_counts(
    const std::vector<SettingAcquisition>& acquisitions,
    const CorrelatorOptions& options);

// Reads the stream files named by a manifest back into acquisitions.
std::vector<SettingAcquisition> read_manifest_streams(
    const std::filesystem::path& out_dir);

// Full closed loop: simulate, correlate, tomography, CHSH, report files.
void run_pipeline(const ExperimentConfig& config,
                  const std::filesystem::path& out_dir);

// Consolidated report over one or more run directories; with several runs an
// aggregate section carries mean and run-to-run spread.
nlohmann::json build_report(
    const std::vector<std::filesystem::path>& run_dirs);
void write_report(const nlohmann::json& report,
                  const std::filesystem::path& out_dir);

// Atomic file writes (temp + rename).
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);
void write_json_atomic(const std::filesystem::path& path,
                       const nlohmann::json& j);

}  // namespace spdcsim
