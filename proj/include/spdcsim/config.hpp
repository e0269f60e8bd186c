#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "spdcsim/chsh.hpp"
#include "spdcsim/simulate.hpp"
#include "spdcsim/source.hpp"

#include <nlohmann/json_fwd.hpp>

namespace spdcsim {

struct CorrelatorOptions {
  std::int64_t bin_width_ps = 162;
  std::int64_t window_ps = 1000;
  std::int64_t exclusion_ps = 5000;
  double reference_power_nw = 100.0;
  std::int64_t range_min_ps = -10000;
  std::int64_t range_max_ps = 10000;
  std::optional<std::int64_t> center_ps;  // auto-detected when unset
  bool subtract_accidentals = false;
};

struct TomographyOptions {
  int bootstrap_n = 200;
};

// Full experiment description with reference-scenario defaults: 120 s
// acquisitions, 1 ns window, 162 ps bins, 81 ps grid, 100 nW reference
// power, CHSH angles 0/45/22.5/67.5.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  SourceParams source;
  PumpProfile pump = PumpProfile::constant(100.0);
  std::string pump_profile_csv;  // empty when a constant power is used
  DetectorParams det_signal;
  DetectorParams det_idler;
  AcquisitionPlan plan;
  CorrelatorOptions correlator;
  TomographyOptions tomography;
  ChshSettings chsh;

  void validate() const;
  nlohmann::json to_json() const;
};

// Reference-scenario defaults; acquisition plan covers the 16 tomography bases plus the
// 16 CHSH analyzer angle pairs.
ExperimentConfig default_config();

// The 16 tomography settings / the 16 CHSH settings as plan entries.
std::vector<AcquisitionSetting> tomography_settings();
std::vector<AcquisitionSetting> chsh_settings_list(const ChshSettings& chsh);

// Strict parse: unknown keys are rejected with their path; referenced files
// must exist; all numeric fields are validated. Throws ValidationError or
// IoError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir);

}  // namespace spdcsim
