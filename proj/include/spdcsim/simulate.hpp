#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spdcsim/polarization.hpp"
#include "spdcsim/source.hpp"
#include "spdcsim/timetag.hpp"

namespace spdcsim {

struct DetectorParams {
  double efficiency = 1.0;       // per-photon detection probability
  double dark_rate_hz = 0.0;     // counts per second
  double jitter_sigma_ps = 300.0;
  double channel_delay_ps = 0.0; // electronic offset
  std::uint16_t tdc_resolution_ps = 81;

  void validate() const;
};

// Analyzer setting for one acquisition: a named basis (H,V,D,A,R,L) or a
// linear-polarizer angle in degrees, per arm.
struct AcquisitionSetting {
  std::string signal;
  std::string idler;
};

struct AcquisitionPlan {
  std::vector<AcquisitionSetting> settings;
  double duration_s = 120.0;
  double start_time_s = 0.0;  // settings run back to back from here unless
  std::vector<double> start_times_s;  // per-setting starts are given
  std::uint64_t rng_seed = 0;

  void validate() const;
  double setting_start(std::size_t index) const;
};

struct SettingAcquisition {
  AcquisitionSetting setting;
  double start_time_s = 0.0;
  double duration_s = 0.0;
  double mean_power_nw = 0.0;
  TimeTagStream signal;
  TimeTagStream idler;
};

// Realizes the acquisition plan as detector click streams. Pair emission is
// an inhomogeneous Poisson process at pair_rate_per_mw * power(t); each pair
// is jointly projected via four-outcome Born sampling over {pass,block}^2;
// surviving clicks receive channel delay plus Gaussian jitter and snap to
// the TDC grid; independent dark counts are merged per channel. The common
// emission time is quantized to the grid before per-channel offsets, so the
// zero-jitter delay difference is constant. Seed-deterministic: every event
// draws from a generator keyed by (rng_seed, setting index, event index).
std::vector<SettingAcquisition> simulate_acquisition(
    const DensityMatrix& rho, const SourceParams& source,
    const PumpProfile& profile, const DetectorParams& det_s,
    const DetectorParams& det_i, const AcquisitionPlan& plan);

}  // namespace spdcsim
