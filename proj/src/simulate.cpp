#include "spdcsim/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spdcsim/rng.hpp"

namespace spdcsim {

namespace {

// Sub-stream tags mixed into the RNG key.
constexpr std::uint64_t kEmissionCount = 0;
constexpr std::uint64_t kPairEvent = 1;
constexpr std::uint64_t kDarkCounts = 2;

std::uint64_t snap_ps(double t_ps, std::uint16_t grid_ps) {
  if (t_ps < 0.0) t_ps = 0.0;
  const auto ticks = std::llround(t_ps / grid_ps);
  return static_cast<std::uint64_t>(ticks) * grid_ps;
}

void append_dark_counts(std::vector<std::uint64_t>& times_ps,
                        const DetectorParams& det, double duration_s,
                        std::uint64_t seed, std::uint64_t setting_idx,
                        std::uint8_t channel) {
  if (det.dark_rate_hz <= 0.0) return;
  auto rng = SplitMix64::keyed({seed, setting_idx, kDarkCounts, channel});
  std::poisson_distribution<long long> count_dist(det.dark_rate_hz *
                                                  duration_s);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const long long n = count_dist(rng);
  for (long long k = 0; k < n; ++k) {
    times_ps.push_back(
        snap_ps(uni(rng) * duration_s * 1e12, det.tdc_resolution_ps));
  }
}

TimeTagStream make_stream(std::vector<std::uint64_t> times_ps,
                          std::uint8_t channel, std::uint16_t grid_ps) {
  std::sort(times_ps.begin(), times_ps.end());
  TimeTagStream stream;
  stream.tdc_resolution_ps = grid_ps;
  stream.records.reserve(times_ps.size());
  for (auto t : times_ps) stream.records.push_back({channel, t});
  return stream;
}

}  // namespace

void DetectorParams::validate() const {
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw ValidationError("DetectorParams: efficiency must lie in (0,1]");
  }
  if (!(dark_rate_hz >= 0.0)) {
    throw ValidationError("DetectorParams: dark_rate_hz must be >= 0");
  }
  if (!(jitter_sigma_ps >= 0.0)) {
    throw ValidationError("DetectorParams: jitter_sigma_ps must be >= 0");
  }
  if (!std::isfinite(channel_delay_ps) || channel_delay_ps < 0.0) {
    throw ValidationError("DetectorParams: channel_delay_ps must be >= 0");
  }
  if (tdc_resolution_ps == 0) {
    throw ValidationError("DetectorParams: tdc_resolution_ps must be > 0");
  }
}

void AcquisitionPlan::validate() const {
  if (settings.empty()) {
    throw ValidationError("AcquisitionPlan: settings must be non-empty");
  }
  if (!(duration_s > 0.0)) {
    throw ValidationError("AcquisitionPlan: duration_s must be > 0");
  }
  if (!start_times_s.empty() && start_times_s.size() != settings.size()) {
    throw ValidationError(
        "AcquisitionPlan: start_times_s must match the settings count");
  }
}

double AcquisitionPlan::setting_start(std::size_t index) const {
  if (!start_times_s.empty()) return start_times_s[index];
  return start_time_s + static_cast<double>(index) * duration_s;
}

std::vector<SettingAcquisition> simulate_acquisition(
    const DensityMatrix& rho, const SourceParams& source,
    const PumpProfile& profile, const DetectorParams& det_s,
    const DetectorParams& det_i, const AcquisitionPlan& plan) {
  source.validate();
  det_s.validate();
  det_i.validate();
  plan.validate();

  std::vector<SettingAcquisition> out;
  out.reserve(plan.settings.size());

  for (std::size_t idx = 0; idx < plan.settings.size(); ++idx) {
    const auto& setting = plan.settings[idx];
    const Projector proj_s = Projector::parse(setting.signal);
    const Projector proj_i = Projector::parse(setting.idler);

    const double t0 = plan.setting_start(idx);
    const double t1 = t0 + plan.duration_s;

    // Born probabilities over {pass,block} x {pass,block}.
    const double p_pp = joint_probability(rho, proj_s, proj_i);
    const double p_pb = joint_probability(rho, proj_s, proj_i.complement());
    const double p_bp = joint_probability(rho, proj_s.complement(), proj_i);

    // Thinning against the peak rate reproduces the inhomogeneous process.
    const double rate_max =
        source.pair_rate_per_mw * profile.max_power(t0, t1) / 1e6;

    std::vector<std::uint64_t> signal_times, idler_times;

    long long n_candidates = 0;
    if (rate_max > 0.0) {
      auto rng = SplitMix64::keyed({plan.rng_seed, idx, kEmissionCount});
      std::poisson_distribution<long long> count_dist(rate_max *
                                                      plan.duration_s);
      n_candidates = count_dist(rng);
    }

    for (long long ev = 0; ev < n_candidates; ++ev) {
      auto rng = SplitMix64::keyed({plan.rng_seed, idx, kPairEvent,
                                    static_cast<std::uint64_t>(ev)});
      std::uniform_real_distribution<double> uni(0.0, 1.0);

      const double t_rel = uni(rng) * plan.duration_s;
      const double rate_t =
          source.pair_rate_per_mw * profile.power_at(t0 + t_rel) / 1e6;
      if (uni(rng) * rate_max > rate_t) continue;

      const double u = uni(rng);
      const bool pass_s = u < p_pp + p_pb;
      const bool pass_i = u < p_pp || (u >= p_pp + p_pb && u < p_pp + p_pb + p_bp);

      // Shared emission time on the TDC grid, then per-channel offsets.
      const double emit_ps = static_cast<double>(
          snap_ps(t_rel * 1e12, det_s.tdc_resolution_ps));

      if (pass_s && uni(rng) < det_s.efficiency) {
        double arrival = emit_ps + det_s.channel_delay_ps;
        if (det_s.jitter_sigma_ps > 0.0) {
          std::normal_distribution<double> jitter(0.0, det_s.jitter_sigma_ps);
          arrival += jitter(rng);
        }
        signal_times.push_back(snap_ps(arrival, det_s.tdc_resolution_ps));
      }
      if (pass_i && uni(rng) < det_i.efficiency) {
        double arrival = emit_ps + det_i.channel_delay_ps;
        if (det_i.jitter_sigma_ps > 0.0) {
          std::normal_distribution<double> jitter(0.0, det_i.jitter_sigma_ps);
          arrival += jitter(rng);
        }
        idler_times.push_back(snap_ps(arrival, det_i.tdc_resolution_ps));
      }
    }

    append_dark_counts(signal_times, det_s, plan.duration_s, plan.rng_seed,
                       idx, kSignalChannel);
    append_dark_counts(idler_times, det_i, plan.duration_s, plan.rng_seed,
                       idx, kIdlerChannel);

    SettingAcquisition acq;
    acq.setting = setting;
    acq.start_time_s = t0;
    acq.duration_s = plan.duration_s;
    acq.mean_power_nw = profile.mean_power(t0, t1);
    acq.signal =
        make_stream(std::move(signal_times), kSignalChannel,
                    det_s.tdc_resolution_ps);
    acq.idler = make_stream(std::move(idler_times), kIdlerChannel,
                            det_i.tdc_resolution_ps);
    out.push_back(std::move(acq));
  }
  return out;
}

}  // namespace spdcsim
