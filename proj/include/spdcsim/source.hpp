#pragma once

#include <filesystem>
#include <istream>
#include <vector>

#include "spdcsim/polarization.hpp"

namespace spdcsim {

// Scalar imperfection model of the photon-pair source.
struct SourceParams {
  double pair_rate_per_mw = 1600.0;  // emitted pairs s^-1 per mW of pump
  double phase_error = 0.0;          // rad, deviation of phi from pi
  double dephasing = 0.0;            // fraction of HV/VH coherence destroyed
  double white_noise = 0.0;          // admixture of I/4
  double amplitude_imbalance = 0.0;  // HV vs VH weight skew, in [-1, 1]

  void validate() const;
};

// rho = (1-w) rho_coh + w I/4 with rho_coh the imbalance-skewed state at
// phase pi + phase_error, its HV/VH coherence scaled by (1 - dephasing).
DensityMatrix build_state(const SourceParams& params);

// white_noise value whose build_state (other knobs zero) has the target
// concurrence; bisection on the Werner family.
double calibrate_white_noise(double target_concurrence);

// Piecewise-linear pump power trace, power in nW over seconds since epoch.
struct PumpProfile {
  struct Sample {
    double time_s;
    double power_nw;
  };
  std::vector<Sample> samples;

  static PumpProfile constant(double power_nw);
  static PumpProfile from_csv(const std::filesystem::path& path);
  static PumpProfile from_csv(std::istream& in, const std::string& name);

  bool is_constant() const { return samples.size() == 1; }

  double power_at(double t) const;
  // Time-weighted mean over [t0, t1]; requires overlap with the domain.
  double mean_power(double t0, double t1) const;
  double max_power(double t0, double t1) const;
};

// N = pair_rate_per_mw * (power_nw / 1e6) * duration * eta_s * eta_i
//     * Tr(rho Pi_s x Pi_i).
double expected_coincidences(const DensityMatrix& rho, const Projector& ps,
                             const Projector& pi, const SourceParams& params,
                             double power_nw, double duration_s, double eta_s,
                             double eta_i);

}  // namespace spdcsim
