#pragma once

#include <array>
#include <string>
#include <vector>

#include "spdcsim/correlate.hpp"
#include "spdcsim/polarization.hpp"

#include <nlohmann/json_fwd.hpp>

namespace spdcsim {

struct ChshSettings {
  double theta_s_deg = 0.0;
  double theta_s_prime_deg = 45.0;
  double theta_i_deg = 22.5;
  double theta_i_prime_deg = 67.5;

  void validate() const;
  // The 16 joint analyzer angles the test needs:
  // {theta_s, theta_s+90, theta_s', theta_s'+90} x {same for idler}.
  std::vector<std::pair<double, double>> required_settings() const;
};

struct ValueWithStd {
  double value = 0.0;
  double std_dev = 0.0;
};

// E = (N1 + N2 - N3 - N4) / (N1 + N2 + N3 + N4) for counts ordered
// (a,b), (a_perp,b_perp), (a,b_perp), (a_perp,b). First-order Poisson
// propagation; zero counts contribute variance 1.
ValueWithStd correlation_E(const std::array<double, 4>& counts);

struct ChshResult {
  std::array<ValueWithStd, 4> correlations;  // (s,i) (s,i') (s',i) (s',i')
  ValueWithStd s_value;
  double signed_s = 0.0;
  double violation_sigmas = 0.0;
  ChshSettings settings;

  nlohmann::json to_json() const;
};

// S = |E(s,i) - E(s,i') + E(s',i) + E(s',i')|; std by quadrature sum.
ChshResult chsh_S(const std::array<ValueWithStd, 4>& correlations,
                  const ChshSettings& settings);

// Extracts the 16 angle records (matched within 1e-6 degrees; named labels
// H/V/D/A accepted) and evaluates the CHSH combination.
ChshResult chsh_from_counts(const std::vector<CountRecord>& records,
                            const ChshSettings& settings);

// S from exact Born probabilities of rho at the given settings.
ChshResult chsh_exact(const DensityMatrix& rho, const ChshSettings& settings);

// p(theta_i) = Tr(rho Pi(theta_s) x Pi(theta_i)) along the sweep.
std::vector<double> predict_correlation_curve(
    const DensityMatrix& rho, double theta_s_deg,
    const std::vector<double>& theta_i_sweep_deg);

}  // namespace spdcsim
