#include "spdcsim/source.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace spdcsim {

void SourceParams::validate() const {
  if (!(pair_rate_per_mw >= 0.0) || !std::isfinite(pair_rate_per_mw)) {
    throw ValidationError("SourceParams: pair_rate_per_mw must be >= 0");
  }
  if (!std::isfinite(phase_error)) {
    throw ValidationError("SourceParams: phase_error must be finite");
  }
  if (!(dephasing >= 0.0 && dephasing <= 1.0)) {
    throw ValidationError("SourceParams: dephasing must lie in [0,1]");
  }
  if (!(white_noise >= 0.0 && white_noise <= 1.0)) {
    throw ValidationError("SourceParams: white_noise must lie in [0,1]");
  }
  if (!(std::abs(amplitude_imbalance) <= 1.0)) {
    throw ValidationError("SourceParams: |amplitude_imbalance| must be <= 1");
  }
}

DensityMatrix build_state(const SourceParams& params) {
  params.validate();
  const double a_hv = std::sqrt((1.0 + params.amplitude_imbalance) / 2.0);
  const double a_vh = std::sqrt((1.0 - params.amplitude_imbalance) / 2.0);
  const Complex phase =
      std::exp(Complex(0.0, std::numbers::pi + params.phase_error));

  Vec4 amp;
  amp << 0.0, a_hv, a_vh * phase, 0.0;
  Mat4 coh = amp * amp.adjoint();
  coh(1, 2) *= 1.0 - params.dephasing;
  coh(2, 1) *= 1.0 - params.dephasing;

  Mat4 m = (1.0 - params.white_noise) * coh +
           params.white_noise * 0.25 * Mat4::Identity();
  return DensityMatrix(m);
}

double calibrate_white_noise(double target_concurrence) {
  if (!(target_concurrence >= 0.0 && target_concurrence <= 1.0)) {
    throw ValidationError("calibrate_white_noise: target must lie in [0,1]");
  }
  // Concurrence is monotone decreasing in w on this family.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    SourceParams p;
    p.white_noise = mid;
    if (concurrence(build_state(p)) > target_concurrence) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

PumpProfile PumpProfile::constant(double power_nw) {
  if (!(power_nw >= 0.0) || !std::isfinite(power_nw)) {
    throw ValidationError("PumpProfile: power must be >= 0");
  }
  return PumpProfile{{{0.0, power_nw}}};
}

PumpProfile PumpProfile::from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open pump profile " + path.string());
  }
  return from_csv(in, path.string());
}

PumpProfile PumpProfile::from_csv(std::istream& in, const std::string& name) {
  PumpProfile profile;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != "time_s,power_nw") {
        throw IoError(name + ":1: expected header \"time_s,power_nw\"");
      }
      continue;
    }
    std::istringstream ss(line);
    std::string t_str, p_str;
    if (!std::getline(ss, t_str, ',') || !std::getline(ss, p_str)) {
      throw IoError(name + ":" + std::to_string(lineno) + ": malformed row");
    }
    double t, p;
    try {
      t = std::stod(t_str);
      p = std::stod(p_str);
    } catch (const std::exception&) {
      throw IoError(name + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (!std::isfinite(t) || !std::isfinite(p)) {
      throw IoError(name + ":" + std::to_string(lineno) + ": non-finite value");
    }
    if (p < 0.0) {
      throw IoError(name + ":" + std::to_string(lineno) + ": negative power");
    }
    if (!profile.samples.empty() && t <= profile.samples.back().time_s) {
      throw IoError(name + ":" + std::to_string(lineno) +
                    ": times must be strictly increasing");
    }
    profile.samples.push_back({t, p});
  }
  if (profile.samples.empty()) {
    throw IoError(name + ": pump profile has no samples");
  }
  return profile;
}

double PumpProfile::power_at(double t) const {
  if (samples.empty()) {
    throw ValidationError("PumpProfile: empty profile");
  }
  if (t <= samples.front().time_s) return samples.front().power_nw;
  if (t >= samples.back().time_s) return samples.back().power_nw;
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (t <= samples[k].time_s) {
      const auto& a = samples[k - 1];
      const auto& b = samples[k];
      const double f = (t - a.time_s) / (b.time_s - a.time_s);
      return a.power_nw + f * (b.power_nw - a.power_nw);
    }
  }
  return samples.back().power_nw;
}

double PumpProfile::mean_power(double t0, double t1) const {
  if (samples.empty()) {
    throw ValidationError("PumpProfile: empty profile");
  }
  if (!(t0 < t1)) {
    throw ValidationError("PumpProfile::mean_power: requires t0 < t1");
  }
  if (samples.size() > 1 &&
      (t1 < samples.front().time_s || t0 > samples.back().time_s)) {
    throw ValidationError(
        "PumpProfile::mean_power: interval does not overlap profile domain");
  }
  // Trapezoid integral over segment breakpoints clipped to [t0, t1],
  // with edge-value extrapolation outside the sampled range.
  std::vector<double> knots{t0, t1};
  for (const auto& s : samples) {
    if (s.time_s > t0 && s.time_s < t1) knots.push_back(s.time_s);
  }
  std::sort(knots.begin(), knots.end());
  double integral = 0.0;
  for (std::size_t k = 1; k < knots.size(); ++k) {
    const double a = knots[k - 1], b = knots[k];
    integral += 0.5 * (power_at(a) + power_at(b)) * (b - a);
  }
  return integral / (t1 - t0);
}

double PumpProfile::max_power(double t0, double t1) const {
  if (!(t0 < t1)) {
    throw ValidationError("PumpProfile::max_power: requires t0 < t1");
  }
  double m = std::max(power_at(t0), power_at(t1));
  for (const auto& s : samples) {
    if (s.time_s > t0 && s.time_s < t1) m = std::max(m, s.power_nw);
  }
  return m;
}

double expected_coincidences(const DensityMatrix& rho, const Projector& ps,
                             const Projector& pi, const SourceParams& params,
                             double power_nw, double duration_s, double eta_s,
                             double eta_i) {
  params.validate();
  if (!(power_nw >= 0.0)) {
    throw ValidationError("expected_coincidences: power must be >= 0");
  }
  if (!(duration_s > 0.0)) {
    throw ValidationError("expected_coincidences: duration must be > 0");
  }
  if (!(eta_s > 0.0 && eta_s <= 1.0) || !(eta_i > 0.0 && eta_i <= 1.0)) {
    throw ValidationError("expected_coincidences: efficiencies must be (0,1]");
  }
  return params.pair_rate_per_mw * (power_nw / 1e6) * duration_s * eta_s *
         eta_i * joint_probability(rho, ps, pi);
}

}  // namespace spdcsim
