#include "spdcsim/chsh.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

namespace spdcsim {

namespace {

// Circular-basis labels (R, L) have no linear angle and yield nullopt.
std::optional<double> label_to_angle(const std::string& label) {
  if (label == "H") return 0.0;
  if (label == "D") return 45.0;
  if (label == "V") return 90.0;
  if (label == "A") return 135.0;
  try {
    std::size_t pos = 0;
    const double deg = std::stod(label, &pos);
    if (pos == label.size()) return deg;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

// Projectors at theta and theta+180 coincide.
bool same_angle(double a, double b) {
  double d = std::fmod(std::abs(a - b), 180.0);
  d = std::min(d, 180.0 - d);
  return d < 1e-6;
}

std::string angle_name(double deg) {
  std::ostringstream ss;
  ss << deg;
  return ss.str();
}

}  // namespace

void ChshSettings::validate() const {
  for (double t : {theta_s_deg, theta_s_prime_deg, theta_i_deg,
                   theta_i_prime_deg}) {
    if (!std::isfinite(t)) {
      throw ValidationError("ChshSettings: angles must be finite");
    }
  }
}

std::vector<std::pair<double, double>> ChshSettings::required_settings()
    const {
  validate();
  const std::array<double, 4> s = {theta_s_deg, theta_s_deg + 90.0,
                                   theta_s_prime_deg,
                                   theta_s_prime_deg + 90.0};
  const std::array<double, 4> i = {theta_i_deg, theta_i_deg + 90.0,
                                   theta_i_prime_deg,
                                   theta_i_prime_deg + 90.0};
  std::vector<std::pair<double, double>> out;
  for (double a : s)
    for (double b : i) out.emplace_back(a, b);
  return out;
}

ValueWithStd correlation_E(const std::array<double, 4>& counts) {
  double total = 0.0;
  for (double n : counts) {
    if (n < 0.0) throw ValidationError("correlation_E: negative count");
    total += n;
  }
  if (total <= 0.0) {
    throw InsufficientDataError("correlation_E: zero total count");
  }
  const double same = counts[0] + counts[1];
  const double diff = counts[2] + counts[3];
  const double e = (same - diff) / total;

  // dE/dN is 2*diff/T^2 for the parallel counts, -2*same/T^2 for the
  // crossed ones; zero counts get variance 1.
  const double d_same = 2.0 * diff / (total * total);
  const double d_diff = 2.0 * same / (total * total);
  double var = 0.0;
  var += d_same * d_same * std::max(counts[0], 1.0);
  var += d_same * d_same * std::max(counts[1], 1.0);
  var += d_diff * d_diff * std::max(counts[2], 1.0);
  var += d_diff * d_diff * std::max(counts[3], 1.0);
  return {e, std::sqrt(var)};
}

ChshResult chsh_S(const std::array<ValueWithStd, 4>& correlations,
                  const ChshSettings& settings) {
  settings.validate();
  const double signed_s = correlations[0].value - correlations[1].value +
                          correlations[2].value + correlations[3].value;
  double var = 0.0;
  for (const auto& e : correlations) var += e.std_dev * e.std_dev;

  ChshResult result;
  result.correlations = correlations;
  result.signed_s = signed_s;
  result.s_value = {std::abs(signed_s), std::sqrt(var)};
  result.violation_sigmas =
      result.s_value.std_dev > 0.0
          ? (result.s_value.value - 2.0) / result.s_value.std_dev
          : 0.0;
  result.settings = settings;
  return result;
}

ChshResult chsh_from_counts(const std::vector<CountRecord>& records,
                            const ChshSettings& settings) {
  auto find_count = [&](double s_deg, double i_deg) {
    for (const auto& r : records) {
      const auto s = label_to_angle(r.setting_s);
      const auto i = label_to_angle(r.setting_i);
      if (s && i && same_angle(*s, s_deg) && same_angle(*i, i_deg)) {
        return r.normalized;
      }
    }
    throw ValidationError("chsh: missing setting (" + angle_name(s_deg) +
                          ", " + angle_name(i_deg) + ")");
  };

  auto e_at = [&](double s_deg, double i_deg) {
    return correlation_E({find_count(s_deg, i_deg),
                          find_count(s_deg + 90.0, i_deg + 90.0),
                          find_count(s_deg, i_deg + 90.0),
                          find_count(s_deg + 90.0, i_deg)});
  };

  return chsh_S({e_at(settings.theta_s_deg, settings.theta_i_deg),
                 e_at(settings.theta_s_deg, settings.theta_i_prime_deg),
                 e_at(settings.theta_s_prime_deg, settings.theta_i_deg),
                 e_at(settings.theta_s_prime_deg, settings.theta_i_prime_deg)},
                settings);
}

ChshResult chsh_exact(const DensityMatrix& rho, const ChshSettings& settings) {
  auto e_at = [&](double s_deg, double i_deg) -> ValueWithStd {
    auto p = [&](double a, double b) {
      return joint_probability(rho, Projector::linear(a),
                               Projector::linear(b));
    };
    const double same = p(s_deg, i_deg) + p(s_deg + 90.0, i_deg + 90.0);
    const double diff = p(s_deg, i_deg + 90.0) + p(s_deg + 90.0, i_deg);
    return {(same - diff) / (same + diff), 0.0};
  };
  return chsh_S({e_at(settings.theta_s_deg, settings.theta_i_deg),
                 e_at(settings.theta_s_deg, settings.theta_i_prime_deg),
                 e_at(settings.theta_s_prime_deg, settings.theta_i_deg),
                 e_at(settings.theta_s_prime_deg, settings.theta_i_prime_deg)},
                settings);
}

std::vector<double> predict_correlation_curve(
    const DensityMatrix& rho, double theta_s_deg,
    const std::vector<double>& theta_i_sweep_deg) {
  const Projector ps = Projector::linear(theta_s_deg);
  std::vector<double> out;
  out.reserve(theta_i_sweep_deg.size());
  for (double ti : theta_i_sweep_deg) {
    out.push_back(joint_probability(rho, ps, Projector::linear(ti)));
  }
  return out;
}

nlohmann::json ChshResult::to_json() const {
  nlohmann::json es = nlohmann::json::array();
  const std::array<std::pair<double, double>, 4> pairs = {
      {{settings.theta_s_deg, settings.theta_i_deg},
       {settings.theta_s_deg, settings.theta_i_prime_deg},
       {settings.theta_s_prime_deg, settings.theta_i_deg},
       {settings.theta_s_prime_deg, settings.theta_i_prime_deg}}};
  for (int k = 0; k < 4; ++k) {
    es.push_back({{"theta_s_deg", pairs[k].first},
                  {"theta_i_deg", pairs[k].second},
                  {"value", correlations[k].value},
                  {"std", correlations[k].std_dev}});
  }
  return {{"E", es},
          {"S", {{"value", s_value.value}, {"std", s_value.std_dev}}},
          {"signed_S", signed_s},
          {"violation_sigmas", violation_sigmas},
          {"settings",
           {{"theta_s_deg", settings.theta_s_deg},
            {"theta_s_prime_deg", settings.theta_s_prime_deg},
            {"theta_i_deg", settings.theta_i_deg},
            {"theta_i_prime_deg", settings.theta_i_prime_deg}}}};
}

}  // namespace spdcsim
