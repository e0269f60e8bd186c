#include "spdcsim/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "spdcsim/tomography.hpp"

namespace spdcsim {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.contains(it.key())) {
      throw ValidationError("config: unknown key \"" + path + it.key() +
                            "\"");
    }
  }
}

double get_num(const json& obj, const std::string& path,
               const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) {
    throw ValidationError("config: \"" + path + key + "\" must be a number");
  }
  return obj.at(key).get<double>();
}

DetectorParams parse_detector(const json& obj, const std::string& path,
                              const DetectorParams& defaults) {
  reject_unknown(obj, path,
                 {"efficiency", "dark_rate_hz", "jitter_sigma_ps",
                  "channel_delay_ps", "tdc_resolution_ps"});
  DetectorParams det = defaults;
  det.efficiency = get_num(obj, path, "efficiency", det.efficiency);
  det.dark_rate_hz = get_num(obj, path, "dark_rate_hz", det.dark_rate_hz);
  det.jitter_sigma_ps =
      get_num(obj, path, "jitter_sigma_ps", det.jitter_sigma_ps);
  det.channel_delay_ps =
      get_num(obj, path, "channel_delay_ps", det.channel_delay_ps);
  det.tdc_resolution_ps = static_cast<std::uint16_t>(
      get_num(obj, path, "tdc_resolution_ps", det.tdc_resolution_ps));
  try {
    det.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("config: " + path.substr(0, path.size() - 1) +
                          ": " + e.what());
  }
  return det;
}

}  // namespace

std::vector<AcquisitionSetting> tomography_settings() {
  std::vector<AcquisitionSetting> out;
  for (const auto& [s, i] : basis_set_16()) {
    out.push_back({s.label, i.label});
  }
  return out;
}

std::vector<AcquisitionSetting> chsh_settings_list(const ChshSettings& chsh) {
  std::vector<AcquisitionSetting> out;
  for (const auto& [s, i] : chsh.required_settings()) {
    auto fmt = [](double deg) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", deg);
      return std::string(buf);
    };
    out.push_back({fmt(s), fmt(i)});
  }
  return out;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.det_idler.channel_delay_ps = 2250.0;
  cfg.plan.settings = tomography_settings();
  for (const auto& s : chsh_settings_list(cfg.chsh)) {
    cfg.plan.settings.push_back(s);
  }
  cfg.plan.rng_seed = cfg.seed;
  return cfg;
}

void ExperimentConfig::validate() const {
  source.validate();
  det_signal.validate();
  det_idler.validate();
  plan.validate();
  if (correlator.bin_width_ps <= 0 || correlator.window_ps <= 0 ||
      correlator.exclusion_ps <= 0) {
    throw ValidationError(
        "config: correlator bin width, window and exclusion must be > 0");
  }
  if (correlator.range_min_ps >= correlator.range_max_ps) {
    throw ValidationError("config: correlator range must be non-empty");
  }
  if (!(correlator.reference_power_nw > 0.0)) {
    throw ValidationError("config: reference_power_nw must be > 0");
  }
  if (tomography.bootstrap_n < 0) {
    throw ValidationError("config: bootstrap_n must be >= 0");
  }
  chsh.validate();
  for (const auto& s : plan.settings) {
    Projector::parse(s.signal);
    Projector::parse(s.idler);
  }
}

ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir) {
  reject_unknown(j, "",
                 {"seed", "source", "pump", "detectors", "acquisition",
                  "correlator", "tomography", "chsh"});
  ExperimentConfig cfg = default_config();

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) {
      throw ValidationError("config: \"seed\" must be a non-negative integer");
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }

  if (j.contains("source")) {
    const auto& s = j.at("source");
    reject_unknown(s, "source.",
                   {"pair_rate_per_mw", "phase_error", "dephasing",
                    "white_noise", "amplitude_imbalance"});
    cfg.source.pair_rate_per_mw =
        get_num(s, "source.", "pair_rate_per_mw", cfg.source.pair_rate_per_mw);
    cfg.source.phase_error =
        get_num(s, "source.", "phase_error", cfg.source.phase_error);
    cfg.source.dephasing =
        get_num(s, "source.", "dephasing", cfg.source.dephasing);
    cfg.source.white_noise =
        get_num(s, "source.", "white_noise", cfg.source.white_noise);
    cfg.source.amplitude_imbalance = get_num(
        s, "source.", "amplitude_imbalance", cfg.source.amplitude_imbalance);
  }

  if (j.contains("pump")) {
    const auto& p = j.at("pump");
    reject_unknown(p, "pump.", {"constant_power_nw", "profile_csv"});
    if (p.contains("constant_power_nw") && p.contains("profile_csv")) {
      throw ValidationError(
          "config: pump takes either constant_power_nw or profile_csv");
    }
    if (p.contains("profile_csv")) {
      const auto rel = p.at("profile_csv").get<std::string>();
      const auto path = base_dir / rel;
      if (!std::filesystem::exists(path)) {
        throw ValidationError("config: pump.profile_csv: no such file " +
                              path.string());
      }
      cfg.pump = PumpProfile::from_csv(path);
      cfg.pump_profile_csv = rel;
    } else {
      cfg.pump = PumpProfile::constant(
          get_num(p, "pump.", "constant_power_nw", 100.0));
    }
  }

  if (j.contains("detectors")) {
    const auto& d = j.at("detectors");
    reject_unknown(d, "detectors.", {"signal", "idler"});
    if (d.contains("signal")) {
      cfg.det_signal =
          parse_detector(d.at("signal"), "detectors.signal.", cfg.det_signal);
    }
    if (d.contains("idler")) {
      cfg.det_idler =
          parse_detector(d.at("idler"), "detectors.idler.", cfg.det_idler);
    }
  }

  if (j.contains("acquisition")) {
    const auto& a = j.at("acquisition");
    reject_unknown(a, "acquisition.",
                   {"duration_s", "settings", "start_time_s", "start_times_s"});
    cfg.plan.duration_s =
        get_num(a, "acquisition.", "duration_s", cfg.plan.duration_s);
    if (!(cfg.plan.duration_s > 0.0)) {
      throw ValidationError("config: acquisition.duration_s must be > 0");
    }
    cfg.plan.start_time_s =
        get_num(a, "acquisition.", "start_time_s", cfg.plan.start_time_s);
    if (a.contains("settings")) {
      cfg.plan.settings.clear();
      for (const auto& pair : a.at("settings")) {
        if (!pair.is_array() || pair.size() != 2) {
          throw ValidationError(
              "config: acquisition.settings entries must be [signal, idler]");
        }
        cfg.plan.settings.push_back({pair.at(0).get<std::string>(),
                                     pair.at(1).get<std::string>()});
      }
    }
    if (a.contains("start_times_s")) {
      cfg.plan.start_times_s.clear();
      for (const auto& t : a.at("start_times_s")) {
        cfg.plan.start_times_s.push_back(t.get<double>());
      }
    }
  }

  if (j.contains("correlator")) {
    const auto& c = j.at("correlator");
    reject_unknown(c, "correlator.",
                   {"bin_width_ps", "window_ps", "exclusion_ps",
                    "reference_power_nw", "range_min_ps", "range_max_ps",
                    "center_ps", "subtract_accidentals"});
    auto& opt = cfg.correlator;
    opt.bin_width_ps = static_cast<std::int64_t>(
        get_num(c, "correlator.", "bin_width_ps", opt.bin_width_ps));
    opt.window_ps = static_cast<std::int64_t>(
        get_num(c, "correlator.", "window_ps", opt.window_ps));
    opt.exclusion_ps = static_cast<std::int64_t>(
        get_num(c, "correlator.", "exclusion_ps", opt.exclusion_ps));
    opt.reference_power_nw = get_num(c, "correlator.", "reference_power_nw",
                                     opt.reference_power_nw);
    opt.range_min_ps = static_cast<std::int64_t>(
        get_num(c, "correlator.", "range_min_ps", opt.range_min_ps));
    opt.range_max_ps = static_cast<std::int64_t>(
        get_num(c, "correlator.", "range_max_ps", opt.range_max_ps));
    if (c.contains("center_ps") && !c.at("center_ps").is_null()) {
      opt.center_ps = static_cast<std::int64_t>(
          c.at("center_ps").get<double>());
    }
    if (c.contains("subtract_accidentals")) {
      opt.subtract_accidentals = c.at("subtract_accidentals").get<bool>();
    }
  }

  if (j.contains("tomography")) {
    const auto& t = j.at("tomography");
    reject_unknown(t, "tomography.", {"bootstrap_n"});
    cfg.tomography.bootstrap_n = static_cast<int>(
        get_num(t, "tomography.", "bootstrap_n", cfg.tomography.bootstrap_n));
  }

  if (j.contains("chsh")) {
    const auto& c = j.at("chsh");
    reject_unknown(c, "chsh.",
                   {"theta_s_deg", "theta_s_prime_deg", "theta_i_deg",
                    "theta_i_prime_deg"});
    cfg.chsh.theta_s_deg =
        get_num(c, "chsh.", "theta_s_deg", cfg.chsh.theta_s_deg);
    cfg.chsh.theta_s_prime_deg =
        get_num(c, "chsh.", "theta_s_prime_deg", cfg.chsh.theta_s_prime_deg);
    cfg.chsh.theta_i_deg =
        get_num(c, "chsh.", "theta_i_deg", cfg.chsh.theta_i_deg);
    cfg.chsh.theta_i_prime_deg =
        get_num(c, "chsh.", "theta_i_prime_deg", cfg.chsh.theta_i_prime_deg);
  }

  cfg.plan.rng_seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json settings = nlohmann::json::array();
  for (const auto& s : plan.settings) {
    settings.push_back({s.signal, s.idler});
  }
  nlohmann::json pump_j;
  if (!pump_profile_csv.empty()) {
    pump_j = {{"profile_csv", pump_profile_csv}};
  } else {
    pump_j = {{"constant_power_nw", pump.samples.front().power_nw}};
  }
  auto det_j = [](const DetectorParams& d) {
    return nlohmann::json{{"efficiency", d.efficiency},
                          {"dark_rate_hz", d.dark_rate_hz},
                          {"jitter_sigma_ps", d.jitter_sigma_ps},
                          {"channel_delay_ps", d.channel_delay_ps},
                          {"tdc_resolution_ps", d.tdc_resolution_ps}};
  };
  return {
      {"seed", seed},
      {"source",
       {{"pair_rate_per_mw", source.pair_rate_per_mw},
        {"phase_error", source.phase_error},
        {"dephasing", source.dephasing},
        {"white_noise", source.white_noise},
        {"amplitude_imbalance", source.amplitude_imbalance}}},
      {"pump", pump_j},
      {"detectors", {{"signal", det_j(det_signal)}, {"idler", det_j(det_idler)}}},
      {"acquisition",
       {{"duration_s", plan.duration_s},
        {"start_time_s", plan.start_time_s},
        {"settings", settings}}},
      {"correlator",
       {{"bin_width_ps", correlator.bin_width_ps},
        {"window_ps", correlator.window_ps},
        {"exclusion_ps", correlator.exclusion_ps},
        {"reference_power_nw", correlator.reference_power_nw},
        {"range_min_ps", correlator.range_min_ps},
        {"range_max_ps", correlator.range_max_ps},
        {"center_ps", correlator.center_ps
                          ? nlohmann::json(*correlator.center_ps)
                          : nlohmann::json(nullptr)},
        {"subtract_accidentals", correlator.subtract_accidentals}}},
      {"tomography", {{"bootstrap_n", tomography.bootstrap_n}}},
      {"chsh",
       {{"theta_s_deg", chsh.theta_s_deg},
        {"theta_s_prime_deg", chsh.theta_s_prime_deg},
        {"theta_i_deg", chsh.theta_i_deg},
        {"theta_i_prime_deg", chsh.theta_i_prime_deg}}}};
}

}  // namespace spdcsim
