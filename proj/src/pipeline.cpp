#include "spdcsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace spdcsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string setting_file_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "setting_%03zu", index);
  return buf;
}

// Histogram center shared across settings: configured value, or the argmax
// of the summed histogram.
std::int64_t resolve_center(const std::vector<SettingAcquisition>& acqs,
                            const CorrelatorOptions& opt) {
  if (opt.center_ps) return *opt.center_ps;
  Histogram sum;
  for (const auto& acq : acqs) {
    Histogram h = cross_correlate(acq.signal, acq.idler, opt.bin_width_ps,
                                  opt.range_min_ps, opt.range_max_ps);
    if (sum.counts.empty()) {
      sum = h;
    } else {
      for (std::size_t i = 0; i < sum.counts.size(); ++i) {
        sum.counts[i] += h.counts[i];
      }
    }
  }
  if (sum.counts.empty() || sum.total() == 0) return 0;
  return detect_center(sum);
}

json histogram_summary_json(const HistogramSummary& summary) {
  return {{"center_ps", summary.center_ps},
          {"window_count", summary.window_count},
          {"accidental_per_window",
           summary.accidental ? json(*summary.accidental) : json(nullptr)},
          {"normalized_rate", summary.normalized_rate}};
}

std::optional<json> read_json_if_present(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return j;
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void write_text_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

void run_simulate(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "streams", ec);
  if (ec) {
    throw IoError("cannot create " + (out_dir / "streams").string() + ": " +
                  ec.message());
  }

  const DensityMatrix rho = build_state(config.source);
  const auto acqs =
      simulate_acquisition(rho, config.source, config.pump, config.det_signal,
                           config.det_idler, config.plan);

  json settings = json::array();
  for (std::size_t k = 0; k < acqs.size(); ++k) {
    const auto stem = setting_file_stem(k);
    const fs::path sig_path = out_dir / "streams" / (stem + "_signal.ttag");
    const fs::path idl_path = out_dir / "streams" / (stem + "_idler.ttag");
    const fs::path sig_tmp = sig_path.string() + ".tmp";
    const fs::path idl_tmp = idl_path.string() + ".tmp";
    write_stream(acqs[k].signal, sig_tmp);
    write_stream(acqs[k].idler, idl_tmp);
    fs::rename(sig_tmp, sig_path);
    fs::rename(idl_tmp, idl_path);
    settings.push_back({{"index", k},
                        {"signal", acqs[k].setting.signal},
                        {"idler", acqs[k].setting.idler},
                        {"start_time_s", acqs[k].start_time_s},
                        {"duration_s", acqs[k].duration_s},
                        {"mean_power_nw", acqs[k].mean_power_nw},
                        {"signal_file", "streams/" + stem + "_signal.ttag"},
                        {"idler_file", "streams/" + stem + "_idler.ttag"}});
  }
  write_json_atomic(out_dir / "manifest.json",
                    {{"seed", config.seed},
                     {"settings", settings},
                     {"config", config.to_json()}});
}

std::vector<SettingAcquisition> read_manifest_streams(const fs::path& out_dir) {
  const auto manifest = read_json_if_present(out_dir / "manifest.json");
  if (!manifest) {
    throw IoError("no manifest.json in " + out_dir.string());
  }
  std::vector<SettingAcquisition> acqs;
  for (const auto& s : manifest->at("settings")) {
    SettingAcquisition acq;
    acq.setting = {s.at("signal").get<std::string>(),
                   s.at("idler").get<std::string>()};
    acq.start_time_s = s.at("start_time_s").get<double>();
    acq.duration_s = s.at("duration_s").get<double>();
    acq.mean_power_nw = s.at("mean_power_nw").get<double>();
    acq.signal = read_stream(out_dir / s.at("signal_file").get<std::string>());
    acq.idler = read_stream(out_dir / s.at("idler_file").get<std::string>());
    acqs.push_back(std::move(acq));
  }
  return acqs;
}

HistogramSummary run_histogram(const TimeTagStream& signal,
                               const TimeTagStream& idler,
                               const CorrelatorOptions& options,
                               double mean_power_nw) {
  HistogramSummary summary;
  summary.histogram =
      cross_correlate(signal, idler, options.bin_width_ps,
                      options.range_min_ps, options.range_max_ps);
  summary.center_ps = options.center_ps
                          ? *options.center_ps
                          : (summary.histogram.total() > 0
                                 ? detect_center(summary.histogram)
                                 : 0);
  summary.window_count = window_coincidences(signal, idler, summary.center_ps,
                                             options.window_ps);
  try {
    summary.accidental =
        accidental_estimate(summary.histogram, summary.center_ps,
                            options.window_ps, options.exclusion_ps);
  } catch (const InsufficientDataError&) {
    summary.accidental = std::nullopt;
  }
  summary.normalized_rate = static_cast<double>(summary.window_count) *
                            options.reference_power_nw / mean_power_nw;
  return summary;
}

std::vector<CountRecord> reduce_to_counts(
    const std::vector<SettingAcquisition>& acqs,
    const CorrelatorOptions& options) {
  const std::int64_t center = resolve_center(acqs, options);
  std::vector<CountRecord> records;
  for (const auto& acq : acqs) {
    const std::uint64_t raw = window_coincidences(acq.signal, acq.idler,
                                                  center, options.window_ps);
    double accidental = 0.0;
    try {
      const Histogram h =
          cross_correlate(acq.signal, acq.idler, options.bin_width_ps,
                          options.range_min_ps, options.range_max_ps);
      accidental = accidental_estimate(h, center, options.window_ps,
                                       options.exclusion_ps);
    } catch (const InsufficientDataError&) {
    }
    CountRecord rec = make_count_record(
        acq.setting.signal, acq.setting.idler, raw, accidental,
        acq.duration_s, acq.mean_power_nw, options.reference_power_nw);
    if (options.subtract_accidentals) {
      rec.normalized = std::max(0.0, static_cast<double>(raw) - accidental) *
                       options.reference_power_nw / acq.mean_power_nw;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

void write_rho_bars_csv(const DensityMatrix& rho, const fs::path& path) {
  static const char* kLabels[4] = {"HH", "HV", "VH", "VV"};
  std::ostringstream out;
  out.precision(17);
  out << "row,col,re,im\n";
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      out << kLabels[i] << ',' << kLabels[j] << ','
          << rho.matrix()(i, j).real() << ',' << rho.matrix()(i, j).imag()
          << '\n';
    }
  write_text_atomic(path, out.str());
}

void write_chsh_curves_csv(const DensityMatrix& rho,
                           const ChshSettings& settings,
                           const std::vector<CountRecord>& records,
                           double reference_power_nw, const fs::path& path) {
  auto label_angle = [](const std::string& label) -> std::optional<double> {
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
  };

  // Predictions are rescaled so their total over the measured angles
  // matches the normalized counts.
  double count_sum = 0.0, prob_sum = 0.0;
  for (const auto& r : records) {
    const auto s = label_angle(r.setting_s);
    const auto i = label_angle(r.setting_i);
    if (!s || !i) continue;
    count_sum += r.normalized;
    prob_sum += joint_probability(rho, Projector::linear(*s),
                                  Projector::linear(*i));
  }
  const double scale = prob_sum > 0.0 ? count_sum / prob_sum : 1.0;

  std::ostringstream out;
  out.precision(12);
  out << "theta_s_deg,theta_i_deg,p_pred,count_norm,count_std\n";
  for (double theta_s : {settings.theta_s_deg, settings.theta_s_prime_deg}) {
    for (double theta_i = 0.0; theta_i <= 180.0; theta_i += 7.5) {
      const double pred = scale * joint_probability(rho,
                                                    Projector::linear(theta_s),
                                                    Projector::linear(theta_i));
      out << theta_s << ',' << theta_i << ',' << pred << ',';
      const CountRecord* match = nullptr;
      for (const auto& r : records) {
        const auto s = label_angle(r.setting_s);
        const auto i = label_angle(r.setting_i);
        if (s && i && std::abs(*s - theta_s) < 1e-6 &&
            std::abs(std::fmod(std::abs(*i - theta_i), 180.0)) < 1e-6) {
          match = &r;
          break;
        }
      }
      if (match) {
        const double per_count =
            match->mean_power_nw > 0.0
                ? reference_power_nw / match->mean_power_nw
                : 1.0;
        out << match->normalized << ','
            << std::sqrt(std::max<double>(match->raw, 1)) * per_count;
      } else {
        out << ',';
      }
      out << '\n';
    }
  }
  write_text_atomic(path, out.str());
}

}  // namespace

void run_pipeline(const ExperimentConfig& config, const fs::path& out_dir) {
  run_simulate(config, out_dir);
  const auto acqs = read_manifest_streams(out_dir);
  const auto counts = reduce_to_counts(acqs, config.correlator);

  write_count_table(counts, out_dir / "counts.csv");

  // Delay-histogram artifacts, taken from the VH setting when present.
  std::size_t hist_idx = 0;
  for (std::size_t k = 0; k < acqs.size(); ++k) {
    if (acqs[k].setting.signal == "V" && acqs[k].setting.idler == "H") {
      hist_idx = k;
      break;
    }
  }
  const auto summary =
      run_histogram(acqs[hist_idx].signal, acqs[hist_idx].idler,
                    config.correlator, acqs[hist_idx].mean_power_nw);
  write_histogram_csv(summary.histogram, out_dir / "histogram.csv");
  write_json_atomic(out_dir / "histogram_summary.json",
                    histogram_summary_json(summary));

  std::optional<TomographyResult> tomo;
  try {
    const auto input = TomographyInput::from_records(counts);
    tomo = run_tomography(input, config.tomography.bootstrap_n, config.seed);
    write_json_atomic(out_dir / "tomography.json", tomo->to_json());
    write_rho_bars_csv(tomo->rho, out_dir / "rho_bars.csv");
  } catch (const ValidationError&) {
    // Plan lacks the tomography bases; the report marks the stage absent.
  }

  try {
    const auto chsh_result = chsh_from_counts(counts, config.chsh);
    write_json_atomic(out_dir / "chsh.json", chsh_result.to_json());
    const DensityMatrix& curve_rho =
        tomo ? tomo->rho : build_state(config.source);
    write_chsh_curves_csv(curve_rho, config.chsh, counts,
                          config.correlator.reference_power_nw,
                          out_dir / "chsh_curves.csv");
  } catch (const ValidationError&) {
  }

  write_report(build_report({out_dir}), out_dir);
}

json build_report(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) {
    throw ValidationError("report: no run directories given");
  }
  json runs = json::array();
  std::vector<double> cs, ps, fss, ss, rates;
  for (const auto& dir : run_dirs) {
    json run;
    run["dir"] = dir.string();
    const auto manifest = read_json_if_present(dir / "manifest.json");
    run["config"] = manifest ? manifest->value("config", json(nullptr))
                             : json(nullptr);
    if (const auto h = read_json_if_present(dir / "histogram_summary.json")) {
      run["histogram"] = *h;
      rates.push_back(h->at("normalized_rate").get<double>());
    } else {
      run["histogram"] = "absent";
    }
    if (const auto t = read_json_if_present(dir / "tomography.json")) {
      run["tomography"] = *t;
      cs.push_back(t->at("concurrence").at("value").get<double>());
      ps.push_back(t->at("purity").at("value").get<double>());
      fss.push_back(t->at("fidelity").at("value").get<double>());
    } else {
      run["tomography"] = "absent";
    }
    if (const auto c = read_json_if_present(dir / "chsh.json")) {
      run["chsh"] = *c;
      ss.push_back(c->at("S").at("value").get<double>());
    } else {
      run["chsh"] = "absent";
    }
    runs.push_back(std::move(run));
  }

  json report;
  report["runs"] = runs;

  auto mean_of = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / static_cast<double>(v.size());
  };
  json headline;
  auto metric = [&](const char* name, const std::vector<double>& v) {
    if (v.empty()) {
      headline[name] = "absent";
    } else {
      headline[name] = {{"mean", mean_of(v)}, {"spread", sample_std(v)},
                        {"n_runs", v.size()}};
    }
  };
  metric("concurrence", cs);
  metric("purity", ps);
  metric("fidelity", fss);
  metric("chsh_S", ss);
  metric("normalized_rate", rates);
  report["summary"] = headline;
  return report;
}

void write_report(const json& report, const fs::path& out_dir) {
  write_json_atomic(out_dir / "report.json", report);

  std::ostringstream md;
  md << "# Run report\n\n";
  md << "| metric | mean | run spread | runs |\n";
  md << "|---|---|---|---|\n";
  for (const char* name :
       {"concurrence", "purity", "fidelity", "chsh_S", "normalized_rate"}) {
    const auto& m = report.at("summary").at(name);
    if (m.is_string()) {
      md << "| " << name << " | absent | - | - |\n";
    } else {
      md << "| " << name << " | " << m.at("mean").get<double>() << " | "
         << m.at("spread").get<double>() << " | "
         << m.at("n_runs").get<std::size_t>() << " |\n";
    }
  }
  write_text_atomic(out_dir / "report.md", md.str());
}

}  // namespace spdcsim
