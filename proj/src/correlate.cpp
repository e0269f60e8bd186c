#include "spdcsim/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace spdcsim {

namespace {

void require_sorted(const TimeTagStream& s, const char* name) {
  if (!std::is_sorted(s.records.begin(), s.records.end(),
                      [](const TimeTagRecord& a, const TimeTagRecord& b) {
                        return a.timestamp_ps < b.timestamp_ps;
                      })) {
    throw ValidationError(std::string("stream \"") + name + "\" is not sorted");
  }
}

std::int64_t ts(const TimeTagRecord& r) {
  return static_cast<std::int64_t>(r.timestamp_ps);
}

}  // namespace

std::uint64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

Histogram cross_correlate(const TimeTagStream& signal,
                          const TimeTagStream& idler,
                          std::int64_t bin_width_ps, std::int64_t min_dt_ps,
                          std::int64_t max_dt_ps) {
  if (bin_width_ps <= 0 || min_dt_ps >= max_dt_ps) {
    throw ValidationError("cross_correlate: invalid bin width or range");
  }
  require_sorted(signal, "signal");
  require_sorted(idler, "idler");

  Histogram hist;
  hist.bin_width_ps = bin_width_ps;
  hist.min_dt_ps = min_dt_ps;
  hist.max_dt_ps = max_dt_ps;
  const auto n_bins = static_cast<std::size_t>(
      (max_dt_ps - min_dt_ps + bin_width_ps - 1) / bin_width_ps);
  hist.counts.assign(n_bins, 0);

  std::size_t lo = 0;
  for (const auto& s : signal.records) {
    while (lo < idler.records.size() &&
           ts(idler.records[lo]) - ts(s) < min_dt_ps) {
      ++lo;
    }
    for (std::size_t j = lo; j < idler.records.size(); ++j) {
      const std::int64_t dt = ts(idler.records[j]) - ts(s);
      if (dt >= max_dt_ps) break;
      hist.counts[static_cast<std::size_t>((dt - min_dt_ps) / bin_width_ps)]++;
    }
  }
  return hist;
}

std::uint64_t window_coincidences(const TimeTagStream& signal,
                                  const TimeTagStream& idler,
                                  std::int64_t center_ps,
                                  std::int64_t width_ps) {
  if (width_ps <= 0) {
    throw ValidationError("window_coincidences: width must be > 0");
  }
  require_sorted(signal, "signal");
  require_sorted(idler, "idler");
  const std::int64_t lo_off = center_ps - width_ps;
  const std::int64_t hi_off = center_ps + width_ps;

  std::uint64_t matched = 0;
  std::size_t j = 0;
  for (const auto& s : signal.records) {
    while (j < idler.records.size() && ts(idler.records[j]) - ts(s) < lo_off) {
      ++j;
    }
    if (j < idler.records.size() && ts(idler.records[j]) - ts(s) <= hi_off) {
      ++matched;
      ++j;
    }
  }
  return matched;
}

std::int64_t detect_center(const Histogram& hist) {
  if (hist.counts.empty()) {
    throw InsufficientDataError("detect_center: empty histogram");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < hist.counts.size(); ++i) {
    if (hist.counts[i] > hist.counts[best]) best = i;
  }
  return static_cast<std::int64_t>(std::llround(hist.bin_center_ps(best)));
}

double accidental_estimate(const Histogram& hist, std::int64_t center_ps,
                           std::int64_t window_ps,
                           std::int64_t exclusion_ps) {
  if (window_ps <= 0 || exclusion_ps <= 0) {
    throw ValidationError("accidental_estimate: window and exclusion > 0");
  }
  std::uint64_t tail_counts = 0;
  std::size_t tail_bins = 0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    if (std::abs(hist.bin_center_ps(i) - static_cast<double>(center_ps)) >
        static_cast<double>(exclusion_ps)) {
      tail_counts += hist.counts[i];
      ++tail_bins;
    }
  }
  if (tail_bins == 0) {
    throw InsufficientDataError(
        "accidental_estimate: no bins beyond the exclusion zone");
  }
  const double per_bin =
      static_cast<double>(tail_counts) / static_cast<double>(tail_bins);
  // The window spans center +- window_ps, i.e. 2*window_ps of histogram time.
  return per_bin * 2.0 * static_cast<double>(window_ps) /
         static_cast<double>(hist.bin_width_ps);
}

CountRecord make_count_record(std::string setting_s, std::string setting_i,
                              std::uint64_t raw, double accidental,
                              double duration_s, double mean_power_nw,
                              double reference_power_nw) {
  if (!(mean_power_nw > 0.0)) {
    throw ValidationError("make_count_record: mean power must be > 0");
  }
  if (!(reference_power_nw > 0.0)) {
    throw ValidationError("make_count_record: reference power must be > 0");
  }
  CountRecord rec;
  rec.setting_s = std::move(setting_s);
  rec.setting_i = std::move(setting_i);
  rec.raw = raw;
  rec.accidental = accidental;
  rec.duration_s = duration_s;
  rec.mean_power_nw = mean_power_nw;
  rec.normalized =
      static_cast<double>(raw) * reference_power_nw / mean_power_nw;
  return rec;
}

void write_histogram_csv(const Histogram& hist,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "bin_center_ps,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    out << hist.bin_center_ps(i) << ',' << hist.counts[i] << '\n';
  }
}

void write_count_table(const std::vector<CountRecord>& records,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "setting_s,setting_i,raw,accidental,duration_s,mean_power_nw,"
         "normalized\n";
  for (const auto& r : records) {
    out << r.setting_s << ',' << r.setting_i << ',' << r.raw << ','
        << r.accidental << ',' << r.duration_s << ',' << r.mean_power_nw
        << ',' << r.normalized << '\n';
  }
}

std::vector<CountRecord> read_count_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<CountRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line.rfind("setting_s,setting_i,raw", 0) != 0) {
        throw IoError(path.string() + ":1: unexpected count-table header");
      }
      continue;
    }
    std::istringstream ss(line);
    CountRecord r;
    std::string field;
    try {
      std::getline(ss, r.setting_s, ',');
      std::getline(ss, r.setting_i, ',');
      std::getline(ss, field, ',');
      r.raw = std::stoull(field);
      std::getline(ss, field, ',');
      r.accidental = std::stod(field);
      std::getline(ss, field, ',');
      r.duration_s = std::stod(field);
      std::getline(ss, field, ',');
      r.mean_power_nw = std::stod(field);
      std::getline(ss, field);
      r.normalized = std::stod(field);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": malformed count record");
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace spdcsim
