#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spdcsim/errors.hpp"
#include "spdcsim/timetag.hpp"

namespace spdcsim {

// Time-difference histogram over half-open bins [lo, hi); a delta exactly on
// a boundary lands in the upper bin.
struct Histogram {
  std::int64_t bin_width_ps = 162;
  std::int64_t min_dt_ps = 0;
  std::int64_t max_dt_ps = 0;
  std::vector<std::uint64_t> counts;

  std::size_t bin_count() const { return counts.size(); }
  double bin_center_ps(std::size_t i) const {
    return static_cast<double>(min_dt_ps) + (static_cast<double>(i) + 0.5) *
                                                static_cast<double>(bin_width_ps);
  }
  std::uint64_t total() const;
};

// Counts every (signal, idler) pair with dt = t_i - t_s inside
// [min_dt, max_dt); two-pointer sweep, O(n + m + pairs).
Histogram cross_correlate(const TimeTagStream& signal,
                          const TimeTagStream& idler,
                          std::int64_t bin_width_ps, std::int64_t min_dt_ps,
                          std::int64_t max_dt_ps);

// Pairs with |dt - center| <= width (the window is the maximum allowed
// offset from the center), greedy earliest-match, each click used at most
// once.
std::uint64_t window_coincidences(const TimeTagStream& signal,
                                  const TimeTagStream& idler,
                                  std::int64_t center_ps,
                                  std::int64_t width_ps);

// Argmax bin center; ties break toward smaller dt.
std::int64_t detect_center(const Histogram& hist);

// Expected accidental coincidences per coincidence window (the 2*window_ps
// span around the center) over the acquisition, from the mean bin occupancy
// at |dt - center| > exclusion.
double accidental_estimate(const Histogram& hist, std::int64_t center_ps,
                           std::int64_t window_ps,
                           std::int64_t exclusion_ps = 5000);

// One joint analyzer setting's coincidence result, power-normalized.
struct CountRecord {
  std::string setting_s;
  std::string setting_i;
  std::uint64_t raw = 0;
  double accidental = 0.0;
  double duration_s = 0.0;
  double mean_power_nw = 0.0;
  double normalized = 0.0;  // raw * reference_power / mean_power
};

CountRecord make_count_record(std::string setting_s, std::string setting_i,
                              std::uint64_t raw, double accidental,
                              double duration_s, double mean_power_nw,
                              double reference_power_nw = 100.0);

void write_histogram_csv(const Histogram& hist,
                         const std::filesystem::path& path);

// Table contract between the correlator and tomography/CHSH stages.
void write_count_table(const std::vector<CountRecord>& records,
                       const std::filesystem::path& path);
std::vector<CountRecord> read_count_table(const std::filesystem::path& path);

}  // namespace spdcsim
