#include <doctest.h>

#include <filesystem>
#include <random>

#include "spdcsim/correlate.hpp"
#include "spdcsim/simulate.hpp"
#include "test_util.hpp"

using namespace spdcsim;
using namespace spdcsim::testutil;

namespace {

TimeTagStream stream_of(std::uint8_t channel,
                        std::vector<std::uint64_t> times) {
  std::sort(times.begin(), times.end());
  TimeTagStream s;
  for (auto t : times) s.records.push_back({channel, t});
  return s;
}

// O(nm) reference correlator.
Histogram brute_force(const TimeTagStream& sig, const TimeTagStream& idl,
                      std::int64_t bin, std::int64_t lo, std::int64_t hi) {
  Histogram h;
  h.bin_width_ps = bin;
  h.min_dt_ps = lo;
  h.max_dt_ps = hi;
  h.counts.assign(static_cast<std::size_t>((hi - lo + bin - 1) / bin), 0);
  for (const auto& s : sig.records)
    for (const auto& i : idl.records) {
      const std::int64_t dt = static_cast<std::int64_t>(i.timestamp_ps) -
                              static_cast<std::int64_t>(s.timestamp_ps);
      if (dt >= lo && dt < hi) {
        h.counts[static_cast<std::size_t>((dt - lo) / bin)]++;
      }
    }
  return h;
}

TimeTagStream poisson_stream(std::uint8_t channel, double rate_hz,
                             double duration_s, std::mt19937_64& rng) {
  std::poisson_distribution<long long> n_dist(rate_hz * duration_s);
  std::uniform_real_distribution<double> uni(0.0, duration_s);
  std::vector<std::uint64_t> times;
  const long long n = n_dist(rng);
  for (long long k = 0; k < n; ++k) {
    times.push_back(static_cast<std::uint64_t>(uni(rng) * 1e12));
  }
  return stream_of(channel, std::move(times));
}

}  // namespace

TEST_CASE("single pair lands in the bin containing its delay") {
  const auto sig = stream_of(0, {1000000});
  const auto idl = stream_of(1, {1002250});
  const auto h = cross_correlate(sig, idl, 162, -10000, 10000);
  CHECK(h.total() == 1);
  std::size_t hot = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] > 0) hot = i;
  }
  CHECK(std::abs(h.bin_center_ps(hot) - 2250.0) <= 81.0);
}

TEST_CASE("empty idler stream yields a zero histogram") {
  const auto sig = stream_of(0, {100, 200, 300});
  const auto h = cross_correlate(sig, TimeTagStream{}, 162, -10000, 10000);
  CHECK(h.total() == 0);
}

TEST_CASE("histogram bins are half-open with boundary going up") {
  const auto sig = stream_of(0, {1000});
  // dt = 162 sits exactly on the first boundary above zero.
  const auto idl = stream_of(1, {1162});
  const auto h = cross_correlate(sig, idl, 162, 0, 486);
  REQUIRE(h.counts.size() == 3);
  CHECK(h.counts[0] == 0);
  CHECK(h.counts[1] == 1);
}

TEST_CASE("two-pointer sweep equals the brute-force oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<int> n_dist(0, 1000);
    std::uniform_int_distribution<std::uint64_t> t_dist(0, 3'000'000);
    std::vector<std::uint64_t> ts, ti;
    for (int k = n_dist(rng); k > 0; --k) ts.push_back(t_dist(rng));
    for (int k = n_dist(rng); k > 0; --k) ti.push_back(t_dist(rng));
    const auto sig = stream_of(0, ts);
    const auto idl = stream_of(1, ti);
    const auto fast = cross_correlate(sig, idl, 162, -50000, 50000);
    const auto slow = brute_force(sig, idl, 162, -50000, 50000);
    CHECK(fast.counts == slow.counts);
  }
}

TEST_CASE("unsorted streams are rejected") {
  TimeTagStream bad;
  bad.records = {{0, 500}, {0, 100}};
  CHECK_THROWS_AS(cross_correlate(bad, TimeTagStream{}, 162, -100, 100),
                  ValidationError);
  CHECK_THROWS_AS(window_coincidences(bad, TimeTagStream{}, 0, 100),
                  ValidationError);
}

TEST_CASE("independent Poisson streams give a flat histogram") {
  const double rate = 20000.0, duration = 1.0;
  std::vector<double> per_bin_means;
  std::mt19937_64 rng(37);
  for (int seed = 0; seed < 30; ++seed) {
    const auto sig = poisson_stream(0, rate, duration, rng);
    const auto idl = poisson_stream(1, rate, duration, rng);
    const auto h = cross_correlate(sig, idl, 162, -10000, 10000);
    per_bin_means.push_back(static_cast<double>(h.total()) /
                            static_cast<double>(h.counts.size()));
  }
  const double expect = rate * rate * duration * 162e-12;
  CHECK(std::abs(mean(per_bin_means) - expect) <
        3.0 * standard_error(per_bin_means));
}

TEST_CASE("window coincidences: greedy matching basics") {
  // One idler click cannot serve two signal clicks.
  const auto sig = stream_of(0, {1000, 1100});
  const auto idl = stream_of(1, {1050});
  CHECK(window_coincidences(sig, idl, 0, 1000) == 1);

  // Count never exceeds the smaller stream.
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = poisson_stream(0, 5000.0, 0.01, rng);
    const auto b = poisson_stream(1, 5000.0, 0.01, rng);
    CHECK(window_coincidences(a, b, 0, 5000) <=
          std::min(a.records.size(), b.records.size()));
  }
}

TEST_CASE("window narrower than the grid with no exact hits counts nothing") {
  const auto sig = stream_of(0, {1000});
  const auto idl = stream_of(1, {1081});
  CHECK(window_coincidences(sig, idl, 0, 80) == 0);
}

TEST_CASE("deterministic lossless run: window count equals emitted pairs") {
  SourceParams source;
  source.pair_rate_per_mw = 4e5;
  DetectorParams det_s, det_i;
  det_s.jitter_sigma_ps = 0.0;
  det_i.jitter_sigma_ps = 0.0;
  det_i.channel_delay_ps = 2250.0;
  AcquisitionPlan plan;
  plan.settings = {{"V", "H"}};
  plan.duration_s = 10.0;
  plan.rng_seed = 3;
  const auto acqs = simulate_acquisition(build_state(SourceParams{}), source,
                                         PumpProfile::constant(100.0), det_s,
                                         det_i, plan);
  const auto& acq = acqs[0];
  REQUIRE(acq.signal.records.size() == acq.idler.records.size());
  CHECK(window_coincidences(acq.signal, acq.idler, 2268, 1000) ==
        acq.signal.records.size());
}

TEST_CASE("accidental estimate on pure dark-count streams") {
  // Two uncorrelated 1000/s streams, 120 s. The +-1 ns window spans 2 ns
  // of delay, so expect r1*r2*T*span = 0.24 accidentals per window.
  std::vector<double> estimates;
  std::mt19937_64 rng(43);
  for (int seed = 0; seed < 100; ++seed) {
    const auto sig = poisson_stream(0, 1000.0, 120.0, rng);
    const auto idl = poisson_stream(1, 1000.0, 120.0, rng);
    const auto h = cross_correlate(sig, idl, 162, -100000, 100000);
    estimates.push_back(accidental_estimate(h, 0, 1000, 5000));
  }
  CHECK(std::abs(mean(estimates) - 0.24) < 3.0 * standard_error(estimates));
}

TEST_CASE("accidental estimate needs tail bins") {
  Histogram h;
  h.bin_width_ps = 162;
  h.min_dt_ps = -1000;
  h.max_dt_ps = 1000;
  h.counts.assign(13, 0);
  CHECK_THROWS_AS(accidental_estimate(h, 0, 1000, 5000),
                  InsufficientDataError);
  const auto empty = cross_correlate(TimeTagStream{}, TimeTagStream{}, 162,
                                     -1000, 1000);
  CHECK_THROWS_AS(accidental_estimate(empty, 0, 1000, 5000),
                  InsufficientDataError);
}

TEST_CASE("tight simulation leaves a near-empty tail") {
  SourceParams source;
  source.pair_rate_per_mw = 1e5;
  DetectorParams det_s, det_i;
  det_i.channel_delay_ps = 2250.0;
  AcquisitionPlan plan;
  plan.settings = {{"V", "H"}};
  plan.duration_s = 120.0;
  plan.rng_seed = 11;
  const auto acqs = simulate_acquisition(build_state(SourceParams{}), source,
                                         PumpProfile::constant(100.0), det_s,
                                         det_i, plan);
  const auto h = cross_correlate(acqs[0].signal, acqs[0].idler, 162, -100000,
                                 100000);
  CHECK(accidental_estimate(h, 2268, 1000, 5000) < 0.1);
}

TEST_CASE("count record normalization") {
  const auto a = make_count_record("V", "H", 20, 0.0, 120.0, 200.0);
  CHECK(a.normalized == doctest::Approx(10.0));
  const auto b = make_count_record("V", "H", 10, 0.0, 120.0, 100.0);
  CHECK(b.normalized == doctest::Approx(10.0));
  const auto c = make_count_record("V", "H", 13, 0.0, 120.0, 130.0);
  CHECK(c.normalized == doctest::Approx(10.0));
  CHECK_THROWS_AS(make_count_record("V", "H", 5, 0.0, 120.0, 0.0),
                  ValidationError);

  // Re-normalizing to the same reference is idempotent.
  const auto again =
      make_count_record("V", "H", c.raw, c.accidental, c.duration_s,
                        c.mean_power_nw);
  CHECK(again.normalized == c.normalized);
}

TEST_CASE("count table round trip") {
  std::vector<CountRecord> records = {
      make_count_record("V", "H", 13, 0.02, 120.0, 130.0),
      make_count_record("22.5", "67.5", 7, 0.0, 120.0, 95.5)};
  const auto path = std::filesystem::temp_directory_path() / "counts.csv";
  write_count_table(records, path);
  const auto back = read_count_table(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].setting_s == "V");
  CHECK(back[0].raw == 13);
  CHECK(back[0].normalized == doctest::Approx(10.0));
  CHECK(back[1].setting_i == "67.5");
  CHECK(back[1].mean_power_nw == doctest::Approx(95.5));
}

TEST_CASE("histogram center detection breaks ties toward smaller dt") {
  Histogram h;
  h.bin_width_ps = 162;
  h.min_dt_ps = 0;
  h.max_dt_ps = 162 * 4;
  h.counts = {1, 5, 5, 0};
  CHECK(detect_center(h) == std::llround(h.bin_center_ps(1)));
}
