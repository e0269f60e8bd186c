#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "spdcsim/correlate.hpp"
#include "spdcsim/simulate.hpp"
#include "test_util.hpp"

using namespace spdcsim;
using namespace spdcsim::testutil;

namespace {

AcquisitionPlan vh_plan(std::uint64_t seed, double duration_s = 120.0) {
  AcquisitionPlan plan;
  plan.settings = {{"V", "H"}};
  plan.duration_s = duration_s;
  plan.rng_seed = seed;
  return plan;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// pmf of a normal snapped to the TDC grid, over tick indices.
std::map<long long, double> snapped_normal_pmf(double mu, double sigma,
                                               double grid) {
  std::map<long long, double> pmf;
  const long long lo = std::llround((mu - 8.0 * sigma) / grid);
  const long long hi = std::llround((mu + 8.0 * sigma) / grid);
  for (long long k = lo; k <= hi; ++k) {
    const double a = (k * grid - grid / 2.0 - mu) / sigma;
    const double b = (k * grid + grid / 2.0 - mu) / sigma;
    pmf[k] = normal_cdf(b) - normal_cdf(a);
  }
  return pmf;
}

}  // namespace

TEST_CASE("same seed reproduces byte-identical streams") {
  SourceParams source;
  source.pair_rate_per_mw = 1e6;
  DetectorParams det;
  det.dark_rate_hz = 200.0;
  const auto rho = build_state(SourceParams{});
  const auto pump = PumpProfile::constant(100.0);
  const auto a = simulate_acquisition(rho, source, pump, det, det,
                                      vh_plan(42, 5.0));
  const auto b = simulate_acquisition(rho, source, pump, det, det,
                                      vh_plan(42, 5.0));
  REQUIRE(a.size() == 1);
  CHECK(a[0].signal == b[0].signal);
  CHECK(a[0].idler == b[0].idler);
  const auto c = simulate_acquisition(rho, source, pump, det, det,
                                      vh_plan(43, 5.0));
  CHECK(a[0].signal.records != c[0].signal.records);
}

TEST_CASE("all timestamps sit on the TDC grid") {
  SourceParams source;
  source.pair_rate_per_mw = 1e6;
  DetectorParams det;
  det.dark_rate_hz = 500.0;
  det.channel_delay_ps = 2250.0;
  const auto acqs = simulate_acquisition(build_state(SourceParams{}), source,
                                         PumpProfile::constant(100.0), det,
                                         det, vh_plan(1, 5.0));
  for (const auto& r : acqs[0].signal.records) {
    CHECK(r.timestamp_ps % 81 == 0);
  }
  for (const auto& r : acqs[0].idler.records) {
    CHECK(r.timestamp_ps % 81 == 0);
  }
}

TEST_CASE("zero jitter gives a constant grid-snapped delay difference") {
  SourceParams source;
  source.pair_rate_per_mw = 2e5;
  DetectorParams det_s, det_i;
  det_s.jitter_sigma_ps = 0.0;
  det_i.jitter_sigma_ps = 0.0;
  det_i.channel_delay_ps = 2250.0;
  const auto acqs = simulate_acquisition(build_state(SourceParams{}), source,
                                         PumpProfile::constant(100.0), det_s,
                                         det_i, vh_plan(5, 20.0));
  const auto& sig = acqs[0].signal.records;
  const auto& idl = acqs[0].idler.records;
  REQUIRE(sig.size() > 100);
  // Lossless and dark-free: streams pair up one to one.
  REQUIRE(sig.size() == idl.size());
  const long long expected_dt = std::llround(2250.0 / 81.0) * 81;  // 2268
  for (std::size_t k = 0; k < sig.size(); ++k) {
    const long long dt = static_cast<long long>(idl[k].timestamp_ps) -
                         static_cast<long long>(sig[k].timestamp_ps);
    CHECK(dt == expected_dt);
  }
  // The snapped offset stays within one histogram bin of the configured one.
  CHECK(std::abs(expected_dt - 2250) <= 162);
}

TEST_CASE("halving both efficiencies quarters coincidences, halves singles") {
  SourceParams source;
  source.pair_rate_per_mw = 4e5;
  std::vector<double> coin_ratio, single_ratio;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    DetectorParams full, half;
    full.jitter_sigma_ps = 0.0;
    half.jitter_sigma_ps = 0.0;
    half.efficiency = 0.5;
    const auto rho = build_state(SourceParams{});
    const auto pump = PumpProfile::constant(100.0);
    const auto a = simulate_acquisition(rho, source, pump, full, full,
                                        vh_plan(seed, 5.0));
    const auto b = simulate_acquisition(rho, source, pump, half, half,
                                        vh_plan(seed + 1000, 5.0));
    const double ca =
        static_cast<double>(window_coincidences(a[0].signal, a[0].idler, 0, 1000));
    const double cb =
        static_cast<double>(window_coincidences(b[0].signal, b[0].idler, 0, 1000));
    coin_ratio.push_back(cb / ca);
    single_ratio.push_back(static_cast<double>(b[0].signal.records.size()) /
                           static_cast<double>(a[0].signal.records.size()));
  }
  CHECK(std::abs(mean(coin_ratio) - 0.25) < 3.0 * standard_error(coin_ratio));
  CHECK(std::abs(mean(single_ratio) - 0.5) <
        3.0 * standard_error(single_ratio));
}

TEST_CASE("reference-rate calibration gives ~10 VH coincidences per 2 minutes") {
  SourceParams source;  // defaults: 1600 pairs/s/mW, VH carries half
  std::vector<double> counts;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    DetectorParams det_s, det_i;
    det_i.channel_delay_ps = 2250.0;
    const auto acqs = simulate_acquisition(
        build_state(SourceParams{}), source, PumpProfile::constant(100.0),
        det_s, det_i, vh_plan(seed));
    counts.push_back(static_cast<double>(
        window_coincidences(acqs[0].signal, acqs[0].idler, 2268, 1000)));
  }
  CHECK(std::abs(mean(counts) - 10.0) <
        3.0 * std::max(standard_error(counts), 0.3));
}

TEST_CASE("delay-difference distribution matches the quantized-jitter law") {
  SourceParams source;
  source.pair_rate_per_mw = 2e7;  // ~24000 pairs in 12 s
  DetectorParams det_s, det_i;
  det_s.jitter_sigma_ps = 300.0;
  det_i.jitter_sigma_ps = 300.0;
  det_i.channel_delay_ps = 2250.0;
  const auto acqs = simulate_acquisition(build_state(SourceParams{}), source,
                                         PumpProfile::constant(100.0), det_s,
                                         det_i, vh_plan(77, 12.0));
  const auto& sig = acqs[0].signal.records;
  const auto& idl = acqs[0].idler.records;
  REQUIRE(sig.size() == idl.size());
  REQUIRE(sig.size() > 10000);

  std::map<long long, long long> observed;
  for (std::size_t k = 0; k < sig.size(); ++k) {
    const long long dt = (static_cast<long long>(idl[k].timestamp_ps) -
                          static_cast<long long>(sig[k].timestamp_ps)) /
                         81;
    observed[dt]++;
  }

  // Exact pmf: difference of the two independently snapped jitters.
  const auto pmf_s = snapped_normal_pmf(0.0, 300.0, 81.0);
  const auto pmf_i = snapped_normal_pmf(2250.0, 300.0, 81.0);
  std::map<long long, double> pmf_d;
  for (const auto& [a, pa] : pmf_s)
    for (const auto& [b, pb] : pmf_i) pmf_d[b - a] += pa * pb;

  const double n = static_cast<double>(sig.size());
  double chi2 = 0.0;
  int dof = -1;
  double pooled_exp = 0.0;
  long long pooled_obs = 0;
  for (const auto& [d, p] : pmf_d) {
    const double expect = n * p;
    const auto it = observed.find(d);
    const long long obs = it == observed.end() ? 0 : it->second;
    if (expect < 5.0) {
      pooled_exp += expect;
      pooled_obs += obs;
      continue;
    }
    chi2 += (obs - expect) * (obs - expect) / expect;
    ++dof;
  }
  if (pooled_exp > 0.0) {
    chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++dof;
  }
  // Wilson-Hilferty critical value at alpha = 0.01.
  const double z = 2.326;
  const double crit =
      dof * std::pow(1.0 - 2.0 / (9.0 * dof) + z * std::sqrt(2.0 / (9.0 * dof)),
                     3.0);
  CHECK(chi2 < crit);

  // Width equals the root sum of squares of the per-channel jitters.
  std::vector<double> dts;
  for (std::size_t k = 0; k < sig.size(); ++k) {
    dts.push_back(static_cast<double>(idl[k].timestamp_ps) -
                  static_cast<double>(sig[k].timestamp_ps));
  }
  CHECK(sample_std(dts) ==
        doctest::Approx(std::sqrt(2.0) * 300.0).epsilon(0.05));
}

TEST_CASE("invalid projector labels are rejected") {
  AcquisitionPlan plan;
  plan.settings = {{"V", "Q"}};
  plan.rng_seed = 0;
  SourceParams source;
  DetectorParams det;
  CHECK_THROWS_AS(
      simulate_acquisition(build_state(SourceParams{}), source,
                           PumpProfile::constant(100.0), det, det, plan),
      ValidationError);
}
