#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spdcsim/chsh.hpp"
#include "spdcsim/source.hpp"
#include "test_util.hpp"

using namespace spdcsim;
using namespace spdcsim::testutil;

namespace {

constexpr double kPi = std::numbers::pi;
const double kTsirelson = 2.0 * std::numbers::sqrt2;

// Poisson-sample a full 16-setting count table from exact probabilities.
std::vector<CountRecord> sample_counts(const DensityMatrix& rho,
                                       const ChshSettings& settings,
                                       double scale, std::mt19937_64& rng) {
  std::vector<CountRecord> records;
  for (const auto& [ts, ti] : settings.required_settings()) {
    const double p =
        joint_probability(rho, Projector::linear(ts), Projector::linear(ti));
    std::poisson_distribution<long long> dist(std::max(scale * p, 1e-12));
    records.push_back(make_count_record(std::to_string(ts), std::to_string(ti),
                                        static_cast<std::uint64_t>(dist(rng)),
                                        0.0, 120.0, 100.0));
  }
  return records;
}

// Separable product of two qubit density matrices.
Mat4 product_state(std::mt19937_64& rng) {
  const Eigen::Vector2cd a = random_qubit(rng);
  const Eigen::Vector2cd b = random_qubit(rng);
  return kron2(a * a.adjoint(), b * b.adjoint());
}

}  // namespace

TEST_CASE("correlation_E reference points") {
  const auto perfect = correlation_E({10.0, 10.0, 0.0, 0.0});
  CHECK(perfect.value == doctest::Approx(1.0));
  const auto anti = correlation_E({0.0, 0.0, 10.0, 10.0});
  CHECK(anti.value == doctest::Approx(-1.0));
  const auto flat = correlation_E({5.0, 5.0, 5.0, 5.0});
  CHECK(flat.value == doctest::Approx(0.0));
  CHECK(flat.std_dev > 0.0);
  CHECK_THROWS_AS(correlation_E({0.0, 0.0, 0.0, 0.0}), InsufficientDataError);
}

TEST_CASE("singlet correlation at the canonical analyzer pair") {
  // E(0, 22.5) = -cos(45 deg) for the singlet.
  const auto rho = densify(singlet());
  const auto result = chsh_exact(rho, ChshSettings{});
  CHECK(result.correlations[0].value ==
        doctest::Approx(-std::cos(kPi / 4.0)).epsilon(1e-12));
  CHECK(result.s_value.value == doctest::Approx(kTsirelson).epsilon(1e-12));
}

TEST_CASE("singlet E follows -cos 2(ts - ti) at random angles") {
  const auto rho = densify(singlet());
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> ang(0.0, 180.0);
  for (int trial = 0; trial < 40; ++trial) {
    const double ts = ang(rng), ti = ang(rng);
    const auto ps = Projector::linear(ts);
    const auto pi_ = Projector::linear(ti);
    const double n1 = joint_probability(rho, ps, pi_);
    const double n2 = joint_probability(rho, ps.complement(), pi_.complement());
    const double n3 = joint_probability(rho, ps, pi_.complement());
    const double n4 = joint_probability(rho, ps.complement(), pi_);
    const double e = (n1 + n2 - n3 - n4) / (n1 + n2 + n3 + n4);
    CHECK(e == doctest::Approx(-std::cos(2.0 * (ts - ti) * kPi / 180.0))
                   .epsilon(1e-10));
  }
}

TEST_CASE("chsh_S arithmetic") {
  std::array<ValueWithStd, 4> e{};
  e[0] = {0.5, 0.1};
  e[1] = {-0.5, 0.1};
  e[2] = {0.5, 0.1};
  e[3] = {0.5, 0.1};
  const auto result = chsh_S(e, ChshSettings{});
  CHECK(result.s_value.value == doctest::Approx(2.0));
  CHECK(result.s_value.std_dev == doctest::Approx(0.2));
  CHECK(result.violation_sigmas == doctest::Approx(0.0));

  e[1] = {-1.0, 0.05};
  e[0] = e[2] = e[3] = {1.0, 0.05};
  const auto max = chsh_S(e, ChshSettings{});
  CHECK(max.s_value.value == doctest::Approx(4.0));
  CHECK(max.violation_sigmas == doctest::Approx(2.0 / 0.1));
}

TEST_CASE("quantum states respect the Tsirelson bound") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ang(0.0, 180.0);
  for (int trial = 0; trial < 200; ++trial) {
    const DensityMatrix rho(random_density(rng));
    ChshSettings settings;
    settings.theta_s_deg = ang(rng);
    settings.theta_s_prime_deg = ang(rng);
    settings.theta_i_deg = ang(rng);
    settings.theta_i_prime_deg = ang(rng);
    CHECK(chsh_exact(rho, settings).s_value.value <= kTsirelson + 1e-9);
  }
}

TEST_CASE("separable states respect the classical bound") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    // Random mixture of up to three product states.
    Mat4 rho = Mat4::Zero();
    std::uniform_real_distribution<double> uni(0.1, 1.0);
    double total = 0.0;
    for (int m = 0; m < 3; ++m) {
      const double w = uni(rng);
      rho += w * product_state(rng);
      total += w;
    }
    rho /= total;
    CHECK(chsh_exact(DensityMatrix(rho), ChshSettings{}).s_value.value <=
          2.0 + 1e-9);
  }
}

TEST_CASE("chsh_from_counts at high statistics matches the exact value") {
  const auto rho = werner(0.9);
  std::mt19937_64 rng(31);
  const auto records = sample_counts(rho, ChshSettings{}, 1e7, rng);
  const auto result = chsh_from_counts(records, ChshSettings{});
  const auto exact = chsh_exact(rho, ChshSettings{});
  CHECK(exact.s_value.value == doctest::Approx(0.9 * kTsirelson).epsilon(1e-10));
  CHECK(result.s_value.value ==
        doctest::Approx(exact.s_value.value).epsilon(1e-3));
  CHECK(result.violation_sigmas > 0.0);
}

TEST_CASE("named labels map onto the default angles") {
  const auto rho = densify(singlet());
  std::mt19937_64 rng(37);
  auto records = sample_counts(rho, ChshSettings{}, 1e6, rng);
  // Rewrite exact-angle labels with their polarization names.
  for (auto& r : records) {
    for (auto* field : {&r.setting_s, &r.setting_i}) {
      const double angle = std::stod(*field);
      if (std::abs(angle - 0.0) < 1e-9) *field = "H";
      if (std::abs(angle - 45.0) < 1e-9) *field = "D";
      if (std::abs(angle - 90.0) < 1e-9) *field = "V";
      if (std::abs(angle - 135.0) < 1e-9) *field = "A";
    }
  }
  const auto result = chsh_from_counts(records, ChshSettings{});
  CHECK(result.s_value.value == doctest::Approx(kTsirelson).epsilon(1e-2));
}

TEST_CASE("missing settings are reported") {
  const auto rho = densify(singlet());
  std::mt19937_64 rng(41);
  auto records = sample_counts(rho, ChshSettings{}, 1e4, rng);
  records.pop_back();
  CHECK_THROWS_AS(chsh_from_counts(records, ChshSettings{}), ValidationError);
}

TEST_CASE("propagated std agrees with Monte-Carlo scatter") {
  const auto rho = werner(0.93);
  std::mt19937_64 rng(43);
  std::vector<double> s_values, s_stds;
  for (int rep = 0; rep < 300; ++rep) {
    const auto records = sample_counts(rho, ChshSettings{}, 80.0, rng);
    const auto result = chsh_from_counts(records, ChshSettings{});
    s_values.push_back(result.signed_s);
    s_stds.push_back(result.s_value.std_dev);
  }
  const double scatter = sample_std(s_values);
  const double propagated = mean(s_stds);
  CHECK(std::abs(propagated - scatter) / scatter < 0.3);
}

TEST_CASE("predicted correlation curves") {
  const auto rho = densify(singlet());
  const std::vector<double> sweep = {0.0, 22.5, 45.0, 90.0, 135.0};
  const auto curve = predict_correlation_curve(rho, 0.0, sweep);
  REQUIRE(curve.size() == sweep.size());
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const double expect = 0.5 * std::pow(std::sin(sweep[k] * kPi / 180.0), 2);
    CHECK(curve[k] == doctest::Approx(expect).epsilon(1e-12));
  }

  const DensityMatrix mixed(0.25 * Mat4::Identity());
  for (double p : predict_correlation_curve(mixed, 30.0, sweep)) {
    CHECK(p == doctest::Approx(0.25));
  }
}

TEST_CASE("settings validation") {
  ChshSettings bad;
  bad.theta_s_deg = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK(ChshSettings{}.required_settings().size() == 16);
}
