#include "spdcsim/tomography.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spdcsim/rng.hpp"

namespace spdcsim {

namespace {

constexpr double kProbFloor = 1e-12;

const std::array<const char*, 4> kBasisLabels = {"H", "V", "D", "R"};

using Params = Eigen::Matrix<double, 16, 1>;

// Parameter layout: 0..3 the real diagonal of T; then re/im pairs for the
// strictly-lower entries (1,0),(2,0),(2,1),(3,0),(3,1),(3,2).
constexpr std::array<std::pair<int, int>, 6> kLowerIdx = {
    {{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};

Mat4 t_from_params(const Params& x) {
  Mat4 t = Mat4::Zero();
  for (int i = 0; i < 4; ++i) t(i, i) = x(i);
  for (int m = 0; m < 6; ++m) {
    t(kLowerIdx[m].first, kLowerIdx[m].second) =
        Complex(x(4 + 2 * m), x(5 + 2 * m));
  }
  return t;
}

Mat4 rho_from_t(const Mat4& t) {
  Mat4 a = t.adjoint() * t;
  return a / a.trace().real();
}

// Lower-triangular T with T'T = a, via Cholesky of the index-flipped matrix.
Mat4 lower_factor(const Mat4& a) {
  Mat4 j = Mat4::Zero();
  for (int i = 0; i < 4; ++i) j(i, 3 - i) = 1.0;
  Eigen::LLT<Mat4> llt(j * a * j);
  Mat4 l = llt.matrixL();
  return j * l.adjoint() * j;
}

Params params_from_t(const Mat4& t) {
  Params x;
  for (int i = 0; i < 4; ++i) x(i) = t(i, i).real();
  for (int m = 0; m < 6; ++m) {
    const Complex c = t(kLowerIdx[m].first, kLowerIdx[m].second);
    x(4 + 2 * m) = c.real();
    x(5 + 2 * m) = c.imag();
  }
  return x;
}

struct Likelihood {
  double value;
  double scale;
};

Likelihood log_likelihood(const std::array<double, 16>& counts,
                          const std::array<double, 16>& probs) {
  double sum_n = 0.0, sum_p = 0.0;
  for (int k = 0; k < 16; ++k) {
    sum_n += counts[k];
    sum_p += std::max(probs[k], kProbFloor);
  }
  const double s = sum_n / sum_p;
  double ll = 0.0;
  for (int k = 0; k < 16; ++k) {
    const double mu = s * std::max(probs[k], kProbFloor);
    ll -= mu;
    if (counts[k] > 0.0) ll += counts[k] * std::log(mu);
  }
  return {ll, s};
}

struct Model {
  std::array<Mat4, 16> joint;  // Pi_s x Pi_i per basis entry

  Model() {
    const auto basis = basis_set_16();
    for (int k = 0; k < 16; ++k) {
      joint[k] = kron2(basis[k].first.op, basis[k].second.op);
    }
  }

  std::array<double, 16> probs(const Mat4& rho) const {
    std::array<double, 16> p;
    for (int k = 0; k < 16; ++k) {
      p[k] = (rho * joint[k]).trace().real();
    }
    return p;
  }

  // Gradient of the log-likelihood (scale held at its closed-form optimum)
  // with respect to the 16 T parameters.
  Params gradient(const std::array<double, 16>& counts, const Mat4& t) const {
    const Mat4 a = t.adjoint() * t;
    const double tr = a.trace().real();
    const Mat4 rho = a / tr;
    const auto p = probs(rho);
    const auto [ll, s] = log_likelihood(counts, p);
    (void)ll;

    Mat4 m = Mat4::Zero();
    for (int k = 0; k < 16; ++k) {
      m += (counts[k] / std::max(p[k], kProbFloor) - s) * joint[k];
    }
    const Mat4 b = (m - (rho * m).trace().real() * Mat4::Identity()) / tr;
    const Mat4 tb = t * b;

    Params g;
    for (int i = 0; i < 4; ++i) g(i) = 2.0 * tb(i, i).real();
    for (int mm = 0; mm < 6; ++mm) {
      const Complex c = tb(kLowerIdx[mm].first, kLowerIdx[mm].second);
      g(4 + 2 * mm) = 2.0 * c.real();
      g(5 + 2 * mm) = 2.0 * c.imag();
    }
    return g;
  }
};

const Model& model() {
  static const Model instance;
  return instance;
}

Mat4 clip_to_psd(const Mat4& m) {
  Mat4 h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat4> es(h);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  if (ev.sum() <= 0.0) return 0.25 * Mat4::Identity();
  Mat4 out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  return out / out.trace().real();
}

}  // namespace

std::array<std::pair<Projector, Projector>, 16> basis_set_16() {
  std::array<std::pair<Projector, Projector>, 16> out;
  int k = 0;
  for (const char* s : kBasisLabels) {
    for (const char* i : kBasisLabels) {
      out[k++] = {Projector::from_label(s), Projector::from_label(i)};
    }
  }
  return out;
}

TomographyInput TomographyInput::from_records(
    const std::vector<CountRecord>& records) {
  TomographyInput input;
  const auto basis = basis_set_16();
  std::vector<std::string> missing;
  for (int k = 0; k < 16; ++k) {
    const auto& want_s = basis[k].first.label;
    const auto& want_i = basis[k].second.label;
    const auto it = std::find_if(
        records.begin(), records.end(), [&](const CountRecord& r) {
          return r.setting_s == want_s && r.setting_i == want_i;
        });
    if (it == records.end()) {
      missing.push_back(want_s + std::string("x") + want_i);
      continue;
    }
    if (it->normalized < 0.0) {
      throw ValidationError("tomography: negative normalized count at " +
                            want_s + std::string("x") + want_i);
    }
    input.counts[k] = it->normalized;
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "tomography: missing settings:";
    for (const auto& m : missing) msg << ' ' << m;
    throw ValidationError(msg.str());
  }
  return input;
}

Mat4 linear_inversion(const TomographyInput& input, double total_scale) {
  if (!(total_scale > 0.0)) {
    throw ValidationError("linear_inversion: total_scale must be > 0");
  }
  const auto& joint = model().joint;
  // Row k encodes Tr(M Pi_k) as a linear functional of vec(M).
  Eigen::Matrix<Complex, 16, 16> a;
  Eigen::Matrix<Complex, 16, 1> rhs;
  for (int k = 0; k < 16; ++k) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(k, 4 * i + j) = joint[k](j, i);
    rhs(k) = input.counts[k] / total_scale;
  }
  Eigen::FullPivLU<Eigen::Matrix<Complex, 16, 16>> lu(a);
  if (!lu.isInvertible()) {
    throw ValidationError("linear_inversion: degenerate basis set");
  }
  const Eigen::Matrix<Complex, 16, 1> x = lu.solve(rhs);
  Mat4 m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = x(4 * i + j);
  m = 0.5 * (m + m.adjoint());
  const double tr = m.trace().real();
  if (std::abs(tr) < 1e-14) {
    throw InsufficientDataError("linear_inversion: zero-trace result");
  }
  return m / tr;
}

namespace detail {

double mle_objective(const TomographyInput& input,
                     const Eigen::Matrix<double, 16, 1>& params) {
  return log_likelihood(input.counts,
                        model().probs(rho_from_t(t_from_params(params))))
      .value;
}

Eigen::Matrix<double, 16, 1> mle_gradient(
    const TomographyInput& input,
    const Eigen::Matrix<double, 16, 1>& params) {
  return model().gradient(input.counts, t_from_params(params));
}

}  // namespace detail

MleOutcome mle_reconstruct(const TomographyInput& input,
                           std::optional<Mat4> init,
                           const MleOptions& options) {
  double total = 0.0;
  for (double n : input.counts) {
    if (n < 0.0) throw ValidationError("mle_reconstruct: negative count");
    total += n;
  }
  if (total <= 0.0) {
    throw InsufficientDataError("mle_reconstruct: all counts are zero");
  }

  Mat4 start = init ? clip_to_psd(*init) : 0.25 * Mat4::Identity();
  // Interior start so every projection probability is strictly positive.
  start = 0.999 * start + 0.001 * 0.25 * Mat4::Identity();
  Params x = params_from_t(lower_factor(start));

  const Model& mdl = model();
  double ll = log_likelihood(input.counts, mdl.probs(rho_from_t(t_from_params(x)))).value;
  double step = 1e-3;
  bool converged = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Params g = mdl.gradient(input.counts, t_from_params(x));
    const double g2 = g.squaredNorm();
    if (g2 < 1e-24) {
      converged = true;
      break;
    }
    // Backtracking line search; the likelihood never decreases.
    double alpha = step * 2.0;
    double new_ll = -std::numeric_limits<double>::infinity();
    Params cand;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      cand = x + alpha * g;
      new_ll =
          log_likelihood(input.counts, mdl.probs(rho_from_t(t_from_params(cand))))
              .value;
      if (new_ll >= ll + 1e-4 * alpha * g2) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      converged = true;
      break;
    }
    step = alpha;
    const double gain = new_ll - ll;
    x = cand;
    ll = new_ll;
    if (gain < options.tolerance) {
      converged = true;
      ++it;
      break;
    }
  }

  MleOutcome outcome{DensityMatrix(rho_from_t(t_from_params(x))), ll,
                     converged, it};
  return outcome;
}

MetricStds bootstrap_uncertainty(const TomographyInput& input, int n,
                                 std::uint64_t seed,
                                 const MleOptions& options) {
  if (n < 2) {
    throw ValidationError("bootstrap_uncertainty: need n >= 2 replicas");
  }
  const PureState target = singlet();
  std::vector<double> cs, ps, fs;
  cs.reserve(n);
  ps.reserve(n);
  fs.reserve(n);
  for (int r = 0; r < n; ++r) {
    auto rng = SplitMix64::keyed({seed, static_cast<std::uint64_t>(r)});
    TomographyInput replica;
    double total = 0.0;
    for (int k = 0; k < 16; ++k) {
      if (input.counts[k] > 0.0) {
        std::poisson_distribution<long long> dist(input.counts[k]);
        replica.counts[k] = static_cast<double>(dist(rng));
      }
      total += replica.counts[k];
    }
    if (total <= 0.0) continue;
    Mat4 init = linear_inversion(replica, total / 4.0);
    const auto outcome = mle_reconstruct(replica, init, options);
    cs.push_back(concurrence(outcome.rho));
    ps.push_back(purity(outcome.rho));
    fs.push_back(fidelity_to_pure(outcome.rho, target));
  }
  auto sample_std = [](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  return {sample_std(cs), sample_std(ps), sample_std(fs)};
}

TomographyResult run_tomography(const TomographyInput& input, int n_bootstrap,
                                std::uint64_t seed,
                                const MleOptions& options) {
  double total = 0.0;
  for (double n : input.counts) total += n;
  if (total <= 0.0) {
    throw InsufficientDataError("tomography: all counts are zero");
  }
  Mat4 init = linear_inversion(input, total / 4.0);
  const auto outcome = mle_reconstruct(input, init, options);

  TomographyResult result{outcome.rho,
                          concurrence(outcome.rho),
                          purity(outcome.rho),
                          fidelity_to_pure(outcome.rho, singlet()),
                          {},
                          n_bootstrap,
                          outcome.log_likelihood,
                          outcome.converged};
  if (n_bootstrap >= 2) {
    result.stds = bootstrap_uncertainty(input, n_bootstrap, seed, options);
  }
  return result;
}

nlohmann::json TomographyResult::to_json() const {
  nlohmann::json basis = nlohmann::json::array();
  for (const auto& [s, i] : basis_set_16()) {
    basis.push_back(s.label + std::string("x") + i.label);
  }
  return {{"rho", rho.to_json()},
          {"concurrence", {{"value", concurrence_value}, {"std", stds.concurrence}}},
          {"purity", {{"value", purity_value}, {"std", stds.purity}}},
          {"fidelity", {{"value", fidelity_value}, {"std", stds.fidelity}}},
          {"n_bootstrap", n_bootstrap},
          {"log_likelihood", log_likelihood},
          {"converged", converged},
          {"basis_set", basis}};
}

AggregateResult aggregate_runs(const std::vector<DensityMatrix>& runs) {
  if (runs.empty()) {
    throw InsufficientDataError("aggregate_runs: no runs");
  }
  Mat4 mean = Mat4::Zero();
  for (const auto& r : runs) mean += r.matrix();
  mean /= static_cast<double>(runs.size());
  DensityMatrix rho(clip_to_psd(mean));

  const PureState target = singlet();
  std::vector<double> cs, ps, fs;
  for (const auto& r : runs) {
    cs.push_back(concurrence(r));
    ps.push_back(purity(r));
    fs.push_back(fidelity_to_pure(r, target));
  }
  auto sample_std = [](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  return {rho, concurrence(rho), purity(rho),
          fidelity_to_pure(rho, target),
          {sample_std(cs), sample_std(ps), sample_std(fs)}};
}

}  // namespace spdcsim
