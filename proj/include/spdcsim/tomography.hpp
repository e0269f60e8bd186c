#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "spdcsim/correlate.hpp"
#include "spdcsim/polarization.hpp"

#include <nlohmann/json_fwd.hpp>

namespace spdcsim {

// The {H,V,D,R} x {H,V,D,R} product set: informationally complete and
// realizable with QWP+HWP+PBS analyzers.
std::array<std::pair<Projector, Projector>, 16> basis_set_16();

// Coincidence counts matched to basis_set_16() order.
struct TomographyInput {
  std::array<double, 16> counts{};

  // Matches records to the basis by setting labels; throws ValidationError
  // listing any missing settings.
  static TomographyInput from_records(const std::vector<CountRecord>& records);
};

// Unique Hermitian M with Tr(M Pi_k) = counts_k / total_scale, then
// trace-normalized. May carry small negative eigenvalues.
Mat4 linear_inversion(const TomographyInput& input, double total_scale);

struct MleOptions {
  int max_iterations = 10000;
  double tolerance = 1e-9;
};

struct MleOutcome {
  DensityMatrix rho;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Maximum-likelihood state via rho = T'T / Tr(T'T), T lower-triangular with
// 16 real parameters; Poisson log-likelihood, projected gradient ascent with
// backtracking line search. PSD and unit trace hold by construction.
MleOutcome mle_reconstruct(const TomographyInput& input,
                           std::optional<Mat4> init = std::nullopt,
                           const MleOptions& options = {});

struct MetricStds {
  double concurrence = 0.0;
  double purity = 0.0;
  double fidelity = 0.0;
};

// Parametric bootstrap: each count resampled from Poisson(observed mean),
// the MLE re-run, sample standard deviations reported. Seed-deterministic.
MetricStds bootstrap_uncertainty(const TomographyInput& input, int n,
                                 std::uint64_t seed,
                                 const MleOptions& options = {});

// Optimizer internals exposed for verification. The chart is the
// 16-parameter lower-triangular factor: entries 0..3 its real diagonal,
// then re/im pairs for (1,0),(2,0),(2,1),(3,0),(3,1),(3,2). The objective
// is the Poisson log-likelihood with the overall scale at its closed-form
// optimum, so finite differences of it match the gradient.
namespace detail {
double mle_objective(const TomographyInput& input,
                     const Eigen::Matrix<double, 16, 1>& params);
Eigen::Matrix<double, 16, 1> mle_gradient(
    const TomographyInput& input, const Eigen::Matrix<double, 16, 1>& params);
}  // namespace detail

struct TomographyResult {
  DensityMatrix rho;
  double concurrence_value = 0.0;
  double purity_value = 0.0;
  double fidelity_value = 0.0;
  MetricStds stds;
  int n_bootstrap = 0;
  double log_likelihood = 0.0;
  bool converged = false;

  nlohmann::json to_json() const;
};

// Full pipeline: linear-inversion init, MLE, metrics against the singlet
// target, bootstrap uncertainties.
TomographyResult run_tomography(const TomographyInput& input,
                                int n_bootstrap = 200, std::uint64_t seed = 0,
                                const MleOptions& options = {});

// Element-wise average of density matrices from repeated runs, with the
// spread (sample std) of each metric across runs.
struct AggregateResult {
  DensityMatrix rho;
  double concurrence_value, purity_value, fidelity_value;
  MetricStds spread;
};
AggregateResult aggregate_runs(const std::vector<DensityMatrix>& runs);

}  // namespace spdcsim
