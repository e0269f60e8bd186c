#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>

#include "spdcsim/errors.hpp"

#include <nlohmann/json_fwd.hpp>

namespace spdcsim {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec4 = Eigen::Vector4cd;

// Two-qubit basis order is (HH, HV, VH, VV) everywhere, including
// serialization. Index 0 of the tensor product is the signal qubit.
Mat4 kron2(const Mat2& a, const Mat2& b);

// Normalized two-photon polarization state.
class PureState {
 public:
  // Throws ValidationError unless |amplitudes| is unit within 1e-12.
  explicit PureState(const Vec4& amplitudes);

  const Vec4& amplitudes() const { return amp_; }
  Complex amplitude(int i) const { return amp_(i); }

  // Overlap magnitude; 1 means equal up to global phase.
  double overlap(const PureState& other) const;

 private:
  Vec4 amp_;
};

// (|HV> + e^{i phi}|VH>)/sqrt(2); phi = pi gives the singlet.
PureState bell_phi(double phi);

inline PureState singlet() { return bell_phi(3.14159265358979323846); }

// Hermitian, unit-trace, positive semidefinite 4x4 state operator.
class DensityMatrix {
 public:
  // Throws ValidationError unless Hermitian within 1e-10 (entrywise),
  // trace 1 within 1e-10, and min eigenvalue >= -1e-10.
  explicit DensityMatrix(const Mat4& entries);

  const Mat4& matrix() const { return m_; }

  nlohmann::json to_json() const;
  static DensityMatrix from_json(const nlohmann::json& j);

 private:
  Mat4 m_;
};

DensityMatrix densify(const PureState& psi);

// v * singlet + (1-v) * I/4.
DensityMatrix werner(double v);

// Rank-1 polarization analyzer outcome on one arm.
struct Projector {
  Mat2 op;
  std::string label;

  // |theta> = cos(theta)|H> + sin(theta)|V>, theta in degrees from horizontal.
  static Projector linear(double theta_deg);
  // One of H, V, D, A, R, L. Circular convention: R = (|H> - i|V>)/sqrt(2),
  // L = (|H> + i|V>)/sqrt(2).
  static Projector from_label(const std::string& label);
  // Accepts a named label or a numeric angle in degrees.
  static Projector parse(const std::string& text);

  Projector complement() const;  // I - op as a projector onto theta + 90
};

// Named basis vectors as 2-component kets.
Eigen::Vector2cd basis_ket(const std::string& label);

// Tr(rho (Pi_s x Pi_i)), clamped to [0, 1].
double joint_probability(const DensityMatrix& rho, const Projector& ps,
                         const Projector& pi);

// Wootters concurrence, in [0, 1].
double concurrence(const DensityMatrix& rho);

// Tr(rho^2), in [0.25, 1] for valid states.
double purity(const DensityMatrix& rho);

// <psi| rho |psi>.
double fidelity_to_pure(const DensityMatrix& rho, const PureState& target);

}  // namespace spdcsim
