#include "spdcsim/polarization.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

namespace spdcsim {

namespace {

constexpr double kHermTol = 1e-10;
constexpr double kTraceTol = 1e-10;
constexpr double kEigTol = -1e-10;

const Complex kI{0.0, 1.0};

}  // namespace

Mat4 kron2(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

PureState::PureState(const Vec4& amplitudes) : amp_(amplitudes) {
  if (!amp_.allFinite()) {
    throw ValidationError("PureState: non-finite amplitude");
  }
  const double n2 = amp_.squaredNorm();
  if (std::abs(n2 - 1.0) > 1e-12) {
    throw ValidationError("PureState: squared amplitudes sum to " +
                          std::to_string(n2) + ", expected 1 within 1e-12");
  }
}

double PureState::overlap(const PureState& other) const {
  return std::abs(amp_.dot(other.amp_));
}

PureState bell_phi(double phi) {
  if (!std::isfinite(phi)) {
    throw ValidationError("bell_phi: phase must be finite");
  }
  const double r = 1.0 / std::numbers::sqrt2;
  Vec4 amp;
  amp << 0.0, r, r * std::exp(kI * phi), 0.0;
  return PureState(amp);
}

DensityMatrix::DensityMatrix(const Mat4& entries) : m_(entries) {
  if (!m_.allFinite()) {
    throw ValidationError("DensityMatrix: non-finite entry");
  }
  const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermTol) {
    throw ValidationError("DensityMatrix: not Hermitian (max deviation " +
                          std::to_string(herm) + ")");
  }
  const double tr = m_.trace().real();
  if (std::abs(tr - 1.0) > kTraceTol) {
    throw ValidationError("DensityMatrix: trace " + std::to_string(tr) +
                          ", expected 1 within 1e-10");
  }
  Eigen::SelfAdjointEigenSolver<Mat4> es(m_, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < kEigTol) {
    throw ValidationError("DensityMatrix: eigenvalue " +
                          std::to_string(min_eig) + " below -1e-10");
  }
}

nlohmann::json DensityMatrix::to_json() const {
  nlohmann::json re = nlohmann::json::array();
  nlohmann::json im = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json re_row = nlohmann::json::array();
    nlohmann::json im_row = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) {
      re_row.push_back(m_(i, j).real());
      im_row.push_back(m_(i, j).imag());
    }
    re.push_back(re_row);
    im.push_back(im_row);
  }
  return {{"re", re}, {"im", im}};
}

DensityMatrix DensityMatrix::from_json(const nlohmann::json& j) {
  if (!j.contains("re") || !j.contains("im")) {
    throw IoError("DensityMatrix JSON: missing \"re\" or \"im\"");
  }
  Mat4 m;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k)
      m(i, k) = Complex(j.at("re").at(i).at(k).get<double>(),
                        j.at("im").at(i).at(k).get<double>());
  return DensityMatrix(m);
}

DensityMatrix densify(const PureState& psi) {
  const Vec4& a = psi.amplitudes();
  Mat4 m = a * a.adjoint();
  return DensityMatrix(m);
}

DensityMatrix werner(double v) {
  if (v < 0.0 || v > 1.0) {
    throw ValidationError("werner: v must lie in [0,1]");
  }
  Mat4 m = v * densify(singlet()).matrix() +
           (1.0 - v) * 0.25 * Mat4::Identity();
  return DensityMatrix(m);
}

Eigen::Vector2cd basis_ket(const std::string& label) {
  const double r = 1.0 / std::numbers::sqrt2;
  Eigen::Vector2cd k;
  if (label == "H") k << 1.0, 0.0;
  else if (label == "V") k << 0.0, 1.0;
  else if (label == "D") k << r, r;
  else if (label == "A") k << r, -r;
  else if (label == "R") k << r, -r * kI;
  else if (label == "L") k << r, r * kI;
  else throw ValidationError("basis_ket: unknown label \"" + label + "\"");
  return k;
}

Projector Projector::linear(double theta_deg) {
  if (!std::isfinite(theta_deg)) {
    throw ValidationError("Projector::linear: angle must be finite");
  }
  const double t = theta_deg * std::numbers::pi / 180.0;
  Eigen::Vector2cd k;
  k << std::cos(t), std::sin(t);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", theta_deg);
  return Projector{k * k.adjoint(), buf};
}

Projector Projector::from_label(const std::string& label) {
  Eigen::Vector2cd k = basis_ket(label);
  return Projector{k * k.adjoint(), label};
}

Projector Projector::parse(const std::string& text) {
  if (text == "H" || text == "V" || text == "D" || text == "A" ||
      text == "R" || text == "L") {
    return from_label(text);
  }
  try {
    std::size_t pos = 0;
    const double deg = std::stod(text, &pos);
    if (pos == text.size()) return linear(deg);
  } catch (const std::exception&) {
  }
  throw ValidationError("Projector::parse: \"" + text +
                        "\" is neither a basis label nor an angle");
}

Projector Projector::complement() const {
  return Projector{Mat2::Identity() - op, label + "_perp"};
}

double joint_probability(const DensityMatrix& rho, const Projector& ps,
                         const Projector& pi) {
  const double p = (rho.matrix() * kron2(ps.op, pi.op)).trace().real();
  if (p < -1e-10 || p > 1.0 + 1e-10) {
    throw ValidationError("joint_probability: probability " +
                          std::to_string(p) + " outside tolerance band");
  }
  return std::clamp(p, 0.0, 1.0);
}

double concurrence(const DensityMatrix& rho) {
  // sigma_y x sigma_y in the (HH,HV,VH,VV) order: antidiagonal (-1,1,1,-1).
  Mat4 yy = Mat4::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Mat4& r = rho.matrix();
  const Mat4 m = r * yy * r.conjugate() * yy;
  Eigen::ComplexEigenSolver<Mat4> es(m, false);
  Eigen::Vector4d lam = es.eigenvalues().real().cwiseMax(0.0).cwiseSqrt();
  std::sort(lam.data(), lam.data() + 4, std::greater<double>());
  const double c = lam(0) - lam(1) - lam(2) - lam(3);
  return std::clamp(c, 0.0, 1.0);
}

double purity(const DensityMatrix& rho) {
  return (rho.matrix() * rho.matrix()).trace().real();
}

double fidelity_to_pure(const DensityMatrix& rho, const PureState& target) {
  const Vec4& a = target.amplitudes();
  const double f = (a.adjoint() * rho.matrix() * a)(0).real();
  return std::clamp(f, 0.0, 1.0);
}

}  // namespace spdcsim
