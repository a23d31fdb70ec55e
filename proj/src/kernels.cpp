#include "bidomain/kernels.hpp"

#include "bidomain/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace bidomain {

template <int Dim>
double check_spd(const Tensor<Dim>& m, const char* name) {
  if (!m.allFinite()) fail(ErrorKind::Validation, std::string(name) + " has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    fail(ErrorKind::Validation, std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Tensor<Dim>> es(m);
  const double c0 = es.eigenvalues().minCoeff();
  if (!(c0 > 0.0)) fail(ErrorKind::Validation, std::string(name) + " is not positive definite");
  return c0;
}
template double check_spd<2>(const Tensor<2>&, const char*);
template double check_spd<3>(const Tensor<3>&, const char*);

ConductivityModel ConductivityModel::isotropic(double sigma_i, double sigma_e, double m_b) {
  if (!(sigma_i > 0 && sigma_e > 0 && m_b > 0)) fail(ErrorKind::Validation, "conductivities must be positive");
  ConductivityModel model;
  model.M_i = sigma_i * Mat3::Identity();
  model.M_e = sigma_e * Mat3::Identity();
  model.M_b = m_b * Mat3::Identity();
  model.lambda = sigma_e / sigma_i;
  return model;
}

void ConductivityModel::validate() const {
  check_spd<3>(M_i, "M_i");
  check_spd<3>(M_e, "M_e");
  check_spd<3>(M_b, "M_b");
  if (lambda) {
    if (!(*lambda > 0.0)) fail(ErrorKind::Validation, "lambda must be positive");
    const double dev = (M_e - *lambda * M_i).norm();
    if (dev > 1e-12 * M_e.norm()) fail(ErrorKind::Validation, "M_e is not lambda * M_i");
  }
}

// ---------------------------------------------------------------------------

template <int Dim>
EllipticKernel<Dim>::EllipticKernel(const Tensor<Dim>& m) : m_(m) {
  check_spd<Dim>(m, "conductivity");
  m_inv_ = m.inverse();
  sqrt_det_ = std::sqrt(m.determinant());
}

template <>
double EllipticKernel<3>::value(const Vec3& x, const Vec3& y) const {
  const double rho = std::sqrt(rho_squared(x - y));
  return 1.0 / (4.0 * M_PI * sqrt_det_ * rho);
}

template <>
double EllipticKernel<2>::value(const Vec2& x, const Vec2& y) const {
  return -0.5 * std::log(rho_squared(x - y)) / (2.0 * M_PI * sqrt_det_);
}

template <>
double EllipticKernel<3>::conormal(const Vec3& x, const Vec3& y, const Vec3& n_y) const {
  const Vec3 r = x - y;
  const double rho2 = rho_squared(r);
  return n_y.dot(r) / (4.0 * M_PI * sqrt_det_ * rho2 * std::sqrt(rho2));
}

template <>
double EllipticKernel<2>::conormal(const Vec2& x, const Vec2& y, const Vec2& n_y) const {
  const Vec2 r = x - y;
  return n_y.dot(r) / (2.0 * M_PI * sqrt_det_ * rho_squared(r));
}

template <>
Vec3 EllipticKernel<3>::gradient_x(const Vec3& x, const Vec3& y) const {
  const Vec3 r = x - y;
  const double rho2 = rho_squared(r);
  return -(m_inv_ * r) / (4.0 * M_PI * sqrt_det_ * rho2 * std::sqrt(rho2));
}

template <>
Vec2 EllipticKernel<2>::gradient_x(const Vec2& x, const Vec2& y) const {
  const Vec2 r = x - y;
  return -(m_inv_ * r) / (2.0 * M_PI * sqrt_det_ * rho_squared(r));
}

template class EllipticKernel<2>;
template class EllipticKernel<3>;

namespace {
template <class P>
void require_separated(const P& x, const P& y) {
  if ((x - y).norm() < 1e-14) fail(ErrorKind::SingularPoint, "kernel evaluated at coincident points");
}
}  // namespace

double elliptic_fundamental(const Mat3& m, const Vec3& x, const Vec3& y) {
  require_separated(x, y);
  return EllipticKernel3(m).value(x, y);
}

double elliptic_conormal_kernel(const Mat3& m, const Vec3& x, const Vec3& y, const Vec3& n_y) {
  require_separated(x, y);
  return EllipticKernel3(m).conormal(x, y, n_y);
}

double elliptic_fundamental_2d(const Mat2& m, const Vec2& x, const Vec2& y) {
  require_separated(x, y);
  return EllipticKernel2(m).value(x, y);
}

double elliptic_conormal_kernel_2d(const Mat2& m, const Vec2& x, const Vec2& y, const Vec2& n_y) {
  require_separated(x, y);
  return EllipticKernel2(m).conormal(x, y, n_y);
}

// ---------------------------------------------------------------------------

void HeatOperatorSpec::validate() const {
  check_spd<3>(M, "heat tensor");
  if (!a.allFinite() || !std::isfinite(a0)) fail(ErrorKind::Validation, "heat coefficients must be finite");
  if (!(scale > 0.0) || !std::isfinite(scale)) fail(ErrorKind::Validation, "heat scale must be positive");
}

HeatKernel::HeatKernel(const HeatOperatorSpec& spec) : spec_(spec) {
  spec.validate();
  k_ = spec.scale * spec.M;
  k_inv_ = k_.inverse();
  sqrt_det_ = std::sqrt(k_.determinant());
}

double HeatKernel::value(const Vec3& x, const Vec3& y, double s) const {
  if (s <= 0.0) return 0.0;
  const Vec3 r = x - y - spec_.a * s;
  const double q = r.dot(k_inv_ * r);
  return std::exp(-q / (4.0 * s) - spec_.a0 * s) / (std::pow(4.0 * M_PI * s, 1.5) * sqrt_det_);
}

Vec3 HeatKernel::gradient_y(const Vec3& x, const Vec3& y, double s) const {
  if (s <= 0.0) return Vec3::Zero();
  const Vec3 r = x - y - spec_.a * s;
  return value(x, y, s) * (k_inv_ * r) / (2.0 * s);
}

double HeatKernel::dual_conormal(const Vec3& x, const Vec3& y, const Vec3& n_y, double s) const {
  if (s <= 0.0) return 0.0;
  const Vec3 r = x - y - spec_.a * s;
  const double psi = value(x, y, s);
  return psi * (n_y.dot(r) / (2.0 * s) + spec_.a.dot(n_y));
}

double heat_kernel(const HeatOperatorSpec& spec, const Vec3& x, const Vec3& y, double t, double tau) {
  return HeatKernel(spec).value(x, y, t - tau);
}

}  // namespace bidomain
