#pragma once

#include "bidomain/mesh.hpp"

#include <Eigen/Core>

#include <optional>

namespace bidomain {

template <int Dim>
using Tensor = Eigen::Matrix<double, Dim, Dim>;
template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
Tensor<Dim> isotropic(double m) {
  return m * Tensor<Dim>::Identity();
}

/// Throws Validation unless `m` is symmetric with strictly positive spectrum.
/// Returns the smallest eigenvalue (the ellipticity constant c0).
template <int Dim>
double check_spd(const Tensor<Dim>& m, const char* name = "tensor");

/// Conductivities of the intracellular, extracellular and extracardiac media
/// (mS/cm), constant per subdomain. `lambda` is set only in the proportional
/// case M_e = lambda * M_i.
struct ConductivityModel {
  Mat3 M_i = Mat3::Identity();
  Mat3 M_e = Mat3::Identity();
  Mat3 M_b = Mat3::Identity();
  std::optional<double> lambda;

  /// Isotropic media; lambda = sigma_e / sigma_i.
  static ConductivityModel isotropic(double sigma_i, double sigma_e, double m_b);

  void validate() const;
};

/// Fundamental solution of Δ_M = -∇·M∇ with Δ_M φ = δ (positive-operator
/// convention), and its conormal derivative in the source variable:
///
///   3D: φ(x,y) = 1 / (4π √det M · ρ),      ρ² = (x-y)ᵀ M⁻¹ (x-y)
///   2D: φ(x,y) = -ln ρ / (2π √det M)
///   ∂_{ν,M;y} φ = n_yᵀ M ∇_y φ = n·(x-y) / (c_d √det M · ρ^d)
template <int Dim>
class EllipticKernel {
 public:
  explicit EllipticKernel(const Tensor<Dim>& m);

  double value(const Point<Dim>& x, const Point<Dim>& y) const;
  double conormal(const Point<Dim>& x, const Point<Dim>& y, const Point<Dim>& n_y) const;
  /// ∇_x φ(x,y), used for interior gradients of layer potentials.
  Point<Dim> gradient_x(const Point<Dim>& x, const Point<Dim>& y) const;

  double rho_squared(const Point<Dim>& r) const { return r.dot(m_inv_ * r); }
  const Tensor<Dim>& tensor() const { return m_; }
  const Tensor<Dim>& inverse() const { return m_inv_; }
  double sqrt_det() const { return sqrt_det_; }

 private:
  Tensor<Dim> m_;
  Tensor<Dim> m_inv_;
  double sqrt_det_;
};

using EllipticKernel3 = EllipticKernel<3>;
using EllipticKernel2 = EllipticKernel<2>;

/// Throws SingularPoint when |x - y| < 1e-14.
double elliptic_fundamental(const Mat3& m, const Vec3& x, const Vec3& y);
double elliptic_conormal_kernel(const Mat3& m, const Vec3& x, const Vec3& y, const Vec3& n_y);
double elliptic_fundamental_2d(const Mat2& m, const Vec2& x, const Vec2& y);
double elliptic_conormal_kernel_2d(const Mat2& m, const Vec2& x, const Vec2& y, const Vec2& n_y);

/// Constant-coefficient parabolic operator
///   ∂_t + scale·Δ_M + aᵀ∇ + a0,   Δ_M = -∇·M∇.
struct HeatOperatorSpec {
  Mat3 M = Mat3::Identity();
  Vec3 a = Vec3::Zero();
  double a0 = 0.0;
  double scale = 1.0;

  void validate() const;
  bool has_drift() const { return a.squaredNorm() != 0.0 || a0 != 0.0; }
};

/// Fundamental solution of the operator above (n = 3). With s = t - τ > 0 and
/// the effective tensor K = scale·M, drift and reaction enter through the
/// substitution u = w(x - a t, t)·exp(-a0 t):
///
///   Ψ = exp(-rᵀK⁻¹r / 4s) / ((4πs)^{3/2} √det K) · exp(-a0 s),  r = x - y - a s
///
/// and Ψ = 0 for s <= 0.
class HeatKernel {
 public:
  explicit HeatKernel(const HeatOperatorSpec& spec);

  double value(const Vec3& x, const Vec3& y, double s) const;
  /// ∇_y Ψ.
  Vec3 gradient_y(const Vec3& x, const Vec3& y, double s) const;
  /// Dual boundary operator of the double-layer potential:
  ///   (∂_{ν,K;y} + aᵀν) Ψ.
  double dual_conormal(const Vec3& x, const Vec3& y, const Vec3& n_y, double s) const;

  const Mat3& effective_tensor() const { return k_; }
  const Mat3& effective_inverse() const { return k_inv_; }
  double sqrt_det() const { return sqrt_det_; }
  const HeatOperatorSpec& spec() const { return spec_; }

 private:
  HeatOperatorSpec spec_;
  Mat3 k_;
  Mat3 k_inv_;
  double sqrt_det_;
};

double heat_kernel(const HeatOperatorSpec& spec, const Vec3& x, const Vec3& y, double t, double tau);

}  // namespace bidomain
