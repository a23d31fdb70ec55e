#pragma once

#include "bidomain/kernels.hpp"
#include "bidomain/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace bidomain {

/// Real solid harmonics r^l Y_l^m without normalization and without the
/// Condon–Shortley phase:
///
///   m > 0: Re (x + iy)^m-type harmonic  (∝ cos mφ)
///   m < 0: Im of the |m| harmonic        (∝ sin |m|φ)
///   m = 0: zonal, equal to r^l P_l(cos θ)
///
/// built from C_m^m = (2m-1)!! (x+iy)^m, C_{m+1}^m = (2m+1) z C_m^m and
/// (l-m) C_l^m = (2l-1) z C_{l-1}^m - (l+m-1) r² C_{l-2}^m.
/// Examples: C_1^0 = z, C_1^1 = x, C_2^0 = (3z² - r²)/2, C_2^1 = 3xz, C_2^2 = 3(x² - y²).
struct HarmonicValue {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
};
HarmonicValue solid_harmonic(int l, int m, const Vec3& x);

inline constexpr int kMaxHarmonicDegree = 8;

struct HarmonicTerm {
  int l = 0;
  int m = 0;
  double a = 0.0;  // coefficient of r^l Y
  double b = 0.0;  // coefficient of r^{-l-1} Y (2D: r^{-l})
};

enum class OracleGeometry { Sphere3D, Shell3D, Annulus2D };

/// Σ (a r^l + b r^{-l-1}) Y_l^m in 3D, Σ (a r^l + b r^{-l}) T_l^m(θ) in 2D
/// with T = cos(lθ) for m >= 0 and sin(lθ) for m < 0.
struct HarmonicSpec {
  std::vector<HarmonicTerm> terms;
  OracleGeometry geometry = OracleGeometry::Sphere3D;
  double r1 = 1.0;  // sphere radius, or inner radius
  double r2 = 2.0;  // outer radius for shells and annuli

  void validate() const;
};

/// Throws OutOfGeometry outside the closed geometry (relative slack 1e-9).
HarmonicValue eval_harmonic(const HarmonicSpec& spec, const Vec3& x);
/// 2D variant; the gradient's z component is zero.
HarmonicValue eval_harmonic_2d(const HarmonicSpec& spec, const Vec2& x);

// ---------------------------------------------------------------------------

/// Radial profile (α r^l + β r^{l+2}) Y_l^m of one term of the extracellular
/// potential inside the heart ball.
struct InteriorTerm {
  int l = 0;
  int m = 0;
  double alpha = 0.0;
  double beta = 0.0;
};

/// Analytic steady bidomain solution for concentric heart (r1) and torso (r2)
/// with isotropic conductivities m_i, m_e = λ m_i, m_b:
///
///   u_b = Σ (a r^l + b r^{-l-1}) Y    in the shell, zero flux at r2,
///   u_e = Σ (α r^l + β r^{l+2}) Y     in the heart, matching u_b and its flux,
///   u_i = -𝒩ᵢ(Δ_e u_e, 0) + c         c = -c0 ⟨u_e⟩ (lumped by the sphere),
///
/// every term being closed-form. `u_e_trace` lists the heart-surface
/// coefficients of u_e (HarmonicTerm::a; b must be zero).
struct SteadyDataset {
  double r1 = 1.0, r2 = 2.0;
  int dimension = 3;
  double m_i = 0.0, m_e = 0.0, m_b = 0.0, lambda = 0.0, c0 = 1.0;
  double c = 0.0;
  HarmonicSpec u_b;                      // shell field
  std::vector<InteriorTerm> u_e_inside;  // extracellular field in the heart

  NodalField u_e;         // heart
  NodalField u_i;         // heart
  NodalField v;           // heart
  NodalField heart_flux;  // ν·M_b∇u_b on the heart, ν outward from the heart
  NodalField torso;       // f = u_b on the torso

  double transmission_residual = 0.0;  // max |u_e - u_b| on the heart nodes
  double flux_residual = 0.0;          // max |m_e ∂_r u_e - m_b ∂_r u_b| on the heart nodes
  double torso_flux_residual = 0.0;    // max |∂_r u_b| on the torso nodes

  double u_e_value(const Vec3& x) const;
  /// Δ_e u_e = -m_e ∇²u_e, inside the heart.
  double u_e_source(const Vec3& x) const;
  double u_i_value(const Vec3& x) const;
};

SteadyDataset synth_bidomain_steady(const SurfaceMesh& heart, const SurfaceMesh& torso, double r1, double r2,
                                    const ConductivityModel& model, const std::vector<HarmonicTerm>& u_e_trace,
                                    double c0);
/// Same construction on an annulus; fields are evaluated at the curve nodes.
SteadyDataset synth_bidomain_steady_2d(const CurveMesh& heart, const CurveMesh& torso, double r1, double r2,
                                       double m_i, double m_e, double m_b, const std::vector<HarmonicTerm>& u_e_trace,
                                       double c0);

/// Additive zero-mean Gaussian noise with standard deviation
/// level × max|values|, drawn from mt19937_64(seed).
Eigen::VectorXd add_gaussian_noise(const Eigen::VectorXd& values, double level, std::uint64_t seed);

/// δ = sqrt(Σ (a - b)² / count). Throws ShapeMismatch.
double rmse(const Eigen::MatrixXd& reconstructed, const Eigen::MatrixXd& truth);
double rmse(const NodalField& reconstructed, const NodalField& truth);

}  // namespace bidomain
