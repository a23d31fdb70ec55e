#pragma once

#include "bidomain/bem.hpp"
#include "bidomain/direct_solvers.hpp"
#include "bidomain/kernels.hpp"
#include "bidomain/reconstruction.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace bidomain {

/// `steps` uniformly spaced frames on [0, t_end], both ends included.
struct TimeGrid {
  double t_end = 1.0;
  int steps = 2;

  void validate() const;
  int frames() const { return steps; }
  double spacing() const { return t_end / (steps - 1); }
  double time(int k) const { return k * spacing(); }
};

/// Rows are nodes (surface vertices or volume points), columns are frames.
struct SpaceTimeField {
  std::string location;  // surface id, or "volume"
  Eigen::MatrixXd values;
  TimeGrid grid;
  std::string units = "mV";

  void validate() const;
};

/// Samples of a space-time volume source at quadrature points.
struct SpaceTimeSource {
  VolumeQuadrature quadrature;
  Eigen::MatrixXd values;  // points × frames
  TimeGrid grid;
};

/// I(h)(x,t) = ∫Ψ(x,y,t,0) h(y) dy. Zero for t <= 0.
double poisson_integral(const HeatOperatorSpec& spec, const VolumeSource& h, const Vec3& x, double t);

/// Midpoint rule on the cells of the box [lo, hi] with spacing about h.
VolumeQuadrature box_quadrature(const Vec3& lo, const Vec3& hi, double h);

/// G(g)(x,t) = ∫_0^t ∫ Ψ(x,y,t,τ) g(y,τ) dy dτ with g piecewise linear in τ.
/// Quadrature points at x itself are skipped.
double volume_parabolic_potential(const HeatOperatorSpec& spec, const SpaceTimeSource& g, const Vec3& x, double t);

/// Parabolic layer potentials over a surface (or the triangles flagged in
/// `mask`), densities piecewise linear in space and time:
///
///   V(v)(x,t) =  ∫_0^t ∫_S Ψ v dσ dτ
///   W(w)(x,t) = -∫_0^t ∫_S (∂_{ν,K;y} + aᵀν) Ψ · w dσ dτ
///
/// with K = scale·M. The time integral is done exactly against the hat
/// functions (the s^{-3/2}, s^{-5/2} endpoint behaviour included); drift and
/// reaction factors are interpolated linearly between frames. On a partial
/// surface the density is taken as zero at nodes on its open edges. Throws
/// PointOnBoundary when x lies on S.
class ParabolicLayers {
 public:
  ParabolicLayers(const HeatOperatorSpec& spec, const SurfaceMesh& surface, std::vector<char> mask = {},
                  const AssemblyOptions& opt = {});

  double single_layer(const SpaceTimeField& density, const Vec3& x, double t) const;
  double double_layer(const SpaceTimeField& density, const Vec3& x, double t) const;

  /// Weights per (vertex, frame) so that the potential is their sum against
  /// the density matrix.
  Eigen::MatrixXd single_layer_weights(const TimeGrid& grid, const Vec3& x, double t) const;
  Eigen::MatrixXd double_layer_weights(const TimeGrid& grid, const Vec3& x, double t) const;

  const SurfaceMesh& surface() const { return *surface_; }
  /// Nodes on edges shared by exactly one flagged triangle.
  const std::vector<char>& open_edge_nodes() const { return open_; }

 private:
  Eigen::MatrixXd weights(const TimeGrid& grid, const Vec3& x, double t, bool dbl) const;

  HeatKernel kernel_;
  const SurfaceMesh* surface_;
  std::vector<char> mask_;
  std::vector<char> open_;
  AssemblyOptions opt_;
};

/// I(u₀) + G(𝓛u) + V(∂_{ν,K}u) + W(u) at (x,t): u(x,t) inside, 0 outside.
/// The flux trace is the conormal derivative with K = scale·M. Throws
/// PointOnBoundary near the surface and Validation unless 0 < t <= t_end.
double parabolic_green_reconstruct(const HeatOperatorSpec& spec, const SurfaceMesh& mesh,
                                   const SpaceTimeField& u_trace, const SpaceTimeField& flux_trace,
                                   const VolumeSource& u_initial, const std::optional<SpaceTimeSource>& lu,
                                   const Vec3& x, double t);

/// Cable-equation constants for the linear ionic current
///   I_ion = aᵀ∇v + a0 v + b.
struct CableParameters {
  double chi = 1.0;                    // membrane surface-to-volume ratio
  double membrane_capacitance = 1.0;   // C_m
  Vec3 a = Vec3::Zero();
  double a0 = 0.0;

  void validate() const;
};

/// 𝓛 = ∂_t + [χ C_m (λ+1)]⁻¹ Δ_e + C_m⁻¹(aᵀ∇ + a0), M_e = λ M_i.
HeatOperatorSpec evolution_operator(const ConductivityModel& model, const CableParameters& cable);

struct EvolutionRhs {
  SpaceTimeField F;           // at the evaluation points
  Eigen::MatrixXd neumann;    // 𝒩ᵢ(0, q(t)) + c(t) at the points
  double coupling = 0.0;      // factor in front of the correction, 1/(λ+1)
  std::vector<double> compatibility_defects;  // per frame, relative
};

/// F = h + (λ+1)⁻¹ (∂_t + C_m⁻¹(aᵀ∇ + a0)) (𝒩ᵢ(0, q(·,t)) + c(t)) at
/// `points` inside the heart, q = ν·M_b∇u_b the heart flux per frame. ∂_t
/// uses central differences (three-point one-sided at the ends), ∇ central
/// differences of the interior representation. Each flux frame must be
/// conservative to `flux_tolerance` (relative); the residual defect is
/// projected out.
EvolutionRhs assemble_evolution_rhs(const SurfaceMesh& heart, const ConductivityModel& model,
                                    const CableParameters& cable, const SpaceTimeField& h,
                                    const SpaceTimeField& heart_flux, const Eigen::VectorXd& c,
                                    const std::vector<Vec3>& points, double flux_tolerance = 1e-2);

/// I_ion = aᵀ∇v + a0 v + b on grid nodes (columns are frames); NaN marks
/// missing samples. Gradients by central differences, one-sided where a
/// neighbour is missing, NaN where neither is available. Empty `b` means 0.
Eigen::MatrixXd ionic_current_linear(const RegularGrid& grid, const Eigen::MatrixXd& v, const Vec3& a, double a0,
                                     const Eigen::MatrixXd& b = {});

/// 𝓛u − F at the inside nodes of `layout` for every frame, 𝓛 applied by
/// finite differences. Rows follow the inside-node order; `frames` holds one
/// column of grid values per frame, `F` one column of inside values.
Eigen::MatrixXd evolution_residual(const HeatOperatorSpec& spec, const GridField& layout, const Eigen::MatrixXd& frames,
                                   const TimeGrid& grid, const Eigen::MatrixXd& F);

}  // namespace bidomain
