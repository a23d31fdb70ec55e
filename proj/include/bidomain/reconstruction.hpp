#pragma once

#include "bidomain/cauchy.hpp"
#include "bidomain/direct_solvers.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

namespace bidomain {

/// c = -c0 ∮u_b dσ / ∮dσ with lumped quadrature.
template <class Mesh>
double calibration_constant(const NodalField& u_b_trace, double c0, const Mesh& mesh) {
  check_field_on(u_b_trace, mesh);
  if (c0 == 0.0) return 0.0;
  return -c0 * surface_mean(mesh, u_b_trace.values);
}

/// λ with M_e = λ M_i: model.lambda when set, otherwise detected from the
/// tensors. Throws Validation when the tensors are not proportional.
double proportionality_factor(const ConductivityModel& model);

struct ReconstructionDiagnostics {
  double zaremba_residual = 0.0;
  double conservation_residual = 0.0;  // |∮flux| / ∮|flux|
  double compatibility_defect = 0.0;   // removed from the flux before the Neumann solve
  double neumann_residual = 0.0;
  double normalization_value = 0.0;
  double calibration_residual = 0.0;  // |∮(u_i + c0 u_e) dσ|
  std::optional<double> alpha;        // second protocol only
  std::optional<double> cauchy_residual;
  bool lcurve_fallback = false;
};

struct ReconstructionOutput {
  NodalField u_e;
  NodalField u_i;
  NodalField v;  // u_i - u_e
  NodalField heart_flux;
  double c = 0.0;
  double c0 = 1.0;
  double lambda = 0.0;
  ReconstructionDiagnostics diagnostics;
};

/// Proportional case M_e = λ M_i. With u_e the heart trace and q = ν·M_b∇u_b
/// the heart flux,
///
///   u_i = -λ(u_e - ⟨u_e⟩) + 𝒩ᵢ(0, q) + c,   c = -c0 ⟨u_e⟩,
///
/// which is -𝒩ᵢ(Δ_e u_e, 0) + c written through boundary data only. The
/// Neumann operator of M_i on the heart is factorized once.
template <class Mesh>
class ProportionalReconstructor {
 public:
  ProportionalReconstructor(const MeshTensor<Mesh>& m_i, double lambda, const Mesh& heart,
                            double flux_tolerance = 1e-2, const AssemblyOptions& opt = {});

  /// Throws IncompatibleData when |∮q| exceeds flux_tolerance × ∮|q|.
  ReconstructionOutput reconstruct(const NodalField& u_e, const NodalField& heart_flux, double c0) const;

  const Mesh& heart() const { return *heart_; }
  double lambda() const { return lambda_; }

 private:
  const Mesh* heart_;
  double lambda_;
  double flux_tolerance_;
  NeumannSolver<Mesh> neumann_;
};

ReconstructionOutput reconstruct_ui_proportional(const SurfaceMesh& heart, const NodalField& u_e,
                                                 const NodalField& heart_flux, const ConductivityModel& model,
                                                 double c0);

// ---------------------------------------------------------------------------
// Interior samples and the general (non-proportional) route

/// Samples on the nodes of a regular grid; NaN marks unknown values. `inside`
/// flags nodes inside the heart.
struct GridField {
  RegularGrid grid;
  std::vector<char> inside;
  Eigen::VectorXd values;

  int inside_count() const;
};

/// Samples `f` at every node inside `mesh` and at nodes up to `halo` cells
/// outside it (for the difference stencils); other nodes are NaN.
GridField sample_grid_field(const SurfaceMesh& mesh, double h, const std::function<double(const Vec3&)>& f,
                            int halo = 2);

/// Δ_M u = -Σ M_jk ∂_j∂_k u at the inside nodes (in grid order of the inside
/// nodes) by central differences; pure second derivatives fall back to
/// one-sided three-point stencils where a neighbour is missing. Throws
/// MissingInteriorData when no stencil is available.
Eigen::VectorXd grid_operator_apply(const Mat3& m, const GridField& u);

/// Midpoint rule on the inside nodes of the field's grid.
VolumeQuadrature inside_quadrature(const GridField& u);

struct GeneralReconstruction {
  NodalField u_i;
  double c = 0.0;
  double compatibility_defect = 0.0;  // ∫Δ_e u_e before removal
  DirectSolveReport neumann;
};

/// u_i = -𝒩ᵢ(Δ_e u_e, 0) + c with Δ_e u_e from the grid samples and
/// c = -c0 ⟨u_e⟩. The compatibility defect ∫Δ_e u_e is a quadrature error
/// here; its mean is subtracted from the source before the Neumann solve.
/// Star-shaped hearts use a cone rule with the source interpolated from the
/// grid, others the midpoint rule on the inside nodes.
GeneralReconstruction reconstruct_ui_general(const SurfaceMesh& heart, const NodalField& u_e_trace,
                                             const GridField& u_e_interior, const Mat3& m_i, const Mat3& m_e,
                                             double c0, double compatibility_tolerance = 5e-2);

// ---------------------------------------------------------------------------
// Evaluation protocols

/// First protocol: heart flux from the Zaremba problem in the shell, u_i by
/// the proportional formula, v = u_i - u_e.
ReconstructionOutput run_protocol_1(const DomainConfig& domain, const ConductivityModel& model,
                                    const NodalField& u_e_measured, double c0);
ReconstructionOutput run_protocol_1(const CurveMesh& heart, const CurveMesh& torso, double m_i, double m_e,
                                    double m_b, const NodalField& u_e_measured, double c0);

/// Second protocol: heart traces from the regularized Cauchy problem, then
/// the proportional formula with the recovered flux.
ReconstructionOutput run_protocol_2(const DomainConfig& domain, const ConductivityModel& model, const NodalField& f,
                                    const TikhonovConfig& tikhonov, double c0);

/// Second protocol over frames (columns of `frames`), sharing all
/// factorizations; α per frame or global as configured.
std::vector<ReconstructionOutput> run_protocol_2_frames(const DomainConfig& domain, const ConductivityModel& model,
                                                        const Eigen::MatrixXd& frames, const TikhonovConfig& tikhonov,
                                                        double c0);

// ---------------------------------------------------------------------------
// Null space

/// u(x) = amplitude · max(0, 1 - |x - center|²/radius²)³.
struct CubicBump {
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  double amplitude = 1.0;

  double value(const Vec3& x) const;
  Vec3 gradient(const Vec3& x) const;
  /// Δ_M u = -tr(M ∇²u), exact.
  double apply(const Mat3& m, const Vec3& x) const;
};

struct NullSpaceElement {
  CubicBump bump;
  bool proportional = true;
  double lambda = 0.0;
  GridField u;           // interior samples of u_e = u
  NodalField u_e;        // heart traces
  NodalField u_i;
  NodalField torso;      // u_b on the torso (identically zero)
  double c = 0.0;
  double trace_max = 0.0;     // max |u|, |∇u| over the heart nodes
  double interior_max = 0.0;  // max |u| over the grid
  /// Torso potential generated by the triple, T_{M_e}(Δ_e u) at the torso
  /// nodes; zero for an exact null-space element.
  Eigen::VectorXd predicted_torso;
  std::optional<DirectSolveReport> neumann;  // general route only
};

/// Throws SupportTouchesBoundary unless the closed support ball lies strictly
/// inside the heart.
NullSpaceElement generate_nullspace_element(const DomainConfig& domain, const ConductivityModel& model,
                                            const CubicBump& bump, bool proportional, double grid_spacing);

}  // namespace bidomain
