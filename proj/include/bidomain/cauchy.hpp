#pragma once

#include "bidomain/direct_solvers.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bidomain {

enum class AlphaSelection { LCurveMaxCurvature, FixedAlpha, DiscrepancyPrinciple };
enum class PenaltyKind { Identity, SurfaceGradient };

const char* to_string(AlphaSelection s);
const char* to_string(PenaltyKind p);
AlphaSelection parse_alpha_selection(const std::string& s);
PenaltyKind parse_penalty(const std::string& s);

/// The regularization weight multiplies σ_max(A)², so grid values are
/// dimensionless and comparable across meshes. With `spectrum_range` the grid
/// bounds are taken from the operator instead: [max((σ_min/σ_max)², (16ε)²), 1].
struct TikhonovConfig {
  int alpha_count = 30;
  double alpha_min = 1e-10;
  double alpha_max = 1e-1;
  bool spectrum_range = true;
  AlphaSelection selection = AlphaSelection::LCurveMaxCurvature;
  PenaltyKind penalty = PenaltyKind::SurfaceGradient;
  double fixed_alpha = 1e-4;  // FixedAlpha: snapped to the nearest grid value
  double noise_level = 0.0;   // DiscrepancyPrinciple: relative to max|f|
  /// Pick one α for all frames from the summed L-curve instead of per frame.
  bool global_alpha = false;

  void validate() const;
  /// Log-spaced between alpha_min and alpha_max, strictly increasing.
  std::vector<double> alpha_grid() const;
  std::vector<double> alpha_grid(double lo, double hi) const;
};

struct LCurvePoint {
  double log_residual = 0.0;
  double log_solution = 0.0;
};

/// Index of the maximum signed three-point (circumscribed circle) curvature
/// of a log-log L-curve ordered by increasing α. Left turns, the corner of a
/// curve running down its vertical leg and out along the horizontal one, count
/// as positive. Ties go to the larger index. Throws Validation for fewer than 8
/// or non-finite points and DegenerateLCurve when no curvature is positive.
int lcurve_corner(const std::vector<LCurvePoint>& points);

struct CauchySolveReport {
  double chosen_alpha = 0.0;
  int chosen_index = 0;
  std::vector<double> alphas;
  std::vector<double> residual_norms;  // ‖A x_α − b‖ per α
  std::vector<double> solution_norms;  // ‖L x_α‖ per α
  std::vector<LCurvePoint> lcurve_points;
  double residual_norm = 0.0;  // at the chosen α; the computable distance to solvability
  bool lcurve_fallback = false;  // DegenerateLCurve fallback was used
  NodalField heart_dirichlet;
  NodalField heart_flux;  // ν·M_b∇u_b, ν the heart's outward normal
};

/// Writes `alpha,residual_norm,solution_norm`.
void write_lcurve_csv(const CauchySolveReport& report, const std::filesystem::path& path);

/// Regularized lateral Cauchy problem in the shell between heart and torso:
/// from torso Dirichlet data f and torso flux g, recover the heart traces.
///
/// The unknown is the heart Dirichlet trace u_h. The forward map of the mixed
/// problem (Dirichlet u_h on the heart, flux g on the torso) gives the torso
/// trace A u_h + B g and the heart flux Q u_h + Q_g g. The solver minimizes
///
///   ‖A u_h − (f − B g)‖² + α σ_max(A)² ‖L u_h‖²
///
/// over the α grid with one SVD of A L⁻¹, L = I or L = [G; √ε I] with G the
/// edge-difference operator on the heart.
template <class Mesh>
class CauchySolver {
 public:
  CauchySolver(const MeshTensor<Mesh>& m_b, const Mesh& heart, const Mesh& torso, const TikhonovConfig& config,
               const AssemblyOptions& opt = {});

  CauchySolveReport solve(const NodalField& f, const std::optional<NodalField>& torso_flux = std::nullopt) const;
  /// Per-frame solves (columns of `frames` are torso data at successive
  /// times, zero torso flux). With config.global_alpha the α is chosen once
  /// from the frame-summed residual and solution norms.
  std::vector<CauchySolveReport> solve_frames(const Eigen::MatrixXd& frames) const;

  /// Heart Dirichlet traces for every grid α, one column per α.
  Eigen::MatrixXd sweep(const NodalField& f) const;

  const Eigen::MatrixXd& transfer() const { return transfer_; }
  const Eigen::MatrixXd& flux_map() const { return flux_map_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const Eigen::VectorXd& singular_values() const { return sigma_; }
  const TikhonovConfig& config() const { return config_; }

  /// Forward prediction: torso trace and heart flux from a heart trace with
  /// zero torso flux.
  Eigen::VectorXd predict_torso(const Eigen::VectorXd& u_heart) const { return transfer_ * u_heart; }
  Eigen::VectorXd predict_flux(const Eigen::VectorXd& u_heart) const { return flux_map_ * u_heart; }

 private:
  struct Sweep {
    std::vector<double> residual, seminorm;
    Eigen::VectorXd beta;        // Uᵀb
    double outside_sq = 0.0;     // ‖b − UUᵀb‖²
  };
  Sweep sweep_norms(const Eigen::VectorXd& b) const;
  Eigen::VectorXd solution(const Eigen::VectorXd& beta, double alpha) const;
  int select(const Sweep& s, const Eigen::VectorXd& b, double data_scale, bool* fallback) const;
  CauchySolveReport finish(const Sweep& s, int index, bool fallback, const Eigen::VectorXd& correction_flux) const;
  Eigen::VectorXd rhs(const NodalField& f, const std::optional<NodalField>& g, Eigen::VectorXd* heart_flux_g) const;

  const Mesh* heart_;
  const Mesh* torso_;
  TikhonovConfig config_;
  std::vector<double> alphas_;
  ZarembaSolver<Mesh> forward_;
  Eigen::MatrixXd transfer_;  // A
  Eigen::MatrixXd flux_map_;  // Q
  // SVD of A R⁻¹ (R = I for the identity penalty)
  Eigen::MatrixXd u_, v_;
  Eigen::VectorXd sigma_;
  std::optional<Eigen::MatrixXd> r_factor_;  // upper triangular R with RᵀR = LᵀL
};

/// One-shot convenience wrapper.
CauchySolveReport solve_cauchy_elliptic(const Mat3& m_b, const SurfaceMesh& heart, const SurfaceMesh& torso,
                                        const NodalField& f, const std::optional<NodalField>& torso_flux,
                                        const TikhonovConfig& config);

/// Graph-gradient operator on curves (one row per segment).
Eigen::MatrixXd edge_difference_operator(const CurveMesh& curve);

}  // namespace bidomain
