#pragma once

#include "bidomain/bem.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <vector>

namespace bidomain {

struct DirectSolveReport {
  std::optional<NodalField> solution_trace;
  std::optional<NodalField> flux_trace;
  double residual_norm = 0.0;         // relative residual of the boundary system
  double compatibility_defect = 0.0;  // Neumann only: ∮u1 dσ + ∫g dx
  double normalization_value = 0.0;   // Neumann only: ∮u dσ (lumped)
};

enum class BoundaryData { Dirichlet, Neumann };

/// One closed boundary component of a (possibly multiply connected) domain.
/// `outward` is true when the mesh normal points out of the domain (outer
/// boundary) and false for holes, such as the heart seen from the torso shell.
template <class Mesh>
struct BoundaryPart {
  const Mesh* mesh = nullptr;
  bool outward = true;
  BoundaryData known = BoundaryData::Dirichlet;
};

/// Dense direct boundary-integral system of a domain with several boundary
/// components. At every node x_i of every component,
///
///   ½u(x_i) - Σ_Γ s_Γ (S_Γ q_Γ - D_Γ u_Γ)(x_i) = 0,   s_Γ = ±1,
///
/// where u_Γ, q_Γ are the Dirichlet and conormal traces with respect to the
/// mesh normal of Γ. The columns are split into known and unknown traces
/// according to BoundaryPart::known, and the unknown block is LU-factorized
/// once.
template <class Mesh>
class MixedBoundarySolver {
 public:
  using Tensor = MeshTensor<Mesh>;
  using PointT = MeshPoint<Mesh>;

  MixedBoundarySolver(const Tensor& m, std::vector<BoundaryPart<Mesh>> parts, const AssemblyOptions& opt = {});

  struct Solution {
    std::vector<Eigen::VectorXd> dirichlet;  // per part
    std::vector<Eigen::VectorXd> flux;       // per part, w.r.t. the mesh normal
    double residual_norm = 0.0;
  };

  /// `known[k]` holds the prescribed trace of part k (Dirichlet or flux).
  Solution solve(const std::vector<Eigen::VectorXd>& known) const;

  /// Unknown traces for several stacked right-hand sides at once (rows
  /// ordered part by part, as node_offset()).
  Eigen::MatrixXd solve_unknowns(const Eigen::MatrixXd& rhs) const { return lu_.solve(rhs); }

  /// Interior values from the Green representation of the solved traces.
  Eigen::VectorXd evaluate(const Solution& sol, const std::vector<PointT>& targets) const;

  int part_count() const { return static_cast<int>(parts_.size()); }
  const BoundaryPart<Mesh>& part(int k) const { return parts_[k]; }
  int node_offset(int k) const { return offsets_[k]; }
  int total_nodes() const { return total_; }

  /// Full operator acting on the stacked traces [u_0, q_0, u_1, q_1, ...].
  const Eigen::MatrixXd& full_operator() const { return full_; }
  Eigen::Index u_column(int k) const { return 2 * static_cast<Eigen::Index>(offsets_[k]); }
  Eigen::Index q_column(int k) const { return 2 * static_cast<Eigen::Index>(offsets_[k]) + parts_[k].mesh->vertex_count(); }

 private:
  Tensor m_;
  AssemblyOptions opt_;
  std::vector<BoundaryPart<Mesh>> parts_;
  std::vector<int> offsets_;
  int total_ = 0;
  Eigen::MatrixXd full_;
  std::vector<Eigen::Index> unknown_cols_, known_cols_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

// ---------------------------------------------------------------------------

struct DirichletResult {
  Eigen::VectorXd values;  // at the targets
  DirectSolveReport report;
};

/// Interior Dirichlet problem Δ_M u = 0 in the region bounded by `mesh`.
DirichletResult solve_dirichlet(const Mat3& m, const SurfaceMesh& mesh, const NodalField& u0,
                                const std::vector<Vec3>& targets);

struct ShellDirichletResult {
  Eigen::VectorXd values;
  NodalField heart_flux;
  NodalField torso_flux;
  double residual_norm = 0.0;
};

/// Dirichlet problem in the shell between heart and torso.
ShellDirichletResult solve_dirichlet_shell(const Mat3& m, const DomainConfig& domain, const NodalField& u_heart,
                                           const NodalField& u_torso, const std::vector<Vec3>& targets);

// ---------------------------------------------------------------------------

struct NeumannOptions {
  /// Relative compatibility tolerance: the defect must not exceed
  /// tolerance × (max|u1|·area + max|g|·volume).
  double tolerance = 1e-6;
  /// Remove the incompatible mean from u1 instead of failing.
  bool project_incompatible = false;
};

/// Normalized interior Neumann problem Δ_M u = g in D, ∂_{ν,M}u = u1 on ∂D,
/// ∮u dσ = 0 (lumped). The bordered system
///
///   [½I + D   1] [u]   [S u1 + T g]
///   [  wᵀ     0] [μ] = [    0     ]
///
/// is factorized once per (M, mesh); w are the lumped node weights.
template <class Mesh>
class NeumannSolver {
 public:
  using Tensor = MeshTensor<Mesh>;

  NeumannSolver(const Tensor& m, const Mesh& mesh, const AssemblyOptions& opt = {});

  /// `source_trace` is T g at the mesh vertices and `source_integral` is ∫g dx
  /// (both zero when there is no volume source).
  DirectSolveReport solve(const NodalField& flux, const NeumannOptions& options = {},
                          const Eigen::VectorXd* source_trace = nullptr, double source_integral = 0.0,
                          double source_scale = 0.0) const;

  const Mesh& mesh() const { return *mesh_; }
  const LayerPair& layers() const { return layers_; }

 private:
  Tensor m_;
  const Mesh* mesh_;
  LayerPair layers_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

struct NeumannResult {
  Eigen::VectorXd values;  // at the targets
  DirectSolveReport report;
};

/// The discrete Neumann-to-Dirichlet transform 𝒩(g, u1) with optional
/// interior evaluation.
NeumannResult solve_neumann_normalized(const Mat3& m, const SurfaceMesh& mesh, const NodalField& u1,
                                       const std::optional<VolumeSource>& g, const std::vector<Vec3>& targets,
                                       const NeumannOptions& options = {});

// ---------------------------------------------------------------------------

/// Mixed problem in the shell: Dirichlet data on the heart, zero flux on the
/// torso. Factorized once; solve() is cheap and may be called per frame.
template <class Mesh>
class ZarembaSolver {
 public:
  ZarembaSolver(const MeshTensor<Mesh>& m_b, const Mesh& heart, const Mesh& torso, const AssemblyOptions& opt = {});

  struct Result {
    NodalField heart_flux;   // ν·M_b∇u_b on the heart, ν the heart's outward normal
    NodalField torso_trace;  // u_b on the torso
    DirectSolveReport report;
    double conservation_residual = 0.0;  // |∮ flux| / ∮|flux|
  };

  Result solve(const NodalField& u_heart) const;

  const MixedBoundarySolver<Mesh>& system() const { return system_; }

 private:
  const Mesh* heart_;
  const Mesh* torso_;
  MixedBoundarySolver<Mesh> system_;
};

ZarembaSolver<SurfaceMesh>::Result solve_zaremba(const Mat3& m_b, const SurfaceMesh& heart, const SurfaceMesh& torso,
                                                 const NodalField& u_heart);
ZarembaSolver<CurveMesh>::Result solve_zaremba(const Mat2& m_b, const CurveMesh& heart, const CurveMesh& torso,
                                               const NodalField& u_heart);

/// Lumped surface mean ∮f dσ / ∮dσ.
template <class Mesh>
double surface_mean(const Mesh& mesh, const Eigen::VectorXd& f) {
  return mesh.node_weights().dot(f) / mesh.node_weights().sum();
}

}  // namespace bidomain
