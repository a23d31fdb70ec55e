#pragma once

#include "bidomain/kernels.hpp"
#include "bidomain/mesh.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bidomain {

enum class LayerKind { SingleLayer, DoubleLayer };
const char* to_string(LayerKind kind);

/// Dense collocation operator mapping piecewise-linear nodal densities on
/// `source_surface` to potential values at the targets.
///
///   SingleLayer: (S σ)(x) = ∫ φ_M(x,y) σ(y) dσ_y
///   DoubleLayer: (D σ)(x) = ∫ ∂_{ν,M;y} φ_M(x,y) σ(y) dσ_y
///
/// For collocation on the source surface itself, D is the principal value
/// operator with its diagonal fixed so that D·1 = -1/2.
struct LayerOperators {
  LayerKind kind = LayerKind::SingleLayer;
  std::string source_surface;
  std::string target;  // surface id, or "points"
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd tensor;
};

struct AssemblyOptions {
  /// Triangles closer than near_factor × diameter to a target are split
  /// recursively before quadrature.
  double near_factor = 3.0;
  int max_depth = 9;
  /// Gauss–Legendre order per direction of the Duffy-transformed self terms.
  int singular_order = 8;
};

/// Single- and double-layer matrices assembled in one pass over the geometry.
struct LayerPair {
  Eigen::MatrixXd single;
  Eigen::MatrixXd dbl;
};

template <class Mesh>
using MeshPoint = typename Mesh::Point;
template <class Mesh>
using MeshTensor = Tensor<Mesh::dim>;

/// Collocation at the vertices of `mesh` itself (singular quadrature path).
template <class Mesh>
LayerPair assemble_self(const MeshTensor<Mesh>& m, const Mesh& mesh, const AssemblyOptions& opt = {});

/// Collocation at arbitrary off-surface points (near-singular subdivision).
template <class Mesh>
LayerPair assemble_at_points(const MeshTensor<Mesh>& m, const Mesh& source, const std::vector<MeshPoint<Mesh>>& targets,
                             const AssemblyOptions& opt = {});

LayerOperators assemble_layer(LayerKind kind, const Mat3& m, const SurfaceMesh& source, const SurfaceMesh& target,
                              const AssemblyOptions& opt = {});
LayerOperators assemble_layer(LayerKind kind, const Mat3& m, const SurfaceMesh& source,
                              const std::vector<Vec3>& targets, const AssemblyOptions& opt = {});
LayerOperators assemble_layer(LayerKind kind, const Mat2& m, const CurveMesh& source, const CurveMesh& target,
                              const AssemblyOptions& opt = {});
LayerOperators assemble_layer(LayerKind kind, const Mat2& m, const CurveMesh& source,
                              const std::vector<Vec2>& targets, const AssemblyOptions& opt = {});

/// Binary cache format: 8-byte magic "BDLAYER1", little-endian uint64 header
/// length, JSON header {rows, cols, kind, source, target, tensor}, then
/// rows×cols row-major float64.
void save_layer_operators(const LayerOperators& op, const std::filesystem::path& path);
LayerOperators load_layer_operators(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Volume potentials

/// Point/weight volume rule for ∫_D f dy. `cell_diameter` is the diameter of
/// one grid cell for midpoint rules (0 for other rules).
struct VolumeQuadrature {
  std::vector<Vec3> points;
  std::vector<double> weights;
  double cell_diameter = 0.0;

  int size() const { return static_cast<int>(points.size()); }
  double volume() const;
};

struct RegularGrid {
  Vec3 origin = Vec3::Zero();  // first node
  double spacing = 1.0;
  std::array<int, 3> dims{0, 0, 0};

  int node_count() const { return dims[0] * dims[1] * dims[2]; }
  int index(int i, int j, int k) const { return (k * dims[1] + j) * dims[0] + i; }
  Vec3 node(int i, int j, int k) const { return origin + spacing * Vec3(i, j, k); }
  Vec3 node(int flat) const;

  /// Nodes spaced `h` covering the bounding box of `mesh` plus `margin` cells.
  static RegularGrid covering(const SurfaceMesh& mesh, double h, int margin = 1);
};

/// Inside/outside flag per grid node, by column-wise ray crossing.
std::vector<char> inside_mask(const SurfaceMesh& mesh, const RegularGrid& grid);

/// Midpoint rule on the nodes of a regular grid (each node the centre of a
/// cell of side h) restricted to the inside of `mesh`.
VolumeQuadrature grid_quadrature(const SurfaceMesh& mesh, double h);

/// Conforming rule for a domain star-shaped with respect to `center`: each
/// boundary triangle spans a cone integrated with Gauss–Legendre in the
/// radial variable and a triangle rule on the base. Throws Geometry if some
/// cone is inverted (domain not star-shaped from `center`).
VolumeQuadrature star_quadrature(const SurfaceMesh& mesh, const Vec3& center, int radial_order = 8);

struct VolumePotentialResult {
  Eigen::VectorXd values;
  /// Upper bound on the magnitude of the skipped near-target contribution.
  Eigen::VectorXd skipped_bound;
};

/// Midpoint evaluation of T_{D,M} g(x) = ∫_D φ_M(x,y) g(y) dy. Samples within
/// one cell diameter of a target are skipped and bounded.
VolumePotentialResult volume_potential(const Mat3& m, const VolumeQuadrature& quadrature, const Eigen::VectorXd& g,
                                       const std::vector<Vec3>& targets);

struct VolumeSource {
  VolumeQuadrature quadrature;
  Eigen::VectorXd values;  // g at the quadrature points
};

/// Green representation u(x) = S(∂_{ν,M}u)(x) - D(u)(x) + T(Δ_M u)(x),
/// equal to u(x) inside the mesh and 0 outside. Throws PointOnBoundary.
double green_representation(const Mat3& m, const SurfaceMesh& mesh, const NodalField& dirichlet,
                            const NodalField& conormal, const std::optional<VolumeSource>& g_volume, const Vec3& x);

}  // namespace bidomain
