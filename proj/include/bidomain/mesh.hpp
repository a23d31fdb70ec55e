#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace bidomain {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Triangle = std::array<int, 3>;
using Segment = std::array<int, 2>;

inline constexpr const char* kHeartId = "heart";
inline constexpr const char* kTorsoId = "torso";

/// Closed, outward-oriented, flat-triangle surface. Normals and areas are
/// always recomputed from the vertex coordinates; the constructor rejects
/// anything that is not a watertight, consistently wound, non-degenerate
/// triangulation.
class SurfaceMesh {
 public:
  static constexpr int dim = 3;
  using Point = Vec3;
  using Element = Triangle;

  SurfaceMesh() = default;

  /// When `repair_orientation` is set, a mesh whose windings are consistent
  /// but globally inward is flipped instead of rejected.
  SurfaceMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles, std::string surface_id,
              bool repair_orientation = true);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Triangle>& elements() const { return triangles_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  const std::vector<double>& areas() const { return areas_; }
  const std::string& surface_id() const { return surface_id_; }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  int element_count() const { return triangle_count(); }

  double total_area() const { return total_area_; }
  double bounding_diagonal() const;

  /// Lumped (area/3 per incident triangle) vertex weights; the discrete dσ.
  const Eigen::VectorXd& node_weights() const { return node_weights_; }

  /// Area-weighted unit vertex normals.
  std::vector<Vec3> vertex_normals() const;

  /// Same vertices with every triangle's winding reversed. Bypasses the
  /// orientation repair so the result genuinely has negative volume.
  SurfaceMesh flipped() const;

  SurfaceMesh with_id(std::string id) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Vec3> normals_;
  std::vector<double> areas_;
  Eigen::VectorXd node_weights_;
  double total_area_ = 0.0;
  std::string surface_id_;
};

/// Closed counter-clockwise polygon in the plane; the 2D analogue of
/// SurfaceMesh used by the annulus oracle problems.
class CurveMesh {
 public:
  static constexpr int dim = 2;
  using Point = Vec2;
  using Element = Segment;

  CurveMesh() = default;
  CurveMesh(std::vector<Vec2> vertices, std::vector<Segment> segments, std::string surface_id,
            bool repair_orientation = true);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<Segment>& elements() const { return segments_; }
  const std::vector<Vec2>& normals() const { return normals_; }
  const std::vector<double>& lengths() const { return lengths_; }
  const std::string& surface_id() const { return surface_id_; }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int element_count() const { return static_cast<int>(segments_.size()); }
  double total_length() const { return total_length_; }
  const Eigen::VectorXd& node_weights() const { return node_weights_; }

 private:
  std::vector<Vec2> vertices_;
  std::vector<Segment> segments_;
  std::vector<Vec2> normals_;
  std::vector<double> lengths_;
  Eigen::VectorXd node_weights_;
  double total_length_ = 0.0;
  std::string surface_id_;
};

double signed_volume(const SurfaceMesh& mesh);
double signed_volume_raw(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles);
double signed_area(const CurveMesh& curve);

/// Ray-parity containment; points on the surface give an unspecified answer,
/// use distance_to_surface first when that matters.
bool contains(const SurfaceMesh& mesh, const Vec3& x);
bool contains(const CurveMesh& curve, const Vec2& x);
double distance_to_surface(const SurfaceMesh& mesh, const Vec3& x);
double distance_to_curve(const CurveMesh& curve, const Vec2& x);
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Nested heart-in-torso geometry: Ω_m bounded by `heart`, Ω_b the shell
/// between `heart` and `torso`.
struct DomainConfig {
  SurfaceMesh heart;
  SurfaceMesh torso;
  double containment_tolerance = 1e-6;

  /// Throws GeometryError unless the heart lies strictly inside the torso
  /// and no torso vertex is inside the heart.
  void validate() const;
};

enum class Location { InHeart, InTorsoShell, Outside, OnBoundary };
const char* to_string(Location loc);

Location point_location(const DomainConfig& config, const Vec3& x);

struct NodalField {
  std::string surface_id;
  Eigen::VectorXd values;
  std::string units = "mV";

  int size() const { return static_cast<int>(values.size()); }
};

/// Throws ShapeMismatch / Validation if the field does not live on `mesh`.
template <class Mesh>
void check_field_on(const NodalField& field, const Mesh& mesh);

/// Per-triangle gradient of the piecewise-linear interpolant.
std::vector<Vec3> triangle_gradients(const SurfaceMesh& mesh, const Eigen::VectorXd& values);

/// Area-weighted average of triangle gradients at each vertex, i.e. the
/// tangential (surface) gradient of the nodal field.
std::vector<Vec3> vertex_surface_gradients(const SurfaceMesh& mesh, const Eigen::VectorXd& values);

/// Graph-gradient operator (one row per undirected edge, entries ±1/length).
Eigen::MatrixXd edge_difference_operator(const SurfaceMesh& mesh);

// --- primitives used by the oracle problems and tests -----------------------

/// Geodesic sphere: icosahedron refined `level` times, 20·4^level faces,
/// vertices projected onto the sphere.
SurfaceMesh make_icosphere(double radius, int level, const Vec3& center = Vec3::Zero(),
                           std::string surface_id = kHeartId);
SurfaceMesh make_icosahedron(double edge);
SurfaceMesh make_unit_cube();
CurveMesh make_circle(double radius, int segments, const Vec2& center = Vec2::Zero(),
                      std::string surface_id = kHeartId);

// --- file formats ----------------------------------------------------------

enum class MeshFormat { OFF, JSON, VTK };
MeshFormat mesh_format_from_path(const std::filesystem::path& path);
MeshFormat parse_mesh_format(const std::string& name);

/// Raw parse without geometric validation (triangles only).
struct RawMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string surface_id;
};
RawMesh parse_mesh(const std::filesystem::path& path, MeshFormat format);

SurfaceMesh load_mesh(const std::filesystem::path& path, MeshFormat format,
                      const std::string& surface_id = "");
void save_mesh_json(const SurfaceMesh& mesh, const std::filesystem::path& path);
void save_mesh_off(const SurfaceMesh& mesh, const std::filesystem::path& path);

}  // namespace bidomain
