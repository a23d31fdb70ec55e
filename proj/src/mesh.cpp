#include "bidomain/mesh.hpp"

#include "bidomain/errors.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

namespace bidomain {

namespace {

struct EdgeKey {
  int a, b;
  bool operator==(const EdgeKey& o) const { return a == o.a && b == o.b; }
};
struct EdgeHash {
  std::size_t operator()(const EdgeKey& e) const {
    return std::hash<long long>()((static_cast<long long>(e.a) << 32) ^ static_cast<unsigned>(e.b));
  }
};

double bbox_diagonal(const std::vector<Vec3>& v) {
  if (v.empty()) return 0.0;
  Vec3 lo = v.front(), hi = v.front();
  for (const auto& p : v) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

// Watertightness and consistent winding via directed-edge counts: every
// directed edge must appear once and its reverse exactly once.
void check_closed_and_consistent(int nv, const std::vector<Triangle>& tris) {
  std::unordered_map<EdgeKey, int, EdgeHash> directed;
  directed.reserve(tris.size() * 3);
  std::vector<char> used(nv, 0);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& tri = tris[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv)
        fail(ErrorKind::Geometry, "triangle " + std::to_string(t) + " references vertex out of range");
      used[tri[k]] = 1;
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      fail(ErrorKind::Geometry, "triangle " + std::to_string(t) + " repeats a vertex");
    for (int k = 0; k < 3; ++k) ++directed[{tri[k], tri[(k + 1) % 3]}];
  }
  for (int i = 0; i < nv; ++i)
    if (!used[i]) fail(ErrorKind::Geometry, "vertex " + std::to_string(i) + " is not referenced");
  for (const auto& [edge, count] : directed) {
    auto rev = directed.find({edge.b, edge.a});
    const int reverse = rev == directed.end() ? 0 : rev->second;
    if (count + reverse != 2) {
      if (count + reverse < 2)
        fail(ErrorKind::Geometry, "surface is not closed: edge (" + std::to_string(edge.a) + "," +
                                      std::to_string(edge.b) + ") has a single triangle");
      fail(ErrorKind::Geometry, "non-manifold edge (" + std::to_string(edge.a) + "," +
                                    std::to_string(edge.b) + ")");
    }
    if (count != 1)
      fail(ErrorKind::Geometry,
           "inconsistent triangle winding at edge (" + std::to_string(edge.a) + "," +
               std::to_string(edge.b) + "); a global flip cannot repair it");
  }
}

bool ray_hits_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c,
                       bool& ambiguous) {
  constexpr double eps = 1e-12;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 p = d.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < eps * e1.norm() * e2.norm()) return false;
  const double inv = 1.0 / det;
  const Vec3 s = o - a;
  const double u = s.dot(p) * inv;
  if (u < -1e-10 || u > 1.0 + 1e-10) return false;
  const Vec3 q = s.cross(e1);
  const double v = d.dot(q) * inv;
  if (v < -1e-10 || u + v > 1.0 + 1e-10) return false;
  const double t = e2.dot(q) * inv;
  if (t <= 0.0) return false;
  if (u < 1e-9 || v < 1e-9 || u + v > 1.0 - 1e-9) ambiguous = true;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

SurfaceMesh::SurfaceMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
                         std::string surface_id, bool repair_orientation)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), surface_id_(std::move(surface_id)) {
  if (triangles_.size() < 4) fail(ErrorKind::Geometry, "closed surface needs at least 4 triangles");
  for (const auto& v : vertices_)
    if (!v.allFinite()) fail(ErrorKind::Geometry, "non-finite vertex coordinate");
  check_closed_and_consistent(static_cast<int>(vertices_.size()), triangles_);

  const double vol = signed_volume_raw(vertices_, triangles_);
  if (vol < 0.0) {
    if (!repair_orientation) fail(ErrorKind::Geometry, "surface is inward oriented");
    for (auto& t : triangles_) std::swap(t[1], t[2]);
  } else if (vol == 0.0) {
    fail(ErrorKind::Geometry, "surface encloses zero volume");
  }

  const double diag = bbox_diagonal(vertices_);
  normals_.resize(triangles_.size());
  areas_.resize(triangles_.size());
  node_weights_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vertices_.size()));
  total_area_ = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    const Vec3& a = vertices_[tri[0]];
    const Vec3& b = vertices_[tri[1]];
    const Vec3& c = vertices_[tri[2]];
    const Vec3 cr = (b - a).cross(c - a);
    const double twice = cr.norm();
    const double longest = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    if (!(twice > 0.0) || twice / longest <= 1e-9 * diag)
      fail(ErrorKind::Geometry, "degenerate triangle " + std::to_string(t));
    normals_[t] = cr / twice;
    areas_[t] = 0.5 * twice;
    total_area_ += areas_[t];
    for (int k = 0; k < 3; ++k) node_weights_[tri[k]] += areas_[t] / 3.0;
  }
}

double SurfaceMesh::bounding_diagonal() const { return bbox_diagonal(vertices_); }

std::vector<Vec3> SurfaceMesh::vertex_normals() const {
  std::vector<Vec3> n(vertices_.size(), Vec3::Zero());
  for (std::size_t t = 0; t < triangles_.size(); ++t)
    for (int k = 0; k < 3; ++k) n[triangles_[t][k]] += areas_[t] * normals_[t];
  for (auto& v : n) v.normalize();
  return n;
}

SurfaceMesh SurfaceMesh::flipped() const {
  SurfaceMesh out = *this;
  for (auto& t : out.triangles_) std::swap(t[1], t[2]);
  for (auto& n : out.normals_) n = -n;
  return out;
}

SurfaceMesh SurfaceMesh::with_id(std::string id) const {
  SurfaceMesh out = *this;
  out.surface_id_ = std::move(id);
  return out;
}

// ---------------------------------------------------------------------------

CurveMesh::CurveMesh(std::vector<Vec2> vertices, std::vector<Segment> segments, std::string surface_id,
                     bool repair_orientation)
    : vertices_(std::move(vertices)), segments_(std::move(segments)), surface_id_(std::move(surface_id)) {
  const int nv = static_cast<int>(vertices_.size());
  if (segments_.size() < 3) fail(ErrorKind::Geometry, "closed curve needs at least 3 segments");
  std::vector<int> out_deg(nv, 0), in_deg(nv, 0);
  for (const auto& s : segments_) {
    if (s[0] < 0 || s[0] >= nv || s[1] < 0 || s[1] >= nv || s[0] == s[1])
      fail(ErrorKind::Geometry, "invalid segment");
    ++out_deg[s[0]];
    ++in_deg[s[1]];
  }
  for (int i = 0; i < nv; ++i)
    if (out_deg[i] != 1 || in_deg[i] != 1)
      fail(ErrorKind::Geometry, "curve is not closed or inconsistently oriented at vertex " + std::to_string(i));

  double area2 = 0.0;
  for (const auto& s : segments_) {
    const Vec2& a = vertices_[s[0]];
    const Vec2& b = vertices_[s[1]];
    area2 += a.x() * b.y() - b.x() * a.y();
  }
  if (area2 < 0.0) {
    if (!repair_orientation) fail(ErrorKind::Geometry, "curve is clockwise");
    for (auto& s : segments_) std::swap(s[0], s[1]);
  }
  node_weights_ = Eigen::VectorXd::Zero(nv);
  for (const auto& s : segments_) {
    const Vec2 t = vertices_[s[1]] - vertices_[s[0]];
    const double len = t.norm();
    if (!(len > 0.0)) fail(ErrorKind::Geometry, "zero-length segment");
    lengths_.push_back(len);
    normals_.emplace_back(t.y() / len, -t.x() / len);
    total_length_ += len;
    node_weights_[s[0]] += 0.5 * len;
    node_weights_[s[1]] += 0.5 * len;
  }
}

// ---------------------------------------------------------------------------

double signed_volume_raw(const std::vector<Vec3>& v, const std::vector<Triangle>& tris) {
  double vol = 0.0;
  for (const auto& t : tris) vol += v[t[0]].dot(v[t[1]].cross(v[t[2]]));
  return vol / 6.0;
}

double signed_volume(const SurfaceMesh& mesh) { return signed_volume_raw(mesh.vertices(), mesh.triangles()); }

double signed_area(const CurveMesh& curve) {
  double a2 = 0.0;
  for (const auto& s : curve.segments()) {
    const Vec2& a = curve.vertices()[s[0]];
    const Vec2& b = curve.vertices()[s[1]];
    a2 += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * a2;
}

bool contains(const SurfaceMesh& mesh, const Vec3& x) {
  static const std::array<Vec3, 4> dirs = {Vec3(0.2718281828, 0.5772156649, 0.7711538462).normalized(),
                                           Vec3(-0.6180339887, 0.3183098862, 0.7182818284).normalized(),
                                           Vec3(0.4142135624, -0.7320508076, 0.5411961001).normalized(),
                                           Vec3(0.1, 0.2, -0.97467943448).normalized()};
  int crossings = 0;
  for (const auto& d : dirs) {
    bool ambiguous = false;
    crossings = 0;
    for (const auto& t : mesh.triangles())
      if (ray_hits_triangle(x, d, mesh.vertices()[t[0]], mesh.vertices()[t[1]], mesh.vertices()[t[2]], ambiguous))
        ++crossings;
    if (!ambiguous) break;
  }
  return crossings % 2 == 1;
}

bool contains(const CurveMesh& curve, const Vec2& x) {
  // Winding-number test; robust for the simple polygons used here.
  double winding = 0.0;
  for (const auto& s : curve.segments()) {
    const Vec2 a = curve.vertices()[s[0]] - x;
    const Vec2 b = curve.vertices()[s[1]] - x;
    winding += std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
  }
  return std::abs(winding) > M_PI;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + ab * (d1 / (d1 - d3)))).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + ac * (d2 / (d2 - d6)))).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))))).norm();
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

double distance_to_surface(const SurfaceMesh& mesh, const Vec3& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles())
    best = std::min(best, point_triangle_distance(x, mesh.vertices()[t[0]], mesh.vertices()[t[1]],
                                                  mesh.vertices()[t[2]]));
  return best;
}

double distance_to_curve(const CurveMesh& curve, const Vec2& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : curve.segments()) {
    const Vec2& a = curve.vertices()[s[0]];
    const Vec2& b = curve.vertices()[s[1]];
    const Vec2 ab = b - a;
    const double t = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (x - (a + t * ab)).norm());
  }
  return best;
}

void DomainConfig::validate() const {
  if (heart.vertex_count() == 0 || torso.vertex_count() == 0)
    fail(ErrorKind::Geometry, "domain requires both heart and torso surfaces");
  for (int i = 0; i < heart.vertex_count(); ++i) {
    const Vec3& p = heart.vertices()[i];
    if (!contains(torso, p))
      fail(ErrorKind::Geometry, "heart vertex " + std::to_string(i) + " is not inside the torso");
  }
  for (int i = 0; i < torso.vertex_count(); ++i)
    if (contains(heart, torso.vertices()[i]))
      fail(ErrorKind::Geometry, "torso vertex " + std::to_string(i) + " lies inside the heart");
  for (int i = 0; i < heart.vertex_count(); ++i)
    if (distance_to_surface(torso, heart.vertices()[i]) <= containment_tolerance)
      fail(ErrorKind::Geometry, "heart touches the torso surface");
}

const char* to_string(Location loc) {
  switch (loc) {
    case Location::InHeart: return "InHeart";
    case Location::InTorsoShell: return "InTorsoShell";
    case Location::Outside: return "Outside";
    case Location::OnBoundary: return "OnBoundary";
  }
  return "?";
}

Location point_location(const DomainConfig& config, const Vec3& x) {
  if (distance_to_surface(config.heart, x) < config.containment_tolerance ||
      distance_to_surface(config.torso, x) < config.containment_tolerance)
    return Location::OnBoundary;
  if (contains(config.heart, x)) return Location::InHeart;
  if (contains(config.torso, x)) return Location::InTorsoShell;
  return Location::Outside;
}

template <class Mesh>
void check_field_on(const NodalField& field, const Mesh& mesh) {
  if (field.size() != mesh.vertex_count())
    fail(ErrorKind::ShapeMismatch, "field on '" + field.surface_id + "' has " + std::to_string(field.size()) +
                                       " values, surface '" + mesh.surface_id() + "' has " +
                                       std::to_string(mesh.vertex_count()) + " vertices");
  if (!field.values.allFinite()) fail(ErrorKind::Validation, "field '" + field.surface_id + "' has non-finite values");
}
template void check_field_on<SurfaceMesh>(const NodalField&, const SurfaceMesh&);
template void check_field_on<CurveMesh>(const NodalField&, const CurveMesh&);

std::vector<Vec3> triangle_gradients(const SurfaceMesh& mesh, const Eigen::VectorXd& values) {
  std::vector<Vec3> g(mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const Vec3& n = mesh.normals()[t];
    const Vec3 p[3] = {mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]]};
    Vec3 grad = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      const Vec3 opposite = p[(k + 2) % 3] - p[(k + 1) % 3];
      grad += values[tri[k]] * n.cross(opposite);
    }
    g[t] = grad / (2.0 * mesh.areas()[t]);
  }
  return g;
}

std::vector<Vec3> vertex_surface_gradients(const SurfaceMesh& mesh, const Eigen::VectorXd& values) {
  const auto tg = triangle_gradients(mesh, values);
  const auto vn = mesh.vertex_normals();
  std::vector<Vec3> g(mesh.vertex_count(), Vec3::Zero());
  for (int t = 0; t < mesh.triangle_count(); ++t)
    for (int k = 0; k < 3; ++k) g[mesh.triangles()[t][k]] += mesh.areas()[t] * tg[t];
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    g[i] /= 3.0 * mesh.node_weights()[i];
    g[i] -= g[i].dot(vn[i]) * vn[i];
  }
  return g;
}

Eigen::MatrixXd edge_difference_operator(const SurfaceMesh& mesh) {
  std::map<std::pair<int, int>, double> edges;
  for (const auto& t : mesh.triangles())
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges[{a, b}] = (mesh.vertices()[a] - mesh.vertices()[b]).norm();
    }
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edges.size()), mesh.vertex_count());
  Eigen::Index row = 0;
  for (const auto& [e, len] : edges) {
    op(row, e.first) = -1.0 / len;
    op(row, e.second) = 1.0 / len;
    ++row;
  }
  return op;
}

// ---------------------------------------------------------------------------

SurfaceMesh make_icosphere(double radius, int level, const Vec3& center, std::string surface_id) {
  if (level < 0 || level > 7) fail(ErrorKind::Validation, "icosphere level must be in [0,7]");
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                         {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                         {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& p : v) p.normalize();
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      const int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& p : v) p = center + radius * p;
  return SurfaceMesh(std::move(v), std::move(f), std::move(surface_id));
}

SurfaceMesh make_icosahedron(double edge) {
  const SurfaceMesh unit = make_icosphere(1.0, 0);
  // Unit-circumradius icosahedron has edge 4/sqrt(10 + 2 sqrt 5).
  const double unit_edge = 4.0 / std::sqrt(10.0 + 2.0 * std::sqrt(5.0));
  std::vector<Vec3> v = unit.vertices();
  for (auto& p : v) p *= edge / unit_edge;
  return SurfaceMesh(std::move(v), unit.triangles(), "icosahedron");
}

SurfaceMesh make_unit_cube() {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  std::vector<Triangle> f = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                             {1, 2, 6}, {1, 6, 5}, {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
  return SurfaceMesh(std::move(v), std::move(f), "cube", false);
}

CurveMesh make_circle(double radius, int segments, const Vec2& center, std::string surface_id) {
  if (segments < 3) fail(ErrorKind::Validation, "circle needs at least 3 segments");
  std::vector<Vec2> v;
  std::vector<Segment> s;
  for (int i = 0; i < segments; ++i) {
    const double th = 2.0 * M_PI * i / segments;
    v.emplace_back(center.x() + radius * std::cos(th), center.y() + radius * std::sin(th));
    s.push_back({i, (i + 1) % segments});
  }
  return CurveMesh(std::move(v), std::move(s), std::move(surface_id));
}

// ---------------------------------------------------------------------------

MeshFormat mesh_format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return MeshFormat::OFF;
  if (ext == ".json") return MeshFormat::JSON;
  if (ext == ".vtk") return MeshFormat::VTK;
  fail(ErrorKind::Parse, "cannot infer mesh format from extension '" + ext + "'");
}

MeshFormat parse_mesh_format(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "off") return MeshFormat::OFF;
  if (s == "json") return MeshFormat::JSON;
  if (s == "vtk" || s == "vtk-legacy-ascii") return MeshFormat::VTK;
  fail(ErrorKind::Parse, "unknown mesh format '" + name + "'");
}

namespace {

// Whitespace tokenizer that drops '#' comments, as OFF allows them anywhere.
class Tokens {
 public:
  explicit Tokens(std::istream& in, bool strip_comments) {
    std::string line;
    while (std::getline(in, line)) {
      if (strip_comments) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
      }
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) toks_.push_back(tok);
    }
  }
  bool done() const { return pos_ >= toks_.size(); }
  const std::string& next() {
    if (done()) fail(ErrorKind::Parse, "unexpected end of file");
    return toks_[pos_++];
  }
  double number() {
    const std::string& t = next();
    try {
      std::size_t used = 0;
      double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, "expected a number, got '" + t + "'");
    }
  }
  long integer() {
    const double v = number();
    if (v != std::floor(v)) fail(ErrorKind::Parse, "expected an integer");
    return static_cast<long>(v);
  }

 private:
  std::vector<std::string> toks_;
  std::size_t pos_ = 0;
};

RawMesh parse_off(std::istream& in) {
  Tokens tk(in, true);
  std::string head = tk.next();
  RawMesh raw;
  long nv = 0, nf = 0;
  if (head == "OFF") {
    nv = tk.integer();
  } else if (head.rfind("OFF", 0) == 0 && head.size() > 3) {
    fail(ErrorKind::Parse, "unsupported OFF variant '" + head + "'");
  } else {
    fail(ErrorKind::Parse, "missing OFF header");
  }
  nf = tk.integer();
  tk.integer();
  if (nv < 0 || nf < 0) fail(ErrorKind::Parse, "negative counts");
  for (long i = 0; i < nv; ++i) {
    const double x = tk.number(), y = tk.number(), z = tk.number();
    raw.vertices.emplace_back(x, y, z);
  }
  for (long i = 0; i < nf; ++i) {
    const long k = tk.integer();
    if (k != 3) fail(ErrorKind::Parse, "only triangular faces are supported (face " + std::to_string(i) + ")");
    Triangle t{};
    for (int j = 0; j < 3; ++j) t[j] = static_cast<int>(tk.integer());
    raw.triangles.push_back(t);
  }
  return raw;
}

RawMesh parse_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorKind::Parse, std::string("invalid JSON: ") + e.what());
  }
  RawMesh raw;
  try {
    for (const auto& p : j.at("vertices")) {
      if (p.size() != 3) fail(ErrorKind::Parse, "vertex must have 3 coordinates");
      raw.vertices.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    }
    for (const auto& t : j.at("triangles")) {
      if (t.size() != 3) fail(ErrorKind::Parse, "triangle must have 3 indices");
      raw.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    }
    if (j.contains("surface_id")) raw.surface_id = j.at("surface_id").get<std::string>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::Parse, std::string("bad mesh JSON: ") + e.what());
  }
  return raw;
}

RawMesh parse_vtk(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# vtk DataFile", 0) != 0) fail(ErrorKind::Parse, "missing VTK header");
  std::getline(in, line);  // title
  if (!std::getline(in, line)) fail(ErrorKind::Parse, "truncated VTK file");
  if (line.find("ASCII") == std::string::npos) fail(ErrorKind::Parse, "only ASCII legacy VTK is supported");
  Tokens tk(in, false);
  if (tk.next() != "DATASET" || tk.next() != "POLYDATA") fail(ErrorKind::Parse, "only DATASET POLYDATA is supported");
  RawMesh raw;
  bool have_points = false, have_polys = false;
  while (!tk.done()) {
    const std::string key = tk.next();
    if (key == "POINTS") {
      const long n = tk.integer();
      tk.next();  // data type
      for (long i = 0; i < n; ++i) {
        const double x = tk.number(), y = tk.number(), z = tk.number();
        raw.vertices.emplace_back(x, y, z);
      }
      have_points = true;
    } else if (key == "POLYGONS") {
      const long n = tk.integer();
      tk.integer();
      for (long i = 0; i < n; ++i) {
        if (tk.integer() != 3) fail(ErrorKind::Parse, "only triangular polygons are supported");
        Triangle t{};
        for (int j = 0; j < 3; ++j) t[j] = static_cast<int>(tk.integer());
        raw.triangles.push_back(t);
      }
      have_polys = true;
    } else if (key == "POINT_DATA" || key == "CELL_DATA") {
      break;  // attribute sections are not part of the geometry
    } else if (key == "LINES" || key == "VERTICES" || key == "TRIANGLE_STRIPS") {
      fail(ErrorKind::Parse, "unsupported POLYDATA section " + key);
    } else {
      fail(ErrorKind::Parse, "unexpected token '" + key + "'");
    }
  }
  if (!have_points || !have_polys) fail(ErrorKind::Parse, "VTK file lacks POINTS or POLYGONS");
  return raw;
}

}  // namespace

RawMesh parse_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Parse, "cannot open '" + path.string() + "'");
  switch (format) {
    case MeshFormat::OFF: return parse_off(in);
    case MeshFormat::JSON: return parse_json(in);
    case MeshFormat::VTK: return parse_vtk(in);
  }
  fail(ErrorKind::Parse, "unknown format");
}

SurfaceMesh load_mesh(const std::filesystem::path& path, MeshFormat format, const std::string& surface_id) {
  RawMesh raw = parse_mesh(path, format);
  std::string id = !surface_id.empty() ? surface_id : (!raw.surface_id.empty() ? raw.surface_id : path.stem().string());
  return SurfaceMesh(std::move(raw.vertices), std::move(raw.triangles), std::move(id));
}

void save_mesh_json(const SurfaceMesh& mesh, const std::filesystem::path& path) {
  nlohmann::json j;
  j["surface_id"] = mesh.surface_id();
  auto& verts = j["vertices"] = nlohmann::json::array();
  for (const auto& v : mesh.vertices()) verts.push_back({v.x(), v.y(), v.z()});
  auto& tris = j["triangles"] = nlohmann::json::array();
  for (const auto& t : mesh.triangles()) tris.push_back({t[0], t[1], t[2]});
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Validation, "cannot write '" + path.string() + "'");
  out << j.dump() << '\n';
}

void save_mesh_off(const SurfaceMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Validation, "cannot write '" + path.string() + "'");
  out.precision(17);
  out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.triangle_count() << " 0\n";
  for (const auto& v : mesh.vertices()) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace bidomain
