#include "bidomain/bem.hpp"

#include "bidomain/errors.hpp"
#include "bidomain/quadrature.hpp"
#include "bidomain/threads.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace bidomain {

const char* to_string(LayerKind kind) {
  return kind == LayerKind::SingleLayer ? "single_layer" : "double_layer";
}

namespace {

// --- 3D ----------------------------------------------------------------------

struct SubTriangle {
  Vec3 p[3];
  Mat3 bary;  // column k: barycentric coordinates of p[k] in the parent
};

// Accumulates ∫_T K(x,y) β_j(y) dσ_y for the three hat functions of the
// parent triangle, splitting into four while the target is close.
void integrate_regular(const EllipticKernel3& kernel, const Vec3& x, const SubTriangle& t, const Vec3& n,
                       int depth, const AssemblyOptions& opt, double s[3], double d[3]) {
  const double diam = std::max({(t.p[1] - t.p[0]).norm(), (t.p[2] - t.p[1]).norm(), (t.p[0] - t.p[2]).norm()});
  const Vec3 c = (t.p[0] + t.p[1] + t.p[2]) / 3.0;
  const double dist = (x - c).norm();
  const bool far = dist > opt.near_factor * diam;
  if (far || depth >= opt.max_depth) {
    const double area = 0.5 * (t.p[1] - t.p[0]).cross(t.p[2] - t.p[0]).norm();
    const auto& rule = far ? quad::triangle7() : quad::triangle16();
    for (const auto& q : rule) {
      const Vec3 y = q.l1 * t.p[0] + q.l2 * t.p[1] + q.l3 * t.p[2];
      const Vec3 beta = t.bary * Vec3(q.l1, q.l2, q.l3);
      const double w = q.w * area;
      const double ks = kernel.value(x, y) * w;
      const double kd = kernel.conormal(x, y, n) * w;
      for (int j = 0; j < 3; ++j) {
        s[j] += ks * beta[j];
        d[j] += kd * beta[j];
      }
    }
    return;
  }
  const Vec3 m01 = 0.5 * (t.p[0] + t.p[1]), m12 = 0.5 * (t.p[1] + t.p[2]), m20 = 0.5 * (t.p[2] + t.p[0]);
  const Vec3 b0 = t.bary.col(0), b1 = t.bary.col(1), b2 = t.bary.col(2);
  const Vec3 c01 = 0.5 * (b0 + b1), c12 = 0.5 * (b1 + b2), c20 = 0.5 * (b2 + b0);
  auto make = [](const Vec3& a, const Vec3& b, const Vec3& cc, const Vec3& ba, const Vec3& bb, const Vec3& bc) {
    SubTriangle st;
    st.p[0] = a;
    st.p[1] = b;
    st.p[2] = cc;
    st.bary.col(0) = ba;
    st.bary.col(1) = bb;
    st.bary.col(2) = bc;
    return st;
  };
  integrate_regular(kernel, x, make(t.p[0], m01, m20, b0, c01, c20), n, depth + 1, opt, s, d);
  integrate_regular(kernel, x, make(m01, t.p[1], m12, c01, b1, c12), n, depth + 1, opt, s, d);
  integrate_regular(kernel, x, make(m20, m12, t.p[2], c20, c12, b2), n, depth + 1, opt, s, d);
  integrate_regular(kernel, x, make(m12, m20, m01, c12, c20, c01), n, depth + 1, opt, s, d);
}

// Single layer over a triangle with the target at local vertex `apex`.
// Duffy map y = P0 + u(P1-P0) + uv(P2-P1), Jacobian 2A·u; the u-integral of
// the hat functions is done in closed form, leaving a smooth v-integral.
void integrate_singular(const EllipticKernel3& kernel, const Vec3 p[3], int apex, int order, double s[3]) {
  const int k0 = apex, k1 = (apex + 1) % 3, k2 = (apex + 2) % 3;
  const Vec3 e0 = p[k1] - p[k0], e1 = p[k2] - p[k1];
  const double two_area = e0.cross(e1).norm();
  const double pref = two_area / (4.0 * M_PI * kernel.sqrt_det());
  const auto& gl = quad::gauss_legendre(order);
  for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
    const double v = gl.nodes[q], w = gl.weights[q];
    const Vec3 e = e0 + v * e1;
    const double inv_rho = 1.0 / std::sqrt(kernel.rho_squared(e));
    const double f = pref * w * inv_rho * 0.5;
    s[k0] += f;
    s[k1] += f * (1.0 - v);
    s[k2] += f * v;
  }
}

void assemble_row_3d(const EllipticKernel3& kernel, const SurfaceMesh& mesh, const Vec3& x, int self_index,
                     const AssemblyOptions& opt, double* srow, double* drow, int stride) {
  const auto& verts = mesh.vertices();
  const auto& tris = mesh.triangles();
  const auto& normals = mesh.normals();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& tri = tris[t];
    double s[3] = {0, 0, 0}, d[3] = {0, 0, 0};
    int apex = -1;
    for (int k = 0; k < 3; ++k)
      if (tri[k] == self_index) apex = k;
    const Vec3 p[3] = {verts[tri[0]], verts[tri[1]], verts[tri[2]]};
    if (apex >= 0) {
      // Flat triangle: n·(x-y) = 0, so only the single layer contributes.
      integrate_singular(kernel, p, apex, std::max(opt.singular_order, 2) * 2, s);
    } else {
      SubTriangle st;
      for (int k = 0; k < 3; ++k) st.p[k] = p[k];
      st.bary = Mat3::Identity();
      integrate_regular(kernel, x, st, normals[t], 0, opt, s, d);
    }
    for (int k = 0; k < 3; ++k) {
      srow[static_cast<std::ptrdiff_t>(tri[k]) * stride] += s[k];
      drow[static_cast<std::ptrdiff_t>(tri[k]) * stride] += d[k];
    }
  }
}

// --- 2D ----------------------------------------------------------------------

void integrate_regular_2d(const EllipticKernel2& kernel, const Vec2& x, const Vec2& a, const Vec2& b, double ba,
                          double bb, const Vec2& n, int depth, const AssemblyOptions& opt, double s[2], double d[2]) {
  const double len = (b - a).norm();
  const double dist = (x - 0.5 * (a + b)).norm();
  const bool far = dist > opt.near_factor * len;
  if (far || depth >= opt.max_depth) {
    const auto& gl = quad::gauss_legendre(far ? 8 : 16);
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double tq = gl.nodes[q];
      const Vec2 y = (1.0 - tq) * a + tq * b;
      const double beta1 = (1.0 - tq) * ba + tq * bb;  // hat of the second parent node
      const double w = gl.weights[q] * len;
      const double ks = kernel.value(x, y) * w;
      const double kd = kernel.conormal(x, y, n) * w;
      s[0] += ks * (1.0 - beta1);
      s[1] += ks * beta1;
      d[0] += kd * (1.0 - beta1);
      d[1] += kd * beta1;
    }
    return;
  }
  const Vec2 m = 0.5 * (a + b);
  const double bm = 0.5 * (ba + bb);
  integrate_regular_2d(kernel, x, a, m, ba, bm, n, depth + 1, opt, s, d);
  integrate_regular_2d(kernel, x, m, b, bm, bb, n, depth + 1, opt, s, d);
}

// ∫_0^L φ(s)(1 - s/L) ds and ∫_0^L φ(s) s/L ds with ρ = c·s.
void integrate_singular_2d(const EllipticKernel2& kernel, const Vec2& a, const Vec2& b, bool target_at_a,
                           double s[2]) {
  const double len = (b - a).norm();
  const Vec2 t = (b - a) / len;
  const double logc = 0.5 * std::log(kernel.rho_squared(t));
  const double lnl = std::log(len);
  const double near = 0.5 * len * lnl - 0.75 * len + logc * 0.5 * len;
  const double far = 0.5 * len * lnl - 0.25 * len + logc * 0.5 * len;
  const double pref = -1.0 / (2.0 * M_PI * kernel.sqrt_det());
  if (target_at_a) {
    s[0] += pref * near;
    s[1] += pref * far;
  } else {
    s[0] += pref * far;
    s[1] += pref * near;
  }
}

void assemble_row_2d(const EllipticKernel2& kernel, const CurveMesh& mesh, const Vec2& x, int self_index,
                     const AssemblyOptions& opt, double* srow, double* drow, int stride) {
  const auto& verts = mesh.vertices();
  const auto& segs = mesh.segments();
  const auto& normals = mesh.normals();
  for (std::size_t e = 0; e < segs.size(); ++e) {
    const auto& seg = segs[e];
    double s[2] = {0, 0}, d[2] = {0, 0};
    if (seg[0] == self_index || seg[1] == self_index) {
      integrate_singular_2d(kernel, verts[seg[0]], verts[seg[1]], seg[0] == self_index, s);
    } else {
      integrate_regular_2d(kernel, x, verts[seg[0]], verts[seg[1]], 0.0, 1.0, normals[e], 0, opt, s, d);
    }
    for (int k = 0; k < 2; ++k) {
      srow[static_cast<std::ptrdiff_t>(seg[k]) * stride] += s[k];
      drow[static_cast<std::ptrdiff_t>(seg[k]) * stride] += d[k];
    }
  }
}

template <class Mesh>
struct Assembler;

template <>
struct Assembler<SurfaceMesh> {
  using K = EllipticKernel3;
  static void row(const K& k, const SurfaceMesh& m, const Vec3& x, int self, const AssemblyOptions& opt, double* s,
                  double* d, int stride) {
    assemble_row_3d(k, m, x, self, opt, s, d, stride);
  }
};

template <>
struct Assembler<CurveMesh> {
  using K = EllipticKernel2;
  static void row(const K& k, const CurveMesh& m, const Vec2& x, int self, const AssemblyOptions& opt, double* s,
                  double* d, int stride) {
    assemble_row_2d(k, m, x, self, opt, s, d, stride);
  }
};

template <class Mesh>
bool same_surface(const Mesh& a, const Mesh& b) {
  if (&a == &b) return true;
  if (a.vertex_count() != b.vertex_count() || a.element_count() != b.element_count()) return false;
  for (int i = 0; i < a.vertex_count(); ++i)
    if (a.vertices()[i] != b.vertices()[i]) return false;
  return true;
}

}  // namespace

template <class Mesh>
LayerPair assemble_self(const MeshTensor<Mesh>& m, const Mesh& mesh, const AssemblyOptions& opt) {
  configure_threads();
  using A = Assembler<Mesh>;
  const typename A::K kernel(m);
  const int n = mesh.vertex_count();
  LayerPair out;
  out.single = Eigen::MatrixXd::Zero(n, n);
  out.dbl = Eigen::MatrixXd::Zero(n, n);
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n; ++i) {
    A::row(kernel, mesh, mesh.vertices()[i], i, opt, out.single.data() + i, out.dbl.data() + i, n);
  }
  // Principal-value diagonal from the constant-density identity D·1 = -1/2.
  for (int i = 0; i < n; ++i) {
    out.dbl(i, i) = 0.0;
    out.dbl(i, i) = -0.5 - out.dbl.row(i).sum();
  }
  return out;
}

template <class Mesh>
LayerPair assemble_at_points(const MeshTensor<Mesh>& m, const Mesh& source, const std::vector<MeshPoint<Mesh>>& targets,
                             const AssemblyOptions& opt) {
  configure_threads();
  using A = Assembler<Mesh>;
  const typename A::K kernel(m);
  const int rows = static_cast<int>(targets.size());
  const int n = source.vertex_count();
  LayerPair out;
  out.single = Eigen::MatrixXd::Zero(rows, n);
  out.dbl = Eigen::MatrixXd::Zero(rows, n);
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < rows; ++i) {
    A::row(kernel, source, targets[i], -1, opt, out.single.data() + i, out.dbl.data() + i, rows);
  }
  return out;
}

template LayerPair assemble_self<SurfaceMesh>(const Mat3&, const SurfaceMesh&, const AssemblyOptions&);
template LayerPair assemble_self<CurveMesh>(const Mat2&, const CurveMesh&, const AssemblyOptions&);
template LayerPair assemble_at_points<SurfaceMesh>(const Mat3&, const SurfaceMesh&, const std::vector<Vec3>&,
                                                   const AssemblyOptions&);
template LayerPair assemble_at_points<CurveMesh>(const Mat2&, const CurveMesh&, const std::vector<Vec2>&,
                                                 const AssemblyOptions&);

namespace {

template <class Mesh>
LayerOperators pick(LayerKind kind, const MeshTensor<Mesh>& m, const Mesh& source, std::string target,
                    LayerPair&& pair) {
  LayerOperators op;
  op.kind = kind;
  op.source_surface = source.surface_id();
  op.target = std::move(target);
  op.matrix = kind == LayerKind::SingleLayer ? std::move(pair.single) : std::move(pair.dbl);
  op.tensor = m;
  return op;
}

template <class Mesh>
LayerOperators layer_on_surface(LayerKind kind, const MeshTensor<Mesh>& m, const Mesh& source, const Mesh& target,
                                const AssemblyOptions& opt) {
  if (same_surface(source, target)) return pick(kind, m, source, target.surface_id(), assemble_self(m, source, opt));
  return pick(kind, m, source, target.surface_id(), assemble_at_points(m, source, target.vertices(), opt));
}

}  // namespace

LayerOperators assemble_layer(LayerKind kind, const Mat3& m, const SurfaceMesh& source, const SurfaceMesh& target,
                              const AssemblyOptions& opt) {
  return layer_on_surface(kind, m, source, target, opt);
}

LayerOperators assemble_layer(LayerKind kind, const Mat3& m, const SurfaceMesh& source,
                              const std::vector<Vec3>& targets, const AssemblyOptions& opt) {
  return pick(kind, m, source, "points", assemble_at_points(m, source, targets, opt));
}

LayerOperators assemble_layer(LayerKind kind, const Mat2& m, const CurveMesh& source, const CurveMesh& target,
                              const AssemblyOptions& opt) {
  return layer_on_surface(kind, m, source, target, opt);
}

LayerOperators assemble_layer(LayerKind kind, const Mat2& m, const CurveMesh& source,
                              const std::vector<Vec2>& targets, const AssemblyOptions& opt) {
  return pick(kind, m, source, "points", assemble_at_points(m, source, targets, opt));
}

// --- binary cache -------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'B', 'D', 'L', 'A', 'Y', 'E', 'R', '1'};
}

void save_layer_operators(const LayerOperators& op, const std::filesystem::path& path) {
  nlohmann::json header;
  header["rows"] = op.matrix.rows();
  header["cols"] = op.matrix.cols();
  header["kind"] = to_string(op.kind);
  header["source"] = op.source_surface;
  header["target"] = op.target;
  header["tensor_dim"] = op.tensor.rows();
  std::vector<double> tensor(op.tensor.data(), op.tensor.data() + op.tensor.size());
  header["tensor"] = tensor;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Parse, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = op.matrix;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) fail(ErrorKind::Parse, "short write to " + path.string());
}

LayerOperators load_layer_operators(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Parse, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) fail(ErrorKind::Parse, "not a layer operator file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 24)) fail(ErrorKind::Parse, "bad header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("layer header: ") + e.what());
  }
  LayerOperators op;
  const auto rows = header.at("rows").get<Eigen::Index>();
  const auto cols = header.at("cols").get<Eigen::Index>();
  op.kind = header.at("kind").get<std::string>() == "single_layer" ? LayerKind::SingleLayer : LayerKind::DoubleLayer;
  op.source_surface = header.at("source").get<std::string>();
  op.target = header.at("target").get<std::string>();
  const auto td = header.at("tensor_dim").get<Eigen::Index>();
  const auto tensor = header.at("tensor").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(tensor.size()) != td * td) fail(ErrorKind::Parse, "tensor size mismatch");
  op.tensor = Eigen::Map<const Eigen::MatrixXd>(tensor.data(), td, td);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!in) fail(ErrorKind::Parse, "truncated matrix data in " + path.string());
  op.matrix = rm;
  return op;
}

// --- volume potentials ----------------------------------------------------------

double VolumeQuadrature::volume() const {
  double v = 0.0;
  for (double w : weights) v += w;
  return v;
}

Vec3 RegularGrid::node(int flat) const {
  const int i = flat % dims[0];
  const int j = (flat / dims[0]) % dims[1];
  const int k = flat / (dims[0] * dims[1]);
  return node(i, j, k);
}

RegularGrid RegularGrid::covering(const SurfaceMesh& mesh, double h, int margin) {
  if (!(h > 0.0)) fail(ErrorKind::Validation, "grid spacing must be positive");
  Vec3 lo = mesh.vertices().front(), hi = lo;
  for (const auto& p : mesh.vertices()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  RegularGrid g;
  g.spacing = h;
  for (int a = 0; a < 3; ++a) {
    const int cells = static_cast<int>(std::ceil((hi[a] - lo[a]) / h));
    g.dims[a] = cells + 1 + 2 * margin;
    // Centre the grid on the bounding box.
    g.origin[a] = 0.5 * (lo[a] + hi[a]) - 0.5 * h * (g.dims[a] - 1);
  }
  if (static_cast<double>(g.dims[0]) * g.dims[1] * g.dims[2] > 2e8) fail(ErrorKind::Validation, "grid too large");
  return g;
}

std::vector<char> inside_mask(const SurfaceMesh& mesh, const RegularGrid& grid) {
  configure_threads();
  const auto& v = mesh.vertices();
  const auto& tris = mesh.triangles();
  std::vector<char> mask(grid.node_count(), 0);
  // Column rays are nudged off the lattice so they never graze an edge
  // or vertex of a mesh built on the same lattice.
  const double nudge_x = 1.3e-7 * grid.spacing, nudge_y = 0.7e-7 * grid.spacing;
#pragma omp parallel for schedule(dynamic, 1)
  for (int j = 0; j < grid.dims[1]; ++j) {
    std::vector<double> zs;
    for (int i = 0; i < grid.dims[0]; ++i) {
      const Vec3 base = grid.node(i, j, 0);
      const double px = base.x() + nudge_x, py = base.y() + nudge_y;
      zs.clear();
      for (const auto& t : tris) {
        const Vec3 &a = v[t[0]], &b = v[t[1]], &c = v[t[2]];
        if (px < std::min({a.x(), b.x(), c.x()}) || px > std::max({a.x(), b.x(), c.x()}) ||
            py < std::min({a.y(), b.y(), c.y()}) || py > std::max({a.y(), b.y(), c.y()}))
          continue;
        const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
        if (std::abs(det) < 1e-300) continue;
        const double l2 = ((px - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (py - a.y())) / det;
        const double l3 = ((b.x() - a.x()) * (py - a.y()) - (px - a.x()) * (b.y() - a.y())) / det;
        const double l1 = 1.0 - l2 - l3;
        if (l1 < 0.0 || l2 < 0.0 || l3 < 0.0) continue;
        zs.push_back(l1 * a.z() + l2 * b.z() + l3 * c.z());
      }
      std::sort(zs.begin(), zs.end());
      std::size_t crossed = 0;
      for (int k = 0; k < grid.dims[2]; ++k) {
        const double z = grid.node(i, j, k).z();
        while (crossed < zs.size() && zs[crossed] < z) ++crossed;
        mask[grid.index(i, j, k)] = (crossed % 2) == 1;
      }
    }
  }
  return mask;
}

VolumeQuadrature grid_quadrature(const SurfaceMesh& mesh, double h) {
  const RegularGrid grid = RegularGrid::covering(mesh, h);
  const auto mask = inside_mask(mesh, grid);
  VolumeQuadrature q;
  q.cell_diameter = h * std::sqrt(3.0);
  for (int n = 0; n < grid.node_count(); ++n) {
    if (!mask[n]) continue;
    q.points.push_back(grid.node(n));
    q.weights.push_back(h * h * h);
  }
  if (q.points.empty()) fail(ErrorKind::EmptySupport, "no grid node inside the surface; reduce the spacing");
  return q;
}

VolumeQuadrature star_quadrature(const SurfaceMesh& mesh, const Vec3& center, int radial_order) {
  const auto& v = mesh.vertices();
  const auto& gl = quad::gauss_legendre(radial_order);
  const auto& tri_rule = quad::triangle7();
  VolumeQuadrature q;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double height = mesh.normals()[t].dot(v[tri[0]] - center);
    if (!(height > 0.0)) fail(ErrorKind::Geometry, "domain is not star-shaped with respect to the given centre");
    const double base = mesh.areas()[t];
    for (const auto& tp : tri_rule) {
      const Vec3 p = tp.l1 * v[tri[0]] + tp.l2 * v[tri[1]] + tp.l3 * v[tri[2]];
      for (std::size_t r = 0; r < gl.nodes.size(); ++r) {
        const double rho = gl.nodes[r];
        q.points.push_back(center + rho * (p - center));
        q.weights.push_back(height * base * tp.w * gl.weights[r] * rho * rho);
      }
    }
  }
  return q;
}

VolumePotentialResult volume_potential(const Mat3& m, const VolumeQuadrature& quadrature, const Eigen::VectorXd& g,
                                       const std::vector<Vec3>& targets) {
  configure_threads();
  if (quadrature.size() == 0) fail(ErrorKind::EmptySupport, "volume quadrature has no points");
  if (g.size() != quadrature.size()) fail(ErrorKind::ShapeMismatch, "source values do not match the quadrature");
  const EllipticKernel3 kernel(m);
  Eigen::SelfAdjointEigenSolver<Mat3> es(m);
  const double bound_factor = std::sqrt(es.eigenvalues().maxCoeff()) / kernel.sqrt_det();
  const double skip = quadrature.cell_diameter > 0.0 ? quadrature.cell_diameter : 1e-12;
  VolumePotentialResult out;
  const int nt = static_cast<int>(targets.size());
  out.values = Eigen::VectorXd::Zero(nt);
  out.skipped_bound = Eigen::VectorXd::Zero(nt);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nt; ++i) {
    double acc = 0.0, bound = 0.0;
    for (int j = 0; j < quadrature.size(); ++j) {
      if (g[j] == 0.0) continue;
      const Vec3& y = quadrature.points[j];
      if ((targets[i] - y).norm() < skip) {
        // ∫ over a ball of the same volume centred on the target dominates
        // the cell integral of φ.
        const double radius = std::cbrt(3.0 * quadrature.weights[j] / (4.0 * M_PI));
        bound += std::abs(g[j]) * bound_factor * 0.5 * radius * radius;
        continue;
      }
      acc += kernel.value(targets[i], y) * g[j] * quadrature.weights[j];
    }
    out.values[i] = acc;
    out.skipped_bound[i] = bound;
  }
  return out;
}

double green_representation(const Mat3& m, const SurfaceMesh& mesh, const NodalField& dirichlet,
                            const NodalField& conormal, const std::optional<VolumeSource>& g_volume, const Vec3& x) {
  check_field_on(dirichlet, mesh);
  check_field_on(conormal, mesh);
  if (distance_to_surface(mesh, x) < 1e-9 * mesh.bounding_diagonal())
    fail(ErrorKind::PointOnBoundary, "evaluation point lies on the boundary");
  const LayerPair ops = assemble_at_points(m, mesh, std::vector<Vec3>{x});
  double u = ops.single.row(0).dot(conormal.values) - ops.dbl.row(0).dot(dirichlet.values);
  if (g_volume) u += volume_potential(m, g_volume->quadrature, g_volume->values, {x}).values[0];
  return u;
}

}  // namespace bidomain
