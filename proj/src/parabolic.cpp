#include "bidomain/parabolic.hpp"

#include "bidomain/errors.hpp"
#include "bidomain/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace bidomain {

void TimeGrid::validate() const {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) fail(ErrorKind::Validation, "time grid needs T > 0");
  if (steps < 2) fail(ErrorKind::Validation, "time grid needs at least two frames");
}

void SpaceTimeField::validate() const {
  grid.validate();
  if (values.cols() != grid.frames())
    fail(ErrorKind::ShapeMismatch, "space-time field has " + std::to_string(values.cols()) + " frames, grid has " +
                                       std::to_string(grid.frames()));
  if (!values.allFinite()) fail(ErrorKind::Validation, "space-time field is not finite");
}

void CableParameters::validate() const {
  if (!(chi > 0.0) || !(membrane_capacitance > 0.0))
    fail(ErrorKind::Validation, "chi and C_m must be positive");
  if (!a.allFinite() || !std::isfinite(a0)) fail(ErrorKind::Validation, "ionic coefficients must be finite");
}

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

// ∫_lo^hi s^p exp(-q/4s) ds with p = -(k+3)/2, k ∈ {2, 0, -2}, via
// u = √q / (2√s).
double moment(int k, double q, double lo, double hi) {
  if (hi <= lo) return 0.0;
  if (q <= 0.0) {
    if (k == -2) return 2.0 * (std::sqrt(hi) - std::sqrt(lo));
    fail(ErrorKind::SingularPoint, "time moment at coincident points");
  }
  auto antiderivative = [k](double u) {
    if (!std::isfinite(u)) return 0.0;
    const double e = std::exp(-u * u);
    switch (k) {
      case 2: return -0.25 * kSqrtPi * std::erfc(u) - 0.5 * u * e;
      case 0: return -0.5 * kSqrtPi * std::erfc(u);
      default: return -e / u + kSqrtPi * std::erfc(u);
    }
  };
  const double sq = std::sqrt(q);
  const double u_lo = lo > 0.0 ? sq / (2.0 * std::sqrt(lo)) : std::numeric_limits<double>::infinity();
  const double u_hi = sq / (2.0 * std::sqrt(hi));
  const double p = -(k + 3) / 2.0;
  return std::pow(q / 4.0, p) * (q / 2.0) * (antiderivative(u_lo) - antiderivative(u_hi));
}

// Adds coef·∫_0^t s^p e^{-q/4s} e^{-βs} d(t - s) ds as frame weights for a
// density d piecewise linear in time; e^{-βs} is interpolated with d.
void add_time_weights(const TimeGrid& grid, double t, int k, double q, double beta, double coef, double* w) {
  const double dt = grid.spacing();
  for (int j = 0; j + 1 < grid.frames(); ++j) {
    const double ta = grid.time(j), tb = grid.time(j + 1);
    if (ta >= t) break;
    const double lo = std::max(t - tb, 0.0), hi = t - ta;
    const double m0 = moment(k, q, lo, hi);
    const double m1 = moment(k - 2, q, lo, hi);
    const double wa = ((tb - t) * m0 + m1) / dt;
    const double wb = ((t - ta) * m0 - m1) / dt;
    w[j] += coef * wa * std::exp(-beta * (t - ta));
    w[j + 1] += coef * wb * std::exp(-beta * (t - tb));
  }
}

struct KernelParts {
  Mat3 k_inv;
  Vec3 a;
  double norm;  // 1 / ((4π)^{3/2} √det K)
  double beta;  // aᵀK⁻¹a/4 + a0

  explicit KernelParts(const HeatKernel& kernel) {
    k_inv = kernel.effective_inverse();
    a = kernel.spec().a;
    norm = 1.0 / (std::pow(4.0 * M_PI, 1.5) * kernel.sqrt_det());
    beta = a.dot(k_inv * a) / 4.0 + kernel.spec().a0;
  }
  double q(const Vec3& r) const { return r.dot(k_inv * r); }
  double drift(const Vec3& r) const { return std::exp(0.5 * r.dot(k_inv * a)); }
};

void check_time(const TimeGrid& grid, double t) {
  if (t > grid.t_end * (1.0 + 1e-12)) fail(ErrorKind::Validation, "evaluation time beyond the time grid");
}

}  // namespace

double poisson_integral(const HeatOperatorSpec& spec, const VolumeSource& h, const Vec3& x, double t) {
  if (h.values.size() != h.quadrature.size()) fail(ErrorKind::ShapeMismatch, "volume source size mismatch");
  if (t <= 0.0) return 0.0;
  const HeatKernel kernel(spec);
  double sum = 0.0;
  for (int j = 0; j < h.quadrature.size(); ++j)
    sum += h.quadrature.weights[j] * kernel.value(x, h.quadrature.points[j], t) * h.values[j];
  return sum;
}

VolumeQuadrature box_quadrature(const Vec3& lo, const Vec3& hi, double h) {
  if (!(h > 0.0) || !((hi - lo).array() > 0.0).all()) fail(ErrorKind::Validation, "bad box or spacing");
  int n[3];
  Vec3 step;
  for (int a = 0; a < 3; ++a) {
    n[a] = std::max(1, static_cast<int>(std::lround((hi[a] - lo[a]) / h)));
    step[a] = (hi[a] - lo[a]) / n[a];
  }
  VolumeQuadrature q;
  const double w = step.prod();
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        q.points.push_back(lo + step.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5)));
        q.weights.push_back(w);
      }
  q.cell_diameter = step.norm();
  return q;
}

double volume_parabolic_potential(const HeatOperatorSpec& spec, const SpaceTimeSource& g, const Vec3& x, double t) {
  g.grid.validate();
  if (g.values.rows() != g.quadrature.size() || g.values.cols() != g.grid.frames())
    fail(ErrorKind::ShapeMismatch, "space-time source does not match its quadrature and grid");
  if (t <= 0.0) return 0.0;
  check_time(g.grid, t);
  const HeatKernel kernel(spec);
  const KernelParts parts(kernel);
  Eigen::RowVectorXd w(g.grid.frames());
  double sum = 0.0;
  for (int j = 0; j < g.quadrature.size(); ++j) {
    const Vec3 r = x - g.quadrature.points[j];
    const double q = parts.q(r);
    if (q <= 0.0) continue;
    w.setZero();
    add_time_weights(g.grid, t, 0, q, parts.beta, parts.norm * parts.drift(r), w.data());
    sum += g.quadrature.weights[j] * w.dot(g.values.row(j));
  }
  return sum;
}

// ---------------------------------------------------------------------------

ParabolicLayers::ParabolicLayers(const HeatOperatorSpec& spec, const SurfaceMesh& surface, std::vector<char> mask,
                                 const AssemblyOptions& opt)
    : kernel_(spec), surface_(&surface), mask_(std::move(mask)), opt_(opt) {
  if (mask_.empty()) mask_.assign(surface.triangle_count(), 1);
  if (static_cast<int>(mask_.size()) != surface.triangle_count())
    fail(ErrorKind::ShapeMismatch, "triangle mask size does not match the surface");
  open_.assign(surface.vertex_count(), 0);
  std::map<std::pair<int, int>, int> edge_count;
  for (int f = 0; f < surface.triangle_count(); ++f) {
    if (!mask_[f]) continue;
    const Triangle& tri = surface.triangles()[f];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [edge, count] : edge_count)
    if (count == 1) open_[edge.first] = open_[edge.second] = 1;
}

namespace {

struct Piece {
  Vec3 p[3];
  Mat3 bary;  // column k: barycentric coordinates of p[k] in the parent
};

template <class Visit>
void visit_points(const Vec3& x, const Piece& t, int depth, const AssemblyOptions& opt, const Visit& visit) {
  const double diam = std::max({(t.p[1] - t.p[0]).norm(), (t.p[2] - t.p[1]).norm(), (t.p[0] - t.p[2]).norm()});
  const Vec3 c = (t.p[0] + t.p[1] + t.p[2]) / 3.0;
  const bool far = (x - c).norm() > opt.near_factor * diam;
  if (far || depth >= opt.max_depth) {
    const double area = 0.5 * (t.p[1] - t.p[0]).cross(t.p[2] - t.p[0]).norm();
    for (const auto& q : far ? quad::triangle7() : quad::triangle16()) {
      const Vec3 y = q.l1 * t.p[0] + q.l2 * t.p[1] + q.l3 * t.p[2];
      visit(y, Vec3(t.bary * Vec3(q.l1, q.l2, q.l3)), q.w * area);
    }
    return;
  }
  const Vec3 m01 = 0.5 * (t.p[0] + t.p[1]), m12 = 0.5 * (t.p[1] + t.p[2]), m20 = 0.5 * (t.p[2] + t.p[0]);
  const Vec3 b0 = t.bary.col(0), b1 = t.bary.col(1), b2 = t.bary.col(2);
  const Vec3 c01 = 0.5 * (b0 + b1), c12 = 0.5 * (b1 + b2), c20 = 0.5 * (b2 + b0);
  auto make = [](const Vec3& a, const Vec3& b, const Vec3& cc, const Vec3& ba, const Vec3& bb, const Vec3& bc) {
    Piece s;
    s.p[0] = a;
    s.p[1] = b;
    s.p[2] = cc;
    s.bary << ba, bb, bc;
    return s;
  };
  visit_points(x, make(t.p[0], m01, m20, b0, c01, c20), depth + 1, opt, visit);
  visit_points(x, make(m01, t.p[1], m12, c01, b1, c12), depth + 1, opt, visit);
  visit_points(x, make(m20, m12, t.p[2], c20, c12, b2), depth + 1, opt, visit);
  visit_points(x, make(m12, m20, m01, c12, c20, c01), depth + 1, opt, visit);
}

}  // namespace

Eigen::MatrixXd ParabolicLayers::weights(const TimeGrid& grid, const Vec3& x, double t, bool dbl) const {
  grid.validate();
  const SurfaceMesh& s = *surface_;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.vertex_count(), grid.frames());
  if (t <= 0.0) return out;
  check_time(grid, t);
  const double tol = 1e-9 * s.bounding_diagonal();
  for (int f = 0; f < s.triangle_count(); ++f) {
    if (!mask_[f]) continue;
    const Triangle& tri = s.triangles()[f];
    const auto& v = s.vertices();
    if (point_triangle_distance(x, v[tri[0]], v[tri[1]], v[tri[2]]) < tol)
      fail(ErrorKind::PointOnBoundary, "evaluation point lies on the surface");
  }

  const KernelParts parts(kernel_);
  Eigen::RowVectorXd w(grid.frames());
  for (int f = 0; f < s.triangle_count(); ++f) {
    if (!mask_[f]) continue;
    const Triangle& tri = s.triangles()[f];
    const Vec3& n = s.normals()[f];
    Piece root;
    for (int k = 0; k < 3; ++k) root.p[k] = s.vertices()[tri[k]];
    root.bary = Mat3::Identity();
    visit_points(x, root, 0, opt_, [&](const Vec3& y, const Vec3& beta, double area_weight) {
      const Vec3 r = x - y;
      const double q = parts.q(r);
      const double c = parts.norm * parts.drift(r);
      w.setZero();
      if (dbl) {
        // W carries a minus sign: -(n·r/2 s^{-5/2} + n·a/2 s^{-3/2}) Ψ-parts
        add_time_weights(grid, t, 2, q, parts.beta, -c * 0.5 * n.dot(r), w.data());
        add_time_weights(grid, t, 0, q, parts.beta, -c * 0.5 * n.dot(parts.a), w.data());
      } else {
        add_time_weights(grid, t, 0, q, parts.beta, c, w.data());
      }
      for (int k = 0; k < 3; ++k) out.row(tri[k]) += (area_weight * beta[k]) * w;
    });
  }
  for (int i = 0; i < s.vertex_count(); ++i)
    if (open_[i]) out.row(i).setZero();
  return out;
}

Eigen::MatrixXd ParabolicLayers::single_layer_weights(const TimeGrid& grid, const Vec3& x, double t) const {
  return weights(grid, x, t, false);
}

Eigen::MatrixXd ParabolicLayers::double_layer_weights(const TimeGrid& grid, const Vec3& x, double t) const {
  return weights(grid, x, t, true);
}

namespace {

void check_density(const SpaceTimeField& d, const SurfaceMesh& s) {
  d.validate();
  if (d.values.rows() != s.vertex_count())
    fail(ErrorKind::ShapeMismatch, "density rows do not match the surface vertices");
}

}  // namespace

double ParabolicLayers::single_layer(const SpaceTimeField& density, const Vec3& x, double t) const {
  check_density(density, *surface_);
  return weights(density.grid, x, t, false).cwiseProduct(density.values).sum();
}

double ParabolicLayers::double_layer(const SpaceTimeField& density, const Vec3& x, double t) const {
  check_density(density, *surface_);
  return weights(density.grid, x, t, true).cwiseProduct(density.values).sum();
}

double parabolic_green_reconstruct(const HeatOperatorSpec& spec, const SurfaceMesh& mesh,
                                   const SpaceTimeField& u_trace, const SpaceTimeField& flux_trace,
                                   const VolumeSource& u_initial, const std::optional<SpaceTimeSource>& lu,
                                   const Vec3& x, double t) {
  check_density(u_trace, mesh);
  check_density(flux_trace, mesh);
  if (u_trace.grid.steps != flux_trace.grid.steps || u_trace.grid.t_end != flux_trace.grid.t_end)
    fail(ErrorKind::ShapeMismatch, "trace and flux use different time grids");
  if (!(t > 0.0)) fail(ErrorKind::Validation, "evaluation time must be positive");
  const ParabolicLayers layers(spec, mesh);
  double u = layers.single_layer(flux_trace, x, t) + layers.double_layer(u_trace, x, t);
  u += poisson_integral(spec, u_initial, x, t);
  if (lu) u += volume_parabolic_potential(spec, *lu, x, t);
  return u;
}

// ---------------------------------------------------------------------------

HeatOperatorSpec evolution_operator(const ConductivityModel& model, const CableParameters& cable) {
  model.validate();
  cable.validate();
  const double lambda = proportionality_factor(model);
  HeatOperatorSpec spec;
  spec.M = model.M_e;
  spec.scale = 1.0 / (cable.chi * cable.membrane_capacitance * (lambda + 1.0));
  spec.a = cable.a / cable.membrane_capacitance;
  spec.a0 = cable.a0 / cable.membrane_capacitance;
  return spec;
}

namespace {

// d/dt along rows: central inside, three-point one-sided at the ends.
Eigen::MatrixXd time_derivative(const Eigen::MatrixXd& p, double dt) {
  const int n = static_cast<int>(p.cols());
  Eigen::MatrixXd d(p.rows(), n);
  if (n == 2) {
    d.col(0) = d.col(1) = (p.col(1) - p.col(0)) / dt;
    return d;
  }
  for (int k = 1; k + 1 < n; ++k) d.col(k) = (p.col(k + 1) - p.col(k - 1)) / (2.0 * dt);
  d.col(0) = (-3.0 * p.col(0) + 4.0 * p.col(1) - p.col(2)) / (2.0 * dt);
  d.col(n - 1) = (3.0 * p.col(n - 1) - 4.0 * p.col(n - 2) + p.col(n - 3)) / (2.0 * dt);
  return d;
}

}  // namespace

EvolutionRhs assemble_evolution_rhs(const SurfaceMesh& heart, const ConductivityModel& model,
                                    const CableParameters& cable, const SpaceTimeField& h,
                                    const SpaceTimeField& heart_flux, const Eigen::VectorXd& c,
                                    const std::vector<Vec3>& points, double flux_tolerance) {
  model.validate();
  cable.validate();
  h.validate();
  check_density(heart_flux, heart);
  const double lambda = proportionality_factor(model);
  const int frames = h.grid.frames();
  const int np = static_cast<int>(points.size());
  if (heart_flux.grid.steps != frames || heart_flux.grid.t_end != h.grid.t_end)
    fail(ErrorKind::ShapeMismatch, "h and the heart flux use different time grids");
  if (h.values.rows() != np) fail(ErrorKind::ShapeMismatch, "h rows do not match the evaluation points");
  if (c.size() != frames) fail(ErrorKind::ShapeMismatch, "c(t) needs one value per frame");
  for (const Vec3& p : points)
    if (!contains(heart, p)) fail(ErrorKind::OutOfGeometry, "evaluation point outside the heart");

  const bool drift = cable.a.squaredNorm() != 0.0;
  const double delta = 1e-4 * heart.bounding_diagonal();
  std::vector<Vec3> targets = points;
  if (drift)
    for (const Vec3& p : points)
      for (int a = 0; a < 3; ++a)
        for (int sgn : {1, -1}) targets.push_back(p + sgn * delta * Vec3::Unit(a));

  const NeumannSolver<SurfaceMesh> solver(model.M_i, heart);
  const LayerPair ops = assemble_at_points(model.M_i, heart, targets);
  const Eigen::VectorXd& w = heart.node_weights();
  NeumannOptions opt;
  opt.tolerance = std::numeric_limits<double>::infinity();
  opt.project_incompatible = true;

  EvolutionRhs out;
  out.coupling = 1.0 / (lambda + 1.0);
  out.neumann.resize(np, frames);
  Eigen::MatrixXd drift_term = Eigen::MatrixXd::Zero(np, frames);
  for (int k = 0; k < frames; ++k) {
    const Eigen::VectorXd q = heart_flux.values.col(k);
    const double total = w.dot(q.cwiseAbs());
    const double defect = total > 0.0 ? std::abs(w.dot(q)) / total : 0.0;
    out.compatibility_defects.push_back(defect);
    if (defect > flux_tolerance)
      fail(ErrorKind::IncompatibleData, "heart flux of frame " + std::to_string(k) + " is not conservative");
    const DirectSolveReport rep = solver.solve(NodalField{heart.surface_id(), q, "mV/cm"}, opt);
    const Eigen::VectorXd vals = ops.single * rep.flux_trace->values - ops.dbl * rep.solution_trace->values;
    out.neumann.col(k) = vals.head(np).array() + c[k];
    if (drift)
      for (int i = 0; i < np; ++i) {
        Vec3 grad;
        for (int a = 0; a < 3; ++a) {
          const int base = np + 6 * i + 2 * a;
          grad[a] = (vals[base] - vals[base + 1]) / (2.0 * delta);
        }
        drift_term(i, k) = cable.a.dot(grad);
      }
  }

  const Eigen::MatrixXd correction =
      time_derivative(out.neumann, h.grid.spacing()) +
      (drift_term + cable.a0 * out.neumann) / cable.membrane_capacitance;
  out.F = h;
  out.F.values += out.coupling * correction;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double sample(const RegularGrid& g, const Eigen::VectorXd& v, int i, int j, int k) {
  if (i < 0 || j < 0 || k < 0 || i >= g.dims[0] || j >= g.dims[1] || k >= g.dims[2])
    return std::numeric_limits<double>::quiet_NaN();
  return v[g.index(i, j, k)];
}

// Central difference gradient, one-sided where a neighbour is missing.
Vec3 grid_gradient(const RegularGrid& g, const Eigen::VectorXd& v, int i, int j, int k) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double u0 = sample(g, v, i, j, k);
  Vec3 grad;
  for (int a = 0; a < 3; ++a) {
    int up[3] = {i, j, k}, dn[3] = {i, j, k};
    ++up[a];
    --dn[a];
    const double pu = sample(g, v, up[0], up[1], up[2]);
    const double pd = sample(g, v, dn[0], dn[1], dn[2]);
    if (std::isfinite(pu) && std::isfinite(pd)) grad[a] = (pu - pd) / (2.0 * g.spacing);
    else if (std::isfinite(pu)) grad[a] = (pu - u0) / g.spacing;
    else if (std::isfinite(pd)) grad[a] = (u0 - pd) / g.spacing;
    else grad[a] = nan;
  }
  return grad;
}

}  // namespace

Eigen::MatrixXd ionic_current_linear(const RegularGrid& grid, const Eigen::MatrixXd& v, const Vec3& a, double a0,
                                     const Eigen::MatrixXd& b) {
  if (v.rows() != grid.node_count()) fail(ErrorKind::ShapeMismatch, "values do not match the grid");
  if (b.size() != 0 && (b.rows() != v.rows() || b.cols() != v.cols()))
    fail(ErrorKind::ShapeMismatch, "b does not match v");
  const bool drift = a.squaredNorm() != 0.0;
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (int f = 0; f < v.cols(); ++f) {
    const Eigen::VectorXd col = v.col(f);
    for (int k = 0; k < grid.dims[2]; ++k)
      for (int j = 0; j < grid.dims[1]; ++j)
        for (int i = 0; i < grid.dims[0]; ++i) {
          const int n = grid.index(i, j, k);
          double value = a0 * col[n];
          if (drift) value += a.dot(grid_gradient(grid, col, i, j, k));
          if (b.size() != 0) value += b(n, f);
          out(n, f) = value;
        }
  }
  return out;
}

Eigen::MatrixXd evolution_residual(const HeatOperatorSpec& spec, const GridField& layout, const Eigen::MatrixXd& frames,
                                   const TimeGrid& grid, const Eigen::MatrixXd& F) {
  spec.validate();
  grid.validate();
  const int inside = layout.inside_count();
  if (frames.rows() != layout.grid.node_count() || frames.cols() != grid.frames())
    fail(ErrorKind::ShapeMismatch, "frames do not match the grid layout");
  if (F.rows() != inside || F.cols() != grid.frames()) fail(ErrorKind::ShapeMismatch, "F does not match the layout");

  Eigen::MatrixXd values(inside, grid.frames());
  Eigen::MatrixXd spatial(inside, grid.frames());
  const auto& g = layout.grid;
  for (int f = 0; f < grid.frames(); ++f) {
    GridField field{g, layout.inside, frames.col(f)};
    const Eigen::VectorXd lap = grid_operator_apply(spec.M, field);
    int row = 0;
    for (int k = 0; k < g.dims[2]; ++k)
      for (int j = 0; j < g.dims[1]; ++j)
        for (int i = 0; i < g.dims[0]; ++i) {
          const int n = g.index(i, j, k);
          if (!layout.inside[n]) continue;
          double s = spec.scale * lap[row] + spec.a0 * field.values[n];
          if (spec.a.squaredNorm() != 0.0) s += spec.a.dot(grid_gradient(g, field.values, i, j, k));
          values(row, f) = field.values[n];
          spatial(row, f) = s;
          ++row;
        }
  }
  return time_derivative(values, grid.spacing()) + spatial - F;
}

}  // namespace bidomain
