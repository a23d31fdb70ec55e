#include "bidomain/reconstruction.hpp"

#include "bidomain/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bidomain {

double proportionality_factor(const ConductivityModel& model) {
  if (model.lambda) {
    if (!(*model.lambda > 0.0)) fail(ErrorKind::Validation, "lambda must be positive");
    return *model.lambda;
  }
  const double lambda = model.M_e.trace() / model.M_i.trace();
  if ((model.M_e - lambda * model.M_i).norm() > 1e-12 * model.M_e.norm())
    fail(ErrorKind::Validation, "M_e is not proportional to M_i");
  return lambda;
}

template <class Mesh>
ProportionalReconstructor<Mesh>::ProportionalReconstructor(const MeshTensor<Mesh>& m_i, double lambda,
                                                           const Mesh& heart, double flux_tolerance,
                                                           const AssemblyOptions& opt)
    : heart_(&heart), lambda_(lambda), flux_tolerance_(flux_tolerance), neumann_(m_i, heart, opt) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorKind::Validation, "lambda must be positive");
}

template <class Mesh>
ReconstructionOutput ProportionalReconstructor<Mesh>::reconstruct(const NodalField& u_e, const NodalField& heart_flux,
                                                                  double c0) const {
  check_field_on(u_e, *heart_);
  check_field_on(heart_flux, *heart_);
  if (!u_e.values.allFinite() || !heart_flux.values.allFinite()) fail(ErrorKind::Validation, "non-finite heart data");
  const Eigen::VectorXd& w = heart_->node_weights();

  ReconstructionOutput out;
  out.c0 = c0;
  out.lambda = lambda_;
  out.u_e = u_e;
  out.heart_flux = heart_flux;
  const double total = w.dot(heart_flux.values.cwiseAbs());
  out.diagnostics.compatibility_defect = w.dot(heart_flux.values);
  if (total > 0.0) out.diagnostics.conservation_residual = std::abs(out.diagnostics.compatibility_defect) / total;
  if (out.diagnostics.conservation_residual > flux_tolerance_)
    fail(ErrorKind::IncompatibleData, "heart flux is not conservative (relative defect " +
                                          std::to_string(out.diagnostics.conservation_residual) + ")");

  NeumannOptions opt;
  opt.tolerance = std::numeric_limits<double>::infinity();
  opt.project_incompatible = true;
  const DirectSolveReport rep = neumann_.solve(heart_flux, opt);
  out.diagnostics.neumann_residual = rep.residual_norm;
  out.diagnostics.normalization_value = rep.normalization_value;

  const double mean_e = surface_mean(*heart_, u_e.values);
  out.c = calibration_constant(u_e, c0, *heart_);
  Eigen::VectorXd ui = -lambda_ * (u_e.values.array() - mean_e).matrix() + rep.solution_trace->values;
  ui.array() += out.c;
  out.u_i = NodalField{heart_->surface_id(), ui, u_e.units};
  out.v = NodalField{heart_->surface_id(), ui - u_e.values, u_e.units};
  out.diagnostics.calibration_residual = std::abs(w.dot(ui + c0 * u_e.values));
  return out;
}

template class ProportionalReconstructor<SurfaceMesh>;
template class ProportionalReconstructor<CurveMesh>;

ReconstructionOutput reconstruct_ui_proportional(const SurfaceMesh& heart, const NodalField& u_e,
                                                 const NodalField& heart_flux, const ConductivityModel& model,
                                                 double c0) {
  model.validate();
  const ProportionalReconstructor<SurfaceMesh> rec(model.M_i, proportionality_factor(model), heart);
  return rec.reconstruct(u_e, heart_flux, c0);
}

// ---------------------------------------------------------------------------

int GridField::inside_count() const {
  int n = 0;
  for (char c : inside) n += c ? 1 : 0;
  return n;
}

GridField sample_grid_field(const SurfaceMesh& mesh, double h, const std::function<double(const Vec3&)>& f, int halo) {
  if (!(h > 0.0)) fail(ErrorKind::Validation, "grid spacing must be positive");
  GridField u;
  u.grid = RegularGrid::covering(mesh, h, halo + 1);
  u.inside = inside_mask(mesh, u.grid);
  const auto& d = u.grid.dims;
  std::vector<char> wanted = u.inside;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!u.inside[u.grid.index(i, j, k)]) continue;
        for (int c = std::max(0, k - halo); c <= std::min(d[2] - 1, k + halo); ++c)
          for (int b = std::max(0, j - halo); b <= std::min(d[1] - 1, j + halo); ++b)
            for (int a = std::max(0, i - halo); a <= std::min(d[0] - 1, i + halo); ++a) wanted[u.grid.index(a, b, c)] = 1;
      }
  u.values = Eigen::VectorXd::Constant(u.grid.node_count(), std::numeric_limits<double>::quiet_NaN());
  for (int n = 0; n < u.grid.node_count(); ++n)
    if (wanted[n]) u.values[n] = f(u.grid.node(n));
  if (u.inside_count() == 0) fail(ErrorKind::EmptySupport, "no grid node inside the mesh");
  return u;
}

namespace {

struct Stencil {
  const GridField& u;
  double at(int i, int j, int k) const {
    const auto& d = u.grid.dims;
    if (i < 0 || j < 0 || k < 0 || i >= d[0] || j >= d[1] || k >= d[2]) return std::numeric_limits<double>::quiet_NaN();
    return u.values[u.grid.index(i, j, k)];
  }
};

}  // namespace

namespace {

// Δ_M u at one node, or NaN with `why` set when no stencil is available.
double node_operator(const Mat3& m, const Stencil& s, int i, int j, int k, const char** why) {
  const double h2 = s.u.grid.spacing * s.u.grid.spacing;
  const int p[3] = {i, j, k};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double u0 = s.at(i, j, k);
  if (!std::isfinite(u0)) {
    *why = "missing sample at an inside node";
    return nan;
  }
  auto shifted = [&](int axis, int step, int axis2 = -1, int step2 = 0) {
    int q[3] = {p[0], p[1], p[2]};
    q[axis] += step;
    if (axis2 >= 0) q[axis2] += step2;
    return s.at(q[0], q[1], q[2]);
  };
  Mat3 hess;
  for (int a = 0; a < 3; ++a) {
    const double up = shifted(a, 1), dn = shifted(a, -1);
    if (std::isfinite(up) && std::isfinite(dn)) {
      hess(a, a) = (up - 2.0 * u0 + dn) / h2;
    } else if (std::isfinite(up) && std::isfinite(shifted(a, 2))) {
      hess(a, a) = (u0 - 2.0 * up + shifted(a, 2)) / h2;
    } else if (std::isfinite(dn) && std::isfinite(shifted(a, -2))) {
      hess(a, a) = (u0 - 2.0 * dn + shifted(a, -2)) / h2;
    } else {
      *why = "no difference stencil for a second derivative";
      return nan;
    }
  }
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      hess(a, b) = hess(b, a) = 0.0;
      if (m(a, b) == 0.0 && m(b, a) == 0.0) continue;
      const double pp = shifted(a, 1, b, 1), pm = shifted(a, 1, b, -1);
      const double mp = shifted(a, -1, b, 1), mm = shifted(a, -1, b, -1);
      if (!(std::isfinite(pp) && std::isfinite(pm) && std::isfinite(mp) && std::isfinite(mm))) {
        *why = "no difference stencil for a mixed derivative";
        return nan;
      }
      hess(a, b) = hess(b, a) = (pp - pm - mp + mm) / (4.0 * h2);
    }
  return -(m.cwiseProduct(hess)).sum();
}

void check_grid_field(const GridField& u) {
  if (u.values.size() != u.grid.node_count() || static_cast<int>(u.inside.size()) != u.grid.node_count())
    fail(ErrorKind::ShapeMismatch, "grid field does not match its grid");
}

// Δ_M u on every node where a stencil exists, NaN elsewhere.
Eigen::VectorXd operator_field(const Mat3& m, const GridField& u) {
  const Stencil s{u};
  const auto& d = u.grid.dims;
  Eigen::VectorXd out(u.grid.node_count());
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const char* why = nullptr;
        const double v = node_operator(m, s, i, j, k, &why);
        if (why && u.inside[u.grid.index(i, j, k)]) fail(ErrorKind::MissingInteriorData, why);
        out[u.grid.index(i, j, k)] = v;
      }
  return out;
}

// Trilinear interpolation over the finite corners of the enclosing cell.
double interpolate(const RegularGrid& grid, const Eigen::VectorXd& field, const Vec3& x) {
  const Vec3 r = (x - grid.origin) / grid.spacing;
  int c[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(static_cast<int>(std::floor(r[a])), 0, grid.dims[a] - 2);
    t[a] = std::clamp(r[a] - c[a], 0.0, 1.0);
  }
  double sum = 0.0, weight = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    int q[3];
    for (int a = 0; a < 3; ++a) {
      const int bit = (corner >> a) & 1;
      q[a] = c[a] + bit;
      w *= bit ? t[a] : 1.0 - t[a];
    }
    const double v = field[grid.index(q[0], q[1], q[2])];
    if (!std::isfinite(v) || w == 0.0) continue;
    sum += w * v;
    weight += w;
  }
  if (!(weight > 0.0)) fail(ErrorKind::MissingInteriorData, "no interior sample near a quadrature point");
  return sum / weight;
}

}  // namespace

Eigen::VectorXd grid_operator_apply(const Mat3& m, const GridField& u) {
  check_grid_field(u);
  const Eigen::VectorXd full = operator_field(m, u);
  Eigen::VectorXd out(u.inside_count());
  int row = 0;
  for (int n = 0; n < u.grid.node_count(); ++n)
    if (u.inside[n]) out[row++] = full[n];
  return out;
}

VolumeQuadrature inside_quadrature(const GridField& u) {
  VolumeQuadrature q;
  const double h = u.grid.spacing;
  q.cell_diameter = std::sqrt(3.0) * h;
  for (int n = 0; n < u.grid.node_count(); ++n)
    if (u.inside[n]) {
      q.points.push_back(u.grid.node(n));
      q.weights.push_back(h * h * h);
    }
  return q;
}

GeneralReconstruction reconstruct_ui_general(const SurfaceMesh& heart, const NodalField& u_e_trace,
                                             const GridField& u_e_interior, const Mat3& m_i, const Mat3& m_e,
                                             double c0, double compatibility_tolerance) {
  check_field_on(u_e_trace, heart);
  check_spd(m_i, "M_i");
  check_spd(m_e, "M_e");
  check_grid_field(u_e_interior);
  const Eigen::VectorXd field = operator_field(m_e, u_e_interior);

  // Conforming cone rule when the heart is star-shaped from its centroid,
  // the cell midpoint rule otherwise.
  VolumeQuadrature quad;
  Eigen::VectorXd g;
  try {
    Vec3 center = Vec3::Zero();
    for (const Vec3& x : heart.vertices()) center += x;
    quad = star_quadrature(heart, center / heart.vertex_count());
    g.resize(quad.size());
    for (int j = 0; j < quad.size(); ++j) g[j] = interpolate(u_e_interior.grid, field, quad.points[j]);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Geometry) throw;
    quad = inside_quadrature(u_e_interior);
    g = grid_operator_apply(m_e, u_e_interior);
  }
  double integral = 0.0;
  for (int j = 0; j < quad.size(); ++j) integral += quad.weights[j] * g[j];
  const double scale = g.cwiseAbs().maxCoeff() * quad.volume();
  if (std::abs(integral) > compatibility_tolerance * scale && scale > 0.0)
    fail(ErrorKind::IncompatibleData, "volume source of u_e does not integrate to zero (defect " +
                                          std::to_string(integral) + ")");
  // The defect is a quadrature error; take it out of the source so the
  // Neumann data stays exactly zero.
  g.array() -= integral / quad.volume();
  double remaining = 0.0;
  for (int j = 0; j < quad.size(); ++j) remaining += quad.weights[j] * g[j];

  const NeumannSolver<SurfaceMesh> solver(m_i, heart);
  const Eigen::VectorXd trace = volume_potential(m_i, quad, g, heart.vertices()).values;
  NeumannOptions opt;
  opt.tolerance = std::numeric_limits<double>::infinity();
  opt.project_incompatible = true;
  const NodalField zero{heart.surface_id(), Eigen::VectorXd::Zero(heart.vertex_count()), "mV/cm"};

  GeneralReconstruction out;
  out.compatibility_defect = integral;
  out.neumann = solver.solve(zero, opt, &trace, remaining, scale);
  out.c = calibration_constant(u_e_trace, c0, heart);
  Eigen::VectorXd ui = -out.neumann.solution_trace->values;
  ui.array() += out.c;
  out.u_i = NodalField{heart.surface_id(), ui, u_e_trace.units};
  return out;
}

// ---------------------------------------------------------------------------

ReconstructionOutput run_protocol_1(const DomainConfig& domain, const ConductivityModel& model,
                                    const NodalField& u_e_measured, double c0) {
  model.validate();
  check_field_on(u_e_measured, domain.heart);
  const double lambda = proportionality_factor(model);
  const ZarembaSolver<SurfaceMesh> zaremba(model.M_b, domain.heart, domain.torso);
  const auto z = zaremba.solve(u_e_measured);
  const ProportionalReconstructor<SurfaceMesh> rec(model.M_i, lambda, domain.heart);
  ReconstructionOutput out = rec.reconstruct(u_e_measured, z.heart_flux, c0);
  out.diagnostics.zaremba_residual = z.report.residual_norm;
  return out;
}

ReconstructionOutput run_protocol_1(const CurveMesh& heart, const CurveMesh& torso, double m_i, double m_e,
                                    double m_b, const NodalField& u_e_measured, double c0) {
  if (!(m_i > 0 && m_e > 0 && m_b > 0)) fail(ErrorKind::Validation, "conductivities must be positive");
  check_field_on(u_e_measured, heart);
  const ZarembaSolver<CurveMesh> zaremba(m_b * Mat2::Identity(), heart, torso);
  const auto z = zaremba.solve(u_e_measured);
  const ProportionalReconstructor<CurveMesh> rec(m_i * Mat2::Identity(), m_e / m_i, heart);
  ReconstructionOutput out = rec.reconstruct(u_e_measured, z.heart_flux, c0);
  out.diagnostics.zaremba_residual = z.report.residual_norm;
  return out;
}

std::vector<ReconstructionOutput> run_protocol_2_frames(const DomainConfig& domain, const ConductivityModel& model,
                                                        const Eigen::MatrixXd& frames, const TikhonovConfig& tikhonov,
                                                        double c0) {
  model.validate();
  tikhonov.validate();
  const double lambda = proportionality_factor(model);
  if (frames.rows() != domain.torso.vertex_count()) fail(ErrorKind::ShapeMismatch, "frame rows must match torso nodes");
  if (!frames.allFinite()) fail(ErrorKind::Validation, "torso data is not finite");
  const CauchySolver<SurfaceMesh> cauchy(model.M_b, domain.heart, domain.torso, tikhonov);
  const ProportionalReconstructor<SurfaceMesh> rec(model.M_i, lambda, domain.heart);
  const auto reports = cauchy.solve_frames(frames);
  std::vector<ReconstructionOutput> out;
  out.reserve(reports.size());
  for (const auto& r : reports) {
    out.push_back(rec.reconstruct(r.heart_dirichlet, r.heart_flux, c0));
    out.back().diagnostics.alpha = r.chosen_alpha;
    out.back().diagnostics.cauchy_residual = r.residual_norm;
    out.back().diagnostics.lcurve_fallback = r.lcurve_fallback;
  }
  return out;
}

ReconstructionOutput run_protocol_2(const DomainConfig& domain, const ConductivityModel& model, const NodalField& f,
                                    const TikhonovConfig& tikhonov, double c0) {
  check_field_on(f, domain.torso);
  return run_protocol_2_frames(domain, model, f.values, tikhonov, c0).front();
}

// ---------------------------------------------------------------------------

double CubicBump::value(const Vec3& x) const {
  const double s = (x - center).squaredNorm() / (radius * radius);
  return s >= 1.0 ? 0.0 : amplitude * (1.0 - s) * (1.0 - s) * (1.0 - s);
}

Vec3 CubicBump::gradient(const Vec3& x) const {
  const Vec3 d = x - center;
  const double s = d.squaredNorm() / (radius * radius);
  if (s >= 1.0) return Vec3::Zero();
  return -6.0 * amplitude * (1.0 - s) * (1.0 - s) / (radius * radius) * d;
}

double CubicBump::apply(const Mat3& m, const Vec3& x) const {
  const Vec3 d = x - center;
  const double r2 = radius * radius;
  const double s = d.squaredNorm() / r2;
  if (s >= 1.0) return 0.0;
  const Mat3 hess = -6.0 * amplitude * (1.0 - s) * (1.0 - s) / r2 * Mat3::Identity() +
                    24.0 * amplitude * (1.0 - s) / (r2 * r2) * (d * d.transpose());
  return -(m.cwiseProduct(hess)).sum();
}

NullSpaceElement generate_nullspace_element(const DomainConfig& domain, const ConductivityModel& model,
                                            const CubicBump& bump, bool proportional, double grid_spacing) {
  model.validate();
  if (!(bump.radius > 0.0) || !std::isfinite(bump.amplitude)) fail(ErrorKind::Validation, "invalid bump");
  if (!(grid_spacing > 0.0)) fail(ErrorKind::Validation, "grid spacing must be positive");
  const SurfaceMesh& heart = domain.heart;
  if (!contains(heart, bump.center) || distance_to_surface(heart, bump.center) <= bump.radius)
    fail(ErrorKind::SupportTouchesBoundary, "bump support is not strictly inside the heart");

  NullSpaceElement e;
  e.bump = bump;
  e.proportional = proportional;
  e.u = sample_grid_field(heart, grid_spacing, [&](const Vec3& x) { return bump.value(x); });
  for (int n = 0; n < e.u.values.size(); ++n)
    if (std::isfinite(e.u.values[n])) e.interior_max = std::max(e.interior_max, std::abs(e.u.values[n]));

  const int nh = heart.vertex_count();
  e.u_e = NodalField{heart.surface_id(), Eigen::VectorXd(nh), "mV"};
  for (int i = 0; i < nh; ++i) {
    const Vec3& p = heart.vertices()[i];
    e.u_e.values[i] = bump.value(p);
    e.trace_max = std::max({e.trace_max, std::abs(e.u_e.values[i]), bump.gradient(p).norm()});
  }
  const double c0 = 1.0;
  if (proportional) {
    e.lambda = proportionality_factor(model);
    e.c = calibration_constant(e.u_e, c0, heart);
    e.u_i = NodalField{heart.surface_id(), -e.lambda * e.u_e.values, "mV"};
    e.u_i.values.array() += e.c;
  } else {
    const auto g = reconstruct_ui_general(heart, e.u_e, e.u, model.M_i, model.M_e, c0);
    e.u_i = g.u_i;
    e.c = g.c;
    e.neumann = g.neumann;
  }
  e.torso = NodalField{domain.torso.surface_id(), Eigen::VectorXd::Zero(domain.torso.vertex_count()), "mV"};

  // Torso potential of the triple: the bump's equivalent volume source.
  VolumeQuadrature q;
  const double h = grid_spacing;
  const int n = static_cast<int>(std::ceil(bump.radius / h));
  Eigen::VectorXd src;
  std::vector<double> vals;
  for (int k = -n - 1; k <= n; ++k)
    for (int j = -n - 1; j <= n; ++j)
      for (int i = -n - 1; i <= n; ++i) {
        const Vec3 x = bump.center + h * Vec3(i + 0.5, j + 0.5, k + 0.5);
        const double g = bump.apply(model.M_e, x);
        if (g == 0.0) continue;
        q.points.push_back(x);
        q.weights.push_back(h * h * h);
        vals.push_back(g);
      }
  q.cell_diameter = std::sqrt(3.0) * h;
  src = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  e.predicted_torso = volume_potential(model.M_e, q, src, domain.torso.vertices()).values;
  return e;
}

}  // namespace bidomain
