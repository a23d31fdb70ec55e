#include "bidomain/direct_solvers.hpp"

#include "bidomain/errors.hpp"

#include <cmath>

namespace bidomain {

namespace {

void check_factorization(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, const char* what) {
  const auto& f = lu.matrixLU();
  if (!f.allFinite()) fail(ErrorKind::SolveFailure, std::string(what) + ": factorization produced non-finite values");
  const double big = f.diagonal().cwiseAbs().maxCoeff();
  const double small = f.diagonal().cwiseAbs().minCoeff();
  if (!(small > 1e-14 * big)) fail(ErrorKind::SolveFailure, std::string(what) + ": boundary system is singular");
}

}  // namespace

template <class Mesh>
MixedBoundarySolver<Mesh>::MixedBoundarySolver(const Tensor& m, std::vector<BoundaryPart<Mesh>> parts,
                                               const AssemblyOptions& opt)
    : m_(m), opt_(opt), parts_(std::move(parts)) {
  if (parts_.empty()) fail(ErrorKind::Validation, "boundary system needs at least one surface");
  for (const auto& p : parts_) {
    offsets_.push_back(total_);
    total_ += p.mesh->vertex_count();
  }
  full_ = Eigen::MatrixXd::Zero(total_, 2 * static_cast<Eigen::Index>(total_));
  for (int a = 0; a < part_count(); ++a) {
    const Mesh& target = *parts_[a].mesh;
    const int na = target.vertex_count();
    for (int b = 0; b < part_count(); ++b) {
      const Mesh& source = *parts_[b].mesh;
      const int nb = source.vertex_count();
      const double sign = parts_[b].outward ? 1.0 : -1.0;
      const LayerPair ops = a == b ? assemble_self(m_, source, opt_) : assemble_at_points(m_, source, target.vertices(), opt_);
      full_.block(offsets_[a], u_column(b), na, nb) = sign * ops.dbl;
      full_.block(offsets_[a], q_column(b), na, nb) = -sign * ops.single;
      if (a == b) full_.block(offsets_[a], u_column(b), na, nb).diagonal().array() += 0.5;
    }
  }
  for (int k = 0; k < part_count(); ++k) {
    const int n = parts_[k].mesh->vertex_count();
    const Eigen::Index unknown = parts_[k].known == BoundaryData::Dirichlet ? q_column(k) : u_column(k);
    const Eigen::Index known = parts_[k].known == BoundaryData::Dirichlet ? u_column(k) : q_column(k);
    for (int i = 0; i < n; ++i) {
      unknown_cols_.push_back(unknown + i);
      known_cols_.push_back(known + i);
    }
  }
  Eigen::MatrixXd block(total_, total_);
  for (int j = 0; j < total_; ++j) block.col(j) = full_.col(unknown_cols_[j]);
  lu_.compute(block);
  check_factorization(lu_, "mixed boundary problem");
}

template <class Mesh>
typename MixedBoundarySolver<Mesh>::Solution MixedBoundarySolver<Mesh>::solve(
    const std::vector<Eigen::VectorXd>& known) const {
  if (static_cast<int>(known.size()) != part_count()) fail(ErrorKind::ShapeMismatch, "one data vector per surface");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total_);
  for (int k = 0; k < part_count(); ++k) {
    const int n = parts_[k].mesh->vertex_count();
    if (known[k].size() != n) fail(ErrorKind::ShapeMismatch, "boundary data does not match its surface");
    if (!known[k].allFinite()) fail(ErrorKind::Validation, "boundary data is not finite");
    const Eigen::Index col = parts_[k].known == BoundaryData::Dirichlet ? u_column(k) : q_column(k);
    rhs.noalias() -= full_.middleCols(col, n) * known[k];
  }
  const Eigen::VectorXd x = lu_.solve(rhs);
  if (!x.allFinite()) fail(ErrorKind::SolveFailure, "non-finite boundary solution");

  Solution sol;
  Eigen::VectorXd stacked(2 * static_cast<Eigen::Index>(total_));
  for (int k = 0; k < part_count(); ++k) {
    const int n = parts_[k].mesh->vertex_count();
    const Eigen::VectorXd solved = x.segment(offsets_[k], n);
    if (parts_[k].known == BoundaryData::Dirichlet) {
      sol.dirichlet.push_back(known[k]);
      sol.flux.push_back(solved);
    } else {
      sol.dirichlet.push_back(solved);
      sol.flux.push_back(known[k]);
    }
    stacked.segment(u_column(k), n) = sol.dirichlet.back();
    stacked.segment(q_column(k), n) = sol.flux.back();
  }
  const double scale = std::max(rhs.norm(), 1e-300);
  sol.residual_norm = (full_ * stacked).norm() / scale;
  if (rhs.norm() == 0.0) sol.residual_norm = (full_ * stacked).norm();
  return sol;
}

template <class Mesh>
Eigen::VectorXd MixedBoundarySolver<Mesh>::evaluate(const Solution& sol, const std::vector<PointT>& targets) const {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets.size()));
  if (targets.empty()) return values;
  for (int k = 0; k < part_count(); ++k) {
    const LayerPair ops = assemble_at_points(m_, *parts_[k].mesh, targets, opt_);
    const double sign = parts_[k].outward ? 1.0 : -1.0;
    values += sign * (ops.single * sol.flux[k] - ops.dbl * sol.dirichlet[k]);
  }
  return values;
}

template class MixedBoundarySolver<SurfaceMesh>;
template class MixedBoundarySolver<CurveMesh>;

// ---------------------------------------------------------------------------

DirichletResult solve_dirichlet(const Mat3& m, const SurfaceMesh& mesh, const NodalField& u0,
                                const std::vector<Vec3>& targets) {
  check_field_on(u0, mesh);
  for (const auto& x : targets)
    if (distance_to_surface(mesh, x) < 1e-9 * mesh.bounding_diagonal())
      fail(ErrorKind::PointOnBoundary, "target lies on the boundary");
  const MixedBoundarySolver<SurfaceMesh> solver(m, {{&mesh, true, BoundaryData::Dirichlet}});
  const auto sol = solver.solve({u0.values});
  DirichletResult out;
  out.values = solver.evaluate(sol, targets);
  out.report.solution_trace = u0;
  out.report.flux_trace = NodalField{mesh.surface_id(), sol.flux[0], "mV/cm"};
  out.report.residual_norm = sol.residual_norm;
  return out;
}

ShellDirichletResult solve_dirichlet_shell(const Mat3& m, const DomainConfig& domain, const NodalField& u_heart,
                                           const NodalField& u_torso, const std::vector<Vec3>& targets) {
  check_field_on(u_heart, domain.heart);
  check_field_on(u_torso, domain.torso);
  const MixedBoundarySolver<SurfaceMesh> solver(
      m, {{&domain.heart, false, BoundaryData::Dirichlet}, {&domain.torso, true, BoundaryData::Dirichlet}});
  const auto sol = solver.solve({u_heart.values, u_torso.values});
  ShellDirichletResult out;
  out.values = solver.evaluate(sol, targets);
  out.heart_flux = NodalField{domain.heart.surface_id(), sol.flux[0], "mV/cm"};
  out.torso_flux = NodalField{domain.torso.surface_id(), sol.flux[1], "mV/cm"};
  out.residual_norm = sol.residual_norm;
  return out;
}

// ---------------------------------------------------------------------------

template <class Mesh>
NeumannSolver<Mesh>::NeumannSolver(const Tensor& m, const Mesh& mesh, const AssemblyOptions& opt)
    : m_(m), mesh_(&mesh), layers_(assemble_self(m, mesh, opt)) {
  const int n = mesh.vertex_count();
  Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(n + 1, n + 1);
  bordered.topLeftCorner(n, n) = layers_.dbl;
  bordered.topLeftCorner(n, n).diagonal().array() += 0.5;
  bordered.topRightCorner(n, 1).setOnes();
  bordered.bottomLeftCorner(1, n) = mesh.node_weights().transpose();
  lu_.compute(bordered);
  check_factorization(lu_, "Neumann problem");
}

template <class Mesh>
DirectSolveReport NeumannSolver<Mesh>::solve(const NodalField& flux, const NeumannOptions& options,
                                             const Eigen::VectorXd* source_trace, double source_integral,
                                             double source_scale) const {
  check_field_on(flux, *mesh_);
  const int n = mesh_->vertex_count();
  const Eigen::VectorXd& w = mesh_->node_weights();
  const double area = w.sum();
  Eigen::VectorXd u1 = flux.values;
  DirectSolveReport report;
  report.compatibility_defect = w.dot(u1) + source_integral;
  const double scale = u1.cwiseAbs().maxCoeff() * area + source_scale;
  if (std::abs(report.compatibility_defect) > options.tolerance * scale) {
    if (!options.project_incompatible)
      fail(ErrorKind::IncompatibleData, "Neumann data violates the compatibility condition (defect " +
                                            std::to_string(report.compatibility_defect) + ")");
  }
  if (options.project_incompatible) u1.array() -= report.compatibility_defect / area;

  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = layers_.single * u1;
  if (source_trace) {
    if (source_trace->size() != n) fail(ErrorKind::ShapeMismatch, "volume source trace does not match the mesh");
    rhs.head(n) += *source_trace;
  }
  rhs[n] = 0.0;
  const Eigen::VectorXd x = lu_.solve(rhs);
  if (!x.allFinite()) fail(ErrorKind::SolveFailure, "non-finite Neumann solution");
  const Eigen::VectorXd u = x.head(n);
  Eigen::VectorXd residual = 0.5 * u + layers_.dbl * u + Eigen::VectorXd::Constant(n, x[n]) - rhs.head(n);
  report.residual_norm = residual.norm() / std::max(rhs.head(n).norm(), 1e-300);
  report.normalization_value = w.dot(u);
  report.solution_trace = NodalField{mesh_->surface_id(), u, "mV"};
  report.flux_trace = NodalField{mesh_->surface_id(), u1, flux.units};
  return report;
}

template class NeumannSolver<SurfaceMesh>;
template class NeumannSolver<CurveMesh>;

NeumannResult solve_neumann_normalized(const Mat3& m, const SurfaceMesh& mesh, const NodalField& u1,
                                       const std::optional<VolumeSource>& g, const std::vector<Vec3>& targets,
                                       const NeumannOptions& options) {
  check_field_on(u1, mesh);
  const NeumannSolver<SurfaceMesh> solver(m, mesh);
  NeumannResult out;
  Eigen::VectorXd trace;
  double integral = 0.0, scale = 0.0;
  if (g) {
    if (g->values.size() != g->quadrature.size()) fail(ErrorKind::ShapeMismatch, "volume source size mismatch");
    trace = volume_potential(m, g->quadrature, g->values, mesh.vertices()).values;
    for (int j = 0; j < g->quadrature.size(); ++j) integral += g->quadrature.weights[j] * g->values[j];
    scale = g->values.size() ? g->values.cwiseAbs().maxCoeff() * g->quadrature.volume() : 0.0;
  }
  out.report = solver.solve(u1, options, g ? &trace : nullptr, integral, scale);
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets.size()));
  if (!targets.empty()) {
    const LayerPair ops = assemble_at_points(m, mesh, targets);
    out.values = ops.single * out.report.flux_trace->values - ops.dbl * out.report.solution_trace->values;
    if (g) out.values += volume_potential(m, g->quadrature, g->values, targets).values;
  }
  return out;
}

// ---------------------------------------------------------------------------

template <class Mesh>
ZarembaSolver<Mesh>::ZarembaSolver(const MeshTensor<Mesh>& m_b, const Mesh& heart, const Mesh& torso,
                                   const AssemblyOptions& opt)
    : heart_(&heart),
      torso_(&torso),
      system_(m_b, {{&heart, false, BoundaryData::Dirichlet}, {&torso, true, BoundaryData::Neumann}}, opt) {}

template <class Mesh>
typename ZarembaSolver<Mesh>::Result ZarembaSolver<Mesh>::solve(const NodalField& u_heart) const {
  check_field_on(u_heart, *heart_);
  const auto sol = system_.solve({u_heart.values, Eigen::VectorXd::Zero(torso_->vertex_count())});
  Result r;
  r.heart_flux = NodalField{heart_->surface_id(), sol.flux[0], "mV/cm"};
  r.torso_trace = NodalField{torso_->surface_id(), sol.dirichlet[1], u_heart.units};
  r.report.solution_trace = r.torso_trace;
  r.report.flux_trace = r.heart_flux;
  r.report.residual_norm = sol.residual_norm;
  const Eigen::VectorXd& w = heart_->node_weights();
  const double total = w.dot(sol.flux[0].cwiseAbs());
  r.conservation_residual = total > 0.0 ? std::abs(w.dot(sol.flux[0])) / total : 0.0;
  return r;
}

template class ZarembaSolver<SurfaceMesh>;
template class ZarembaSolver<CurveMesh>;

ZarembaSolver<SurfaceMesh>::Result solve_zaremba(const Mat3& m_b, const SurfaceMesh& heart, const SurfaceMesh& torso,
                                                 const NodalField& u_heart) {
  return ZarembaSolver<SurfaceMesh>(m_b, heart, torso).solve(u_heart);
}

ZarembaSolver<CurveMesh>::Result solve_zaremba(const Mat2& m_b, const CurveMesh& heart, const CurveMesh& torso,
                                               const NodalField& u_heart) {
  return ZarembaSolver<CurveMesh>(m_b, heart, torso).solve(u_heart);
}

}  // namespace bidomain
