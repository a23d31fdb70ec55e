#include "bidomain/cauchy.hpp"

#include "bidomain/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace bidomain {

const char* to_string(AlphaSelection s) {
  switch (s) {
    case AlphaSelection::LCurveMaxCurvature: return "lcurve";
    case AlphaSelection::FixedAlpha: return "fixed";
    case AlphaSelection::DiscrepancyPrinciple: return "discrepancy";
  }
  return "?";
}

const char* to_string(PenaltyKind p) { return p == PenaltyKind::Identity ? "identity" : "surface-gradient"; }

AlphaSelection parse_alpha_selection(const std::string& s) {
  if (s == "lcurve") return AlphaSelection::LCurveMaxCurvature;
  if (s == "fixed") return AlphaSelection::FixedAlpha;
  if (s == "discrepancy") return AlphaSelection::DiscrepancyPrinciple;
  fail(ErrorKind::Validation, "unknown alpha selection '" + s + "'");
}

PenaltyKind parse_penalty(const std::string& s) {
  if (s == "identity") return PenaltyKind::Identity;
  if (s == "surface-gradient") return PenaltyKind::SurfaceGradient;
  fail(ErrorKind::Validation, "unknown penalty '" + s + "'");
}

void TikhonovConfig::validate() const {
  if (!(alpha_min > 0.0) || !(alpha_max > alpha_min) || !std::isfinite(alpha_max))
    fail(ErrorKind::Validation, "alpha grid needs 0 < alpha_min < alpha_max");
  if (alpha_count < 2) fail(ErrorKind::Validation, "alpha grid needs at least 2 points");
  if (selection == AlphaSelection::LCurveMaxCurvature && alpha_count < 8)
    fail(ErrorKind::Validation, "L-curve selection needs at least 8 grid points");
  if (selection == AlphaSelection::DiscrepancyPrinciple && !(noise_level > 0.0))
    fail(ErrorKind::Validation, "discrepancy principle needs a positive noise level");
  if (selection == AlphaSelection::FixedAlpha && !(fixed_alpha > 0.0))
    fail(ErrorKind::Validation, "fixed alpha must be positive");
}

std::vector<double> TikhonovConfig::alpha_grid() const { return alpha_grid(alpha_min, alpha_max); }

std::vector<double> TikhonovConfig::alpha_grid(double lo, double hi) const {
  validate();
  if (!(lo > 0.0) || !(hi > lo)) fail(ErrorKind::Validation, "alpha grid needs 0 < min < max");
  std::vector<double> grid(alpha_count);
  const double a = std::log10(lo), b = std::log10(hi);
  for (int k = 0; k < alpha_count; ++k) grid[k] = std::pow(10.0, a + (b - a) * k / (alpha_count - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

int lcurve_corner(const std::vector<LCurvePoint>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 8) fail(ErrorKind::Validation, "L-curve needs at least 8 points");
  for (const auto& p : points)
    if (!std::isfinite(p.log_residual) || !std::isfinite(p.log_solution))
      fail(ErrorKind::Validation, "L-curve point is not finite");
  int best = -1;
  double best_kappa = 0.0;
  for (int k = 1; k + 1 < n; ++k) {
    const double ax = points[k].log_residual - points[k - 1].log_residual;
    const double ay = points[k].log_solution - points[k - 1].log_solution;
    const double bx = points[k + 1].log_residual - points[k].log_residual;
    const double by = points[k + 1].log_solution - points[k].log_solution;
    const double la = std::hypot(ax, ay), lb = std::hypot(bx, by), lc = std::hypot(ax + bx, ay + by);
    if (la == 0.0 || lb == 0.0 || lc == 0.0) continue;
    const double cross = ax * by - ay * bx;
    if (cross <= 1e-10 * la * lb) continue;
    const double kappa = 2.0 * cross / (la * lb * lc);
    if (best < 0 || kappa >= best_kappa) {
      best = k;
      best_kappa = kappa;
    }
  }
  if (best < 0) fail(ErrorKind::DegenerateLCurve, "L-curve has no positive curvature");
  return best;
}

void write_lcurve_csv(const CauchySolveReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Parse, "cannot write " + path.string());
  out << "alpha,residual_norm,solution_norm\n" << std::setprecision(17);
  for (std::size_t k = 0; k < report.alphas.size(); ++k)
    out << report.alphas[k] << ',' << report.residual_norms[k] << ',' << report.solution_norms[k] << '\n';
}

Eigen::MatrixXd edge_difference_operator(const CurveMesh& curve) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(curve.element_count(), curve.vertex_count());
  for (int e = 0; e < curve.element_count(); ++e) {
    const auto& s = curve.segments()[e];
    g(e, s[0]) = -1.0 / curve.lengths()[e];
    g(e, s[1]) = 1.0 / curve.lengths()[e];
  }
  return g;
}

// ---------------------------------------------------------------------------

template <class Mesh>
CauchySolver<Mesh>::CauchySolver(const MeshTensor<Mesh>& m_b, const Mesh& heart, const Mesh& torso,
                                 const TikhonovConfig& config, const AssemblyOptions& opt)
    : heart_(&heart), torso_(&torso), config_(config), forward_(m_b, heart, torso, opt) {
  config_.validate();
  const auto& sys = forward_.system();
  const int nh = heart.vertex_count(), nt = torso.vertex_count();
  // Heart Dirichlet columns moved to the right-hand side, one unit trace each.
  const Eigen::MatrixXd x = sys.solve_unknowns(-sys.full_operator().middleCols(sys.u_column(0), nh));
  if (!x.allFinite()) fail(ErrorKind::SolveFailure, "non-finite transfer matrix");
  flux_map_ = x.topRows(nh);
  transfer_ = x.bottomRows(nt);

  Eigen::MatrixXd op = transfer_;
  if (config_.penalty == PenaltyKind::SurfaceGradient) {
    const Eigen::MatrixXd g = edge_difference_operator(heart);
    Eigen::MatrixXd gram = g.transpose() * g;
    const double eps = 1e-8 * gram.diagonal().maxCoeff();
    gram.diagonal().array() += eps;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) fail(ErrorKind::SolveFailure, "penalty Gram matrix is not positive definite");
    r_factor_ = llt.matrixU();
    // A R⁻¹ = (R⁻ᵀ Aᵀ)ᵀ
    op = r_factor_->transpose().template triangularView<Eigen::Lower>().solve(transfer_.transpose()).transpose();
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(op, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU();
  v_ = svd.matrixV();
  sigma_ = svd.singularValues();
  if (!sigma_.allFinite() || sigma_.size() == 0 || !(sigma_[0] > 0.0))
    fail(ErrorKind::SolveFailure, "transfer matrix has no usable singular values");
  if (config_.spectrum_range) {
    const double eps = 16.0 * std::numeric_limits<double>::epsilon();
    const double ratio = sigma_[sigma_.size() - 1] / sigma_[0];
    config_.alpha_min = std::max(ratio * ratio, eps * eps);
    config_.alpha_max = 1.0;
  }
  alphas_ = config_.alpha_grid();
}

template <class Mesh>
typename CauchySolver<Mesh>::Sweep CauchySolver<Mesh>::sweep_norms(const Eigen::VectorXd& b) const {
  Sweep s;
  s.beta = u_.transpose() * b;
  s.outside_sq = std::max(0.0, b.squaredNorm() - s.beta.squaredNorm());
  const double smax2 = sigma_[0] * sigma_[0];
  for (const double alpha : alphas_) {
    const double a = alpha * smax2;
    double res = s.outside_sq, sol = 0.0;
    for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
      const double s2 = sigma_[i] * sigma_[i];
      const double r = a / (s2 + a) * s.beta[i];
      const double y = sigma_[i] / (s2 + a) * s.beta[i];
      res += r * r;
      sol += y * y;
    }
    s.residual.push_back(std::sqrt(res));
    s.seminorm.push_back(std::sqrt(sol));
  }
  return s;
}

template <class Mesh>
Eigen::VectorXd CauchySolver<Mesh>::solution(const Eigen::VectorXd& beta, double alpha) const {
  const double a = alpha * sigma_[0] * sigma_[0];
  const Eigen::VectorXd coef = (sigma_.array() / (sigma_.array().square() + a) * beta.array()).matrix();
  Eigen::VectorXd y = v_ * coef;
  if (r_factor_) y = r_factor_->template triangularView<Eigen::Upper>().solve(y);
  return y;
}

template <class Mesh>
int CauchySolver<Mesh>::select(const Sweep& s, const Eigen::VectorXd& b, double data_scale, bool* fallback) const {
  const int n = static_cast<int>(alphas_.size());
  std::vector<int> finite;
  for (int k = 0; k < n; ++k)
    if (std::isfinite(s.residual[k]) && std::isfinite(s.seminorm[k])) finite.push_back(k);
  if (finite.empty()) fail(ErrorKind::AllAlphaFailed, "no finite regularized solution on the alpha grid");
  *fallback = false;

  switch (config_.selection) {
    case AlphaSelection::FixedAlpha: {
      int best = finite.front();
      for (int k : finite)
        if (std::abs(std::log(alphas_[k] / config_.fixed_alpha)) < std::abs(std::log(alphas_[best] / config_.fixed_alpha)))
          best = k;
      return best;
    }
    case AlphaSelection::DiscrepancyPrinciple: {
      const double delta = config_.noise_level * data_scale * std::sqrt(static_cast<double>(b.size()));
      int best = -1;
      for (int k : finite)
        if (s.residual[k] <= delta) best = k;
      if (best < 0) best = finite.front();
      return best;
    }
    case AlphaSelection::LCurveMaxCurvature: {
      std::vector<LCurvePoint> pts;
      for (int k : finite) pts.push_back({std::log(s.residual[k]), std::log(s.seminorm[k])});
      try {
        if (static_cast<int>(finite.size()) != n) fail(ErrorKind::DegenerateLCurve, "alpha grid has failed solves");
        return finite[lcurve_corner(pts)];
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateLCurve && e.kind() != ErrorKind::Validation) throw;
      }
      *fallback = true;
      double min_res = std::numeric_limits<double>::infinity();
      for (int k : finite) min_res = std::min(min_res, s.residual[k]);
      for (int k : finite)
        if (s.residual[k] <= 1.1 * min_res) return k;
      return finite.front();
    }
  }
  return finite.front();
}

template <class Mesh>
CauchySolveReport CauchySolver<Mesh>::finish(const Sweep& s, int index, bool fallback,
                                             const Eigen::VectorXd& correction_flux) const {
  CauchySolveReport rep;
  rep.alphas = alphas_;
  rep.residual_norms = s.residual;
  rep.solution_norms = s.seminorm;
  for (std::size_t k = 0; k < alphas_.size(); ++k)
    rep.lcurve_points.push_back({std::log(s.residual[k]), std::log(s.seminorm[k])});
  rep.chosen_index = index;
  rep.chosen_alpha = alphas_[index];
  rep.residual_norm = s.residual[index];
  rep.lcurve_fallback = fallback;
  const Eigen::VectorXd u = solution(s.beta, alphas_[index]);
  if (!u.allFinite()) fail(ErrorKind::AllAlphaFailed, "regularized solution is not finite");
  rep.heart_dirichlet = NodalField{heart_->surface_id(), u, "mV"};
  Eigen::VectorXd q = flux_map_ * u;
  if (correction_flux.size() == q.size()) q += correction_flux;
  rep.heart_flux = NodalField{heart_->surface_id(), q, "mV/cm"};
  return rep;
}

template <class Mesh>
Eigen::VectorXd CauchySolver<Mesh>::rhs(const NodalField& f, const std::optional<NodalField>& g,
                                        Eigen::VectorXd* heart_flux_g) const {
  check_field_on(f, *torso_);
  if (!f.values.allFinite()) fail(ErrorKind::Validation, "torso data is not finite");
  Eigen::VectorXd b = f.values;
  heart_flux_g->resize(0);
  if (g) {
    check_field_on(*g, *torso_);
    if (!g->values.allFinite()) fail(ErrorKind::Validation, "torso flux is not finite");
    if (g->values.cwiseAbs().maxCoeff() > 0.0) {
      const auto sol = forward_.system().solve({Eigen::VectorXd::Zero(heart_->vertex_count()), g->values});
      b -= sol.dirichlet[1];
      *heart_flux_g = sol.flux[0];
    }
  }
  return b;
}

template <class Mesh>
CauchySolveReport CauchySolver<Mesh>::solve(const NodalField& f, const std::optional<NodalField>& torso_flux) const {
  Eigen::VectorXd qg;
  const Eigen::VectorXd b = rhs(f, torso_flux, &qg);
  const Sweep s = sweep_norms(b);
  bool fallback = false;
  const int index = select(s, b, f.values.cwiseAbs().maxCoeff(), &fallback);
  return finish(s, index, fallback, qg);
}

template <class Mesh>
std::vector<CauchySolveReport> CauchySolver<Mesh>::solve_frames(const Eigen::MatrixXd& frames) const {
  if (frames.rows() != torso_->vertex_count()) fail(ErrorKind::ShapeMismatch, "frame rows must match torso nodes");
  std::vector<Sweep> sweeps(frames.cols());
  std::vector<CauchySolveReport> out(frames.cols());
  for (Eigen::Index c = 0; c < frames.cols(); ++c) {
    if (!frames.col(c).allFinite()) fail(ErrorKind::Validation, "torso data is not finite");
    sweeps[c] = sweep_norms(frames.col(c));
  }
  const Eigen::VectorXd none;
  if (config_.global_alpha) {
    Sweep total;
    total.residual.assign(alphas_.size(), 0.0);
    total.seminorm.assign(alphas_.size(), 0.0);
    for (const auto& s : sweeps)
      for (std::size_t k = 0; k < alphas_.size(); ++k) {
        total.residual[k] += s.residual[k] * s.residual[k];
        total.seminorm[k] += s.seminorm[k] * s.seminorm[k];
      }
    for (std::size_t k = 0; k < alphas_.size(); ++k) {
      total.residual[k] = std::sqrt(total.residual[k]);
      total.seminorm[k] = std::sqrt(total.seminorm[k]);
    }
    bool fallback = false;
    const Eigen::VectorXd stacked = frames.reshaped();
    const int index = select(total, stacked, frames.cwiseAbs().maxCoeff(), &fallback);
    for (Eigen::Index c = 0; c < frames.cols(); ++c) out[c] = finish(sweeps[c], index, fallback, none);
    return out;
  }
  for (Eigen::Index c = 0; c < frames.cols(); ++c) {
    bool fallback = false;
    const int index = select(sweeps[c], frames.col(c), frames.col(c).cwiseAbs().maxCoeff(), &fallback);
    out[c] = finish(sweeps[c], index, fallback, none);
  }
  return out;
}

template <class Mesh>
Eigen::MatrixXd CauchySolver<Mesh>::sweep(const NodalField& f) const {
  Eigen::VectorXd qg;
  const Eigen::VectorXd b = rhs(f, std::nullopt, &qg);
  const Eigen::VectorXd beta = u_.transpose() * b;
  Eigen::MatrixXd out(heart_->vertex_count(), static_cast<Eigen::Index>(alphas_.size()));
  for (std::size_t k = 0; k < alphas_.size(); ++k) out.col(k) = solution(beta, alphas_[k]);
  return out;
}

template class CauchySolver<SurfaceMesh>;
template class CauchySolver<CurveMesh>;

CauchySolveReport solve_cauchy_elliptic(const Mat3& m_b, const SurfaceMesh& heart, const SurfaceMesh& torso,
                                        const NodalField& f, const std::optional<NodalField>& torso_flux,
                                        const TikhonovConfig& config) {
  const CauchySolver<SurfaceMesh> solver(m_b, heart, torso, config);
  return solver.solve(f, torso_flux);
}

}  // namespace bidomain
