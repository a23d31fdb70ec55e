#include "bidomain/oracle.hpp"

#include "bidomain/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <random>

namespace bidomain {

namespace {

using cd = std::complex<double>;

struct ComplexHarmonic {
  cd value;
  Eigen::Vector3cd gradient;
};

double double_factorial(int n) {
  double f = 1.0;
  for (int k = n; k > 1; k -= 2) f *= k;
  return f;
}

ComplexHarmonic complex_solid(int l, int m, const Vec3& x) {
  const cd w(x.x(), x.y());
  const Eigen::Vector3cd dw(cd(1, 0), cd(0, 1), cd(0, 0));
  // C_m^m
  ComplexHarmonic cmm;
  const double df = double_factorial(2 * m - 1);
  cmm.value = df * std::pow(w, m);
  cmm.gradient = (m == 0 ? cd(0) : df * double(m) * std::pow(w, m - 1)) * dw;
  if (l == m) return cmm;
  // C_{m+1}^m
  const Eigen::Vector3cd ez(0, 0, 1);
  ComplexHarmonic prev = cmm, cur;
  cur.value = double(2 * m + 1) * x.z() * cmm.value;
  cur.gradient = double(2 * m + 1) * (ez * cmm.value + x.z() * cmm.gradient);
  const double r2 = x.squaredNorm();
  const Eigen::Vector3cd dr2 = (2.0 * x).cast<cd>();
  for (int k = m + 2; k <= l; ++k) {
    ComplexHarmonic next;
    const double inv = 1.0 / (k - m);
    next.value = inv * (double(2 * k - 1) * x.z() * cur.value - double(k + m - 1) * r2 * prev.value);
    next.gradient = inv * (double(2 * k - 1) * (ez * cur.value + x.z() * cur.gradient) -
                           double(k + m - 1) * (dr2 * prev.value + r2 * prev.gradient));
    prev = cur;
    cur = next;
  }
  return cur;
}

void check_degree(int l, int m) {
  if (l < 0 || std::abs(m) > l) fail(ErrorKind::Validation, "harmonic order must satisfy |m| <= l");
  if (l > kMaxHarmonicDegree)
    fail(ErrorKind::Resolvability, "harmonic degree " + std::to_string(l) + " exceeds the cap of " +
                                       std::to_string(kMaxHarmonicDegree));
}

// Y_l^m(x/|x|) for x on any sphere.
double angular(int l, int m, const Vec3& x) { return solid_harmonic(l, m, x).value / std::pow(x.norm(), l); }

double trig(int l, int m, double theta) { return m >= 0 ? std::cos(l * theta) : std::sin(l * theta); }

}  // namespace

HarmonicValue solid_harmonic(int l, int m, const Vec3& x) {
  check_degree(l, m);
  const ComplexHarmonic c = complex_solid(l, std::abs(m), x);
  HarmonicValue h;
  if (m >= 0) {
    h.value = c.value.real();
    h.gradient = c.gradient.real();
  } else {
    h.value = c.value.imag();
    h.gradient = c.gradient.imag();
  }
  return h;
}

void HarmonicSpec::validate() const {
  for (const auto& t : terms) {
    check_degree(t.l, t.m);
    if (!std::isfinite(t.a) || !std::isfinite(t.b)) fail(ErrorKind::Validation, "harmonic coefficients must be finite");
    if (geometry == OracleGeometry::Annulus2D && t.l == 0 && t.b != 0.0)
      fail(ErrorKind::Validation, "degree-0 annulus terms take no singular part");
  }
  if (!(r1 > 0.0)) fail(ErrorKind::Validation, "radius must be positive");
  if (geometry != OracleGeometry::Sphere3D && !(r2 > r1)) fail(ErrorKind::Validation, "outer radius must exceed inner");
}

HarmonicValue eval_harmonic(const HarmonicSpec& spec, const Vec3& x) {
  spec.validate();
  if (spec.geometry == OracleGeometry::Annulus2D) {
    if (x.z() != 0.0) fail(ErrorKind::OutOfGeometry, "annulus points must have z = 0");
    return eval_harmonic_2d(spec, Vec2(x.x(), x.y()));
  }
  const double r = x.norm();
  const double slack = 1e-9;
  const double outer = spec.geometry == OracleGeometry::Sphere3D ? spec.r1 : spec.r2;
  if (r > outer * (1 + slack)) fail(ErrorKind::OutOfGeometry, "point outside the oracle geometry");
  if (spec.geometry == OracleGeometry::Shell3D && r < spec.r1 * (1 - slack))
    fail(ErrorKind::OutOfGeometry, "point inside the inner sphere of the shell");
  HarmonicValue out;
  for (const auto& t : spec.terms) {
    const HarmonicValue p = solid_harmonic(t.l, t.m, x);
    if (t.b == 0.0) {
      out.value += t.a * p.value;
      out.gradient += t.a * p.gradient;
      continue;
    }
    if (r == 0.0) fail(ErrorKind::OutOfGeometry, "singular term evaluated at the origin");
    // (a + b r^{-2l-1}) P with P = r^l Y.
    const double s = std::pow(r, -2 * t.l - 1);
    const double factor = t.a + t.b * s;
    out.value += factor * p.value;
    out.gradient += factor * p.gradient + t.b * (-2.0 * t.l - 1.0) * s / (r * r) * p.value * x;
  }
  return out;
}

HarmonicValue eval_harmonic_2d(const HarmonicSpec& spec, const Vec2& x) {
  spec.validate();
  if (spec.geometry != OracleGeometry::Annulus2D) fail(ErrorKind::Validation, "2D evaluation needs an annulus spec");
  const double r = x.norm();
  if (r > spec.r2 * (1 + 1e-9) || r < spec.r1 * (1 - 1e-9)) fail(ErrorKind::OutOfGeometry, "point outside the annulus");
  const double theta = std::atan2(x.y(), x.x());
  const Vec2 er = x / r, et(-er.y(), er.x());
  HarmonicValue out;
  for (const auto& t : spec.terms) {
    if (t.l == 0) {
      out.value += t.a;
      continue;
    }
    const double radial = t.a * std::pow(r, t.l) + t.b * std::pow(r, -t.l);
    const double dradial = t.l * (t.a * std::pow(r, t.l - 1) - t.b * std::pow(r, -t.l - 1));
    const double ang = trig(t.l, t.m, theta);
    const double dang = t.m >= 0 ? -t.l * std::sin(t.l * theta) : t.l * std::cos(t.l * theta);
    out.value += radial * ang;
    const Vec2 g = dradial * ang * er + radial * dang / r * et;
    out.gradient += Vec3(g.x(), g.y(), 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double scalar_of(const Mat3& m, const char* name) {
  const double s = m(0, 0);
  if ((m - s * Mat3::Identity()).norm() > 1e-12 * std::abs(s))
    fail(ErrorKind::Validation, std::string("the analytic oracle needs isotropic ") + name);
  return s;
}

// Radial fit of one term: u_b coefficients (a, b) with zero torso flux and
// heart trace U; interior (α, β) matching trace and flux. Returns heart flux
// m_b ∂_r u_b and the u_i trace coefficient.
struct TermSolution {
  double a = 0, b = 0, alpha = 0, beta = 0, flux = 0, ui = 0;
};

TermSolution solve_term(int dim, int l, double U, double r1, double r2, double m_e, double m_b, double lambda) {
  TermSolution s;
  if (l == 0) {
    s.a = U;
    s.alpha = U;
    return s;
  }
  double flux_factor_b;
  if (dim == 3) {
    s.b = l * std::pow(r2, 2 * l + 1) / (l + 1.0);  // per unit a
    const double trace = std::pow(r1, l) + s.b * std::pow(r1, -l - 1);
    s.a = U / trace;
    s.b *= s.a;
    flux_factor_b = -(l + 1.0) * std::pow(r1, -l - 2);
  } else {
    s.b = std::pow(r2, 2 * l);
    const double trace = std::pow(r1, l) + s.b * std::pow(r1, -l);
    s.a = U / trace;
    s.b *= s.a;
    flux_factor_b = -double(l) * std::pow(r1, -l - 1);
  }
  s.flux = m_b * (l * s.a * std::pow(r1, l - 1) + flux_factor_b * s.b);
  // α R^l + β R^{l+2} = U ;  m_e (l α R^{l-1} + (l+2) β R^{l+1}) = flux
  Eigen::Matrix2d sys;
  sys << std::pow(r1, l), std::pow(r1, l + 2), m_e * l * std::pow(r1, l - 1), m_e * (l + 2) * std::pow(r1, l + 1);
  const Eigen::Vector2d ab = sys.partialPivLu().solve(Eigen::Vector2d(U, s.flux));
  s.alpha = ab[0];
  s.beta = ab[1];
  // u_i = -(λβ r^{l+2} + γ r^l) Y + c with zero flux: γ = -λβ(l+2)R²/l.
  const double gamma = -lambda * s.beta * (l + 2.0) * r1 * r1 / l;
  s.ui = -(lambda * s.beta * std::pow(r1, l + 2) + gamma * std::pow(r1, l));
  return s;
}

template <class Mesh, class Angular>
SteadyDataset synth_common(int dim, const Mesh& heart, const Mesh& torso, double r1, double r2, double m_i, double m_e,
                           double m_b, const std::vector<HarmonicTerm>& u_e_trace, double c0, Angular angular_of) {
  if (!(r2 > r1 && r1 > 0)) fail(ErrorKind::Validation, "need 0 < r1 < r2");
  if (!(m_i > 0 && m_e > 0 && m_b > 0)) fail(ErrorKind::Validation, "conductivities must be positive");
  SteadyDataset d;
  d.dimension = dim;
  d.r1 = r1;
  d.r2 = r2;
  d.m_i = m_i;
  d.m_e = m_e;
  d.m_b = m_b;
  d.lambda = m_e / m_i;
  d.c0 = c0;
  d.u_b.geometry = dim == 3 ? OracleGeometry::Shell3D : OracleGeometry::Annulus2D;
  d.u_b.r1 = r1;
  d.u_b.r2 = r2;

  double mean = 0.0;
  std::vector<TermSolution> sols;
  for (const auto& t : u_e_trace) {
    check_degree(t.l, t.m);
    if (t.b != 0.0) fail(ErrorKind::Validation, "heart trace terms take only the coefficient a");
    if (dim == 2 && t.l == 0 && t.m != 0) fail(ErrorKind::Validation, "degree-0 term must have m = 0");
    sols.push_back(solve_term(dim, t.l, t.a, r1, r2, m_e, m_b, d.lambda));
    d.u_b.terms.push_back({t.l, t.m, sols.back().a, sols.back().b});
    d.u_e_inside.push_back({t.l, t.m, sols.back().alpha, sols.back().beta});
    if (t.l == 0) mean += t.a;
  }
  d.c = -c0 * mean;

  const int nh = heart.vertex_count(), nt = torso.vertex_count();
  d.u_e = NodalField{heart.surface_id(), Eigen::VectorXd::Zero(nh), "mV"};
  d.u_i = NodalField{heart.surface_id(), Eigen::VectorXd::Constant(nh, d.c), "mV"};
  d.heart_flux = NodalField{heart.surface_id(), Eigen::VectorXd::Zero(nh), "mV/cm"};
  d.torso = NodalField{torso.surface_id(), Eigen::VectorXd::Zero(nt), "mV"};
  for (int i = 0; i < nh; ++i) {
    const auto& p = heart.vertices()[i];
    for (std::size_t k = 0; k < u_e_trace.size(); ++k) {
      const double y = angular_of(u_e_trace[k].l, u_e_trace[k].m, p);
      d.u_e.values[i] += u_e_trace[k].a * y;
      d.u_i.values[i] += sols[k].ui * y;
      d.heart_flux.values[i] += sols[k].flux * y;
    }
  }
  for (int i = 0; i < nt; ++i) {
    const auto& p = torso.vertices()[i];
    for (std::size_t k = 0; k < u_e_trace.size(); ++k) {
      const int l = u_e_trace[k].l;
      const double radial = dim == 3 ? sols[k].a * std::pow(r2, l) + sols[k].b * std::pow(r2, -l - 1)
                                     : sols[k].a * std::pow(r2, l) + sols[k].b * std::pow(r2, -l);
      d.torso.values[i] += radial * angular_of(l, u_e_trace[k].m, p);
    }
  }
  d.v = NodalField{heart.surface_id(), d.u_i.values - d.u_e.values, "mV"};

  // Residuals of the transmission and torso conditions, from the closed forms.
  for (std::size_t k = 0; k < sols.size(); ++k) {
    const int l = u_e_trace[k].l;
    const auto& s = sols[k];
    const double ub = dim == 3 ? s.a * std::pow(r1, l) + s.b * std::pow(r1, -l - 1)
                               : s.a * std::pow(r1, l) + s.b * std::pow(r1, -l);
    const double ue = s.alpha * std::pow(r1, l) + s.beta * std::pow(r1, l + 2);
    d.transmission_residual = std::max(d.transmission_residual, std::abs(ub - ue));
    const double fe = l == 0 ? 0.0 : m_e * (l * s.alpha * std::pow(r1, l - 1) + (l + 2) * s.beta * std::pow(r1, l + 1));
    d.flux_residual = std::max(d.flux_residual, std::abs(fe - s.flux));
    const double dr = l == 0 ? 0.0
                      : dim == 3 ? l * s.a * std::pow(r2, l - 1) - (l + 1) * s.b * std::pow(r2, -l - 2)
                                 : l * (s.a * std::pow(r2, l - 1) - s.b * std::pow(r2, -l - 1));
    d.torso_flux_residual = std::max(d.torso_flux_residual, std::abs(dr));
  }
  return d;
}

}  // namespace

double SteadyDataset::u_e_value(const Vec3& x) const {
  double u = 0.0;
  for (const auto& t : u_e_inside) {
    if (dimension == 3) {
      const double p = solid_harmonic(t.l, t.m, x).value;  // r^l Y
      u += (t.alpha + t.beta * x.squaredNorm()) * p;
    } else {
      const double r = std::hypot(x.x(), x.y());
      const double th = std::atan2(x.y(), x.x());
      u += (t.alpha * std::pow(r, t.l) + t.beta * std::pow(r, t.l + 2)) * (t.l == 0 ? 1.0 : trig(t.l, t.m, th));
    }
  }
  return u;
}

double SteadyDataset::u_e_source(const Vec3& x) const {
  double g = 0.0;
  for (const auto& t : u_e_inside) {
    if (dimension == 3) {
      g += -m_e * t.beta * (4.0 * t.l + 6.0) * solid_harmonic(t.l, t.m, x).value;
    } else {
      const double r = std::hypot(x.x(), x.y());
      const double th = std::atan2(x.y(), x.x());
      g += -m_e * t.beta * (4.0 * t.l + 4.0) * std::pow(r, t.l) * (t.l == 0 ? 1.0 : trig(t.l, t.m, th));
    }
  }
  return g;
}

double SteadyDataset::u_i_value(const Vec3& x) const {
  double u = c;
  for (const auto& t : u_e_inside) {
    if (t.l == 0) continue;
    const double gamma = -lambda * t.beta * (t.l + 2.0) * r1 * r1 / t.l;
    if (dimension == 3) {
      u -= (lambda * t.beta * x.squaredNorm() + gamma) * solid_harmonic(t.l, t.m, x).value;
    } else {
      const double r = std::hypot(x.x(), x.y());
      const double th = std::atan2(x.y(), x.x());
      u -= (lambda * t.beta * std::pow(r, t.l + 2) + gamma * std::pow(r, t.l)) * trig(t.l, t.m, th);
    }
  }
  return u;
}

SteadyDataset synth_bidomain_steady(const SurfaceMesh& heart, const SurfaceMesh& torso, double r1, double r2,
                                    const ConductivityModel& model, const std::vector<HarmonicTerm>& u_e_trace,
                                    double c0) {
  model.validate();
  const double m_i = scalar_of(model.M_i, "M_i"), m_e = scalar_of(model.M_e, "M_e"), m_b = scalar_of(model.M_b, "M_b");
  return synth_common(3, heart, torso, r1, r2, m_i, m_e, m_b, u_e_trace, c0,
                      [](int l, int m, const Vec3& p) { return angular(l, m, p); });
}

SteadyDataset synth_bidomain_steady_2d(const CurveMesh& heart, const CurveMesh& torso, double r1, double r2,
                                       double m_i, double m_e, double m_b, const std::vector<HarmonicTerm>& u_e_trace,
                                       double c0) {
  return synth_common(2, heart, torso, r1, r2, m_i, m_e, m_b, u_e_trace, c0, [](int l, int m, const Vec2& p) {
    return l == 0 ? 1.0 : trig(l, m, std::atan2(p.y(), p.x()));
  });
}

Eigen::VectorXd add_gaussian_noise(const Eigen::VectorXd& values, double level, std::uint64_t seed) {
  if (!(level >= 0.0)) fail(ErrorKind::Validation, "noise level must be non-negative");
  Eigen::VectorXd out = values;
  if (level == 0.0 || values.size() == 0) return out;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, level * values.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += dist(gen);
  return out;
}

double rmse(const Eigen::MatrixXd& reconstructed, const Eigen::MatrixXd& truth) {
  if (reconstructed.rows() != truth.rows() || reconstructed.cols() != truth.cols())
    fail(ErrorKind::ShapeMismatch, "rmse inputs have different shapes");
  if (truth.size() == 0) fail(ErrorKind::ShapeMismatch, "rmse of empty fields");
  return std::sqrt((reconstructed - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double rmse(const NodalField& reconstructed, const NodalField& truth) {
  if (reconstructed.surface_id != truth.surface_id)
    fail(ErrorKind::ShapeMismatch, "rmse inputs live on different surfaces");
  return rmse(Eigen::MatrixXd(reconstructed.values), Eigen::MatrixXd(truth.values));
}

}  // namespace bidomain
