#include "bidomain/errors.hpp"
#include "bidomain/oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace bidomain;
using testutil::uniform;

TEST_CASE("solid harmonics match closed forms up to degree two") {
  for (int k = 0; k < 20; ++k) {
    const Vec3 p(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
    const double x = p.x(), y = p.y(), z = p.z(), r2 = p.squaredNorm();
    CHECK(solid_harmonic(0, 0, p).value == doctest::Approx(1.0));
    CHECK(solid_harmonic(1, 0, p).value == doctest::Approx(z));
    CHECK(solid_harmonic(1, 1, p).value == doctest::Approx(x));
    CHECK(solid_harmonic(1, -1, p).value == doctest::Approx(y));
    CHECK(solid_harmonic(2, 0, p).value == doctest::Approx((3 * z * z - r2) / 2));
    CHECK(solid_harmonic(2, 1, p).value == doctest::Approx(3 * x * z));
    CHECK(solid_harmonic(2, -1, p).value == doctest::Approx(3 * y * z));
    CHECK(solid_harmonic(2, 2, p).value == doctest::Approx(3 * (x * x - y * y)));
    CHECK(solid_harmonic(2, -2, p).value == doctest::Approx(6 * x * y));
    CHECK((solid_harmonic(2, 0, p).gradient - Vec3(-x, -y, 2 * z)).norm() < 1e-13);
    CHECK((solid_harmonic(2, 2, p).gradient - Vec3(6 * x, -6 * y, 0)).norm() < 1e-13);
  }
}

TEST_CASE("eval_harmonic basics") {
  HarmonicSpec s;
  s.terms = {{1, 0, 1.0, 0.0}};
  const auto h = eval_harmonic(s, Vec3(0.1, 0.2, 0.3));
  CHECK(h.value == doctest::Approx(0.3));
  CHECK((h.gradient - Vec3::UnitZ()).norm() < 1e-15);
  s.terms = {{0, 0, 1.0, 0.0}};
  const auto c = eval_harmonic(s, Vec3(0.5, 0.1, 0.0));
  CHECK(c.value == 1.0);
  CHECK(c.gradient.norm() == 0.0);
  CHECK_THROWS_AS(eval_harmonic(s, Vec3(2, 0, 0)), Error);
  s.terms = {{9, 0, 1.0, 0.0}};
  bool resolvability = false;
  try {
    eval_harmonic(s, Vec3(0.1, 0, 0));
  } catch (const Error& e) {
    resolvability = e.kind() == ErrorKind::Resolvability;
  }
  CHECK(resolvability);
}

TEST_CASE("harmonic expansions are harmonic with exact gradients") {
  HarmonicSpec s;
  s.geometry = OracleGeometry::Shell3D;
  s.r1 = 0.5;
  s.r2 = 3.0;
  for (int l = 0; l <= 6; ++l)
    for (int m = -l; m <= l; m += 2) s.terms.push_back({l, m, uniform(-1, 1), uniform(-1, 1)});
  const double h = 1e-4;
  for (int k = 0; k < 50; ++k) {
    Vec3 p;
    do {
      p = Vec3(uniform(-2, 2), uniform(-2, 2), uniform(-2, 2));
    } while (p.norm() < 0.8 || p.norm() > 2.5);
    const auto f = [&](const Vec3& q) { return eval_harmonic(s, q).value; };
    double lap = -6 * f(p);
    Vec3 grad;
    for (int a = 0; a < 3; ++a) {
      const Vec3 e = Vec3::Unit(a) * h;
      lap += f(p + e) + f(p - e);
      grad[a] = (f(p + e) - f(p - e)) / (2 * h);
    }
    lap /= h * h;
    double scale = 0.0;
    for (const auto& t : s.terms) scale += (std::abs(t.a) + std::abs(t.b)) * std::pow(3.0, t.l) * 10;
    CHECK(std::abs(lap) < 1e-5 * scale);
    CHECK((grad - eval_harmonic(s, p).gradient).norm() < 1e-6 * scale);
  }
}

TEST_CASE("2D annulus harmonics") {
  HarmonicSpec s;
  s.geometry = OracleGeometry::Annulus2D;
  s.r1 = 1.0;
  s.r2 = 2.0;
  s.terms = {{1, 0, 0.2, 0.8}};
  const auto inner = eval_harmonic_2d(s, Vec2(1, 0));
  CHECK(inner.value == doctest::Approx(1.0));
  CHECK(inner.gradient.x() == doctest::Approx(-0.6));
  const auto outer = eval_harmonic_2d(s, Vec2(0, 2));
  CHECK(outer.gradient.y() == doctest::Approx(0.0));  // zero flux at r = 2
  CHECK(std::abs(outer.value) < 1e-15);
}

TEST_CASE("spherical harmonics are orthogonal on the meshed sphere") {
  const SurfaceMesh s = make_icosphere(1.0, 4);
  const Eigen::VectorXd& w = s.node_weights();
  std::vector<std::pair<int, int>> lm;
  for (int l = 0; l <= 4; ++l)
    for (int m = -l; m <= l; ++m) lm.push_back({l, m});
  for (std::size_t a = 0; a < lm.size(); ++a)
    for (std::size_t b = a + 1; b < lm.size(); ++b) {
      if (lm[a].first == lm[b].first) continue;
      double dot = 0, na = 0, nb = 0;
      for (int i = 0; i < s.vertex_count(); ++i) {
        const Vec3 p = s.vertices()[i].normalized();
        const double ya = solid_harmonic(lm[a].first, lm[a].second, p).value;
        const double yb = solid_harmonic(lm[b].first, lm[b].second, p).value;
        dot += w[i] * ya * yb;
        na += w[i] * ya * ya;
        nb += w[i] * yb * yb;
      }
      CHECK(std::abs(dot) / std::sqrt(na * nb) < 1e-3);
    }
}

TEST_CASE("synthetic steady dataset, degree one") {
  const SurfaceMesh heart = make_icosphere(1.0, 2, Vec3::Zero(), kHeartId);
  const SurfaceMesh torso = make_icosphere(2.0, 2, Vec3::Zero(), kTorsoId);
  const auto model = ConductivityModel::isotropic(12.0, 45.0, 7.0);
  const double U = 10.0;
  const SteadyDataset d = synth_bidomain_steady(heart, torso, 1.0, 2.0, model, {{1, 0, U, 0.0}}, 1.0);
  const double a = U / 5;
  REQUIRE(d.u_b.terms.size() == 1);
  CHECK(d.u_b.terms[0].a == doctest::Approx(a));
  CHECK(d.u_b.terms[0].b == doctest::Approx(4 * a));
  CHECK(d.transmission_residual < 1e-12);
  CHECK(d.flux_residual < 1e-12);
  CHECK(d.torso_flux_residual < 1e-12);
  CHECK(d.c == 0.0);
  for (int i = 0; i < heart.vertex_count(); i += 7) {
    const Vec3 p = heart.vertices()[i];
    CHECK(d.u_e.values[i] == doctest::Approx(U * p.z()));
    CHECK(d.heart_flux.values[i] == doctest::Approx(-7 * a * 7.0 * p.z()));
    CHECK(d.v.values[i] == d.u_i.values[i] - d.u_e.values[i]);
    CHECK(d.u_i_value(p) == doctest::Approx(d.u_i.values[i]));
    CHECK(d.u_e_value(p) == doctest::Approx(d.u_e.values[i]));
  }
  for (int i = 0; i < torso.vertex_count(); i += 5)
    CHECK(d.torso.values[i] == doctest::Approx(0.6 * U * torso.vertices()[i].z() / 2.0));
  // Proportional identity: u_i = -λu_e + 𝒩ᵢ(0, flux) + c, with 𝒩ᵢ(0, QY) = QR/(l m_i) Y.
  const double lambda = 45.0 / 12.0;
  for (int i = 0; i < heart.vertex_count(); i += 11) {
    const double z = heart.vertices()[i].z();
    CHECK(d.u_i.values[i] == doctest::Approx(-lambda * U * z + (-7 * a * 7.0) * z / 12.0));
  }
}

TEST_CASE("synthetic dataset interior fields satisfy the bidomain equations") {
  const SurfaceMesh heart = make_icosphere(1.0, 1, Vec3::Zero(), kHeartId);
  const SurfaceMesh torso = make_icosphere(2.0, 1, Vec3::Zero(), kTorsoId);
  const auto model = ConductivityModel::isotropic(12.0, 45.0, 7.0);
  const SteadyDataset d =
      synth_bidomain_steady(heart, torso, 1.0, 2.0, model, {{0, 0, 3.0, 0}, {1, 1, 2.0, 0}, {2, -1, 1.5, 0}}, 1.0);
  CHECK(d.c == doctest::Approx(-3.0));
  const double h = 1e-3;
  for (int k = 0; k < 10; ++k) {
    const Vec3 p(uniform(-0.5, 0.5), uniform(-0.5, 0.5), uniform(-0.5, 0.5));
    double lap_e = -6 * d.u_e_value(p), lap_i = -6 * d.u_i_value(p);
    for (int a = 0; a < 3; ++a) {
      const Vec3 e = Vec3::Unit(a) * h;
      lap_e += d.u_e_value(p + e) + d.u_e_value(p - e);
      lap_i += d.u_i_value(p + e) + d.u_i_value(p - e);
    }
    lap_e /= h * h;
    lap_i /= h * h;
    // Δ_i u_i + Δ_e u_e = 0 and Δ_e u_e = -m_e ∇²u_e.
    CHECK(12.0 * lap_i + 45.0 * lap_e == doctest::Approx(0.0).epsilon(1e-4).scale(45.0 * std::abs(lap_e) + 1));
    CHECK(-45.0 * lap_e == doctest::Approx(d.u_e_source(p)).epsilon(1e-5));
  }
  // Zero intracellular flux at the heart surface.
  const double hn = 1e-5;
  for (int i = 0; i < heart.vertex_count(); i += 3) {
    const Vec3 n = heart.vertices()[i].normalized();
    const Vec3 p = heart.vertices()[i];
    const double dr = (d.u_i_value(p + hn * n) - d.u_i_value(p - hn * n)) / (2 * hn);
    CHECK(std::abs(dr) < 1e-5);
  }
}

TEST_CASE("2D synthetic dataset") {
  const CurveMesh heart = make_circle(1.0, 64, Vec2::Zero(), kHeartId);
  const CurveMesh torso = make_circle(2.0, 64, Vec2::Zero(), kTorsoId);
  const SteadyDataset d = synth_bidomain_steady_2d(heart, torso, 1.0, 2.0, 12.0, 45.0, 7.0, {{1, 0, 1.0, 0}}, 1.0);
  CHECK(d.u_b.terms[0].a == doctest::Approx(0.2));
  CHECK(d.u_b.terms[0].b == doctest::Approx(0.8));
  CHECK(d.heart_flux.values[0] == doctest::Approx(7.0 * -0.6));
  CHECK(d.flux_residual < 1e-12);
  CHECK(d.torso_flux_residual < 1e-12);
}

TEST_CASE("rmse") {
  NodalField a{kHeartId, Eigen::VectorXd::LinSpaced(10, 0, 1)};
  CHECK(rmse(a, a) == 0.0);
  NodalField b = a;
  b.values.array() += 2.0;
  CHECK(rmse(b, a) == doctest::Approx(2.0));
  NodalField c{kHeartId, Eigen::VectorXd::Zero(3)};
  CHECK_THROWS_AS(rmse(a, c), Error);
}
