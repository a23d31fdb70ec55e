#include "bidomain/errors.hpp"
#include "bidomain/oracle.hpp"
#include "bidomain/reconstruction.hpp"

#include <doctest.h>

#include <cmath>

using namespace bidomain;

namespace {

const DomainConfig& spheres() {
  static const DomainConfig d{make_icosphere(1.0, 3, Vec3::Zero(), kHeartId),
                              make_icosphere(2.0, 3, Vec3::Zero(), kTorsoId)};
  return d;
}

const ConductivityModel kModel = ConductivityModel::isotropic(12.0, 45.0, 7.0);

const std::vector<HarmonicTerm> kTerms = {{0, 0, 2.0, 0}, {1, 0, 10.0, 0}, {1, 1, -4.0, 0}, {2, -1, 6.0, 0}};

double range(const Eigen::VectorXd& v) { return v.maxCoeff() - v.minCoeff(); }
double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

NodalField on(const SurfaceMesh& m, const std::function<double(const Vec3&)>& f) {
  NodalField out{m.surface_id(), Eigen::VectorXd(m.vertex_count())};
  for (int i = 0; i < m.vertex_count(); ++i) out.values[i] = f(m.vertices()[i]);
  return out;
}

}  // namespace

TEST_CASE("calibration constant") {
  const auto& h = spheres().heart;
  CHECK(calibration_constant(on(h, [](const Vec3&) { return 1.0; }), 1.0, h) == doctest::Approx(-1.0));
  CHECK(calibration_constant(on(h, [](const Vec3& p) { return p.x() + 3; }), 0.0, h) == 0.0);
  CHECK(std::abs(calibration_constant(on(h, [](const Vec3& p) { return p.z(); }), 1.0, h)) < 1e-3);
}

TEST_CASE("proportionality factor") {
  CHECK(proportionality_factor(kModel) == doctest::Approx(3.75));
  ConductivityModel m;
  m.M_i = Mat3(Eigen::Vector3d(1, 2, 3).asDiagonal());
  m.M_e = 2.0 * m.M_i;
  CHECK(proportionality_factor(m) == doctest::Approx(2.0));
  m.M_e(0, 0) = 5.0;
  CHECK_THROWS_AS(proportionality_factor(m), Error);
}

TEST_CASE("proportional formula") {
  const auto& h = spheres().heart;
  const NodalField zero = on(h, [](const Vec3&) { return 0.0; });
  SUBCASE("vanishing flux") {
    const NodalField ue = on(h, [](const Vec3& p) { return 1.0 + p.x() * p.y(); });
    const auto out = reconstruct_ui_proportional(h, ue, zero, kModel, 1.0);
    const double mean = surface_mean(h, ue.values);
    CHECK(out.c == doctest::Approx(-mean));
    const Eigen::VectorXd expected = (-3.75 * (ue.values.array() - mean) + out.c).matrix();
    CHECK((out.u_i.values - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out.v.values - (out.u_i.values - ue.values)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.diagnostics.calibration_residual <= 1e-8 * h.total_area() * 3.0);
  }
  SUBCASE("null input gives zero") {
    const auto out = reconstruct_ui_proportional(h, zero, zero, kModel, 1.0);
    CHECK(out.u_i.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.c == 0.0);
  }
  SUBCASE("non-conservative flux is rejected") {
    CHECK_THROWS_AS(reconstruct_ui_proportional(h, zero, on(h, [](const Vec3&) { return 1.0; }), kModel, 1.0), Error);
  }
  SUBCASE("forward data round trip") {
    const auto d = synth_bidomain_steady(h, spheres().torso, 1.0, 2.0, kModel, kTerms, 1.0);
    const auto out = reconstruct_ui_proportional(h, d.u_e, d.heart_flux, kModel, 1.0);
    CHECK(rel(out.u_i.values, d.u_i.values) < 0.03);
    CHECK(out.c == doctest::Approx(d.c));
  }
}

TEST_CASE("grid Laplacian") {
  const SurfaceMesh ball = make_icosphere(1.0, 3);
  const Mat3 m = (Mat3() << 2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5).finished();
  const auto q = [](const Vec3& p) { return p.x() * p.x() + 2 * p.x() * p.y() - p.z() * p.z() + p.y(); };
  const GridField u = sample_grid_field(ball, 0.1, q);
  const Eigen::VectorXd lap = grid_operator_apply(m, u);
  // -(2 m00 + 4 m01 - 2 m22)
  const double exact = -(2 * 2.0 + 4 * 0.3 - 2 * 1.5);
  CHECK((lap.array() - exact).abs().maxCoeff() < 1e-9);
  CHECK(inside_quadrature(u).volume() == doctest::Approx(4.0 * M_PI / 3.0).epsilon(0.05));

  // One missing neighbour switches to a one-sided stencil.
  GridField holed = u;
  int probe = 0;
  while (!holed.inside[probe]) ++probe;
  holed.values[probe - 1] = std::nan("");
  const Eigen::VectorXd one_sided = grid_operator_apply(Mat3::Identity(), holed);
  CHECK((one_sided.array() + 0.0).abs().maxCoeff() < 1e-8);

  const GridField bare = sample_grid_field(ball, 0.1, q, 0);
  CHECK_THROWS_WITH_AS(grid_operator_apply(m, bare), doctest::Contains("MissingInteriorData"), Error);
}

TEST_CASE("general route") {
  const auto& dom = spheres();
  SUBCASE("harmonic u_e gives a constant") {
    const auto f = [](const Vec3& p) { return 2.0 + p.z(); };
    const GridField g = sample_grid_field(dom.heart, 0.1, f);
    const auto r = reconstruct_ui_general(dom.heart, on(dom.heart, f), g, kModel.M_i, kModel.M_e, 1.0);
    CHECK(r.c == doctest::Approx(-2.0).epsilon(1e-3));
    CHECK((r.u_i.values.array() - r.c).abs().maxCoeff() < 1e-8);
  }
  SUBCASE("agrees with the proportional formula") {
    const auto d = synth_bidomain_steady(dom.heart, dom.torso, 1.0, 2.0, kModel, kTerms, 1.0);
    const GridField g = sample_grid_field(dom.heart, 0.05, [&](const Vec3& p) { return d.u_e_value(p); });
    const auto r = reconstruct_ui_general(dom.heart, d.u_e, g, kModel.M_i, kModel.M_e, 1.0);
    const auto p = reconstruct_ui_proportional(dom.heart, d.u_e, d.heart_flux, kModel, 1.0);
    MESSAGE("general vs proportional " << rel(r.u_i.values, p.u_i.values) << ", vs truth "
                                       << rel(r.u_i.values, d.u_i.values));
    CHECK(rel(r.u_i.values, p.u_i.values) < 0.02);
  }
}

TEST_CASE("first protocol") {
  const auto& dom = spheres();
  SUBCASE("spheres") {
    const auto d = synth_bidomain_steady(dom.heart, dom.torso, 1.0, 2.0, kModel, kTerms, 1.0);
    const auto out = run_protocol_1(dom, kModel, d.u_e, 1.0);
    CHECK(rmse(out.v, d.v) <= 0.05 * range(d.v.values));
    CHECK(out.diagnostics.conservation_residual <= 1e-3);
    CHECK(out.lambda == doctest::Approx(3.75));
  }
  SUBCASE("zero input") {
    const auto out = run_protocol_1(dom, kModel, on(dom.heart, [](const Vec3&) { return 0.0; }), 1.0);
    CHECK(out.v.values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("annulus") {
    const CurveMesh heart = make_circle(1.0, 200, Vec2::Zero(), kHeartId);
    const CurveMesh torso = make_circle(2.0, 200, Vec2::Zero(), kTorsoId);
    const auto d = synth_bidomain_steady_2d(heart, torso, 1.0, 2.0, 12, 45, 7, {{0, 0, 1.0, 0}, {1, 0, 3.0, 0}, {2, -1, 1.0, 0}}, 1.0);
    const auto out = run_protocol_1(heart, torso, 12, 45, 7, d.u_e, 1.0);
    CHECK(rel(out.v.values, d.v.values) < 0.05);
  }
}

TEST_CASE("second protocol") {
  const auto& dom = spheres();
  const auto d = synth_bidomain_steady(dom.heart, dom.torso, 1.0, 2.0, kModel, kTerms, 1.0);
  TikhonovConfig cfg;
  SUBCASE("noise-free") {
    const auto out = run_protocol_2(dom, kModel, d.torso, cfg, 1.0);
    MESSAGE("p2 rmse/range " << rmse(out.v, d.v) / range(d.v.values));
    CHECK(rmse(out.v, d.v) <= 0.10 * range(d.v.values));
    REQUIRE(out.diagnostics.alpha.has_value());
  }
  SUBCASE("noisy") {
    NodalField f = d.torso;
    f.values = add_gaussian_noise(f.values, 0.01, 7);
    const auto out = run_protocol_2(dom, kModel, f, cfg, 1.0);
    MESSAGE("p2 noisy rmse/range " << rmse(out.v, d.v) / range(d.v.values));
    CHECK(rmse(out.v, d.v) <= 0.20 * range(d.v.values));
  }
  SUBCASE("constant data") {
    const NodalField f{kTorsoId, Eigen::VectorXd::Constant(dom.torso.vertex_count(), 5.0)};
    const auto out = run_protocol_2(dom, kModel, f, cfg, 1.0);
    const double mean = out.v.values.mean();
    CHECK((out.v.values.array() - mean).abs().maxCoeff() <= 0.02 * std::abs(mean));
  }
}

TEST_CASE("null-space elements") {
  const auto& dom = spheres();
  const CubicBump bump{Vec3(0.1, -0.2, 0.15), 0.5, 2.0};
  SUBCASE("proportional") {
    const auto e = generate_nullspace_element(dom, kModel, bump, true, 0.05);
    CHECK((e.u_i.values + 3.75 * e.u_e.values).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(e.c) <= 1e-10);
    CHECK(e.trace_max <= 1e-10 * e.interior_max);
    CHECK(e.interior_max == doctest::Approx(2.0).epsilon(0.05));
    CHECK(e.predicted_torso.cwiseAbs().maxCoeff() <= 1e-3 * bump.amplitude);
    CHECK(e.torso.values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("general route") {
    ConductivityModel aniso = kModel;
    aniso.lambda.reset();
    aniso.M_e = Mat3(Eigen::Vector3d(45.0, 30.0, 20.0).asDiagonal());
    const auto e = generate_nullspace_element(dom, aniso, bump, false, 0.05);
    REQUIRE(e.neumann.has_value());
    CHECK(e.neumann->flux_trace->values.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(e.neumann->normalization_value) < 1e-8);
    CHECK(e.predicted_torso.cwiseAbs().maxCoeff() <= 1e-3 * bump.amplitude);
    CHECK(e.u_i.values.cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("support must stay inside") {
    CHECK_THROWS_WITH_AS(generate_nullspace_element(dom, kModel, CubicBump{Vec3(0.6, 0, 0), 0.5, 1.0}, true, 0.05),
                         doctest::Contains("SupportTouchesBoundary"), Error);
  }
  SUBCASE("surface reconstruction ignores null-space elements") {
    const auto d = synth_bidomain_steady(dom.heart, dom.torso, 1.0, 2.0, kModel, kTerms, 1.0);
    const auto e = generate_nullspace_element(dom, kModel, bump, true, 0.1);
    NodalField shifted = d.u_e;
    shifted.values += e.u_e.values;
    const auto a = run_protocol_1(dom, kModel, d.u_e, 1.0);
    const auto b = run_protocol_1(dom, kModel, shifted, 1.0);
    CHECK((a.v.values - b.v.values).cwiseAbs().maxCoeff() <= 1e-10);
  }
}
