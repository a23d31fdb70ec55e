#include "bidomain/cauchy.hpp"
#include "bidomain/errors.hpp"
#include "bidomain/oracle.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace bidomain;

namespace {

struct Shell {
  SurfaceMesh heart, torso;
  Shell(int heart_level, int torso_level)
      : heart(make_icosphere(1.0, heart_level, Vec3::Zero(), kHeartId)),
        torso(make_icosphere(2.0, torso_level, Vec3::Zero(), kTorsoId)) {}
};

const Shell& shell() {
  static const Shell s(2, 3);
  return s;
}

const Shell& fine_shell() {
  static const Shell s(3, 4);
  return s;
}

// u = (a r + b/r²) z/r with zero flux at r = 2: b = 4a.
double oracle(const Vec3& p) { return (p.norm() + 4.0 / (p.norm() * p.norm())) * p.z() / p.norm(); }

NodalField sample(const SurfaceMesh& m) {
  NodalField f{m.surface_id(), Eigen::VectorXd(m.vertex_count())};
  for (int i = 0; i < m.vertex_count(); ++i) f.values[i] = oracle(m.vertices()[i]);
  return f;
}

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

void check_monotone(const CauchySolveReport& r) {
  for (std::size_t k = 1; k < r.alphas.size(); ++k) {
    // Increasing α: residual non-decreasing, seminorm non-increasing.
    CHECK(r.residual_norms[k] >= r.residual_norms[k - 1] - 1e-10 * r.residual_norms.back());
    CHECK(r.solution_norms[k] <= r.solution_norms[k - 1] + 1e-10 * r.solution_norms.front());
  }
}

}  // namespace

TEST_CASE("L-curve corner") {
  std::vector<LCurvePoint> pts;
  for (int k = 0; k <= 5; ++k) pts.push_back({0.0, 5.0 - k});
  for (int k = 1; k <= 5; ++k) pts.push_back({double(k), 0.0});
  CHECK(lcurve_corner(pts) == 5);

  std::vector<LCurvePoint> line;
  for (int k = 0; k < 10; ++k) line.push_back({double(k), -2.0 * k});
  CHECK_THROWS_WITH_AS(lcurve_corner(line), doctest::Contains("DegenerateLCurve"), Error);
  line.resize(5);
  CHECK_THROWS_AS(lcurve_corner(line), Error);

  // A right turn is not a corner.
  std::vector<LCurvePoint> convex;
  for (int k = 0; k < 10; ++k) convex.push_back({double(k), -double(k * k)});
  CHECK_THROWS_AS(lcurve_corner(convex), Error);

  // Equal curvature: the larger α wins.
  std::vector<LCurvePoint> two = {{0, 4}, {0, 3}, {0, 2}, {1, 2}, {2, 2}, {2, 1}, {2, 0}, {3, 0}, {4, 0}};
  CHECK(lcurve_corner(two) == 6);
}

TEST_CASE("Tikhonov config") {
  TikhonovConfig c;
  c.spectrum_range = false;
  const auto g = c.alpha_grid();
  CHECK(g.size() == 30);
  CHECK(g.front() == c.alpha_min);
  CHECK(g.back() == c.alpha_max);
  for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] > g[k - 1]);
  c.alpha_count = 5;
  CHECK_THROWS_AS(c.validate(), Error);
  c.selection = AlphaSelection::DiscrepancyPrinciple;
  CHECK_THROWS_AS(c.validate(), Error);
  c.noise_level = 0.01;
  CHECK_NOTHROW(c.validate());
  CHECK(parse_alpha_selection("lcurve") == AlphaSelection::LCurveMaxCurvature);
  CHECK(parse_penalty("surface-gradient") == PenaltyKind::SurfaceGradient);
  CHECK_THROWS_AS(parse_penalty("tv"), Error);
}

TEST_CASE("Cauchy problem on concentric spheres") {
  const auto& s = fine_shell();
  const Mat3 mb = 7.0 * Mat3::Identity();
  static const CauchySolver<SurfaceMesh> solver(mb, s.heart, s.torso, TikhonovConfig{});
  const NodalField f = sample(s.torso);
  const NodalField truth = sample(s.heart);

  SUBCASE("noise-free harmonic data") {
    const auto r = solver.solve(f);
    check_monotone(r);
    CHECK(rel(r.heart_dirichlet.values, truth.values) < 0.05);
    // flux m_b(a - 2b) z = -49 z at r = 1
    Eigen::VectorXd q(s.heart.vertex_count());
    for (int i = 0; i < q.size(); ++i) q[i] = -49.0 * s.heart.vertices()[i].normalized().z();
    // The heart flux is the forward image of the recovered trace; the
    // Dirichlet-to-Neumann map amplifies the trace error about tenfold.
    CHECK((r.heart_flux.values - solver.predict_flux(r.heart_dirichlet.values)).norm() <= 1e-12 * q.norm());
    CHECK(rel(r.heart_flux.values, q) < 0.5);
    CHECK(std::find(r.alphas.begin(), r.alphas.end(), r.chosen_alpha) != r.alphas.end());
  }
  SUBCASE("constant data") {
    NodalField c{kTorsoId, Eigen::VectorXd::Constant(s.torso.vertex_count(), 3.0)};
    const auto r = solver.solve(c, NodalField{kTorsoId, Eigen::VectorXd::Zero(s.torso.vertex_count())});
    CHECK((r.heart_dirichlet.values.array() - 3.0).abs().maxCoeff() < 0.03);
    CHECK(r.heart_flux.values.cwiseAbs().maxCoeff() < 1e-2 * 7.0 * 3.0);
  }
  SUBCASE("zero data gives exactly zero") {
    NodalField z{kTorsoId, Eigen::VectorXd::Zero(s.torso.vertex_count())};
    const auto r = solver.solve(z);
    CHECK(r.heart_dirichlet.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.heart_flux.values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("noisy data") {
    NodalField noisy = f;
    noisy.values = add_gaussian_noise(f.values, 0.01, 7);
    const auto r = solver.solve(noisy);
    check_monotone(r);
    CHECK_FALSE(r.lcurve_fallback);
    CHECK(rel(r.heart_dirichlet.values, truth.values) < 0.15);
    // L-curve α against the exhaustive error scan
    const Eigen::MatrixXd all = solver.sweep(noisy);
    int best = 0;
    for (int k = 1; k < all.cols(); ++k)
      if (rel(all.col(k), truth.values) < rel(all.col(best), truth.values)) best = k;
    MESSAGE("chosen index " << r.chosen_index << ", error-optimal index " << best);
    CHECK(std::abs(r.chosen_index - best) <= 1);
  }
  SUBCASE("error decreases with the noise level") {
    double previous = 1e300;
    for (double level : {1e-2, 1e-3, 1e-4}) {
      NodalField noisy = f;
      noisy.values = add_gaussian_noise(f.values, level, 11);
      const double e = rel(solver.solve(noisy).heart_dirichlet.values, truth.values);
      CHECK(e < previous);
      previous = e;
    }
  }
  SUBCASE("known torso flux is honoured") {
    // Data of u = z (nonzero torso flux z/r·... = ν·M_b∇z).
    NodalField fz{kTorsoId, Eigen::VectorXd(s.torso.vertex_count())};
    NodalField gz{kTorsoId, Eigen::VectorXd(s.torso.vertex_count())};
    for (int i = 0; i < s.torso.vertex_count(); ++i) {
      fz.values[i] = s.torso.vertices()[i].z();
      gz.values[i] = 7.0 * s.torso.vertices()[i].normalized().z();
    }
    const auto r = solver.solve(fz, gz);
    Eigen::VectorXd z(s.heart.vertex_count());
    for (int i = 0; i < z.size(); ++i) z[i] = s.heart.vertices()[i].z();
    CHECK(rel(r.heart_dirichlet.values, z) < 0.1);
    CHECK(rel(solver.solve(fz).heart_dirichlet.values, z) > 0.3);
  }
}

TEST_CASE("selection rules and penalties") {
  const auto& s = shell();
  const Mat3 mb = 7.0 * Mat3::Identity();
  const NodalField f = sample(s.torso);
  const NodalField truth = sample(s.heart);
  NodalField noisy = f;
  noisy.values = add_gaussian_noise(f.values, 0.01, 3);

  TikhonovConfig ident;
  ident.penalty = PenaltyKind::Identity;
  ident.selection = AlphaSelection::FixedAlpha;
  ident.fixed_alpha = 1e-5;
  const auto ri = CauchySolver<SurfaceMesh>(mb, s.heart, s.torso, ident).solve(f);
  check_monotone(ri);
  CHECK(rel(ri.heart_dirichlet.values, truth.values) < 0.05);

  TikhonovConfig fixed;
  fixed.selection = AlphaSelection::FixedAlpha;
  fixed.fixed_alpha = 1.1e-4;
  const auto rf = CauchySolver<SurfaceMesh>(mb, s.heart, s.torso, fixed).solve(noisy);
  CHECK(std::abs(std::log10(rf.chosen_alpha) + 4.0) < 0.2);

  TikhonovConfig disc;
  disc.selection = AlphaSelection::DiscrepancyPrinciple;
  disc.noise_level = 0.01;
  const auto rd = CauchySolver<SurfaceMesh>(mb, s.heart, s.torso, disc).solve(noisy);
  check_monotone(rd);
  CHECK(rel(rd.heart_dirichlet.values, truth.values) < 0.2);

  TikhonovConfig grad;
  grad.spectrum_range = false;
  grad.alpha_min = 1e-14;
  grad.alpha_max = 1e-4;
  const CauchySolver<SurfaceMesh> gsolver(mb, s.heart, s.torso, grad);
  const auto rg = gsolver.solve(noisy);
  check_monotone(rg);
  CHECK(rel(rg.heart_dirichlet.values, truth.values) < 0.15);

  const auto path = testutil::scratch_dir("cauchy") / "lcurve.csv";
  write_lcurve_csv(rg, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "alpha,residual_norm,solution_norm");
}

TEST_CASE("per-frame and global selection") {
  const auto& s = shell();
  TikhonovConfig cfg;
  const CauchySolver<SurfaceMesh> solver(7.0 * Mat3::Identity(), s.heart, s.torso, cfg);
  const NodalField f = sample(s.torso);
  Eigen::MatrixXd frames(f.values.size(), 3);
  frames.col(0) = f.values;
  frames.col(1) = add_gaussian_noise(f.values, 0.01, 1);
  frames.col(2) = 0.5 * f.values;
  const auto per = solver.solve_frames(frames);
  REQUIRE(per.size() == 3);
  const auto single = solver.solve(NodalField{kTorsoId, frames.col(1)});
  CHECK(per[1].chosen_alpha == single.chosen_alpha);
  CHECK((per[1].heart_dirichlet.values - single.heart_dirichlet.values).norm() == 0.0);
  cfg.global_alpha = true;
  const CauchySolver<SurfaceMesh> gsolver(7.0 * Mat3::Identity(), s.heart, s.torso, cfg);
  const auto glob = gsolver.solve_frames(frames);
  CHECK(glob[0].chosen_alpha == glob[1].chosen_alpha);
  CHECK(glob[1].chosen_alpha == glob[2].chosen_alpha);
}

TEST_CASE("Cauchy problem on an annulus") {
  const CurveMesh heart = make_circle(1.0, 128, Vec2::Zero(), kHeartId);
  const CurveMesh torso = make_circle(2.0, 128, Vec2::Zero(), kTorsoId);
  const CauchySolver<CurveMesh> solver(Mat2(Mat2::Identity()), heart, torso, TikhonovConfig{});
  // (0.2r + 0.8/r) cos θ
  NodalField f{kTorsoId, Eigen::VectorXd(torso.vertex_count())};
  for (int i = 0; i < f.values.size(); ++i) f.values[i] = 0.4 * torso.vertices()[i].x();
  const auto r = solver.solve(f);
  Eigen::VectorXd truth(heart.vertex_count());
  for (int i = 0; i < truth.size(); ++i) truth[i] = heart.vertices()[i].x();
  CHECK(rel(r.heart_dirichlet.values, truth) < 0.05);
  check_monotone(r);
}
