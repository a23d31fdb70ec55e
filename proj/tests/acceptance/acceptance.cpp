// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "bidomain/cauchy.hpp"
#include "bidomain/errors.hpp"
#include "bidomain/oracle.hpp"
#include "bidomain/parabolic.hpp"
#include "bidomain/reconstruction.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

using namespace bidomain;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

NodalField on_nodes(const SurfaceMesh& m, const std::function<double(const Vec3&)>& f) {
  NodalField out{m.surface_id(), Eigen::VectorXd(m.vertex_count())};
  for (int i = 0; i < m.vertex_count(); ++i) out.values[i] = f(m.vertices()[i]);
  return out;
}

double rel_l2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

double span(const NodalField& f) { return f.values.maxCoeff() - f.values.minCoeff(); }

const std::vector<HarmonicTerm> kTerms = {{0, 0, 2.0, 0.0}, {1, 0, 10.0, 0.0}, {1, 1, -4.0, 0.0}, {2, -1, 6.0, 0.0}};

// ---------------------------------------------------------------------------

Outcome green_representation_sphere() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const SurfaceMesh ball = make_icosphere(1.0, 4);
  const auto normals = ball.vertex_normals();
  const NodalField u = on_nodes(ball, [](const Vec3& p) { return p.z(); });
  NodalField q = u;
  for (int i = 0; i < ball.vertex_count(); ++i) q.values[i] = normals[i].z();
  double interior = 0.0, exterior = 0.0;
  for (const Vec3& x : {Vec3(0, 0, 0.5), Vec3(0.3, -0.2, 0.1), Vec3(-0.1, 0.4, -0.6), Vec3(0.2, 0.2, 0.8),
                        Vec3(0, 0, -0.3)}) {
    const double v = green_representation(Mat3::Identity(), ball, u, q, std::nullopt, x);
    interior = std::max(interior, std::abs(v - x.z()) / std::abs(x.z()));
  }
  for (const Vec3& x : {Vec3(0, 0, 1.5), Vec3(2, 1, 0), Vec3(-1.2, 0.3, 0.9)})
    exterior = std::max(exterior, std::abs(green_representation(Mat3::Identity(), ball, u, q, std::nullopt, x)));
  const double elapsed = seconds_since(t0);
  o.require(ball.triangle_count() == 5120, std::to_string(ball.triangle_count()) + " faces");
  o.require(interior <= 1e-2, "interior rel " + num(interior));
  o.require(exterior <= 1e-2, "exterior " + num(exterior));
  o.require(elapsed < 60.0, "time " + num(elapsed) + " s");
  return o;
}

Outcome neumann_solver() {
  Outcome o;
  const SurfaceMesh s = make_icosphere(1.0, 3);
  const double m = 3.0;
  const Mat3 mt = m * Mat3::Identity();
  const NodalField bad = on_nodes(s, [](const Vec3& p) { return p.z() + 0.1; });
  const double defect = s.node_weights().dot(bad.values);
  bool detected = false;
  try {
    solve_neumann_normalized(mt, s, bad, std::nullopt, {}, NeumannOptions{1e-3, false});
  } catch (const Error& e) {
    detected = e.kind() == ErrorKind::IncompatibleData;
  }
  const auto projected = solve_neumann_normalized(mt, s, bad, std::nullopt, {}, NeumannOptions{1e-3, true});
  const double reported = projected.report.compatibility_defect;
  o.require(detected, "violating flux rejected");
  o.require(std::abs(reported - defect) <= 1e-12 * std::abs(defect), "defect " + num(reported) + " vs " + num(defect));

  const NodalField flux = on_nodes(s, [&](const Vec3& p) { return m * p.normalized().z(); });
  const auto r = solve_neumann_normalized(mt, s, flux, std::nullopt, {});
  const NodalField z = on_nodes(s, [](const Vec3& p) { return p.z(); });
  const double steklov = rel_l2(r.report.solution_trace->values, z.values);
  o.require(steklov <= 0.02, "degree-1 Steklov rel " + num(steklov));
  o.require(std::abs(r.report.normalization_value) <= 1e-8, "normalization " + num(r.report.normalization_value));
  return o;
}

Outcome zaremba_step() {
  Outcome o;
  const SurfaceMesh heart = make_icosphere(1.0, 3, Vec3::Zero(), kHeartId);
  const SurfaceMesh torso = make_icosphere(2.0, 3, Vec3::Zero(), kTorsoId);
  const double mb = 7.0;
  const auto r = solve_zaremba(mb * Mat3::Identity(), heart, torso, on_nodes(heart, [](const Vec3& p) { return p.z(); }));
  // u = a(r + 4/r²)z/r with a = 1/5: radial derivative at r = 1 is -1.4 z.
  const NodalField oracle = on_nodes(heart, [&](const Vec3& p) { return -1.4 * mb * p.normalized().z(); });
  const double err = rel_l2(r.heart_flux.values, oracle.values);
  o.require(err <= 0.03, "flux rel " + num(err));
  o.require(r.conservation_residual <= 1e-3, "conservation " + num(r.conservation_residual));
  return o;
}

Outcome nullspace_certification() {
  Outcome o;
  const DomainConfig dom{make_icosphere(1.0, 3, Vec3::Zero(), kHeartId), make_icosphere(2.0, 3, Vec3::Zero(), kTorsoId)};
  const ConductivityModel model = ConductivityModel::isotropic(12.0, 45.0, 7.0);
  const std::vector<CubicBump> bumps = {
      {Vec3(0.2, -0.1, 0.3), 0.3, 5.0}, {Vec3::Zero(), 0.5, 1.0}, {Vec3(0.05, 0.1, -0.1), 0.75, 20.0}};
  double torso = 0.0, identity = 0.0, c = 0.0;
  for (const CubicBump& b : bumps) {
    const NullSpaceElement e = generate_nullspace_element(dom, model, b, true, 0.05);
    torso = std::max(torso, e.predicted_torso.cwiseAbs().maxCoeff() / b.amplitude);
    identity = std::max(identity, (e.u_i.values + e.lambda * e.u_e.values).cwiseAbs().maxCoeff());
    c = std::max(c, std::abs(e.c));
  }
  o.require(torso <= 1e-3, "torso sup/amplitude " + num(torso));
  o.require(identity <= 1e-12, "u_i + lambda u " + num(identity));
  o.require(c <= 1e-10, "|c| " + num(c));
  return o;
}

Outcome protocol_1_round_trip() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const DomainConfig dom{make_icosphere(1.0, 4, Vec3::Zero(), kHeartId), make_icosphere(2.0, 4, Vec3::Zero(), kTorsoId)};
  const ConductivityModel model = ConductivityModel::isotropic(12.0, 45.0, 7.0);
  const SteadyDataset d = synth_bidomain_steady(dom.heart, dom.torso, 1.0, 2.0, model, kTerms, 1.0);
  const ReconstructionOutput out = run_protocol_1(dom, model, d.u_e, 1.0);
  const double elapsed = seconds_since(t0);
  const double err = rmse(out.v, d.v) / span(d.v);
  o.require(d.lambda == 3.75, "lambda " + num(d.lambda));
  o.require(dom.heart.vertex_count() <= 2562 && dom.torso.vertex_count() <= 2562,
            std::to_string(dom.heart.vertex_count()) + " nodes per surface");
  o.require(err <= 0.05, "rmse/range " + num(err));
  o.require(elapsed < 120.0, "time " + num(elapsed) + " s");
  return o;
}

std::vector<CauchySolveReport> g_cauchy_reports;  // every solve, for the monotonicity check

Outcome protocol_2_round_trip() {
  Outcome o;
  const DomainConfig dom{make_icosphere(1.0, 3, Vec3::Zero(), kHeartId), make_icosphere(2.0, 3, Vec3::Zero(), kTorsoId)};
  const ConductivityModel model = ConductivityModel::isotropic(12.0, 45.0, 7.0);
  const SteadyDataset d = synth_bidomain_steady(dom.heart, dom.torso, 1.0, 2.0, model, kTerms, 1.0);
  const TikhonovConfig tik;
  const CauchySolver<SurfaceMesh> cauchy(model.M_b, dom.heart, dom.torso, tik);
  const ProportionalReconstructor<SurfaceMesh> rec(model.M_i, proportionality_factor(model), dom.heart);
  const double range = span(d.v);
  auto v_error = [&](const Eigen::VectorXd& heart_u, const Eigen::VectorXd& heart_q) {
    const auto out = rec.reconstruct(NodalField{kHeartId, heart_u}, NodalField{kHeartId, heart_q, "mV/cm"}, 1.0);
    return rmse(out.v, d.v) / range;
  };

  const CauchySolveReport clean = cauchy.solve(d.torso);
  g_cauchy_reports.push_back(clean);
  const double e_clean = v_error(clean.heart_dirichlet.values, clean.heart_flux.values);
  o.require(e_clean <= 0.10, "noise-free rmse/range " + num(e_clean));

  NodalField noisy = d.torso;
  noisy.values = add_gaussian_noise(d.torso.values, 0.01, 7);
  const CauchySolveReport rn = cauchy.solve(noisy);
  g_cauchy_reports.push_back(rn);
  const double e_noisy = v_error(rn.heart_dirichlet.values, rn.heart_flux.values);
  o.require(e_noisy <= 0.20, "1% noise rmse/range " + num(e_noisy));

  // Error-optimal α over the noise-free sweep.
  const Eigen::MatrixXd sweep = cauchy.sweep(d.torso);
  int best = 0;
  double best_err = 1e300;
  for (int k = 0; k < sweep.cols(); ++k) {
    const double e = v_error(sweep.col(k), cauchy.predict_flux(sweep.col(k)));
    if (e < best_err) best_err = e, best = k;
  }
  o.require(std::abs(clean.chosen_index - best) <= 1,
            "L-curve index " + std::to_string(clean.chosen_index) + " vs error-optimal " + std::to_string(best) +
                " (rmse/range " + num(e_clean) + " vs " + num(best_err) + ")");

  // Extra solves feeding the monotonicity criterion.
  for (double level : {1e-3, 3e-2}) {
    NodalField f = d.torso;
    f.values = add_gaussian_noise(d.torso.values, level, 11);
    g_cauchy_reports.push_back(cauchy.solve(f));
  }
  TikhonovConfig ident = tik;
  ident.penalty = PenaltyKind::Identity;
  g_cauchy_reports.push_back(CauchySolver<SurfaceMesh>(model.M_b, dom.heart, dom.torso, ident).solve(noisy));
  return o;
}

Outcome tikhonov_monotonicity() {
  Outcome o;
  int violations = 0, pairs = 0;
  for (const CauchySolveReport& r : g_cauchy_reports) {
    // Walking towards smaller α.
    for (std::size_t k = r.alphas.size() - 1; k-- > 0;) {
      ++pairs;
      if (r.residual_norms[k] > r.residual_norms[k + 1] * (1 + 1e-12) + 1e-14) ++violations;
      if (r.solution_norms[k] < r.solution_norms[k + 1] * (1 - 1e-12) - 1e-14) ++violations;
    }
  }
  o.require(!g_cauchy_reports.empty(), std::to_string(g_cauchy_reports.size()) + " solves");
  o.require(violations == 0, std::to_string(violations) + " violations over " + std::to_string(pairs) + " steps");
  return o;
}

SpaceTimeField on_surface(const SurfaceMesh& s, const TimeGrid& g, const std::function<double(const Vec3&, double)>& f) {
  SpaceTimeField out{s.surface_id(), Eigen::MatrixXd(s.vertex_count(), g.frames()), g};
  for (int k = 0; k < g.frames(); ++k)
    for (int i = 0; i < s.vertex_count(); ++i) out.values(i, k) = f(s.vertices()[i], g.time(k));
  return out;
}

// |x|² + 6t on the unit ball, reconstructed at (x, 0.5).
double caloric_value(int level, int steps, const Vec3& x) {
  const SurfaceMesh ball = make_icosphere(1.0, level);
  const TimeGrid g{0.5, steps};
  const auto trace = on_surface(ball, g, [](const Vec3& y, double t) { return y.squaredNorm() + 6 * t; });
  SpaceTimeField flux = trace;
  const auto normals = ball.vertex_normals();
  for (int i = 0; i < ball.vertex_count(); ++i) flux.values.row(i).setConstant(2.0 * ball.vertices()[i].dot(normals[i]));
  const VolumeQuadrature q = star_quadrature(ball, Vec3::Zero(), 8);
  VolumeSource u0{q, Eigen::VectorXd(q.size())};
  for (int j = 0; j < q.size(); ++j) u0.values[j] = q.points[j].squaredNorm();
  return parabolic_green_reconstruct(HeatOperatorSpec{}, ball, trace, flux, u0, std::nullopt, x, 0.5);
}

Outcome parabolic_green_identity() {
  Outcome o;
  const double inside = caloric_value(3, 6, Vec3::Zero());
  const double outside = caloric_value(3, 6, Vec3(0, 0, 1.6));
  o.require(std::abs(inside - 3.0) <= 0.02 * 3.0, "interior " + num(inside));
  o.require(std::abs(outside) <= 0.02 * 3.0, "exterior " + num(outside));
  const double coarse = std::abs(caloric_value(2, 3, Vec3::Zero()) - 3.0);
  const double fine = std::abs(caloric_value(3, 5, Vec3::Zero()) - 3.0);
  o.require(fine < coarse, "refinement " + num(coarse) + " -> " + num(fine));
  return o;
}

Outcome heat_kernel_properties() {
  Outcome o;
  HeatOperatorSpec iso;
  HeatOperatorSpec aniso;
  aniso.M << 2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.7;
  aniso.scale = 0.8;
  aniso.a = Vec3(0.3, -0.2, 0.5);
  aniso.a0 = 0.7;

  bool causal = true;
  for (const HeatOperatorSpec& spec : {iso, aniso})
    for (double t : {0.0, 0.3, 1.0})
      for (double dtau : {0.0, 0.1, 2.0})
        causal = causal && heat_kernel(spec, Vec3(0.1, 0.2, -0.1), Vec3::Zero(), t, t + dtau) == 0.0;
  o.require(causal, "zero for t <= tau");

  double mass_err = 0.0;
  for (HeatOperatorSpec spec : {iso, aniso}) {
    spec.a0 = 0.0;  // reaction removes mass at rate a0
    const HeatKernel k(spec);
    const double s = 0.3;
    const double lmax = Eigen::SelfAdjointEigenSolver<Mat3>(spec.scale * spec.M).eigenvalues().maxCoeff();
    const double sigma = std::sqrt(2 * s * lmax);
    const Vec3 mid = spec.a * s;
    const VolumeQuadrature box =
        box_quadrature(mid - Vec3::Constant(7 * sigma), mid + Vec3::Constant(7 * sigma), sigma / 5);
    double mass = 0.0;
    for (int j = 0; j < box.size(); ++j) mass += box.weights[j] * k.value(box.points[j], Vec3::Zero(), s);
    mass_err = std::max(mass_err, std::abs(mass - 1.0));
  }
  o.require(mass_err <= 1e-6, "mass error " + num(mass_err));

  double worst = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  for (const HeatOperatorSpec& spec : {iso, aniso}) {
    const HeatKernel k(spec);
    const Vec3 y(0.1, -0.2, 0.05);
    const double h = 1e-4;
    for (int trial = 0; trial < 5; ++trial) {
      const Vec3 x = y + Vec3(unif(rng), unif(rng), unif(rng));
      const double s = 0.2 + 0.16 * trial;
      auto f = [&](const Vec3& p, double t) { return k.value(p, y, t); };
      const double dt = (f(x, s + h) - f(x, s - h)) / (2 * h);
      Mat3 hess;
      Vec3 grad;
      for (int a = 0; a < 3; ++a) {
        const Vec3 ea = Vec3::Unit(a) * h;
        grad[a] = (f(x + ea, s) - f(x - ea, s)) / (2 * h);
        for (int b = 0; b < 3; ++b) {
          const Vec3 eb = Vec3::Unit(b) * h;
          hess(a, b) = (f(x + ea + eb, s) - f(x + ea - eb, s) - f(x - ea + eb, s) + f(x - ea - eb, s)) / (4 * h * h);
        }
      }
      const double div = k.effective_tensor().cwiseProduct(hess).sum();
      const double residual = dt - div + spec.a.dot(grad) + spec.a0 * f(x, s);
      const double scale = std::abs(dt) + std::abs(div) + std::abs(spec.a.dot(grad)) + std::abs(spec.a0 * f(x, s));
      worst = std::max(worst, std::abs(residual) / scale);
    }
  }
  o.require(worst < 1e-5, "PDE residual " + num(worst));
  return o;
}

Outcome evolution_rhs() {
  Outcome o;
  const SurfaceMesh heart = make_icosphere(1.0, 3, Vec3::Zero(), kHeartId);
  const ConductivityModel model = ConductivityModel::isotropic(12.0, 45.0, 7.0);
  const TimeGrid g{4.0, 9};
  const std::vector<Vec3> points = {Vec3(0.1, 0.2, 0.3), Vec3(-0.4, 0.0, 0.1), Vec3(0.0, 0.0, -0.6)};
  CableParameters cable;
  cable.membrane_capacitance = 2.0;
  cable.a = Vec3(0.3, -0.2, 0.1);
  cable.a0 = 0.7;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  auto random_matrix = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int k = 0; k < cols; ++k)
      for (int i = 0; i < rows; ++i) m(i, k) = nd(rng);
    return m;
  };
  auto random_flux = [&] {
    SpaceTimeField f{kHeartId, random_matrix(heart.vertex_count(), 9), g, "mV/cm"};
    for (int k = 0; k < 9; ++k) f.values.col(k).array() -= heart.node_weights().dot(f.values.col(k)) / heart.total_area();
    return f;
  };

  const SpaceTimeField h1{"volume", random_matrix(3, 9), g};
  const SpaceTimeField h2{"volume", random_matrix(3, 9), g};
  const SpaceTimeField zero_flux{kHeartId, Eigen::MatrixXd::Zero(heart.vertex_count(), 9), g, "mV/cm"};
  const auto z = assemble_evolution_rhs(heart, model, cable, h1, zero_flux, Eigen::VectorXd::Zero(9), points);
  const double zero_corr = (z.F.values - h1.values).cwiseAbs().maxCoeff();
  o.require(zero_corr == 0.0, "zero-data correction " + num(zero_corr));

  const SpaceTimeField f1 = random_flux(), f2 = random_flux();
  const Eigen::VectorXd c1 = random_matrix(9, 1), c2 = random_matrix(9, 1);
  const double beta = -1.7;
  SpaceTimeField fsum = f1, hsum = h1;
  fsum.values += beta * f2.values;
  hsum.values += beta * h2.values;
  const auto a = assemble_evolution_rhs(heart, model, cable, h1, f1, c1, points);
  const auto b = assemble_evolution_rhs(heart, model, cable, h2, f2, c2, points);
  const auto s = assemble_evolution_rhs(heart, model, cable, hsum, fsum, c1 + beta * c2, points);
  const Eigen::MatrixXd combo = a.F.values + beta * b.F.values;
  const double lin = (s.F.values - combo).cwiseAbs().maxCoeff() / combo.cwiseAbs().maxCoeff();
  o.require(lin <= 1e-12, "superposition rel " + num(lin));
  return o;
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + BIDOMAIN_CLI + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome cli_determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "bidomain_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string r = root.string();
  const std::string s = r + "/synth";
  const std::vector<std::string> runs = {
      "synth --out " + s + " --l 2 --m 1 --amplitude 8 --offset 1.5",
      "reconstruct-p1 --out " + r + "/p1 --heart " + s + "/heart.json --torso " + s + "/torso.json --u-e " + s +
          "/u_e.csv",
      "reconstruct-p2 --out " + r + "/p2 --heart " + s + "/heart.json --torso " + s + "/torso.json --torso-data " + s +
          "/torso.csv --noise 0.01 --seed 7",
      "eval --out " + r + "/eval --truth " + s + "/v.csv --p1 " + r + "/p1/v.csv --p2 " + r + "/p2/v.csv --label LV",
      "nullspace --out " + r + "/null --radius 0.4 --amplitude 3",
      "green-check --out " + r + "/green --level 3",
      "heat-check --out " + r + "/heat --level 2 --steps 4",
  };
  int compared = 0, mismatched = 0;
  for (const std::string& args : runs) {
    const std::string name = args.substr(0, args.find(' '));
    if (run(args) != 0) {
      o.require(false, name + " run");
      continue;
    }
    const std::string out = args.substr(args.find("--out ") + 6, args.find(' ', args.find("--out ") + 6) - args.find("--out ") - 6);
    const fs::path replay = fs::path(out).string() + "_rerun";
    if (run("rerun " + out + "/manifest.json --out " + replay.string()) != 0) {
      o.require(false, name + " rerun");
      continue;
    }
    for (const auto& entry : fs::directory_iterator(out)) {
      const fs::path other = replay / entry.path().filename();
      if (entry.path().filename() == "manifest.json") {
        auto m1 = nlohmann::json::parse(slurp(entry.path()));
        auto m2 = nlohmann::json::parse(slurp(other));
        m1["parameters"].erase("out");
        m2["parameters"].erase("out");
        ++compared;
        if (m1 != m2) ++mismatched;
        continue;
      }
      ++compared;
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++mismatched;
    }
  }
  o.require(mismatched == 0, std::to_string(compared - mismatched) + "/" + std::to_string(compared) + " files identical");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Green representation on the sphere", green_representation_sphere},
      {"Neumann solver", neumann_solver},
      {"Zaremba step", zaremba_step},
      {"null-space certification", nullspace_certification},
      {"protocol-1 round trip", protocol_1_round_trip},
      {"protocol-2 round trip", protocol_2_round_trip},
      {"Tikhonov monotonicity", tikhonov_monotonicity},
      {"parabolic Green identity", parabolic_green_identity},
      {"heat kernel properties", heat_kernel_properties},
      {"evolution right-hand side", evolution_rhs},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << "): " << o.detail
              << " [" << num(seconds_since(t0)) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
