// Command-line front end: oracle datasets, the two reconstruction protocols,
// null-space elements, evaluation tables and the invariant checks. Every run
// writes <out>/manifest.json; `rerun` replays a manifest.

#include "bidomain/cauchy.hpp"
#include "bidomain/errors.hpp"
#include "bidomain/io.hpp"
#include "bidomain/oracle.hpp"
#include "bidomain/parabolic.hpp"
#include "bidomain/reconstruction.hpp"
#include "bidomain/threads.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bidomain;

namespace {

constexpr const char* kVersion = "0.1.0";

// Options holding file paths; stored absolute in manifests.
const std::set<std::string> kPathOptions = {"out",        "heart",   "torso",        "u-e",  "torso-data",
                                            "torso-frames", "truth", "p1",           "p2"};

struct Conductivities {
  double m_i = 12.0, m_e = 45.0, m_b = 7.0, c0 = 1.0;

  ConductivityModel model() const {
    if (!(m_i > 0 && m_e > 0 && m_b > 0)) fail(ErrorKind::Validation, "conductivities must be positive");
    return ConductivityModel::isotropic(m_i, m_e, m_b);
  }
};

void add_conductivities(CLI::App* app, Conductivities& c) {
  app->add_option("--m-i", c.m_i, "intracellular conductivity (mS/cm)")->capture_default_str();
  app->add_option("--m-e", c.m_e, "extracellular conductivity (mS/cm)")->capture_default_str();
  app->add_option("--m-b", c.m_b, "torso conductivity (mS/cm)")->capture_default_str();
  app->add_option("--c0", c.c0, "calibration constant")->capture_default_str();
}

struct Run {
  std::string command;
  fs::path out;
  json parameters = json::object();
  json results = json::object();
  std::vector<std::string> outputs;
};

void finish(Run& run) {
  json m = {{"tool", "bidomain"},
            {"version", kVersion},
            {"command", run.command},
            {"parameters", run.parameters},
            {"results", run.results},
            {"outputs", run.outputs}};
  write_text(run.out / "manifest.json", m.dump(2) + "\n");
}

// Resolved values of every long option of a subcommand.
json resolved_parameters(const CLI::App* sub) {
  json p = json::object();
  for (const CLI::Option* o : sub->get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string name = o->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (o->get_type_size() == 0) {
      value = (o->count() > 0 && o->as<bool>()) ? "true" : "false";
    } else if (o->count() > 0) {
      value = o->as<std::string>();
    } else {
      value = o->get_default_str();
      if (value.empty()) continue;
    }
    if (kPathOptions.count(name) && !value.empty()) value = fs::absolute(value).lexically_normal().string();
    p[name] = value;
  }
  return p;
}

SurfaceMesh load_surface(const std::string& path, const std::string& id) {
  return load_mesh(path, mesh_format_from_path(path), id);
}

NodalField load_field_on(const std::string& path, const SurfaceMesh& mesh) {
  NodalField f = read_nodal_field(path);
  if (f.surface_id.empty()) f.surface_id = mesh.surface_id();
  check_field_on(f, mesh);
  return f;
}

Vec3 parse_vec3(const std::string& s) {
  std::stringstream ss(s);
  Vec3 v;
  char sep = 0;
  if (!(ss >> v.x() >> sep >> v.y() >> sep >> v.z())) fail(ErrorKind::Validation, "expected x,y,z but got '" + s + "'");
  return v;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string geometry = "shell";
  int l = 1, m = 0;
  double amplitude = 10.0, offset = 0.0, r1 = 1.0, r2 = 2.0;
  int heart_level = 3, torso_level = 3;
  Conductivities cond;
};

void run_synth(const SynthArgs& a, Run& run) {
  if (a.geometry != "shell") fail(ErrorKind::Validation, "only --geometry shell is supported");
  if (a.l < 0 || a.l > kMaxHarmonicDegree || std::abs(a.m) > a.l) fail(ErrorKind::Validation, "need 0 <= |m| <= l <= 8");
  if (!(a.r1 > 0 && a.r2 > a.r1)) fail(ErrorKind::Validation, "need 0 < r1 < r2");
  if (a.heart_level < 0 || a.heart_level > 5 || a.torso_level < 0 || a.torso_level > 5)
    fail(ErrorKind::Validation, "mesh levels must lie in 0..5");
  const ConductivityModel model = a.cond.model();
  const SurfaceMesh heart = make_icosphere(a.r1, a.heart_level, Vec3::Zero(), kHeartId);
  const SurfaceMesh torso = make_icosphere(a.r2, a.torso_level, Vec3::Zero(), kTorsoId);
  std::vector<HarmonicTerm> terms = {{a.l, a.m, a.amplitude, 0.0}};
  if (a.offset != 0.0 && a.l != 0) terms.push_back({0, 0, a.offset, 0.0});
  const SteadyDataset d = synth_bidomain_steady(heart, torso, a.r1, a.r2, model, terms, a.cond.c0);

  fs::create_directories(run.out);
  save_mesh_json(heart, run.out / "heart.json");
  save_mesh_json(torso, run.out / "torso.json");
  write_nodal_field(d.u_e, run.out / "u_e.csv");
  write_nodal_field(d.u_i, run.out / "u_i.csv");
  write_nodal_field(d.v, run.out / "v.csv");
  write_nodal_field(d.heart_flux, run.out / "heart_flux.csv");
  write_nodal_field(d.torso, run.out / "torso.csv");
  run.outputs = {"heart.json", "torso.json", "u_e.csv", "u_i.csv", "v.csv", "heart_flux.csv", "torso.csv"};
  run.results = {{"lambda", d.lambda},
                 {"c", d.c},
                 {"transmission_residual", d.transmission_residual},
                 {"flux_residual", d.flux_residual},
                 {"torso_flux_residual", d.torso_flux_residual},
                 {"v_range", d.v.values.maxCoeff() - d.v.values.minCoeff()}};
  std::cout << "synth: " << heart.vertex_count() << " heart and " << torso.vertex_count() << " torso nodes, lambda "
            << d.lambda << "\n";
}

// --- reconstruct-p1 ---------------------------------------------------------

struct P1Args {
  std::string heart, torso, u_e;
  bool vtk = true;
  Conductivities cond;
};

void run_p1(const P1Args& a, Run& run) {
  const ConductivityModel model = a.cond.model();
  DomainConfig dom{load_surface(a.heart, kHeartId), load_surface(a.torso, kTorsoId)};
  dom.validate();
  const NodalField u_e = load_field_on(a.u_e, dom.heart);
  const ReconstructionOutput out = run_protocol_1(dom, model, u_e, a.cond.c0);
  fs::create_directories(run.out);
  run.outputs = write_reconstruction(out, dom.heart, run.out, a.vtk);
  run.results = to_json(out.diagnostics);
  run.results["c"] = out.c;
  run.results["lambda"] = out.lambda;
  std::cout << "reconstruct-p1: v range " << out.v.values.minCoeff() << " .. " << out.v.values.maxCoeff() << " mV\n";
}

// --- reconstruct-p2 ---------------------------------------------------------

struct P2Args {
  std::string heart, torso, torso_data, torso_frames;
  double noise = 0.0;
  std::uint64_t seed = 7;
  TikhonovConfig tik;
  std::string selection = "lcurve", penalty = "surface-gradient";
  double discrepancy_level = -1.0;
  bool vtk = true;
  Conductivities cond;
};

void run_p2(const P2Args& a, Run& run) {
  const ConductivityModel model = a.cond.model();
  TikhonovConfig tik = a.tik;
  tik.selection = parse_alpha_selection(a.selection);
  tik.penalty = parse_penalty(a.penalty);
  tik.noise_level = a.discrepancy_level >= 0.0 ? a.discrepancy_level : a.noise;
  tik.validate();
  if (a.noise < 0.0) fail(ErrorKind::Validation, "noise level must be non-negative");
  if (a.torso_data.empty() == a.torso_frames.empty())
    fail(ErrorKind::Validation, "give exactly one of --torso-data and --torso-frames");
  DomainConfig dom{load_surface(a.heart, kHeartId), load_surface(a.torso, kTorsoId)};
  dom.validate();
  fs::create_directories(run.out);

  if (!a.torso_data.empty()) {
    NodalField f = load_field_on(a.torso_data, dom.torso);
    if (a.noise > 0.0) f.values = add_gaussian_noise(f.values, a.noise, a.seed);
    const CauchySolver<SurfaceMesh> cauchy(model.M_b, dom.heart, dom.torso, tik);
    const CauchySolveReport rep = cauchy.solve(f);
    const ProportionalReconstructor<SurfaceMesh> rec(model.M_i, proportionality_factor(model), dom.heart);
    ReconstructionOutput out = rec.reconstruct(rep.heart_dirichlet, rep.heart_flux, a.cond.c0);
    out.diagnostics.alpha = rep.chosen_alpha;
    out.diagnostics.cauchy_residual = rep.residual_norm;
    out.diagnostics.lcurve_fallback = rep.lcurve_fallback;
    run.outputs = write_reconstruction(out, dom.heart, run.out, a.vtk);
    write_nodal_field(f, run.out / "torso_input.csv");
    write_lcurve_csv(rep, run.out / "lcurve.csv");
    run.outputs.insert(run.outputs.end(), {"torso_input.csv", "lcurve.csv"});
    run.results = to_json(out.diagnostics);
    run.results["alpha_index"] = rep.chosen_index;
    run.results["c"] = out.c;
    run.results["lambda"] = out.lambda;
    std::cout << "reconstruct-p2: alpha " << rep.chosen_alpha << " (index " << rep.chosen_index << ")\n";
    return;
  }

  SpaceTimeField frames = read_space_time_field(a.torso_frames);
  if (frames.values.rows() != dom.torso.vertex_count())
    fail(ErrorKind::ShapeMismatch, "frame rows must match the torso nodes");
  if (a.noise > 0.0)
    for (Eigen::Index k = 0; k < frames.values.cols(); ++k)
      frames.values.col(k) = add_gaussian_noise(frames.values.col(k), a.noise, a.seed + static_cast<std::uint64_t>(k));
  const auto outs = run_protocol_2_frames(dom, model, frames.values, tik, a.cond.c0);
  SpaceTimeField ue{kHeartId, Eigen::MatrixXd(dom.heart.vertex_count(), frames.grid.frames()), frames.grid};
  SpaceTimeField ui = ue, v = ue;
  json alphas = json::array();
  for (size_t k = 0; k < outs.size(); ++k) {
    ue.values.col(static_cast<Eigen::Index>(k)) = outs[k].u_e.values;
    ui.values.col(static_cast<Eigen::Index>(k)) = outs[k].u_i.values;
    v.values.col(static_cast<Eigen::Index>(k)) = outs[k].v.values;
    alphas.push_back(outs[k].diagnostics.alpha.value_or(0.0));
  }
  write_space_time_field(ue, run.out / "u_e_frames.csv");
  write_space_time_field(ui, run.out / "u_i_frames.csv");
  write_space_time_field(v, run.out / "v_frames.csv");
  run.outputs = {"u_e_frames.csv", "u_i_frames.csv", "v_frames.csv"};
  run.results = {{"alphas", alphas}, {"frames", outs.size()}};
  std::cout << "reconstruct-p2: " << outs.size() << " frames\n";
}

// --- nullspace --------------------------------------------------------------

struct NullArgs {
  double r1 = 1.0, r2 = 2.0;
  int heart_level = 3, torso_level = 3;
  std::string center = "0,0,0";
  double radius = 0.5, amplitude = 1.0, grid_spacing = 0.05;
  std::string m_e_diag;
  Conductivities cond;
};

bool run_nullspace(const NullArgs& a, Run& run) {
  ConductivityModel model = a.cond.model();
  const bool proportional = a.m_e_diag.empty();
  if (!proportional) {
    model.M_e = parse_vec3(a.m_e_diag).asDiagonal();
    model.lambda.reset();
    model.validate();
  }
  const CubicBump bump{parse_vec3(a.center), a.radius, a.amplitude};
  if (!(a.radius > 0) || !(a.grid_spacing > 0)) fail(ErrorKind::Validation, "radius and grid spacing must be positive");
  DomainConfig dom{make_icosphere(a.r1, a.heart_level, Vec3::Zero(), kHeartId),
                   make_icosphere(a.r2, a.torso_level, Vec3::Zero(), kTorsoId)};
  const NullSpaceElement e = generate_nullspace_element(dom, model, bump, proportional, a.grid_spacing);

  fs::create_directories(run.out);
  write_nodal_field(e.u_e, run.out / "u_e.csv");
  write_nodal_field(e.u_i, run.out / "u_i.csv");
  write_nodal_field(e.torso, run.out / "torso.csv");
  write_nodal_field(NodalField{kTorsoId, e.predicted_torso, "mV"}, run.out / "predicted_torso.csv");
  run.outputs = {"u_e.csv", "u_i.csv", "torso.csv", "predicted_torso.csv"};

  const double torso_sup = e.predicted_torso.cwiseAbs().maxCoeff();
  json checks = {{"torso_sup", torso_sup},
                 {"torso_ok", torso_sup <= 1e-3 * std::abs(a.amplitude)},
                 {"c", e.c},
                 {"trace_max", e.trace_max},
                 {"interior_max", e.interior_max}};
  bool ok = checks["torso_ok"].get<bool>();
  if (proportional) {
    const double identity = (e.u_i.values + e.lambda * e.u_e.values).cwiseAbs().maxCoeff();
    checks["identity_residual"] = identity;
    checks["identity_ok"] = identity <= 1e-12;
    checks["c_ok"] = std::abs(e.c) <= 1e-10;
    ok = ok && identity <= 1e-12 && std::abs(e.c) <= 1e-10;
  } else if (e.neumann) {
    checks["normalization_value"] = e.neumann->normalization_value;
  }
  checks["pass"] = ok;
  run.results = checks;
  std::cout << "nullspace: torso sup " << torso_sup << (ok ? " PASS\n" : " FAIL\n");
  return ok;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string truth, p1, p2, label = "heart";
};

void run_eval(const EvalArgs& a, Run& run) {
  const NodalField truth = read_nodal_field(a.truth);
  const NodalField first = read_nodal_field(a.p1);
  const double range = truth.values.maxCoeff() - truth.values.minCoeff();
  const double d1 = rmse(first, truth);
  std::optional<double> d2;
  if (!a.p2.empty()) d2 = rmse(read_nodal_field(a.p2), truth);
  std::string text = "delta_p1 = " + fixed(d1, 3) + " mV";
  if (range > 0) text += " (" + fixed(100.0 * d1 / range, 2) + "% of range)";
  text += "\n";
  if (d2) {
    text += "delta_p2 = " + fixed(*d2, 3) + " mV";
    if (range > 0) text += " (" + fixed(100.0 * *d2 / range, 2) + "% of range)";
    text += "\n";
  }
  text += report_table({{a.label, d1, d2}});
  fs::create_directories(run.out);
  write_text(run.out / "report.txt", text);
  run.outputs = {"report.txt"};
  run.results = {{"delta_p1", d1}, {"v_range", range}};
  if (d2) run.results["delta_p2"] = *d2;
  std::cout << text;
}

// --- green-check ------------------------------------------------------------

struct GreenArgs {
  int level = 4;
};

bool run_green(const GreenArgs& a, Run& run) {
  if (a.level < 1 || a.level > 5) fail(ErrorKind::Validation, "level must lie in 1..5");
  const SurfaceMesh ball = make_icosphere(1.0, a.level);
  NodalField u{ball.surface_id(), Eigen::VectorXd(ball.vertex_count())};
  NodalField q = u;
  const auto normals = ball.vertex_normals();
  for (int i = 0; i < ball.vertex_count(); ++i) {
    u.values[i] = ball.vertices()[i].z();
    q.values[i] = normals[i].z();
  }
  double interior = 0.0, exterior = 0.0;
  for (const Vec3& x : {Vec3(0, 0, 0.5), Vec3(0.3, -0.2, 0.1), Vec3(-0.1, 0.4, -0.6), Vec3(0, 0, -0.3)}) {
    const double val = green_representation(Mat3::Identity(), ball, u, q, std::nullopt, x);
    interior = std::max(interior, std::abs(val - x.z()) / std::max(std::abs(x.z()), 1e-12));
  }
  for (const Vec3& x : {Vec3(0, 0, 1.5), Vec3(2, 1, 0), Vec3(-1.2, 0.3, 0.9)})
    exterior = std::max(exterior, std::abs(green_representation(Mat3::Identity(), ball, u, q, std::nullopt, x)));
  const bool ok = interior <= 1e-2 && exterior <= 1e-2;
  run.results = {{"faces", ball.triangle_count()},
                 {"interior_relative_error", interior},
                 {"exterior_max", exterior},
                 {"pass", ok}};
  std::cout << "green-check: interior " << interior << ", exterior " << exterior << (ok ? " PASS\n" : " FAIL\n");
  return ok;
}

// --- heat-check -------------------------------------------------------------

struct HeatArgs {
  int level = 3, steps = 6;
};

bool run_heat(const HeatArgs& a, Run& run) {
  if (a.level < 1 || a.level > 5 || a.steps < 2) fail(ErrorKind::Validation, "need level in 1..5 and steps >= 2");
  const HeatOperatorSpec heat;
  const HeatKernel k(heat);
  const bool causal = k.value(Vec3::Zero(), Vec3::Zero(), 0.0) == 0.0 && k.value(Vec3(0.1, 0, 0), Vec3::Zero(), -1.0) == 0.0;

  const double s = 0.3, sigma = std::sqrt(2 * s);
  const VolumeQuadrature box = box_quadrature(Vec3::Constant(-6 * sigma), Vec3::Constant(6 * sigma), sigma / 4);
  double mass = 0.0;
  for (int j = 0; j < box.size(); ++j) mass += box.weights[j] * k.value(box.points[j], Vec3::Zero(), s);

  const Vec3 x(0.3, -0.2, 0.4);
  const double h = 1e-4;
  auto f = [&](const Vec3& p, double t) { return k.value(p, Vec3::Zero(), t); };
  double lap = 0.0;
  for (int ax = 0; ax < 3; ++ax) {
    const Vec3 e = h * Vec3::Unit(ax);
    lap += (f(x + e, s) - 2 * f(x, s) + f(x - e, s)) / (h * h);
  }
  const double dt = (f(x, s + h) - f(x, s - h)) / (2 * h);
  const double pde = std::abs(dt - lap) / (std::abs(dt) + std::abs(lap));

  const SurfaceMesh ball = make_icosphere(1.0, a.level);
  const TimeGrid grid{0.5, a.steps};
  SpaceTimeField trace{ball.surface_id(), Eigen::MatrixXd(ball.vertex_count(), a.steps), grid};
  SpaceTimeField flux = trace;
  const auto normals = ball.vertex_normals();
  for (int i = 0; i < ball.vertex_count(); ++i)
    for (int t = 0; t < a.steps; ++t) {
      trace.values(i, t) = ball.vertices()[i].squaredNorm() + 6 * grid.time(t);
      flux.values(i, t) = 2 * ball.vertices()[i].dot(normals[i]);
    }
  const VolumeQuadrature star = star_quadrature(ball, Vec3::Zero());
  VolumeSource u0{star, Eigen::VectorXd(star.size())};
  for (int j = 0; j < star.size(); ++j) u0.values[j] = star.points[j].squaredNorm();
  const double inside = parabolic_green_reconstruct(heat, ball, trace, flux, u0, std::nullopt, Vec3::Zero(), 0.5);
  const double outside = parabolic_green_reconstruct(heat, ball, trace, flux, u0, std::nullopt, Vec3(0, 0, 1.6), 0.5);

  const bool ok = causal && std::abs(mass - 1) <= 1e-6 && pde < 1e-5 && std::abs(inside - 3.0) <= 0.06 &&
                  std::abs(outside) <= 0.06;
  run.results = {{"causal", causal},    {"mass", mass},       {"pde_residual", pde},
                 {"green_interior", inside}, {"green_exterior", outside}, {"pass", ok}};
  std::cout << "heat-check: mass " << mass << ", pde residual " << pde << ", green " << inside << " / " << outside
            << (ok ? " PASS\n" : " FAIL\n");
  return ok;
}

// ---------------------------------------------------------------------------

// Flat `key = value` lines; '#' starts a comment. Keys are long option names.
std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Validation, "cannot open config file " + path);
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto x = s.find_first_not_of(" \t\r"), y = s.find_last_not_of(" \t\r");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    args.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
  }
  return args;
}

int run_cli(std::vector<std::string> args);

int run_rerun(const std::string& manifest_path, const std::string& out) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::Validation, "cannot open manifest " + manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, manifest_path + ": " + e.what());
  }
  if (!m.contains("command") || !m.contains("parameters")) fail(ErrorKind::Parse, "manifest lacks command or parameters");
  std::vector<std::string> args = {"bidomain", m["command"].get<std::string>()};
  for (const auto& [key, value] : m["parameters"].items()) {
    std::string v = value.get<std::string>();
    if (key == "out" && !out.empty()) v = fs::absolute(out).lexically_normal().string();
    args.push_back("--" + key + "=" + v);
  }
  return run_cli(args);
}

int run_cli(std::vector<std::string> args) {
  // Config entries go first so that flags on the command line win.
  for (size_t i = 2; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
    } else {
      continue;
    }
    const auto extra = config_arguments(path);
    args.insert(args.begin() + 2, extra.begin(), extra.end());
    break;
  }

  CLI::App app{"Bidomain inverse problem toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Run run;
  std::string out;
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--config", "flat key = value file; command-line flags win");
  };

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "emit an analytic concentric-sphere dataset");
  add_out(s_synth);
  s_synth->add_option("--geometry", synth.geometry)->capture_default_str();
  s_synth->add_option("--l", synth.l, "harmonic degree")->capture_default_str();
  s_synth->add_option("--m", synth.m, "harmonic order")->capture_default_str();
  s_synth->add_option("--amplitude", synth.amplitude)->capture_default_str();
  s_synth->add_option("--offset", synth.offset, "constant added to u_e")->capture_default_str();
  s_synth->add_option("--r1", synth.r1)->capture_default_str();
  s_synth->add_option("--r2", synth.r2)->capture_default_str();
  s_synth->add_option("--heart-level", synth.heart_level)->capture_default_str();
  s_synth->add_option("--torso-level", synth.torso_level)->capture_default_str();
  add_conductivities(s_synth, synth.cond);

  P1Args p1;
  auto* s_p1 = app.add_subcommand("reconstruct-p1", "v from the heart extracellular trace");
  add_out(s_p1);
  s_p1->add_option("--heart", p1.heart)->required();
  s_p1->add_option("--torso", p1.torso)->required();
  s_p1->add_option("--u-e", p1.u_e)->required();
  s_p1->add_flag("--vtk,!--no-vtk", p1.vtk, "write heart.vtk");
  add_conductivities(s_p1, p1.cond);

  P2Args p2;
  auto* s_p2 = app.add_subcommand("reconstruct-p2", "v from torso data through the regularized Cauchy problem");
  add_out(s_p2);
  s_p2->add_option("--heart", p2.heart)->required();
  s_p2->add_option("--torso", p2.torso)->required();
  s_p2->add_option("--torso-data", p2.torso_data);
  s_p2->add_option("--torso-frames", p2.torso_frames);
  s_p2->add_option("--noise", p2.noise, "Gaussian noise level relative to max|f|")->capture_default_str();
  s_p2->add_option("--seed", p2.seed)->capture_default_str();
  s_p2->add_option("--alpha-count", p2.tik.alpha_count)->capture_default_str();
  s_p2->add_option("--alpha-min", p2.tik.alpha_min)->capture_default_str();
  s_p2->add_option("--alpha-max", p2.tik.alpha_max)->capture_default_str();
  s_p2->add_option("--spectrum-range", p2.tik.spectrum_range)->capture_default_str();
  s_p2->add_option("--selection", p2.selection, "lcurve, fixed or discrepancy")->capture_default_str();
  s_p2->add_option("--penalty", p2.penalty, "identity or surface-gradient")->capture_default_str();
  s_p2->add_option("--fixed-alpha", p2.tik.fixed_alpha)->capture_default_str();
  s_p2->add_option("--discrepancy-level", p2.discrepancy_level, "defaults to --noise")->capture_default_str();
  s_p2->add_option("--global-alpha", p2.tik.global_alpha)->capture_default_str();
  s_p2->add_flag("--vtk,!--no-vtk", p2.vtk, "write heart.vtk");
  add_conductivities(s_p2, p2.cond);

  NullArgs null;
  auto* s_null = app.add_subcommand("nullspace", "emit and verify a null-space element");
  add_out(s_null);
  s_null->add_option("--r1", null.r1)->capture_default_str();
  s_null->add_option("--r2", null.r2)->capture_default_str();
  s_null->add_option("--heart-level", null.heart_level)->capture_default_str();
  s_null->add_option("--torso-level", null.torso_level)->capture_default_str();
  s_null->add_option("--center", null.center)->capture_default_str();
  s_null->add_option("--radius", null.radius)->capture_default_str();
  s_null->add_option("--amplitude", null.amplitude)->capture_default_str();
  s_null->add_option("--grid-spacing", null.grid_spacing)->capture_default_str();
  s_null->add_option("--m-e-diag", null.m_e_diag, "anisotropic M_e diagonal (general route)");
  add_conductivities(s_null, null.cond);

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "rmse table against a reference v");
  add_out(s_eval);
  s_eval->add_option("--truth", ev.truth)->required();
  s_eval->add_option("--p1", ev.p1)->required();
  s_eval->add_option("--p2", ev.p2);
  s_eval->add_option("--label", ev.label)->capture_default_str();

  GreenArgs green;
  auto* s_green = app.add_subcommand("green-check", "Green representation of u = z on a sphere");
  add_out(s_green);
  s_green->add_option("--level", green.level)->capture_default_str();

  HeatArgs heat;
  auto* s_heat = app.add_subcommand("heat-check", "heat kernel and parabolic Green formula checks");
  add_out(s_heat);
  s_heat->add_option("--level", heat.level)->capture_default_str();
  s_heat->add_option("--steps", heat.steps)->capture_default_str();

  std::string manifest, rerun_out;
  auto* s_rerun = app.add_subcommand("rerun", "replay a run manifest");
  s_rerun->add_option("manifest", manifest)->required();
  s_rerun->add_option("--out", rerun_out, "override the output directory");

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (s_rerun->parsed()) return run_rerun(manifest, rerun_out);

  CLI::App* sub = app.get_subcommands().front();
  run.command = sub->get_name();
  run.out = out;
  run.parameters = resolved_parameters(sub);
  bool ok = true;
  if (sub == s_synth) run_synth(synth, run);
  else if (sub == s_p1) run_p1(p1, run);
  else if (sub == s_p2) run_p2(p2, run);
  else if (sub == s_null) ok = run_nullspace(null, run);
  else if (sub == s_eval) run_eval(ev, run);
  else if (sub == s_green) ok = run_green(green, run);
  else if (sub == s_heat) ok = run_heat(heat, run);
  fs::create_directories(run.out);
  finish(run);
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads();
  try {
    return run_cli(std::vector<std::string>(argv, argv + argc));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
