#include "bidomain/io.hpp"

#include "bidomain/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bidomain {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Parse, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

double parse_number(const std::string& token, const fs::path& path, int line) {
  try {
    size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line) + ": bad number '" + token + "'");
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Validation, "cannot write " + path.string());
  out << text;
}

fs::path sidecar_path(const fs::path& csv) { return fs::path(csv.string() + ".json"); }

void write_nodal_field(const NodalField& field, const fs::path& csv) {
  std::string text = "node_index,value\n";
  for (int i = 0; i < field.size(); ++i) text += std::to_string(i) + "," + number(field.values[i]) + "\n";
  write_text(csv, text);
  write_json(sidecar_path(csv), {{"surface_id", field.surface_id}, {"units", field.units}, {"count", field.size()}});
}

NodalField read_nodal_field(const fs::path& csv) {
  const json meta = read_json(sidecar_path(csv));
  NodalField f;
  f.surface_id = meta.value("surface_id", "");
  f.units = meta.value("units", "mV");
  const int count = meta.value("count", -1);
  std::ifstream in(csv);
  if (!in) fail(ErrorKind::Parse, "cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line) || split(line) != std::vector<std::string>{"node_index", "value"})
    fail(ErrorKind::Parse, csv.string() + ": expected header node_index,value");
  std::vector<double> values;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != 2) fail(ErrorKind::Parse, csv.string() + ":" + std::to_string(lineno) + ": expected 2 columns");
    const double idx = parse_number(cells[0], csv, lineno);
    if (idx != static_cast<double>(values.size()))
      fail(ErrorKind::Parse, csv.string() + ":" + std::to_string(lineno) + ": node indices must be 0,1,2,...");
    values.push_back(parse_number(cells[1], csv, lineno));
  }
  if (count >= 0 && count != static_cast<int>(values.size()))
    fail(ErrorKind::ShapeMismatch, csv.string() + ": sidecar count does not match the rows");
  f.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return f;
}

void write_space_time_field(const SpaceTimeField& field, const fs::path& csv) {
  field.validate();
  std::string text;
  for (Eigen::Index i = 0; i < field.values.rows(); ++i) {
    for (Eigen::Index k = 0; k < field.values.cols(); ++k) {
      if (k) text += ",";
      text += number(field.values(i, k));
    }
    text += "\n";
  }
  write_text(csv, text);
  write_json(sidecar_path(csv), {{"location", field.location},
                                 {"units", field.units},
                                 {"rows", field.values.rows()},
                                 {"t_end", field.grid.t_end},
                                 {"steps", field.grid.steps}});
}

SpaceTimeField read_space_time_field(const fs::path& csv) {
  const json meta = read_json(sidecar_path(csv));
  SpaceTimeField f;
  try {
    f.location = meta.at("location").get<std::string>();
    f.units = meta.value("units", "mV");
    f.grid.t_end = meta.at("t_end").get<double>();
    f.grid.steps = meta.at("steps").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, sidecar_path(csv).string() + ": " + e.what());
  }
  f.grid.validate();
  std::ifstream in(csv);
  if (!in) fail(ErrorKind::Parse, "cannot open " + csv.string());
  std::vector<double> flat;
  std::string line;
  int rows = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != f.grid.steps)
      fail(ErrorKind::ShapeMismatch, csv.string() + ":" + std::to_string(lineno) + ": expected one column per frame");
    for (const auto& c : cells) flat.push_back(parse_number(c, csv, lineno));
    ++rows;
  }
  if (meta.contains("rows") && meta["rows"].get<int>() != rows)
    fail(ErrorKind::ShapeMismatch, csv.string() + ": sidecar rows do not match the file");
  f.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), rows, f.grid.steps);
  f.validate();
  return f;
}

void write_vtk_polydata(const SurfaceMesh& mesh, const std::map<std::string, Eigen::VectorXd>& point_data,
                        const fs::path& path) {
  std::string text = "# vtk DataFile Version 3.0\n" + mesh.surface_id() + "\nASCII\nDATASET POLYDATA\n";
  text += "POINTS " + std::to_string(mesh.vertex_count()) + " double\n";
  for (const Vec3& v : mesh.vertices()) text += number(v.x()) + " " + number(v.y()) + " " + number(v.z()) + "\n";
  text += "POLYGONS " + std::to_string(mesh.triangle_count()) + " " + std::to_string(4 * mesh.triangle_count()) + "\n";
  for (const Triangle& t : mesh.triangles())
    text += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
  if (!point_data.empty()) {
    text += "POINT_DATA " + std::to_string(mesh.vertex_count()) + "\n";
    for (const auto& [name, values] : point_data) {
      if (values.size() != mesh.vertex_count())
        fail(ErrorKind::ShapeMismatch, "point data '" + name + "' does not match the mesh");
      text += "SCALARS " + name + " double 1\nLOOKUP_TABLE default\n";
      for (Eigen::Index i = 0; i < values.size(); ++i) text += number(values[i]) + "\n";
    }
  }
  write_text(path, text);
}

std::vector<std::string> write_reconstruction(const ReconstructionOutput& out, const SurfaceMesh& heart,
                                              const fs::path& dir, bool vtk) {
  fs::create_directories(dir);
  write_nodal_field(out.u_e, dir / "u_e.csv");
  write_nodal_field(out.u_i, dir / "u_i.csv");
  write_nodal_field(out.v, dir / "v.csv");
  write_nodal_field(out.heart_flux, dir / "heart_flux.csv");
  std::vector<std::string> files = {"u_e.csv", "u_i.csv", "v.csv", "heart_flux.csv"};
  if (vtk) {
    write_vtk_polydata(heart, {{"u_e", out.u_e.values}, {"u_i", out.u_i.values}, {"v", out.v.values}},
                       dir / "heart.vtk");
    files.push_back("heart.vtk");
  }
  return files;
}

json to_json(const ReconstructionDiagnostics& d) {
  json j = {{"zaremba_residual", d.zaremba_residual},
            {"conservation_residual", d.conservation_residual},
            {"compatibility_defect", d.compatibility_defect},
            {"neumann_residual", d.neumann_residual},
            {"normalization_value", d.normalization_value},
            {"calibration_residual", d.calibration_residual},
            {"lcurve_fallback", d.lcurve_fallback}};
  if (d.alpha) j["alpha"] = *d.alpha;
  if (d.cauchy_residual) j["cauchy_residual"] = *d.cauchy_residual;
  return j;
}

std::string report_table(const std::vector<ReportRow>& rows) {
  std::string out = "surface  u_e->v  u_b->u_e->v\n";
  char buf[64];
  for (const auto& r : rows) {
    if (!std::isfinite(r.first) || (r.second && !std::isfinite(*r.second)))
      fail(ErrorKind::Validation, "report values must be finite");
    out += r.label;
    std::snprintf(buf, sizeof buf, "  %.2f mV", r.first);
    out += buf;
    if (r.second) {
      std::snprintf(buf, sizeof buf, "  %.2f mV", *r.second);
      out += buf;
    } else {
      out += "  -";
    }
    out += "\n";
  }
  return out;
}

}  // namespace bidomain
