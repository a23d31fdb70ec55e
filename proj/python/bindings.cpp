#include "bidomain/errors.hpp"
#include "bidomain/io.hpp"
#include "bidomain/oracle.hpp"
#include "bidomain/parabolic.hpp"
#include "bidomain/reconstruction.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace bidomain;

namespace {

using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using RowTriangles = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

RowPoints vertices_of(const SurfaceMesh& m) {
  RowPoints p(m.vertex_count(), 3);
  for (int i = 0; i < m.vertex_count(); ++i) p.row(i) = m.vertices()[i].transpose();
  return p;
}

RowTriangles triangles_of(const SurfaceMesh& m) {
  RowTriangles t(m.triangle_count(), 3);
  for (int i = 0; i < m.triangle_count(); ++i)
    for (int c = 0; c < 3; ++c) t(i, c) = m.triangles()[i][c];
  return t;
}

SurfaceMesh mesh_from_arrays(const RowPoints& p, const RowTriangles& t, const std::string& id) {
  std::vector<Vec3> v(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) v[i] = p.row(i).transpose();
  std::vector<Triangle> tri(t.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i) tri[i] = {t(i, 0), t(i, 1), t(i, 2)};
  return SurfaceMesh(std::move(v), std::move(tri), id);
}

py::dict output_dict(const ReconstructionOutput& o) {
  py::dict d;
  d["u_e"] = o.u_e.values;
  d["u_i"] = o.u_i.values;
  d["v"] = o.v.values;
  d["heart_flux"] = o.heart_flux.values;
  d["c"] = o.c;
  d["lambda"] = o.lambda;
  d["diagnostics"] = py::module_::import("json").attr("loads")(to_json(o.diagnostics).dump());
  return d;
}

}  // namespace

PYBIND11_MODULE(_bidomain, m) {
  m.doc() = "Bidomain inverse problem toolkit";

  py::register_exception<bidomain::Error>(m, "BidomainError", PyExc_RuntimeError);

  py::class_<SurfaceMesh>(m, "SurfaceMesh")
      .def(py::init(&mesh_from_arrays), py::arg("vertices"), py::arg("triangles"), py::arg("surface_id") = "surface")
      .def_property_readonly("vertices", &vertices_of)
      .def_property_readonly("triangles", &triangles_of)
      .def_property_readonly("surface_id", &SurfaceMesh::surface_id)
      .def_property_readonly("vertex_count", &SurfaceMesh::vertex_count)
      .def_property_readonly("triangle_count", &SurfaceMesh::triangle_count)
      .def_property_readonly("total_area", &SurfaceMesh::total_area)
      .def_property_readonly("node_weights", &SurfaceMesh::node_weights);

  m.def(
      "icosphere",
      [](double radius, int level, const Vec3& center, const std::string& id) {
        return make_icosphere(radius, level, center, id);
      },
      py::arg("radius"), py::arg("level"), py::arg("center") = Vec3::Zero(), py::arg("surface_id") = kHeartId);

  m.def(
      "load_mesh",
      [](const std::filesystem::path& path, const std::string& id) {
        return load_mesh(path, mesh_format_from_path(path), id);
      },
      py::arg("path"), py::arg("surface_id") = "");

  m.def(
      "synth",
      [](const SurfaceMesh& heart, const SurfaceMesh& torso, double r1, double r2,
         const std::vector<std::tuple<int, int, double>>& terms, double m_i, double m_e, double m_b, double c0) {
        std::vector<HarmonicTerm> t;
        for (const auto& [l, mm, a] : terms) t.push_back({l, mm, a, 0.0});
        const SteadyDataset d =
            synth_bidomain_steady(heart, torso, r1, r2, ConductivityModel::isotropic(m_i, m_e, m_b), t, c0);
        py::dict out;
        out["u_e"] = d.u_e.values;
        out["u_i"] = d.u_i.values;
        out["v"] = d.v.values;
        out["heart_flux"] = d.heart_flux.values;
        out["torso"] = d.torso.values;
        out["c"] = d.c;
        out["lambda"] = d.lambda;
        out["transmission_residual"] = d.transmission_residual;
        out["flux_residual"] = d.flux_residual;
        return out;
      },
      py::arg("heart"), py::arg("torso"), py::arg("r1"), py::arg("r2"), py::arg("terms"), py::arg("m_i") = 12.0,
      py::arg("m_e") = 45.0, py::arg("m_b") = 7.0, py::arg("c0") = 1.0,
      "Analytic concentric-sphere dataset; terms are (l, m, amplitude) of u_e.");

  m.def(
      "protocol_1",
      [](const SurfaceMesh& heart, const SurfaceMesh& torso, const Eigen::VectorXd& u_e, double m_i, double m_e,
         double m_b, double c0) {
        const DomainConfig dom{heart, torso};
        return output_dict(run_protocol_1(dom, ConductivityModel::isotropic(m_i, m_e, m_b),
                                          NodalField{heart.surface_id(), u_e}, c0));
      },
      py::arg("heart"), py::arg("torso"), py::arg("u_e"), py::arg("m_i") = 12.0, py::arg("m_e") = 45.0,
      py::arg("m_b") = 7.0, py::arg("c0") = 1.0);

  m.def(
      "protocol_2",
      [](const SurfaceMesh& heart, const SurfaceMesh& torso, const Eigen::VectorXd& f, double m_i, double m_e,
         double m_b, double c0, const std::string& selection, std::optional<double> fixed_alpha, int alpha_count) {
        const DomainConfig dom{heart, torso};
        TikhonovConfig tik;
        tik.selection = parse_alpha_selection(selection);
        if (fixed_alpha) tik.fixed_alpha = *fixed_alpha;
        tik.alpha_count = alpha_count;
        return output_dict(run_protocol_2(dom, ConductivityModel::isotropic(m_i, m_e, m_b),
                                          NodalField{torso.surface_id(), f}, tik, c0));
      },
      py::arg("heart"), py::arg("torso"), py::arg("f"), py::arg("m_i") = 12.0, py::arg("m_e") = 45.0,
      py::arg("m_b") = 7.0, py::arg("c0") = 1.0, py::arg("selection") = "lcurve",
      py::arg("fixed_alpha") = std::nullopt, py::arg("alpha_count") = 30);

  m.def("add_gaussian_noise", &add_gaussian_noise, py::arg("values"), py::arg("level"), py::arg("seed"));
  m.def(
      "rmse", [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return rmse(a, b); }, py::arg("reconstructed"),
      py::arg("truth"));

  m.def(
      "heat_kernel",
      [](const Vec3& x, const Vec3& y, double t, double tau, const Mat3& M, const Vec3& a, double a0, double scale) {
        return heat_kernel(HeatOperatorSpec{M, a, a0, scale}, x, y, t, tau);
      },
      py::arg("x"), py::arg("y"), py::arg("t"), py::arg("tau"), py::arg("M") = Mat3::Identity(),
      py::arg("a") = Vec3::Zero(), py::arg("a0") = 0.0, py::arg("scale") = 1.0);

  m.def(
      "parabolic_green",
      [](const SurfaceMesh& mesh, const Eigen::MatrixXd& trace, const Eigen::MatrixXd& flux, double t_end,
         const std::function<double(const Vec3&)>& initial, const Vec3& x, double t, const Vec3& center) {
        const HeatOperatorSpec spec;
        const TimeGrid grid{t_end, static_cast<int>(trace.cols())};
        const SpaceTimeField u{mesh.surface_id(), trace, grid};
        const SpaceTimeField q{mesh.surface_id(), flux, grid};
        const VolumeQuadrature quad = star_quadrature(mesh, center);
        VolumeSource u0{quad, Eigen::VectorXd(quad.size())};
        for (int j = 0; j < quad.size(); ++j) u0.values[j] = initial(quad.points[j]);
        return parabolic_green_reconstruct(spec, mesh, u, q, u0, std::nullopt, x, t);
      },
      py::arg("mesh"), py::arg("trace"), py::arg("flux"), py::arg("t_end"), py::arg("initial"), py::arg("x"),
      py::arg("t"), py::arg("center") = Vec3::Zero(),
      "Heat-equation Green formula at (x, t) from frames of u and its normal derivative on a star-shaped surface.");

  m.def(
      "lcurve_corner",
      [](const std::vector<std::pair<double, double>>& pts) {
        std::vector<LCurvePoint> p;
        for (const auto& [r, s] : pts) p.push_back({r, s});
        return lcurve_corner(p);
      },
      py::arg("points"), "Index of the corner of (log residual, log solution) points ordered by increasing alpha.");

  m.def(
      "report_table",
      [](const std::vector<std::tuple<std::string, double, std::optional<double>>>& rows) {
        std::vector<ReportRow> r;
        for (const auto& [label, a, b] : rows) r.push_back({label, a, b});
        return report_table(r);
      },
      py::arg("rows"));
}
