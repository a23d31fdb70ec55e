#pragma once

#include "bidomain/mesh.hpp"
#include "bidomain/parabolic.hpp"
#include "bidomain/reconstruction.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bidomain {

/// `<csv>.json` next to a CSV file.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// CSV `node_index,value` plus a sidecar {"surface_id", "units", "count"}.
/// Values are written with 17 significant digits so a reload is exact.
void write_nodal_field(const NodalField& field, const std::filesystem::path& csv);
NodalField read_nodal_field(const std::filesystem::path& csv);

/// Headerless CSV matrix (rows nodes, columns frames) plus a sidecar
/// {"location", "units", "rows", "t_end", "steps"}.
void write_space_time_field(const SpaceTimeField& field, const std::filesystem::path& csv);
SpaceTimeField read_space_time_field(const std::filesystem::path& csv);

/// Legacy ASCII POLYDATA with one scalar point-data array per entry.
void write_vtk_polydata(const SurfaceMesh& mesh, const std::map<std::string, Eigen::VectorXd>& point_data,
                        const std::filesystem::path& path);

/// u_e, u_i, v and heart_flux CSVs in `dir`, plus `heart.vtk` when `vtk`.
/// Returns the written file names.
std::vector<std::string> write_reconstruction(const ReconstructionOutput& out, const SurfaceMesh& heart,
                                              const std::filesystem::path& dir, bool vtk = true);

nlohmann::json to_json(const ReconstructionDiagnostics& d);

/// One row of the evaluation table: rmse of the first and (optionally) the
/// second protocol, in mV.
struct ReportRow {
  std::string label;
  double first = 0.0;
  std::optional<double> second;
};

/// Header line plus one line per row, e.g. "LV  5.71 mV  19.81 mV".
std::string report_table(const std::vector<ReportRow>& rows);

/// Writes `text` atomically enough for our purposes (truncate + write).
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bidomain
