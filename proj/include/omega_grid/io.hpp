#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include <json.hpp>

#include "omega_grid/iss_cert.hpp"
#include "omega_grid/omega_set.hpp"

/// Serialization of models, arcs, sets, certificates and reports. Numbers
/// are written in shortest round-trip decimal form so artifacts are
/// reproducible byte for byte.
namespace omega_grid::io {

using json = nlohmann::json;
using linalg::Matrix;
using linalg::Vector;

std::string format_double(double value);

json to_json(const Matrix& m);
json to_json(const Vector& v);
Matrix matrix_from_json(const json& j, const std::string& pointer);
Vector vector_from_json(const json& j, const std::string& pointer);

json system_to_json(const grid::SwitchedSystem& sys);
json omega_set_to_json(const omega::OmegaSet& omega);
json certificate_to_json(const iss::IssCertificate& cert);
json report_to_json(const iss::VerificationReport& report);

void write_arc_csv(std::ostream& out, const hybrid::HybridArc& arc, const grid::SwitchedSystem& sys);
void write_jump_csv(std::ostream& out, const hybrid::HybridArc& arc);
void write_distance_csv(std::ostream& out, const omega::DistanceTrace& trace);
void write_margin_csv(std::ostream& out, const iss::VerificationReport& report);

void write_file(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const json& document);

}  // namespace omega_grid::io
