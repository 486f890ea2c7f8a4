#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "omega_grid/iss_cert.hpp"
#include "omega_grid/omega_set.hpp"

/**
 * Scenario documents: one JSON file describing a system, a simulation
 * configuration, initial conditions, seeds and analysis settings. Every
 * schema problem is reported as a ConfigError carrying the JSON pointer of
 * the offending value.
 */
namespace omega_grid::scenario {

using json = nlohmann::json;
using linalg::Vector;

struct InitSpec {
    std::vector<Vector> points;  ///< explicit y(0,0) values
    std::size_t random_count = 0;
    double radius = 1.0;
    bool around_equilibrium = true;  ///< ball centre: y*_mode or the origin
    std::size_t mode = 0;
    double tau = 0.0;
};

struct IssSpec {
    iss::CertificateOptions certificate;
    double eta_fraction = 0.5;  ///< operating eta as a fraction of eta*
    std::size_t runs = 1;
    double step = 0.01;
    double horizon = 50.0;
    std::size_t sample_stride = 1;
    hybrid::JumpPolicy jump_policy = hybrid::JumpPolicy::RandomDelay;
    hybrid::ModeSelection mode_selection = hybrid::ModeSelection::UniformRandom;
    double init_radius = 1.0;
    bool init_tau_uniform = true;  ///< tau(0,0) uniform in [0, N0] instead of 0
    json load;           ///< load document for the continuous input
    grid::LoadBox box;   ///< bounds of the continuous input
};

struct Scenario {
    std::string name;
    json document;  ///< resolved document after overrides
    std::string system_kind;
    grid::SwitchedSystem system;
    json model_info;  ///< builder-specific details for build-model
    std::vector<grid::FullModel> full_order;  ///< per-mode A_bar, B_bar before reduction (full kind only)
    hybrid::SimConfig sim;
    json load;
    std::vector<std::uint64_t> seeds;
    InitSpec init;
    omega::OmegaOptions omega;
    double tail_fraction = 0.5;
    IssSpec iss;
    std::filesystem::path output_dir;

    [[nodiscard]] hybrid::LoadGenerator hdelta_load() const;
    [[nodiscard]] hybrid::LoadGenerator iss_load() const;
    /// Initial states for one seed: explicit points first, then random draws.
    [[nodiscard]] std::vector<hybrid::HybridState> initial_states(std::uint64_t seed) const;
    /// Random ISS initial states (y is the shifted state, equilibrium at 0).
    [[nodiscard]] std::vector<hybrid::HybridState> iss_initial_states(std::uint64_t seed, std::size_t count) const;
    /// SimConfig for ISS runs at the certificate's operating point.
    [[nodiscard]] hybrid::SimConfig iss_config(const iss::IssCertificate& cert, std::uint64_t seed) const;
};

/// Parses a load document against a box of the given dimension.
hybrid::LoadGenerator parse_load(const json& doc, const grid::LoadBox& box, const std::string& pointer);

/// `path.to.leaf=value`; the value is parsed as JSON when possible and kept
/// as a string otherwise. Numeric path components index arrays.
void apply_override(json& document, const std::string& assignment);

Scenario parse_scenario(const json& document);
Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Location of a shipped preset scenario.
std::filesystem::path preset_path(const std::string& name);

}  // namespace omega_grid::scenario
