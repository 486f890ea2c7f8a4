#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "omega_grid/io.hpp"
#include "omega_grid/scenario.hpp"

/// Subcommand pipelines behind the omega-grid command line.
namespace omega_grid::runner {

using json = nlohmann::json;

/// Worker count: hardware concurrency capped by OMEGA_GRID_THREADS.
std::size_t thread_count();

/// Runs fn(0..n-1) on a small pool. Results must be stored by index, so the
/// outcome does not depend on scheduling. The first failure (lowest index)
/// is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

struct ArcRun {
    std::uint64_t seed = 0;
    std::size_t index = 0;  ///< initial condition index within the seed
    hybrid::HybridArc arc;
    hybrid::SolutionCheck check;
};

/// Every (seed, initial condition) H_delta run of the scenario.
std::vector<ArcRun> simulate_batch(const scenario::Scenario& sc);

struct IssRun {
    std::uint64_t seed = 0;
    hybrid::HybridArc arc;
    iss::VerificationReport decrease;
    iss::VerificationReport bound;
};

/// scenario.iss.runs ISS simulations at the certificate's operating point,
/// each checked for the decrease inequalities and the ISS bound.
std::vector<IssRun> verify_batch(const scenario::Scenario& sc, const iss::IssCertificate& cert);

json cmd_build_model(const scenario::Scenario& sc, const std::filesystem::path& out);
json cmd_simulate(const scenario::Scenario& sc, const std::filesystem::path& out);
json cmd_omega_set(const scenario::Scenario& sc, const std::filesystem::path& out);
json cmd_distance(const scenario::Scenario& sc, const std::filesystem::path& out);
json cmd_iss_cert(const scenario::Scenario& sc, const std::filesystem::path& out);
json cmd_verify_iss(const scenario::Scenario& sc, const std::filesystem::path& out);
/// All of the above in sequence, each into its own subdirectory.
json cmd_reproduce(const scenario::Scenario& sc, const std::filesystem::path& out);

struct Invocation {
    std::string subcommand;
    std::string target;  ///< scenario path, or preset name for reproduce
    std::vector<std::string> overrides;
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
};

/// Executes one invocation. Prints the summary JSON on `out`; on failure
/// prints an error document on `err` and returns a nonzero status.
int run(const Invocation& inv, std::ostream& out, std::ostream& err);

/// Machine-readable error document for an exception.
json error_document(const std::exception& e);

}  // namespace omega_grid::runner
