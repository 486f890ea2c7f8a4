#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "omega_grid/runner.hpp"

namespace {

struct CommonFlags {
    std::string scenario;
    std::vector<std::string> overrides;
    std::string out;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_scenario) {
    auto* opt = cmd->add_option("--scenario", flags.scenario, "scenario JSON file");
    if (needs_scenario) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", flags.overrides, "override a scenario value, e.g. --set sim.delta1=0.01")
        ->allow_extra_args(false);
    cmd->add_option("--out", flags.out, "output directory (defaults to the scenario's output.dir)");
    cmd->add_option("--seed", flags.seed, "replace the scenario's seed list with a single seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"omega-grid: switched-system frequency dynamics, limit sets and ISS certificates"};
    app.require_subcommand(1);

    CommonFlags flags;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"build-model", "assemble the mode matrices and write model.json"},
        {"simulate", "simulate the slowly switched hybrid system and write arc CSVs"},
        {"omega-set", "construct the limit set and write omega_set.json"},
        {"distance", "simulate and write distance-to-set traces"},
        {"iss-cert", "synthesize the ISS certificate and write certificate.json"},
        {"verify-iss", "simulate the ISS system and check the certificate"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), flags, true);

    std::string preset;
    auto* reproduce = app.add_subcommand("reproduce", "run the full pipeline of a shipped preset");
    reproduce->add_option("preset", preset, "example1 | ieee39-aggregate | ieee39-full")
        ->required()
        ->check(CLI::IsMember({"example1", "ieee39-aggregate", "ieee39-full"}));
    add_common(reproduce, flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    omega_grid::runner::Invocation inv;
    const auto* chosen = app.get_subcommands().front();
    inv.subcommand = chosen->get_name();
    inv.target = inv.subcommand == "reproduce" ? preset : flags.scenario;
    inv.overrides = flags.overrides;
    if (!flags.out.empty()) inv.out = flags.out;
    if (chosen->count("--seed") > 0) inv.seed = flags.seed;
    return omega_grid::runner::run(inv, std::cout, std::cerr);
}
