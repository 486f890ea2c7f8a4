#include "omega_grid/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

namespace omega_grid::runner {

namespace fs = std::filesystem;

std::size_t thread_count() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("OMEGA_GRID_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(n, thread_count());
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

namespace {

std::uint64_t run_seed(std::uint64_t seed, std::size_t index) { return seed * 1000003ULL + index; }

std::string arc_tag(const ArcRun& run) { return "s" + std::to_string(run.seed) + "_i" + std::to_string(run.index); }

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

json write_arcs(const scenario::Scenario& sc, const std::vector<ArcRun>& runs, const fs::path& out) {
    json arcs = json::array();
    for (const auto& run : runs) {
        std::ostringstream csv;
        io::write_arc_csv(csv, run.arc, sc.system);
        io::write_file(out / "arcs" / ("arc_" + arc_tag(run) + ".csv"), csv.str());
        std::ostringstream jumps;
        io::write_jump_csv(jumps, run.arc);
        io::write_file(out / "jumps" / ("jumps_" + arc_tag(run) + ".csv"), jumps.str());
        double min_gap = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < run.arc.jumps.size(); ++k) {
            min_gap = std::min(min_gap, run.arc.jumps[k].t - run.arc.jumps[k - 1].t);
        }
        arcs.push_back({{"seed", run.seed},
                        {"index", run.index},
                        {"jumps", run.arc.jumps.size()},
                        {"samples", run.arc.samples.size()},
                        {"min_jump_gap", std::isfinite(min_gap) ? json(min_gap) : json(nullptr)},
                        {"valid", run.check.ok},
                        {"problems", run.check.problems}});
    }
    return arcs;
}

}  // namespace

std::vector<ArcRun> simulate_batch(const scenario::Scenario& sc) {
    std::vector<ArcRun> runs;
    std::vector<hybrid::HybridState> inits;
    for (const auto seed : sc.seeds) {
        const auto states = sc.initial_states(seed);
        for (std::size_t k = 0; k < states.size(); ++k) {
            ArcRun run;
            run.seed = seed;
            run.index = k;
            runs.push_back(std::move(run));
            inits.push_back(states[k]);
        }
    }
    const auto load = sc.hdelta_load();
    parallel_for(runs.size(), [&](std::size_t i) {
        hybrid::SimConfig cfg = sc.sim;
        cfg.seed = run_seed(runs[i].seed, runs[i].index);
        runs[i].arc = hybrid::simulate_hdelta(sc.system, cfg, load, inits[i]);
        runs[i].check = hybrid::validate_solution(runs[i].arc, sc.system, cfg);
    });
    return runs;
}

std::vector<IssRun> verify_batch(const scenario::Scenario& sc, const iss::IssCertificate& cert) {
    const auto load = sc.iss_load();
    const double u_inf = load.sup_norm();
    const std::uint64_t base = sc.seeds.front();
    std::vector<IssRun> runs(sc.iss.runs);
    parallel_for(runs.size(), [&](std::size_t i) {
        const std::uint64_t seed = run_seed(base, i);
        const auto init = sc.iss_initial_states(seed, 1).front();
        const auto cfg = sc.iss_config(cert, seed);
        auto& run = runs[i];
        run.seed = seed;
        run.arc = hybrid::simulate_iss(sc.system, cfg, load, init);
        run.decrease = iss::check_decrease(run.arc, cert, load);
        run.bound = iss::check_iss_bound(run.arc, cert, u_inf);
    });
    return runs;
}

json cmd_build_model(const scenario::Scenario& sc, const fs::path& out) {
    json model = io::system_to_json(sc.system);
    model["name"] = sc.name;
    model["builder"] = sc.model_info;
    io::write_json(out / "model.json", model);
    json modes = json::array();
    for (const auto& m : model["modes"]) {
        modes.push_back({{"id", m["id"]}, {"spectral_abscissa", m["spectral_abscissa"]}, {"is_hurwitz", m["is_hurwitz"]}});
    }
    return {{"command", "build-model"},
            {"name", sc.name},
            {"state_dim", sc.system.state_dim()},
            {"input_dim", sc.system.input_dim()},
            {"mode_count", sc.system.modes.size()},
            {"delta3", sc.system.delta3},
            {"c", sc.system.c},
            {"modes", modes},
            {"builder", sc.model_info}};
}

json cmd_simulate(const scenario::Scenario& sc, const fs::path& out) {
    const auto runs = simulate_batch(sc);
    json arcs = write_arcs(sc, runs, out);
    json summary = {{"command", "simulate"}, {"name", sc.name}, {"arcs", arcs}};
    io::write_json(out / "simulate.json", summary);
    return summary;
}

json cmd_omega_set(const scenario::Scenario& sc, const fs::path& out) {
    const auto omega = omega::build_omega_set(sc.system, sc.omega);
    io::write_json(out / "omega_set.json", io::omega_set_to_json(omega));
    json curves = json::array();
    for (const auto& c : omega.curves) {
        curves.push_back({{"from_mode", c.from_mode},
                          {"flow_mode", c.flow_mode},
                          {"samples", c.points.size()},
                          {"horizon", c.horizon},
                          {"endpoint_error", (c.points.back() - omega.equilibria[c.flow_mode]).norm()}});
    }
    return {{"command", "omega-set"},
            {"name", sc.name},
            {"eps_tail", omega.eps_tail},
            {"chord_tol", omega.chord_tol},
            {"curve_count", omega.curves.size()},
            {"curves", curves}};
}

json cmd_distance(const scenario::Scenario& sc, const fs::path& out) {
    const auto omega = omega::build_omega_set(sc.system, sc.omega);
    const auto runs = simulate_batch(sc);
    json arcs = write_arcs(sc, runs, out);
    std::vector<omega::DistanceTrace> traces(runs.size());
    parallel_for(runs.size(), [&](std::size_t i) { traces[i] = omega::distance_trace(runs[i].arc, omega); });
    const double tail_from = (1.0 - sc.tail_fraction) * sc.sim.horizon;
    json rows = json::array();
    std::vector<double> tails;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::ostringstream csv;
        io::write_distance_csv(csv, traces[i]);
        io::write_file(out / "distance" / ("distance_" + arc_tag(runs[i]) + ".csv"), csv.str());
        const double tail = traces[i].tail_sup(tail_from);
        tails.push_back(tail);
        rows.push_back({{"seed", runs[i].seed}, {"index", runs[i].index}, {"tail_sup", tail}});
    }
    json summary = {{"command", "distance"},
                    {"name", sc.name},
                    {"curve_count", omega.curves.size()},
                    {"tail_from", tail_from},
                    {"tail_sup_max", tails.empty() ? 0.0 : *std::max_element(tails.begin(), tails.end())},
                    {"tail_sup_median", median(tails)},
                    {"traces", rows},
                    {"arcs", arcs}};
    io::write_json(out / "distance.json", summary);
    return summary;
}

json cmd_iss_cert(const scenario::Scenario& sc, const fs::path& out) {
    const auto cert = iss::synthesize_certificate(sc.system, sc.iss.certificate);
    io::write_json(out / "certificate.json", io::certificate_to_json(cert));
    return {{"command", "iss-cert"},
            {"name", sc.name},
            {"mu", cert.mu},
            {"eta_star", cert.eta_star},
            {"lambda", cert.lambda},
            {"rho", cert.rho},
            {"kappa1", cert.kappa1},
            {"kappa2", cert.kappa2},
            {"kappa3", cert.kappa3},
            {"c", cert.c},
            {"min_eig_S", cert.min_eig_s},
            {"min_eig_Y", cert.min_eig_y ? json(*cert.min_eig_y) : json(nullptr)}};
}

json cmd_verify_iss(const scenario::Scenario& sc, const fs::path& out) {
    const auto cert = iss::synthesize_certificate(sc.system, sc.iss.certificate);
    const auto runs = verify_batch(sc, cert);
    json per_run = json::array();
    std::size_t flow_v = 0, jump_v = 0, bound_v = 0, inconclusive = 0, failed = 0;
    for (const auto& run : runs) {
        flow_v += run.decrease.flow_violations;
        jump_v += run.decrease.jump_violations;
        bound_v += run.bound.bound_violations;
        if (run.decrease.status == iss::VerificationStatus::Inconclusive) ++inconclusive;
        if (!run.decrease.pass() && run.decrease.status == iss::VerificationStatus::Fail) ++failed;
        if (!run.bound.pass()) ++failed;
        per_run.push_back({{"seed", run.seed},
                           {"jumps", run.arc.jumps.size()},
                           {"decrease", io::report_to_json(run.decrease)},
                           {"bound", io::report_to_json(run.bound)}});
    }
    const auto status = failed > 0         ? iss::VerificationStatus::Fail
                        : inconclusive > 0 ? iss::VerificationStatus::Inconclusive
                                           : iss::VerificationStatus::Pass;
    json report = {{"status", std::string(iss::to_string(status))},
                   {"eta", sc.iss.eta_fraction * cert.eta_star},
                   {"eta_star", cert.eta_star},
                   {"u_inf", sc.iss_load().sup_norm()},
                   {"runs", per_run}};
    io::write_json(out / "verify_report.json", report);
    if (!runs.empty()) {
        std::ostringstream csv;
        io::write_margin_csv(csv, runs.front().bound);
        io::write_file(out / "margin_run0.csv", csv.str());
    }
    return {{"command", "verify-iss"},
            {"name", sc.name},
            {"status", std::string(iss::to_string(status))},
            {"runs", runs.size()},
            {"flow_violations", flow_v},
            {"jump_violations", jump_v},
            {"bound_violations", bound_v},
            {"inconclusive_runs", inconclusive}};
}

json cmd_reproduce(const scenario::Scenario& sc, const fs::path& out) {
    json summary = {{"command", "reproduce"}, {"name", sc.name}};
    summary["build_model"] = cmd_build_model(sc, out / "model");
    summary["omega_set"] = cmd_omega_set(sc, out / "omega_set");
    summary["distance"] = cmd_distance(sc, out / "distance");
    summary["distance"].erase("arcs");
    summary["iss_cert"] = cmd_iss_cert(sc, out / "iss");
    if (sc.iss.runs > 0) summary["verify_iss"] = cmd_verify_iss(sc, out / "iss");
    io::write_json(out / "summary.json", summary);
    return summary;
}

json error_document(const std::exception& e) {
    json err = {{"message", e.what()}};
    if (const auto* cfg = dynamic_cast<const ConfigError*>(&e)) {
        err["kind"] = std::string(to_string(cfg->kind()));
        err["pointer"] = cfg->pointer();
    } else if (const auto* lib = dynamic_cast<const Error*>(&e)) {
        err["kind"] = std::string(to_string(lib->kind()));
    } else {
        err["kind"] = "internal";
    }
    return {{"error", err}};
}

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
    try {
        std::vector<std::string> overrides = inv.overrides;
        if (inv.seed) overrides.push_back("seeds=[" + std::to_string(*inv.seed) + "]");
        const bool reproduce = inv.subcommand == "reproduce";
        const fs::path path = reproduce ? scenario::preset_path(inv.target) : fs::path(inv.target);
        const auto sc = scenario::load_scenario(path, overrides);
        const fs::path dir = inv.out ? *inv.out : sc.output_dir;
        json summary;
        if (inv.subcommand == "build-model") {
            summary = cmd_build_model(sc, dir);
        } else if (inv.subcommand == "simulate") {
            summary = cmd_simulate(sc, dir);
        } else if (inv.subcommand == "omega-set") {
            summary = cmd_omega_set(sc, dir);
        } else if (inv.subcommand == "distance") {
            summary = cmd_distance(sc, dir);
            summary.erase("arcs");
        } else if (inv.subcommand == "iss-cert") {
            summary = cmd_iss_cert(sc, dir);
        } else if (inv.subcommand == "verify-iss") {
            summary = cmd_verify_iss(sc, dir);
        } else if (reproduce) {
            summary = cmd_reproduce(sc, dir);
        } else {
            throw ConfigError("", "unknown subcommand '" + inv.subcommand + "'");
        }
        summary["out"] = dir.string();
        out << summary.dump(2) << '\n';
        return 0;
    } catch (const ConfigError& e) {
        err << error_document(e).dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << error_document(e).dump() << '\n';
        return 1;
    }
}

}  // namespace omega_grid::runner
