// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "omega_grid/grid_model.hpp"
#include "omega_grid/hybrid_engine.hpp"
#include "omega_grid/iss_cert.hpp"
#include "omega_grid/matrix_core.hpp"
#include "omega_grid/omega_set.hpp"
#include "omega_grid/runner.hpp"
#include "omega_grid/scenario.hpp"

using namespace omega_grid;
using linalg::Matrix;
using linalg::Vector;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %2d  %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, a);
    return buf;
}

Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

std::string seed_list(std::size_t n) {
    std::string s = "seeds=[";
    for (std::size_t k = 1; k <= n; ++k) s += std::to_string(k) + (k < n ? "," : "]");
    return s;
}

scenario::Scenario preset(const std::string& name, const std::vector<std::string>& overrides = {}) {
    return scenario::load_scenario(scenario::preset_path(name), overrides);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

Outcome equilibria() {
    const Matrix a1 = mat2(-0.6, 2.98, -2.98, -0.6);
    const Matrix a2 = mat2(-0.4, 3.24, -3.24, -0.4);
    const Vector b1 = vec2(-2.98, 0.6);
    const Vector b2 = vec2(-6.48, 0.8);
    const auto start = Clock::now();
    const Vector y1 = linalg::solve_linear(a1, Vector(-b1));
    const Vector y2 = linalg::solve_linear(a2, Vector(-b2));
    const double elapsed = seconds_since(start);
    const double err = std::max((y1 - vec2(0.0, 1.0)).norm(), (y2 - vec2(0.0, 2.0)).norm());
    return {err <= 1e-10 && elapsed < 1e-3,
            "err=" + fmt("%.2e", err) + " time=" + fmt("%.3f", elapsed * 1e3) + "ms"};
}

Outcome omega_structure() {
    const fs::path out = fs::temp_directory_path() / "omega_grid_acceptance_reproduce";
    fs::remove_all(out);
    runner::Invocation inv;
    inv.subcommand = "reproduce";
    inv.target = "example1";
    inv.out = out;
    std::ostringstream sink;
    std::ostringstream err;
    const auto start = Clock::now();
    const int status = runner::run(inv, sink, err);
    const double elapsed = seconds_since(start);
    if (status != 0) return {false, "reproduce failed: " + err.str()};

    std::ifstream in(out / "omega_set" / "omega_set.json");
    const json set = json::parse(in);
    const auto& curves = set["curves"];
    bool ok = curves.size() == 2;
    double worst = 0.0;
    std::vector<bool> reached(2, false);
    for (const auto& curve : curves) {
        const auto from = curve["from_mode"].get<std::size_t>();
        const auto to = curve["flow_mode"].get<std::size_t>();
        ok = ok && from != to && to < 2;
        if (!ok) break;
        reached[to] = true;
        const auto& first = curve["samples"].front();
        const auto& last = curve["samples"].back();
        const auto& src = set["equilibria"][from];
        const auto& dst = set["equilibria"][to];
        const double d0 = std::hypot(first[1].get<double>() - src[0].get<double>(),
                                     first[2].get<double>() - src[1].get<double>());
        const double d1 = std::hypot(last[1].get<double>() - dst[0].get<double>(),
                                     last[2].get<double>() - dst[1].get<double>());
        ok = ok && d0 <= 1e-12;
        worst = std::max(worst, d1);
    }
    fs::remove_all(out);
    ok = ok && reached[0] && reached[1] && worst <= 1e-3 && elapsed < 5.0;
    return {ok, "curves=" + std::to_string(curves.size()) + " endpoint=" + fmt("%.2e", worst) +
                    " time=" + fmt("%.2f", elapsed) + "s"};
}

Outcome sgpas() {
    const auto start = Clock::now();
    const auto base = preset("example1");
    const auto omega = omega::build_omega_set(base.system, base.omega);
    std::vector<double> medians;
    for (const double delta : {0.1, 0.02, 0.004}) {
        const auto sc = preset("example1", {seed_list(20), "sim.delta1=" + std::to_string(delta)});
        const auto runs = runner::simulate_batch(sc);
        std::vector<double> tails(runs.size());
        runner::parallel_for(runs.size(), [&](std::size_t k) {
            tails[k] = omega::distance_trace(runs[k].arc, omega).tail_sup(sc.tail_fraction * sc.sim.horizon);
        });
        if (runs.size() != 100) return {false, "expected 100 runs, got " + std::to_string(runs.size())};
        medians.push_back(median(tails));
    }
    const double elapsed = seconds_since(start);
    const bool monotone = medians[1] <= medians[0] && medians[2] <= medians[1];
    return {monotone && medians[2] < 0.05 && elapsed < 120.0,
            "medians=" + fmt("%.5f", medians[0]) + "," + fmt("%.5f", medians[1]) + "," + fmt("%.5f", medians[2]) +
                " time=" + fmt("%.1f", elapsed) + "s"};
}

Outcome nominal_jumps() {
    // tau(0,0) = 1 puts every run in D at the start, so a first jump is available.
    const auto sc = preset("example1", {seed_list(20), "sim.delta1=0", "sim.horizon=300", "init.tau=1"});
    const auto runs = runner::simulate_batch(sc);
    std::size_t worst = 0;
    std::size_t total = 0;
    for (const auto& r : runs) {
        worst = std::max(worst, r.arc.jumps.size());
        total += r.arc.jumps.size();
    }
    return {runs.size() == 100 && worst <= 1,
            "runs=" + std::to_string(runs.size()) + " max_jumps=" + std::to_string(worst) +
                " total_jumps=" + std::to_string(total)};
}

Outcome dwell_time() {
    const double delta1 = 0.1;
    const auto sc = preset("example1", {seed_list(20), "sim.delta1=0.1", "sim.horizon=300"});
    const auto runs = runner::simulate_batch(sc);
    double min_gap = std::numeric_limits<double>::infinity();
    std::size_t gaps = 0;
    for (const auto& r : runs) {
        for (std::size_t k = 1; k < r.arc.jumps.size(); ++k) {
            min_gap = std::min(min_gap, r.arc.jumps[k].t - r.arc.jumps[k - 1].t);
            ++gaps;
        }
    }
    const double bound = 1.0 / delta1 - sc.sim.step;
    return {runs.size() == 100 && gaps > 0 && min_gap >= bound,
            "gaps=" + std::to_string(gaps) + " min_gap=" + fmt("%.9f", min_gap) + " bound=" + fmt("%.4f", bound)};
}

Outcome contraction() {
    const auto start = Clock::now();
    std::vector<grid::ModeSpec> modes;
    for (const auto* name : {"example1", "ieee39-aggregate", "ieee39-full"}) {
        for (const auto& m : preset(name).system.modes) modes.push_back(m);
    }
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t checks = 0;
    for (const auto& mode : modes) {
        const auto n = static_cast<Eigen::Index>(mode.state_dim());
        const Matrix p = linalg::lyapunov_solve(mode.a, Matrix::Identity(n, n));
        const std::vector<double> times{0.1, 1.0, 10.0};
        for (int pair = 0; pair < 1000; ++pair) {
            const Vector y1 = mode.equilibrium + Vector::NullaryExpr(n, [&] { return nd(rng); });
            const Vector y2 = mode.equilibrium + Vector::NullaryExpr(n, [&] { return nd(rng); });
            double prev = linalg::weighted_norm(p, y1 - y2);
            for (const double t : times) {
                const double d = linalg::weighted_norm(
                    p, omega::flow_map_theta(mode, t, y1) - omega::flow_map_theta(mode, t, y2));
                worst = std::max(worst, d - prev);
                prev = d;
                ++checks;
            }
        }
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-9 && elapsed < 10.0,
            "modes=" + std::to_string(modes.size()) + " checks=" + std::to_string(checks) +
                " max_increase=" + fmt("%.2e", worst) + " time=" + fmt("%.2f", elapsed) + "s"};
}

Outcome certificate_feasibility() {
    const auto start = Clock::now();
    bool ok = true;
    double min_s = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double c_example = 0.0;
    for (const auto* name : {"example1", "ieee39-aggregate"}) {
        const auto sc = preset(name);
        const auto cert = iss::synthesize_certificate(sc.system, sc.iss.certificate);
        // Recompute the LMI spectra rather than trusting the certificate's fields.
        for (std::size_t q = 0; q < sc.system.modes.size(); ++q) {
            min_s = std::min(min_s, linalg::min_eigenvalue(iss::s_matrix(sc.system.modes[q], cert)));
            for (std::size_t r = 0; r < sc.system.modes.size(); ++r) {
                if (r != q) min_y = std::min(min_y, linalg::min_eigenvalue(iss::y_matrix(cert, q, r)));
            }
        }
        if (std::string(name) == "example1") c_example = sc.system.c;
    }
    const double elapsed = seconds_since(start);
    ok = min_s >= -1e-9 && min_y >= -1e-9 && std::abs(c_example - 1.0) <= 1e-9 && elapsed < 5.0;
    return {ok, "min_eig_S=" + fmt("%.3e", min_s) + " min_eig_Y=" + fmt("%.3e", min_y) + " c=" +
                    fmt("%.12f", c_example) + " time=" + fmt("%.2f", elapsed) + "s"};
}

struct IssTally {
    std::size_t runs = 0;
    std::size_t jumps = 0;
    std::size_t bound_checks = 0;
    std::size_t bound_violations = 0;
    std::size_t flow_checks = 0;
    std::size_t flow_violations = 0;
    std::size_t jump_checks = 0;
    std::size_t jump_violations = 0;
    std::size_t decrease_not_pass = 0;
    double max_fd_ratio = 0.0;
    double seconds = 0.0;
    bool eta_half = true;
};

IssTally iss_tally() {
    IssTally t;
    const auto start = Clock::now();
    for (const auto* name : {"example1", "ieee39-aggregate"}) {
        const auto sc = preset(name, {"analysis.iss.runs=100"});
        const auto cert = iss::synthesize_certificate(sc.system, sc.iss.certificate);
        const double eta = sc.iss.eta_fraction * cert.eta_star;
        t.eta_half = t.eta_half && std::abs(eta - 0.5 * cert.eta_star) <= 1e-15 * cert.eta_star &&
                     std::abs(sc.iss_config(cert, 1).eta - 0.5 * cert.eta_star) <= 1e-15 * cert.eta_star;
        for (const auto& r : runner::verify_batch(sc, cert)) {
            ++t.runs;
            t.jumps += r.arc.jumps.size();
            t.bound_checks += r.bound.bound_checks;
            t.bound_violations += r.bound.bound_violations;
            t.flow_checks += r.decrease.flow_checks;
            t.flow_violations += r.decrease.flow_violations;
            t.jump_checks += r.decrease.jump_checks;
            t.jump_violations += r.decrease.jump_violations;
            t.decrease_not_pass += r.decrease.pass() ? 0 : 1;
            if (r.decrease.fd_tolerance > 0.0) {
                t.max_fd_ratio = std::max(t.max_fd_ratio, r.decrease.max_fd_error / r.decrease.fd_tolerance);
            }
        }
    }
    t.seconds = seconds_since(start);
    return t;
}

Outcome numerical_kernels() {
    const auto start = Clock::now();
    double lyap_residual = 0.0;
    double exp_error = 0.0;

    // Documented oracle cases.
    const auto rot = [](double a, double w) { return mat2(-a, w, -w, -a); };
    const auto rot_exp = [](double a, double w, double t) {
        const double e = std::exp(-a * t);
        return Matrix(e * mat2(std::cos(w * t), std::sin(w * t), -std::sin(w * t), std::cos(w * t)));
    };
    for (const double t : {0.0, 0.1, 1.0, 2.5, 10.0}) {
        exp_error = std::max(exp_error, (linalg::mat_exp(rot(0.6, 2.98), t) - rot_exp(0.6, 2.98, t)).cwiseAbs().maxCoeff());
        exp_error = std::max(exp_error, (linalg::mat_exp(rot(0.4, 3.24), t) - rot_exp(0.4, 3.24, t)).cwiseAbs().maxCoeff());
        Matrix diag = Vector(Eigen::Vector3d(-1.0, -0.5, 2.0)).asDiagonal();
        Matrix diag_exp = Vector(Eigen::Vector3d(std::exp(-t), std::exp(-0.5 * t), std::exp(2.0 * t))).asDiagonal();
        exp_error = std::max(exp_error, ((linalg::mat_exp(diag, t) - diag_exp).cwiseAbs().array() /
                                         diag_exp.cwiseAbs().array().max(1.0)).maxCoeff());
        Matrix jordan = mat2(-1.0, 1.0, 0.0, -1.0);
        Matrix jordan_exp = std::exp(-t) * mat2(1.0, t, 0.0, 1.0);
        exp_error = std::max(exp_error, (linalg::mat_exp(jordan, t) - jordan_exp).cwiseAbs().maxCoeff());
    }
    const auto residual = [](const Matrix& a, const Matrix& q) {
        const Matrix p = linalg::lyapunov_solve(a, q);
        return (a.transpose() * p + p * a + q).norm() / std::max(1.0, q.norm());
    };
    lyap_residual = std::max(lyap_residual, residual(rot(0.6, 2.98), Matrix::Identity(2, 2)));
    lyap_residual = std::max(lyap_residual, residual(rot(0.4, 3.24), Matrix::Identity(2, 2)));
    lyap_residual = std::max(lyap_residual, residual(mat2(-1.0, 1.0, 0.0, -1.0), Matrix::Identity(2, 2)));
    // -a I + w J has P = I / (2a) for Q = I.
    const Matrix p_rot = linalg::lyapunov_solve(rot(0.6, 2.98), Matrix::Identity(2, 2));
    lyap_residual = std::max(lyap_residual, (p_rot - Matrix::Identity(2, 2) / 1.2).cwiseAbs().maxCoeff());

    // Property sweep over random stable matrices of several sizes.
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0.0, 1.0);
    double semigroup = 0.0;
    double inverse = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + trial % 14;
        Matrix a = Matrix::NullaryExpr(n, n, [&] { return nd(rng); });
        const double abscissa = linalg::spectral_report(a).spectral_abscissa;
        a -= (abscissa + 0.2) * Matrix::Identity(n, n);
        Matrix g = Matrix::NullaryExpr(n, n, [&] { return nd(rng); });
        const Matrix q = g * g.transpose() + Matrix::Identity(n, n);
        lyap_residual = std::max(lyap_residual, residual(a, q));
        const double s = 0.3;
        const double t = 0.7;
        const Matrix es = linalg::mat_exp(a, s);
        const Matrix et = linalg::mat_exp(a, t);
        const Matrix est = linalg::mat_exp(a, s + t);
        semigroup = std::max(semigroup, (es * et - est).norm() / std::max(1.0, est.norm()));
        inverse = std::max(inverse, (linalg::mat_exp(a, t) * linalg::mat_exp(a, -t) - Matrix::Identity(n, n)).norm());
    }
    const double elapsed = seconds_since(start);
    const bool ok = lyap_residual < 1e-8 && exp_error < 1e-10 && semigroup < 1e-10 && inverse < 1e-9 && elapsed < 30.0;
    return {ok, "lyap_residual=" + fmt("%.2e", lyap_residual) + " exp_err=" + fmt("%.2e", exp_error) +
                    " semigroup=" + fmt("%.2e", semigroup) + " time=" + fmt("%.2f", elapsed) + "s"};
}

Outcome structure_39bus() {
    const auto start = Clock::now();
    const auto agg = preset("ieee39-aggregate");
    bool ok = true;
    for (const auto& m : agg.system.modes) {
        ok = ok && m.a.rows() == 12 && m.a.cols() == 12 && linalg::spectral_report(m.a).is_hurwitz;
    }
    const auto full = preset("ieee39-full");
    std::size_t min_zeros = std::numeric_limits<std::size_t>::max();
    std::size_t max_zeros = 0;
    bool reduced_hurwitz = !full.full_order.empty();
    Eigen::Index full_dim = 0;
    Eigen::Index reduced_dim = 0;
    for (const auto& m : full.full_order) {
        full_dim = m.a.rows();
        const auto spectrum = linalg::spectral_report(m.a);
        const double tol = 1e-8 * std::max(1.0, m.a.cwiseAbs().maxCoeff());
        std::size_t zeros = 0;
        for (const auto& lambda : spectrum.eigenvalues) zeros += std::abs(lambda) <= tol ? 1 : 0;
        min_zeros = std::min(min_zeros, zeros);
        max_zeros = std::max(max_zeros, zeros);
        const auto red = grid::reduce_zero_mode(m.a, m.b);
        reduced_dim = red.a.rows();
        reduced_hurwitz = reduced_hurwitz && linalg::spectral_report(red.a).is_hurwitz;
    }
    const double elapsed = seconds_since(start);
    ok = ok && min_zeros == 1 && max_zeros == 1 && reduced_hurwitz && elapsed < 10.0;
    return {ok, "aggregate_modes=" + std::to_string(agg.system.modes.size()) + " full_dim=" +
                    std::to_string(full_dim) + " zero_eigs=" + std::to_string(max_zeros) + " reduced_dim=" +
                    std::to_string(reduced_dim) + " time=" + fmt("%.2f", elapsed) + "s"};
}

}  // namespace

int main() {
    report(1, "equilibrium reproduction", equilibria);
    report(2, "omega-set structure", omega_structure);
    report(3, "practical asymptotic stab.", sgpas);
    report(4, "nominal jump bound", nominal_jumps);
    report(5, "dwell-time law", dwell_time);
    report(6, "contraction", contraction);
    report(7, "certificate feasibility", certificate_feasibility);

    IssTally tally;
    std::string tally_error;
    try {
        tally = iss_tally();
    } catch (const std::exception& e) {
        tally_error = e.what();
    }
    report(8, "ISS bound", [&] {
        if (!tally_error.empty()) return Outcome{false, "exception: " + tally_error};
        const bool ok = tally.runs == 200 && tally.eta_half && tally.bound_checks > 0 && tally.bound_violations == 0 &&
                        tally.seconds < 120.0;
        return Outcome{ok, "runs=" + std::to_string(tally.runs) + " jumps=" + std::to_string(tally.jumps) +
                               " samples=" + std::to_string(tally.bound_checks) + " violations=" +
                               std::to_string(tally.bound_violations) + " time=" + fmt("%.1f", tally.seconds) + "s"};
    });
    report(9, "decrease inequalities", [&] {
        if (!tally_error.empty()) return Outcome{false, "exception: " + tally_error};
        const bool ok = tally.runs == 200 && tally.flow_checks > 0 && tally.jump_checks > 0 &&
                        tally.flow_violations == 0 && tally.jump_violations == 0 && tally.decrease_not_pass == 0;
        return Outcome{ok, "flow_checks=" + std::to_string(tally.flow_checks) + " flow_viol=" +
                               std::to_string(tally.flow_violations) + " jump_checks=" +
                               std::to_string(tally.jump_checks) + " jump_viol=" +
                               std::to_string(tally.jump_violations) + " not_pass=" +
                               std::to_string(tally.decrease_not_pass) + " fd_err/tol=" +
                               fmt("%.3f", tally.max_fd_ratio)};
    });
    report(10, "39-bus structure", structure_39bus);
    report(11, "numerical kernels", numerical_kernels);

    std::printf("%s: %d of 11 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
