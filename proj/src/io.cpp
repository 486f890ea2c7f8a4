#include "omega_grid/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace omega_grid::io {

std::string format_double(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return {buffer, result.ptr};
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const json& j, const std::string& pointer) {
    if (!j.is_array() || j.empty()) throw ConfigError(pointer, "expected a non-empty array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(pointer + "/" + std::to_string(i), "expected a number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Matrix matrix_from_json(const json& j, const std::string& pointer) {
    if (!j.is_array() || j.empty()) throw ConfigError(pointer, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = -1;
    Matrix m;
    for (std::size_t r = 0; r < j.size(); ++r) {
        const std::string row_ptr = pointer + "/" + std::to_string(r);
        const Vector row = vector_from_json(j[r], row_ptr);
        if (cols < 0) {
            cols = row.size();
            m.resize(rows, cols);
        } else if (row.size() != cols) {
            throw ConfigError(row_ptr, "rows must all have the same length");
        }
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

json system_to_json(const grid::SwitchedSystem& sys) {
    json modes = json::array();
    for (const auto& mode : sys.modes) {
        const auto spectrum = linalg::spectral_report(mode.a);
        json eig = json::array();
        for (const auto& lambda : spectrum.eigenvalues) eig.push_back({lambda.real(), lambda.imag()});
        modes.push_back({{"id", mode.id},
                         {"A", to_json(mode.a)},
                         {"B", to_json(mode.b)},
                         {"u", to_json(mode.u)},
                         {"b", to_json(mode.affine)},
                         {"equilibrium", to_json(mode.equilibrium)},
                         {"spectral_abscissa", spectrum.spectral_abscissa},
                         {"is_hurwitz", spectrum.is_hurwitz},
                         {"eigenvalues", eig}});
    }
    return {{"state_dim", sys.state_dim()},
            {"input_dim", sys.input_dim()},
            {"delta3", sys.delta3},
            {"c", sys.c},
            {"load_box", {{"lower", to_json(sys.load_box.lower)}, {"upper", to_json(sys.load_box.upper)}}},
            {"modes", modes}};
}

json omega_set_to_json(const omega::OmegaSet& omega) {
    json eq = json::array();
    for (const auto& e : omega.equilibria) eq.push_back(to_json(e));
    json curves = json::array();
    for (const auto& curve : omega.curves) {
        json samples = json::array();
        for (std::size_t k = 0; k < curve.points.size(); ++k) {
            json row = json::array({curve.times[k]});
            for (Eigen::Index i = 0; i < curve.points[k].size(); ++i) row.push_back(curve.points[k](i));
            samples.push_back(std::move(row));
        }
        curves.push_back({{"from_mode", curve.from_mode},
                          {"flow_mode", curve.flow_mode},
                          {"horizon", curve.horizon},
                          {"samples", std::move(samples)}});
    }
    return {{"eps_tail", omega.eps_tail},
            {"chord_tol", omega.chord_tol},
            {"equilibria", std::move(eq)},
            {"curves", std::move(curves)}};
}

json certificate_to_json(const iss::IssCertificate& cert) {
    json p = json::array();
    json q = json::array();
    for (std::size_t k = 0; k < cert.mode_count(); ++k) {
        p.push_back(to_json(cert.p[k]));
        q.push_back(to_json(cert.q[k]));
    }
    return {{"settings", {{"theta", cert.theta}, {"chatter_bound", cert.chatter_bound}, {"margin", cert.margin}}},
            {"P", std::move(p)},
            {"Q", std::move(q)},
            {"gamma_max", cert.gamma_max},
            {"mu", cert.mu},
            {"eta_star", cert.eta_star},
            {"eta", cert.eta},
            {"R", to_json(cert.r)},
            {"M", to_json(cert.m)},
            {"lambda", cert.lambda},
            {"rho", cert.rho},
            {"lambda_tilde", cert.lambda_tilde},
            {"gain", cert.gain},
            {"kappa1", cert.kappa1},
            {"kappa2", cert.kappa2},
            {"kappa3", cert.kappa3},
            {"c", cert.c},
            {"alpha_lower", cert.alpha_lower},
            {"alpha_upper", cert.alpha_upper},
            {"min_eig_S", cert.min_eig_s},
            {"min_eig_Y", cert.min_eig_y ? json(*cert.min_eig_y) : json(nullptr)}};
}

json report_to_json(const iss::VerificationReport& r) {
    return {{"status", std::string(iss::to_string(r.status))},
            {"flow", {{"checks", r.flow_checks},
                      {"skipped", r.flow_skipped},
                      {"violations", r.flow_violations},
                      {"max_violation", r.flow_max_violation},
                      {"inconclusive", r.flow_inconclusive},
                      {"max_fd_error", r.max_fd_error},
                      {"fd_tolerance", r.fd_tolerance}}},
            {"jump", {{"checks", r.jump_checks}, {"violations", r.jump_violations}, {"max_violation", r.jump_max_violation}}},
            {"bound", {{"checks", r.bound_checks}, {"violations", r.bound_violations}, {"min_margin", r.min_bound_margin}}}};
}

void write_arc_csv(std::ostream& out, const hybrid::HybridArc& arc, const grid::SwitchedSystem& sys) {
    const auto xs = hybrid::to_original_coords(arc, sys, arc.kind);
    const auto m = sys.input_dim();
    const auto n = sys.state_dim();
    out << "t,j,q,tau";
    for (std::size_t i = 0; i < m; ++i) out << ",u_tilde" << i;
    for (std::size_t i = 0; i < n; ++i) out << ",y" << i;
    for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
    out << '\n';
    for (std::size_t k = 0; k < arc.samples.size(); ++k) {
        const auto& s = arc.samples[k];
        out << format_double(s.t) << ',' << s.j << ',' << s.state.q << ',' << format_double(s.state.tau);
        for (Eigen::Index i = 0; i < s.state.u_tilde.size(); ++i) out << ',' << format_double(s.state.u_tilde(i));
        for (Eigen::Index i = 0; i < s.state.y.size(); ++i) out << ',' << format_double(s.state.y(i));
        for (Eigen::Index i = 0; i < xs[k].size(); ++i) out << ',' << format_double(xs[k](i));
        out << '\n';
    }
}

void write_jump_csv(std::ostream& out, const hybrid::HybridArc& arc) {
    out << "t,j,q_before,q_after,tau_before\n";
    for (const auto& jump : arc.jumps) {
        out << format_double(jump.t) << ',' << jump.j << ',' << jump.q_before << ',' << jump.q_after << ','
            << format_double(jump.tau_before) << '\n';
    }
}

void write_distance_csv(std::ostream& out, const omega::DistanceTrace& trace) {
    out << "t,j,dist\n";
    for (const auto& p : trace.points) {
        out << format_double(p.t) << ',' << p.j << ',' << format_double(p.distance) << '\n';
    }
}

void write_margin_csv(std::ostream& out, const iss::VerificationReport& report) {
    out << "t,j,norm_y,bound,margin\n";
    for (const auto& p : report.margin_trace) {
        out << format_double(p.t) << ',' << p.j << ',' << format_double(p.lhs) << ',' << format_double(p.rhs) << ','
            << format_double(p.margin) << '\n';
    }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Config, "cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw Error(ErrorKind::Config, "failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const json& document) { write_file(path, document.dump(2) + "\n"); }

}  // namespace omega_grid::io
