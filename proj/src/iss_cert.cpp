#include "omega_grid/iss_cert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace omega_grid::iss {

namespace {

constexpr double kPsdTolerance = 1e-9;

std::string pair_name(std::size_t q, std::size_t r) {
    return "(" + std::to_string(q) + " -> " + std::to_string(r) + ")";
}

double sigma_min(const Matrix& a) { return Eigen::JacobiSVD<Matrix>(a).singularValues().minCoeff(); }

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double max_sym_eig(const Matrix& a) { return linalg::sym_eig_extremes(symmetrize(a)).second; }

}  // namespace

IssCertificate synthesize_certificate(const grid::SwitchedSystem& sys, const CertificateOptions& opt) {
    if (!(opt.theta > 0.0 && opt.theta < 1.0)) throw Error(ErrorKind::Domain, "theta must lie in (0, 1)");
    if (!(opt.chatter_bound >= 1.0)) throw Error(ErrorKind::Domain, "N0 must be at least 1");
    if (!(opt.margin > 0.0)) throw Error(ErrorKind::Domain, "synthesis margin must be positive");
    const std::size_t count = sys.modes.size();
    if (count == 0) throw Error(ErrorKind::Domain, "system has no modes");
    if (!opt.q_choice.empty() && opt.q_choice.size() != count) {
        throw Error(ErrorKind::Dimension, "Q choice needs one matrix per mode");
    }

    IssCertificate cert;
    cert.theta = opt.theta;
    cert.chatter_bound = opt.chatter_bound;
    cert.margin = opt.margin;
    const auto n = static_cast<Eigen::Index>(sys.state_dim());
    for (std::size_t k = 0; k < count; ++k) {
        const auto& mode = sys.modes[k];
        if (!linalg::spectral_report(mode.a).is_hurwitz) {
            throw Error(ErrorKind::Infeasible, "mode " + std::to_string(k) + " is not Hurwitz");
        }
        Matrix q = opt.q_choice.empty() ? Matrix(Matrix::Identity(n, n)) : opt.q_choice[k];
        cert.p.push_back(linalg::lyapunov_solve(mode.a, q));
        cert.q.push_back(std::move(q));
        cert.equilibria.push_back(mode.equilibrium);
    }

    // mu: theta P_q - e^{-mu} P_{q+} > 0  <=>  e^{mu} > gamma(q, q+) / theta
    cert.gamma_max = 1.0;
    for (std::size_t q = 0; q < count; ++q) {
        for (std::size_t r = 0; r < count; ++r) {
            if (r != q) cert.gamma_max = std::max(cert.gamma_max, linalg::pencil_extremes(cert.p[r], cert.p[q]).second);
        }
    }
    cert.mu = (1.0 + opt.margin) * std::log(cert.gamma_max / opt.theta);

    // eta*: theta Q_q - eta mu P_q > 0 for every eta below it
    double pencil_q = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < count; ++q) {
        pencil_q = std::min(pencil_q, linalg::pencil_extremes(cert.q[q], cert.p[q]).first);
    }
    cert.eta_star = opt.theta * pencil_q / cert.mu;
    cert.eta = 0.5 * cert.eta_star;

    // R from the Schur complement of S
    double r_scale = 0.0;
    for (std::size_t q = 0; q < count; ++q) {
        const Matrix block = opt.theta * cert.q[q] - cert.eta * cert.mu * cert.p[q];
        const Matrix pb = cert.p[q] * sys.modes[q].b;
        r_scale = std::max(r_scale, max_sym_eig(pb.transpose() * linalg::solve_linear(block, pb)));
    }
    cert.r_scale = (1.0 + opt.margin) * r_scale;
    const auto m_in = static_cast<Eigen::Index>(sys.input_dim());
    cert.r = cert.r_scale * Matrix::Identity(m_in, m_in);

    // M from the Schur complement of Y
    const double decay = std::exp(-cert.mu);
    double m_scale = 0.0;
    for (std::size_t q = 0; q < count; ++q) {
        for (std::size_t r = 0; r < count; ++r) {
            if (r == q) continue;
            const Matrix block = opt.theta * cert.p[q] - decay * cert.p[r];
            if (!linalg::is_spd(symmetrize(block))) {
                throw Error(ErrorKind::Infeasible,
                            "theta P_q - exp(-mu) P_q+ is not positive definite for pair " + pair_name(q, r));
            }
            const Matrix schur = decay * decay * cert.p[r] * linalg::solve_linear(block, cert.p[r]);
            m_scale = std::max(m_scale, max_sym_eig(schur));
        }
    }
    cert.m_scale = (1.0 + opt.margin) * m_scale;
    cert.m = cert.m_scale * Matrix::Identity(n, n);

    double ratio = 1.0;
    double p_max = 0.0;
    double p_min = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < count; ++q) {
        const double smax_p = linalg::induced_norm(cert.p[q]);
        ratio = std::min(ratio, sigma_min(cert.q[q]) / smax_p);
        p_max = std::max(p_max, smax_p);
        p_min = std::min(p_min, sigma_min(cert.p[q]));
    }
    cert.lambda = (1.0 - opt.theta) * ratio;
    // The jump difference also carries exp(-mu) u_d^T P_{q+} u_d, so the jump
    // gain is m + exp(-mu) max sigma_max(P).
    const double jump_gain = count > 1 ? cert.m_scale + decay * p_max : 0.0;
    cert.rho = std::exp(cert.mu * opt.chatter_bound) * std::max(cert.r_scale, jump_gain);
    cert.c = sys.c;
    cert.alpha_lower = p_min;
    cert.alpha_upper = std::exp(cert.mu * opt.chatter_bound) * p_max;

    // Comparison: flows contract at rate lambda, jumps by (1 - lambda) <= e^{-lambda}.
    cert.lambda_tilde = cert.lambda < 1.0 ? std::min(cert.lambda, -std::log1p(-cert.lambda)) : 0.5 * cert.lambda;
    cert.gain = cert.rho * (1.0 / cert.lambda_tilde + 1.0 / (1.0 - std::exp(-cert.lambda_tilde)));
    cert.kappa1 = std::max(1.0, std::sqrt(cert.alpha_upper / cert.alpha_lower));
    cert.kappa2 = 0.5 * cert.lambda_tilde;
    cert.kappa3 = std::sqrt(cert.gain / cert.alpha_lower);

    // Assert every semidefinite constraint the construction relies on.
    for (std::size_t q = 0; q < count; ++q) {
        const Matrix block = cert.q[q] - cert.eta * cert.mu * cert.p[q];
        if (!linalg::is_spd(symmetrize(block))) {
            throw Error(ErrorKind::Infeasible, "Q_q - eta mu P_q is not positive definite for mode " + std::to_string(q));
        }
        const double s_min = linalg::min_eigenvalue(symmetrize(s_matrix(sys.modes[q], cert)));
        cert.min_eig_s = q == 0 ? s_min : std::min(cert.min_eig_s, s_min);
        if (s_min < -kPsdTolerance) {
            throw Error(ErrorKind::Infeasible, "S is not positive semidefinite for mode " + std::to_string(q));
        }
        for (std::size_t r = 0; r < count; ++r) {
            if (r == q) continue;
            const double y_min = linalg::min_eigenvalue(symmetrize(y_matrix(cert, q, r)));
            cert.min_eig_y = cert.min_eig_y ? std::min(*cert.min_eig_y, y_min) : y_min;
            if (y_min < -kPsdTolerance) {
                throw Error(ErrorKind::Infeasible, "Y is not positive semidefinite for pair " + pair_name(q, r));
            }
        }
    }
    return cert;
}

Matrix s_matrix(const grid::ModeSpec& mode, const IssCertificate& cert) {
    const std::size_t q = mode.id;
    if (q >= cert.mode_count()) throw Error(ErrorKind::Domain, "s_matrix: mode not covered by the certificate");
    const auto n = mode.a.rows();
    const auto m = mode.b.cols();
    Matrix s(n + m, n + m);
    const Matrix pb = cert.p[q] * mode.b;
    s.topLeftCorner(n, n) = cert.theta * cert.q[q] - cert.eta * cert.mu * cert.p[q];
    s.topRightCorner(n, m) = -pb;
    s.bottomLeftCorner(m, n) = -pb.transpose();
    s.bottomRightCorner(m, m) = cert.r;
    return s;
}

Matrix y_matrix(const IssCertificate& cert, std::size_t q, std::size_t q_plus) {
    if (q >= cert.mode_count() || q_plus >= cert.mode_count()) {
        throw Error(ErrorKind::Domain, "y_matrix: mode not covered by the certificate");
    }
    const auto n = cert.p[q].rows();
    const double decay = std::exp(-cert.mu);
    Matrix y(2 * n, 2 * n);
    y.topLeftCorner(n, n) = cert.theta * cert.p[q] - decay * cert.p[q_plus];
    y.topRightCorner(n, n) = -decay * cert.p[q_plus];
    y.bottomLeftCorner(n, n) = -decay * cert.p[q_plus];
    y.bottomRightCorner(n, n) = cert.m;
    return y;
}

double evaluate_V(const hybrid::HybridState& xi, const IssCertificate& cert) {
    if (xi.q >= cert.mode_count()) throw Error(ErrorKind::Domain, "evaluate_V: unknown mode " + std::to_string(xi.q));
    if (xi.y.size() != cert.p[xi.q].rows()) throw Error(ErrorKind::Dimension, "evaluate_V: state dimension mismatch");
    if (xi.tau < -1e-9 || xi.tau > cert.chatter_bound + 1e-9) {
        throw Error(ErrorKind::Domain, "evaluate_V: timer outside [0, N0]");
    }
    return std::exp(cert.mu * xi.tau) * xi.y.dot(cert.p[xi.q] * xi.y);
}

std::string_view to_string(VerificationStatus status) {
    switch (status) {
        case VerificationStatus::Pass: return "pass";
        case VerificationStatus::Fail: return "fail";
        case VerificationStatus::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

namespace {

void check_cert_matches(const hybrid::HybridArc& arc, const IssCertificate& cert) {
    if (arc.kind != hybrid::ArcKind::Iss) throw Error(ErrorKind::Domain, "verification needs an ISS arc");
    for (const auto& s : arc.samples) {
        if (s.state.q >= cert.mode_count() || s.state.y.size() != cert.p.front().rows()) {
            throw Error(ErrorKind::Dimension, "arc does not match the certificate's system");
        }
    }
}

/// Spacing of the samples around i when i-k..i+k share j and are equally
/// spaced; 0 otherwise. Samples are thinned by the stride and bunched
/// around jump events, so the spacing is read from the arc itself.
double uniform_spacing(const std::vector<hybrid::HybridSample>& s, std::size_t i, std::size_t k) {
    if (i < k || i + k >= s.size()) return 0.0;
    const double h = s[i].t - s[i - 1].t;
    if (!(h > 0.0)) return 0.0;
    const double tol = 1e-9 * std::max(1.0, s[i].t);
    for (std::size_t d = 1; d <= k; ++d) {
        const auto& lo = s[i - d];
        const auto& hi = s[i + d];
        if (lo.j != s[i].j || hi.j != s[i].j) return 0.0;
        const double expect = h * static_cast<double>(d);
        if (std::abs((s[i].t - lo.t) - expect) > tol || std::abs((hi.t - s[i].t) - expect) > tol) return 0.0;
    }
    return h;
}

double five_point(const std::vector<double>& v, std::size_t i, std::size_t stride, double h) {
    return (v[i - 2 * stride] - 8.0 * v[i - stride] + 8.0 * v[i + stride] - v[i + 2 * stride]) / (12.0 * h);
}

}  // namespace

VerificationReport check_decrease(const hybrid::HybridArc& arc, const IssCertificate& cert,
                                  const hybrid::LoadGenerator& load, double fd_rel_tol) {
    check_cert_matches(arc, cert);
    VerificationReport report;
    const auto& samples = arc.samples;
    std::vector<double> v(samples.size());
    double v_max = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        v[i] = evaluate_V(samples[i].state, cert);
        v_max = std::max(v_max, v[i]);
    }
    report.fd_tolerance = std::max(fd_rel_tol * v_max, 1e-14);

    // flows
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double h = uniform_spacing(samples, i, 2);
        if (h == 0.0) {
            ++report.flow_skipped;
            continue;
        }
        const double dv = five_point(v, i, 1, h);
        const double u2 = load.value(samples[i].t).squaredNorm();
        const double excess = dv - (-cert.lambda * v[i] + cert.rho * u2);
        ++report.flow_checks;
        if (uniform_spacing(samples, i, 4) == h) {
            // Richardson: the O(h^4) error of the h stencil is (D_2h - D_h) / 15.
            const double err = std::abs(five_point(v, i, 2, 2.0 * h) - dv) / 15.0;
            report.max_fd_error = std::max(report.max_fd_error, err);
            if (err > report.fd_tolerance) ++report.flow_inconclusive;
        }
        if (excess > report.fd_tolerance) {
            ++report.flow_violations;
            report.flow_max_violation = std::max(report.flow_max_violation, excess);
        }
    }

    // jumps
    for (const auto& jump : arc.jumps) {
        const hybrid::HybridState before{jump.y_before, jump.q_before, {}, jump.tau_before};
        const hybrid::HybridState after{jump.y_after, jump.q_after, {}, jump.tau_before - 1.0};
        const double v_before = evaluate_V(before, cert);
        const double dv = evaluate_V(after, cert) - v_before;
        const Vector u_d = cert.equilibria[jump.q_before] - cert.equilibria[jump.q_after];
        const double rhs = -cert.lambda * v_before + cert.rho * u_d.squaredNorm();
        const double excess = dv - rhs;
        ++report.jump_checks;
        if (excess > 1e-9 * std::max({1.0, std::abs(rhs), v_before})) {
            ++report.jump_violations;
            report.jump_max_violation = std::max(report.jump_max_violation, excess);
        }
    }

    if (report.flow_violations > 0 || report.jump_violations > 0) {
        report.status = VerificationStatus::Fail;
    } else if (report.flow_inconclusive > 0 || (report.flow_checks == 0 && report.flow_skipped > 0)) {
        // no usable stencil is no evidence either way
        report.status = VerificationStatus::Inconclusive;
    }
    return report;
}

VerificationReport check_iss_bound(const hybrid::HybridArc& arc, const IssCertificate& cert, double u_inf) {
    check_cert_matches(arc, cert);
    if (!(u_inf >= 0.0)) throw Error(ErrorKind::Domain, "check_iss_bound: u_inf must be non-negative");
    VerificationReport report;
    if (arc.samples.empty()) return report;
    const double y0 = arc.samples.front().state.y.norm();
    const double offset = cert.kappa3 * (u_inf + cert.c);
    report.min_bound_margin = std::numeric_limits<double>::infinity();
    report.margin_trace.reserve(arc.samples.size());
    for (const auto& s : arc.samples) {
        const double lhs = s.state.y.norm();
        const double rhs = cert.kappa1 * std::exp(-cert.kappa2 * (s.t + static_cast<double>(s.j))) * y0 + offset;
        const double margin = rhs - lhs;
        report.margin_trace.push_back({s.t, s.j, lhs, rhs, margin});
        report.min_bound_margin = std::min(report.min_bound_margin, margin);
        ++report.bound_checks;
        if (margin < -1e-12 * std::max(1.0, rhs)) ++report.bound_violations;
    }
    if (report.bound_violations > 0) report.status = VerificationStatus::Fail;
    return report;
}

}  // namespace omega_grid::iss
