#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "omega_grid/hybrid_engine.hpp"

/**
 * Input-to-state stability certificates for the switched system with
 * dwell-time timer and chatter bound N0.
 *
 * The certificate is the multiple-Lyapunov function
 *     V(y, q, tau) = exp(mu tau) y^T P_q y
 * together with the scalar constants that make it decrease along flows and
 * jumps, and the gains of the resulting exponential ISS bound
 *     |y(t,j)| <= k1 exp(-k2 (t+j)) |y(0,0)| + k3 (|u~|_inf + c).
 */
namespace omega_grid::iss {

using linalg::Matrix;
using linalg::Vector;

struct CertificateOptions {
    double theta = 0.5;
    double chatter_bound = 1.0;  ///< N0
    double margin = 0.05;        ///< relative inflation of mu, R and M
    /// Per-mode Q_q; identity when empty.
    std::vector<Matrix> q_choice;
};

struct IssCertificate {
    std::vector<Matrix> p;  ///< P_q
    std::vector<Matrix> q;  ///< Q_q
    std::vector<Vector> equilibria;
    double theta = 0.0;
    double chatter_bound = 1.0;
    double margin = 0.0;
    double gamma_max = 1.0;  ///< max pencil eigenvalue of (P_{q+}, P_q)
    double mu = 0.0;
    double eta_star = 0.0;
    double eta = 0.0;  ///< operating timer rate (eta_star / 2)
    double r_scale = 0.0;
    double m_scale = 0.0;
    Matrix r;  ///< R = r I
    Matrix m;  ///< M = m I
    double lambda = 0.0;
    double rho = 0.0;
    double lambda_tilde = 0.0;
    double gain = 0.0;  ///< comparison gain on sup |u|^2
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double kappa3 = 0.0;
    double c = 0.0;
    double alpha_lower = 0.0;
    double alpha_upper = 0.0;
    double min_eig_s = 0.0;
    std::optional<double> min_eig_y;  ///< empty for single-mode systems

    [[nodiscard]] std::size_t mode_count() const { return p.size(); }
};

IssCertificate synthesize_certificate(const grid::SwitchedSystem& sys, const CertificateOptions& options = {});

/// S for mode q at the certificate's eta and R.
Matrix s_matrix(const grid::ModeSpec& mode, const IssCertificate& cert);
/// Y for the ordered pair (q -> q+) at the certificate's mu and M.
Matrix y_matrix(const IssCertificate& cert, std::size_t q, std::size_t q_plus);

/// exp(mu tau) y^T P_q y.
double evaluate_V(const hybrid::HybridState& xi, const IssCertificate& cert);

enum class VerificationStatus { Pass, Fail, Inconclusive };

std::string_view to_string(VerificationStatus status);

struct MarginPoint {
    double t = 0.0;
    std::size_t j = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  ///< rhs - lhs
};

struct VerificationReport {
    std::size_t flow_checks = 0;
    std::size_t flow_skipped = 0;       ///< samples without a uniform stencil
    std::size_t flow_violations = 0;
    double flow_max_violation = 0.0;
    std::size_t flow_inconclusive = 0;  ///< stencil error estimate above tolerance
    double max_fd_error = 0.0;
    double fd_tolerance = 0.0;
    std::size_t jump_checks = 0;
    std::size_t jump_violations = 0;
    double jump_max_violation = 0.0;
    std::size_t bound_checks = 0;
    std::size_t bound_violations = 0;
    double min_bound_margin = 0.0;
    std::vector<MarginPoint> margin_trace;
    VerificationStatus status = VerificationStatus::Pass;

    [[nodiscard]] bool pass() const { return status == VerificationStatus::Pass; }
};

/// Relative finite-difference tolerance: violations are reported when
/// dV/dt exceeds -lambda V + rho |u|^2 by more than fd_rel_tol * max V.
inline constexpr double kFdRelTolerance = 1e-6;

/// Flow inequality by centered differences of V along the samples of each
/// flow interval, jump inequality exactly at every jump.
VerificationReport check_decrease(const hybrid::HybridArc& arc, const IssCertificate& cert,
                                  const hybrid::LoadGenerator& load, double fd_rel_tol = kFdRelTolerance);

/// Exponential ISS bound at every sample; u_inf bounds |u~(t)| over the run.
VerificationReport check_iss_bound(const hybrid::HybridArc& arc, const IssCertificate& cert, double u_inf);

}  // namespace omega_grid::iss
