#include "omega_grid/matrix_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace omega_grid::linalg {

namespace {

// Pade(13) coefficients and the 1-norm threshold below which no scaling is
// needed for double precision (Higham 2005).
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};
constexpr double kTheta13 = 5.371920351148152;

constexpr double kMaxCondition = 1e12;

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace

void require_square(const Matrix& a, const char* what) {
    if (a.rows() < 1 || a.rows() != a.cols()) {
        throw Error(ErrorKind::Dimension, std::string(what) + " must be square and non-empty, got " +
                                              std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()));
    }
}

void require_finite(const Matrix& a, const char* what) {
    if (!a.allFinite()) {
        throw Error(ErrorKind::Domain, std::string(what) + " has non-finite entries");
    }
}

Matrix mat_exp(const Matrix& a, double t) {
    require_square(a, "mat_exp: A");
    require_finite(a, "mat_exp: A");
    if (!std::isfinite(t)) throw Error(ErrorKind::Domain, "mat_exp: t must be finite");

    const Eigen::Index n = a.rows();
    Matrix x = a * t;
    const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > kTheta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
        x /= std::ldexp(1.0, squarings);
    }

    const Matrix ident = Matrix::Identity(n, n);
    const Matrix x2 = x * x;
    const Matrix x4 = x2 * x2;
    const Matrix x6 = x4 * x2;
    const auto& b = kPade13;

    Matrix tmp = b[13] * x6 + b[11] * x4 + b[9] * x2;
    Matrix u_inner = x6 * tmp;
    u_inner += b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * ident;
    const Matrix u = x * u_inner;

    tmp = b[12] * x6 + b[10] * x4 + b[8] * x2;
    Matrix v = x6 * tmp;
    v += b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * ident;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) r = r * r;
    return r;
}

SpectralReport spectral_report(const Matrix& a) {
    require_square(a, "spectral_report: A");
    require_finite(a, "spectral_report: A");
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::Domain, "spectral_report: eigenvalue iteration did not converge");
    }
    SpectralReport report;
    report.spectral_abscissa = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        const auto lambda = solver.eigenvalues()[i];
        report.eigenvalues.push_back(lambda);
        report.spectral_abscissa = std::max(report.spectral_abscissa, lambda.real());
    }
    report.is_hurwitz = report.spectral_abscissa < -kHurwitzMargin;
    report.marginal = !report.is_hurwitz && report.spectral_abscissa < 0.0;
    return report;
}

bool is_symmetric(const Matrix& p, double tol) {
    if (p.rows() != p.cols()) return false;
    return max_abs(p - p.transpose()) <= tol * std::max(1.0, max_abs(p));
}

bool is_spd(const Matrix& p) {
    if (!is_symmetric(p, 1e-10)) return false;
    Eigen::LLT<Matrix> llt(0.5 * (p + p.transpose()));
    return llt.info() == Eigen::Success && min_eigenvalue(p) > 0.0;
}

double min_eigenvalue(const Matrix& symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (symmetric + symmetric.transpose()),
                                                 Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(0);
}

Matrix lyapunov_solve(const Matrix& a, const Matrix& q) {
    require_square(a, "lyapunov_solve: A");
    require_finite(a, "lyapunov_solve: A");
    require_finite(q, "lyapunov_solve: Q");
    if (q.rows() != a.rows() || q.cols() != a.cols()) {
        throw Error(ErrorKind::Dimension, "lyapunov_solve: Q must match A's shape");
    }
    if (!is_spd(q)) throw Error(ErrorKind::Domain, "lyapunov_solve: Q is not symmetric positive-definite");
    const auto spectrum = spectral_report(a);
    if (!spectrum.is_hurwitz) {
        throw Error(ErrorKind::Infeasible,
                    "lyapunov_solve: A is not Hurwitz (spectral abscissa " +
                        std::to_string(spectrum.spectral_abscissa) + ")");
    }

    // A = U T U^H. With X = U^H P U and F = U^H Q U the equation becomes
    // T^H X + X T = -F, solved entry-wise since T^H is lower triangular.
    const Eigen::Index n = a.rows();
    Eigen::ComplexSchur<Matrix> schur(a);
    if (schur.info() != Eigen::Success) {
        throw Error(ErrorKind::Domain, "lyapunov_solve: Schur decomposition did not converge");
    }
    const Eigen::MatrixXcd& t = schur.matrixT();
    const Eigen::MatrixXcd& u = schur.matrixU();
    const Eigen::MatrixXcd f = u.adjoint() * q.cast<std::complex<double>>() * u;

    Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            std::complex<double> rhs = -f(i, j);
            for (Eigen::Index k = 0; k < i; ++k) rhs -= std::conj(t(k, i)) * x(k, j);
            for (Eigen::Index k = 0; k < j; ++k) rhs -= x(i, k) * t(k, j);
            x(i, j) = rhs / (std::conj(t(i, i)) + t(j, j));
        }
    }
    Matrix p = (u * x * u.adjoint()).real();
    return 0.5 * (p + p.transpose());
}

double weighted_norm(const Matrix& p, const Vector& v) {
    if (p.rows() != p.cols() || p.rows() != v.size()) {
        throw Error(ErrorKind::Dimension, "weighted_norm: P is " + std::to_string(p.rows()) + "x" +
                                              std::to_string(p.cols()) + " but v has " +
                                              std::to_string(v.size()) + " entries");
    }
    return std::sqrt(std::max(0.0, v.dot(p * v)));
}

std::pair<double, double> sym_eig_extremes(const Matrix& p) {
    require_square(p, "sym_eig_extremes: P");
    require_finite(p, "sym_eig_extremes: P");
    if (!is_symmetric(p)) throw Error(ErrorKind::Domain, "sym_eig_extremes: P is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (p + p.transpose()), Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return {ev(0), ev(ev.size() - 1)};
}

std::pair<double, double> pencil_extremes(const Matrix& num, const Matrix& den) {
    require_square(num, "pencil_extremes: numerator");
    if (den.rows() != num.rows() || den.cols() != num.cols()) {
        throw Error(ErrorKind::Dimension, "pencil_extremes: pencil matrices differ in shape");
    }
    Eigen::LLT<Matrix> llt(0.5 * (den + den.transpose()));
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::Domain, "pencil_extremes: denominator is not positive-definite");
    }
    const Matrix l = llt.matrixL();
    const Matrix linv_num = l.triangularView<Eigen::Lower>().solve(num);
    const Matrix whitened = l.triangularView<Eigen::Lower>().solve(linv_num.transpose()).transpose();
    return sym_eig_extremes(0.5 * (whitened + whitened.transpose()));
}

LinearSolution solve_linear_checked(const Matrix& a, const Vector& b) {
    require_square(a, "solve_linear: A");
    require_finite(a, "solve_linear: A");
    if (b.size() != a.rows()) {
        throw Error(ErrorKind::Dimension, "solve_linear: right-hand side length mismatch");
    }
    Eigen::PartialPivLU<Matrix> lu(a);
    const double rcond = lu.rcond();
    const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(condition <= kMaxCondition)) {
        throw Error(ErrorKind::Singular,
                    "solve_linear: matrix is singular or ill-conditioned (condition estimate " +
                        std::to_string(condition) + ")");
    }
    return {lu.solve(b), condition};
}

Matrix solve_linear(const Matrix& a, const Matrix& b) {
    require_square(a, "solve_linear: A");
    if (b.rows() != a.rows()) {
        throw Error(ErrorKind::Dimension, "solve_linear: right-hand side row mismatch");
    }
    Eigen::PartialPivLU<Matrix> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > 0.0 && 1.0 / rcond <= kMaxCondition)) {
        throw Error(ErrorKind::Singular, "solve_linear: matrix is singular or ill-conditioned");
    }
    return lu.solve(b);
}

double induced_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

}  // namespace omega_grid::linalg
