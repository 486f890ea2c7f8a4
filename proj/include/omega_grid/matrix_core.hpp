#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "omega_grid/errors.hpp"

/**
 * Dense real linear-algebra kernels shared by the model builders, the hybrid
 * simulator and the certificate synthesis.
 *
 * All functions are pure. Matrices are Eigen dynamic-size doubles; shape and
 * finiteness are validated at the boundary and reported as omega_grid::Error.
 */
namespace omega_grid::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Strict Hurwitz margin: spectral abscissa must be below -kHurwitzMargin.
inline constexpr double kHurwitzMargin = 1e-9;

struct SpectralReport {
    std::vector<std::complex<double>> eigenvalues;
    double spectral_abscissa = 0.0;
    bool is_hurwitz = false;
    /// Abscissa in [-kHurwitzMargin, 0): stable in exact arithmetic but too
    /// close to the imaginary axis to be accepted.
    bool marginal = false;
};

void require_square(const Matrix& a, const char* what);
void require_finite(const Matrix& a, const char* what);

/// exp(A t) by scaling and squaring with a degree-13 Pade approximant.
Matrix mat_exp(const Matrix& a, double t = 1.0);

/// Solves A^T P + P A + Q = 0 for symmetric positive-definite P.
/// Throws Infeasible if A is not Hurwitz and Domain if Q is not SPD.
Matrix lyapunov_solve(const Matrix& a, const Matrix& q);

SpectralReport spectral_report(const Matrix& a);

/// (v^T P v)^{1/2}.
double weighted_norm(const Matrix& p, const Vector& v);

/// (lambda_min, lambda_max) of a symmetric matrix.
std::pair<double, double> sym_eig_extremes(const Matrix& p);

/// Extreme generalized eigenvalues of the symmetric-definite pencil
/// (num, den): den = L L^T is whitened away before a symmetric eigensolve.
std::pair<double, double> pencil_extremes(const Matrix& num, const Matrix& den);

struct LinearSolution {
    Vector x;
    double condition = 0.0;  ///< 1-norm condition estimate of A
};

/// Solves A x = b, refusing matrices whose condition estimate exceeds 1e12.
LinearSolution solve_linear_checked(const Matrix& a, const Vector& b);

inline Vector solve_linear(const Matrix& a, const Vector& b) {
    return solve_linear_checked(a, b).x;
}

/// Same as solve_linear for a matrix right-hand side.
Matrix solve_linear(const Matrix& a, const Matrix& b);

bool is_symmetric(const Matrix& p, double tol = 1e-12);
bool is_spd(const Matrix& p);
double min_eigenvalue(const Matrix& symmetric);

/// Induced 2-norm (largest singular value).
double induced_norm(const Matrix& a);

}  // namespace omega_grid::linalg
