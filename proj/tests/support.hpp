#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "omega_grid/grid_model.hpp"

namespace omega_grid::testing {

using linalg::Matrix;
using linalg::Vector;

inline Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

inline Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

/// -a I + w J, the block shape of both Example 1 modes.
inline Matrix damped_rotation(double a, double w) { return mat2(-a, w, -w, -a); }

inline Matrix example_a1() { return damped_rotation(0.6, 2.98); }
inline Matrix example_a2() { return damped_rotation(0.4, 3.24); }
inline Vector example_b1() { return vec2(-2.98, 0.6); }
inline Vector example_b2() { return vec2(-6.48, 0.8); }

/// The two-mode planar system with B = I and u_q = b_q, U = {0}.
inline grid::SwitchedSystem example_system() {
    std::vector<grid::ModeSpec> modes;
    modes.push_back(grid::build_mode(0, example_a1(), Matrix::Identity(2, 2), example_b1()));
    modes.push_back(grid::build_mode(1, example_a2(), Matrix::Identity(2, 2), example_b2()));
    return grid::make_switched_system(std::move(modes), grid::LoadBox::zero(2));
}

/// Same modes with a nonzero load box on both channels.
inline grid::SwitchedSystem example_system_with_box(double half_width) {
    std::vector<grid::ModeSpec> modes;
    modes.push_back(grid::build_mode(0, example_a1(), Matrix::Identity(2, 2), example_b1()));
    modes.push_back(grid::build_mode(1, example_a2(), Matrix::Identity(2, 2), example_b2()));
    grid::LoadBox box{Vector::Constant(2, -half_width), Vector::Constant(2, half_width)};
    return grid::make_switched_system(std::move(modes), box);
}

/// Closed form of exp((-a I + w J) t) = e^{-a t} [[cos wt, sin wt], [-sin wt, cos wt]].
inline Matrix damped_rotation_exp(double a, double w, double t) {
    const double e = std::exp(-a * t);
    return e * mat2(std::cos(w * t), std::sin(w * t), -std::sin(w * t), std::cos(w * t));
}

/// Random matrix with spectrum shifted into the open left half plane.
inline Matrix random_stable(std::mt19937_64& rng, int n, double margin = 0.2) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix a = Matrix::NullaryExpr(n, n, [&] { return nd(rng); });
    // Gershgorin: shifting by the largest absolute row sum makes A Hurwitz.
    const double shift = a.cwiseAbs().rowwise().sum().maxCoeff() + margin;
    a -= shift * Matrix::Identity(n, n);
    return a;
}

inline Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    return Vector::NullaryExpr(n, [&] { return nd(rng); });
}

/// Ten generators with the documented 39-bus aggregate parameters.
inline std::vector<grid::GeneratorParams> ieee39_generators() {
    std::vector<grid::GeneratorParams> gens(10);
    for (auto& g : gens) {
        g.inertia = 5.0;
        g.damping = 1.5;
        g.turbine_tau = 2.0;
        g.governor_gain = 20.0;
        g.setpoint = 1.0;
    }
    return gens;
}

inline std::vector<grid::DeaParams> ieee39_deas() {
    return {{40.0, 2.0, 0.0}, {30.0, 1.0, 0.0}, {25.0, 3.0, 0.0}};
}

inline grid::SecondaryParams ieee39_secondary() {
    grid::SecondaryParams sec;
    sec.tau_z = 10.0;
    sec.beta = -0.1;
    sec.participation = grid::SecondaryParams::equal_participation(10);
    return sec;
}

}  // namespace omega_grid::testing
