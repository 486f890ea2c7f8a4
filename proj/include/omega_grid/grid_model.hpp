#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "omega_grid/matrix_core.hpp"

/**
 * Power-system model assembly.
 *
 * Two model families are built here:
 *   - the aggregate single-frequency model, state (dw, P^m_1..P^m_G, z) and
 *     input (P_load, P*_1..P*_G);
 *   - the full per-bus DC-flow model, state (angles, speed deviations, P^m)
 *     over the buses that carry inertia, with pure-load buses eliminated by
 *     Kron reduction.
 *
 * Both end up as lists of ModeSpec packaged into a SwitchedSystem.
 */
namespace omega_grid::grid {

using linalg::Matrix;
using linalg::Vector;

struct GeneratorParams {
    double inertia = 0.0;        ///< M_g [s p.u.]
    double damping = 0.0;        ///< D_g [p.u.]
    double turbine_tau = 0.0;    ///< tau_g [s]
    double governor_gain = 0.0;  ///< K_gov,g [p.u.]
    double setpoint = 0.0;       ///< P*_g [p.u.]

    void validate() const;
};

/// Inverter-interfaced asset. inertia == damping == 0 encodes a pure-load bus.
struct DeaParams {
    double inertia = 0.0;
    double damping = 0.0;
    double reference_power = 0.0;

    void validate() const;
    [[nodiscard]] bool is_pure_load() const { return inertia == 0.0 && damping == 0.0; }
};

struct SecondaryParams {
    double tau_z = 0.0;
    double beta = 0.0;
    std::vector<double> participation;

    /// Equal participation over `generators` units.
    static std::vector<double> equal_participation(std::size_t generators);
};

struct Line {
    std::size_t from = 0;  ///< 0-based bus index
    std::size_t to = 0;
    double reactance = 0.0;
};

/// Angle reference of the integral action added to the turbine equation.
enum class AngleReference {
    Mean,      ///< K_i (delta_g - mean angle): rotation invariant
    Absolute,  ///< K_i delta_g
};

struct NetworkParams {
    std::size_t bus_count = 0;
    std::vector<std::size_t> generator_buses;  ///< parallel to the generator list
    std::vector<std::size_t> dea_buses;        ///< parallel to the DEA list
    std::vector<Line> lines;
    double sync_speed = 376.99111843077515;    ///< omega_s [rad/s], 60 Hz
    std::vector<double> bus_loads;             ///< P_load,n per bus [p.u.]
    double integral_gain = 1.0;                ///< K_i
    AngleReference angle_reference = AngleReference::Mean;
};

struct EffectiveParams {
    double inertia = 0.0;  ///< M_eff
    double damping = 0.0;  ///< D_net
};

struct StateSpace {
    Matrix a;
    Matrix b;
};

/// Full-order model together with its bookkeeping.
struct FullModel {
    Matrix a;
    Matrix b;
    std::vector<std::size_t> dynamic_buses;  ///< buses kept as states, ascending
    std::size_t generator_count = 0;

    /// Input vector (per-bus net loads, then generator references).
    [[nodiscard]] Vector input(const std::vector<double>& bus_net_loads,
                               const std::vector<double>& references) const;
};

struct ReducedModel {
    Matrix a;
    Matrix b;
    Matrix basis;  ///< T, orthonormal columns
};

struct ModeSpec {
    std::size_t id = 0;
    Matrix a;
    Matrix b;
    Vector u;
    Vector affine;       ///< b_q = B_q u_q
    Vector equilibrium;  ///< y*_q = -A_q^{-1} b_q
    Matrix inv_a_b;      ///< A_q^{-1} B_q

    [[nodiscard]] std::size_t state_dim() const { return static_cast<std::size_t>(a.rows()); }
    [[nodiscard]] std::size_t input_dim() const { return static_cast<std::size_t>(b.cols()); }
};

/// Axis-aligned load box U.
struct LoadBox {
    Vector lower;
    Vector upper;

    static LoadBox zero(std::size_t dim);
    [[nodiscard]] bool contains(const Vector& u, double tol = 1e-12) const;
    [[nodiscard]] double max_norm() const;  ///< max over corners of |u|
    [[nodiscard]] double distance(const Vector& u) const;
    [[nodiscard]] Vector clamp(const Vector& u) const;
};

struct SwitchedSystem {
    std::vector<ModeSpec> modes;
    LoadBox load_box;
    double delta3 = 0.0;
    double c = 0.0;

    [[nodiscard]] std::size_t state_dim() const { return modes.front().state_dim(); }
    [[nodiscard]] std::size_t input_dim() const { return modes.front().input_dim(); }
    [[nodiscard]] const ModeSpec& mode(std::size_t q) const;
};

EffectiveParams aggregate_effective(const std::vector<GeneratorParams>& gens,
                                    const std::vector<DeaParams>& deas);

StateSpace build_aggregate_matrices(const std::vector<GeneratorParams>& gens,
                                    const std::vector<DeaParams>& deas,
                                    const SecondaryParams& sec);

/// Aggregate input u = (P_load, P*_1..P*_G).
Vector aggregate_input(double net_load, const std::vector<GeneratorParams>& gens);

FullModel build_full_matrices(const NetworkParams& net, const std::vector<GeneratorParams>& gens,
                              const std::vector<DeaParams>& deas);

/// Projects out the single zero eigenvalue of A_bar. T spans the orthogonal
/// complement of the kernel of A_bar, so the reduced dynamics are exact and
/// the same basis serves every mode that shares the kernel.
ReducedModel reduce_zero_mode(const Matrix& a_bar, const Matrix& b_bar);

/// Applies an existing reduction basis to another mode's matrices. The
/// kernel direction of T must also lie in the kernel of A_bar.
ReducedModel reduce_with_basis(const Matrix& a_bar, const Matrix& b_bar, const Matrix& basis);

ModeSpec build_mode(std::size_t id, const Matrix& a, const Matrix& b, const Vector& u);

/// max over ordered mode pairs and u in U of |(A_r^{-1}B_r - A_q^{-1}B_q) u|.
double compute_delta3(const std::vector<ModeSpec>& modes, const LoadBox& box);
/// max over mode pairs of |y*_q - y*_r|.
double compute_c(const std::vector<ModeSpec>& modes);

/// Packages modes, validating shared dimensions and deriving delta3 and c.
SwitchedSystem make_switched_system(std::vector<ModeSpec> modes, LoadBox box);

}  // namespace omega_grid::grid
