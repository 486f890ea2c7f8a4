#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "omega_grid/grid_model.hpp"

namespace omega_grid::hybrid {

using linalg::Matrix;
using linalg::Vector;

// ---------------------------------------------------------------------------
// Exogenous slow loads
// ---------------------------------------------------------------------------

enum class LoadKind { Constant, Sinusoid, Scripted };

struct SinusoidChannel {
    double offset = 0.0;
    double amplitude = 0.0;
    double frequency = 0.0;  ///< rad per unit of (scaled) time
    double phase = 0.0;
};

/**
 * Load signal u~(t) = g(s t) where g is one of the generator shapes and s is
 * the time scale (delta2 for the slow-switching system, 1 for ISS runs).
 * Every shape keeps its values inside the load box, which is checked by
 * validate().
 */
class LoadGenerator {
public:
    static LoadGenerator constant(Vector value, grid::LoadBox box);
    static LoadGenerator sinusoid(std::vector<SinusoidChannel> channels, grid::LoadBox box);
    /// Piecewise-linear interpolation of (time, value) samples, held at the ends.
    static LoadGenerator scripted(std::vector<double> times, std::vector<Vector> values, grid::LoadBox box);

    [[nodiscard]] LoadGenerator time_scaled(double scale) const;

    [[nodiscard]] Vector value(double t) const;
    /// d/dt u~(t), including the time scale.
    [[nodiscard]] Vector rate(double t) const;
    /// Upper bound on |u~(t)| over all t.
    [[nodiscard]] double sup_norm() const;

    [[nodiscard]] LoadKind kind() const { return kind_; }
    [[nodiscard]] bool is_constant() const { return kind_ == LoadKind::Constant || scale_ == 0.0; }
    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(box_.lower.size()); }
    [[nodiscard]] const grid::LoadBox& box() const { return box_; }

private:
    void validate() const;

    LoadKind kind_ = LoadKind::Constant;
    Vector constant_;
    std::vector<SinusoidChannel> channels_;
    std::vector<double> times_;
    std::vector<Vector> values_;
    grid::LoadBox box_;
    double scale_ = 1.0;
};

// ---------------------------------------------------------------------------
// Hybrid arcs
// ---------------------------------------------------------------------------

enum class ArcKind { HDelta, Iss };

/// xi = (y, q, u~, tau). For ISS arcs u~ records the input value at t.
struct HybridState {
    Vector y;
    std::size_t q = 0;
    Vector u_tilde;
    double tau = 0.0;
};

struct HybridSample {
    double t = 0.0;
    std::size_t j = 0;
    HybridState state;
};

struct JumpRecord {
    double t = 0.0;
    std::size_t j = 0;  ///< jump index before the jump
    std::size_t q_before = 0;
    std::size_t q_after = 0;
    double tau_before = 0.0;
    Vector y_before;
    Vector y_after;
    Vector u_tilde;
};

struct TimeInterval {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::size_t j = 0;
};

struct HybridTimeDomain {
    std::vector<TimeInterval> intervals;
};

struct HybridArc {
    ArcKind kind = ArcKind::HDelta;
    HybridTimeDomain domain;
    std::vector<HybridSample> samples;
    std::vector<JumpRecord> jumps;
    double step = 0.0;        ///< integrator step used
    bool constant_load = false;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class JumpPolicy {
    Immediate,    ///< jump as soon as the state enters D
    RandomDelay,  ///< ISS only: fire at a uniformly drawn timer value in [max(1,tau), N0]
};

enum class ModeSelection { UniformRandom, RoundRobin, Scripted };

enum class TimerRatePolicy {
    Max,       ///< constant at delta1 (H_delta) or eta (ISS)
    Scripted,  ///< piecewise-constant schedule, each rate clamped to the maximum
};

enum class JumpPerturbation {
    Exact,        ///< (A_{q+}^{-1}B_{q+} - A_q^{-1}B_q) u~
    BallUniform,  ///< uniform sample of the delta_inflation ball
};

struct RateSegment {
    double until = 0.0;  ///< segment ends at this time
    double rate = 0.0;
};

struct SimConfig {
    double delta1 = 0.0;
    double delta2 = 0.0;
    std::optional<double> delta_inflation;  ///< defaults to the system's delta3
    double eta = 0.0;
    double chatter_bound = 1.0;  ///< N0
    double step = 0.01;          ///< h [s]
    double horizon = 100.0;      ///< T [s]
    std::size_t max_jumps = 10000;
    std::uint64_t seed = 0;
    JumpPolicy jump_policy = JumpPolicy::Immediate;
    ModeSelection mode_selection = ModeSelection::UniformRandom;
    std::vector<std::size_t> mode_script;
    TimerRatePolicy timer_rate = TimerRatePolicy::Max;
    std::vector<RateSegment> rate_script;
    JumpPerturbation perturbation = JumpPerturbation::Exact;
    std::size_t sample_stride = 1;

    void validate() const;
};

/// Bisection tolerance for locating timer threshold crossings [s].
inline constexpr double kEventTolerance = 1e-9;

HybridArc simulate_hdelta(const grid::SwitchedSystem& sys, const SimConfig& cfg, const HybridState& init);
HybridArc simulate_hdelta(const grid::SwitchedSystem& sys, const SimConfig& cfg, const LoadGenerator& load,
                          const HybridState& init);

HybridArc simulate_iss(const grid::SwitchedSystem& sys, const SimConfig& cfg, const LoadGenerator& load,
                       const HybridState& init);

/// N(t1,t2) <= N0 + (t2 - t1)/tau_d over every window spanned by jump pairs.
bool verify_adt(const HybridArc& arc, double n0, double tau_d);

/// Physical state x for every sample of the arc.
std::vector<Vector> to_original_coords(const HybridArc& arc, const grid::SwitchedSystem& sys, ArcKind which);

struct SolutionCheck {
    bool ok = true;
    std::vector<std::string> problems;
};

/// Checks an arc against the flow/jump data of the system it claims to
/// solve: samples lie in C, jump predecessors in D, successors in G(D),
/// and the domain is a proper hybrid time domain. When the load was
/// constant the flow segments are also compared with the closed-form mode
/// flow to `flow_tol`.
SolutionCheck validate_solution(const HybridArc& arc, const grid::SwitchedSystem& sys, const SimConfig& cfg,
                                double tol = 1e-7, double flow_tol = 1e-6);

}  // namespace omega_grid::hybrid
