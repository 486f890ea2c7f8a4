#pragma once

#include <cstddef>
#include <vector>

#include "omega_grid/hybrid_engine.hpp"

/**
 * Explicit limit-set construction for slowly switched systems.
 *
 * For every ordered mode pair (q, r) the set contains the flow curve of
 * mode r started at the equilibrium of mode q, t -> y*_r + exp(A_r t)(y*_q - y*_r),
 * together with all mode equilibria. Curves are sampled adaptively and
 * queried as polylines.
 */
namespace omega_grid::omega {

using linalg::Matrix;
using linalg::Vector;

/// Theta_t^q(y) = y*_q + exp(A_q t)(y - y*_q).
Vector flow_map_theta(const grid::ModeSpec& mode, double t, const Vector& y);

struct OmegaCurve {
    std::size_t from_mode = 0;  ///< q: the curve starts at y*_q
    std::size_t flow_mode = 0;  ///< r: the curve follows mode r's flow
    double horizon = 0.0;       ///< T_qr
    std::vector<double> times;
    std::vector<Vector> points;
};

struct OmegaOptions {
    double eps_tail = 1e-3;           ///< terminal distance to the target equilibrium
    double chord_tol = 1e-3;          ///< max deviation of the curve from its polyline
    std::size_t max_samples = 1000000;  ///< per curve
    std::size_t initial_grid = 256;
};

/// Axis-aligned bounds of a run of consecutive polyline segments; used to
/// prune distance queries.
struct SegmentChunk {
    std::size_t curve = 0;
    std::size_t first = 0;  ///< first vertex index
    std::size_t last = 0;   ///< last vertex index (inclusive)
    Vector lower;
    Vector upper;
};

struct OmegaSet {
    std::vector<Vector> equilibria;
    std::vector<OmegaCurve> curves;
    double eps_tail = 0.0;
    double chord_tol = 0.0;
    std::size_t mode_count = 0;
    grid::LoadBox load_box;
    std::vector<SegmentChunk> chunks;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(equilibria.front().size()); }
    [[nodiscard]] std::size_t sample_count() const;
};

OmegaSet build_omega_set(const grid::SwitchedSystem& sys, const OmegaOptions& options = {});

/// Envelope-based horizon after which mode r's flow from `start` stays
/// within eps of y*_r.
double tail_horizon(const grid::ModeSpec& mode, const Vector& start, double eps);

/// Euclidean distance from a point to the union of the polylines and equilibria.
double distance_to_set(const Vector& point, const OmegaSet& omega);

struct DistancePoint {
    double t = 0.0;
    std::size_t j = 0;
    double distance = 0.0;
};

struct DistanceTrace {
    std::vector<DistancePoint> points;

    /// Largest distance over samples with t >= from_t.
    [[nodiscard]] double tail_sup(double from_t) const;
};

/// Product-set distance of every sample of an H_delta arc: the y distance
/// combined with the violations of q in Q, u~ in U and tau in [0, 1].
DistanceTrace distance_trace(const hybrid::HybridArc& arc, const OmegaSet& omega);

/// sqrt(lambda_max(P) / lambda_min(P)): Euclidean expansion bound of the
/// mode's flow map when P is a Lyapunov matrix for it.
double contraction_factor(const grid::ModeSpec& mode, const Matrix& p);

}  // namespace omega_grid::omega
