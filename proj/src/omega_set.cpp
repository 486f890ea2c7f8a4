#include "omega_grid/omega_set.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace omega_grid::omega {

namespace {

constexpr std::size_t kChunkSegments = 16;

double point_segment_distance(const Vector& p, const Vector& a, const Vector& b) {
    const Vector ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + s * ab)).norm();
}

double box_distance(const Vector& p, const Vector& lower, const Vector& upper) {
    const Vector below = (lower - p).cwiseMax(0.0);
    const Vector above = (p - upper).cwiseMax(0.0);
    return (below + above).norm();
}

/// exp(A h / 4)^k for k = 1..3 at every bisection depth of one grid cell,
/// so refinement probes cost a matrix-vector product each.
class ProbeCache {
public:
    ProbeCache(const Matrix& a, double cell) : a_(a), cell_(cell) {}

    const Matrix& power(int depth, int k) {
        while (static_cast<int>(levels_.size()) <= depth) {
            const double span = cell_ / std::ldexp(1.0, static_cast<int>(levels_.size()));
            const Matrix e1 = linalg::mat_exp(a_, 0.25 * span);
            const Matrix e2 = e1 * e1;
            levels_.push_back({e1, e2, e2 * e1});
        }
        return levels_[static_cast<std::size_t>(depth)][static_cast<std::size_t>(k - 1)];
    }

private:
    const Matrix& a_;
    double cell_;
    std::vector<std::array<Matrix, 3>> levels_;
};

void build_chunks(OmegaSet& omega) {
    omega.chunks.clear();
    for (std::size_t c = 0; c < omega.curves.size(); ++c) {
        const auto& pts = omega.curves[c].points;
        if (pts.size() < 2) continue;
        for (std::size_t first = 0; first + 1 < pts.size(); first += kChunkSegments) {
            const std::size_t last = std::min(first + kChunkSegments, pts.size() - 1);
            SegmentChunk chunk{c, first, last, pts[first], pts[first]};
            for (std::size_t k = first + 1; k <= last; ++k) {
                chunk.lower = chunk.lower.cwiseMin(pts[k]);
                chunk.upper = chunk.upper.cwiseMax(pts[k]);
            }
            omega.chunks.push_back(std::move(chunk));
        }
    }
}

OmegaCurve sample_curve(const grid::SwitchedSystem& sys, std::size_t q, std::size_t r, const OmegaOptions& opt) {
    const auto& from = sys.modes[q];
    const auto& flow = sys.modes[r];
    OmegaCurve curve;
    curve.from_mode = q;
    curve.flow_mode = r;
    curve.horizon = tail_horizon(flow, from.equilibrium, opt.eps_tail);
    curve.times.push_back(0.0);
    curve.points.push_back(from.equilibrium);
    if (curve.horizon == 0.0) return curve;

    // Offsets from y*_r are propagated with cached exponentials: the coarse
    // grid uses one cell exponential, refinement probes the cached quarter steps.
    struct Pending {
        double t0, t1;
        Vector off0, off1;
        int depth;
    };
    const std::size_t grid = std::max<std::size_t>(opt.initial_grid, 1);
    const double cell = curve.horizon / static_cast<double>(grid);
    const Matrix step = linalg::mat_exp(flow.a, cell);
    ProbeCache cache(flow.a, cell);
    const Vector& target = flow.equilibrium;
    Vector offset = from.equilibrium - target;

    std::vector<Pending> stack;
    for (std::size_t k = 0; k < grid; ++k) {
        const double t0 = cell * static_cast<double>(k);
        const bool last_cell = k + 1 == grid;
        const double t1 = last_cell ? curve.horizon : cell * static_cast<double>(k + 1);
        Vector next = last_cell ? Vector(linalg::mat_exp(flow.a, t1) * (from.equilibrium - target))
                                : Vector(step * offset);
        stack.push_back({t0, t1, offset, next, 0});
        offset = std::move(next);
        // depth-first refinement keeps the output ordered in t
        while (!stack.empty()) {
            Pending seg = std::move(stack.back());
            stack.pop_back();
            const Vector y0 = target + seg.off0;
            const Vector y1 = target + seg.off1;
            double deviation = 0.0;
            Vector mid;
            for (int quarter = 1; quarter <= 3; ++quarter) {
                const Vector probe = cache.power(seg.depth, quarter) * seg.off0;
                deviation = std::max(deviation, point_segment_distance(target + probe, y0, y1));
                if (quarter == 2) mid = probe;
            }
            if (deviation > opt.chord_tol && seg.depth < 60) {
                const double tm = seg.t0 + 0.5 * (seg.t1 - seg.t0);
                stack.push_back({tm, seg.t1, mid, seg.off1, seg.depth + 1});
                stack.push_back({seg.t0, tm, seg.off0, std::move(mid), seg.depth + 1});
                continue;
            }
            curve.times.push_back(seg.t1);
            curve.points.push_back(y1);
            if (curve.points.size() > opt.max_samples) {
                throw Error(ErrorKind::Construction, "omega set curve (" + std::to_string(q) + " -> " +
                                                         std::to_string(r) + ") exceeds " +
                                                         std::to_string(opt.max_samples) + " samples");
            }
        }
    }
    return curve;
}

}  // namespace

Vector flow_map_theta(const grid::ModeSpec& mode, double t, const Vector& y) {
    if (y.size() != mode.a.rows()) {
        throw Error(ErrorKind::Dimension, "flow_map_theta: state has " + std::to_string(y.size()) +
                                              " entries, mode has " + std::to_string(mode.a.rows()));
    }
    if (!(t >= 0.0)) throw Error(ErrorKind::Domain, "flow_map_theta: t must be non-negative");
    if (t == 0.0) return y;
    return mode.equilibrium + linalg::mat_exp(mode.a, t) * (y - mode.equilibrium);
}

double tail_horizon(const grid::ModeSpec& mode, const Vector& start, double eps) {
    if (!(eps > 0.0)) throw Error(ErrorKind::Domain, "tail horizon: eps must be positive");
    const Matrix p = linalg::lyapunov_solve(mode.a, Matrix::Identity(mode.a.rows(), mode.a.cols()));
    const auto [p_min, p_max] = linalg::sym_eig_extremes(p);
    const double decay = 1.0 / p_max;  // lambda_min(Q) / lambda_max(P) with Q = I
    const double gap = linalg::weighted_norm(p, start - mode.equilibrium);
    // Solving for a target just inside eps keeps round-off in the flow
    // evaluation on the safe side when the envelope is tight (P = c I).
    const double target = eps * (1.0 - 1e-6);
    const double ratio = gap / (std::sqrt(p_min) * target);
    if (ratio <= 1.0) return 0.0;
    return 2.0 / decay * std::log(ratio);
}

std::size_t OmegaSet::sample_count() const {
    std::size_t total = 0;
    for (const auto& c : curves) total += c.points.size();
    return total;
}

OmegaSet build_omega_set(const grid::SwitchedSystem& sys, const OmegaOptions& options) {
    if (sys.modes.size() < 2) throw Error(ErrorKind::Domain, "build_omega_set: need at least two modes");
    if (!(options.eps_tail > 0.0)) throw Error(ErrorKind::Domain, "build_omega_set: eps_tail must be positive");
    if (!(options.chord_tol > 0.0)) throw Error(ErrorKind::Domain, "build_omega_set: chord_tol must be positive");
    for (const auto& mode : sys.modes) {
        if (!linalg::spectral_report(mode.a).is_hurwitz) {
            throw Error(ErrorKind::Assumption,
                        "build_omega_set: mode " + std::to_string(mode.id) + " is not Hurwitz");
        }
    }
    OmegaSet omega;
    omega.eps_tail = options.eps_tail;
    omega.chord_tol = options.chord_tol;
    omega.mode_count = sys.modes.size();
    omega.load_box = sys.load_box;
    for (const auto& mode : sys.modes) omega.equilibria.push_back(mode.equilibrium);
    for (std::size_t q = 0; q < sys.modes.size(); ++q) {
        for (std::size_t r = 0; r < sys.modes.size(); ++r) {
            if (r == q) continue;
            omega.curves.push_back(sample_curve(sys, q, r, options));
        }
    }
    build_chunks(omega);
    return omega;
}

double distance_to_set(const Vector& point, const OmegaSet& omega) {
    if (omega.equilibria.empty()) throw Error(ErrorKind::Domain, "distance_to_set: empty set");
    if (point.size() != omega.equilibria.front().size()) {
        throw Error(ErrorKind::Dimension, "distance_to_set: point dimension mismatch");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& eq : omega.equilibria) best = std::min(best, (point - eq).norm());
    for (const auto& curve : omega.curves) {
        if (curve.points.size() == 1) best = std::min(best, (point - curve.points.front()).norm());
    }
    for (const auto& chunk : omega.chunks) {
        if (box_distance(point, chunk.lower, chunk.upper) >= best) continue;
        const auto& pts = omega.curves[chunk.curve].points;
        for (std::size_t k = chunk.first; k < chunk.last; ++k) {
            best = std::min(best, point_segment_distance(point, pts[k], pts[k + 1]));
        }
    }
    return best;
}

double DistanceTrace::tail_sup(double from_t) const {
    double worst = 0.0;
    for (const auto& p : points) {
        if (p.t >= from_t) worst = std::max(worst, p.distance);
    }
    return worst;
}

DistanceTrace distance_trace(const hybrid::HybridArc& arc, const OmegaSet& omega) {
    DistanceTrace trace;
    trace.points.reserve(arc.samples.size());
    for (const auto& s : arc.samples) {
        const double dy = distance_to_set(s.state.y, omega);
        double extra = 0.0;
        if (s.state.q >= omega.mode_count) extra += 1.0;  // discrete metric on Q
        if (s.state.u_tilde.size() == omega.load_box.lower.size()) {
            const double du = omega.load_box.distance(s.state.u_tilde);
            extra += du * du;
        }
        const double dtau = std::max({0.0, -s.state.tau, s.state.tau - 1.0});
        extra += dtau * dtau;
        trace.points.push_back({s.t, s.j, std::sqrt(dy * dy + extra)});
    }
    return trace;
}

double contraction_factor(const grid::ModeSpec& mode, const Matrix& p) {
    if (p.rows() != mode.a.rows() || p.cols() != mode.a.cols()) {
        throw Error(ErrorKind::Dimension, "contraction_factor: P shape mismatch");
    }
    if (!linalg::is_spd(p)) throw Error(ErrorKind::Domain, "contraction_factor: P is not symmetric positive-definite");
    const Matrix lyap = mode.a.transpose() * p + p * mode.a;
    const Matrix sym = 0.5 * (lyap + lyap.transpose());
    if (linalg::sym_eig_extremes(sym).second > 1e-9 * std::max(1.0, p.norm())) {
        throw Error(ErrorKind::Domain, "contraction_factor: P is not a Lyapunov matrix for the mode");
    }
    const auto [lo, hi] = linalg::sym_eig_extremes(p);
    return std::sqrt(hi / lo);
}

}  // namespace omega_grid::omega
