#include "omega_grid/hybrid_engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace omega_grid::hybrid {

namespace {

// RK4 is stable for h|lambda| up to ~2.78 on the real axis; keep a margin.
constexpr double kStabilityLimit = 2.5;

void reject(const std::string& message) { throw Error(ErrorKind::Rejection, message); }

class TimerClock {
public:
    TimerClock(const SimConfig& cfg, double max_rate) : cfg_(cfg), max_rate_(max_rate) {}

    /// Timer increase over [t, t + s].
    [[nodiscard]] double advance(double t, double s) const {
        if (cfg_.timer_rate == TimerRatePolicy::Max) return max_rate_ * s;
        double total = 0.0;
        double cursor = t;
        const double end = t + s;
        for (const auto& seg : cfg_.rate_script) {
            if (seg.until <= cursor) continue;
            const double upto = std::min(seg.until, end);
            total += std::clamp(seg.rate, 0.0, max_rate_) * (upto - cursor);
            cursor = upto;
            if (cursor >= end) return total;
        }
        // past the script: the final rate persists
        const double tail_rate = cfg_.rate_script.empty() ? 0.0 : std::clamp(cfg_.rate_script.back().rate, 0.0, max_rate_);
        return total + tail_rate * (end - cursor);
    }

private:
    const SimConfig& cfg_;
    double max_rate_;
};

class Engine {
public:
    Engine(const grid::SwitchedSystem& sys, const SimConfig& cfg, const LoadGenerator& load, ArcKind kind)
        : sys_(sys),
          cfg_(cfg),
          load_(load),
          kind_(kind),
          clock_(cfg, kind == ArcKind::HDelta ? cfg.delta1 : cfg.eta),
          rng_(cfg.seed),
          tau_max_(kind == ArcKind::HDelta ? 1.0 : cfg.chatter_bound) {
        const auto n = static_cast<Eigen::Index>(sys.state_dim());
        k1_.resize(n);
        k2_.resize(n);
        k3_.resize(n);
        k4_.resize(n);
        stage_.resize(n);
        forcing_.resize(n);
        inflation_ = cfg.delta_inflation.value_or(sys.delta3);
    }

    HybridArc run(const HybridState& init) {
        check_step_size();
        HybridArc arc;
        arc.kind = kind_;
        arc.step = cfg_.step;
        arc.constant_load = load_.is_constant();

        double t = 0.0;
        std::size_t j = 0;
        HybridState state = init;
        state.u_tilde = load_.value(0.0);
        double interval_start = 0.0;
        std::size_t steps = 0;
        double fire_at = draw_fire_threshold(state.tau);

        auto record = [&](double time, std::size_t jump) {
            state.u_tilde = load_.value(time);
            arc.samples.push_back({time, jump, state});
        };
        record(0.0, 0);

        while (true) {
            if (j >= cfg_.max_jumps) break;
            if (state.tau >= fire_at - 1e-12) {
                if (arc.samples.back().t != t || arc.samples.back().j != j) record(t, j);
                JumpRecord jump = make_jump(t, j, state);
                arc.domain.intervals.push_back({interval_start, t, j});
                arc.jumps.push_back(jump);
                state.y = jump.y_after;
                state.q = jump.q_after;
                state.tau = jump.tau_before - 1.0;
                ++j;
                interval_start = t;
                record(t, j);
                fire_at = draw_fire_threshold(state.tau);
                continue;
            }
            if (t >= cfg_.horizon - 1e-12) break;

            const double s = std::min(cfg_.step, cfg_.horizon - t);
            const double tau_end = state.tau + clock_.advance(t, s);
            if (tau_end >= fire_at) {
                // Locate the threshold crossing by bisection on the step length.
                double lo = 0.0;
                double hi = s;
                while (hi - lo > kEventTolerance) {
                    const double mid = 0.5 * (lo + hi);
                    if (state.tau + clock_.advance(t, mid) >= fire_at) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                rk4_step(t, hi, state);
                state.tau = fire_at;
                t += hi;
                continue;
            }
            rk4_step(t, s, state);
            state.tau = tau_end;
            t += s;
            ++steps;
            if (steps % cfg_.sample_stride == 0 || t >= cfg_.horizon - 1e-12) record(t, j);
        }
        if (arc.samples.back().t != t || arc.samples.back().j != j) record(t, j);
        arc.domain.intervals.push_back({interval_start, t, j});
        return arc;
    }

private:
    void check_step_size() const {
        double radius = 0.0;
        for (const auto& mode : sys_.modes) {
            for (const auto& lambda : linalg::spectral_report(mode.a).eigenvalues) {
                radius = std::max(radius, std::abs(lambda));
            }
        }
        if (cfg_.step * radius > kStabilityLimit) {
            throw Error(ErrorKind::Step, "integrator step " + std::to_string(cfg_.step) +
                                             " is too large for the fastest mode (|lambda| = " +
                                             std::to_string(radius) + "); use h <= " +
                                             std::to_string(2.0 / radius));
        }
    }

    double draw_fire_threshold(double tau) {
        if (kind_ == ArcKind::HDelta || cfg_.jump_policy == JumpPolicy::Immediate) return 1.0;
        const double lo = std::max(1.0, tau);
        if (lo >= tau_max_) return tau_max_;
        return std::uniform_real_distribution<double>(lo, tau_max_)(rng_);
    }

    void add_forcing(double t, const grid::ModeSpec& mode, Vector& dy) {
        if (kind_ == ArcKind::HDelta) {
            if (!load_.is_constant()) dy.noalias() += mode.inv_a_b * load_.rate(t);
        } else {
            dy.noalias() += mode.b * load_.value(t);
        }
    }

    void derivative(double t, const grid::ModeSpec& mode, const Vector& y, Vector& dy) {
        dy.noalias() = mode.a * y;
        if (kind_ == ArcKind::HDelta) dy += mode.affine;
        add_forcing(t, mode, dy);
    }

    void rk4_step(double t, double h, HybridState& state) {
        const auto& mode = sys_.modes[state.q];
        derivative(t, mode, state.y, k1_);
        stage_ = state.y + 0.5 * h * k1_;
        derivative(t + 0.5 * h, mode, stage_, k2_);
        stage_ = state.y + 0.5 * h * k2_;
        derivative(t + 0.5 * h, mode, stage_, k3_);
        stage_ = state.y + h * k3_;
        derivative(t + h, mode, stage_, k4_);
        state.y += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

    std::size_t next_mode(std::size_t q) {
        const std::size_t count = sys_.modes.size();
        if (count < 2) reject("a jump requires at least two modes");
        std::size_t r = q;
        switch (cfg_.mode_selection) {
            case ModeSelection::UniformRandom: {
                const auto k = std::uniform_int_distribution<std::size_t>(0, count - 2)(rng_);
                r = k >= q ? k + 1 : k;
                break;
            }
            case ModeSelection::RoundRobin: r = (q + 1) % count; break;
            case ModeSelection::Scripted: {
                if (cfg_.mode_script.empty()) reject("scripted mode selection needs a mode script");
                r = cfg_.mode_script[script_cursor_++ % cfg_.mode_script.size()];
                if (r >= count || r == q) {
                    reject("mode script entry " + std::to_string(r) + " is not a valid successor of mode " +
                           std::to_string(q));
                }
                break;
            }
        }
        return r;
    }

    Vector ball_sample(Eigen::Index n) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector dir(n);
        for (Eigen::Index i = 0; i < n; ++i) dir(i) = normal(rng_);
        const double norm = dir.norm();
        if (norm == 0.0) return Vector::Zero(n);
        const double radius =
            inflation_ * std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng_), 1.0 / static_cast<double>(n));
        return dir * (radius / norm);
    }

    JumpRecord make_jump(double t, std::size_t j, const HybridState& state) {
        JumpRecord jump;
        jump.t = t;
        jump.j = j;
        jump.q_before = state.q;
        jump.q_after = next_mode(state.q);
        jump.tau_before = state.tau;
        jump.y_before = state.y;
        jump.u_tilde = load_.value(t);
        const auto& from = sys_.modes[jump.q_before];
        const auto& to = sys_.modes[jump.q_after];
        if (kind_ == ArcKind::Iss) {
            // A_r^{-1} b_r - A_q^{-1} b_q = y*_q - y*_r
            jump.y_after = state.y + (from.equilibrium - to.equilibrium);
        } else if (cfg_.perturbation == JumpPerturbation::Exact) {
            jump.y_after = state.y + (to.inv_a_b - from.inv_a_b) * jump.u_tilde;
        } else {
            jump.y_after = state.y + ball_sample(state.y.size());
        }
        return jump;
    }

    const grid::SwitchedSystem& sys_;
    const SimConfig& cfg_;
    const LoadGenerator& load_;
    ArcKind kind_;
    TimerClock clock_;
    std::mt19937_64 rng_;
    double tau_max_;
    double inflation_ = 0.0;
    std::size_t script_cursor_ = 0;
    Vector k1_, k2_, k3_, k4_, stage_, forcing_;
};

void check_init(const grid::SwitchedSystem& sys, const HybridState& init, double tau_max) {
    if (static_cast<std::size_t>(init.y.size()) != sys.state_dim()) {
        reject("initial y has " + std::to_string(init.y.size()) + " entries, system has " +
               std::to_string(sys.state_dim()) + " states");
    }
    if (!init.y.allFinite()) reject("initial y is not finite");
    if (init.q >= sys.modes.size()) reject("initial mode " + std::to_string(init.q) + " is not in Q");
    if (!(init.tau >= 0.0 && init.tau <= tau_max)) {
        reject("initial timer " + std::to_string(init.tau) + " is outside [0, " + std::to_string(tau_max) + "]");
    }
}

}  // namespace

void SimConfig::validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::Domain, "SimConfig: " + what); };
    if (!(step > 0.0) || !std::isfinite(step)) bad("step must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) bad("horizon must be positive");
    if (!(chatter_bound >= 1.0)) bad("chatter bound N0 must be at least 1");
    if (delta1 < 0.0 || delta2 < 0.0 || eta < 0.0) bad("rates must be non-negative");
    if (delta_inflation && *delta_inflation < 0.0) bad("delta_inflation must be non-negative");
    if (sample_stride == 0) bad("sample stride must be at least 1");
    for (std::size_t k = 1; k < rate_script.size(); ++k) {
        if (!(rate_script[k].until > rate_script[k - 1].until)) bad("rate script times must increase");
    }
}

HybridArc simulate_hdelta(const grid::SwitchedSystem& sys, const SimConfig& cfg, const HybridState& init) {
    Vector u = init.u_tilde.size() == 0 ? Vector::Zero(static_cast<Eigen::Index>(sys.input_dim())) : init.u_tilde;
    return simulate_hdelta(sys, cfg, LoadGenerator::constant(u, sys.load_box), init);
}

HybridArc simulate_hdelta(const grid::SwitchedSystem& sys, const SimConfig& cfg, const LoadGenerator& load,
                          const HybridState& init) {
    cfg.validate();
    check_init(sys, init, 1.0);
    if (load.dim() != sys.input_dim()) reject("load generator dimension does not match the system input");
    const LoadGenerator scaled = load.time_scaled(cfg.delta2);
    const Vector u0 = scaled.value(0.0);
    if (!sys.load_box.contains(u0)) reject("initial load lies outside the load box");
    if (init.u_tilde.size() != 0 && (init.u_tilde - u0).norm() > 1e-12) {
        reject("initial u_tilde does not match the load generator at t = 0");
    }
    return Engine(sys, cfg, scaled, ArcKind::HDelta).run(init);
}

HybridArc simulate_iss(const grid::SwitchedSystem& sys, const SimConfig& cfg, const LoadGenerator& load,
                       const HybridState& init) {
    cfg.validate();
    check_init(sys, init, cfg.chatter_bound);
    if (load.dim() != sys.input_dim()) reject("load signal dimension does not match the system input");
    return Engine(sys, cfg, load, ArcKind::Iss).run(init);
}

bool verify_adt(const HybridArc& arc, double n0, double tau_d) {
    if (!(tau_d > 0.0)) throw Error(ErrorKind::Domain, "verify_adt: tau_d must be positive");
    std::vector<double> times;
    times.reserve(arc.jumps.size());
    for (const auto& jump : arc.jumps) times.push_back(jump.t);
    std::sort(times.begin(), times.end());
    const std::size_t count = times.size();
    // slack absorbs event-localization round-off in the timestamps
    constexpr double kSlack = 1e-7;
    for (std::size_t a = 0; a < count; ++a) {
        for (std::size_t b = a; b < count; ++b) {
            const double allowed = n0 + (times[b] - times[a]) / tau_d + kSlack;
            if (static_cast<double>(b - a + 1) > allowed) return false;
            if (allowed >= static_cast<double>(count - a)) break;
        }
    }
    return true;
}

std::vector<Vector> to_original_coords(const HybridArc& arc, const grid::SwitchedSystem& sys, ArcKind which) {
    std::vector<Vector> xs;
    xs.reserve(arc.samples.size());
    for (const auto& sample : arc.samples) {
        const auto& mode = sys.mode(sample.state.q);
        if (which == ArcKind::HDelta) {
            xs.push_back(sample.state.y - mode.inv_a_b * sample.state.u_tilde);
        } else {
            xs.push_back(sample.state.y + mode.equilibrium);
        }
    }
    return xs;
}

SolutionCheck validate_solution(const HybridArc& arc, const grid::SwitchedSystem& sys, const SimConfig& cfg,
                                double tol, double flow_tol) {
    SolutionCheck check;
    auto fail = [&](const std::string& what) {
        check.ok = false;
        if (check.problems.size() < 20) check.problems.push_back(what);
    };
    const bool hdelta = arc.kind == ArcKind::HDelta;
    const double tau_max = hdelta ? 1.0 : cfg.chatter_bound;
    const double rate_max = hdelta ? cfg.delta1 : cfg.eta;

    // hybrid time domain
    const auto& intervals = arc.domain.intervals;
    if (intervals.empty() || intervals.front().t_begin != 0.0 || intervals.front().j != 0) {
        fail("domain does not start at (0, 0)");
    }
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        if (intervals[k].t_end < intervals[k].t_begin) fail("interval " + std::to_string(k) + " runs backwards");
        if (k > 0) {
            if (intervals[k].j != intervals[k - 1].j + 1) fail("jump counter does not increment by one");
            if (intervals[k].t_begin != intervals[k - 1].t_end) fail("intervals are not contiguous");
        }
    }
    if (intervals.size() != arc.jumps.size() + 1) fail("interval count does not match jump count");

    // flow samples in C
    for (const auto& s : arc.samples) {
        if (s.state.q >= sys.modes.size()) {
            fail("sample mode outside Q");
            continue;
        }
        if (s.state.tau < -tol || s.state.tau > tau_max + tol) fail("timer outside [0, tau_max] at t=" + std::to_string(s.t));
        if (hdelta && !sys.load_box.contains(s.state.u_tilde, tol)) fail("u_tilde outside U at t=" + std::to_string(s.t));
    }

    // flow segments
    for (std::size_t k = 1; k < arc.samples.size(); ++k) {
        const auto& prev = arc.samples[k - 1];
        const auto& cur = arc.samples[k];
        if (cur.j != prev.j) continue;
        const double dt = cur.t - prev.t;
        if (dt < 0.0) fail("time decreases within an interval");
        if (cur.state.q != prev.state.q) fail("mode changes during flow");
        const double dtau = cur.state.tau - prev.state.tau;
        if (dtau < -tol || dtau > rate_max * dt + tol) fail("timer rate outside [0, max] during flow");
        if (arc.constant_load && dt > 0.0 && prev.state.q < sys.modes.size()) {
            const auto& mode = sys.modes[prev.state.q];
            Vector target;
            if (hdelta) {
                target = mode.equilibrium;
            } else {
                target = -mode.inv_a_b * prev.state.u_tilde + Vector::Zero(mode.a.rows());
            }
            const Vector exact = target + linalg::mat_exp(mode.a, dt) * (prev.state.y - target);
            const double err = (exact - cur.state.y).norm();
            if (err > flow_tol * std::max(1.0, exact.norm())) {
                fail("flow deviates from the mode flow by " + std::to_string(err) + " at t=" + std::to_string(cur.t));
            }
        }
    }

    // jumps: predecessor in D, successor in G
    for (const auto& jump : arc.jumps) {
        const bool in_d = hdelta ? std::abs(jump.tau_before - 1.0) <= tol
                                 : (jump.tau_before >= 1.0 - tol && jump.tau_before <= tau_max + tol);
        if (!in_d) fail("jump at t=" + std::to_string(jump.t) + " from outside D (tau=" + std::to_string(jump.tau_before) + ")");
        if (jump.q_after == jump.q_before || jump.q_after >= sys.modes.size()) fail("jump does not change to another mode");
        if (jump.q_before >= sys.modes.size() || jump.q_after >= sys.modes.size()) continue;
        const auto& from = sys.modes[jump.q_before];
        const auto& to = sys.modes[jump.q_after];
        const Vector d = jump.y_after - jump.y_before;
        if (!hdelta) {
            if ((d - (from.equilibrium - to.equilibrium)).norm() > tol) fail("ISS jump displacement is not y*_q - y*_r");
        } else if (cfg.perturbation == JumpPerturbation::Exact) {
            if ((d - (to.inv_a_b - from.inv_a_b) * jump.u_tilde).norm() > tol) fail("jump displacement differs from the load shift");
        } else if (d.norm() > cfg.delta_inflation.value_or(sys.delta3) + tol) {
            fail("jump displacement leaves the inflation ball");
        }
        // successor sample must be in the post-jump interval with tau - 1
        const auto post = std::find_if(arc.samples.begin(), arc.samples.end(), [&](const HybridSample& s) {
            return s.j == jump.j + 1;
        });
        if (post == arc.samples.end() || std::abs(post->state.tau - (jump.tau_before - 1.0)) > tol ||
            post->state.q != jump.q_after) {
            fail("post-jump sample does not match G");
        }
    }
    return check;
}

}  // namespace omega_grid::hybrid
