#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "omega_grid/iss_cert.hpp"
#include "support.hpp"

using namespace omega_grid;
using namespace omega_grid::testing;
using hybrid::HybridState;
using hybrid::LoadGenerator;
using hybrid::SimConfig;
using linalg::Matrix;
using linalg::Vector;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an omega_grid::Error");
    return ErrorKind::Config;
}

Matrix iss_symmetric(const Matrix& m) { return 0.5 * (m + m.transpose()); }

iss::CertificateOptions options(double theta, double n0) {
    iss::CertificateOptions opt;
    opt.theta = theta;
    opt.chatter_bound = n0;
    return opt;
}

grid::SwitchedSystem aggregate_system() {
    const auto gens = ieee39_generators();
    auto deas = ieee39_deas();
    const auto sec = ieee39_secondary();
    std::vector<grid::ModeSpec> modes;
    const double loads[] = {10.0, 11.5, 9.5};
    for (std::size_t q = 0; q < 3; ++q) {
        auto mode_deas = deas;
        if (q == 1) mode_deas[2] = {};
        if (q == 2) mode_deas[0] = {};
        const auto ss = grid::build_aggregate_matrices(gens, mode_deas, sec);
        modes.push_back(grid::build_mode(q, ss.a, ss.b, grid::aggregate_input(loads[q], gens)));
    }
    Vector lower = Vector::Zero(11);
    Vector upper = Vector::Zero(11);
    lower(0) = -0.2;
    upper(0) = 0.2;
    return grid::make_switched_system(std::move(modes), {lower, upper});
}

SimConfig iss_config(const iss::IssCertificate& cert, std::uint64_t seed, double horizon) {
    SimConfig cfg;
    cfg.eta = cert.eta;
    cfg.chatter_bound = cert.chatter_bound;
    cfg.step = 0.01;
    cfg.horizon = horizon;
    cfg.seed = seed;
    cfg.jump_policy = hybrid::JumpPolicy::RandomDelay;
    return cfg;
}

}  // namespace

TEST_SUITE("iss_cert") {

TEST_CASE("Example 1 certificate satisfies every constraint") {
    const auto sys = example_system();
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 1.0));
    REQUIRE(cert.mode_count() == 2);
    CHECK(cert.c == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cert.min_eig_s >= -1e-9);
    REQUIRE(cert.min_eig_y.has_value());
    CHECK(*cert.min_eig_y >= -1e-9);
    for (std::size_t q = 0; q < 2; ++q) {
        const auto& a = sys.mode(q).a;
        CHECK((a.transpose() * cert.p[q] + cert.p[q] * a + cert.q[q]).norm() <= 1e-8);
        CHECK(linalg::min_eigenvalue(iss_symmetric(cert.q[q] - cert.eta * cert.mu * cert.p[q])) > 0.0);
        CHECK(linalg::min_eigenvalue(iss::s_matrix(sys.mode(q), cert)) >= -1e-9);
        for (std::size_t r = 0; r < 2; ++r) {
            if (r == q) continue;
            CHECK(linalg::min_eigenvalue(Matrix(cert.theta * cert.p[q] - std::exp(-cert.mu) * cert.p[r])) > 0.0);
            CHECK(linalg::min_eigenvalue(iss::y_matrix(cert, q, r)) >= -1e-9);
        }
    }
    CHECK(cert.eta == doctest::Approx(cert.eta_star / 2.0));
    CHECK(cert.kappa1 >= 1.0);
    CHECK(cert.kappa2 > 0.0);
    CHECK(cert.kappa3 > 0.0);
}

TEST_CASE("identical modes give the undistorted mu") {
    std::vector<grid::ModeSpec> modes{grid::build_mode(0, example_a1(), Matrix::Identity(2, 2), example_b1()),
                                      grid::build_mode(1, example_a1(), Matrix::Identity(2, 2), example_b1())};
    const auto sys = grid::make_switched_system(modes, grid::LoadBox::zero(2));
    for (double theta : {0.3, 0.5, 0.8}) {
        const auto cert = iss::synthesize_certificate(sys, options(theta, 1.0));
        CHECK(cert.mu == doctest::Approx(std::log(1.0 / theta) * 1.05).epsilon(1e-12));
    }
}

TEST_CASE("single mode reduces to plain LTI data") {
    std::vector<grid::ModeSpec> one{grid::build_mode(0, example_a2(), Matrix::Identity(2, 2), example_b2())};
    const auto sys = grid::make_switched_system(one, grid::LoadBox::zero(2));
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 1.0));
    CHECK_FALSE(cert.min_eig_y.has_value());
    CHECK(cert.c == 0.0);
    CHECK(cert.mu == doctest::Approx(1.05 * std::log(2.0)));
    // P = I / 0.8 for Q = I
    CHECK((cert.p[0] - Matrix::Identity(2, 2) / 0.8).norm() < 1e-12);
}

TEST_CASE("synthesis input validation") {
    const auto sys = example_system();
    CHECK(kind_of([&] { iss::synthesize_certificate(sys, options(1.0, 1.0)); }) == ErrorKind::Domain);
    CHECK(kind_of([&] { iss::synthesize_certificate(sys, options(0.5, 0.5)); }) == ErrorKind::Domain);
    auto opt = options(0.5, 1.0);
    opt.q_choice = {Matrix::Identity(2, 2)};
    CHECK(kind_of([&] { iss::synthesize_certificate(sys, opt); }) == ErrorKind::Dimension);
}

TEST_CASE("aggregate 39-bus certificate is feasible") {
    const auto sys = aggregate_system();
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
    CHECK(cert.min_eig_s >= -1e-9);
    REQUIRE(cert.min_eig_y.has_value());
    CHECK(*cert.min_eig_y >= -1e-9);
    CHECK(cert.eta_star > 0.0);
}

TEST_CASE("larger chatter bound raises rho and never lowers kappa3") {
    const auto sys = example_system();
    double last_rho = 0.0;
    double last_k3 = 0.0;
    for (double n0 : {1.0, 1.5, 2.0, 3.0, 5.0}) {
        const auto cert = iss::synthesize_certificate(sys, options(0.5, n0));
        CHECK(cert.rho > last_rho);
        CHECK(cert.kappa3 >= last_k3);
        last_rho = cert.rho;
        last_k3 = cert.kappa3;
    }
}

TEST_CASE("synthesis is deterministic") {
    const auto sys = aggregate_system();
    const auto a = iss::synthesize_certificate(sys, options(0.5, 2.0));
    const auto b = iss::synthesize_certificate(sys, options(0.5, 2.0));
    CHECK(a.mu == b.mu);
    CHECK(a.rho == b.rho);
    CHECK(a.kappa3 == b.kappa3);
    for (std::size_t q = 0; q < a.p.size(); ++q) CHECK(a.p[q] == b.p[q]);
}

TEST_CASE("flow inequality holds pointwise along the vector field") {
    // Independent algebraic oracle: dV/dt = e^{mu tau} (eta mu y'Py + 2 y'P(Ay + Bu)).
    for (const auto& sys : {example_system_with_box(0.1), aggregate_system()}) {
        const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
        const auto n = static_cast<int>(sys.state_dim());
        const auto m = static_cast<int>(sys.input_dim());
        std::mt19937_64 rng(51);
        std::uniform_real_distribution<double> tau(0.0, cert.chatter_bound);
        for (int k = 0; k < 2000; ++k) {
            const std::size_t q = static_cast<std::size_t>(k) % sys.modes.size();
            const auto& mode = sys.mode(q);
            const Vector y = random_vector(rng, n);
            const Vector u = random_vector(rng, m);
            const double t0 = tau(rng);
            const double scale = std::exp(cert.mu * t0);
            const double v = scale * y.dot(cert.p[q] * y);
            const double v_dot = scale * (cert.eta * cert.mu * y.dot(cert.p[q] * y) +
                                          2.0 * y.dot(cert.p[q] * (mode.a * y + mode.b * u)));
            CHECK(v_dot <= -cert.lambda * v + cert.rho * u.squaredNorm() + 1e-9 * std::max(1.0, v));
        }
    }
}

TEST_CASE("jump inequality holds for every pair") {
    const auto sys = example_system();
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> tau(1.0, 2.0);
    for (int k = 0; k < 2000; ++k) {
        const std::size_t q = static_cast<std::size_t>(k) % 2;
        const std::size_t r = 1 - q;
        const Vector y = random_vector(rng, 2, 2.0);
        const double t0 = tau(rng);
        const Vector u_d = cert.equilibria[q] - cert.equilibria[r];
        const double v = iss::evaluate_V({y, q, {}, t0}, cert);
        const double v_plus = iss::evaluate_V({y + u_d, r, {}, t0 - 1.0}, cert);
        CHECK(v_plus - v <= -cert.lambda * v + cert.rho * u_d.squaredNorm() + 1e-9 * std::max(1.0, v));
    }
}

TEST_CASE("evaluate_V oracle cases and sandwich bound") {
    const auto sys = example_system();
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
    CHECK(iss::evaluate_V({vec2(0, 0), 1, {}, 1.3}, cert) == 0.0);

    iss::IssCertificate unit = cert;
    unit.p = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
    CHECK(iss::evaluate_V({vec2(3, 4), 0, {}, 0.0}, unit) == doctest::Approx(25.0));
    CHECK(kind_of([&] { iss::evaluate_V({vec2(3, 4), 5, {}, 0.0}, cert); }) == ErrorKind::Domain);

    for (const auto& s : {example_system(), aggregate_system()}) {
        const auto c = iss::synthesize_certificate(s, options(0.5, 2.0));
        const auto n = static_cast<int>(s.state_dim());
        std::mt19937_64 rng(53);
        std::uniform_real_distribution<double> tau(0.0, c.chatter_bound);
        for (int k = 0; k < 10000; ++k) {
            const Vector y = random_vector(rng, n, 3.0);
            const double v = iss::evaluate_V({y, static_cast<std::size_t>(k) % s.modes.size(), {}, tau(rng)}, c);
            CHECK(v >= c.alpha_lower * y.squaredNorm() * (1.0 - 1e-12));
            CHECK(v <= c.alpha_upper * y.squaredNorm() * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("trivial arc: zero state, zero input, no jumps") {
    const auto sys = example_system();
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
    SimConfig cfg;
    cfg.step = 0.01;
    cfg.horizon = 10.0;
    cfg.chatter_bound = 2.0;
    const auto load = LoadGenerator::constant(Vector::Zero(2), sys.load_box);
    const auto arc = hybrid::simulate_iss(sys, cfg, load, {vec2(0, 0), 0, {}, 0.0});
    const auto dec = iss::check_decrease(arc, cert, load);
    CHECK(dec.pass());
    CHECK(dec.flow_violations == 0);
    for (const auto& s : arc.samples) CHECK(iss::evaluate_V({s.state.y, s.state.q, {}, s.state.tau}, cert) == 0.0);
    const auto bound = iss::check_iss_bound(arc, cert, 0.0);
    CHECK(bound.pass());
    CHECK(bound.min_bound_margin == doctest::Approx(cert.kappa3 * cert.c));
}

TEST_CASE("Example 1 runs below eta* satisfy the decrease and bound checks") {
    const auto sys = example_system_with_box(0.1);
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
    const auto load = LoadGenerator::sinusoid({{0.0, 0.1, 1.0, 0.0}, {0.0, 0.1, 0.7, 0.3}}, sys.load_box);
    std::mt19937_64 rng(54);
    std::uniform_real_distribution<double> tau(0.0, 2.0);
    std::size_t jumps = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const HybridState init{random_vector(rng, 2, 1.0), seed % 2, {}, tau(rng)};
        const auto arc = hybrid::simulate_iss(sys, iss_config(cert, seed, 30.0), load, init);
        jumps += arc.jumps.size();
        const auto dec = iss::check_decrease(arc, cert, load);
        CHECK(dec.status == iss::VerificationStatus::Pass);
        CHECK(dec.flow_checks > 0);
        CHECK(dec.jump_checks == arc.jumps.size());
        CHECK(iss::check_iss_bound(arc, cert, load.sup_norm()).pass());
    }
    CHECK(jumps > 0);
}

TEST_CASE("coarse sampling is reported inconclusive rather than pass") {
    const auto sys = example_system_with_box(0.1);
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
    const auto load = LoadGenerator::sinusoid({{0.0, 0.1, 1.0, 0.0}, {0.0, 0.1, 0.7, 0.3}}, sys.load_box);
    auto cfg = iss_config(cert, 3, 20.0);
    cfg.sample_stride = 40;
    const auto arc = hybrid::simulate_iss(sys, cfg, load, {vec2(2.0, -2.0), 0, {}, 0.0});
    const auto dec = iss::check_decrease(arc, cert, load);
    CHECK(dec.flow_inconclusive > 0);
    CHECK(dec.status == iss::VerificationStatus::Inconclusive);
}

TEST_CASE("running far above eta* is reported, not asserted") {
    const auto sys = example_system();
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
    const auto load = LoadGenerator::constant(Vector::Zero(2), sys.load_box);
    auto cfg = iss_config(cert, 4, 30.0);
    cfg.eta = 2.0 * cert.eta_star;
    const auto arc = hybrid::simulate_iss(sys, cfg, load, {vec2(1.0, 1.0), 0, {}, 0.0});
    const auto dec = iss::check_decrease(arc, cert, load);
    CHECK(dec.flow_checks > 0);
    CHECK(iss::to_string(dec.status).size() > 0);
}

TEST_CASE("verification rejects mismatched inputs") {
    const auto sys = example_system();
    const auto cert = iss::synthesize_certificate(sys, options(0.5, 2.0));
    SimConfig cfg;
    cfg.step = 0.01;
    cfg.horizon = 1.0;
    const auto arc = hybrid::simulate_hdelta(sys, cfg, {vec2(0, 0), 0, {}, 0.0});
    const auto load = LoadGenerator::constant(Vector::Zero(2), sys.load_box);
    CHECK_THROWS_AS(iss::check_decrease(arc, cert, load), Error);
    CHECK_THROWS_AS(iss::check_iss_bound(arc, cert, 0.0), Error);
}

}  // TEST_SUITE
