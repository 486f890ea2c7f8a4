#include "omega_grid/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <string>

#include <Eigen/Eigenvalues>

namespace omega_grid::grid {

namespace {

void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

bool graph_connected(std::size_t n, const std::vector<Line>& lines) {
    if (n == 0) return false;
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (const auto& line : lines) {
        adjacency[line.from].push_back(line.to);
        adjacency[line.to].push_back(line.from);
    }
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t visited = 1;
    while (!frontier.empty()) {
        const auto bus = frontier.front();
        frontier.pop();
        for (auto next : adjacency[bus]) {
            if (!seen[next]) {
                seen[next] = true;
                ++visited;
                frontier.push(next);
            }
        }
    }
    return visited == n;
}

}  // namespace

void GeneratorParams::validate() const {
    require(inertia > 0.0, ErrorKind::Domain, "generator inertia must be positive");
    require(turbine_tau > 0.0, ErrorKind::Domain, "generator turbine time constant must be positive");
    require(governor_gain > 0.0, ErrorKind::Domain, "generator governor gain must be positive");
    require(damping >= 0.0, ErrorKind::Domain, "generator damping must be non-negative");
}

void DeaParams::validate() const {
    require(inertia >= 0.0 && damping >= 0.0, ErrorKind::Domain,
            "DEA inertia and damping must be non-negative");
}

std::vector<double> SecondaryParams::equal_participation(std::size_t generators) {
    return std::vector<double>(generators, generators == 0 ? 0.0 : 1.0 / static_cast<double>(generators));
}

Vector FullModel::input(const std::vector<double>& bus_net_loads,
                        const std::vector<double>& references) const {
    const auto buses = static_cast<std::size_t>(b.cols()) - generator_count;
    require(bus_net_loads.size() == buses && references.size() == generator_count,
            ErrorKind::Dimension, "full-model input: expected per-bus loads and per-generator references");
    Vector u(b.cols());
    for (std::size_t i = 0; i < buses; ++i) u(static_cast<Eigen::Index>(i)) = bus_net_loads[i];
    for (std::size_t g = 0; g < generator_count; ++g) {
        u(static_cast<Eigen::Index>(buses + g)) = references[g];
    }
    return u;
}

LoadBox LoadBox::zero(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return {Vector::Zero(n), Vector::Zero(n)};
}

bool LoadBox::contains(const Vector& u, double tol) const {
    if (u.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u(i) < lower(i) - tol || u(i) > upper(i) + tol) return false;
    }
    return true;
}

double LoadBox::max_norm() const {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        sum += std::max(lower(i) * lower(i), upper(i) * upper(i));
    }
    return std::sqrt(sum);
}

double LoadBox::distance(const Vector& u) const { return (u - clamp(u)).norm(); }

Vector LoadBox::clamp(const Vector& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

const ModeSpec& SwitchedSystem::mode(std::size_t q) const {
    if (q >= modes.size()) {
        throw Error(ErrorKind::Domain, "mode " + std::to_string(q) + " is not in the system (" +
                                           std::to_string(modes.size()) + " modes)");
    }
    return modes[q];
}

EffectiveParams aggregate_effective(const std::vector<GeneratorParams>& gens,
                                    const std::vector<DeaParams>& deas) {
    require(!gens.empty(), ErrorKind::Domain, "aggregate model needs at least one generator");
    EffectiveParams eff;
    for (const auto& g : gens) {
        eff.inertia += g.inertia;
        eff.damping += g.damping;
    }
    for (const auto& d : deas) {
        eff.inertia += d.inertia;
        eff.damping += d.damping;
    }
    return eff;
}

StateSpace build_aggregate_matrices(const std::vector<GeneratorParams>& gens,
                                    const std::vector<DeaParams>& deas,
                                    const SecondaryParams& sec) {
    const auto eff = aggregate_effective(gens, deas);
    for (const auto& g : gens) g.validate();
    for (const auto& d : deas) d.validate();
    const auto ng = static_cast<Eigen::Index>(gens.size());
    require(sec.participation.size() == gens.size(), ErrorKind::Construction,
            "participation factors must have one entry per generator");
    require(sec.beta < 0.0, ErrorKind::Domain, "secondary gain beta must be negative");
    const double max_tau =
        std::max_element(gens.begin(), gens.end(), [](const auto& l, const auto& r) {
            return l.turbine_tau < r.turbine_tau;
        })->turbine_tau;
    require(sec.tau_z > max_tau, ErrorKind::Domain,
            "secondary time constant must exceed every turbine time constant");
    double zeta_sum = 0.0;
    for (double z : sec.participation) {
        require(z >= 0.0 && z <= 1.0, ErrorKind::Domain, "participation factors must lie in [0,1]");
        zeta_sum += z;
    }
    require(std::abs(zeta_sum - 1.0) <= 1e-12, ErrorKind::Domain, "participation factors must sum to 1");
    require(eff.inertia > 0.0, ErrorKind::Domain, "effective inertia must be positive");

    const Eigen::Index n = ng + 2;
    const Eigen::Index z_row = n - 1;
    Matrix a = Matrix::Zero(n, n);
    Matrix b = Matrix::Zero(n, ng + 1);

    a(0, 0) = -eff.damping / eff.inertia;
    for (Eigen::Index g = 0; g < ng; ++g) a(0, 1 + g) = 1.0 / eff.inertia;
    b(0, 0) = -1.0 / eff.inertia;

    // A_tau = -diag(tau)^{-1}
    for (Eigen::Index g = 0; g < ng; ++g) {
        const auto& gen = gens[static_cast<std::size_t>(g)];
        const double a_tau = -1.0 / gen.turbine_tau;
        const double zeta_g = sec.participation[static_cast<std::size_t>(g)];
        a(1 + g, 0) = a_tau * gen.governor_gain;
        a(1 + g, 1 + g) = a_tau;
        a(1 + g, z_row) = -a_tau * zeta_g;
        // -A_tau (I - zeta 1^T)
        for (Eigen::Index k = 0; k < ng; ++k) {
            const double ident = (k == g) ? 1.0 : 0.0;
            b(1 + g, 1 + k) = -a_tau * (ident - zeta_g);
        }
    }

    a(z_row, 0) = sec.beta / sec.tau_z;
    for (Eigen::Index g = 0; g < ng; ++g) a(z_row, 1 + g) = 1.0 / sec.tau_z;
    a(z_row, z_row) = -1.0 / sec.tau_z;
    return {a, b};
}

Vector aggregate_input(double net_load, const std::vector<GeneratorParams>& gens) {
    Vector u(static_cast<Eigen::Index>(gens.size()) + 1);
    u(0) = net_load;
    for (std::size_t g = 0; g < gens.size(); ++g) u(static_cast<Eigen::Index>(g) + 1) = gens[g].setpoint;
    return u;
}

FullModel build_full_matrices(const NetworkParams& net, const std::vector<GeneratorParams>& gens,
                              const std::vector<DeaParams>& deas) {
    const std::size_t n_bus = net.bus_count;
    require(n_bus >= 1, ErrorKind::Construction, "network needs at least one bus");
    require(net.generator_buses.size() == gens.size(), ErrorKind::Construction,
            "generator_buses must list one bus per generator");
    require(net.dea_buses.size() == deas.size(), ErrorKind::Construction,
            "dea_buses must list one bus per DEA entry");
    require(net.bus_loads.empty() || net.bus_loads.size() == n_bus, ErrorKind::Construction,
            "bus_loads must be empty or have one entry per bus");
    require(net.sync_speed > 0.0, ErrorKind::Domain, "synchronous speed must be positive");

    // role[bus]: -1 unassigned, 0..G-1 generator, G.. DEA
    std::vector<long> role(n_bus, -1);
    auto assign = [&](std::size_t bus, long who) {
        require(bus < n_bus, ErrorKind::Construction, "bus index " + std::to_string(bus) + " out of range");
        require(role[bus] == -1, ErrorKind::Construction,
                "bus " + std::to_string(bus) + " is assigned twice (generator and DEA sets must be disjoint)");
        role[bus] = who;
    };
    for (std::size_t g = 0; g < gens.size(); ++g) {
        gens[g].validate();
        assign(net.generator_buses[g], static_cast<long>(g));
    }
    for (std::size_t d = 0; d < deas.size(); ++d) {
        deas[d].validate();
        assign(net.dea_buses[d], static_cast<long>(gens.size() + d));
    }
    for (std::size_t bus = 0; bus < n_bus; ++bus) {
        require(role[bus] != -1, ErrorKind::Construction,
                "bus " + std::to_string(bus) + " is neither a generator nor a DEA/load bus");
    }
    for (const auto& line : net.lines) {
        require(line.from < n_bus && line.to < n_bus && line.from != line.to, ErrorKind::Construction,
                "line endpoints must be two distinct existing buses");
        require(line.reactance > 0.0, ErrorKind::Domain, "line reactance must be positive");
    }
    if (!graph_connected(n_bus, net.lines)) throw Error(ErrorKind::Topology, "network graph is not connected");

    struct BusData {
        double inertia;
        double damping;
        long generator;  // -1 if none
    };
    std::vector<BusData> bus_data(n_bus);
    std::vector<std::size_t> dynamic;
    std::vector<std::size_t> algebraic;
    for (std::size_t bus = 0; bus < n_bus; ++bus) {
        const auto who = static_cast<std::size_t>(role[bus]);
        if (who < gens.size()) {
            bus_data[bus] = {gens[who].inertia, gens[who].damping, static_cast<long>(who)};
            dynamic.push_back(bus);
            continue;
        }
        const auto& dea = deas[who - gens.size()];
        if (dea.is_pure_load()) {
            algebraic.push_back(bus);
        } else {
            require(dea.inertia > 0.0, ErrorKind::Construction,
                    "DEA at bus " + std::to_string(bus) +
                        " has damping but zero inertia; only M=D=0 buses can be eliminated");
            bus_data[bus] = {dea.inertia, dea.damping, -1};
            dynamic.push_back(bus);
        }
    }
    require(!dynamic.empty(), ErrorKind::Construction, "network has no bus with inertia");

    Matrix lap = Matrix::Zero(static_cast<Eigen::Index>(n_bus), static_cast<Eigen::Index>(n_bus));
    for (const auto& line : net.lines) {
        const double y = 1.0 / line.reactance;
        const auto i = static_cast<Eigen::Index>(line.from);
        const auto j = static_cast<Eigen::Index>(line.to);
        lap(i, i) += y;
        lap(j, j) += y;
        lap(i, j) -= y;
        lap(j, i) -= y;
    }

    const auto nk = static_cast<Eigen::Index>(dynamic.size());
    const auto nl = static_cast<Eigen::Index>(algebraic.size());
    Matrix l_kk(nk, nk);
    Matrix l_kl(nk, nl);
    Matrix l_ll(nl, nl);
    for (Eigen::Index r = 0; r < nk; ++r) {
        for (Eigen::Index c = 0; c < nk; ++c) {
            l_kk(r, c) = lap(static_cast<Eigen::Index>(dynamic[r]), static_cast<Eigen::Index>(dynamic[c]));
        }
        for (Eigen::Index c = 0; c < nl; ++c) {
            l_kl(r, c) = lap(static_cast<Eigen::Index>(dynamic[r]), static_cast<Eigen::Index>(algebraic[c]));
        }
    }
    for (Eigen::Index r = 0; r < nl; ++r) {
        for (Eigen::Index c = 0; c < nl; ++c) {
            l_ll(r, c) = lap(static_cast<Eigen::Index>(algebraic[r]), static_cast<Eigen::Index>(algebraic[c]));
        }
    }
    Matrix l_red = l_kk;
    Matrix redistribution(nk, nl);  // load at algebraic bus m lands on dynamic bus i with weight (i, m)
    if (nl > 0) {
        // L symmetric: -L_kl L_ll^{-1} = -(L_ll^{-1} L_lk)^T
        const Matrix l_ll_inv_l_lk = linalg::solve_linear(l_ll, Matrix(l_kl.transpose()));
        l_red -= l_kl * l_ll_inv_l_lk;
        redistribution = -l_ll_inv_l_lk.transpose();
        l_red = 0.5 * (l_red + l_red.transpose());
    }

    const auto ng = static_cast<Eigen::Index>(gens.size());
    const Eigen::Index n_state = 2 * nk + ng;
    const Eigen::Index n_input = static_cast<Eigen::Index>(n_bus) + ng;
    const Eigen::Index omega0 = nk;
    const Eigen::Index pm0 = 2 * nk;
    Matrix a = Matrix::Zero(n_state, n_state);
    Matrix b = Matrix::Zero(n_state, n_input);

    std::vector<Eigen::Index> dynamic_index(n_bus, -1);
    for (Eigen::Index i = 0; i < nk; ++i) dynamic_index[dynamic[static_cast<std::size_t>(i)]] = i;
    std::vector<Eigen::Index> algebraic_index(n_bus, -1);
    for (Eigen::Index m = 0; m < nl; ++m) algebraic_index[algebraic[static_cast<std::size_t>(m)]] = m;

    for (Eigen::Index i = 0; i < nk; ++i) {
        const auto& bus = bus_data[dynamic[static_cast<std::size_t>(i)]];
        a(i, omega0 + i) = net.sync_speed;
        for (Eigen::Index k = 0; k < nk; ++k) a(omega0 + i, k) = -l_red(i, k) / bus.inertia;
        a(omega0 + i, omega0 + i) = -bus.damping / bus.inertia;
        if (bus.generator >= 0) a(omega0 + i, pm0 + bus.generator) = 1.0 / bus.inertia;
        for (std::size_t n = 0; n < n_bus; ++n) {
            const auto col = static_cast<Eigen::Index>(n);
            if (dynamic_index[n] == i) {
                b(omega0 + i, col) = -1.0 / bus.inertia;
            } else if (algebraic_index[n] >= 0) {
                b(omega0 + i, col) = -redistribution(i, algebraic_index[n]) / bus.inertia;
            }
        }
    }
    for (Eigen::Index g = 0; g < ng; ++g) {
        const auto& gen = gens[static_cast<std::size_t>(g)];
        const Eigen::Index i = dynamic_index[net.generator_buses[static_cast<std::size_t>(g)]];
        const Eigen::Index row = pm0 + g;
        a(row, omega0 + i) = -gen.governor_gain / gen.turbine_tau;
        a(row, row) = -1.0 / gen.turbine_tau;
        a(row, i) -= net.integral_gain / gen.turbine_tau;
        if (net.angle_reference == AngleReference::Mean) {
            for (Eigen::Index k = 0; k < nk; ++k) {
                a(row, k) += net.integral_gain / (gen.turbine_tau * static_cast<double>(nk));
            }
        }
        b(row, static_cast<Eigen::Index>(n_bus) + g) = 1.0 / gen.turbine_tau;
    }

    FullModel model;
    model.a = std::move(a);
    model.b = std::move(b);
    model.dynamic_buses = std::move(dynamic);
    model.generator_count = gens.size();
    return model;
}

namespace {

double zero_tolerance(const Matrix& a) { return 1e-8 * std::max(1.0, a.cwiseAbs().maxCoeff()); }

}  // namespace

ReducedModel reduce_zero_mode(const Matrix& a_bar, const Matrix& b_bar) {
    linalg::require_square(a_bar, "reduce_zero_mode: A_bar");
    require(b_bar.rows() == a_bar.rows(), ErrorKind::Dimension, "reduce_zero_mode: B_bar row mismatch");
    require(a_bar.rows() >= 2, ErrorKind::Reduction, "reduce_zero_mode: need at least two states");

    const auto spectrum = linalg::spectral_report(a_bar);
    const double tol = zero_tolerance(a_bar);
    const auto zeros = std::count_if(spectrum.eigenvalues.begin(), spectrum.eigenvalues.end(),
                                     [tol](const auto& lambda) { return std::abs(lambda) <= tol; });
    if (zeros != 1) {
        throw Error(ErrorKind::Reduction, "reduce_zero_mode: expected exactly one zero eigenvalue, found " +
                                              std::to_string(zeros));
    }

    Eigen::JacobiSVD<Matrix> svd(a_bar, Eigen::ComputeFullV);
    Vector kernel = svd.matrixV().col(a_bar.cols() - 1);
    Eigen::Index pivot = 0;
    kernel.cwiseAbs().maxCoeff(&pivot);
    if (kernel(pivot) < 0.0) kernel = -kernel;

    Eigen::HouseholderQR<Matrix> qr{Matrix(kernel)};
    const Matrix q = qr.householderQ();
    Matrix basis = q.rightCols(a_bar.cols() - 1);
    return {basis.transpose() * a_bar * basis, basis.transpose() * b_bar, basis};
}

ReducedModel reduce_with_basis(const Matrix& a_bar, const Matrix& b_bar, const Matrix& basis) {
    linalg::require_square(a_bar, "reduce_with_basis: A_bar");
    require(basis.rows() == a_bar.rows() && basis.cols() == a_bar.cols() - 1, ErrorKind::Dimension,
            "reduce_with_basis: basis shape mismatch");
    require(b_bar.rows() == a_bar.rows(), ErrorKind::Dimension, "reduce_with_basis: B_bar row mismatch");
    const Matrix projector =
        Matrix::Identity(a_bar.rows(), a_bar.cols()) - basis * basis.transpose();
    if ((a_bar * projector).cwiseAbs().maxCoeff() > zero_tolerance(a_bar)) {
        throw Error(ErrorKind::Reduction,
                    "reduce_with_basis: the basis complement is not in the kernel of A_bar");
    }
    return {basis.transpose() * a_bar * basis, basis.transpose() * b_bar, basis};
}

ModeSpec build_mode(std::size_t id, const Matrix& a, const Matrix& b, const Vector& u) {
    linalg::require_square(a, "build_mode: A");
    linalg::require_finite(a, "build_mode: A");
    linalg::require_finite(b, "build_mode: B");
    require(b.rows() == a.rows(), ErrorKind::Dimension, "build_mode: B must have as many rows as A");
    require(u.size() == b.cols(), ErrorKind::Dimension, "build_mode: u must have one entry per B column");
    const auto spectrum = linalg::spectral_report(a);
    if (!spectrum.is_hurwitz) {
        throw Error(ErrorKind::Assumption,
                    "mode " + std::to_string(id) + " violates the Hurwitz assumption (spectral abscissa " +
                        std::to_string(spectrum.spectral_abscissa) +
                        (spectrum.marginal ? ", marginally stable)" : ")"));
    }
    ModeSpec mode;
    mode.id = id;
    mode.a = a;
    mode.b = b;
    mode.u = u;
    mode.affine = b * u;
    mode.equilibrium = -linalg::solve_linear(a, mode.affine);
    mode.inv_a_b = linalg::solve_linear(a, b);
    const double residual = (a * mode.equilibrium + mode.affine).norm();
    const double scale = std::max(1.0, mode.affine.norm());
    require(residual <= 1e-9 * scale, ErrorKind::Singular,
            "build_mode: equilibrium residual " + std::to_string(residual) + " too large");
    return mode;
}

double compute_delta3(const std::vector<ModeSpec>& modes, const LoadBox& box) {
    if (modes.size() < 2) return 0.0;
    // |(S_r - S_q) u| is convex in u, so its maximum over the box sits at a
    // vertex. Vertices are enumerated over the channels with nonzero width;
    // beyond kMaxFreeChannels the induced-norm bound is used instead.
    constexpr std::size_t kMaxFreeChannels = 20;
    std::vector<Eigen::Index> free;
    for (Eigen::Index k = 0; k < box.lower.size(); ++k) {
        if (box.upper(k) > box.lower(k)) free.push_back(k);
    }
    const Vector fixed = box.lower;
    double worst = 0.0;
    for (const auto& q : modes) {
        for (const auto& r : modes) {
            if (&q == &r) continue;
            const Matrix diff = r.inv_a_b - q.inv_a_b;
            if (free.size() > kMaxFreeChannels) {
                worst = std::max(worst, linalg::induced_norm(diff) * box.max_norm());
                continue;
            }
            const Vector base = diff * fixed;
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free.size()); ++mask) {
                Vector v = base;
                for (std::size_t f = 0; f < free.size(); ++f) {
                    if ((mask >> f) & 1U) v += diff.col(free[f]) * (box.upper(free[f]) - box.lower(free[f]));
                }
                worst = std::max(worst, v.norm());
            }
        }
    }
    return worst;
}

double compute_c(const std::vector<ModeSpec>& modes) {
    double worst = 0.0;
    for (const auto& q : modes) {
        for (const auto& r : modes) {
            if (&q == &r) continue;
            // A_r^{-1} b_r - A_q^{-1} b_q = y*_q - y*_r
            worst = std::max(worst, (q.equilibrium - r.equilibrium).norm());
        }
    }
    return worst;
}

SwitchedSystem make_switched_system(std::vector<ModeSpec> modes, LoadBox box) {
    require(!modes.empty(), ErrorKind::Construction, "switched system needs at least one mode");
    const auto n = modes.front().state_dim();
    const auto m = modes.front().input_dim();
    for (std::size_t q = 0; q < modes.size(); ++q) {
        require(modes[q].state_dim() == n && modes[q].input_dim() == m, ErrorKind::Construction,
                "mode " + std::to_string(q) + " has different state/input dimensions");
        modes[q].id = q;
    }
    require(static_cast<std::size_t>(box.lower.size()) == m && static_cast<std::size_t>(box.upper.size()) == m,
            ErrorKind::Construction, "load box dimension must match the input dimension");
    require((box.lower.array() <= box.upper.array()).all(), ErrorKind::Construction,
            "load box lower bounds must not exceed upper bounds");
    SwitchedSystem sys;
    sys.delta3 = compute_delta3(modes, box);
    sys.c = compute_c(modes);
    sys.modes = std::move(modes);
    sys.load_box = std::move(box);
    return sys;
}

}  // namespace omega_grid::grid
