#include "omega_grid/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "omega_grid/io.hpp"

namespace omega_grid::scenario {

namespace {

using linalg::Matrix;

std::string escape_token(const std::string& key) {
    std::string out;
    for (char ch : key) {
        if (ch == '~') {
            out += "~0";
        } else if (ch == '/') {
            out += "~1";
        } else {
            out += ch;
        }
    }
    return out;
}

/// Object view that knows its JSON pointer and rejects unknown keys.
class Obj {
public:
    Obj(const json& j, std::string pointer, std::initializer_list<const char*> allowed)
        : j_(j), ptr_(std::move(pointer)) {
        if (!j.is_object()) throw ConfigError(ptr_.empty() ? "/" : ptr_, "expected an object");
        const std::set<std::string> keys(allowed.begin(), allowed.end());
        for (const auto& item : j.items()) {
            if (keys.count(item.key()) == 0) throw ConfigError(at_ptr(item.key()), "unknown key '" + item.key() + "'");
        }
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    [[nodiscard]] std::string at_ptr(const std::string& key) const { return ptr_ + "/" + escape_token(key); }
    [[nodiscard]] const std::string& pointer() const { return ptr_; }

    [[nodiscard]] const json& at(const std::string& key) const {
        if (!has(key)) throw ConfigError(at_ptr(key), "missing required key '" + key + "'");
        return j_.at(key);
    }

    [[nodiscard]] double number(const std::string& key) const {
        const auto& v = at(key);
        if (!v.is_number()) throw ConfigError(at_ptr(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(at_ptr(key), "expected a finite number");
        return x;
    }
    [[nodiscard]] double number(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    [[nodiscard]] std::size_t count(const std::string& key, std::size_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw ConfigError(at_ptr(key), "expected a non-negative integer");
        }
        return v.get<std::size_t>();
    }

    [[nodiscard]] std::string str(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_string()) throw ConfigError(at_ptr(key), "expected a string");
        return v.get<std::string>();
    }

    [[nodiscard]] bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_boolean()) throw ConfigError(at_ptr(key), "expected true or false");
        return v.get<bool>();
    }

    [[nodiscard]] const json& array(const std::string& key) const {
        const auto& v = at(key);
        if (!v.is_array()) throw ConfigError(at_ptr(key), "expected an array");
        return v;
    }

    [[nodiscard]] Obj child(const std::string& key, std::initializer_list<const char*> allowed) const {
        return Obj(at(key), at_ptr(key), allowed);
    }

private:
    const json& j_;
    std::string ptr_;
};

template <typename E>
E parse_enum(const Obj& obj, const std::string& key, E fallback, const std::map<std::string, E>& names) {
    if (!obj.has(key)) return fallback;
    const std::string value = obj.str(key, "");
    const auto it = names.find(value);
    if (it == names.end()) {
        std::string choices;
        for (const auto& [name, _] : names) choices += (choices.empty() ? "" : ", ") + name;
        throw ConfigError(obj.at_ptr(key), "unknown value '" + value + "' (expected one of: " + choices + ")");
    }
    return it->second;
}

const std::map<std::string, hybrid::JumpPolicy> kJumpPolicies{{"immediate", hybrid::JumpPolicy::Immediate},
                                                              {"random_delay", hybrid::JumpPolicy::RandomDelay}};
const std::map<std::string, hybrid::ModeSelection> kModeSelections{
    {"uniform_random", hybrid::ModeSelection::UniformRandom},
    {"round_robin", hybrid::ModeSelection::RoundRobin},
    {"scripted", hybrid::ModeSelection::Scripted}};

std::vector<double> number_list(const json& j, const std::string& pointer) {
    const Vector v = io::vector_from_json(j, pointer);
    return {v.data(), v.data() + v.size()};
}

// ---------------------------------------------------------------------------
// load boxes and load signals
// ---------------------------------------------------------------------------

grid::LoadBox parse_box(const json& doc, std::size_t dim, const std::string& pointer) {
    grid::LoadBox box = grid::LoadBox::zero(dim);
    if (doc.is_null()) return box;
    const Obj obj(doc, pointer, {"lower", "upper", "channels"});
    if (obj.has("lower") || obj.has("upper")) {
        box.lower = io::vector_from_json(obj.at("lower"), obj.at_ptr("lower"));
        box.upper = io::vector_from_json(obj.at("upper"), obj.at_ptr("upper"));
        if (static_cast<std::size_t>(box.lower.size()) != dim || static_cast<std::size_t>(box.upper.size()) != dim) {
            throw ConfigError(pointer, "load box needs " + std::to_string(dim) + " entries per bound");
        }
    }
    if (obj.has("channels")) {
        const auto& channels = obj.array("channels");
        for (std::size_t k = 0; k < channels.size(); ++k) {
            const Obj ch(channels[k], obj.at_ptr("channels") + "/" + std::to_string(k), {"index", "lower", "upper"});
            const auto index = ch.count("index", dim);
            if (index >= dim) throw ConfigError(ch.at_ptr("index"), "channel index out of range");
            box.lower(static_cast<Eigen::Index>(index)) = ch.number("lower");
            box.upper(static_cast<Eigen::Index>(index)) = ch.number("upper");
        }
    }
    if ((box.lower.array() > box.upper.array()).any()) throw ConfigError(pointer, "load box lower exceeds upper");
    return box;
}

grid::LoadBox symmetric_box_for(const json& load_doc, std::size_t dim) {
    // Smallest box containing the sinusoid/constant/scripted signal and 0.
    // Malformed documents yield the zero box; parse_load reports them.
    grid::LoadBox box = grid::LoadBox::zero(dim);
    if (!load_doc.is_object()) return box;
    try {
        const std::string kind = load_doc.value("kind", "constant");
        if (kind == "sinusoid" && load_doc.contains("channels")) {
            for (const auto& ch : load_doc.at("channels")) {
                const auto i = static_cast<Eigen::Index>(ch.value("index", std::size_t{0}));
                if (i >= static_cast<Eigen::Index>(dim)) continue;
                const double off = ch.value("offset", 0.0);
                const double amp = std::abs(ch.value("amplitude", 0.0));
                box.lower(i) = off - amp;
                box.upper(i) = off + amp;
            }
        } else if (kind == "constant" && load_doc.contains("value") && load_doc.at("value").is_array()) {
            const auto& v = load_doc.at("value");
            for (std::size_t i = 0; i < std::min(dim, v.size()); ++i) {
                const double x = v[i].get<double>();
                box.lower(static_cast<Eigen::Index>(i)) = std::min(0.0, x);
                box.upper(static_cast<Eigen::Index>(i)) = std::max(0.0, x);
            }
        } else if (kind == "scripted" && load_doc.contains("values")) {
            for (const auto& row : load_doc.at("values")) {
                for (std::size_t i = 0; i < std::min(dim, row.size()); ++i) {
                    const double x = row[i].get<double>();
                    box.lower(static_cast<Eigen::Index>(i)) = std::min(box.lower(static_cast<Eigen::Index>(i)), x);
                    box.upper(static_cast<Eigen::Index>(i)) = std::max(box.upper(static_cast<Eigen::Index>(i)), x);
                }
            }
        }
    } catch (const json::exception&) {
        return grid::LoadBox::zero(dim);
    }
    return box;
}

// ---------------------------------------------------------------------------
// systems
// ---------------------------------------------------------------------------

std::vector<grid::GeneratorParams> parse_generators(const Obj& sys) {
    const auto& doc = sys.at("generators");
    const std::string ptr = sys.at_ptr("generators");
    auto one = [](const Obj& g) {
        grid::GeneratorParams p;
        p.inertia = g.number("inertia", 5.0);
        p.damping = g.number("damping");
        p.turbine_tau = g.number("turbine_tau");
        p.governor_gain = g.number("governor_gain");
        p.setpoint = g.number("setpoint", 0.0);
        return p;
    };
    std::vector<grid::GeneratorParams> gens;
    if (doc.is_object()) {
        const Obj g(doc, ptr, {"count", "inertia", "damping", "turbine_tau", "governor_gain", "setpoint", "setpoints"});
        const auto count = g.count("count", 1);
        if (count == 0) throw ConfigError(g.at_ptr("count"), "need at least one generator");
        gens.assign(count, one(g));
        if (g.has("setpoints")) {
            const auto sp = number_list(g.at("setpoints"), g.at_ptr("setpoints"));
            if (sp.size() != count) throw ConfigError(g.at_ptr("setpoints"), "need one setpoint per generator");
            for (std::size_t k = 0; k < count; ++k) gens[k].setpoint = sp[k];
        }
    } else if (doc.is_array()) {
        for (std::size_t k = 0; k < doc.size(); ++k) {
            gens.push_back(one(Obj(doc[k], ptr + "/" + std::to_string(k),
                                   {"inertia", "damping", "turbine_tau", "governor_gain", "setpoint"})));
        }
        if (gens.empty()) throw ConfigError(ptr, "need at least one generator");
    } else {
        throw ConfigError(ptr, "expected an object with 'count' or an array of generators");
    }
    for (std::size_t k = 0; k < gens.size(); ++k) {
        try {
            gens[k].validate();
        } catch (const Error& e) {
            throw ConfigError(ptr, e.what());
        }
    }
    return gens;
}

grid::DeaParams parse_dea(const Obj& d, const grid::DeaParams& base) {
    grid::DeaParams p = base;
    p.inertia = d.number("inertia", base.inertia);
    p.damping = d.number("damping", base.damping);
    p.reference_power = d.number("reference_power", base.reference_power);
    try {
        p.validate();
    } catch (const Error& e) {
        throw ConfigError(d.pointer(), e.what());
    }
    return p;
}

grid::SecondaryParams parse_secondary(const Obj& sys, std::size_t generators) {
    const Obj sec = sys.child("secondary", {"tau_z", "beta", "participation"});
    grid::SecondaryParams p;
    p.tau_z = sec.number("tau_z");
    p.beta = sec.number("beta");
    if (!sec.has("participation") || (sec.at("participation").is_string() && sec.str("participation", "") == "equal")) {
        p.participation = grid::SecondaryParams::equal_participation(generators);
    } else {
        p.participation = number_list(sec.at("participation"), sec.at_ptr("participation"));
    }
    return p;
}

std::vector<grid::ModeSpec> inline_modes(const Obj& sys) {
    const auto& modes = sys.array("modes");
    std::vector<grid::ModeSpec> out;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const Obj m(modes[k], sys.at_ptr("modes") + "/" + std::to_string(k), {"A", "B", "u", "b"});
        const Matrix a = io::matrix_from_json(m.at("A"), m.at_ptr("A"));
        const Matrix b = m.has("B") ? io::matrix_from_json(m.at("B"), m.at_ptr("B"))
                                    : Matrix(Matrix::Identity(a.rows(), a.rows()));
        Vector u;
        if (m.has("u") && m.has("b")) throw ConfigError(m.pointer(), "give either 'u' or 'b', not both");
        if (m.has("u")) {
            u = io::vector_from_json(m.at("u"), m.at_ptr("u"));
        } else if (m.has("b")) {
            if (m.has("B")) throw ConfigError(m.at_ptr("b"), "'b' is only accepted with the default identity B");
            u = io::vector_from_json(m.at("b"), m.at_ptr("b"));
        } else {
            u = Vector::Zero(b.cols());
        }
        try {
            out.push_back(grid::build_mode(k, a, b, u));
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Dimension) throw ConfigError(m.pointer(), e.what());
            throw;
        }
    }
    return out;
}

std::vector<grid::ModeSpec> aggregate_modes(const Obj& sys, json& info) {
    const auto gens = parse_generators(sys);
    std::vector<grid::DeaParams> deas;
    if (sys.has("deas")) {
        const auto& arr = sys.array("deas");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            deas.push_back(parse_dea(Obj(arr[k], sys.at_ptr("deas") + "/" + std::to_string(k),
                                         {"inertia", "damping", "reference_power"}),
                                     {}));
        }
    }
    const auto sec = parse_secondary(sys, gens.size());
    const auto& modes = sys.array("modes");
    std::vector<grid::ModeSpec> out;
    info = {{"kind", "aggregate"}, {"modes", json::array()}};
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const std::string mptr = sys.at_ptr("modes") + "/" + std::to_string(k);
        const Obj m(modes[k], mptr, {"load", "setpoints", "deas"});
        auto mode_gens = gens;
        if (m.has("setpoints")) {
            const auto sp = number_list(m.at("setpoints"), m.at_ptr("setpoints"));
            if (sp.size() != gens.size()) throw ConfigError(m.at_ptr("setpoints"), "need one setpoint per generator");
            for (std::size_t g = 0; g < gens.size(); ++g) mode_gens[g].setpoint = sp[g];
        }
        auto mode_deas = deas;
        if (m.has("deas")) {
            const auto& over = m.array("deas");
            for (std::size_t i = 0; i < over.size(); ++i) {
                const Obj o(over[i], m.at_ptr("deas") + "/" + std::to_string(i),
                            {"index", "inertia", "damping", "reference_power"});
                const auto idx = o.count("index", deas.size());
                if (idx >= deas.size()) throw ConfigError(o.at_ptr("index"), "DEA index out of range");
                mode_deas[idx] = parse_dea(o, deas[idx]);
            }
        }
        double net_load = m.number("load");
        for (const auto& d : mode_deas) net_load -= d.reference_power;
        grid::StateSpace ss;
        try {
            ss = grid::build_aggregate_matrices(mode_gens, mode_deas, sec);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Domain || e.kind() == ErrorKind::Construction) {
                throw ConfigError(mptr, e.what());
            }
            throw;
        }
        const auto eff = grid::aggregate_effective(mode_gens, mode_deas);
        info["modes"].push_back({{"effective_inertia", eff.inertia}, {"net_damping", eff.damping}, {"net_load", net_load}});
        out.push_back(grid::build_mode(k, ss.a, ss.b, grid::aggregate_input(net_load, mode_gens)));
    }
    return out;
}

std::vector<grid::ModeSpec> full_modes(const Obj& sys, json& info, std::vector<grid::FullModel>& full_order) {
    const Obj net = sys.child("network", {"bus_count", "lines", "generator_buses", "bus_loads", "sync_speed",
                                          "integral_gain", "angle_reference"});
    grid::NetworkParams params;
    params.bus_count = net.count("bus_count", 0);
    if (params.bus_count == 0) throw ConfigError(net.at_ptr("bus_count"), "need at least one bus");
    const auto one_based = [&](const json& v, const std::string& ptr) {
        if (!v.is_number_integer()) throw ConfigError(ptr, "expected a 1-based bus number");
        const auto bus = v.get<long long>();
        if (bus < 1 || static_cast<std::size_t>(bus) > params.bus_count) throw ConfigError(ptr, "bus number out of range");
        return static_cast<std::size_t>(bus - 1);
    };
    const auto& lines = net.array("lines");
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const std::string lptr = net.at_ptr("lines") + "/" + std::to_string(k);
        if (!lines[k].is_array() || lines[k].size() != 3) throw ConfigError(lptr, "expected [from, to, reactance]");
        if (!lines[k][2].is_number()) throw ConfigError(lptr + "/2", "expected a reactance");
        params.lines.push_back({one_based(lines[k][0], lptr + "/0"), one_based(lines[k][1], lptr + "/1"),
                                lines[k][2].get<double>()});
    }
    const auto& gen_buses = net.array("generator_buses");
    for (std::size_t k = 0; k < gen_buses.size(); ++k) {
        params.generator_buses.push_back(one_based(gen_buses[k], net.at_ptr("generator_buses") + "/" + std::to_string(k)));
    }
    std::vector<double> base_loads(params.bus_count, 0.0);
    if (net.has("bus_loads")) {
        base_loads = number_list(net.at("bus_loads"), net.at_ptr("bus_loads"));
        if (base_loads.size() != params.bus_count) throw ConfigError(net.at_ptr("bus_loads"), "need one load per bus");
    }
    params.sync_speed = net.number("sync_speed", params.sync_speed);
    params.integral_gain = net.number("integral_gain", params.integral_gain);
    params.angle_reference = parse_enum<grid::AngleReference>(
        net, "angle_reference", grid::AngleReference::Mean,
        {{"mean", grid::AngleReference::Mean}, {"absolute", grid::AngleReference::Absolute}});

    const auto gens = parse_generators(sys);
    if (gens.size() != params.generator_buses.size()) {
        throw ConfigError(sys.at_ptr("generators"), "need one generator per generator bus");
    }
    // Every bus that is not a generator bus is a DEA bus; unlisted ones are pure loads.
    std::vector<long> dea_slot(params.bus_count, -1);
    std::vector<bool> is_gen(params.bus_count, false);
    for (auto b : params.generator_buses) is_gen[b] = true;
    std::vector<grid::DeaParams> deas;
    for (std::size_t bus = 0; bus < params.bus_count; ++bus) {
        if (is_gen[bus]) continue;
        dea_slot[bus] = static_cast<long>(deas.size());
        params.dea_buses.push_back(bus);
        deas.emplace_back();
    }
    auto apply_dea_list = [&](const Obj& parent, std::vector<grid::DeaParams>& target) {
        const auto& arr = parent.array("deas");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const Obj d(arr[k], parent.at_ptr("deas") + "/" + std::to_string(k),
                        {"bus", "inertia", "damping", "reference_power"});
            const auto bus = one_based(d.at("bus"), d.at_ptr("bus"));
            if (dea_slot[bus] < 0) throw ConfigError(d.at_ptr("bus"), "bus hosts a generator, not a DEA");
            auto& slot = target[static_cast<std::size_t>(dea_slot[bus])];
            slot = parse_dea(d, slot);
        }
    };
    if (sys.has("deas")) apply_dea_list(sys, deas);

    const bool reduce = sys.boolean("reduce", true);
    const auto& modes = sys.array("modes");
    std::vector<grid::ModeSpec> out;
    Matrix basis;
    info = {{"kind", "full"}, {"bus_count", params.bus_count}, {"reduced", reduce}, {"modes", json::array()}};
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const std::string mptr = sys.at_ptr("modes") + "/" + std::to_string(k);
        const Obj m(modes[k], mptr, {"load_scale", "bus_loads", "deas"});
        auto mode_deas = deas;
        if (m.has("deas")) apply_dea_list(m, mode_deas);
        std::vector<double> loads = base_loads;
        if (m.has("bus_loads")) {
            loads = number_list(m.at("bus_loads"), m.at_ptr("bus_loads"));
            if (loads.size() != params.bus_count) throw ConfigError(m.at_ptr("bus_loads"), "need one load per bus");
        }
        const double scale = m.number("load_scale", 1.0);
        for (auto& l : loads) l *= scale;
        for (std::size_t bus = 0; bus < params.bus_count; ++bus) {
            if (dea_slot[bus] >= 0) loads[bus] -= mode_deas[static_cast<std::size_t>(dea_slot[bus])].reference_power;
        }
        params.bus_loads = loads;
        grid::FullModel full;
        try {
            full = grid::build_full_matrices(params, gens, mode_deas);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Construction || e.kind() == ErrorKind::Domain) throw ConfigError(mptr, e.what());
            throw;
        }
        std::vector<double> refs;
        for (const auto& g : gens) refs.push_back(g.setpoint);
        full_order.push_back(full);
        const Vector u = full.input(loads, refs);
        const auto spectrum = linalg::spectral_report(full.a);
        std::size_t zeros = 0;
        const double tol = 1e-8 * std::max(1.0, full.a.cwiseAbs().maxCoeff());
        for (const auto& lambda : spectrum.eigenvalues) zeros += std::abs(lambda) <= tol ? 1 : 0;
        json dyn = json::array();
        for (auto b : full.dynamic_buses) dyn.push_back(b + 1);
        json mode_info = {{"full_state_dim", full.a.rows()}, {"zero_eigenvalues", zeros}, {"dynamic_buses", dyn}};
        if (!reduce) {
            out.push_back(grid::build_mode(k, full.a, full.b, u));
        } else {
            const auto red = k == 0 ? grid::reduce_zero_mode(full.a, full.b) : grid::reduce_with_basis(full.a, full.b, basis);
            if (k == 0) basis = red.basis;
            mode_info["basis_orthonormality_error"] =
                (red.basis.transpose() * red.basis - Matrix::Identity(red.basis.cols(), red.basis.cols())).norm();
            out.push_back(grid::build_mode(k, red.a, red.b, u));
        }
        info["modes"].push_back(std::move(mode_info));
    }
    return out;
}

// ---------------------------------------------------------------------------
// simulation settings
// ---------------------------------------------------------------------------

hybrid::SimConfig parse_sim(const json& doc, const std::string& pointer) {
    hybrid::SimConfig cfg;
    if (doc.is_null()) return cfg;
    const Obj s(doc, pointer, {"delta1", "delta2", "delta_inflation", "eta", "chatter_bound", "step", "horizon",
                               "max_jumps", "jump_policy", "mode_selection", "mode_script", "timer_rate",
                               "rate_script", "perturbation", "sample_stride"});
    cfg.delta1 = s.number("delta1", cfg.delta1);
    cfg.delta2 = s.number("delta2", cfg.delta2);
    if (s.has("delta_inflation")) cfg.delta_inflation = s.number("delta_inflation");
    cfg.eta = s.number("eta", cfg.eta);
    cfg.chatter_bound = s.number("chatter_bound", cfg.chatter_bound);
    cfg.step = s.number("step", cfg.step);
    cfg.horizon = s.number("horizon", cfg.horizon);
    if (!(cfg.step > 0.0)) throw ConfigError(s.at_ptr("step"), "step must be positive");
    if (!(cfg.horizon > 0.0)) throw ConfigError(s.at_ptr("horizon"), "horizon must be positive");
    cfg.max_jumps = s.count("max_jumps", cfg.max_jumps);
    cfg.sample_stride = s.count("sample_stride", cfg.sample_stride);
    cfg.jump_policy = parse_enum(s, "jump_policy", cfg.jump_policy, kJumpPolicies);
    cfg.mode_selection = parse_enum(s, "mode_selection", cfg.mode_selection, kModeSelections);
    cfg.timer_rate = parse_enum<hybrid::TimerRatePolicy>(
        s, "timer_rate", cfg.timer_rate,
        {{"max", hybrid::TimerRatePolicy::Max}, {"scripted", hybrid::TimerRatePolicy::Scripted}});
    cfg.perturbation = parse_enum<hybrid::JumpPerturbation>(
        s, "perturbation", cfg.perturbation,
        {{"exact", hybrid::JumpPerturbation::Exact}, {"ball_uniform", hybrid::JumpPerturbation::BallUniform}});
    if (s.has("mode_script")) {
        const auto& arr = s.array("mode_script");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            if (!arr[k].is_number_integer() || arr[k].get<long long>() < 0) {
                throw ConfigError(s.at_ptr("mode_script") + "/" + std::to_string(k), "expected a mode index");
            }
            cfg.mode_script.push_back(arr[k].get<std::size_t>());
        }
    }
    if (s.has("rate_script")) {
        const auto& arr = s.array("rate_script");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const Obj seg(arr[k], s.at_ptr("rate_script") + "/" + std::to_string(k), {"until", "rate"});
            cfg.rate_script.push_back({seg.number("until"), seg.number("rate")});
        }
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(pointer, e.what());
    }
    return cfg;
}

}  // namespace

hybrid::LoadGenerator parse_load(const json& doc, const grid::LoadBox& box, const std::string& pointer) {
    const auto dim = static_cast<Eigen::Index>(box.lower.size());
    if (doc.is_null()) return hybrid::LoadGenerator::constant(Vector::Zero(dim), box);
    const Obj l(doc, pointer, {"kind", "value", "channels", "times", "values"});
    const std::string kind = l.str("kind", "constant");
    try {
        if (kind == "constant") {
            Vector v = l.has("value") ? io::vector_from_json(l.at("value"), l.at_ptr("value")) : Vector::Zero(dim);
            if (v.size() != dim) throw ConfigError(l.at_ptr("value"), "load value needs " + std::to_string(dim) + " entries");
            return hybrid::LoadGenerator::constant(v, box);
        }
        if (kind == "sinusoid") {
            std::vector<hybrid::SinusoidChannel> channels(static_cast<std::size_t>(dim));
            const auto& arr = l.array("channels");
            for (std::size_t k = 0; k < arr.size(); ++k) {
                const Obj ch(arr[k], l.at_ptr("channels") + "/" + std::to_string(k),
                             {"index", "offset", "amplitude", "frequency", "phase"});
                const auto i = ch.count("index", static_cast<std::size_t>(dim));
                if (i >= static_cast<std::size_t>(dim)) throw ConfigError(ch.at_ptr("index"), "channel index out of range");
                channels[i] = {ch.number("offset", 0.0), ch.number("amplitude", 0.0), ch.number("frequency", 0.0),
                               ch.number("phase", 0.0)};
            }
            return hybrid::LoadGenerator::sinusoid(channels, box);
        }
        if (kind == "scripted") {
            const auto times = number_list(l.at("times"), l.at_ptr("times"));
            const auto& rows = l.array("values");
            std::vector<Vector> values;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                values.push_back(io::vector_from_json(rows[k], l.at_ptr("values") + "/" + std::to_string(k)));
            }
            return hybrid::LoadGenerator::scripted(times, values, box);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(pointer, e.what());
    }
    throw ConfigError(l.at_ptr("kind"), "unknown load kind '" + kind + "' (expected constant, sinusoid or scripted)");
}

void apply_override(json& document, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("", "override '" + assignment + "' must have the form path.to.key=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &document;
    std::string pointer;
    std::stringstream parts(path);
    std::string key;
    std::vector<std::string> keys;
    while (std::getline(parts, key, '.')) keys.push_back(key);
    for (std::size_t k = 0; k < keys.size(); ++k) {
        const auto& part = keys[k];
        pointer += "/" + escape_token(part);
        const bool last = k + 1 == keys.size();
        if (node->is_array()) {
            std::size_t index = 0;
            try {
                std::size_t used = 0;
                index = std::stoul(part, &used);
                if (used != part.size()) throw std::invalid_argument(part);
            } catch (const std::exception&) {
                throw ConfigError(pointer, "array index expected in override path");
            }
            if (index >= node->size()) throw ConfigError(pointer, "array index out of range in override path");
            node = &(*node)[index];
        } else {
            if (node->is_null()) *node = json::object();
            if (!node->is_object()) throw ConfigError(pointer, "override path descends into a scalar");
            node = &(*node)[part];
        }
        if (last) *node = value;
    }
}

Scenario parse_scenario(const json& document) {
    const Obj root(document, "", {"name", "note", "system", "sim", "load", "init", "seeds", "analysis", "output"});
    Scenario sc;
    sc.document = document;
    sc.name = root.str("name", "scenario");

    const Obj sys = root.child("system", {"kind", "modes", "load_box", "generators", "deas", "secondary", "network",
                                          "reduce"});
    sc.system_kind = sys.str("kind", "inline");
    std::vector<grid::ModeSpec> modes;
    if (sc.system_kind == "inline") {
        modes = inline_modes(sys);
        sc.model_info = {{"kind", "inline"}};
    } else if (sc.system_kind == "aggregate") {
        modes = aggregate_modes(sys, sc.model_info);
    } else if (sc.system_kind == "full") {
        modes = full_modes(sys, sc.model_info, sc.full_order);
    } else {
        throw ConfigError(sys.at_ptr("kind"), "unknown system kind '" + sc.system_kind +
                                                  "' (expected inline, aggregate or full)");
    }
    if (modes.empty()) throw ConfigError(sys.at_ptr("modes"), "need at least one mode");
    const auto input_dim = modes.front().input_dim();
    const grid::LoadBox box =
        parse_box(sys.has("load_box") ? sys.at("load_box") : json(nullptr), input_dim, sys.at_ptr("load_box"));
    try {
        sc.system = grid::make_switched_system(std::move(modes), box);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Dimension || e.kind() == ErrorKind::Domain) throw ConfigError(sys.pointer(), e.what());
        throw;
    }

    sc.sim = parse_sim(root.has("sim") ? root.at("sim") : json(nullptr), root.at_ptr("sim"));
    sc.load = root.has("load") ? root.at("load") : json(nullptr);
    (void)sc.hdelta_load();  // validate early so errors carry the right pointer

    if (root.has("seeds")) {
        const auto& arr = root.array("seeds");
        std::set<std::uint64_t> seen;
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const std::string ptr = root.at_ptr("seeds") + "/" + std::to_string(k);
            if (!arr[k].is_number_integer() || arr[k].get<long long>() < 0) throw ConfigError(ptr, "expected a seed");
            const auto seed = arr[k].get<std::uint64_t>();
            if (!seen.insert(seed).second) throw ConfigError(ptr, "duplicate seed");
            sc.seeds.push_back(seed);
        }
    }
    if (sc.seeds.empty()) sc.seeds.push_back(sc.sim.seed);

    if (root.has("init")) {
        const Obj init = root.child("init", {"points", "random", "mode", "tau"});
        sc.init.mode = init.count("mode", 0);
        if (sc.init.mode >= sc.system.modes.size()) throw ConfigError(init.at_ptr("mode"), "initial mode is not in the system");
        sc.init.tau = init.number("tau", 0.0);
        if (init.has("points")) {
            const auto& pts = init.array("points");
            for (std::size_t k = 0; k < pts.size(); ++k) {
                const std::string ptr = init.at_ptr("points") + "/" + std::to_string(k);
                Vector p = io::vector_from_json(pts[k], ptr);
                if (static_cast<std::size_t>(p.size()) != sc.system.state_dim()) {
                    throw ConfigError(ptr, "initial point needs " + std::to_string(sc.system.state_dim()) + " entries");
                }
                sc.init.points.push_back(std::move(p));
            }
        }
        if (init.has("random")) {
            const Obj rnd = init.child("random", {"count", "radius", "center"});
            sc.init.random_count = rnd.count("count", 1);
            sc.init.radius = rnd.number("radius", 1.0);
            const std::string center = rnd.str("center", "equilibrium");
            if (center != "equilibrium" && center != "origin") {
                throw ConfigError(rnd.at_ptr("center"), "center must be 'equilibrium' or 'origin'");
            }
            sc.init.around_equilibrium = center == "equilibrium";
        }
    }
    if (sc.init.points.empty() && sc.init.random_count == 0) sc.init.points.push_back(sc.system.modes[sc.init.mode].equilibrium);

    if (root.has("analysis")) {
        const Obj an = root.child("analysis", {"omega_set", "distance", "iss"});
        if (an.has("omega_set")) {
            const Obj om = an.child("omega_set", {"eps_tail", "chord_tol", "max_samples", "initial_grid"});
            sc.omega.eps_tail = om.number("eps_tail", sc.omega.eps_tail);
            sc.omega.chord_tol = om.number("chord_tol", sc.omega.chord_tol);
            sc.omega.max_samples = om.count("max_samples", sc.omega.max_samples);
            sc.omega.initial_grid = om.count("initial_grid", sc.omega.initial_grid);
        }
        if (an.has("distance")) {
            const Obj d = an.child("distance", {"tail_fraction"});
            sc.tail_fraction = d.number("tail_fraction", sc.tail_fraction);
            if (!(sc.tail_fraction > 0.0 && sc.tail_fraction <= 1.0)) {
                throw ConfigError(d.at_ptr("tail_fraction"), "tail_fraction must lie in (0, 1]");
            }
        }
        if (an.has("iss")) {
            const Obj is = an.child("iss", {"theta", "chatter_bound", "margin", "eta_fraction", "runs", "step",
                                            "horizon", "sample_stride", "jump_policy", "mode_selection",
                                            "init_radius", "init_tau_uniform", "load", "load_box"});
            auto& spec = sc.iss;
            spec.certificate.theta = is.number("theta", spec.certificate.theta);
            spec.certificate.chatter_bound = is.number("chatter_bound", spec.certificate.chatter_bound);
            spec.certificate.margin = is.number("margin", spec.certificate.margin);
            spec.eta_fraction = is.number("eta_fraction", spec.eta_fraction);
            spec.runs = is.count("runs", spec.runs);
            spec.step = is.number("step", spec.step);
            spec.horizon = is.number("horizon", spec.horizon);
            spec.sample_stride = is.count("sample_stride", spec.sample_stride);
            spec.jump_policy = parse_enum(is, "jump_policy", spec.jump_policy, kJumpPolicies);
            spec.mode_selection = parse_enum(is, "mode_selection", spec.mode_selection, kModeSelections);
            spec.init_radius = is.number("init_radius", spec.init_radius);
            spec.init_tau_uniform = is.boolean("init_tau_uniform", spec.init_tau_uniform);
            spec.load = is.has("load") ? is.at("load") : json(nullptr);
            spec.box = is.has("load_box") ? parse_box(is.at("load_box"), input_dim, is.at_ptr("load_box"))
                                          : symmetric_box_for(spec.load, input_dim);
            if (!(spec.eta_fraction > 0.0)) throw ConfigError(is.at_ptr("eta_fraction"), "eta_fraction must be positive");
        }
    }
    if (sc.iss.box.lower.size() == 0) sc.iss.box = grid::LoadBox::zero(input_dim);
    (void)sc.iss_load();

    if (root.has("output")) {
        const Obj out = root.child("output", {"dir"});
        sc.output_dir = out.str("dir", "out/" + sc.name);
    } else {
        sc.output_dir = "out/" + sc.name;
    }
    return sc;
}

hybrid::LoadGenerator Scenario::hdelta_load() const { return parse_load(load, system.load_box, "/load"); }

hybrid::LoadGenerator Scenario::iss_load() const { return parse_load(iss.load, iss.box, "/analysis/iss/load"); }

namespace {

Vector ball_point(std::mt19937_64& rng, Eigen::Index n, double radius) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector dir(n);
    for (Eigen::Index i = 0; i < n; ++i) dir(i) = normal(rng);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double norm = dir.norm();
    if (norm == 0.0) return Vector::Zero(n);
    return dir * (radius * std::pow(u, 1.0 / static_cast<double>(n)) / norm);
}

}  // namespace

std::vector<hybrid::HybridState> Scenario::initial_states(std::uint64_t seed) const {
    const auto load_gen = hdelta_load().time_scaled(sim.delta2);
    const Vector u0 = load_gen.value(0.0);
    std::vector<hybrid::HybridState> states;
    for (const auto& p : init.points) states.push_back({p, init.mode, u0, init.tau});
    std::mt19937_64 rng(seed);
    const auto n = static_cast<Eigen::Index>(system.state_dim());
    const Vector center = init.around_equilibrium ? system.modes[init.mode].equilibrium : Vector::Zero(n);
    for (std::size_t k = 0; k < init.random_count; ++k) {
        states.push_back({center + ball_point(rng, n, init.radius), init.mode, u0, init.tau});
    }
    return states;
}

std::vector<hybrid::HybridState> Scenario::iss_initial_states(std::uint64_t seed, std::size_t count) const {
    std::mt19937_64 rng(seed);
    const auto n = static_cast<Eigen::Index>(system.state_dim());
    std::vector<hybrid::HybridState> states;
    for (std::size_t k = 0; k < count; ++k) {
        const Vector y = ball_point(rng, n, iss.init_radius);
        const auto q = std::uniform_int_distribution<std::size_t>(0, system.modes.size() - 1)(rng);
        const double tau =
            iss.init_tau_uniform ? std::uniform_real_distribution<double>(0.0, iss.certificate.chatter_bound)(rng) : 0.0;
        states.push_back({y, q, Vector(), tau});
    }
    return states;
}

hybrid::SimConfig Scenario::iss_config(const iss::IssCertificate& cert, std::uint64_t seed) const {
    hybrid::SimConfig cfg;
    cfg.eta = iss.eta_fraction * cert.eta_star;
    cfg.chatter_bound = cert.chatter_bound;
    cfg.step = iss.step;
    cfg.horizon = iss.horizon;
    cfg.seed = seed;
    cfg.jump_policy = iss.jump_policy;
    cfg.mode_selection = iss.mode_selection;
    cfg.sample_stride = iss.sample_stride;
    cfg.max_jumps = sim.max_jumps;
    return cfg;
}

std::filesystem::path preset_path(const std::string& name) {
    const char* env = std::getenv("OMEGA_GRID_PRESET_DIR");
    const std::filesystem::path dir = env != nullptr ? std::filesystem::path(env) : std::filesystem::path(OMEGA_GRID_PRESET_DIR);
    const auto path = dir / (name + ".json");
    if (!std::filesystem::exists(path)) throw ConfigError("", "unknown preset '" + name + "' (looked in " + dir.string() + ")");
    return path;
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open scenario file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", "scenario file " + path.string() + " is not valid JSON: " + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_scenario(doc);
}

}  // namespace omega_grid::scenario
