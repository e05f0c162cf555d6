#include "anytime/scenario.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "anytime/error.hpp"

namespace anytime {
namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& path, const std::string& what) {
    throw Error(Errc::parse_error, path + ": " + what);
}

// Strict object reader: every key must be consumed or declared.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) parse_fail(path_, "expected an object");
    }

    [[nodiscard]] std::string at(std::string_view key) const { return path_ + "." + std::string(key); }
    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }
    const json& get(const std::string& key) const {
        if (!j_.contains(key)) parse_fail(at(key), "required field missing");
        return j_.at(key);
    }

    void reject_unknown(std::initializer_list<std::string_view> allowed) const {
        for (const auto& [key, value] : j_.items()) {
            bool known = false;
            for (auto a : allowed) known = known || a == key;
            if (!known) parse_fail(at(key), "unknown field");
        }
    }

    double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) parse_fail(at(key), "expected a number");
        return v.get<double>();
    }
    int integer(const std::string& key, int fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) parse_fail(at(key), "expected an integer");
        return v.get<int>();
    }
    std::string string(const std::string& key, std::string fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) parse_fail(at(key), "expected a string");
        return v.get<std::string>();
    }

private:
    const json& j_;
    std::string path_;
};

std::vector<double> number_list(const json& v, const std::string& path) {
    if (!v.is_array()) parse_fail(path, "expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) parse_fail(path + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

std::string_view chain_kind_name(ChainSpec::Kind k) {
    switch (k) {
        case ChainSpec::Kind::matrix: return "matrix";
        case ChainSpec::Kind::uniform: return "uniform";
        case ChainSpec::Kind::qlambda: return "qlambda";
        case ChainSpec::Kind::case_study: return "case_study";
    }
    return "unknown";
}

ChainSpec parse_chain(const json& j) {
    const Fields f(j, "chain");
    f.reject_unknown({"type", "capacity", "matrix"});
    ChainSpec spec;
    const std::string type = f.string("type", "");
    if (type == "matrix") {
        spec.kind = ChainSpec::Kind::matrix;
        const json& m = f.get("matrix");
        if (!m.is_array()) parse_fail(f.at("matrix"), "expected an array of rows");
        for (std::size_t i = 0; i < m.size(); ++i) {
            spec.matrix.push_back(number_list(m[i], "chain.matrix[" + std::to_string(i) + "]"));
        }
        spec.capacity = f.integer("capacity", static_cast<int>(spec.matrix.size()) - 1);
    } else if (type == "uniform" || type == "qlambda") {
        spec.kind = type == "uniform" ? ChainSpec::Kind::uniform : ChainSpec::Kind::qlambda;
        if (!f.has("capacity")) parse_fail(f.at("capacity"), "required field missing");
        spec.capacity = f.integer("capacity", 0);
        if (f.has("matrix")) parse_fail(f.at("matrix"), "only allowed with type \"matrix\"");
    } else if (type == "case_study") {
        spec.kind = ChainSpec::Kind::case_study;
        spec.capacity = f.integer("capacity", 5);
        if (f.has("matrix")) parse_fail(f.at("matrix"), "only allowed with type \"matrix\"");
    } else {
        parse_fail(f.at("type"), "expected one of matrix, uniform, qlambda, case_study");
    }
    return spec;
}

PlantSpec parse_plant(const json& j) {
    const Fields f(j, "plant");
    const std::string type = f.string("type", "");
    PlantSpec spec;
    if (type == "cubic") {
        f.reject_unknown({"type"});
        spec.kind = PlantSpec::Kind::cubic;
    } else if (type == "linear") {
        f.reject_unknown({"type", "a", "b", "rho"});
        spec.kind = PlantSpec::Kind::linear;
        spec.a = f.number("a", spec.a);
        spec.b = f.number("b", spec.b);
        spec.rho = f.number("rho", spec.rho);
    } else {
        parse_fail(f.at("type"), "expected one of cubic, linear");
    }
    return spec;
}

SimSpec parse_sim(const json& j) {
    const Fields f(j, "simulation");
    f.reject_unknown({"horizon", "trajectories", "seed", "initial_state", "initial_availability", "noise",
                      "controllers", "cost", "checkpoints"});
    SimSpec spec;
    spec.horizon = f.integer("horizon", spec.horizon);
    spec.trajectories = f.integer("trajectories", spec.trajectories);
    if (f.has("seed")) {
        const json& s = f.get("seed");
        if (!s.is_number_unsigned()) parse_fail(f.at("seed"), "expected a nonnegative integer");
        spec.seed = s.get<std::uint64_t>();
    }
    if (f.has("initial_state")) spec.initial_state = number_list(f.get("initial_state"), f.at("initial_state"));
    spec.initial_availability = f.integer("initial_availability", spec.initial_availability);
    if (f.has("noise")) {
        const Fields n(f.get("noise"), f.at("noise"));
        n.reject_unknown({"kind", "scale"});
        const std::string kind = n.string("kind", "none");
        const auto parsed = parse_noise(kind);
        if (!parsed) parse_fail(n.at("kind"), "expected one of none, uniform, gaussian");
        spec.noise.kind = *parsed;
        spec.noise.scale = n.number("scale", 0.0);
    }
    if (f.has("controllers")) {
        const json& c = f.get("controllers");
        if (!c.is_array()) parse_fail(f.at("controllers"), "expected an array");
        spec.controllers.clear();
        for (std::size_t i = 0; i < c.size(); ++i) {
            const std::string path = f.at("controllers") + "[" + std::to_string(i) + "]";
            if (!c[i].is_string()) parse_fail(path, "expected a string");
            const auto kind = parse_controller(c[i].get<std::string>());
            if (!kind) parse_fail(path, "expected one of anytime, baseline, ideal");
            spec.controllers.push_back(*kind);
        }
    }
    if (f.has("cost")) {
        const Fields c(f.get("cost"), f.at("cost"));
        c.reject_unknown({"state_weight", "input_weight", "horizon"});
        spec.cost.state_weight = c.number("state_weight", spec.cost.state_weight);
        spec.cost.input_weight = c.number("input_weight", spec.cost.input_weight);
        spec.cost.horizon = c.integer("horizon", spec.cost.horizon);
    }
    if (f.has("checkpoints")) {
        const json& c = f.get("checkpoints");
        if (!c.is_array()) parse_fail(f.at("checkpoints"), "expected an array");
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (!c[i].is_number_integer()) {
                parse_fail(f.at("checkpoints") + "[" + std::to_string(i) + "]", "expected an integer");
            }
            spec.checkpoints.push_back(c[i].get<int>());
        }
    }
    return spec;
}

json chain_to_json(const ChainSpec& c) {
    json j;
    j["type"] = chain_kind_name(c.kind);
    j["capacity"] = c.capacity;
    if (c.kind == ChainSpec::Kind::matrix) j["matrix"] = c.matrix;
    return j;
}

json plant_to_json(const PlantSpec& p) {
    json j;
    if (p.kind == PlantSpec::Kind::cubic) {
        j["type"] = "cubic";
    } else {
        j["type"] = "linear";
        j["a"] = p.a;
        j["b"] = p.b;
        j["rho"] = p.rho;
    }
    return j;
}

json sim_to_json(const SimSpec& s) {
    json j;
    j["horizon"] = s.horizon;
    j["trajectories"] = s.trajectories;
    j["seed"] = s.seed;
    j["initial_state"] = s.initial_state;
    j["initial_availability"] = s.initial_availability;
    j["noise"] = {{"kind", to_string(s.noise.kind)}, {"scale", s.noise.scale}};
    json controllers = json::array();
    for (auto c : s.controllers) controllers.push_back(to_string(c));
    j["controllers"] = controllers;
    j["cost"] = {{"state_weight", s.cost.state_weight},
                 {"input_weight", s.cost.input_weight},
                 {"horizon", s.cost.horizon}};
    j["checkpoints"] = s.checkpoints;
    return j;
}

int parse_capacity_suffix(std::string_view name, std::string_view prefix) {
    const std::string_view digits = name.substr(prefix.size());
    int value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) {
        throw Error(Errc::validation_error, "scenario '" + std::string(name) + "': bad capacity");
    }
    return value;
}

Scenario cubic_scenario(std::string name, ChainSpec chain) {
    Scenario s;
    s.name = std::move(name);
    s.chain = std::move(chain);
    s.plant.kind = PlantSpec::Kind::cubic;
    return s;
}

Scenario linear_scenario(std::string name, int capacity) {
    Scenario s;
    s.name = std::move(name);
    s.chain.kind = ChainSpec::Kind::uniform;
    s.chain.capacity = capacity;
    s.plant = PlantSpec{PlantSpec::Kind::linear, 1.2, 1.0, 0.5};
    s.sim.horizon = 2000;
    s.sim.controllers = {ControllerKind::anytime};
    return s;
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::parse_error, std::string("malformed JSON: ") + e.what());
    }
    const Fields f(j, "$");
    f.reject_unknown({"version", "name", "chain", "plant", "rates", "simulation", "output"});
    if (!f.has("version")) parse_fail("version", "required field missing");
    if (!j.at("version").is_number_integer() || j.at("version").get<int>() != kConfigVersion) {
        parse_fail("version", "unsupported version (expected " + std::to_string(kConfigVersion) + ")");
    }
    Scenario s;
    s.name = f.string("name", "scenario");
    s.chain = parse_chain(f.get("chain"));
    s.plant = parse_plant(f.get("plant"));
    if (f.has("rates")) {
        const Fields r(f.get("rates"), "rates");
        r.reject_unknown({"rho", "alpha"});
        s.rates = LyapunovRates{r.number("rho", 0.0), r.number("alpha", 0.0)};
        if (!r.has("rho")) parse_fail(r.at("rho"), "required field missing");
        if (!r.has("alpha")) parse_fail(r.at("alpha"), "required field missing");
    }
    if (f.has("simulation")) s.sim = parse_sim(f.get("simulation"));
    if (f.has("output")) {
        const Fields o(f.get("output"), "output");
        o.reject_unknown({"path", "trace"});
        s.output.path = o.string("path", "");
        s.output.trace = o.string("trace", "");
    }
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::parse_error, "cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string dump_scenario(const Scenario& s) {
    json j;
    j["version"] = kConfigVersion;
    j["name"] = s.name;
    j["chain"] = chain_to_json(s.chain);
    j["plant"] = plant_to_json(s.plant);
    if (s.rates) j["rates"] = {{"rho", s.rates->rho}, {"alpha", s.rates->alpha}};
    j["simulation"] = sim_to_json(s.sim);
    if (!s.output.path.empty() || !s.output.trace.empty()) {
        j["output"] = {{"path", s.output.path}, {"trace", s.output.trace}};
    }
    return j.dump(2);
}

std::string scenario_hash(const Scenario& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump_scenario(s)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<Scenario> builtin_scenarios(std::string_view name) {
    if (name == "case_study") {
        return {cubic_scenario("case_study", ChainSpec{ChainSpec::Kind::case_study, 5, {}})};
    }
    if (name == "qlambda_sweep") {
        std::vector<Scenario> out;
        for (int cap = 1; cap <= 7; ++cap) {
            out.push_back(cubic_scenario("qlambda_" + std::to_string(cap), ChainSpec{ChainSpec::Kind::qlambda, cap, {}}));
        }
        return out;
    }
    if (name.starts_with("qlambda:")) {
        const int cap = parse_capacity_suffix(name, "qlambda:");
        return {cubic_scenario("qlambda_" + std::to_string(cap), ChainSpec{ChainSpec::Kind::qlambda, cap, {}})};
    }
    if (name.starts_with("uniform:")) {
        const int cap = parse_capacity_suffix(name, "uniform:");
        return {linear_scenario("uniform_" + std::to_string(cap), cap)};
    }
    if (name == "linear_noise") {
        Scenario s = linear_scenario("linear_noise", 2);
        s.sim.noise = NoiseSpec{NoiseKind::uniform, 0.1};
        s.sim.checkpoints = {500, 1000, 1500, 2000};
        return {s};
    }
    throw Error(Errc::validation_error, "unknown built-in scenario '" + std::string(name) + "'");
}

std::vector<std::string> builtin_scenario_names() {
    return {"case_study", "qlambda:1", "qlambda:2", "qlambda:3", "qlambda:4", "qlambda:5", "qlambda:6",
            "qlambda:7", "qlambda_sweep", "uniform:1", "uniform:2", "uniform:5", "linear_noise"};
}

ProcessorChain resolve_chain(const ChainSpec& spec) {
    switch (spec.kind) {
        case ChainSpec::Kind::uniform: return uniform_chain(spec.capacity);
        case ChainSpec::Kind::qlambda: return q_lambda_chain(spec.capacity);
        case ChainSpec::Kind::case_study:
            if (spec.capacity != 5) throw Error(Errc::dimension_mismatch, "case_study chain has capacity 5");
            return case_study_chain();
        case ChainSpec::Kind::matrix: {
            const auto rows = static_cast<Eigen::Index>(spec.matrix.size());
            Eigen::MatrixXd q(rows, rows);
            for (Eigen::Index i = 0; i < rows; ++i) {
                const auto& row = spec.matrix[static_cast<std::size_t>(i)];
                if (static_cast<Eigen::Index>(row.size()) != rows) {
                    throw Error(Errc::dimension_mismatch,
                                "row " + std::to_string(i) + " has " + std::to_string(row.size()) + " entries");
                }
                for (Eigen::Index k = 0; k < rows; ++k) q(i, k) = row[static_cast<std::size_t>(k)];
            }
            return validate_chain(q, spec.capacity);
        }
    }
    throw Error(Errc::validation_error, "unknown chain type");
}

PlantModel resolve_plant(const PlantSpec& spec) {
    if (spec.kind == PlantSpec::Kind::cubic) return cubic_plant();
    return linear_plant(spec.a, spec.b, spec.rho);
}

std::vector<ValidationIssue> validate_scenario(const Scenario& s) {
    std::vector<ValidationIssue> issues;
    const auto record = [&](const std::string& path, const Error& e) {
        issues.push_back({path, std::string(to_string(e.code())), e.detail()});
    };
    const auto issue = [&](const std::string& path, const std::string& message) {
        issues.push_back({path, "ValidationError", message});
    };

    std::optional<ProcessorChain> chain;
    try {
        chain = resolve_chain(s.chain);
    } catch (const Error& e) {
        record(s.chain.kind == ChainSpec::Kind::matrix ? "chain.matrix" : "chain", e);
    }

    std::optional<PlantModel> plant;
    try {
        plant = resolve_plant(s.plant);
    } catch (const Error& e) {
        if (e.code() == Errc::invalid_rates) {
            issue("plant.rho", e.detail());
        } else {
            record(e.code() == Errc::zero_input_gain ? "plant.b" : "plant", e);
        }
    }
    if (plant) {
        // Equilibrium and the asserted rates on a spread of sample states.
        std::vector<Vector> samples;
        for (double v : {-3.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 3.0}) samples.push_back(Vector::Constant(plant->state_dim, v));
        const ContractReport report = check_plant_contract(*plant, samples);
        if (!report.equilibrium_ok) issue("plant", "origin is not an equilibrium");
        if (report.contraction_violations > 0) issue("plant", "feedback contraction exceeds rho on sampled states");
        if (report.growth_violations > 0) issue("plant", "open-loop growth exceeds alpha on sampled states");
    }

    if (s.rates) {
        try {
            (void)LyapunovRates::checked(s.rates->rho, s.rates->alpha);
        } catch (const Error& e) {
            issue("rates", e.detail());
        }
    }

    const SimSpec& sim = s.sim;
    if (sim.horizon < 1) issue("simulation.horizon", "must be >= 1");
    if (sim.trajectories < 1) issue("simulation.trajectories", "must be >= 1");
    if (!(sim.noise.scale >= 0.0)) issue("simulation.noise.scale", "must be >= 0");
    if (sim.noise.kind == NoiseKind::none && sim.noise.scale != 0.0) {
        issue("simulation.noise.scale", "must be 0 when kind is none");
    }
    if (sim.controllers.empty()) issue("simulation.controllers", "at least one controller required");
    if (sim.cost.horizon < 1) issue("simulation.cost.horizon", "must be >= 1");
    if (chain && (sim.initial_availability < 0 || sim.initial_availability > chain->capacity())) {
        issue("simulation.initial_availability", "must lie in 0.." + std::to_string(chain->capacity()));
    }
    if (plant && static_cast<int>(sim.initial_state.size()) != plant->state_dim) {
        issue("simulation.initial_state", "expected " + std::to_string(plant->state_dim) + " entries");
    }
    for (std::size_t i = 0; i < sim.checkpoints.size(); ++i) {
        if (sim.checkpoints[i] < 0 || sim.checkpoints[i] > sim.horizon) {
            issue("simulation.checkpoints[" + std::to_string(i) + "]", "must lie in 0..horizon");
        }
    }
    return issues;
}

ResolvedScenario resolve_scenario(const Scenario& s) {
    const auto issues = validate_scenario(s);
    if (!issues.empty()) {
        const auto& first = issues.front();
        throw Error(Errc::validation_error, first.path + ": " + first.error + ": " + first.message);
    }
    ResolvedScenario r{resolve_chain(s.chain), resolve_plant(s.plant), s.rates, SimConfig{}, s.sim.controllers};
    if (!r.rates) r.rates = r.plant.rates();
    r.sim.horizon = s.sim.horizon;
    r.sim.trajectories = s.sim.trajectories;
    r.sim.seed = s.sim.seed;
    r.sim.initial_state = Eigen::Map<const Eigen::VectorXd>(s.sim.initial_state.data(),
                                                            static_cast<Eigen::Index>(s.sim.initial_state.size()));
    r.sim.initial_availability = s.sim.initial_availability;
    r.sim.noise = s.sim.noise;
    r.sim.cost = s.sim.cost;
    r.sim.checkpoints = s.sim.checkpoints;
    return r;
}

}  // namespace anytime
