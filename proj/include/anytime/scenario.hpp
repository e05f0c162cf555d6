#pragma once

// Scenario configuration: a JSON document with a required "version" field.
// Unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anytime/certify.hpp"
#include "anytime/chain.hpp"
#include "anytime/loop.hpp"
#include "anytime/mc.hpp"

namespace anytime {

inline constexpr int kConfigVersion = 1;

struct ChainSpec {
    enum class Kind { matrix, uniform, qlambda, case_study };
    Kind kind = Kind::case_study;
    int capacity = 5;
    std::vector<std::vector<double>> matrix;  ///< Kind::matrix only

    friend bool operator==(const ChainSpec&, const ChainSpec&) = default;
};

struct PlantSpec {
    enum class Kind { cubic, linear };
    Kind kind = Kind::cubic;
    double a = 1.2;    ///< linear only
    double b = 1.0;    ///< linear only
    double rho = 0.5;  ///< linear only

    friend bool operator==(const PlantSpec&, const PlantSpec&) = default;
};

struct SimSpec {
    int horizon = 50;
    int trajectories = 10000;
    std::uint64_t seed = 1;
    std::vector<double> initial_state{1.0};
    int initial_availability = 0;
    NoiseSpec noise;
    std::vector<ControllerKind> controllers{ControllerKind::anytime, ControllerKind::baseline,
                                            ControllerKind::ideal};
    CostWeights cost;
    std::vector<int> checkpoints;

    friend bool operator==(const SimSpec&, const SimSpec&) = default;
};

struct OutputSpec {
    std::string path;
    std::string trace;

    friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct Scenario {
    std::string name;
    ChainSpec chain;
    PlantSpec plant;
    /// Rates asserted for certificates; when empty the plant's own rates are used.
    std::optional<LyapunovRates> rates;
    SimSpec sim;
    OutputSpec output;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Parses config text. Throws Error{parse_error} on malformed JSON, missing or
/// unsupported version, wrong types or unknown keys; messages carry field paths.
[[nodiscard]] Scenario parse_scenario(std::string_view text);
[[nodiscard]] Scenario load_scenario_file(const std::string& path);

/// Canonical config text; parse_scenario(dump_scenario(s)) == s.
[[nodiscard]] std::string dump_scenario(const Scenario& s);

/// FNV-1a 64 of the canonical config text, as 16 hex digits.
[[nodiscard]] std::string scenario_hash(const Scenario& s);

/// "case_study", "qlambda:<L>", "qlambda_sweep" (L = 1..7), "uniform:<L>",
/// "linear_noise". Throws Error{validation_error} for unknown names.
[[nodiscard]] std::vector<Scenario> builtin_scenarios(std::string_view name);

/// Names accepted by builtin_scenarios, with sample capacities filled in.
[[nodiscard]] std::vector<std::string> builtin_scenario_names();

struct ValidationIssue {
    std::string path;
    std::string error;  ///< error code name
    std::string message;
};

/// Validated module-level objects for a scenario.
struct ResolvedScenario {
    ProcessorChain chain;
    PlantModel plant;
    std::optional<LyapunovRates> rates;
    SimConfig sim;
    std::vector<ControllerKind> controllers;
};

[[nodiscard]] ProcessorChain resolve_chain(const ChainSpec& spec);
[[nodiscard]] PlantModel resolve_plant(const PlantSpec& spec);

/// Every issue found, each tagged with a field path; empty when valid.
[[nodiscard]] std::vector<ValidationIssue> validate_scenario(const Scenario& s);

/// Throws Error{validation_error} naming the first issue's field path.
[[nodiscard]] ResolvedScenario resolve_scenario(const Scenario& s);

}  // namespace anytime
