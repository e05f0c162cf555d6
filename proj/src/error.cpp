#include "anytime/error.hpp"

namespace anytime {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::negative_entry: return "NegativeEntry";
        case Errc::non_stochastic_row: return "NonStochasticRow";
        case Errc::reducible: return "Reducible";
        case Errc::periodic: return "Periodic";
        case Errc::capacity_too_small: return "CapacityTooSmall";
        case Errc::oracle_too_large: return "OracleTooLarge";
        case Errc::invalid_rates: return "InvalidRates";
        case Errc::solver_failure: return "SolverFailure";
        case Errc::not_applicable: return "NotApplicable";
        case Errc::grid_out_of_range: return "GridOutOfRange";
        case Errc::zero_input_gain: return "ZeroInputGain";
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::horizon_too_short: return "HorizonTooShort";
        case Errc::non_scalar_plant: return "NonScalarPlant";
        case Errc::numeric_overflow: return "NumericOverflow";
        case Errc::certificate_not_satisfied: return "CertificateNotSatisfied";
        case Errc::parse_error: return "ParseError";
        case Errc::validation_error: return "ValidationError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

}  // namespace anytime
