#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace anytime {

enum class Errc {
    dimension_mismatch,
    negative_entry,
    non_stochastic_row,
    reducible,
    periodic,
    capacity_too_small,
    oracle_too_large,
    invalid_rates,
    solver_failure,
    not_applicable,
    grid_out_of_range,
    zero_input_gain,
    invalid_argument,
    horizon_too_short,
    non_scalar_plant,
    numeric_overflow,
    certificate_not_satisfied,
    parse_error,
    validation_error,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a typed error code. `what()` is "<Code>: <detail>".
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& detail);

    [[nodiscard]] Errc code() const noexcept { return code_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

}  // namespace anytime
