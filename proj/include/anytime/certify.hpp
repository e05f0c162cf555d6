#pragma once

// Stochastic-stability certificates for the buffered anytime loop, the
// baseline loop, and the worst-case criterion it is compared against.

#include <span>
#include <string_view>
#include <vector>

#include "anytime/aggregate.hpp"
#include "anytime/chain.hpp"

namespace anytime {

/// Per-step Lyapunov rates: V(f(x, kappa(x))) <= rho V(x) and V(f(x, 0)) <= alpha V(x).
struct LyapunovRates {
    double rho = 0.0;
    double alpha = 0.0;

    /// Throws Error{invalid_rates} unless 0 <= rho < 1 and alpha >= 0.
    static LyapunovRates checked(double rho, double alpha);

    friend bool operator==(const LyapunovRates&, const LyapunovRates&) = default;
};

/// Multiplier (1 + alpha - rho) / (1 - rho) of the per-cycle Lyapunov sum.
[[nodiscard]] double cycle_sum_factor(const LyapunovRates& rates);

struct Certificate {
    double value = 0.0;
    bool stable = false;
    /// cycle_sum_factor / (1 - value); +inf when not stable.
    double bound_coefficient = 0.0;
    /// Certified bound on the numerical error of `value`.
    double truncation_error = 0.0;
};

/// Expected Lyapunov contraction across one buffer-depletion cycle:
/// alpha * sum_j Pr{Delta = j} rho^{j-1}, summed exactly as
/// alpha * (q00 + rho theta^T (I - rho p_bar)^{-1} mu).
[[nodiscard]] Certificate anytime_certificate(const AggregateChain& agg, const LyapunovRates& rates);

/// Same contraction across one zero-availability cycle of the baseline loop.
[[nodiscard]] Certificate baseline_certificate(const ProcessorChain& chain, const LyapunovRates& rates);

/// Worst-case criterion terms, one per processor state s = 2..capacity+1 (index s-2).
/// Throws Error{not_applicable} when alpha * q00 >= 1.
[[nodiscard]] std::vector<double> worst_case_terms(const ProcessorChain& chain, const LyapunovRates& rates);

/// max over worst_case_terms; stable iff that max < 1 (and alpha * q00 < 1).
[[nodiscard]] Certificate worst_case_certificate(const ProcessorChain& chain, const LyapunovRates& rates);

/// The un-condensed matrix expression of a single worst-case term, built from
/// the rank-one matrix whose first row is row 0 of Q. Cross-check for
/// worst_case_terms.
[[nodiscard]] double worst_case_matrix_oracle(const ProcessorChain& chain, const LyapunovRates& rates,
                                              int processor_state);

enum class CertificateModel { anytime, baseline, worst_case };

/// CLI/CSV names: "omega", "theta", "upsilon".
[[nodiscard]] std::string_view to_string(CertificateModel model) noexcept;

struct BoundaryPoint {
    double rho = 0.0;
    double alpha_star = 0.0;
    CertificateModel model = CertificateModel::anytime;
    /// worst_case only: the criterion never binds below alpha = 1/q00.
    bool capped = false;
};

inline constexpr double kBoundaryTolerance = 1e-8;

/// Largest alpha certified stable at each rho. Throws Error{grid_out_of_range}
/// for an empty grid or any rho outside [0, 1).
[[nodiscard]] std::vector<BoundaryPoint> region_boundary(CertificateModel model, const ProcessorChain& chain,
                                                         std::span<const double> rho_grid);

/// (capacity+1) * (q00 + rho theta^T (I - rho p_bar)^{-1} mu) on the uniform
/// chain, so that the anytime certificate equals alpha/(capacity+1) times it.
[[nodiscard]] double uniform_return_factor(int capacity, double rho);

struct ConservatismGap {
    /// lhs < rhs: the depletion-cycle certificate admits a larger alpha than the
    /// worst-case criterion on the uniform chain.
    bool anytime_less_conservative = false;
    double lhs = 0.0;  ///< uniform_return_factor * (L + 1 - L rho)
    double rhs = 0.0;  ///< L + 1
};

[[nodiscard]] ConservatismGap conservatism_gap(int capacity, double rho);

}  // namespace anytime
