#pragma once

// Aggregated chain Z = (N, lambda) over availability and effective buffer
// length, and the first-return-time distributions of its renewal states.

#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "anytime/chain.hpp"

namespace anytime {

struct AggregateState {
    int availability;   ///< N
    int buffer_length;  ///< lambda

    friend bool operator==(const AggregateState&, const AggregateState&) = default;
};

/// Transition structure of Z, partitioned around the depletion state s0 = (0,0):
///
///     p = [ q00    theta^T ]
///         [ mu     p_bar   ]
struct AggregateChain {
    int capacity = 0;
    std::vector<AggregateState> states;
    Eigen::MatrixXd p;
    double q00 = 0.0;
    Eigen::RowVectorXd theta;
    Eigen::VectorXd mu;
    Eigen::MatrixXd p_bar;
};

/// Ordered state list s0..s_{2L-1}: (i,i) for i in 0..L, then (0,j) for j in 1..L-1.
/// For capacity 1 this degenerates to {(0,0), (1,1)}.
[[nodiscard]] std::vector<AggregateState> aggregate_states(int capacity);

[[nodiscard]] AggregateChain build_aggregate(const ProcessorChain& chain);

enum class ReturnKind {
    depletion,          ///< returns of Z to (0,0): gaps between buffer-depletion instants
    zero_availability,  ///< returns of N to 0: gaps between zero-availability instants
};

[[nodiscard]] std::string_view to_string(ReturnKind kind) noexcept;

/// Truncated pmf of a first-return time. mass[j-1] = Pr{gap = j}, j = 1..j_max.
struct ReturnPmf {
    ReturnKind kind = ReturnKind::depletion;
    std::vector<double> mass;
    double tail = 0.0;  ///< 1 - sum(mass), the probability of gaps longer than j_max

    [[nodiscard]] int j_max() const noexcept { return static_cast<int>(mass.size()); }
    [[nodiscard]] double at(int j) const { return mass.at(static_cast<std::size_t>(j - 1)); }
};

/// Pr{Delta = j}: q00 for j = 1, theta^T p_bar^{j-2} mu for j >= 2.
[[nodiscard]] ReturnPmf delta_pmf(const AggregateChain& agg, int j_max);

/// Pr{tau = j}: q00 for j = 1, [q01..q0L] Qbar^{j-2} [q10..qL0]^T for j >= 2.
[[nodiscard]] ReturnPmf tau_pmf(const ProcessorChain& chain, int j_max);

inline constexpr int kBruteforceLimit = 12;

/// Path enumeration: sums the probability of every path that leaves state 0
/// and first re-enters it after exactly j steps. Exponential; both the state
/// count and j_max must be <= 12 (Error{oracle_too_large} otherwise).
[[nodiscard]] ReturnPmf return_pmf_bruteforce(const Eigen::MatrixXd& transition, ReturnKind kind, int j_max);
[[nodiscard]] ReturnPmf return_pmf_bruteforce(const AggregateChain& agg, int j_max);
[[nodiscard]] ReturnPmf return_pmf_bruteforce(const ProcessorChain& chain, int j_max);

/// Two-column CSV "j,probability" followed by a "# tail,<bound>" comment line.
void write_pmf_csv(std::ostream& out, const ReturnPmf& pmf);

}  // namespace anytime
