#pragma once

// Processor-availability Markov chain: N(k) in {0..capacity} is the number of
// tentative control inputs the processor completes during step k.

#include <Eigen/Core>

namespace anytime {

/// Validated, immutable row-stochastic transition matrix over availability
/// levels 0..capacity. Irreducible and aperiodic by construction.
class ProcessorChain {
public:
    /// Validates `q` and renormalizes each row to sum to exactly 1.
    /// Throws Error{dimension_mismatch | capacity_too_small | negative_entry |
    /// non_stochastic_row | reducible | periodic}.
    static ProcessorChain validate(const Eigen::MatrixXd& q, int capacity);

    [[nodiscard]] int capacity() const noexcept { return capacity_; }
    [[nodiscard]] int levels() const noexcept { return capacity_ + 1; }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return q_; }
    [[nodiscard]] double operator()(int from, int to) const { return q_(from, to); }

    friend bool operator==(const ProcessorChain& a, const ProcessorChain& b) {
        return a.capacity_ == b.capacity_ && a.q_ == b.q_;
    }

private:
    ProcessorChain(Eigen::MatrixXd q, int capacity) : q_(std::move(q)), capacity_(capacity) {}

    Eigen::MatrixXd q_;
    int capacity_;
};

inline constexpr double kRowSumTolerance = 1e-9;

ProcessorChain validate_chain(const Eigen::MatrixXd& q, int capacity);

/// Inverse-CDF draw of the next availability level from row `current`,
/// given a uniform variate r in [0,1).
[[nodiscard]] int sample_next(const ProcessorChain& chain, int current, double r);

/// All transitions equally likely, 1/(capacity+1).
[[nodiscard]] ProcessorChain uniform_chain(int capacity);

/// Diagonal 0.4, off-diagonal 0.6/capacity.
[[nodiscard]] ProcessorChain q_lambda_chain(int capacity);

/// The capacity-5 case-study chain.
[[nodiscard]] ProcessorChain case_study_chain();

/// Period of the chain restricted to the communicating class of state 0,
/// computed from BFS levels on the graph of strictly positive entries.
[[nodiscard]] int chain_period(const Eigen::MatrixXd& q);

}  // namespace anytime
