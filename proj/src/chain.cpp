#include "anytime/chain.hpp"

#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "anytime/error.hpp"

namespace anytime {
namespace {

std::vector<int> bfs_levels(const Eigen::MatrixXd& q, bool reverse) {
    const auto n = static_cast<int>(q.rows());
    std::vector<int> level(n, -1);
    std::queue<int> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v = 0; v < n; ++v) {
            const double w = reverse ? q(v, u) : q(u, v);
            if (w > 0.0 && level[v] < 0) {
                level[v] = level[u] + 1;
                frontier.push(v);
            }
        }
    }
    return level;
}

}  // namespace

int chain_period(const Eigen::MatrixXd& q) {
    const auto level = bfs_levels(q, false);
    const auto n = static_cast<int>(q.rows());
    int period = 0;
    for (int u = 0; u < n; ++u) {
        if (level[u] < 0) continue;
        for (int v = 0; v < n; ++v) {
            if (q(u, v) > 0.0 && level[v] >= 0) {
                period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
            }
        }
    }
    return period;
}

ProcessorChain ProcessorChain::validate(const Eigen::MatrixXd& q, int capacity) {
    if (capacity < 1) {
        throw Error(Errc::capacity_too_small, "capacity must be >= 1, got " + std::to_string(capacity));
    }
    const Eigen::Index n = capacity + 1;
    if (q.rows() != n || q.cols() != n) {
        throw Error(Errc::dimension_mismatch,
                    "expected " + std::to_string(n) + "x" + std::to_string(n) + " matrix, got " +
                        std::to_string(q.rows()) + "x" + std::to_string(q.cols()));
    }
    Eigen::MatrixXd normalized = q;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!std::isfinite(q(i, j)) || q(i, j) < 0.0) {
                throw Error(Errc::negative_entry, "row " + std::to_string(i) + ", column " +
                                                      std::to_string(j) + " is " + std::to_string(q(i, j)));
            }
        }
        const double sum = q.row(i).sum();
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
            throw Error(Errc::non_stochastic_row,
                        "row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
        normalized.row(i) /= sum;
    }

    const auto forward = bfs_levels(normalized, false);
    const auto backward = bfs_levels(normalized, true);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (forward[i] < 0 || backward[i] < 0) {
            throw Error(Errc::reducible, "state " + std::to_string(i) + " does not communicate with state 0");
        }
    }
    // A self-loop at 0 makes the (irreducible) chain aperiodic.
    if (!(normalized(0, 0) > 0.0)) {
        const int period = chain_period(normalized);
        if (period != 1) {
            throw Error(Errc::periodic, "chain has period " + std::to_string(period));
        }
    }
    return ProcessorChain(std::move(normalized), capacity);
}

ProcessorChain validate_chain(const Eigen::MatrixXd& q, int capacity) {
    return ProcessorChain::validate(q, capacity);
}

int sample_next(const ProcessorChain& chain, int current, double r) {
    const auto& q = chain.matrix();
    double cumulative = 0.0;
    int last_positive = 0;
    for (int j = 0; j < chain.levels(); ++j) {
        const double p = q(current, j);
        if (p <= 0.0) continue;
        last_positive = j;
        cumulative += p;
        if (r < cumulative) return j;
    }
    // r within rounding of 1.
    return last_positive;
}

ProcessorChain uniform_chain(int capacity) {
    if (capacity < 1) throw Error(Errc::capacity_too_small, "capacity must be >= 1");
    const Eigen::Index n = capacity + 1;
    return ProcessorChain::validate(Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n)), capacity);
}

ProcessorChain q_lambda_chain(int capacity) {
    if (capacity < 1) throw Error(Errc::capacity_too_small, "capacity must be >= 1");
    const Eigen::Index n = capacity + 1;
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(n, n, 0.6 / static_cast<double>(capacity));
    q.diagonal().setConstant(0.4);
    return ProcessorChain::validate(q, capacity);
}

ProcessorChain case_study_chain() {
    Eigen::MatrixXd q(6, 6);
    q << 0.2, 0.16, 0.16, 0.16, 0.16, 0.16,
         0.9, 0.05, 0.05, 0.0, 0.0, 0.0,
         0.0, 0.1, 0.225, 0.225, 0.225, 0.225,
         0.0, 0.0, 0.25, 0.25, 0.25, 0.25,
         0.0, 0.0, 0.25, 0.25, 0.25, 0.25,
         0.0, 0.0, 0.25, 0.25, 0.25, 0.25;
    return ProcessorChain::validate(q, 5);
}

}  // namespace anytime
