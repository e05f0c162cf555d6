#include "anytime/aggregate.hpp"

#include <algorithm>
#include <functional>
#include <ostream>
#include <string>

#include "anytime/error.hpp"
#include "format.hpp"

namespace anytime {
namespace {

// Renewal state 0 with self-loop `stay`, exits `out`, the chain restricted to
// the other states `avoid`, and re-entries `in`.
ReturnPmf first_return_pmf(ReturnKind kind, double stay, const Eigen::RowVectorXd& out,
                           const Eigen::MatrixXd& avoid, const Eigen::VectorXd& in, int j_max) {
    if (j_max < 2) throw Error(Errc::invalid_argument, "j_max must be >= 2, got " + std::to_string(j_max));
    ReturnPmf pmf;
    pmf.kind = kind;
    pmf.mass.reserve(static_cast<std::size_t>(j_max));
    pmf.mass.push_back(stay);
    Eigen::RowVectorXd v = out;
    for (int j = 2; j <= j_max; ++j) {
        pmf.mass.push_back(std::clamp(v.dot(in), 0.0, 1.0));
        v = v * avoid;
    }
    double total = 0.0;
    for (double m : pmf.mass) total += m;
    pmf.tail = std::max(0.0, 1.0 - total);
    return pmf;
}

}  // namespace

std::string_view to_string(ReturnKind kind) noexcept {
    return kind == ReturnKind::depletion ? "delta" : "tau";
}

std::vector<AggregateState> aggregate_states(int capacity) {
    if (capacity < 1) throw Error(Errc::capacity_too_small, "capacity must be >= 1");
    std::vector<AggregateState> states;
    for (int i = 0; i <= capacity; ++i) states.push_back({i, i});
    for (int j = 1; j <= capacity - 1; ++j) states.push_back({0, j});
    return states;
}

AggregateChain build_aggregate(const ProcessorChain& chain) {
    const int cap = chain.capacity();
    const auto& q = chain.matrix();
    AggregateChain agg;
    agg.capacity = cap;
    agg.states = aggregate_states(cap);
    const auto n = static_cast<Eigen::Index>(agg.states.size());

    if (cap == 1) {
        agg.p = q;
    } else {
        agg.p = Eigen::MatrixXd::Zero(n, n);
        agg.p(0, 0) = q(0, 0);
        agg.p(1, 0) = q(1, 0);
        agg.p(cap + 1, 0) = q(0, 0);
        for (int i = 0; i <= cap; ++i) {
            for (int j = 1; j <= cap; ++j) agg.p(i, j) = q(i, j);
        }
        for (int j = 1; j <= cap - 1; ++j) agg.p(j + 1, cap + j) = q(j + 1, 0);
        for (int m = 2; m <= cap - 1; ++m) agg.p(cap + m, cap + m - 1) = q(0, 0);
        for (int k = 1; k <= cap - 1; ++k) {
            for (int l = 1; l <= cap; ++l) agg.p(cap + k, l) = q(0, l);
        }
    }

    agg.q00 = agg.p(0, 0);
    agg.theta = agg.p.block(0, 1, 1, n - 1);
    agg.mu = agg.p.block(1, 0, n - 1, 1);
    agg.p_bar = agg.p.block(1, 1, n - 1, n - 1);
    return agg;
}

ReturnPmf delta_pmf(const AggregateChain& agg, int j_max) {
    return first_return_pmf(ReturnKind::depletion, agg.q00, agg.theta, agg.p_bar, agg.mu, j_max);
}

ReturnPmf tau_pmf(const ProcessorChain& chain, int j_max) {
    const auto& q = chain.matrix();
    const int cap = chain.capacity();
    return first_return_pmf(ReturnKind::zero_availability, q(0, 0), q.block(0, 1, 1, cap),
                            q.block(1, 1, cap, cap), q.block(1, 0, cap, 1), j_max);
}

ReturnPmf return_pmf_bruteforce(const Eigen::MatrixXd& transition, ReturnKind kind, int j_max) {
    const auto n = static_cast<int>(transition.rows());
    if (n > kBruteforceLimit || j_max > kBruteforceLimit) {
        throw Error(Errc::oracle_too_large, std::to_string(n) + " states, j_max " + std::to_string(j_max));
    }
    if (j_max < 1) throw Error(Errc::invalid_argument, "j_max must be >= 1");

    ReturnPmf pmf;
    pmf.kind = kind;
    pmf.mass.assign(static_cast<std::size_t>(j_max), 0.0);
    pmf.mass[0] = transition(0, 0);

    // Depth-first over paths s0 -> s_a -> ... avoiding s0; closing the path at
    // depth d contributes to Pr{return = d}.
    std::function<void(int, int, double)> extend = [&](int state, int steps, double prob) {
        const double close = prob * transition(state, 0);
        if (close > 0.0) pmf.mass[static_cast<std::size_t>(steps)] += close;
        if (steps + 1 >= j_max) return;
        for (int next = 1; next < n; ++next) {
            const double w = transition(state, next);
            if (w > 0.0) extend(next, steps + 1, prob * w);
        }
    };
    for (int first = 1; first < n; ++first) {
        const double w = transition(0, first);
        if (w > 0.0 && j_max >= 2) extend(first, 1, w);
    }

    double total = 0.0;
    for (double m : pmf.mass) total += m;
    pmf.tail = std::max(0.0, 1.0 - total);
    return pmf;
}

ReturnPmf return_pmf_bruteforce(const AggregateChain& agg, int j_max) {
    return return_pmf_bruteforce(agg.p, ReturnKind::depletion, j_max);
}

ReturnPmf return_pmf_bruteforce(const ProcessorChain& chain, int j_max) {
    return return_pmf_bruteforce(chain.matrix(), ReturnKind::zero_availability, j_max);
}

void write_pmf_csv(std::ostream& out, const ReturnPmf& pmf) {
    out << "j,probability\n";
    for (int j = 1; j <= pmf.j_max(); ++j) out << j << ',' << format_number(pmf.at(j)) << '\n';
    out << "# tail," << format_number(pmf.tail) << '\n';
}

}  // namespace anytime
