#include "anytime/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

#include "anytime/error.hpp"

namespace anytime {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxResidual = 1e-8;

struct Solved {
    Eigen::VectorXd y;
    double residual;  // inf-norm of b - A y
};

// LU solve with one step of iterative refinement.
Solved solve_refined(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd y = lu.solve(b);
    Eigen::VectorXd r = b - a * y;
    y += lu.solve(r);
    r = b - a * y;
    const double residual = r.size() > 0 ? r.lpNorm<Eigen::Infinity>() : 0.0;
    if (!y.allFinite() || !(residual <= kMaxResidual)) {
        throw Error(Errc::solver_failure, "residual " + std::to_string(residual));
    }
    return {std::move(y), residual};
}

Certificate make_certificate(double value, double error, const LyapunovRates& rates) {
    Certificate c;
    c.value = value;
    c.stable = value < 1.0;
    c.bound_coefficient = c.stable ? cycle_sum_factor(rates) / (1.0 - value) : kInf;
    c.truncation_error = error;
    return c;
}

// alpha * (stay + rho * out (I - rho avoid)^{-1} in), i.e. the generating
// function of the first-return pmf evaluated at rho, times alpha/rho.
Certificate renewal_certificate(double stay, const Eigen::RowVectorXd& out, const Eigen::MatrixXd& avoid,
                                const Eigen::VectorXd& in, const LyapunovRates& rates) {
    const auto m = avoid.rows();
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m) - rates.rho * avoid;
    const Solved s = solve_refined(a, in);
    const double factor = stay + rates.rho * out.dot(s.y);
    // ||(I - rho avoid)^{-1}||_inf <= 1/(1 - rho) because avoid is substochastic.
    const double error = rates.alpha * rates.rho * out.lpNorm<1>() * s.residual / (1.0 - rates.rho);
    return make_certificate(rates.alpha * factor, error, rates);
}

double anytime_factor(const AggregateChain& agg, double rho) {
    return anytime_certificate(agg, LyapunovRates{rho, 1.0}).value;
}

double baseline_factor(const ProcessorChain& chain, double rho) {
    return baseline_certificate(chain, LyapunovRates{rho, 1.0}).value;
}

}  // namespace

LyapunovRates LyapunovRates::checked(double rho, double alpha) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw Error(Errc::invalid_rates, "rho must lie in [0, 1), got " + std::to_string(rho));
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error(Errc::invalid_rates, "alpha must be finite and >= 0, got " + std::to_string(alpha));
    }
    return {rho, alpha};
}

double cycle_sum_factor(const LyapunovRates& rates) {
    return (1.0 + rates.alpha - rates.rho) / (1.0 - rates.rho);
}

Certificate anytime_certificate(const AggregateChain& agg, const LyapunovRates& rates) {
    return renewal_certificate(agg.q00, agg.theta, agg.p_bar, agg.mu, rates);
}

Certificate baseline_certificate(const ProcessorChain& chain, const LyapunovRates& rates) {
    const auto& q = chain.matrix();
    const int cap = chain.capacity();
    return renewal_certificate(q(0, 0), q.block(0, 1, 1, cap), q.block(1, 1, cap, cap), q.block(1, 0, cap, 1),
                               rates);
}

std::vector<double> worst_case_terms(const ProcessorChain& chain, const LyapunovRates& rates) {
    const double q00 = chain(0, 0);
    const double rho = rates.rho;
    const double alpha = rates.alpha;
    if (!(alpha * q00 < 1.0)) {
        throw Error(Errc::not_applicable, "alpha * q00 = " + std::to_string(alpha * q00) + " >= 1");
    }
    std::vector<double> terms;
    for (int s = 2; s <= chain.capacity() + 1; ++s) {
        const double back = chain(s - 1, 0);
        const double open_loop = (alpha - rho) / (1.0 - q00 * alpha) * std::pow(q00, s - 2) * std::pow(rho, s - 1);
        terms.push_back(back * (1.0 - q00) / (1.0 - q00 * rho) * (open_loop + rho * rho) + rho * (1.0 - back));
    }
    return terms;
}

Certificate worst_case_certificate(const ProcessorChain& chain, const LyapunovRates& rates) {
    const auto terms = worst_case_terms(chain, rates);
    const double value = *std::max_element(terms.begin(), terms.end());
    return make_certificate(value, 0.0, rates);
}

double worst_case_matrix_oracle(const ProcessorChain& chain, const LyapunovRates& rates, int processor_state) {
    const int cap = chain.capacity();
    if (processor_state < 2 || processor_state > cap + 1) {
        throw Error(Errc::invalid_argument, "processor state must lie in 2.." + std::to_string(cap + 1));
    }
    const auto& q = chain.matrix();
    const double q00 = q(0, 0);
    if (!(rates.alpha * q00 < 1.0) || !(rates.rho * q00 < 1.0)) {
        throw Error(Errc::not_applicable, "alpha * q00 or rho * q00 >= 1");
    }
    const Eigen::Index n = cap + 1;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd rank_one = Eigen::MatrixXd::Zero(n, n);
    rank_one.row(0) = q.row(0);
    const Eigen::RowVectorXd from = q.row(processor_state - 1);
    Eigen::VectorXd ones_but_first = Eigen::VectorXd::Ones(n);
    ones_but_first(0) = 0.0;

    // sum_l p_{l|s} (rho R)^l with p_{l|s} = 1 iff s = l + 1.
    Eigen::MatrixXd selected = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd power = eye;
    for (int l = 1; l <= cap; ++l) {
        power = power * (rates.rho * rank_one);
        if (processor_state == l + 1) selected += power;
    }
    const Eigen::MatrixXd inner =
        rates.rho * eye + (rates.alpha - rates.rho) * (eye - rates.alpha * rank_one).lu().solve(selected);
    const Eigen::VectorXd tail = (eye - rates.rho * rank_one).lu().solve(inner * ones_but_first);
    return from.dot(tail);
}

std::string_view to_string(CertificateModel model) noexcept {
    switch (model) {
        case CertificateModel::anytime: return "omega";
        case CertificateModel::baseline: return "theta";
        case CertificateModel::worst_case: return "upsilon";
    }
    return "unknown";
}

std::vector<BoundaryPoint> region_boundary(CertificateModel model, const ProcessorChain& chain,
                                           std::span<const double> rho_grid) {
    if (rho_grid.empty()) throw Error(Errc::grid_out_of_range, "empty rho grid");
    for (double rho : rho_grid) {
        if (!(rho >= 0.0 && rho < 1.0)) {
            throw Error(Errc::grid_out_of_range, "rho " + std::to_string(rho) + " outside [0, 1)");
        }
    }

    const AggregateChain agg = build_aggregate(chain);
    const double q00 = chain(0, 0);
    std::vector<BoundaryPoint> out;
    out.reserve(rho_grid.size());
    for (double rho : rho_grid) {
        BoundaryPoint pt{rho, 0.0, model, false};
        if (model == CertificateModel::worst_case) {
            const auto binds = [&](double alpha) {
                const auto terms = worst_case_terms(chain, LyapunovRates{rho, alpha});
                return *std::max_element(terms.begin(), terms.end()) >= 1.0;
            };
            double lo = 1e-9;
            double hi = q00 > 0.0 ? 1.0 / q00 - 1e-9 : 1.0;
            if (q00 <= 0.0) {
                // Every term grows without bound in alpha when q00 = 0.
                while (!binds(hi)) hi *= 2.0;
            }
            if (!binds(hi)) {
                pt.alpha_star = 1.0 / q00;
                pt.capped = true;
            } else {
                while (hi - lo >= kBoundaryTolerance) {
                    const double mid = 0.5 * (lo + hi);
                    (binds(mid) ? hi : lo) = mid;
                }
                pt.alpha_star = lo;
            }
        } else {
            const double g = model == CertificateModel::anytime ? anytime_factor(agg, rho) : baseline_factor(chain, rho);
            pt.alpha_star = g > 0.0 ? 1.0 / g : kInf;
        }
        out.push_back(pt);
    }
    return out;
}

double uniform_return_factor(int capacity, double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw Error(Errc::invalid_rates, "rho must lie in [0, 1)");
    const AggregateChain agg = build_aggregate(uniform_chain(capacity));
    return static_cast<double>(capacity + 1) * anytime_factor(agg, rho);
}

ConservatismGap conservatism_gap(int capacity, double rho) {
    const double cap = capacity;
    ConservatismGap gap;
    gap.lhs = uniform_return_factor(capacity, rho) * (cap + 1.0 - cap * rho);
    gap.rhs = cap + 1.0;
    gap.anytime_less_conservative = gap.lhs < gap.rhs;
    return gap;
}

}  // namespace anytime
