#include "anytime/loop.hpp"

#include <cmath>
#include <string>

#include "anytime/error.hpp"

namespace anytime {

std::optional<LyapunovRates> PlantModel::rates() const {
    if (!alpha) return std::nullopt;
    return LyapunovRates{rho, *alpha};
}

AnytimeState::AnytimeState(int capacity, int input_dim)
    : capacity_(capacity), input_dim_(input_dim), buffer_(Vector::Zero(capacity * input_dim)) {
    if (capacity < 1) throw Error(Errc::capacity_too_small, "capacity must be >= 1");
    if (input_dim < 1) throw Error(Errc::invalid_argument, "input dimension must be >= 1");
}

Vector AnytimeState::block(int j) const {
    if (j < 1 || j > capacity_) throw Error(Errc::invalid_argument, "block index " + std::to_string(j));
    return buffer_.segment((j - 1) * input_dim_, input_dim_);
}

AnytimeStepResult anytime_step(const PlantModel& plant, const AnytimeState& state, const Vector& x, int n_avail,
                               const Vector& w) {
    const int cap = state.capacity_;
    const int p = state.input_dim_;
    if (n_avail < 0 || n_avail > cap) {
        throw Error(Errc::invalid_argument, "availability " + std::to_string(n_avail) + " outside 0.." +
                                                std::to_string(cap));
    }
    AnytimeState next = state;
    next.effective_length_ = next_effective_length(state.effective_length_, n_avail);

    Vector input;
    if (n_avail == 0) {
        // b <- S b
        const Eigen::Index keep = static_cast<Eigen::Index>(cap - 1) * p;
        if (keep > 0) next.buffer_.head(keep) = state.buffer_.tail(keep);
        next.buffer_.tail(p).setZero();
        input = next.buffer_.head(p);
    } else {
        next.buffer_.setZero();
        Vector chi = x;
        for (int j = 1; j <= n_avail; ++j) {
            const Vector u = plant.feedback(chi);
            next.buffer_.segment(static_cast<Eigen::Index>(j - 1) * p, p) = u;
            if (j < n_avail) chi = plant.nominal(chi, u);
        }
        input = next.buffer_.head(p);
    }
    Vector next_state = plant.dynamics(x, input, w);
    return {std::move(input), std::move(next_state), std::move(next)};
}

StepResult baseline_step(const PlantModel& plant, const Vector& x, int n_avail, const Vector& w) {
    Vector input = n_avail >= 1 ? plant.feedback(x) : plant.zero_input();
    Vector next = plant.dynamics(x, input, w);
    return {std::move(input), std::move(next)};
}

StepResult ideal_step(const PlantModel& plant, const Vector& x, const Vector& w) {
    Vector input = plant.feedback(x);
    Vector next = plant.dynamics(x, input, w);
    return {std::move(input), std::move(next)};
}

namespace {

double identity(double s) { return s; }

double abs_norm(const Vector& x) { return x.norm(); }

}  // namespace

PlantModel cubic_plant() {
    PlantModel plant;
    plant.name = "cubic";
    plant.dynamics = [](const Vector& x, const Vector& u, const Vector& w) -> Vector {
        return x.array() + 0.01 * (x.array().cube() + u.array()) + w.array();
    };
    plant.feedback = [](const Vector& x) -> Vector { return -x.array().cube() - x.array(); };
    plant.lyapunov = abs_norm;
    plant.lower_bound = identity;
    plant.upper_bound = identity;
    plant.rho = 0.99;
    return plant;
}

PlantModel linear_plant(double a, double b, double rho_target) {
    if (b == 0.0) throw Error(Errc::zero_input_gain, "input gain b must be nonzero");
    (void)LyapunovRates::checked(rho_target, std::abs(a));
    const double closed_loop = (a < 0.0 ? -rho_target : rho_target);
    const double gain = (closed_loop - a) / b;

    PlantModel plant;
    plant.name = "linear";
    plant.dynamics = [a, b](const Vector& x, const Vector& u, const Vector& w) -> Vector {
        return a * x + b * u + w;
    };
    plant.feedback = [gain](const Vector& x) -> Vector { return gain * x; };
    plant.lyapunov = abs_norm;
    plant.lower_bound = identity;
    plant.upper_bound = identity;
    plant.rho = rho_target;
    plant.alpha = std::abs(a);
    return plant;
}

RobustnessParams linear_plant_robustness(double a, double b, double rho_target, double w_mean) {
    if (b == 0.0) throw Error(Errc::zero_input_gain, "input gain b must be nonzero");
    const double closed_loop = (a < 0.0 ? -rho_target : rho_target);
    RobustnessParams r;
    r.lambda_x = std::abs(a);
    r.lambda_u = std::abs(b);
    r.lambda_w = 1.0;
    r.lambda_v = 1.0;
    r.lambda_kappa = std::abs((closed_loop - a) / b);
    r.beta_noise = 1.0;
    r.eta_noise = 1.0;
    r.w_mean = w_mean;
    return r;
}

ContractReport check_plant_contract(const PlantModel& plant, std::span<const Vector> samples) {
    constexpr double slack = 1e-9;
    ContractReport report;
    const Vector origin = plant.dynamics(plant.zero_state(), plant.zero_input(), plant.zero_state());
    report.equilibrium_ok = origin.norm() == 0.0 && plant.feedback(plant.zero_state()).norm() == 0.0;
    for (const Vector& x : samples) {
        ++report.samples;
        const double v = plant.lyapunov(x);
        const double r = x.norm();
        if (plant.lower_bound(r) > v * (1.0 + slack) || v > plant.upper_bound(r) * (1.0 + slack)) {
            ++report.sandwich_violations;
        }
        if (v <= 0.0) continue;
        const double closed = plant.lyapunov(plant.nominal(x, plant.feedback(x))) / v;
        report.worst_contraction_ratio = std::max(report.worst_contraction_ratio, closed);
        if (closed > plant.rho * (1.0 + slack)) ++report.contraction_violations;
        if (plant.alpha) {
            const double open = plant.lyapunov(plant.nominal(x, plant.zero_input())) / v;
            report.worst_growth_ratio = std::max(report.worst_growth_ratio, open);
            if (open > *plant.alpha * (1.0 + slack)) ++report.growth_violations;
        }
    }
    return report;
}

}  // namespace anytime
