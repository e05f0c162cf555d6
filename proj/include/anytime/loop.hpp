#pragma once

// Plant models, the buffered anytime controller, and the baseline controller.

#include <functional>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Core>

#include "anytime/certify.hpp"

namespace anytime {

using Vector = Eigen::VectorXd;

/// Discrete-time plant x+ = f(x, u, w) with its stabilizing feedback and a
/// Lyapunov function V satisfying lower(|x|) <= V(x) <= upper(|x|).
struct PlantModel {
    std::string name;
    int state_dim = 1;
    int input_dim = 1;
    std::function<Vector(const Vector& x, const Vector& u, const Vector& w)> dynamics;
    std::function<Vector(const Vector& x)> feedback;
    std::function<double(const Vector& x)> lyapunov;
    std::function<double(double)> lower_bound;
    std::function<double(double)> upper_bound;
    /// Contraction of V under the feedback.
    double rho = 0.0;
    /// Open-loop growth of V under zero input; empty when no global bound exists.
    std::optional<double> alpha;

    /// Rates usable for certificates; empty when alpha is unknown.
    [[nodiscard]] std::optional<LyapunovRates> rates() const;
    [[nodiscard]] Vector zero_state() const { return Vector::Zero(state_dim); }
    [[nodiscard]] Vector zero_input() const { return Vector::Zero(input_dim); }
    /// Nominal (noise-free) step.
    [[nodiscard]] Vector nominal(const Vector& x, const Vector& u) const { return dynamics(x, u, zero_state()); }
};

/// Lipschitz and noise-gain constants of the noise-perturbed plant.
struct RobustnessParams {
    double lambda_x = 0.0;
    double lambda_u = 0.0;
    double lambda_w = 0.0;
    double lambda_v = 0.0;
    double lambda_kappa = 0.0;
    double beta_noise = 0.0;
    double eta_noise = 0.0;
    double w_mean = 0.0;  ///< E|w(k)|
};

struct AnytimeStepResult;
class AnytimeState;

AnytimeStepResult anytime_step(const PlantModel& plant, const AnytimeState& state, const Vector& x,
                               int n_avail, const Vector& w);

/// Buffer of tentative future inputs b = [b_1; ...; b_L], each block of
/// length input_dim, plus the effective buffer length lambda.
/// Blocks beyond effective_length() are zero.
class AnytimeState {
public:
    AnytimeState(int capacity, int input_dim);

    [[nodiscard]] int capacity() const noexcept { return capacity_; }
    [[nodiscard]] int input_dim() const noexcept { return input_dim_; }
    [[nodiscard]] int effective_length() const noexcept { return effective_length_; }
    [[nodiscard]] const Vector& buffer() const noexcept { return buffer_; }
    /// Block j, 1-based.
    [[nodiscard]] Vector block(int j) const;

private:
    friend AnytimeStepResult anytime_step(const PlantModel&, const AnytimeState&, const Vector&, int,
                                          const Vector&);

    int capacity_;
    int input_dim_;
    int effective_length_ = 0;
    Vector buffer_;
};

struct AnytimeStepResult {
    Vector input;
    Vector next_state;
    AnytimeState buffer;
};

struct StepResult {
    Vector input;
    Vector next_state;
};

/// One sampling period of the buffered controller with `n_avail` completed
/// iterations. The buffer is shifted first; with n_avail = 0 the (shifted)
/// first block is applied. Otherwise kappa(x) is applied and blocks
/// 1..n_avail are refilled by rolling the nominal model forward.
[[nodiscard]] AnytimeStepResult anytime_step(const PlantModel& plant, const AnytimeState& state, const Vector& x,
                                             int n_avail, const Vector& w);

/// kappa(x) when n_avail >= 1, zero input otherwise.
[[nodiscard]] StepResult baseline_step(const PlantModel& plant, const Vector& x, int n_avail, const Vector& w);

/// Unlimited processing: always kappa(x).
[[nodiscard]] StepResult ideal_step(const PlantModel& plant, const Vector& x, const Vector& w);

/// Effective buffer length after a step: n_avail if n_avail >= 1, else max(previous - 1, 0).
[[nodiscard]] constexpr int next_effective_length(int previous, int n_avail) noexcept {
    return n_avail >= 1 ? n_avail : (previous > 0 ? previous - 1 : 0);
}

/// x+ = x + 0.01 (x^3 + u) + w with kappa(x) = -x^3 - x and V = |x|.
/// rho = 0.99; no global open-loop growth bound exists, so alpha is empty.
[[nodiscard]] PlantModel cubic_plant();

/// x+ = a x + b u + w with V = |x| and kappa(x) = (sign(a) rho_target - a) x / b,
/// giving rho = rho_target and alpha = |a| globally.
/// Throws Error{zero_input_gain} when b == 0, Error{invalid_rates} when rho_target is outside [0,1).
[[nodiscard]] PlantModel linear_plant(double a, double b, double rho_target);

[[nodiscard]] RobustnessParams linear_plant_robustness(double a, double b, double rho_target, double w_mean);

struct ContractReport {
    bool equilibrium_ok = false;
    int samples = 0;
    int sandwich_violations = 0;
    int contraction_violations = 0;
    int growth_violations = 0;
    double worst_contraction_ratio = 0.0;  ///< max V(f(x,kappa(x)))/V(x)
    double worst_growth_ratio = 0.0;       ///< max V(f(x,0))/V(x)

    [[nodiscard]] bool ok() const noexcept {
        return equilibrium_ok && sandwich_violations == 0 && contraction_violations == 0 && growth_violations == 0;
    }
};

/// Spot-checks the equilibrium, the sandwich bounds and both rate bounds on
/// the given states (relative slack 1e-9). Growth is skipped when alpha is empty.
[[nodiscard]] ContractReport check_plant_contract(const PlantModel& plant, std::span<const Vector> samples);

}  // namespace anytime
