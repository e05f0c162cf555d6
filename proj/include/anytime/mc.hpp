#pragma once

// Monte Carlo closed-loop simulation under Markov-modulated processor
// availability.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "anytime/aggregate.hpp"
#include "anytime/certify.hpp"
#include "anytime/chain.hpp"
#include "anytime/loop.hpp"

namespace anytime {

enum class ControllerKind { anytime, baseline, ideal };
enum class NoiseKind { none, uniform, gaussian };

[[nodiscard]] std::string_view to_string(ControllerKind kind) noexcept;
[[nodiscard]] std::string_view to_string(NoiseKind kind) noexcept;
[[nodiscard]] std::optional<ControllerKind> parse_controller(std::string_view name) noexcept;
[[nodiscard]] std::optional<NoiseKind> parse_noise(std::string_view name) noexcept;

/// Zero-mean white disturbance. uniform: each component on [-scale, scale];
/// gaussian: standard deviation `scale`.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double scale = 0.0;

    /// E|w| for a scalar disturbance.
    [[nodiscard]] double mean_abs() const noexcept;
    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// J = (1/horizon) * sum_{k < horizon} (state_weight |x(k)|^2 + input_weight |u(k)|^2)
struct CostWeights {
    double state_weight = 0.2;
    double input_weight = 2.0;
    int horizon = 50;

    friend bool operator==(const CostWeights&, const CostWeights&) = default;
};

struct SimConfig {
    int horizon = 50;
    int trajectories = 1000;
    std::uint64_t seed = 1;
    Vector initial_state = Vector::Ones(1);
    int initial_availability = 0;
    NoiseSpec noise;
    ControllerKind controller = ControllerKind::anytime;
    CostWeights cost;
    /// Steps k (0 <= k <= horizon) at which lower_bound(|x(k)|) is averaged.
    std::vector<int> checkpoints;
    int threads = 1;
    /// Number of leading trajectories whose full trace is retained.
    int keep_traces = 0;
};

inline constexpr double kDivergenceThreshold = 1e12;

/// Deterministic per-trajectory random stream. Streams are derived from the
/// root seed, the trajectory index and a stream id by splitmix64 mixing, so
/// trajectory i is reproducible in isolation.
class RandomStream {
public:
    RandomStream(std::uint64_t root_seed, std::uint64_t index, std::uint64_t stream_id);

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double normal();

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

inline constexpr std::uint64_t kAvailabilityStream = 0;
inline constexpr std::uint64_t kNoiseStream = 1;

struct StepRecord {
    int k = 0;
    int availability = 0;
    int effective_length = 0;
    Vector input;
    Vector state;
    double lyapunov = 0.0;
};

struct SimTrace {
    std::uint64_t index = 0;
    std::vector<StepRecord> steps;
    Vector final_state;
    /// Depletion instants (anytime) or zero-availability instants (baseline, ideal).
    std::vector<int> renewal_instants;
    double cost = 0.0;             ///< NaN when the plant is not scalar or the horizon is too short
    double lower_bound_sum = 0.0;  ///< sum_{k < horizon} lower_bound(|x(k)|)
    bool diverged = false;
};

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

/// Mean and standard error (n-1 denominator) over the finite entries, in order.
[[nodiscard]] MeanEstimate estimate_mean(std::span<const double> values);

struct EnsembleSummary {
    ControllerKind controller = ControllerKind::anytime;
    std::size_t trajectories = 0;
    std::size_t diverged = 0;
    MeanEstimate cost;
    MeanEstimate lower_bound_sum;
    std::vector<int> checkpoint_steps;
    std::vector<MeanEstimate> checkpoints;
    /// Per-trajectory values in index order; NaN for diverged trajectories.
    std::vector<double> costs;
    std::vector<double> lower_bound_sums;
    std::vector<SimTrace> traces;
};

[[nodiscard]] SimTrace simulate_trajectory(const PlantModel& plant, const ProcessorChain& chain,
                                           const SimConfig& config, std::uint64_t index);

/// Independent trajectories 0..trajectories-1 spread over config.threads
/// workers. Reduction runs in index order, so summaries are bit-identical for
/// any worker count. Diverged trajectories are counted and excluded from means.
[[nodiscard]] EnsembleSummary run_ensemble(const PlantModel& plant, const ProcessorChain& chain,
                                           const SimConfig& config);

/// Mean per-trajectory cost. Throws Error{horizon_too_short} if any trace has
/// fewer than weights.horizon steps, Error{non_scalar_plant} for vector states or inputs.
[[nodiscard]] MeanEstimate empirical_cost(std::span<const SimTrace> traces, const CostWeights& weights = {});

/// Empirical distribution of gaps between successive renewal instants,
/// simulating the availability chain from N(0) = 0 until `cycles` gaps are
/// observed. Gaps longer than j_max are pooled into `tail`.
[[nodiscard]] ReturnPmf empirical_return_pmf(const ProcessorChain& chain, ReturnKind kind, std::int64_t cycles,
                                             std::uint64_t seed, int j_max = 50);

struct RobustnessReport {
    Certificate certificate;
    std::vector<int> steps;
    std::vector<MeanEstimate> means;  ///< E{lower_bound(|x(k)|)} at each step
    std::size_t diverged = 0;
};

/// Anytime loop with process noise. Requires the depletion-cycle certificate
/// to hold (Error{certificate_not_satisfied} otherwise) and a plant with known
/// rates (Error{invalid_argument} otherwise).
[[nodiscard]] RobustnessReport robustness_experiment(const PlantModel& plant, const ProcessorChain& chain,
                                                     const SimConfig& config, std::span<const int> checkpoints);

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

/// Pearson goodness-of-fit of counts against probabilities (both including
/// any tail bin). Bins with expected count below 5 are pooled.
[[nodiscard]] ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> probabilities);

}  // namespace anytime
