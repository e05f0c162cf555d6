#include "anytime/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>

#include "anytime/error.hpp"

namespace anytime {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Vector draw_noise(const NoiseSpec& noise, int dim, RandomStream& rng) {
    Vector w = Vector::Zero(dim);
    switch (noise.kind) {
        case NoiseKind::none: break;
        case NoiseKind::uniform:
            for (int i = 0; i < dim; ++i) w(i) = noise.scale * (2.0 * rng.uniform() - 1.0);
            break;
        case NoiseKind::gaussian:
            for (int i = 0; i < dim; ++i) w(i) = noise.scale * rng.normal();
            break;
    }
    return w;
}

double stage_cost(const Vector& x, const Vector& u, const CostWeights& w) {
    return w.state_weight * x.squaredNorm() + w.input_weight * u.squaredNorm();
}

void check_config(const PlantModel& plant, const ProcessorChain& chain, const SimConfig& config) {
    if (config.horizon < 1) throw Error(Errc::invalid_argument, "horizon must be >= 1");
    if (config.trajectories < 1) throw Error(Errc::invalid_argument, "trajectories must be >= 1");
    if (!(config.noise.scale >= 0.0)) throw Error(Errc::invalid_argument, "noise scale must be >= 0");
    if (config.initial_availability < 0 || config.initial_availability > chain.capacity()) {
        throw Error(Errc::invalid_argument, "initial availability outside 0.." + std::to_string(chain.capacity()));
    }
    if (config.initial_state.size() != plant.state_dim) {
        throw Error(Errc::dimension_mismatch, "initial state has dimension " +
                                                  std::to_string(config.initial_state.size()) + ", plant expects " +
                                                  std::to_string(plant.state_dim));
    }
    for (int k : config.checkpoints) {
        if (k < 0 || k > config.horizon) {
            throw Error(Errc::invalid_argument, "checkpoint " + std::to_string(k) + " outside 0..horizon");
        }
    }
}

struct Outcome {
    double cost = kNaN;
    double lower_bound_sum = 0.0;
    std::vector<double> checkpoint_values;
    bool diverged = false;
};

Outcome run_trajectory(const PlantModel& plant, const ProcessorChain& chain, const SimConfig& config,
                       std::uint64_t index, SimTrace* trace) {
    RandomStream availability_rng(config.seed, index, kAvailabilityStream);
    RandomStream noise_rng(config.seed, index, kNoiseStream);

    const bool scalar = plant.state_dim == 1 && plant.input_dim == 1;
    const bool costed = scalar && config.horizon >= config.cost.horizon;
    const int cap = chain.capacity();

    Outcome out;
    out.checkpoint_values.assign(config.checkpoints.size(), kNaN);
    const auto record_checkpoints = [&](int k, const Vector& x) {
        for (std::size_t c = 0; c < config.checkpoints.size(); ++c) {
            if (config.checkpoints[c] == k) out.checkpoint_values[c] = plant.lower_bound(x.norm());
        }
    };

    AnytimeState buffer(cap, plant.input_dim);
    int effective = 0;
    int n = config.initial_availability;
    Vector x = config.initial_state;
    double cost_sum = 0.0;

    if (trace) {
        trace->index = index;
        trace->steps.reserve(static_cast<std::size_t>(config.horizon));
    }

    for (int k = 0; k < config.horizon; ++k) {
        effective = next_effective_length(effective, n);
        record_checkpoints(k, x);
        const Vector w = draw_noise(config.noise, plant.state_dim, noise_rng);

        Vector u;
        Vector next;
        switch (config.controller) {
            case ControllerKind::anytime: {
                auto r = anytime_step(plant, buffer, x, n, w);
                u = std::move(r.input);
                next = std::move(r.next_state);
                buffer = std::move(r.buffer);
                break;
            }
            case ControllerKind::baseline: {
                auto r = baseline_step(plant, x, n, w);
                u = std::move(r.input);
                next = std::move(r.next_state);
                break;
            }
            case ControllerKind::ideal: {
                auto r = ideal_step(plant, x, w);
                u = std::move(r.input);
                next = std::move(r.next_state);
                break;
            }
        }

        const double lb = plant.lower_bound(x.norm());
        out.lower_bound_sum += lb;
        if (costed && k < config.cost.horizon) cost_sum += stage_cost(x, u, config.cost);
        if (trace) {
            const bool renewal = config.controller == ControllerKind::anytime ? (effective == 0 && n == 0) : n == 0;
            if (renewal) trace->renewal_instants.push_back(k);
            trace->steps.push_back({k, n, effective, u, x, plant.lyapunov(x)});
        }

        x = std::move(next);
        if (!x.allFinite() || x.norm() > kDivergenceThreshold) {
            out.diverged = true;
            break;
        }
        n = sample_next(chain, n, availability_rng.uniform());
    }
    if (!out.diverged) record_checkpoints(config.horizon, x);

    if (costed && !out.diverged) out.cost = cost_sum / static_cast<double>(config.cost.horizon);
    if (trace) {
        trace->final_state = x;
        trace->cost = out.cost;
        trace->lower_bound_sum = out.lower_bound_sum;
        trace->diverged = out.diverged;
    }
    return out;
}

}  // namespace

std::string_view to_string(ControllerKind kind) noexcept {
    switch (kind) {
        case ControllerKind::anytime: return "anytime";
        case ControllerKind::baseline: return "baseline";
        case ControllerKind::ideal: return "ideal";
    }
    return "unknown";
}

std::string_view to_string(NoiseKind kind) noexcept {
    switch (kind) {
        case NoiseKind::none: return "none";
        case NoiseKind::uniform: return "uniform";
        case NoiseKind::gaussian: return "gaussian";
    }
    return "unknown";
}

std::optional<ControllerKind> parse_controller(std::string_view name) noexcept {
    for (auto k : {ControllerKind::anytime, ControllerKind::baseline, ControllerKind::ideal}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

std::optional<NoiseKind> parse_noise(std::string_view name) noexcept {
    for (auto k : {NoiseKind::none, NoiseKind::uniform, NoiseKind::gaussian}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

double NoiseSpec::mean_abs() const noexcept {
    switch (kind) {
        case NoiseKind::none: return 0.0;
        case NoiseKind::uniform: return scale / 2.0;
        case NoiseKind::gaussian: return scale * std::sqrt(2.0 / std::numbers::pi);
    }
    return 0.0;
}

RandomStream::RandomStream(std::uint64_t root_seed, std::uint64_t index, std::uint64_t stream_id)
    : engine_(splitmix64(splitmix64(root_seed) ^ splitmix64(index * 2 + stream_id + 0x51ED270B27ULL))) {}

double RandomStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
    return normal_(engine_);
}

MeanEstimate estimate_mean(std::span<const double> values) {
    MeanEstimate est;
    double sum = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        sum += v;
        ++est.count;
    }
    if (est.count == 0) {
        est.mean = kNaN;
        est.std_error = kNaN;
        return est;
    }
    est.mean = sum / static_cast<double>(est.count);
    if (est.count > 1) {
        double ss = 0.0;
        for (double v : values) {
            if (std::isfinite(v)) ss += (v - est.mean) * (v - est.mean);
        }
        const auto n = static_cast<double>(est.count);
        est.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return est;
}

SimTrace simulate_trajectory(const PlantModel& plant, const ProcessorChain& chain, const SimConfig& config,
                             std::uint64_t index) {
    check_config(plant, chain, config);
    SimTrace trace;
    (void)run_trajectory(plant, chain, config, index, &trace);
    return trace;
}

EnsembleSummary run_ensemble(const PlantModel& plant, const ProcessorChain& chain, const SimConfig& config) {
    check_config(plant, chain, config);
    const auto count = static_cast<std::size_t>(config.trajectories);
    const auto kept = static_cast<std::size_t>(std::clamp(config.keep_traces, 0, config.trajectories));
    std::vector<Outcome> outcomes(count);
    std::vector<SimTrace> traces(kept);

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            outcomes[i] = run_trajectory(plant, chain, config, i, i < kept ? &traces[i] : nullptr);
        }
    };
    const int threads = std::max(1, std::min(config.threads, config.trajectories));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    EnsembleSummary summary;
    summary.controller = config.controller;
    summary.trajectories = count;
    summary.checkpoint_steps = config.checkpoints;
    summary.costs.reserve(count);
    summary.lower_bound_sums.reserve(count);
    for (const Outcome& o : outcomes) {
        if (o.diverged) ++summary.diverged;
        summary.costs.push_back(o.diverged ? kNaN : o.cost);
        summary.lower_bound_sums.push_back(o.diverged ? kNaN : o.lower_bound_sum);
    }
    summary.cost = estimate_mean(summary.costs);
    summary.lower_bound_sum = estimate_mean(summary.lower_bound_sums);
    std::vector<double> column(count);
    for (std::size_t c = 0; c < config.checkpoints.size(); ++c) {
        for (std::size_t i = 0; i < count; ++i) column[i] = outcomes[i].checkpoint_values[c];
        summary.checkpoints.push_back(estimate_mean(column));
    }
    summary.traces = std::move(traces);
    return summary;
}

MeanEstimate empirical_cost(std::span<const SimTrace> traces, const CostWeights& weights) {
    std::vector<double> costs;
    costs.reserve(traces.size());
    for (const SimTrace& t : traces) {
        if (static_cast<int>(t.steps.size()) < weights.horizon) {
            throw Error(Errc::horizon_too_short, "trace " + std::to_string(t.index) + " has " +
                                                     std::to_string(t.steps.size()) + " steps, cost needs " +
                                                     std::to_string(weights.horizon));
        }
        double sum = 0.0;
        for (int k = 0; k < weights.horizon; ++k) {
            const StepRecord& s = t.steps[static_cast<std::size_t>(k)];
            if (s.state.size() != 1 || s.input.size() != 1) {
                throw Error(Errc::non_scalar_plant, "cost is defined for scalar plants only");
            }
            sum += stage_cost(s.state, s.input, weights);
        }
        costs.push_back(sum / static_cast<double>(weights.horizon));
    }
    return estimate_mean(costs);
}

ReturnPmf empirical_return_pmf(const ProcessorChain& chain, ReturnKind kind, std::int64_t cycles,
                               std::uint64_t seed, int j_max) {
    if (cycles < 1) throw Error(Errc::invalid_argument, "cycles must be >= 1");
    if (j_max < 1) throw Error(Errc::invalid_argument, "j_max must be >= 1");
    RandomStream rng(seed, 0, kAvailabilityStream);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(j_max), 0);
    std::int64_t beyond = 0;

    int n = 0;
    int effective = 0;
    std::int64_t last = 0;
    std::int64_t observed = 0;
    for (std::int64_t k = 1; observed < cycles; ++k) {
        n = sample_next(chain, n, rng.uniform());
        effective = next_effective_length(effective, n);
        const bool renewal = kind == ReturnKind::depletion ? (n == 0 && effective == 0) : n == 0;
        if (!renewal) continue;
        const std::int64_t gap = k - last;
        last = k;
        ++observed;
        if (gap <= j_max) {
            ++counts[static_cast<std::size_t>(gap - 1)];
        } else {
            ++beyond;
        }
    }

    ReturnPmf pmf;
    pmf.kind = kind;
    const auto total = static_cast<double>(cycles);
    for (auto c : counts) pmf.mass.push_back(static_cast<double>(c) / total);
    pmf.tail = static_cast<double>(beyond) / total;
    return pmf;
}

RobustnessReport robustness_experiment(const PlantModel& plant, const ProcessorChain& chain,
                                       const SimConfig& config, std::span<const int> checkpoints) {
    const auto rates = plant.rates();
    if (!rates) {
        throw Error(Errc::invalid_argument, "plant '" + plant.name + "' has no global open-loop growth bound");
    }
    RobustnessReport report;
    report.certificate = anytime_certificate(build_aggregate(chain), *rates);
    if (!report.certificate.stable) {
        throw Error(Errc::certificate_not_satisfied,
                    "depletion-cycle certificate " + std::to_string(report.certificate.value) + " >= 1");
    }
    SimConfig cfg = config;
    cfg.controller = ControllerKind::anytime;
    cfg.checkpoints.assign(checkpoints.begin(), checkpoints.end());
    const EnsembleSummary summary = run_ensemble(plant, chain, cfg);
    report.steps = summary.checkpoint_steps;
    report.means = summary.checkpoints;
    report.diverged = summary.diverged;
    return report;
}

ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> probabilities) {
    if (observed.size() != probabilities.size() || observed.empty()) {
        throw Error(Errc::dimension_mismatch, "observed and probability bins differ");
    }
    double total = 0.0;
    for (double o : observed) total += o;

    std::vector<double> obs;
    std::vector<double> exp;
    double pooled_obs = 0.0;
    double pooled_exp = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = probabilities[i] * total;
        if (e < 5.0) {
            pooled_obs += observed[i];
            pooled_exp += e;
        } else {
            obs.push_back(observed[i]);
            exp.push_back(e);
        }
    }
    if (pooled_exp > 0.0 || pooled_obs > 0.0) {
        obs.push_back(pooled_obs);
        exp.push_back(pooled_exp);
    }

    ChiSquareResult result;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (exp[i] > 0.0) {
            result.statistic += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
        } else if (obs[i] > 0.0) {
            result.statistic = std::numeric_limits<double>::infinity();
        }
    }
    result.dof = static_cast<int>(obs.size()) - 1;
    if (result.dof < 1) {
        result.p_value = 1.0;
        return result;
    }
    if (!std::isfinite(result.statistic)) {
        result.p_value = 0.0;
        return result;
    }
    const boost::math::chi_squared dist(result.dof);
    result.p_value = boost::math::cdf(boost::math::complement(dist, result.statistic));
    return result;
}

}  // namespace anytime
