#include <doctest.h>

#include <cmath>
#include <numbers>

#include "anytime/error.hpp"
#include "anytime/mc.hpp"

using namespace anytime;

namespace {

SimConfig base_config(ControllerKind controller, int trajectories = 200, int horizon = 50) {
    SimConfig c;
    c.controller = controller;
    c.trajectories = trajectories;
    c.horizon = horizon;
    c.seed = 42;
    return c;
}

Errc error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::validation_error;
}

}  // namespace

TEST_CASE("random streams are reproducible and separated") {
    RandomStream a(1, 0, kAvailabilityStream);
    RandomStream b(1, 0, kAvailabilityStream);
    RandomStream c(1, 1, kAvailabilityStream);
    RandomStream d(1, 0, kNoiseStream);
    int same_c = 0;
    int same_d = 0;
    for (int i = 0; i < 1000; ++i) {
        const double va = a.uniform();
        CHECK(va == b.uniform());
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
        same_c += va == c.uniform();
        same_d += va == d.uniform();
    }
    CHECK(same_c == 0);
    CHECK(same_d == 0);
}

TEST_CASE("mean and standard error") {
    const std::vector<double> v{1.0, 2.0, 3.0, std::nan(""), 6.0};
    const auto m = estimate_mean(v);
    CHECK(m.count == 4);
    CHECK(m.mean == 3.0);
    CHECK(m.std_error == doctest::Approx(std::sqrt(14.0 / 3.0 / 4.0)));
}

TEST_CASE("noise mean magnitude") {
    CHECK(NoiseSpec{NoiseKind::uniform, 0.1}.mean_abs() == doctest::Approx(0.05));
    CHECK(NoiseSpec{NoiseKind::gaussian, 2.0}.mean_abs() == doctest::Approx(2.0 * std::sqrt(2.0 / std::numbers::pi)));
    CHECK(NoiseSpec{}.mean_abs() == 0.0);
}

TEST_CASE("ideal controller on the cubic plant contracts by 0.99 per step") {
    auto cfg = base_config(ControllerKind::ideal, 1, 60);
    const auto trace = simulate_trajectory(cubic_plant(), case_study_chain(), cfg, 0);
    REQUIRE(trace.steps.size() == 60);
    for (int k = 1; k < 60; ++k) {
        CHECK(trace.steps[static_cast<std::size_t>(k)].lyapunov ==
              doctest::Approx(0.99 * trace.steps[static_cast<std::size_t>(k - 1)].lyapunov).epsilon(1e-14));
    }
}

TEST_CASE("ideal cost is deterministic and the equilibrium costs nothing") {
    const auto ideal = run_ensemble(cubic_plant(), q_lambda_chain(3), base_config(ControllerKind::ideal));
    for (double c : ideal.costs) CHECK(c == ideal.costs.front());

    for (auto kind : {ControllerKind::anytime, ControllerKind::baseline, ControllerKind::ideal}) {
        auto cfg = base_config(kind, 20);
        cfg.initial_state = Vector::Zero(1);
        const auto s = run_ensemble(cubic_plant(), q_lambda_chain(3), cfg);
        CHECK(s.cost.mean == 0.0);
    }
}

TEST_CASE("common availability across controllers, recorded buffer lengths") {
    auto any = base_config(ControllerKind::anytime, 1, 300);
    auto base = base_config(ControllerKind::baseline, 1, 300);
    const auto chain = case_study_chain();
    const auto ta = simulate_trajectory(cubic_plant(), chain, any, 7);
    const auto tb = simulate_trajectory(cubic_plant(), chain, base, 7);
    int lambda = 0;
    for (std::size_t k = 0; k < ta.steps.size(); ++k) {
        CHECK(ta.steps[k].availability == tb.steps[k].availability);
        const int n = ta.steps[k].availability;
        lambda = n >= 1 ? n : std::max(lambda - 1, 0);
        CHECK(ta.steps[k].effective_length == lambda);
    }
    for (int k : ta.renewal_instants) {
        CHECK(ta.steps[static_cast<std::size_t>(k)].availability == 0);
        CHECK(ta.steps[static_cast<std::size_t>(k)].effective_length == 0);
    }
    for (int k : tb.renewal_instants) CHECK(tb.steps[static_cast<std::size_t>(k)].availability == 0);
}

TEST_CASE("closed-loop depletion gaps equal availability-only gaps") {
    const auto chain = uniform_chain(3);
    auto cfg = base_config(ControllerKind::anytime, 1, 5000);
    const auto trace = simulate_trajectory(linear_plant(0.9, 1.0, 0.5), chain, cfg, 0);
    REQUIRE(trace.renewal_instants.size() > 100);
    REQUIRE(trace.renewal_instants.front() == 0);
    std::vector<double> counts(50, 0.0);
    double beyond = 0;
    for (std::size_t i = 1; i < trace.renewal_instants.size(); ++i) {
        const int gap = trace.renewal_instants[i] - trace.renewal_instants[i - 1];
        if (gap <= 50) {
            counts[static_cast<std::size_t>(gap - 1)] += 1;
        } else {
            beyond += 1;
        }
    }
    const auto cycles = static_cast<std::int64_t>(trace.renewal_instants.size() - 1);
    const auto pmf = empirical_return_pmf(chain, ReturnKind::depletion, cycles, cfg.seed, 50);
    for (int j = 1; j <= 50; ++j) {
        CHECK(pmf.at(j) * static_cast<double>(cycles) ==
              doctest::Approx(counts[static_cast<std::size_t>(j - 1)]).epsilon(1e-12));
    }
    CHECK(pmf.tail * static_cast<double>(cycles) == doctest::Approx(beyond));
}

TEST_CASE("empirical zero-availability pmf follows the geometric law") {
    const auto pmf = empirical_return_pmf(uniform_chain(2), ReturnKind::zero_availability, 200000, 3, 30);
    std::vector<double> observed;
    std::vector<double> probs;
    for (int j = 1; j <= 30; ++j) {
        observed.push_back(pmf.at(j) * 200000);
        probs.push_back(j == 1 ? 1.0 / 3.0 : (2.0 / 9.0) * std::pow(2.0 / 3.0, j - 2));
    }
    observed.push_back(pmf.tail * 200000);
    probs.push_back(std::pow(2.0 / 3.0, 29) * (2.0 / 3.0));
    CHECK(chi_square_test(observed, probs).p_value > 0.001);
    CHECK(error_code([] { (void)empirical_return_pmf(uniform_chain(2), ReturnKind::depletion, 0, 1); }) ==
          Errc::invalid_argument);
}

TEST_CASE("chi-square test detects a wrong law and pools sparse bins") {
    const std::vector<double> probs{0.5, 0.3, 0.2, 1e-6};
    const std::vector<double> exact{500, 300, 200, 0};
    const auto fit = chi_square_test(exact, probs);
    CHECK(fit.statistic == doctest::Approx(0.001).epsilon(1e-9));  // the pooled sparse bin alone
    CHECK(fit.p_value > 0.99);
    CHECK(fit.dof == 3);
    const std::vector<double> wrong{400, 300, 300, 0};
    CHECK(chi_square_test(wrong, probs).p_value < 1e-6);
}

TEST_CASE("ensembles are identical for any worker count") {
    auto cfg = base_config(ControllerKind::anytime, 300, 60);
    cfg.noise = {NoiseKind::gaussian, 0.05};
    cfg.checkpoints = {10, 60};
    const auto chain = q_lambda_chain(4);
    cfg.threads = 1;
    const auto one = run_ensemble(cubic_plant(), chain, cfg);
    cfg.threads = 5;
    const auto five = run_ensemble(cubic_plant(), chain, cfg);
    CHECK(one.costs == five.costs);
    CHECK(one.cost.mean == five.cost.mean);
    CHECK(one.cost.std_error == five.cost.std_error);
    CHECK(one.checkpoints[1].mean == five.checkpoints[1].mean);
}

TEST_CASE("trajectory i is reproducible in isolation") {
    auto cfg = base_config(ControllerKind::anytime, 10, 50);
    cfg.noise = {NoiseKind::uniform, 0.1};
    const auto chain = q_lambda_chain(3);
    const auto summary = run_ensemble(cubic_plant(), chain, cfg);
    const auto trace = simulate_trajectory(cubic_plant(), chain, cfg, 6);
    CHECK(trace.cost == summary.costs[6]);
}

TEST_CASE("divergent trajectories are flagged and excluded") {
    auto cfg = base_config(ControllerKind::baseline, 200, 150);
    const auto s = run_ensemble(linear_plant(4.0, 1.0, 0.5), q_lambda_chain(1), cfg);
    CHECK(s.diverged > 0);
    CHECK(s.diverged < s.trajectories);
    CHECK(s.cost.count == s.trajectories - s.diverged);
    std::size_t nan = 0;
    for (double c : s.costs) nan += std::isnan(c) ? 1 : 0;
    CHECK(nan == s.diverged);
}

TEST_CASE("series bound holds on the linear plant") {
    const auto plant = linear_plant(1.2, 1.0, 0.5);
    const auto chain = uniform_chain(2);
    const auto cert = anytime_certificate(build_aggregate(chain), *plant.rates());
    auto cfg = base_config(ControllerKind::anytime, 2000, 300);
    const auto s = run_ensemble(plant, chain, cfg);
    CHECK(s.lower_bound_sum.mean + 3 * s.lower_bound_sum.std_error < cert.bound_coefficient);
}

TEST_CASE("empirical cost checks") {
    auto cfg = base_config(ControllerKind::anytime, 5, 60);
    std::vector<SimTrace> traces;
    for (int i = 0; i < 5; ++i) traces.push_back(simulate_trajectory(cubic_plant(), q_lambda_chain(2), cfg, i));
    const auto cost = empirical_cost(traces);
    const auto summary = run_ensemble(cubic_plant(), q_lambda_chain(2), cfg);
    CHECK(cost.mean == doctest::Approx(summary.cost.mean).epsilon(1e-14));

    double manual = 0.0;
    for (int k = 0; k < 50; ++k) {
        const auto& r = traces[0].steps[static_cast<std::size_t>(k)];
        manual += 0.2 * r.state(0) * r.state(0) + 2.0 * r.input(0) * r.input(0);
    }
    CHECK(traces[0].cost == doctest::Approx(manual / 50.0).epsilon(1e-14));

    auto short_cfg = base_config(ControllerKind::anytime, 1, 20);
    std::vector<SimTrace> short_traces{simulate_trajectory(cubic_plant(), q_lambda_chain(2), short_cfg, 0)};
    CHECK(error_code([&] { (void)empirical_cost(short_traces); }) == Errc::horizon_too_short);

    PlantModel planar = linear_plant(0.5, 1.0, 0.2);
    planar.state_dim = 2;
    planar.input_dim = 2;
    auto planar_cfg = base_config(ControllerKind::ideal, 1, 50);
    planar_cfg.initial_state = Vector::Ones(2);
    std::vector<SimTrace> planar_traces{simulate_trajectory(planar, q_lambda_chain(2), planar_cfg, 0)};
    CHECK(error_code([&] { (void)empirical_cost(planar_traces); }) == Errc::non_scalar_plant);
}

TEST_CASE("robustness experiment preconditions") {
    auto cfg = base_config(ControllerKind::anytime, 50, 100);
    cfg.noise = {NoiseKind::uniform, 0.1};
    const std::vector<int> checkpoints{50, 100};
    CHECK(error_code([&] { (void)robustness_experiment(linear_plant(3.0, 1.0, 0.5), uniform_chain(2), cfg, checkpoints); }) ==
          Errc::certificate_not_satisfied);
    CHECK(error_code([&] { (void)robustness_experiment(cubic_plant(), uniform_chain(2), cfg, checkpoints); }) ==
          Errc::invalid_argument);

    // The worst-case criterion fails while the depletion-cycle certificate holds.
    const auto chain = case_study_chain();
    const auto plant = linear_plant(3.0, 1.0, 0.5);
    REQUIRE_FALSE(worst_case_certificate(chain, *plant.rates()).stable);
    const auto report = robustness_experiment(plant, chain, cfg, checkpoints);
    CHECK(report.certificate.stable);
    CHECK(report.steps == checkpoints);
    CHECK(report.means.size() == 2);

    auto quiet = cfg;
    quiet.noise = {};
    const auto noiseless = robustness_experiment(linear_plant(1.2, 1.0, 0.5), uniform_chain(2), quiet, checkpoints);
    CHECK(noiseless.means[1].mean < 1e-6);
}

TEST_CASE("configuration errors") {
    auto cfg = base_config(ControllerKind::anytime, 1, 10);
    cfg.initial_availability = 9;
    CHECK(error_code([&] { (void)simulate_trajectory(cubic_plant(), uniform_chain(2), cfg, 0); }) == Errc::invalid_argument);
    cfg = base_config(ControllerKind::anytime, 1, 10);
    cfg.initial_state = Vector::Ones(2);
    CHECK(error_code([&] { (void)simulate_trajectory(cubic_plant(), uniform_chain(2), cfg, 0); }) == Errc::dimension_mismatch);
    cfg = base_config(ControllerKind::anytime, 1, 0);
    CHECK(error_code([&] { (void)run_ensemble(cubic_plant(), uniform_chain(2), cfg); }) == Errc::invalid_argument);
}
