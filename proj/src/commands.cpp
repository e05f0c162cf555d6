#include "anytime/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "anytime/aggregate.hpp"
#include "anytime/certify.hpp"
#include "anytime/error.hpp"
#include "anytime/mc.hpp"
#include "anytime/scenario.hpp"
#include "format.hpp"

namespace anytime {
namespace {

using nlohmann::ordered_json;

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::string out_path;
    std::string format = "json";
    int threads = 0;
    bool theorem3 = false;
};

struct InputOptions {
    std::string config;
    std::string scenario;
};

ordered_json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return round_significant(v);
}

int default_threads() {
    if (const char* env = std::getenv("ANYTIME_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 1) return static_cast<int>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::solver_failure:
        case Errc::numeric_overflow:
        case Errc::certificate_not_satisfied:
            return exit_runtime;
        default:
            return exit_validation;
    }
}

std::vector<Scenario> load_inputs(const InputOptions& in, const GlobalOptions& g) {
    if (in.config.empty() == in.scenario.empty()) {
        throw Error(Errc::invalid_argument, "give exactly one of a config path or --scenario <name>");
    }
    std::vector<Scenario> scenarios =
        in.config.empty() ? builtin_scenarios(in.scenario) : std::vector<Scenario>{load_scenario_file(in.config)};
    if (g.seed) {
        for (auto& s : scenarios) s.sim.seed = *g.seed;
    }
    return scenarios;
}

Scenario single(const std::vector<Scenario>& scenarios, std::string_view command) {
    if (scenarios.size() != 1) {
        throw Error(Errc::invalid_argument, std::string(command) + " takes a single scenario");
    }
    return scenarios.front();
}

ordered_json meta_block(const std::vector<Scenario>& scenarios) {
    ordered_json meta;
    meta["tool"] = "anytime";
    meta["tool_version"] = kToolVersion;
    if (scenarios.size() == 1) {
        meta["scenario"] = scenarios.front().name;
        meta["seed"] = scenarios.front().sim.seed;
        meta["scenario_hash"] = scenario_hash(scenarios.front());
    } else {
        std::string joined;
        for (const auto& s : scenarios) joined += scenario_hash(s);
        Scenario combined;
        combined.name = joined;
        meta["scenarios"] = ordered_json::array();
        for (const auto& s : scenarios) meta["scenarios"].push_back(s.name);
        meta["seed"] = scenarios.front().sim.seed;
        meta["scenario_hash"] = scenario_hash(combined);
    }
    return meta;
}

// Opens --out when given, otherwise writes to the command's stdout stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_) throw Error(Errc::invalid_argument, "cannot write '" + path + "'");
            stream_ = &file_;
        }
    }
    std::ostream& get() { return *stream_; }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

void emit_json(const GlobalOptions& g, std::ostream& out, const ordered_json& doc) {
    Sink sink(g.out_path, out);
    sink.get() << doc.dump(2) << '\n';
}

ordered_json certificate_json(const Certificate& c) {
    ordered_json j;
    j["value"] = number(c.value);
    j["stable"] = c.stable;
    j["bound_coefficient"] = number(c.bound_coefficient);
    j["truncation_error"] = number(c.truncation_error);
    return j;
}

LyapunovRates scenario_rates(const ResolvedScenario& r, const Scenario& s) {
    if (!r.rates) {
        throw Error(Errc::validation_error,
                    "rates: scenario '" + s.name + "' has no open-loop growth rate; supply \"rates\" in the config");
    }
    return *r.rates;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    if (text.empty()) return grid;
    const auto to_double = [&](const std::string& token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size() || token.empty()) {
            throw Error(Errc::grid_out_of_range, "cannot parse rho grid entry '" + token + "'");
        }
        return v;
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
        if (parts.size() != 3) throw Error(Errc::grid_out_of_range, "rho grid range must be start:stop:count");
        const double lo = to_double(parts[0]);
        const double hi = to_double(parts[1]);
        const double count = to_double(parts[2]);
        if (count < 1 || count != std::floor(count)) throw Error(Errc::grid_out_of_range, "grid count must be >= 1");
        const int n = static_cast<int>(count);
        for (int i = 0; i < n; ++i) grid.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
        return grid;
    }
    std::stringstream ss(text);
    for (std::string token; std::getline(ss, token, ',');) grid.push_back(to_double(token));
    return grid;
}

std::vector<CertificateModel> parse_models(const std::string& text) {
    std::vector<CertificateModel> models;
    std::stringstream ss(text);
    for (std::string token; std::getline(ss, token, ',');) {
        if (token == "omega") {
            models.push_back(CertificateModel::anytime);
        } else if (token == "theta") {
            models.push_back(CertificateModel::baseline);
        } else if (token == "upsilon") {
            models.push_back(CertificateModel::worst_case);
        } else if (token == "all") {
            models = {CertificateModel::anytime, CertificateModel::baseline, CertificateModel::worst_case};
        } else {
            throw Error(Errc::invalid_argument, "unknown model '" + token + "' (omega, theta, upsilon, all)");
        }
    }
    if (models.empty()) throw Error(Errc::invalid_argument, "no certificate model given");
    return models;
}

// ---- subcommands ----------------------------------------------------------

int cmd_validate(const GlobalOptions& g, const InputOptions& in, std::ostream& out) {
    const auto scenarios = load_inputs(in, g);
    bool valid = true;
    ordered_json doc;
    doc["meta"] = meta_block(scenarios);
    doc["reports"] = ordered_json::array();
    std::ostringstream csv;
    csv << "scenario,path,error,message\n";
    for (const auto& s : scenarios) {
        const auto issues = validate_scenario(s);
        valid = valid && issues.empty();
        ordered_json report;
        report["scenario"] = s.name;
        report["valid"] = issues.empty();
        report["issues"] = ordered_json::array();
        for (const auto& issue : issues) {
            report["issues"].push_back({{"path", issue.path}, {"error", issue.error}, {"message", issue.message}});
            csv << s.name << ',' << issue.path << ',' << issue.error << ",\"" << issue.message << "\"\n";
        }
        doc["reports"].push_back(report);
    }
    doc["valid"] = valid;
    if (g.format == "csv") {
        Sink sink(g.out_path, out);
        sink.get() << csv.str();
    } else {
        emit_json(g, out, doc);
    }
    return valid ? exit_ok : exit_validation;
}

int cmd_pmf(const GlobalOptions& g, const InputOptions& in, const std::string& kind_name, int j_max,
            std::ostream& out) {
    const Scenario s = single(load_inputs(in, g), "pmf");
    const ProcessorChain chain = resolve_chain(s.chain);
    ReturnPmf pmf;
    if (kind_name == "delta") {
        pmf = delta_pmf(build_aggregate(chain), j_max);
    } else if (kind_name == "tau") {
        pmf = tau_pmf(chain, j_max);
    } else {
        throw Error(Errc::invalid_argument, "--kind must be delta or tau");
    }
    if (g.format == "json") {
        ordered_json doc;
        doc["meta"] = meta_block({s});
        doc["kind"] = std::string(to_string(pmf.kind));
        doc["j_max"] = j_max;
        doc["probability"] = ordered_json::array();
        for (double p : pmf.mass) doc["probability"].push_back(number(p));
        doc["tail"] = number(pmf.tail);
        emit_json(g, out, doc);
    } else {
        Sink sink(g.out_path, out);
        write_pmf_csv(sink.get(), pmf);
    }
    return exit_ok;
}

int cmd_certify(const GlobalOptions& g, const InputOptions& in, std::ostream& out) {
    const auto scenarios = load_inputs(in, g);
    ordered_json doc;
    doc["meta"] = meta_block(scenarios);
    doc["results"] = ordered_json::array();
    std::ostringstream csv;
    csv << "scenario,certificate,value,stable,bound_coefficient,truncation_error,status\n";
    for (const auto& s : scenarios) {
        const ResolvedScenario r = resolve_scenario(s);
        const LyapunovRates rates = scenario_rates(r, s);
        const Certificate omega = anytime_certificate(build_aggregate(r.chain), rates);
        const Certificate theta = baseline_certificate(r.chain, rates);
        ordered_json result;
        result["scenario"] = s.name;
        result["rho"] = number(rates.rho);
        result["alpha"] = number(rates.alpha);
        result["omega"] = certificate_json(omega);
        result["theta"] = certificate_json(theta);
        const auto row = [&](std::string_view name, const Certificate& c) {
            csv << s.name << ',' << name << ',' << format_number(c.value) << ',' << (c.stable ? "true" : "false")
                << ',' << format_number(c.bound_coefficient) << ',' << format_number(c.truncation_error) << ",ok\n";
        };
        row("omega", omega);
        row("theta", theta);
        try {
            const Certificate upsilon = worst_case_certificate(r.chain, rates);
            ordered_json u = certificate_json(upsilon);
            u["terms"] = ordered_json::array();
            for (double t : worst_case_terms(r.chain, rates)) u["terms"].push_back(number(t));
            u["status"] = "ok";
            result["upsilon"] = u;
            row("upsilon", upsilon);
        } catch (const Error& e) {
            if (e.code() != Errc::not_applicable) throw;
            result["upsilon"] = {{"status", "NotApplicable"}, {"detail", e.detail()}};
            csv << s.name << ",upsilon,,,,,NotApplicable\n";
        }
        doc["results"].push_back(result);
    }
    if (g.format == "csv") {
        Sink sink(g.out_path, out);
        sink.get() << csv.str();
    } else {
        emit_json(g, out, doc);
    }
    return exit_ok;
}

int cmd_region(const GlobalOptions& g, const InputOptions& in, const std::string& model_names,
               const std::string& grid_text, std::ostream& out) {
    const auto scenarios = load_inputs(in, g);
    const auto models = parse_models(model_names);
    const auto grid = parse_grid(grid_text);
    ordered_json doc;
    doc["meta"] = meta_block(scenarios);
    doc["curves"] = ordered_json::array();
    std::ostringstream csv;
    csv << "scenario,model,rho,alpha_star,capped\n";
    for (const auto& s : scenarios) {
        const ProcessorChain chain = resolve_chain(s.chain);
        for (auto model : models) {
            const auto points = region_boundary(model, chain, grid);
            ordered_json curve;
            curve["scenario"] = s.name;
            curve["model"] = std::string(to_string(model));
            curve["points"] = ordered_json::array();
            for (const auto& p : points) {
                curve["points"].push_back(
                    {{"rho", number(p.rho)}, {"alpha_star", number(p.alpha_star)}, {"capped", p.capped}});
                csv << s.name << ',' << to_string(model) << ',' << format_number(p.rho) << ','
                    << format_number(p.alpha_star) << ',' << (p.capped ? "true" : "false") << '\n';
            }
            doc["curves"].push_back(curve);
        }
    }
    if (g.format == "json") {
        emit_json(g, out, doc);
    } else {
        Sink sink(g.out_path, out);
        sink.get() << csv.str();
    }
    return exit_ok;
}

struct SimulateOptions {
    std::optional<int> trajectories;
    std::optional<int> horizon;
    std::string trace_path;
    int trace_count = 1;
};

ordered_json estimate_json(const MeanEstimate& m) {
    return {{"mean", number(m.mean)}, {"std_error", number(m.std_error)}, {"count", m.count}};
}

void write_traces(std::ostream& csv, const std::string& scenario, ControllerKind controller,
                  const std::vector<SimTrace>& traces) {
    const auto join = [](const Vector& v) {
        std::string s;
        for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_number(v(i));
        return s;
    };
    for (const auto& t : traces) {
        for (const auto& r : t.steps) {
            csv << scenario << ',' << to_string(controller) << ',' << t.index << ',' << r.k << ',' << r.availability
                << ',' << r.effective_length << ',' << join(r.input) << ',' << join(r.state) << ','
                << format_number(r.lyapunov) << '\n';
        }
    }
}

int cmd_simulate(const GlobalOptions& g, const InputOptions& in, const SimulateOptions& opt, std::ostream& out) {
    auto scenarios = load_inputs(in, g);
    for (auto& s : scenarios) {
        if (opt.trajectories) s.sim.trajectories = *opt.trajectories;
        if (opt.horizon) s.sim.horizon = *opt.horizon;
    }
    ordered_json doc;
    doc["meta"] = meta_block(scenarios);
    doc["records"] = ordered_json::array();
    std::ostringstream traces;
    traces << "scenario,controller,trajectory,k,N,lambda,u,x,V\n";

    for (const auto& s : scenarios) {
        ResolvedScenario r = resolve_scenario(s);
        r.sim.threads = g.threads;
        r.sim.keep_traces = opt.trace_path.empty() ? 0 : opt.trace_count;
        const auto base_record = [&](ControllerKind controller) {
            ordered_json rec;
            rec["scenario"] = s.name;
            rec["controller"] = std::string(to_string(controller));
            rec["seed"] = s.sim.seed;
            rec["horizon"] = s.sim.horizon;
            rec["initial_state"] = ordered_json::array();
            for (double v : s.sim.initial_state) rec["initial_state"].push_back(number(v));
            rec["initial_availability"] = s.sim.initial_availability;
            rec["noise"] = {{"kind", std::string(to_string(s.sim.noise.kind))}, {"scale", number(s.sim.noise.scale)}};
            return rec;
        };

        if (g.theorem3) {
            std::vector<int> checkpoints = s.sim.checkpoints;
            if (checkpoints.empty()) checkpoints.push_back(s.sim.horizon);
            r.sim.controller = ControllerKind::anytime;
            const RobustnessReport report = robustness_experiment(r.plant, r.chain, r.sim, checkpoints);
            ordered_json rec = base_record(ControllerKind::anytime);
            rec["trajectories"] = s.sim.trajectories;
            rec["diverged"] = report.diverged;
            rec["certificate"] = certificate_json(report.certificate);
            rec["checkpoints"] = ordered_json::array();
            for (std::size_t i = 0; i < report.steps.size(); ++i) {
                ordered_json c = estimate_json(report.means[i]);
                c["k"] = report.steps[i];
                rec["checkpoints"].push_back(c);
            }
            doc["records"].push_back(rec);
            continue;
        }

        for (auto controller : r.controllers) {
            r.sim.controller = controller;
            const EnsembleSummary summary = run_ensemble(r.plant, r.chain, r.sim);
            ordered_json rec = base_record(controller);
            rec["trajectories"] = summary.trajectories;
            rec["diverged"] = summary.diverged;
            rec["J_mean"] = number(summary.cost.mean);
            rec["J_stderr"] = number(summary.cost.std_error);
            rec["lower_bound_sum"] = estimate_json(summary.lower_bound_sum);
            if (!summary.checkpoint_steps.empty()) {
                rec["checkpoints"] = ordered_json::array();
                for (std::size_t i = 0; i < summary.checkpoint_steps.size(); ++i) {
                    ordered_json c = estimate_json(summary.checkpoints[i]);
                    c["k"] = summary.checkpoint_steps[i];
                    rec["checkpoints"].push_back(c);
                }
            }
            doc["records"].push_back(rec);
            write_traces(traces, s.name, controller, summary.traces);
        }
    }

    if (!opt.trace_path.empty()) {
        std::ofstream f(opt.trace_path, std::ios::binary);
        if (!f) throw Error(Errc::invalid_argument, "cannot write '" + opt.trace_path + "'");
        f << traces.str();
    }
    if (g.format == "csv") {
        Sink sink(g.out_path, out);
        sink.get() << "scenario,controller,trajectories,diverged,J_mean,J_stderr,seed\n";
        for (const auto& rec : doc["records"]) {
            const auto field = [&](const char* key) {
                return rec.contains(key) && !rec[key].is_null() ? format_number(rec[key].get<double>()) : std::string();
            };
            sink.get() << rec["scenario"].get<std::string>() << ',' << rec["controller"].get<std::string>() << ','
                       << rec["trajectories"] << ',' << rec["diverged"] << ',' << field("J_mean") << ','
                       << field("J_stderr") << ',' << rec["seed"] << '\n';
        }
    } else {
        emit_json(g, out, doc);
    }
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stability certificates and Monte Carlo for anytime control under random processor availability",
                 "anytime"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    g.threads = default_threads();
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
    app.add_option("--out", g.out_path, "Write output to this path instead of stdout");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", g.threads, "Worker threads (default: $ANYTIME_THREADS or hardware)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--theorem3", g.theorem3, "simulate: run the noise-robustness check (needs the certificate < 1)");

    InputOptions in;
    const auto add_input = [&](CLI::App* sub) {
        sub->add_option("config", in.config, "Scenario config file (JSON)");
        sub->add_option("--scenario", in.scenario,
                        "Built-in scenario: case_study, qlambda:<L>, qlambda_sweep, uniform:<L>, linear_noise");
    };

    auto* validate = app.add_subcommand("validate", "Validate a scenario and report every issue");
    add_input(validate);

    std::string kind = "delta";
    int j_max = 50;
    auto* pmf = app.add_subcommand("pmf", "Return-time distribution as CSV");
    add_input(pmf);
    pmf->add_option("--kind", kind, "delta (buffer depletion) or tau (zero availability)");
    pmf->add_option("--jmax", j_max, "Largest return time listed (>= 2)");

    auto* certify = app.add_subcommand("certify", "Stability certificates omega, theta, upsilon");
    add_input(certify);

    std::string models = "omega,upsilon";
    std::string grid = "0:0.99:100";
    auto* region = app.add_subcommand("region", "Stability-region boundary alpha*(rho)");
    add_input(region);
    region->add_option("--model", models, "Comma list of omega, theta, upsilon, all");
    region->add_option("--rho-grid", grid, "start:stop:count or a comma list of rho values");

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo closed-loop ensemble summaries");
    add_input(simulate);
    simulate->add_option("--trajectories", sim.trajectories, "Override the trajectory count")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--horizon", sim.horizon, "Override the horizon")->check(CLI::PositiveNumber);
    simulate->add_option("--trace", sim.trace_path, "Write per-step CSV traces to this path");
    simulate->add_option("--trace-count", sim.trace_count, "Trajectories traced per controller")
        ->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "ParseError: " << e.what() << '\n';
        return exit_validation;
    }
    if (seed_opt->count() > 0) g.seed = seed;
    // pmf and region emit CSV unless JSON is requested.
    if ((pmf->parsed() || region->parsed()) && app.get_option("--format")->count() == 0) g.format = "csv";

    try {
        if (validate->parsed()) return cmd_validate(g, in, out);
        if (pmf->parsed()) return cmd_pmf(g, in, kind, j_max, out);
        if (certify->parsed()) return cmd_certify(g, in, out);
        if (region->parsed()) return cmd_region(g, in, models, grid, out);
        if (simulate->parsed()) return cmd_simulate(g, in, sim, out);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "RuntimeError: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_validation;
}

}  // namespace anytime
