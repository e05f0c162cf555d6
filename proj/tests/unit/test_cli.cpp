#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "anytime/commands.hpp"
#include "anytime/error.hpp"
#include "anytime/scenario.hpp"

using namespace anytime;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string write_temp(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / ("anytime_test_" + name);
    std::ofstream(path) << text;
    return path.string();
}

const char* kUniformConfig = R"({
  "version": 1,
  "name": "uniform_two",
  "chain": {"type": "uniform", "capacity": 2},
  "plant": {"type": "linear", "a": 1.2, "b": 1.0, "rho": 0.5},
  "simulation": {"horizon": 60, "trajectories": 1, "seed": 9}
})";

Errc parse_error_of(const std::string& text) {
    try {
        (void)parse_scenario(text);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a parse error");
    return Errc::validation_error;
}

std::string parse_message(const std::string& text) {
    try {
        (void)parse_scenario(text);
    } catch (const Error& e) {
        return e.detail();
    }
    return {};
}

}  // namespace

TEST_CASE("every built-in scenario round-trips through config text") {
    for (const auto& name : builtin_scenario_names()) {
        for (const auto& s : builtin_scenarios(name)) {
            CAPTURE(s.name);
            const Scenario back = parse_scenario(dump_scenario(s));
            CHECK(back == s);
            CHECK(scenario_hash(back) == scenario_hash(s));
            CHECK(validate_scenario(s).empty());
        }
    }
    CHECK(builtin_scenarios("qlambda_sweep").size() == 7);
    CHECK_THROWS_AS((void)builtin_scenarios("nonsense"), Error);
}

TEST_CASE("config parsing is strict") {
    CHECK(parse_error_of("{") == Errc::parse_error);
    CHECK(parse_error_of(R"({"chain": {"type": "uniform", "capacity": 2}, "plant": {"type": "cubic"}})") ==
          Errc::parse_error);
    CHECK(parse_message(R"({"version": 2, "chain": {"type": "case_study"}, "plant": {"type": "cubic"}})")
              .starts_with("version"));
    CHECK(parse_message(R"({"version": 1, "chain": {"type": "case_study", "capcity": 5}, "plant": {"type": "cubic"}})")
              .starts_with("chain.capcity: unknown field"));
    CHECK(parse_message(R"({"version": 1, "chain": {"type": "case_study"}, "plant": {"type": "cubic"},
                            "simulation": {"noise": {"kind": "pink"}}})")
              .starts_with("simulation.noise.kind"));
    CHECK(parse_message(R"({"version": 1, "chain": {"type": "matrix", "matrix": [[0.5, "x"], [0.5, 0.5]]},
                            "plant": {"type": "cubic"}})")
              .starts_with("chain.matrix[0][1]"));
    CHECK(parse_message(R"({"version": 1, "chain": {"type": "case_study"}, "plant": {"type": "cubic"}, "extra": 1})")
              .starts_with("$.extra"));
}

TEST_CASE("validate: built-in case study is valid") {
    const auto r = run({"validate", "--scenario", "case_study"});
    CHECK(r.code == exit_ok);
    const auto doc = json::parse(r.out);
    CHECK(doc["valid"] == true);
    CHECK(doc["meta"]["scenario_hash"].get<std::string>().size() == 16);
    CHECK(doc["meta"]["tool_version"] == kToolVersion);
}

TEST_CASE("validate: non-stochastic row is named") {
    const auto path = write_temp("bad_row.json", R"({
      "version": 1,
      "chain": {"type": "matrix", "capacity": 2,
                "matrix": [[0.4, 0.3, 0.3], [0.5, 0.28, 0.2], [0.3, 0.3, 0.4]]},
      "plant": {"type": "cubic"}
    })");
    const auto r = run({"validate", path});
    CHECK(r.code == exit_validation);
    const auto issue = json::parse(r.out)["reports"][0]["issues"][0];
    CHECK(issue["error"] == "NonStochasticRow");
    CHECK(issue["path"] == "chain.matrix");
    CHECK(issue["message"].get<std::string>().find("row 1") != std::string::npos);
}

TEST_CASE("validate: rho = 1 is a validation error") {
    const auto rates = write_temp("rho_one.json", R"({
      "version": 1, "chain": {"type": "case_study"}, "plant": {"type": "cubic"},
      "rates": {"rho": 1.0, "alpha": 1.1}
    })");
    auto r = run({"validate", rates});
    CHECK(r.code == exit_validation);
    auto issue = json::parse(r.out)["reports"][0]["issues"][0];
    CHECK(issue["error"] == "ValidationError");
    CHECK(issue["path"] == "rates");

    const auto plant = write_temp("plant_rho_one.json", R"({
      "version": 1, "chain": {"type": "uniform", "capacity": 2},
      "plant": {"type": "linear", "a": 1.2, "b": 1.0, "rho": 1.0}
    })");
    r = run({"validate", plant});
    CHECK(r.code == exit_validation);
    issue = json::parse(r.out)["reports"][0]["issues"][0];
    CHECK(issue["error"] == "ValidationError");
    CHECK(issue["path"] == "plant.rho");
}

TEST_CASE("validate: malformed config exits 1") {
    const auto path = write_temp("broken.json", "{\"version\": 1, ");
    const auto r = run({"validate", path});
    CHECK(r.code == exit_validation);
    CHECK(r.err.starts_with("ParseError"));
    CHECK(run({"validate", "/nonexistent/file.json"}).code == exit_validation);
    CHECK(run({"validate"}).code == exit_validation);
    CHECK(run({"frobnicate"}).code == exit_validation);
}

TEST_CASE("pmf: uniform capacity 2, ten rows") {
    const auto r = run({"pmf", "--scenario", "uniform:2", "--kind", "delta", "--jmax", "10"});
    CHECK(r.code == exit_ok);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "j,probability");
    std::getline(in, line);
    CHECK(line == "1,0.333333333333");
    int rows = 1;
    while (std::getline(in, line) && !line.starts_with("#")) ++rows;
    CHECK(rows == 10);
    CHECK(line.starts_with("# tail,"));
}

TEST_CASE("pmf: errors and JSON output") {
    CHECK(run({"pmf", "--scenario", "uniform:2", "--jmax", "1"}).code == exit_validation);
    CHECK(run({"pmf", "--scenario", "uniform:2", "--kind", "gamma"}).code == exit_validation);
    const auto r = run({"pmf", "--scenario", "case_study", "--kind", "tau", "--jmax", "50", "--format", "json"});
    CHECK(r.code == exit_ok);
    const auto doc = json::parse(r.out);
    CHECK(doc["probability"].size() == 50);
    CHECK(doc["tail"].get<double>() == doctest::Approx(0.20472112191).epsilon(1e-10));
}

TEST_CASE("certify: uniform capacity 2 at alpha 1.2, rho 0.5") {
    const auto r = run({"certify", write_temp("uniform.json", kUniformConfig)});
    CHECK(r.code == exit_ok);
    const auto res = json::parse(r.out)["results"][0];
    CHECK(res["omega"]["value"].get<double>() == 0.521739130435);
    CHECK(res["omega"]["stable"] == true);
    CHECK(res["upsilon"]["status"] == "ok");
}

TEST_CASE("certify: zero growth and the not-applicable worst case") {
    const auto zero = write_temp("alpha_zero.json", R"({
      "version": 1, "chain": {"type": "case_study"}, "plant": {"type": "cubic"},
      "rates": {"rho": 0.5, "alpha": 0.0}
    })");
    auto res = json::parse(run({"certify", zero}).out)["results"][0];
    CHECK(res["omega"]["value"].get<double>() == 0.0);
    CHECK(res["theta"]["value"].get<double>() == 0.0);
    CHECK(res["omega"]["stable"] == true);
    CHECK(res["upsilon"]["stable"] == true);

    const auto big = write_temp("alpha_big.json", R"({
      "version": 1, "chain": {"type": "case_study"}, "plant": {"type": "cubic"},
      "rates": {"rho": 0.5, "alpha": 6.0}
    })");
    const auto r = run({"certify", big});
    CHECK(r.code == exit_ok);
    res = json::parse(r.out)["results"][0];
    CHECK(res["upsilon"]["status"] == "NotApplicable");
    CHECK(res["omega"]["value"].is_number());
    CHECK(res["theta"]["value"].is_number());

    const auto csv = run({"certify", big, "--format", "csv"});
    CHECK(csv.out.find("upsilon,,,,,NotApplicable") != std::string::npos);
}

TEST_CASE("certify: case study without rates needs explicit rates") {
    const auto r = run({"certify", "--scenario", "case_study"});
    CHECK(r.code == exit_validation);
    CHECK(r.err.find("rates") != std::string::npos);
}

TEST_CASE("region: two curves, omega above upsilon") {
    const auto r = run({"region", "--scenario", "case_study", "--model", "omega,upsilon", "--rho-grid", "0:0.99:20"});
    CHECK(r.code == exit_ok);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "scenario,model,rho,alpha_star,capped");
    std::vector<double> omega;
    std::vector<double> upsilon;
    while (std::getline(in, line)) {
        std::stringstream row(line);
        std::string scenario, model, rho, alpha;
        std::getline(row, scenario, ',');
        std::getline(row, model, ',');
        std::getline(row, rho, ',');
        std::getline(row, alpha, ',');
        (model == "omega" ? omega : upsilon).push_back(std::stod(alpha));
    }
    REQUIRE(omega.size() == 20);
    REQUIRE(upsilon.size() == 20);
    CHECK(omega[0] == 5.0);
    for (std::size_t i = 0; i < 20; ++i) CHECK(omega[i] >= upsilon[i]);
}

TEST_CASE("region: empty or bad grid") {
    auto r = run({"region", "--scenario", "case_study", "--rho-grid", ""});
    CHECK(r.code == exit_validation);
    CHECK(r.err.starts_with("GridOutOfRange"));
    CHECK(run({"region", "--scenario", "case_study", "--rho-grid", "0.5,1.2"}).code == exit_validation);
    CHECK(run({"region", "--scenario", "case_study", "--model", "kappa"}).code == exit_validation);
}

TEST_CASE("simulate: one trajectory, same seed, identical bytes") {
    const auto path = write_temp("sim.json", kUniformConfig);
    const auto a = run({"simulate", path, "--seed", "5"});
    const auto b = run({"simulate", path, "--seed", "5", "--threads", "3"});
    CHECK(a.code == exit_ok);
    CHECK(a.out == b.out);
    const auto doc = json::parse(a.out);
    CHECK(doc["meta"]["seed"] == 5);
    const auto rec = doc["records"][0];
    CHECK(rec["trajectories"] == 1);
    CHECK(rec["seed"] == 5);
    CHECK(rec["J_mean"].is_number());
    CHECK(rec["initial_state"][0] == 1.0);
    CHECK(rec["noise"]["kind"] == "none");
}

TEST_CASE("simulate: q-lambda sweep gives 21 records") {
    const auto r = run({"simulate", "--scenario", "qlambda_sweep", "--trajectories", "20"});
    CHECK(r.code == exit_ok);
    CHECK(json::parse(r.out)["records"].size() == 21);
}

TEST_CASE("simulate: traces and output file") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto trace = (dir / "anytime_test_trace.csv").string();
    const auto out = (dir / "anytime_test_out.json").string();
    const auto r = run({"simulate", "--scenario", "uniform:2", "--trajectories", "3", "--horizon", "10", "--trace",
                        trace, "--out", out});
    CHECK(r.code == exit_ok);
    CHECK(r.out.empty());
    std::ifstream t(trace);
    std::string header;
    std::getline(t, header);
    CHECK(header == "scenario,controller,trajectory,k,N,lambda,u,x,V");
    int rows = 0;
    for (std::string line; std::getline(t, line);) ++rows;
    CHECK(rows == 10);
    std::ifstream o(out);
    CHECK(json::parse(o)["records"].size() == 1);
}

TEST_CASE("simulate --theorem3 refuses an uncertified loop") {
    const auto path = write_temp("noisy_unstable.json", R"({
      "version": 1, "chain": {"type": "uniform", "capacity": 2},
      "plant": {"type": "linear", "a": 3.0, "b": 1.0, "rho": 0.5},
      "simulation": {"horizon": 100, "trajectories": 10, "noise": {"kind": "uniform", "scale": 0.1}}
    })");
    const auto r = run({"simulate", path, "--theorem3"});
    CHECK(r.code == exit_runtime);
    CHECK(r.err.starts_with("CertificateNotSatisfied"));
    CHECK(run({"simulate", path}).code == exit_ok);
}
