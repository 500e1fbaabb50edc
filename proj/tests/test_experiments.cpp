#include "pdmp/acceptance.hpp"
#include "pdmp/report.hpp"
#include "pdmp/scenarios.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pdmp;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("pdmp_test_" + name);
    fs::remove_all(dir);
    return dir;
}

Scenario short_run(Scenario s, double horizon = 20.0) {
    s.horizon = horizon;
    s.replicates = 3;
    s.lyapunov_horizon = 50.0;
    s.lyapunov_replicates = 5;
    return s;
}

const DiagnosticResult& find(const Report& r, const std::string& name) {
    for (const auto& d : r.diagnostics) {
        if (d.name == name) return d;
    }
    throw std::runtime_error("no diagnostic " + name);
}

}  // namespace

TEST_CASE("registry constants", "[experiments]") {
    const auto names = [] {
        std::vector<std::string> out;
        for (const auto& s : registry()) out.push_back(s.name);
        return out;
    }();
    CHECK(names == std::vector<std::string>{"ainscosta", "astacoins", "fmg3d", "ly3d", "nobra"});

    const auto ains = make_ainscosta();
    CHECK(ains.beta == 20.0);
    CHECK(ains.dim() == 2);
    CHECK(ains.modes() == 2);
    CHECK(ains.initial_states.front() == Vector::Constant(2, 0.5));
    CHECK(ains.rates().entries()(0, 1) == 20.0);

    const auto fmg = make_fmg3d();
    CHECK(fmg.kind == SystemKind::Linear);
    CHECK(fmg.beta == 10.0);
    CHECK(fmg.horizon == 20.0);
    CHECK(fmg.linearization().cone() == ConeTag::NonnegativeOrthant);

    CHECK(make_nobra().initial_states.front()(1) == 0.2);
    CHECK(make_ly3d().dim() == 3);
    CHECK_FALSE(find_scenario("nope").has_value());
    for (const auto& s : registry()) CHECK_NOTHROW(s.validate());
}

TEST_CASE("rational helpers", "[experiments]") {
    const Matrix m = rational_matrix({{{1, 3}, {2}}, {{-5, 32}, {0}}});
    CHECK(m(0, 0) == 1.0 / 3.0);
    CHECK(m(0, 1) == 2.0);
    CHECK(m(1, 0) == -5.0 / 32.0);
}

TEST_CASE("config parsing", "[experiments]") {
    const auto j = nlohmann::json::parse(R"({
        "name": "custom",
        "fields": [{"C": [[0, 1], [1, 0]], "D": [2, 2]}, {"C": [[1, 0], [0, 1]], "D": [1, 1]}],
        "rates": [[0, 1], [2, 0]],
        "beta": 3,
        "x0": [[0.1, 0.2], [0.3, 0.4]],
        "seed": 42,
        "horizon": 5,
        "replicates": 2,
        "diagnostics": ["eigen", "trajectory"]
    })");
    const auto s = scenario_from_json(j);
    CHECK(s.name == "custom");
    CHECK(s.initial_states.size() == 2);
    CHECK(s.rates().entries()(1, 0) == 6.0);
    CHECK(s.seed == 42);
    CHECK(s.integrator.step == 1e-3);

    const auto back = scenario_from_json(scenario_to_json(s));
    CHECK(scenario_to_json(back) == scenario_to_json(s));

    const auto based = scenario_from_json(nlohmann::json{{"scenario", "nobra"}, {"beta", 10}});
    CHECK(based.name == "nobra");
    CHECK(based.beta == 10.0);
}

TEST_CASE("config errors", "[experiments]") {
    const auto base = nlohmann::json{{"scenario", "ainscosta"}};
    auto with = [&](const char* key, nlohmann::json v) {
        auto j = base;
        j[key] = std::move(v);
        return j;
    };
    CHECK_THROWS_AS(scenario_from_json(with("replicates", 0)), ConfigError);
    CHECK_THROWS_AS(scenario_from_json(with("replicates", -1)), ConfigError);
    CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"scenario", "unknown"}}), ConfigError);
    CHECK_THROWS_AS(scenario_from_json(with("beta", -1)), ConfigError);
    CHECK_THROWS_AS(scenario_from_json(with("x0", {0.5, 1.5})), ConfigError);
    CHECK_THROWS_AS(scenario_from_json(with("x0", {0.5, 0.5, 0.5})), ConfigError);
    CHECK_THROWS_AS(scenario_from_json(with("rates", {{0, -1}, {1, 0}})), ConfigError);
    CHECK_THROWS_AS(scenario_from_json(with("i0", 2)), ConfigError);
    CHECK_THROWS_AS(scenario_from_json(with("beta", "fast")), ConfigError);

    const auto no_seed = nlohmann::json::parse(R"({
        "fields": [{"C": [[0, 1], [1, 0]], "D": [2, 2]}],
        "rates": [[0]], "x0": [0.1, 0.2]
    })");
    CHECK_THROWS_AS(scenario_from_json(no_seed), ConfigError);

    auto s = make_ainscosta();
    s.diagnostics = {"eigen", "telepathy"};
    CHECK_THROWS_AS(run(s, scratch("unknown_diag")), ConfigError);
}

TEST_CASE("report on a short extinction run", "[experiments]") {
    auto s = short_run(make_ainscosta());
    s.diagnostics = {"eigen", "hull", "period", "bounds", "trajectory", "extinction", "occupation"};
    const auto dir = scratch("ainscosta");
    const Report r = run(s, dir);
    for (const auto& d : r.diagnostics) {
        INFO(d.name << ": " << d.error);
        CHECK(d.ok);
    }
    const auto& eigen = find(r, "eigen");
    CHECK_THAT(eigen.values["lambda_average"].get<double>(), WithinAbs(-1.0, 1e-12));
    REQUIRE_FALSE(eigen.bands.empty());
    for (const auto& b : eigen.bands) {
        CHECK(b.provenance == Provenance::Paper);
        CHECK(b.passed);
    }
    CHECK(r.passed());
    CHECK(fs::exists(dir / "report_ainscosta.json"));
    CHECK(fs::exists(dir / "timing_ainscosta.json"));
    CHECK(fs::exists(dir / "fig_trajectories_ainscosta.csv"));
    CHECK(fs::exists(dir / "occupation_ainscosta.csv"));

    const auto j = nlohmann::json::parse(slurp(dir / "report_ainscosta.json"));
    CHECK(j.at("scenario").at("name") == "ainscosta");
    CHECK_FALSE(j.contains("wall_clock_seconds"));
    for (const auto& d : j.at("diagnostics")) {
        for (const auto& b : d.at("bands")) {
            const auto p = b.at("provenance").get<std::string>();
            CHECK((p == "PAPER" || p == "DERIVED" || p == "TRIVIAL"));
        }
    }
}

TEST_CASE("report on a short persistence run", "[experiments]") {
    auto s = short_run(make_astacoins());
    s.diagnostics = {"eigen", "equilibrium", "hull", "lyapunov", "tail", "contraction"};
    const Report r = run(s, scratch("astacoins"));
    for (const auto& d : r.diagnostics) {
        INFO(d.name << ": " << d.error);
        CHECK(d.ok);
    }
    CHECK_FALSE(find(r, "hull").values["all_hurwitz"].get<bool>());
    const auto& lyap = find(r, "lyapunov");
    CHECK(lyap.values.contains("angular"));
    CHECK(lyap.values.contains("lognorm"));
}

TEST_CASE("diagnostic failures are recorded, not thrown", "[experiments]") {
    auto s = short_run(make_fmg3d());
    s.diagnostics = {"equilibrium", "eigen"};
    const Report r = run(s, scratch("fmg3d"));
    CHECK_FALSE(find(r, "equilibrium").ok);
    CHECK_FALSE(find(r, "equilibrium").error.empty());
    CHECK(find(r, "eigen").ok);
    CHECK_FALSE(r.passed());
}

TEST_CASE("runs are byte-reproducible", "[experiments]") {
    auto s = short_run(make_nobra(), 10.0);
    s.diagnostics = {"trajectory", "extinction", "occupation", "contraction"};
    const auto a = scratch("repro_a"), b = scratch("repro_b");
    run(s, a);
    run(s, b);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename();
        if (name.string().rfind("timing_", 0) == 0) continue;
        INFO(name);
        CHECK(slurp(entry.path()) == slurp(b / name));
        ++compared;
    }
    CHECK(compared >= 4);

    s.seed += 1;
    const auto c = scratch("repro_c");
    run(s, c);
    CHECK(slurp(a / "fig_trajectories_nobra.csv") != slurp(c / "fig_trajectories_nobra.csv"));
}

TEST_CASE("fast acceptance criteria pass", "[experiments][acceptance]") {
    AcceptanceSuite suite;
    for (int id : {1, 2, 3, 4}) {
        const auto r = suite.run(id);
        INFO(summary_line(r));
        CHECK(r.passed);
    }
}

TEST_CASE("mutated fields break the acceptance criteria", "[experiments][acceptance]") {
    AcceptanceSuite suite;
    suite.scenarios.at("ainscosta").ly_fields[0].D(0) += 1.0;
    const auto r = suite.run(1);
    INFO(summary_line(r));
    CHECK_FALSE(r.passed);

    AcceptanceSuite hull;
    hull.scenarios.at("astacoins").ly_fields[0].C(0, 1) = 0.0;
    hull.scenarios.at("astacoins").ly_fields[1].C(1, 0) = 0.0;
    CHECK_FALSE(hull.run(3).passed);
}

TEST_CASE("summary lines", "[experiments]") {
    const CriterionResult ok{1, "title", true, "detail", 0.25};
    CHECK(summary_line(ok).rfind("PASS  [1] title", 0) == 0);
    const CriterionResult bad{2, "other", false, "why", 1.0};
    CHECK(summary_line(bad).rfind("FAIL  [2] other", 0) == 0);
    AcceptanceSuite suite;
    const auto missing = suite.run(12);
    CHECK_FALSE(missing.passed);
    CHECK(missing.detail.find("no criterion") != std::string::npos);
}
