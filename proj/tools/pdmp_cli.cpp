// pdmp: command-line front end for the scenario registry.
//
// Exit status: 0 on success, 1 when a diagnostic or criterion failed,
// 2 on invalid input.

#include "pdmp/acceptance.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct ScenarioArgs {
    std::string name;
    std::string config;
    std::optional<double> beta;
    std::optional<std::uint64_t> seed;
    std::optional<double> horizon;
    std::optional<long long> replicates;
};

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
    auto* by_name = cmd->add_option("--scenario", a.name, "built-in scenario name");
    auto* by_file = cmd->add_option("--config", a.config, "JSON scenario file")->check(CLI::ExistingFile);
    by_name->excludes(by_file);
    cmd->add_option("--beta", a.beta, "switching-rate multiplier");
    cmd->add_option("--seed", a.seed, "base seed");
    cmd->add_option("--horizon", a.horizon, "simulation horizon T");
    cmd->add_option("--replicates", a.replicates, "number of replicates");
}

pdmp::Scenario load(const ScenarioArgs& a) {
    nlohmann::json j;
    if (!a.config.empty()) {
        std::ifstream is(a.config);
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::exception& e) {
            throw pdmp::ConfigError(std::string("config: ") + e.what());
        }
    } else if (!a.name.empty()) {
        j["scenario"] = a.name;
    } else {
        throw pdmp::ConfigError("one of --scenario or --config is required");
    }
    if (a.beta) j["beta"] = *a.beta;
    if (a.seed) j["seed"] = *a.seed;
    if (a.horizon) j["horizon"] = *a.horizon;
    if (a.replicates) j["replicates"] = *a.replicates;
    return pdmp::scenario_from_json(j);
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw pdmp::ConfigError("bad number in list: '" + item + "'");
        }
    }
    if (out.empty()) throw pdmp::ConfigError("empty list");
    return out;
}

int cmd_simulate(const ScenarioArgs& a, const std::string& out, const std::string& diagnostics) {
    pdmp::Scenario s = load(a);
    if (!diagnostics.empty()) {
        s.diagnostics.clear();
        std::stringstream ss(diagnostics);
        std::string item;
        while (std::getline(ss, item, ',')) s.diagnostics.push_back(item);
    }
    const pdmp::Report report = pdmp::run(s, out);
    for (const auto& d : report.diagnostics) {
        std::cout << (d.passed() ? "ok    " : "FAILED") << ' ' << d.name;
        if (!d.ok) std::cout << ": " << d.error;
        std::cout << '\n';
        for (const auto& b : d.bands) {
            std::cout << "         " << (b.passed ? "pass" : "FAIL") << " [" << pdmp::to_string(b.provenance)
                      << "] " << b.check << " (observed " << b.observed << ")\n";
        }
    }
    std::cout << "report: " << (std::filesystem::path(out) / ("report_" + s.name + ".json")).string() << "\n";
    return report.passed() ? 0 : 1;
}

int cmd_lyapunov(const ScenarioArgs& a, const std::string& estimator, std::size_t n, double t) {
    const pdmp::Scenario s = load(a);
    const pdmp::LinearSwitchedSystem lin = s.linearization();
    nlohmann::json j;
    j["scenario"] = s.name;
    j["beta"] = s.beta;
    if (estimator == "angular" || estimator == "both") {
        j["angular"] = pdmp::detail::estimate_json(
            pdmp::estimate_lambda_angular(lin, t, n, 0.1, s.seed, s.integrator));
    }
    if (estimator == "lognorm" || estimator == "both") {
        j["lognorm"] = pdmp::detail::estimate_json(
            pdmp::estimate_lambda_lognorm(lin, t, n, 1.0, s.seed, 0.1));
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_sweep(const ScenarioArgs& a, const std::string& betas_text, const std::string& estimator,
              std::size_t n, double t, const std::string& out) {
    const pdmp::Scenario s = load(a);
    const auto betas = parse_list(betas_text);
    const auto points = pdmp::lambda_beta_sweep(
        s.jacobians(), pdmp::RateMatrix(s.base_rates), betas, t, n, s.seed,
        estimator == "lognorm" ? pdmp::EstimatorKind::LogNorm : pdmp::EstimatorKind::Angular,
        s.linearization().cone(), 0.1, s.integrator);
    if (out.empty()) {
        pdmp::write_sweep_csv(points, std::cout);
    } else {
        std::filesystem::create_directories(out);
        const auto path = std::filesystem::path(out) / "fig_lambda_beta.csv";
        std::ofstream os(path);
        pdmp::write_sweep_csv(points, os);
        std::cout << path.string() << '\n';
    }
    return 0;
}

int cmd_verify(const std::string& out, const std::string& only) {
    if (only.empty()) {
        const auto results = pdmp::verify_all(out, &std::cout);
        bool ok = true;
        for (const auto& r : results) ok = ok && r.passed;
        return ok ? 0 : 1;
    }
    pdmp::AcceptanceSuite suite(out);
    bool ok = true;
    for (double id : parse_list(only)) {
        const auto r = suite.run(static_cast<int>(id));
        std::cout << pdmp::summary_line(r) << std::endl;
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomly switched vector fields: simulation, Lyapunov exponents, persistence"};
    app.require_subcommand(1);

    ScenarioArgs sim_args, lya_args, sweep_args;
    std::string sim_out = "out", sim_diag;
    auto* sim = app.add_subcommand("simulate", "run a scenario and its diagnostics");
    add_scenario_options(sim, sim_args);
    sim->add_option("--out", sim_out, "output directory");
    sim->add_option("--diagnostics", sim_diag, "comma-separated diagnostics to run");

    std::string estimator = "both";
    std::size_t lya_n = 100;
    double lya_t = 1000.0;
    auto* lya = app.add_subcommand("lyapunov", "estimate lambda_1 of the linearization");
    add_scenario_options(lya, lya_args);
    lya->add_option("--estimator", estimator)->check(CLI::IsMember({"angular", "lognorm", "both"}));
    lya->add_option("-N,--samples", lya_n, "replicates")->check(CLI::PositiveNumber);
    lya->add_option("-T,--time", lya_t, "horizon")->check(CLI::PositiveNumber);

    std::string betas = "1,3,10,30,100", sweep_est = "angular", sweep_out;
    std::size_t sweep_n = 100;
    double sweep_t = 1000.0;
    auto* sweep = app.add_subcommand("sweep", "lambda_1 against the rate multiplier beta");
    add_scenario_options(sweep, sweep_args);
    sweep->add_option("--betas", betas, "comma-separated beta values");
    sweep->add_option("--estimator", sweep_est)->check(CLI::IsMember({"angular", "lognorm"}));
    sweep->add_option("-N,--samples", sweep_n, "replicates")->check(CLI::PositiveNumber);
    sweep->add_option("-T,--time", sweep_t, "horizon")->check(CLI::PositiveNumber);
    sweep->add_option("--out", sweep_out, "directory for fig_lambda_beta.csv (stdout if omitted)");

    std::string verify_out = "verify", only;
    auto* verify = app.add_subcommand("verify-all", "run the acceptance suite");
    verify->add_option("--out", verify_out, "output directory");
    verify->add_option("--only", only, "comma-separated criterion numbers");

    auto* list = app.add_subcommand("list", "list built-in scenarios");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return cmd_simulate(sim_args, sim_out, sim_diag);
        if (*lya) return cmd_lyapunov(lya_args, estimator, lya_n, lya_t);
        if (*sweep) return cmd_sweep(sweep_args, betas, sweep_est, sweep_n, sweep_t, sweep_out);
        if (*verify) return cmd_verify(verify_out, only);
        if (*list) {
            for (const auto& s : pdmp::registry()) std::cout << s.name << "  " << s.description << '\n';
            return 0;
        }
    } catch (const pdmp::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
