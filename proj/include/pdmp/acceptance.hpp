#pragma once

// The acceptance suite: one pass/fail line per criterion, shared by the
// `verify-all` CLI command and the acceptance test binary.

#include "pdmp/report.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace pdmp {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

inline std::string summary_line(const CriterionResult& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << (r.passed ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.title << " (" << r.seconds
       << " s): " << r.detail;
    return os.str();
}

inline constexpr std::uint64_t kAcceptanceSeed = 20240611;

/// Runs criteria 1-11. Scenario constants are taken from `scenarios`, which
/// starts as the registry and may be edited (mutation checks).
class AcceptanceSuite {
public:
    explicit AcceptanceSuite(std::filesystem::path out_dir = {}) : out_dir_(std::move(out_dir)) {
        for (auto& s : registry()) scenarios[s.name] = s;
    }

    std::map<std::string, Scenario> scenarios;
    std::uint64_t seed = kAcceptanceSeed;

    static constexpr int kCount = 11;

    CriterionResult run(int id) {
        const auto start = std::chrono::steady_clock::now();
        CriterionResult r;
        r.id = id;
        try {
            switch (id) {
                case 1: eigen_golden(r); break;
                case 2: endemic_equilibria(r); break;
                case 3: hurwitz_hull(r); break;
                case 4: periodic_explosion(r); break;
                case 5: sign_reproduction(r); break;
                case 6: estimator_agreement(r); break;
                case 7: bounds_sandwich(r); break;
                case 8: averaging_limit(r); break;
                case 9: extinction_persistence(r); break;
                case 10: nobra_convergence(r); break;
                case 11: property_suites(r); break;
                default: throw PreconditionError("acceptance: no criterion " + std::to_string(id));
            }
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail += std::string(r.detail.empty() ? "" : "; ") + "error: " + e.what();
        }
        r.seconds = elapsed(start);
        return r;
    }

    std::vector<CriterionResult> run_all(std::ostream* log = nullptr) {
        std::vector<CriterionResult> out;
        for (int id = 1; id <= kCount; ++id) {
            out.push_back(run(id));
            if (log) *log << summary_line(out.back()) << std::endl;
        }
        return out;
    }

    /// Fast-path estimate cache: (scenario, beta, N, estimator) -> estimate.
    GrowthRateEstimate estimate(const std::string& name, double beta, std::size_t n,
                                EstimatorKind kind, double* seconds = nullptr) {
        const auto key = std::make_tuple(name, beta, n, kind);
        if (auto it = cache_.find(key); it != cache_.end()) {
            if (seconds) *seconds = 0.0;
            return it->second;
        }
        Scenario s = scenarios.at(name);
        s.beta = beta;
        const auto start = std::chrono::steady_clock::now();
        const LinearSwitchedSystem lin = s.linearization();
        const GrowthRateEstimate e =
            kind == EstimatorKind::Angular
                ? estimate_lambda_angular(lin, kHorizon, n, kBurnIn, seed, s.integrator)
                : estimate_lambda_lognorm(lin, kHorizon, n, 1.0, seed, kBurnIn);
        if (seconds) *seconds = elapsed(start);
        cache_.emplace(key, e);
        return e;
    }

private:
    static constexpr double kHorizon = 1000.0;
    static constexpr double kBurnIn = 0.1;

    std::filesystem::path out_dir_;
    std::map<std::tuple<std::string, double, std::size_t, EstimatorKind>, GrowthRateEstimate> cache_;

    static double elapsed(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    static std::string est(const GrowthRateEstimate& e) {
        return fmt(e.value) + "+-" + fmt(e.std_error);
    }

    static bool within_budget(double seconds, double budget, CriterionResult& r) {
        if (seconds <= budget) return true;
        r.detail += "; over the " + fmt(budget) + " s budget";
        return false;
    }

    Matrix average_jacobian(const Scenario& s) const {
        const auto as = s.jacobians();
        const ProbabilityVector p = stationary_distribution(s.rates());
        Matrix avg = Matrix::Zero(s.dim(), s.dim());
        for (std::size_t i = 0; i < as.size(); ++i) avg += p[static_cast<Eigen::Index>(i)] * as[i];
        return avg;
    }

    void eigen_golden(CriterionResult& r) {
        r.title = "eigenvalue golden numbers";
        const auto start = std::chrono::steady_clock::now();
        struct Golden {
            const char* name;
            double modes;
            double average;
        };
        const Golden goldens[] = {{"ainscosta", std::sqrt(5.0) - 2.0, -1.0},
                                  {"astacoins", -0.5, 33.0 / 32.0}};
        double worst = 0.0;
        for (const auto& g : goldens) {
            const Scenario& s = scenarios.at(g.name);
            for (const auto& a : s.jacobians()) {
                worst = std::max(worst, std::abs(spectral_abscissa(a) - g.modes));
            }
            const double avg = spectral_abscissa(average_jacobian(s));
            worst = std::max(worst, std::abs(avg - g.average));
        }
        r.passed = worst <= 1e-9;
        r.detail = "max deviation " + fmt(worst);
        r.passed = within_budget(elapsed(start), 1.0, r) && r.passed;
    }

    void endemic_equilibria(CriterionResult& r) {
        r.title = "endemic equilibria";
        const auto start = std::chrono::steady_clock::now();
        const Scenario& asta = scenarios.at("astacoins");
        const auto eq = endemic_equilibrium(
            average_field(asta.family(), stationary_distribution(asta.rates())));
        const double dev = eq ? ((*eq).array() - 33.0 / 113.0).abs().maxCoeff()
                              : std::numeric_limits<double>::infinity();
        const Scenario& nobra = scenarios.at("nobra");
        const auto fam = nobra.family();
        const Vector xs = Vector::Constant(2, 0.5);
        Vector out(2);
        double residual = 0.0;
        for (std::size_t i = 0; i < fam.modes(); ++i) {
            fam[i].evaluate(xs, out);
            residual = std::max(residual, out.cwiseAbs().maxCoeff());
        }
        r.passed = dev <= 1e-8 && residual == 0.0;
        r.detail = "astacoins |x* - 33/113| = " + fmt(dev) + ", nobra max|F^i(1/2,1/2)| = " +
                   fmt(residual);
        r.passed = within_budget(elapsed(start), 5.0, r) && r.passed;
    }

    void hurwitz_hull(CriterionResult& r) {
        r.title = "Hurwitz hull";
        const auto start = std::chrono::steady_clock::now();
        const HullCheck fmg = hurwitz_hull_check(scenarios.at("fmg3d").jacobians(), 101);
        const HullCheck asta = hurwitz_hull_check(scenarios.at("astacoins").jacobians(), 101);
        r.passed = fmg.all_hurwitz && !asta.all_hurwitz &&
                   std::abs(asta.worst_lambda - 33.0 / 32.0) <= 1e-9;
        r.detail = "fmg3d worst lambda " + fmt(fmg.worst_lambda) + ", astacoins worst lambda " +
                   fmt(asta.worst_lambda) + " at t = " + fmt(asta.worst_t);
        r.passed = within_budget(elapsed(start), 1.0, r) && r.passed;
    }

    void periodic_explosion(CriterionResult& r) {
        r.title = "periodic-switch explosion";
        const auto start = std::chrono::steady_clock::now();
        const double rho = period_switch_growth(scenarios.at("fmg3d").jacobians(), 1.0);
        r.passed = rho > 1.0 && std::abs(rho - kFmg3dMonodromyRadius) <= 1e-9;
        r.detail = "rho = " + fmt(rho) + " (frozen " + fmt(kFmg3dMonodromyRadius) + ")";
        r.passed = within_budget(elapsed(start), 1.0, r) && r.passed;
    }

    void sign_reproduction(CriterionResult& r) {
        r.title = "lambda_1 sign reproduction (N = 1000, T = 1000)";
        struct Case {
            const char* name;
            double beta;
            int sign;
        };
        const Case cases[] = {{"ainscosta", 20.0, -1},
                              {"astacoins", 20.0, 1},
                              {"fmg3d", 3.0, 1},
                              {"fmg3d", 10.0, 1},
                              {"fmg3d", 30.0, 1}};
        r.passed = true;
        std::vector<SweepPoint> fmg;
        for (const auto& c : cases) {
            double secs = 0.0;
            const GrowthRateEstimate e = estimate(c.name, c.beta, 1000, EstimatorKind::Angular, &secs);
            const bool ok = e.value * c.sign > 0.0 && e.sign_resolved(3.0);
            r.detail += std::string(r.detail.empty() ? "" : "; ") + c.name + " beta=" + fmt(c.beta) +
                        ": " + est(e) + (ok ? "" : " WRONG SIGN OR UNRESOLVED");
            r.passed = within_budget(secs, 150.0, r) && ok && r.passed;
            if (std::string(c.name) == "fmg3d") fmg.push_back({c.beta, e});
        }
        if (!out_dir_.empty()) {
            std::filesystem::create_directories(out_dir_);
            std::ofstream os(out_dir_ / "fig_lambda_beta.csv");
            write_sweep_csv(fmg, os);
        }
    }

    void estimator_agreement(CriterionResult& r) {
        r.title = "estimator cross-validation";
        r.passed = true;
        for (const auto& [name, s] : scenarios) {
            const auto a = estimate(name, s.beta, 100, EstimatorKind::Angular);
            const auto l = estimate(name, s.beta, 100, EstimatorKind::LogNorm);
            const double combined = std::sqrt(a.std_error * a.std_error + l.std_error * l.std_error);
            const bool ok = std::abs(a.value - l.value) <= 3.0 * combined;
            r.passed = r.passed && ok;
            r.detail += name + " " + est(a) + " vs " + est(l) + (ok ? "; " : " DISAGREE; ");
        }
        // One mode: no switching, so lambda_1 is the spectral abscissa. The
        // replicate spread is roundoff only, hence the 1e-9 floor.
        Matrix a(3, 3);
        a << -1.0, 2.0, 0.5, 0.3, -2.0, 1.0, 0.0, 0.7, -0.5;
        const double exact = spectral_abscissa(a);
        const LinearSwitchedSystem single({a}, RateMatrix(Matrix::Zero(1, 1)),
                                          ConeTag::NonnegativeOrthant);
        const auto e = estimate_lambda_angular(single, 100.0, 20, 0.1, seed);
        const bool ok = std::abs(e.value - exact) <= 3.0 * e.std_error + 1e-9;
        r.passed = r.passed && ok;
        r.detail += "single mode " + fmt(e.value) + " vs lambda(A) " + fmt(exact);
    }

    void bounds_sandwich(CriterionResult& r) {
        r.title = "bounds sandwich";
        r.passed = true;
        for (const auto& [name, s] : scenarios) {
            // Prefer the N = 1000 estimate when criterion 5 produced one.
            const auto key = std::make_tuple(name, s.beta, std::size_t{1000}, EstimatorKind::Angular);
            const GrowthRateEstimate e = cache_.contains(key)
                                             ? cache_.at(key)
                                             : estimate(name, s.beta, 100, EstimatorKind::Angular);
            const AnalyticBounds b = analytic_bounds(s.linearization());
            const double slack = 3.0 * e.std_error;
            const bool ok = b.symmetric_lower <= e.value + slack &&
                            e.value - slack <= b.symmetric_upper && b.trace_lower <= e.value + slack;
            r.passed = r.passed && ok;
            r.detail += name + " [" + fmt(b.symmetric_lower) + ", " + fmt(b.symmetric_upper) +
                        "] trace " + fmt(b.trace_lower) + " lambda " + fmt(e.value) +
                        (ok ? "; " : " OUTSIDE; ");
        }
    }

    void averaging_limit(CriterionResult& r) {
        r.title = "averaging limit";
        const double betas[] = {20.0, 66.0, 200.0};
        double total = 0.0;
        std::vector<double> dist;
        for (double beta : betas) {
            double secs = 0.0;
            const auto e = estimate("ainscosta", beta, 1000, EstimatorKind::Angular, &secs);
            total += secs;
            dist.push_back(std::abs(e.value + 1.0));
            r.detail += "beta=" + fmt(beta) + ": " + est(e) + "; ";
        }
        r.passed = dist[2] <= 0.15 && dist[0] >= dist[1] && dist[1] >= dist[2];
        r.detail += "distances to -1: " + fmt(dist[0]) + ", " + fmt(dist[1]) + ", " + fmt(dist[2]);
        r.passed = within_budget(total, 180.0, r) && r.passed;
    }

    std::vector<Trajectory> ensemble(const Scenario& s, double beta, double horizon,
                                     std::size_t count) const {
        Scenario b = s;
        b.beta = beta;
        const SwitchedSystem sys = b.system();
        return parallel_map(count, [&](std::size_t k) {
            return simulate(sys, s.initial_states.front(), s.initial_mode, horizon, seed,
                            s.integrator, k);
        });
    }

    static double merged_ball_mass(const std::vector<Trajectory>& trajs, std::size_t modes,
                                   double burn_in) {
        const int cells = default_cells_per_axis(trajs.front().dim);
        std::optional<OccupationHistogram> total;
        for (const auto& t : trajs) {
            auto h = occupation_measure(t, cells, modes, burn_in);
            if (total) total->merge(h);
            else total = std::move(h);
        }
        return ball_mass(*total, 0.02);
    }

    void extinction_persistence(CriterionResult& r) {
        r.title = "extinction and persistence dynamics";
        const auto start = std::chrono::steady_clock::now();
        constexpr double horizon = 1000.0;
        const Scenario& ains = scenarios.at("ainscosta");
        const auto extinct = ensemble(ains, 20.0, horizon, 20);
        double worst_slope = -std::numeric_limits<double>::infinity();
        for (const auto& t : extinct) {
            // |X_t| underflows double range late in the run; fit where it is resolvable.
            const ExtinctionFit fit = extinction_rate(resolvable_prefix(t, 1e-300), 0.5);
            worst_slope = std::max(worst_slope, fit.slope);
        }
        const double mass_extinct = merged_ball_mass(extinct, 2, 0.1 * horizon);

        const Scenario& asta = scenarios.at("astacoins");
        const auto persist = ensemble(asta, 20.0, horizon, 20);
        const double mass_persist = merged_ball_mass(persist, 2, 0.1 * horizon);
        Scenario a20 = asta;
        a20.beta = 20.0;
        const std::vector<Vector> starts = {Vector::Constant(2, 1e-3)};
        const HittingTimeSample h =
            hitting_times(a20.system(), starts, 0, 0.05, horizon, 1000, seed, asta.integrator);

        r.passed = worst_slope < 0.0 && mass_extinct > 0.9 && mass_persist < 0.05 &&
                   h.censored_count == 0;
        r.detail = "ainscosta max slope " + fmt(worst_slope) + ", ball mass " + fmt(mass_extinct) +
                   "; astacoins ball mass " + fmt(mass_persist) + ", censored " +
                   std::to_string(h.censored_count) + "/1000";
        r.passed = within_budget(elapsed(start), 180.0, r) && r.passed;
    }

    void nobra_convergence(CriterionResult& r) {
        r.title = "nobra convergence to the interior equilibrium";
        const auto start = std::chrono::steady_clock::now();
        const Scenario& s = scenarios.at("nobra");
        const Vector xs = Vector::Constant(2, 0.5);
        r.passed = true;
        for (double beta : {1.0, 10.0}) {
            const auto trajs = ensemble(s, beta, s.horizon, 20);
            int negative = 0;
            double worst = -std::numeric_limits<double>::infinity();
            for (const auto& t : trajs) {
                const ExtinctionFit fit = extinction_rate(resolvable_prefix(t, 1e-12, xs), 0.5, xs);
                negative += fit.slope < 0.0 ? 1 : 0;
                worst = std::max(worst, fit.slope);
            }
            r.passed = r.passed && negative == 20;
            r.detail += "beta=" + fmt(beta) + ": " + std::to_string(negative) +
                        "/20 negative, max slope " + fmt(worst) + "; ";
        }
        r.passed = within_budget(elapsed(start), 120.0, r) && r.passed;
    }

    void property_suites(CriterionResult& r);
};

// ---------------------------------------------------------------------------
// Property suites (criterion 11); each returns an empty string on success.
// ---------------------------------------------------------------------------

namespace properties {

/// d_H(Ax, Ay) <= tau(A) d_H(x, y) for random positive A and x, y.
inline std::string birkhoff_contraction(std::uint64_t seed, int triples = 1000) {
    Rng rng(seed, 0);
    for (int k = 0; k < triples; ++k) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(k % 3);
        Matrix a(d, d);
        Vector x(d), y(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rng.uniform(0.05, 2.0);
            x(i) = rng.uniform(0.01, 1.0);
            y(i) = rng.uniform(0.01, 1.0);
        }
        const double lhs = hilbert_metric(a * x, a * y);
        const double rhs = pdmp::birkhoff_contraction(a) * hilbert_metric(x, y);
        if (lhs > rhs + 1e-12 * (1.0 + rhs)) {
            return "triple " + std::to_string(k) + ": " + fmt(lhs) + " > " + fmt(rhs);
        }
    }
    return {};
}

/// d_H(s x, t y) = d_H(x, y) for s, t > 0.
inline std::string hilbert_invariance(std::uint64_t seed, int trials = 1000) {
    Rng rng(seed, 1);
    for (int k = 0; k < trials; ++k) {
        Vector x(3), y(3);
        for (int i = 0; i < 3; ++i) {
            x(i) = rng.uniform(0.01, 1.0);
            y(i) = rng.uniform(0.01, 1.0);
        }
        const double s = std::exp(rng.uniform(-5.0, 5.0));
        const double t = std::exp(rng.uniform(-5.0, 5.0));
        const double base = hilbert_metric(x, y);
        if (std::abs(hilbert_metric(s * x, t * y) - base) > 1e-12 * (1.0 + base)) {
            return "trial " + std::to_string(k);
        }
    }
    return {};
}

/// Pathwise part-metric nonexpansivity on synchronous pairs of the
/// two-dimensional epidemic built-ins.
inline std::string part_nonexpansive(const std::vector<Scenario>& systems, std::uint64_t seed) {
    for (const auto& s : systems) {
        const Vector x0 = Vector::Constant(s.dim(), 0.15);
        Vector y0 = Vector::Constant(s.dim(), 0.8);
        y0(0) = 0.4;
        const DecayCurve c = part_metric_contraction(s.system(), x0, y0, 50.0, 8, seed, 51, s.integrator);
        if (c.max_excess_over_start > 1e-9 || c.excluded > 0) {
            return s.name + ": excess " + fmt(c.max_excess_over_start);
        }
    }
    return {};
}

/// |Theta_t| = 1 at every recorded sample of the angular process.
inline std::string sphere_normalization(const Scenario& s, std::uint64_t seed) {
    const LinearSwitchedSystem lin = s.linearization();
    Vector theta0 = Vector::Ones(s.dim());
    theta0.normalize();
    const AngularTrajectory a = simulate_angular(lin, theta0, 0, 50.0, seed);
    double worst = 0.0;
    for (const auto& th : a.thetas) worst = std::max(worst, std::abs(th.norm() - 1.0));
    return worst <= 1e-12 ? std::string{} : "max | |theta| - 1 | = " + fmt(worst);
}

/// Global RK4 error ratio e(h) / e(h/2) in [8, 32] on a linear flow.
inline std::string rk4_order() {
    Matrix a(2, 2);
    a << -1.0, 2.0, -2.0, -1.0;
    const VectorField f = VectorField::linear(a);
    const Vector x0 = Vector::Ones(2);
    const Vector exact = matrix_exponential(a * 2.0) * x0;
    const double e1 = (integrate_flow(f, x0, 2.0, 0.1) - exact).norm();
    const double e2 = (integrate_flow(f, x0, 2.0, 0.05) - exact).norm();
    const double ratio = e1 / e2;
    return ratio >= 8.0 && ratio <= 32.0 ? std::string{} : "ratio " + fmt(ratio);
}

/// Thinning against the rate a_01(x) = a_10(x) = 1 + x with x frozen by a
/// zero field: jump counts are Poisson with mean N (1 + x) T.
inline std::string thinning_rate(std::uint64_t seed, double horizon = 50.0,
                                 std::size_t replicates = 200) {
    const VectorField zero("zero", 1, [](const Vector&, Vector& out) { out(0) = 0.0; });
    const SwitchedFieldFamily fam({zero, zero}, Box::unit_cube(1));
    const SwitchedSystem sys(fam, [](const Vector& x) {
        Matrix q(2, 2);
        q << 0.0, 1.0 + x(0), 1.0 + x(0), 0.0;
        return RateMatrix(q);
    });
    for (double x : {0.0, 0.3, 1.0}) {
        const auto counts = parallel_map(replicates, [&](std::size_t k) {
            return simulate(sys, Vector::Constant(1, x), 0, horizon, seed, {}, k).jumps.size();
        });
        double total = 0.0;
        for (auto c : counts) total += static_cast<double>(c);
        const double mean = static_cast<double>(replicates) * (1.0 + x) * horizon;
        const double z = (total - mean) / std::sqrt(mean);
        if (std::abs(z) > 3.0) return "x = " + fmt(x) + ": z = " + fmt(z);
    }
    return {};
}

/// pi Q = 0 to 1e-12 on random irreducible rate matrices.
inline std::string stationary_balance(std::uint64_t seed, int trials = 200) {
    Rng rng(seed, 2);
    for (int k = 0; k < trials; ++k) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(k % 5);
        Matrix q = Matrix::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                if (i != j) q(i, j) = rng.uniform(0.01, 10.0);
            }
        }
        const RateMatrix rates(q);
        const double res = balance_residual(rates, stationary_distribution(rates));
        if (res > 1e-12) return "trial " + std::to_string(k) + ": residual " + fmt(res);
    }
    return {};
}

}  // namespace properties

inline void AcceptanceSuite::property_suites(CriterionResult& r) {
    r.title = "property suites";
    const auto start = std::chrono::steady_clock::now();
    const std::pair<const char*, std::function<std::string()>> suites[] = {
        {"birkhoff", [&] { return properties::birkhoff_contraction(seed); }},
        {"hilbert-invariance", [&] { return properties::hilbert_invariance(seed); }},
        {"part-nonexpansive",
         [&] {
             return properties::part_nonexpansive(
                 {scenarios.at("ainscosta"), scenarios.at("astacoins"), scenarios.at("nobra")}, seed);
         }},
        {"sphere", [&] { return properties::sphere_normalization(scenarios.at("fmg3d"), seed); }},
        {"rk4-order", [] { return properties::rk4_order(); }},
        {"thinning", [&] { return properties::thinning_rate(seed); }},
        {"stationary", [&] { return properties::stationary_balance(seed); }}};
    r.passed = true;
    for (const auto& [name, fn] : suites) {
        const std::string failure = fn();
        r.passed = r.passed && failure.empty();
        r.detail += std::string(name) + (failure.empty() ? " ok" : " FAILED (" + failure + ")") + "; ";
    }
    r.passed = within_budget(elapsed(start), 30.0, r) && r.passed;
}

/// Runs the whole suite, writing `acceptance_summary.txt` (one line per
/// criterion) and fig_lambda_beta.csv into out_dir.
inline std::vector<CriterionResult> verify_all(const std::filesystem::path& out_dir,
                                               std::ostream* log = nullptr) {
    std::filesystem::create_directories(out_dir);
    AcceptanceSuite suite(out_dir);
    auto results = suite.run_all(log);
    std::ofstream os(out_dir / "acceptance_summary.txt");
    for (const auto& r : results) os << summary_line(r) << '\n';
    return results;
}

}  // namespace pdmp
