#include "pdmp/lyapunov.hpp"
#include "pdmp/scenarios.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

using namespace pdmp;
using Catch::Matchers::WithinAbs;

namespace {

Matrix m2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

RateMatrix sym_rates(double beta) { return RateMatrix::uniform(2, beta); }

LinearSwitchedSystem single(const Matrix& a, ConeTag cone = ConeTag::FullSpace) {
    return LinearSwitchedSystem({a}, RateMatrix(Matrix::Zero(1, 1)), cone);
}

// e^A by a long Taylor series after scaling, as an oracle independent of Eigen's Pade code.
Matrix taylor_exp(const Matrix& a) {
    int squarings = 0;
    double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    while (norm > 0.1) {
        norm /= 2;
        ++squarings;
    }
    const Matrix s = a / std::pow(2.0, squarings);
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int k = 1; k < 30; ++k) {
        term = term * s / k;
        sum += term;
    }
    for (int k = 0; k < squarings; ++k) sum = sum * sum;
    return sum;
}

}  // namespace

TEST_CASE("angular drift", "[lyapunov]") {
    Vector theta(3);
    theta << 0.6, 0.0, 0.8;
    CHECK(angular_drift(Matrix::Identity(3, 3), theta).norm() <= 1e-15);

    const Matrix a = m2(-2, 1, 1, -2);
    Vector eig(2);
    eig << 1, 1;
    eig.normalize();
    CHECK(angular_drift(a, eig).norm() <= 1e-15);

    Rng rng(3);
    for (int k = 0; k < 200; ++k) {
        Matrix b(4, 4);
        Vector th(4);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) b(i, j) = rng.normal();
            th(i) = rng.normal();
        }
        th.normalize();
        CHECK(std::abs(angular_drift(b, th).dot(th)) <= 1e-12);
    }
    CHECK_THROWS_AS(angular_drift(a, 2.0 * eig), DomainError);
}

TEST_CASE("angular process on a single mode converges to the Perron direction", "[lyapunov]") {
    Matrix a(3, 3);
    a << -1.0, 2.0, 0.5, 0.3, -2.0, 1.0, 0.2, 0.7, -0.5;
    Vector theta0 = Vector::Ones(3);
    theta0.normalize();
    const auto traj = simulate_angular(single(a, ConeTag::NonnegativeOrthant), theta0, 0, 100.0, 1);
    const Vector perron = perron_vector(a).direction;
    CHECK((traj.thetas.back() - perron).norm() < 1e-6);
    for (const auto& th : traj.thetas) {
        CHECK(std::abs(th.norm() - 1.0) <= 1e-9);
        CHECK(th.minCoeff() >= -1e-9);
    }
}

TEST_CASE("angular process with zero drift stays put", "[lyapunov]") {
    Vector theta0(2);
    theta0 << 0.6, -0.8;
    const auto traj = simulate_angular(single(Matrix::Identity(2, 2)), theta0, 0, 5.0, 1);
    for (const auto& th : traj.thetas) CHECK((th - theta0).norm() <= 1e-15);
    CHECK_THAT(traj.integral.back(), WithinAbs(5.0, 1e-9));
}

TEST_CASE("one-dimensional angular process integrates the scalar rates", "[lyapunov]") {
    const LinearSwitchedSystem sys({Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0)},
                                   sym_rates(2.0));
    const auto traj = simulate_angular(sys, Vector::Ones(1), 0, 20.0, 5);
    for (const auto& th : traj.thetas) CHECK(th(0) == 1.0);
    const ModePath path = simulate_mode_chain(sys.rates(), 0, 20.0, 5);
    double exact = 0.0, last = 0.0;
    for (std::size_t k = 0; k < path.modes.size(); ++k) {
        const double end = k < path.jump_times.size() ? path.jump_times[k] : 20.0;
        exact += (path.modes[k] == 0 ? -1.0 : 1.0) * (end - last);
        last = end;
    }
    CHECK_THAT(traj.integral.back(), WithinAbs(exact, 1e-9));
}

TEST_CASE("growth rate of scalar switching is the weighted mean", "[lyapunov]") {
    const LinearSwitchedSystem sys({Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0)},
                                   sym_rates(1.0));
    const auto e = estimate_lambda_angular(sys, 200.0, 200, 0.1, 2);
    CHECK(std::abs(e.value) <= 3.0 * e.std_error);
    CHECK(e.std_error > 0.0);
}

TEST_CASE("single-mode estimates recover the spectral abscissa", "[lyapunov]") {
    Matrix a(3, 3);
    a << -1.0, 2.0, 0.5, 0.3, -2.0, 1.0, 0.2, 0.7, -0.5;
    const double exact = spectral_abscissa(a);
    const auto sys = single(a, ConeTag::NonnegativeOrthant);
    const auto ang = estimate_lambda_angular(sys, 100.0, 20, 0.1, 3);
    const auto log = estimate_lambda_lognorm(sys, 100.0, 20, 1.0, 3);
    // Replicate spread is pure roundoff here, hence the 1e-9 floor.
    CHECK(std::abs(ang.value - exact) <= 3.0 * ang.std_error + 1e-9);
    CHECK(std::abs(log.value - exact) <= 3.0 * log.std_error + 1e-9);

    Matrix d = Matrix::Zero(2, 2);
    d.diagonal() << -1.0, -2.0;
    const auto dl = estimate_lambda_lognorm(single(d), 100.0, 20, 1.0, 4);
    CHECK(std::abs(dl.value + 1.0) <= 3.0 * dl.std_error + 1e-9);
}

TEST_CASE("estimators agree on the cure example", "[lyapunov]") {
    const auto s = make_ainscosta();
    const auto lin = s.linearization();
    const auto a = estimate_lambda_angular(lin, 300.0, 40, 0.1, 9);
    const auto l = estimate_lambda_lognorm(lin, 300.0, 40, 1.0, 9);
    CHECK(a.value < 0.0);
    CHECK(a.sign_resolved());
    CHECK(l.value < 0.0);
    CHECK(l.sign_resolved());
    CHECK(std::abs(a.value - l.value) <= 3.0 * std::hypot(a.std_error, l.std_error));
    CHECK(a.estimator == EstimatorKind::Angular);
    CHECK(l.estimator == EstimatorKind::LogNorm);
}

TEST_CASE("estimators agree on every built-in at short horizon", "[lyapunov]") {
    for (const auto& s : registry()) {
        const auto lin = s.linearization();
        const auto a = estimate_lambda_angular(lin, 200.0, 20, 0.1, 10);
        const auto l = estimate_lambda_lognorm(lin, 200.0, 20, 1.0, 10);
        INFO(s.name << ": " << a.value << " vs " << l.value);
        CHECK(std::abs(a.value - l.value) <= 3.0 * std::hypot(a.std_error, l.std_error));
    }
}

TEST_CASE("estimators are deterministic", "[lyapunov]") {
    const auto lin = make_fmg3d().linearization();
    const auto a = estimate_lambda_angular(lin, 50.0, 8, 0.1, 1);
    const auto b = estimate_lambda_angular(lin, 50.0, 8, 0.1, 1);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("estimator preconditions", "[lyapunov]") {
    const auto lin = make_ainscosta().linearization();
    CHECK_THROWS_AS(estimate_lambda_angular(lin, 10.0, 0, 0.1, 1), PreconditionError);
    CHECK_THROWS_AS(estimate_lambda_angular(lin, 10.0, 5, 1.0, 1), PreconditionError);
    CHECK_THROWS_AS(estimate_lambda_lognorm(lin, 10.0, 5, 0.0, 1), PreconditionError);
    // Growth of e^{50 t} over 10 time units overflows the renormalization guard.
    CHECK_THROWS_AS(estimate_lambda_lognorm(single(Matrix::Constant(1, 1, 50.0)), 20.0, 1, 10.0, 1, 0.0),
                    DomainError);
}

TEST_CASE("linear switched systems validate the cone", "[lyapunov]") {
    CHECK_THROWS_AS(LinearSwitchedSystem({m2(0, -1, 1, 0)}, RateMatrix(Matrix::Zero(1, 1)),
                                         ConeTag::NonnegativeOrthant),
                    PreconditionError);
    CHECK_THROWS_AS(LinearSwitchedSystem({m2(0, 1, 1, 0), Matrix::Zero(3, 3)}, sym_rates(1.0)),
                    DimensionError);
}

TEST_CASE("averaged limit", "[lyapunov]") {
    CHECK_THAT(averaged_limit(make_ainscosta().linearization()).lambda, WithinAbs(-1.0, 1e-12));
    CHECK_THAT(averaged_limit(make_astacoins().linearization()).lambda, WithinAbs(33.0 / 32, 1e-12));
    const Matrix a = m2(-3, 1, 2, -1);
    CHECK_THAT(averaged_limit(single(a, ConeTag::NonnegativeOrthant)).lambda,
               WithinAbs(spectral_abscissa(a), 1e-12));
}

TEST_CASE("fast switching approaches the averaged limit", "[lyapunov]") {
    const auto s = make_ainscosta();
    const auto base = RateMatrix::uniform(2, 2.0);
    const double betas[] = {1.0, 10.0, 100.0};  // epsilon = 1, 0.1, 0.01
    const auto sweep = lambda_beta_sweep(s.jacobians(), base, betas, 200.0, 50, 4,
                                         EstimatorKind::Angular, ConeTag::NonnegativeOrthant);
    REQUIRE(sweep.size() == 3);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& p : sweep) {
        const double dist = std::abs(p.estimate.value + 1.0);
        INFO("scale " << p.beta << ": " << p.estimate.value);
        CHECK(dist <= prev);
        prev = dist;
    }
}

TEST_CASE("single-mode sweep is flat", "[lyapunov]") {
    const Matrix a = m2(-3, 1, 2, -1);
    const double betas[] = {1.0, 10.0, 100.0};
    const auto sweep = lambda_beta_sweep({a}, RateMatrix(Matrix::Zero(1, 1)), betas, 50.0, 5, 1,
                                         EstimatorKind::LogNorm);
    for (const auto& p : sweep) {
        CHECK(std::abs(p.estimate.value - spectral_abscissa(a)) <= 3.0 * p.estimate.std_error + 1e-9);
    }
    std::ostringstream os;
    write_sweep_csv(sweep, os);
    const std::string csv = os.str();
    CHECK(csv.rfind("beta,lambda_hat,stderr,T,N,seed\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("analytic bounds", "[lyapunov]") {
    const Matrix sym = m2(-3, 1, 1, -1);
    const auto b = analytic_bounds(single(sym));
    CHECK_THAT(b.symmetric_lower, WithinAbs(b.symmetric_upper - 2.0 * std::sqrt(2.0), 1e-12));
    CHECK_THAT(b.symmetric_upper, WithinAbs(spectral_abscissa(sym), 1e-12));

    const auto nobra = analytic_bounds(make_nobra().linearization());
    CHECK(nobra.mierczynski_printed.has_value());
    CHECK(nobra.mierczynski_classical.has_value());
    CHECK(nobra.trace_lower <= nobra.symmetric_upper);
    CHECK_FALSE(analytic_bounds(make_fmg3d().linearization()).mierczynski_printed.has_value());
}

TEST_CASE("bounds contain the estimates", "[lyapunov]") {
    for (const auto& s : registry()) {
        const auto lin = s.linearization();
        const auto b = analytic_bounds(lin);
        const auto e = estimate_lambda_lognorm(lin, 300.0, 30, 1.0, 6);
        const double slack = 3.0 * e.std_error;
        INFO(s.name);
        CHECK(b.symmetric_lower <= e.value + slack);
        CHECK(e.value - slack <= b.symmetric_upper);
        CHECK(b.trace_lower <= e.value + slack);
    }
}

TEST_CASE("Hurwitz hull", "[lyapunov]") {
    const auto fmg = hurwitz_hull_check(fmg3d_matrices(), 101);
    CHECK(fmg.all_hurwitz);
    CHECK(fmg.worst_lambda < 0.0);

    const auto asta = hurwitz_hull_check(make_astacoins().jacobians(), 101);
    CHECK_FALSE(asta.all_hurwitz);
    CHECK_THAT(asta.worst_t, WithinAbs(0.5, 1e-12));
    CHECK_THAT(asta.worst_lambda, WithinAbs(33.0 / 32, 1e-9));

    CHECK(hurwitz_hull_check({m2(-1, 0, 0, -2)}, 11).all_hurwitz);
    CHECK_THROWS_AS(hurwitz_hull_check(fmg3d_matrices(), 1), PreconditionError);

    // Three modes: the simplex grid has (g+1)(g+2)/2 points; the worst
    // combination of three diagonal matrices is a vertex.
    std::vector<Matrix> three = {m2(-1, 0, 0, -5), m2(-5, 0, 0, -2), m2(-3, 0, 0, -3)};
    const auto h3 = hurwitz_hull_check(three, 5);
    CHECK(h3.all_hurwitz);
    CHECK_THAT(h3.worst_lambda, WithinAbs(-1.0, 1e-12));
}

TEST_CASE("matrix exponential matches a Taylor oracle", "[lyapunov]") {
    Rng rng(13);
    for (int k = 0; k < 50; ++k) {
        Matrix a(3, 3);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) a(i, j) = rng.uniform(-3, 3);
        }
        const Matrix e = matrix_exponential(a);
        const Matrix t = taylor_exp(a);
        CHECK((e - t).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + t.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("periodic switching", "[lyapunov]") {
    const auto as = fmg3d_matrices();
    const double rho = period_switch_growth(as, 1.0);
    CHECK(rho > 1.0);
    const Matrix oracle = taylor_exp(as[1]) * taylor_exp(as[0]);
    CHECK_THAT(rho, WithinAbs(spectral_radius(oracle), 1e-9));
    CHECK_THAT(rho, WithinAbs(1.6687941486252096, 1e-9));

    const Matrix minus = -Matrix::Identity(2, 2);
    for (double period : {0.1, 1.0, 3.0}) {
        CHECK_THAT(period_switch_growth({minus, minus}, period), WithinAbs(std::exp(-2.0 * period), 1e-14));
    }

    // Lie product limit: log(rho) / (2 period) -> lambda of the average.
    const double period = 1e-4;
    for (const auto& s : {make_fmg3d(), make_astacoins(), make_ainscosta()}) {
        const auto js = s.jacobians();
        const double avg = spectral_abscissa(0.5 * (js[0] + js[1]));
        INFO(s.name);
        CHECK_THAT(std::log(period_switch_growth(js, period)) / (2.0 * period), WithinAbs(avg, 1e-3));
    }
}

TEST_CASE("lockstep lanes reproduce the sequential kernel bit for bit", "[lyapunov]") {
    const auto lin = make_fmg3d().linearization();
    const auto as = detail::fixed_matrices<3>(lin.matrices());
    Rng rng(17);
    std::vector<detail::AngularLane<3>> lanes;
    std::vector<double> sequential;
    for (int r = 0; r < 5; ++r) {
        const Vector theta0 = detail::random_initial_direction(3, lin.cone(), rng);
        const ModePath path = simulate_mode_chain(lin.rates(), r % 2, 30.0, 40, r);
        sequential.push_back(detail::angular_kernel<3>(as, lin.cone(), detail::VecN<3>(theta0), path, 3.0,
                                                       1e-3, [](double, const auto&, int, double, bool,
                                                                std::size_t) {}));
        lanes.emplace_back(as, lin.cone(), detail::VecN<3>(theta0), path, 3.0, 1e-3);
    }
    detail::run_lanes(lanes);
    for (std::size_t r = 0; r < lanes.size(); ++r) {
        CHECK(lanes[r].done());
        CHECK(lanes[r].integral() == sequential[r]);
    }
}
