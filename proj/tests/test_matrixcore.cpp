#include "pdmp/matrixcore.hpp"
#include "pdmp/rng.hpp"

#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

using namespace pdmp;
using Catch::Matchers::WithinAbs;

namespace {

Matrix m2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

Vector v2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

// Largest real part by brute force over the characteristic roots of a 2x2.
double abscissa_2x2(const Matrix& a) {
    const double tr = a.trace();
    const double det = a.determinant();
    const double disc = tr * tr / 4.0 - det;
    return disc >= 0.0 ? tr / 2.0 + std::sqrt(disc) : tr / 2.0;
}

Matrix random_metzler_irreducible(Rng& rng, Eigen::Index d) {
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            a(i, j) = i == j ? rng.uniform(-5.0, 2.0) : rng.uniform(0.05, 3.0);
        }
    }
    return a;
}

}  // namespace

TEST_CASE("spectral abscissa of the switching examples", "[matrixcore]") {
    CHECK_THAT(spectral_abscissa(m2(-4, 1, 1, 0)), WithinAbs(std::sqrt(5.0) - 2.0, 1e-12));
    CHECK_THAT(spectral_abscissa(m2(-1, 65.0 / 32, 65.0 / 32, -1)), WithinAbs(33.0 / 32, 1e-12));
    for (int d = 1; d <= 5; ++d) CHECK(spectral_abscissa(Matrix::Zero(d, d)) == 0.0);
}

TEST_CASE("spectral abscissa matches the characteristic-polynomial roots", "[matrixcore]") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        const Matrix a = m2(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
        CHECK_THAT(spectral_abscissa(a), WithinAbs(abscissa_2x2(a), 1e-10));
    }
}

TEST_CASE("spectral abscissa rejects non-square and non-finite input", "[matrixcore]") {
    CHECK_THROWS_AS(spectral_abscissa(Matrix::Zero(2, 3)), DimensionError);
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(spectral_abscissa(bad), Error);
}

TEST_CASE("Metzler and Hurwitz predicates", "[matrixcore]") {
    CHECK(is_metzler(m2(-4, 1, 1, 0)));
    CHECK_FALSE(is_metzler(m2(0, -1, 0, 0)));
    CHECK(is_metzler(m2(-5, 0, 0, 3)));

    CHECK(is_hurwitz(m2(-1, 1.0 / 16, 4, -1)));
    CHECK_FALSE(is_hurwitz(m2(-4, 1, 1, 0)));
    CHECK_FALSE(is_hurwitz(Matrix::Identity(3, 3)));
}

TEST_CASE("irreducibility follows the directed graph of nonzero entries", "[matrixcore]") {
    CHECK(is_irreducible(m2(-1, 4, 1.0 / 16, -1)));
    Matrix a0(3, 3);
    a0 << -1, 0, 0, 10, -1, 0, 0, 0, -10;
    CHECK_FALSE(is_irreducible(a0));
    CHECK(is_irreducible(Matrix::Constant(1, 1, 5.0)));
    Matrix cycle = Matrix::Zero(3, 3);
    cycle(0, 1) = cycle(1, 2) = cycle(2, 0) = 1.0;
    CHECK(is_irreducible(cycle));
    cycle(2, 0) = 0.0;
    CHECK_FALSE(is_irreducible(cycle));
}

TEST_CASE("rate matrices validate their entries", "[matrixcore]") {
    CHECK_THROWS_AS(RateMatrix(m2(1, 1, 1, 0)), DomainError);
    CHECK_THROWS_AS(RateMatrix(m2(0, -1, 1, 0)), DomainError);
    CHECK_THROWS_AS(RateMatrix(Matrix::Zero(2, 3)), DimensionError);
    const RateMatrix q = RateMatrix::uniform(3, 2.0);
    CHECK(q.total_rate(0) == 4.0);
    CHECK(q.generator().rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("probability vectors validate", "[matrixcore]") {
    CHECK_THROWS_AS(ProbabilityVector(v2(0.7, 0.7)), DomainError);
    CHECK_THROWS_AS(ProbabilityVector(v2(1.5, -0.5)), DomainError);
    CHECK(ProbabilityVector::uniform(4)[2] == 0.25);
}

TEST_CASE("stationary distributions", "[matrixcore]") {
    for (double beta : {0.1, 1.0, 20.0, 1e4}) {
        const auto p = stationary_distribution(RateMatrix(m2(0, beta, beta, 0)));
        CHECK_THAT(p[0], WithinAbs(0.5, 1e-14));
        CHECK_THAT(p[1], WithinAbs(0.5, 1e-14));
    }
    for (double t : {0.1, 0.25, 0.9}) {
        const double beta = 7.0;
        const auto p = stationary_distribution(RateMatrix(m2(0, beta * t, beta * (1 - t), 0)));
        CHECK_THAT(p[0], WithinAbs(1 - t, 1e-13));
        CHECK_THAT(p[1], WithinAbs(t, 1e-13));
    }
    Matrix cycle = Matrix::Zero(3, 3);
    cycle(0, 1) = cycle(1, 2) = cycle(2, 0) = 1.0;
    const auto p = stationary_distribution(RateMatrix(cycle));
    for (int i = 0; i < 3; ++i) CHECK_THAT(p[i], WithinAbs(1.0 / 3.0, 1e-14));
}

TEST_CASE("reducible rates name the non-communicating pair", "[matrixcore]") {
    Matrix q = Matrix::Zero(3, 3);
    q(0, 1) = q(1, 0) = 1.0;
    q(2, 0) = 1.0;
    try {
        (void)stationary_distribution(RateMatrix(q));
        FAIL("expected PreconditionError");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("mode") != std::string::npos);
    }
}

TEST_CASE("stationary distribution balance on random irreducible rates", "[matrixcore][property]") {
    Rng rng(5);
    for (int k = 0; k < 300; ++k) {
        const Eigen::Index m = 2 + k % 6;
        Matrix a = Matrix::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                if (i != j) a(i, j) = rng.uniform(0.01, 10.0);
            }
        }
        const RateMatrix q(a);
        const auto p = stationary_distribution(q);
        CHECK(balance_residual(q, p) <= 1e-12);
        CHECK_THAT(p.weights().sum(), WithinAbs(1.0, 1e-14));
        // Oracle: left null vector from a dense eigen-decomposition of Q^T.
        Eigen::EigenSolver<Matrix> es(q.generator().transpose());
        Eigen::Index best = 0;
        es.eigenvalues().cwiseAbs().minCoeff(&best);
        Vector v = es.eigenvectors().col(best).real();
        v /= v.sum();
        CHECK((v - p.weights()).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("Perron pair", "[matrixcore]") {
    const auto a = perron_vector(m2(-2, 1, 1, -2));
    CHECK_THAT(a.eigenvalue, WithinAbs(-1.0, 1e-12));
    CHECK_THAT(a.direction(0), WithinAbs(1 / std::sqrt(2.0), 1e-10));
    CHECK_THAT(a.direction(1), WithinAbs(1 / std::sqrt(2.0), 1e-10));

    const auto b = perron_vector(m2(-1, 65.0 / 32, 65.0 / 32, -1));
    CHECK_THAT(b.eigenvalue, WithinAbs(33.0 / 32, 1e-12));
    CHECK_THAT(b.direction(0), WithinAbs(1 / std::sqrt(2.0), 1e-10));
}

TEST_CASE("Perron pair matches the dense eigensolver", "[matrixcore][property]") {
    Rng rng(17);
    for (int k = 0; k < 200; ++k) {
        const Eigen::Index d = 2 + k % 4;
        const Matrix a = random_metzler_irreducible(rng, d);
        const auto pp = perron_vector(a);
        CHECK_THAT(pp.eigenvalue, WithinAbs(spectral_abscissa(a), 1e-9));
        CHECK(pp.direction.minCoeff() > 0.0);
        CHECK_THAT(pp.direction.norm(), WithinAbs(1.0, 1e-12));
        CHECK((a * pp.direction - pp.eigenvalue * pp.direction).norm() <= 1e-9);
    }
}

TEST_CASE("Perron pair preconditions", "[matrixcore]") {
    CHECK_THROWS_AS(perron_vector(m2(0, -1, 1, 0)), PreconditionError);
    CHECK_THROWS_AS(perron_vector(m2(0, 0, 1, 0)), PreconditionError);
}

TEST_CASE("Hilbert metric", "[matrixcore]") {
    const Vector x = v2(0.3, 1.7);
    CHECK(hilbert_metric(x, x) == 0.0);
    CHECK_THAT(hilbert_metric(v2(1, 2), v2(2, 1)), WithinAbs(std::log(4.0), 1e-14));
    CHECK_THAT(hilbert_metric(3.0 * x, v2(2, 1)), WithinAbs(hilbert_metric(x, v2(2, 1)), 1e-14));
    CHECK_THROWS_AS(hilbert_metric(v2(0, 1), v2(1, 1)), DomainError);
}

TEST_CASE("Hilbert metric is projectively invariant", "[matrixcore][property]") {
    Rng rng(3);
    for (int k = 0; k < 1000; ++k) {
        Vector x(4), y(4);
        for (int i = 0; i < 4; ++i) {
            x(i) = rng.uniform(0.01, 1.0);
            y(i) = rng.uniform(0.01, 1.0);
        }
        const double s = std::exp(rng.uniform(-4, 4));
        const double t = std::exp(rng.uniform(-4, 4));
        const double base = hilbert_metric(x, y);
        CHECK(std::abs(hilbert_metric(s * x, t * y) - base) <= 1e-12 * (1.0 + base));
        CHECK(hilbert_metric(y, x) == Catch::Approx(base).epsilon(1e-14));
    }
}

TEST_CASE("Birkhoff contraction coefficient", "[matrixcore]") {
    CHECK_THAT(birkhoff_contraction(Matrix::Ones(3, 3)), WithinAbs(0.0, 1e-15));
    CHECK_THAT(birkhoff_contraction(m2(2, 1, 1, 2)), WithinAbs(1.0 / 3.0, 1e-14));
    CHECK_THROWS_AS(birkhoff_contraction(m2(1, 0, 1, 1)), DomainError);
}

TEST_CASE("Birkhoff contraction inequality", "[matrixcore][property]") {
    Rng rng(23);
    const Eigen::Index dims[] = {2, 3, 5};
    for (int k = 0; k < 1000; ++k) {
        const Eigen::Index d = dims[k % 3];
        Matrix t(d, d);
        Vector x(d), y(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) t(i, j) = rng.uniform(0.01, 3.0);
            x(i) = rng.uniform(0.001, 1.0);
            y(i) = rng.uniform(0.001, 1.0);
        }
        const double tau = birkhoff_contraction(t);
        CHECK(tau >= 0.0);
        CHECK(tau < 1.0);
        CHECK(hilbert_metric(t * x, t * y) <= tau * hilbert_metric(x, y) + 1e-12);
    }
}

TEST_CASE("part metric", "[matrixcore]") {
    CHECK(part_metric(v2(0.2, 0.0), v2(0.2, 0.0)) == 0.0);
    CHECK_THAT(part_metric(v2(1, 1), v2(std::exp(1.0), 1)), WithinAbs(1.0, 1e-15));
    CHECK(std::isinf(part_metric(v2(1, 0), v2(1, 1))));
    CHECK_THROWS_AS(part_metric(v2(-1, 0), v2(1, 1)), DomainError);
}

TEST_CASE("part metric is a metric within a part", "[matrixcore][property]") {
    Rng rng(8);
    for (int k = 0; k < 500; ++k) {
        Vector x(3), y(3), z(3);
        for (int i = 0; i < 3; ++i) {
            const bool on = i != k % 3;  // shared support pattern
            x(i) = on ? rng.uniform(0.01, 1.0) : 0.0;
            y(i) = on ? rng.uniform(0.01, 1.0) : 0.0;
            z(i) = on ? rng.uniform(0.01, 1.0) : 0.0;
        }
        const double pxy = part_metric(x, y);
        CHECK(std::isfinite(pxy));
        CHECK(pxy == part_metric(y, x));
        CHECK(pxy <= part_metric(x, z) + part_metric(z, y) + 1e-12);
        CHECK(part_metric(x, x) == 0.0);
    }
}

TEST_CASE("symmetric-part growth bounds", "[matrixcore]") {
    const Matrix sym = m2(-3, 1, 1, -1);
    const auto b = growth_rate_bounds(std::vector<Matrix>{sym}, ProbabilityVector::uniform(1));
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    CHECK_THAT(b.lower, WithinAbs(es.eigenvalues()(0), 1e-12));
    CHECK_THAT(b.upper, WithinAbs(es.eigenvalues()(1), 1e-12));

    const std::vector<Matrix> cure = {m2(-4, 1, 1, 0), m2(0, 1, 1, -4)};
    const auto c = growth_rate_bounds(cure, ProbabilityVector::uniform(2));
    // Both modes are symmetric, so the upper bound is attained by each of them.
    CHECK(c.lower < std::sqrt(5.0) - 2.0);
    CHECK_THAT(c.upper, WithinAbs(std::sqrt(5.0) - 2.0, 1e-12));
    CHECK_THAT(c.lower, WithinAbs(-2.0 - std::sqrt(5.0), 1e-12));
}

TEST_CASE("trace bound", "[matrixcore]") {
    const std::vector<Matrix> traceless = {m2(-1, 3, 2, 1), m2(2, 2, 7, -2)};
    CHECK(trace_lower_bound(traceless, ProbabilityVector::uniform(2), 2) == 0.0);
    CHECK_THAT(trace_lower_bound(std::vector<Matrix>{m2(2, 0, 0, 4)}, ProbabilityVector::uniform(1), 2),
               WithinAbs(3.0, 1e-15));
    const std::vector<Matrix> cure = {m2(-4, 1, 1, 0), m2(0, 1, 1, -4)};
    CHECK_THAT(trace_lower_bound(cure, ProbabilityVector::uniform(2), 2), WithinAbs(-2.0, 1e-15));
}

TEST_CASE("Kolotilina-type lower estimates", "[matrixcore]") {
    const std::vector<Matrix> traceless = {m2(-1, 3, 2, 1), m2(2, 2, 7, -2)};
    const auto p = ProbabilityVector::uniform(2);
    CHECK(mierczynski_bound_2d(traceless, p, KolotilinaVariant::Printed) > 0.0);
    CHECK(mierczynski_bound_2d(traceless, p, KolotilinaVariant::Classical) > 0.0);

    const std::vector<Matrix> diagonal = {m2(-1, 0, 0, 3), m2(2, 0, 0, -6)};
    const double half_trace = 0.5 * (0.5 * 2.0 + 0.5 * -4.0);
    CHECK_THAT(mierczynski_bound_2d(diagonal, p, KolotilinaVariant::Printed), WithinAbs(half_trace, 1e-15));
    CHECK_THAT(mierczynski_bound_2d(diagonal, p, KolotilinaVariant::Classical), WithinAbs(half_trace, 1e-15));

    const std::vector<Matrix> swap = {m2(0, 1, 1, 0)};
    const auto one = ProbabilityVector::uniform(1);
    CHECK_THAT(mierczynski_bound_2d(swap, one, KolotilinaVariant::Printed), WithinAbs(std::sqrt(2.0), 1e-15));
    CHECK_THAT(mierczynski_bound_2d(swap, one, KolotilinaVariant::Classical), WithinAbs(1.0, 1e-15));
    CHECK_THROWS_AS(mierczynski_bound_2d(std::vector<Matrix>{m2(0, -1, 1, 0)}, one,
                                         KolotilinaVariant::Printed),
                    PreconditionError);
}
