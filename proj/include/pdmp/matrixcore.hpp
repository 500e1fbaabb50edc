#pragma once

// Dense linear algebra and cone geometry used throughout the library:
// spectral abscissa, Metzler/Hurwitz/irreducibility predicates,
// stationary laws of rate matrices, Perron vectors, the Hilbert projective
// metric with Birkhoff's contraction coefficient, the part metric, and the
// closed-form bounds on the top Lyapunov exponent.

#include "pdmp/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pdmp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline void require_square(const Matrix& a, const char* who) {
    if (a.rows() != a.cols() || a.rows() < 1) {
        throw DimensionError(std::string(who) + ": expected a nonempty square matrix, got " +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    if (!a.allFinite()) {
        throw DomainError(std::string(who) + ": matrix has non-finite entries " +
                          detail::format_matrix(a));
    }
}

// ---------------------------------------------------------------------------
// Probability vectors and rate matrices
// ---------------------------------------------------------------------------

/// Nonnegative weights summing to one (within 1e-12).
class ProbabilityVector {
public:
    static constexpr double kSumTolerance = 1e-12;

    explicit ProbabilityVector(Vector weights) : w_(std::move(weights)) {
        if (w_.size() < 1) throw DimensionError("ProbabilityVector: empty weight vector");
        if (!w_.allFinite() || (w_.array() < 0.0).any()) {
            throw DomainError("ProbabilityVector: weights must be finite and nonnegative, got " +
                              detail::format_vector(w_));
        }
        if (std::abs(w_.sum() - 1.0) > kSumTolerance) {
            throw DomainError("ProbabilityVector: weights sum to " + std::to_string(w_.sum()) +
                              ", not 1");
        }
    }

    static ProbabilityVector uniform(Eigen::Index n) {
        return ProbabilityVector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
    }

    static ProbabilityVector indicator(Eigen::Index n, Eigen::Index i) {
        Vector w = Vector::Zero(n);
        w(i) = 1.0;
        return ProbabilityVector(std::move(w));
    }

    /// Normalizes a nonnegative vector with positive sum.
    static ProbabilityVector normalized(Vector v) {
        const double s = v.sum();
        if (!(s > 0.0)) throw DomainError("ProbabilityVector::normalized: nonpositive total mass");
        v /= s;
        // Rounding may leave the sum a few ulps away from 1; fold the
        // remainder into the largest entry.
        Eigen::Index k = 0;
        v.maxCoeff(&k);
        v(k) += 1.0 - v.sum();
        return ProbabilityVector(std::move(v));
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return w_.size(); }
    [[nodiscard]] double operator[](Eigen::Index i) const { return w_(i); }
    [[nodiscard]] const Vector& weights() const noexcept { return w_; }

private:
    Vector w_;
};

/// Jump intensities a_ij between modes: nonnegative off the diagonal and
/// exactly zero on it. Irreducibility is not enforced here; operations that
/// need it check it and report a non-communicating pair.
class RateMatrix {
public:
    explicit RateMatrix(Matrix a) : a_(std::move(a)) {
        require_square(a_, "RateMatrix");
        for (Eigen::Index i = 0; i < a_.rows(); ++i) {
            if (a_(i, i) != 0.0) {
                throw DomainError("RateMatrix: diagonal entry (" + std::to_string(i) + "," +
                                  std::to_string(i) + ") must be 0");
            }
            for (Eigen::Index j = 0; j < a_.cols(); ++j) {
                if (a_(i, j) < 0.0) {
                    throw DomainError("RateMatrix: negative rate at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
                }
            }
        }
    }

    /// Two or more modes, every off-diagonal rate equal to beta.
    static RateMatrix uniform(Eigen::Index modes, double beta) {
        Matrix a = Matrix::Constant(modes, modes, beta);
        a.diagonal().setZero();
        return RateMatrix(std::move(a));
    }

    [[nodiscard]] Eigen::Index modes() const noexcept { return a_.rows(); }
    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return a_(i, j); }
    [[nodiscard]] const Matrix& entries() const noexcept { return a_; }
    [[nodiscard]] double total_rate(Eigen::Index i) const { return a_.row(i).sum(); }
    [[nodiscard]] double max_total_rate() const { return a_.rowwise().sum().maxCoeff(); }

    [[nodiscard]] RateMatrix scaled(double factor) const {
        if (!(factor >= 0.0)) throw DomainError("RateMatrix::scaled: negative factor");
        return RateMatrix(a_ * factor);
    }

    /// Generator L with L_ij = a_ij (i != j) and L_ii = -sum_j a_ij.
    [[nodiscard]] Matrix generator() const {
        Matrix l = a_;
        for (Eigen::Index i = 0; i < l.rows(); ++i) l(i, i) = -a_.row(i).sum();
        return l;
    }

private:
    Matrix a_;
};

// ---------------------------------------------------------------------------
// Spectral quantities and predicates
// ---------------------------------------------------------------------------

/// Largest real part of the eigenvalues of A.
inline double spectral_abscissa(const Matrix& a) {
    require_square(a, "spectral_abscissa");
    if (a.rows() == 1) return a(0, 0);
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw ConvergenceError("spectral_abscissa: eigenvalue iteration did not converge for " +
                                   detail::format_matrix(a),
                               a);
    }
    return solver.eigenvalues().real().maxCoeff();
}

/// Largest modulus of the eigenvalues of A.
inline double spectral_radius(const Matrix& a) {
    require_square(a, "spectral_radius");
    if (a.rows() == 1) return std::abs(a(0, 0));
    Eigen::EigenSolver<Matrix> solver(a, false);
    if (solver.info() != Eigen::Success) {
        throw ConvergenceError("spectral_radius: eigenvalue iteration did not converge for " +
                                   detail::format_matrix(a),
                               a);
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool is_metzler(const Matrix& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (i != j && a(i, j) < 0.0) return false;
        }
    }
    return true;
}

inline bool is_hurwitz(const Matrix& a) { return spectral_abscissa(a) < 0.0; }

namespace detail {

/// Nodes reachable from `source` along edges i -> j with |a_ij| > threshold.
inline std::vector<bool> reachable_from(const Matrix& a, Eigen::Index source, bool transpose,
                                        double threshold = 0.0) {
    const Eigen::Index n = a.rows();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Eigen::Index> stack{source};
    seen[static_cast<std::size_t>(source)] = true;
    while (!stack.empty()) {
        const Eigen::Index i = stack.back();
        stack.pop_back();
        for (Eigen::Index j = 0; j < n; ++j) {
            const double w = transpose ? a(j, i) : a(i, j);
            if (j != i && std::abs(w) > threshold && !seen[static_cast<std::size_t>(j)]) {
                seen[static_cast<std::size_t>(j)] = true;
                stack.push_back(j);
            }
        }
    }
    return seen;
}

/// Returns a pair (i, j) such that j is not reachable from i, or nullopt-like
/// (-1, -1) when the graph is strongly connected.
inline std::pair<Eigen::Index, Eigen::Index> non_communicating_pair(const Matrix& a,
                                                                    double threshold = 0.0) {
    const auto fwd = reachable_from(a, 0, false, threshold);
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        if (!fwd[static_cast<std::size_t>(j)]) return {0, j};
    }
    const auto bwd = reachable_from(a, 0, true, threshold);
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        if (!bwd[static_cast<std::size_t>(j)]) return {j, 0};
    }
    return {-1, -1};
}

}  // namespace detail

/// Strong connectivity of the graph with an edge i -> j whenever a_ij != 0.
inline bool is_irreducible(const Matrix& a) {
    require_square(a, "is_irreducible");
    return detail::non_communicating_pair(a).first < 0;
}

inline bool is_irreducible(const RateMatrix& q) { return is_irreducible(q.entries()); }

/// Unique invariant law of the mode chain: p solves
/// sum_j (p_j a_ji - p_i a_ij) = 0 for every i.
inline ProbabilityVector stationary_distribution(const RateMatrix& q) {
    const Eigen::Index n = q.modes();
    if (n == 1) return ProbabilityVector::uniform(1);
    const auto [from, to] = detail::non_communicating_pair(q.entries());
    if (from >= 0) {
        throw PreconditionError("stationary_distribution: rate matrix is reducible; mode " +
                                std::to_string(to) + " is not reachable from mode " +
                                std::to_string(from));
    }
    // p^T L = 0 with the last balance equation replaced by sum(p) = 1.
    const Matrix lt = q.generator().transpose();
    Matrix system = lt;
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    const Eigen::FullPivLU<Matrix> lu(system);
    Vector p = lu.solve(rhs);
    // One step of iterative refinement.
    p += lu.solve(rhs - system * p);
    p = p.cwiseMax(0.0);
    return ProbabilityVector::normalized(std::move(p));
}

/// Max-norm residual of the balance equations at p.
inline double balance_residual(const RateMatrix& q, const ProbabilityVector& p) {
    return (q.generator().transpose() * p.weights()).cwiseAbs().maxCoeff();
}

struct PerronPair {
    double eigenvalue = 0.0;
    Vector direction;  ///< strictly positive, unit Euclidean norm
};

/// Perron root and eigenray of a Metzler irreducible matrix, by power
/// iteration on A + rI with r = max_i |A_ii| + 1 from the all-ones vector.
inline PerronPair perron_vector(const Matrix& a, int max_iterations = 100000) {
    require_square(a, "perron_vector");
    if (!is_metzler(a)) {
        throw PreconditionError("perron_vector: matrix is not Metzler " + detail::format_matrix(a));
    }
    if (!is_irreducible(a)) {
        throw PreconditionError("perron_vector: matrix is reducible " + detail::format_matrix(a));
    }
    const Eigen::Index n = a.rows();
    const double shift = a.diagonal().cwiseAbs().maxCoeff() + 1.0;
    const Matrix b = a + shift * Matrix::Identity(n, n);

    Vector theta = Vector::Ones(n).normalized();
    Vector next(n);
    for (int it = 0; it < max_iterations; ++it) {
        next.noalias() = b * theta;
        next.normalize();
        const double change = (next - theta).cwiseAbs().maxCoeff();
        theta.swap(next);
        if (change < 1e-12) {
            const Vector image = a * theta;
            const double lambda = theta.dot(image);
            if ((image - lambda * theta).norm() <= 1e-10 * std::max(1.0, std::abs(lambda))) {
                return {lambda, theta};
            }
        }
    }
    throw ConvergenceError("perron_vector: power iteration exceeded " +
                               std::to_string(max_iterations) + " iterations",
                           a);
}

// ---------------------------------------------------------------------------
// Cone metrics
// ---------------------------------------------------------------------------

/// Hilbert projective distance log(max_i x_i/y_i / min_i x_i/y_i) between
/// two strictly positive vectors.
inline double hilbert_metric(const Vector& x, const Vector& y) {
    if (x.size() != y.size() || x.size() == 0) {
        throw DimensionError("hilbert_metric: vectors must have the same nonzero length");
    }
    if ((x.array() <= 0.0).any() || (y.array() <= 0.0).any()) {
        throw DomainError("hilbert_metric: entries must be strictly positive");
    }
    const Eigen::ArrayXd logs = x.array().log() - y.array().log();
    return logs.maxCoeff() - logs.minCoeff();
}

/// Birkhoff contraction coefficient (1 - sqrt(phi)) / (1 + sqrt(phi)) of a
/// strictly positive matrix, phi = min over (i,j,k,l) of T_ik T_jl / (T_jk T_il).
inline double birkhoff_contraction(const Matrix& t) {
    if (t.size() == 0) throw DimensionError("birkhoff_contraction: empty matrix");
    if ((t.array() <= 0.0).any() || !t.allFinite()) {
        throw DomainError("birkhoff_contraction: entries must be finite and strictly positive");
    }
    const Eigen::Index rows = t.rows();
    const Eigen::Index cols = t.cols();
    double phi = 1.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < rows; ++j) {
            if (i == j) continue;
            for (Eigen::Index k = 0; k < cols; ++k) {
                for (Eigen::Index l = 0; l < cols; ++l) {
                    if (k == l) continue;
                    phi = std::min(phi, (t(i, k) * t(j, l)) / (t(j, k) * t(i, l)));
                }
            }
        }
    }
    const double root = std::sqrt(phi);
    return (1.0 - root) / (1.0 + root);
}

/// Birkhoff part metric: max |log x_i - log y_i| over the common support, or
/// +infinity when the supports differ.
inline double part_metric(const Vector& x, const Vector& y) {
    if (x.size() != y.size()) throw DimensionError("part_metric: length mismatch");
    if (!((x.array() >= 0.0).all() && (y.array() >= 0.0).all())) {
        throw DomainError("part_metric: vectors must be nonnegative");
    }
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const bool xin = x(i) > 0.0;
        const bool yin = y(i) > 0.0;
        if (xin != yin) return std::numeric_limits<double>::infinity();
        if (xin) worst = std::max(worst, std::abs(std::log(x(i)) - std::log(y(i))));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Closed-form bounds on the top Lyapunov exponent
// ---------------------------------------------------------------------------

namespace detail {

inline void require_family(std::span<const Matrix> as, const ProbabilityVector& p,
                           const char* who) {
    if (as.empty()) throw DimensionError(std::string(who) + ": empty matrix family");
    if (static_cast<Eigen::Index>(as.size()) != p.size()) {
        throw DimensionError(std::string(who) + ": " + std::to_string(as.size()) +
                             " matrices but " + std::to_string(p.size()) + " weights");
    }
    for (const auto& a : as) {
        require_square(a, who);
        if (a.rows() != as.front().rows()) {
            throw DimensionError(std::string(who) + ": matrices of different dimensions");
        }
    }
}

}  // namespace detail

struct GrowthRateBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// sum_i p_i lambda_min(S_i) and sum_i p_i lambda_max(S_i), S_i = (A_i + A_i^T)/2.
inline GrowthRateBounds growth_rate_bounds(std::span<const Matrix> as, const ProbabilityVector& p) {
    detail::require_family(as, p, "growth_rate_bounds");
    GrowthRateBounds out;
    for (std::size_t i = 0; i < as.size(); ++i) {
        const Matrix sym = 0.5 * (as[i] + as[i].transpose());
        const Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
        const auto& ev = solver.eigenvalues();  // ascending
        const double w = p[static_cast<Eigen::Index>(i)];
        out.lower += w * ev(0);
        out.upper += w * ev(ev.size() - 1);
    }
    return out;
}

/// (1/d) sum_i p_i Tr(A_i), a lower bound on the top exponent.
inline double trace_lower_bound(std::span<const Matrix> as, const ProbabilityVector& p,
                                Eigen::Index d) {
    detail::require_family(as, p, "trace_lower_bound");
    if (d != as.front().rows()) {
        throw DimensionError("trace_lower_bound: d = " + std::to_string(d) +
                             " but matrices are " + std::to_string(as.front().rows()) + "x" +
                             std::to_string(as.front().rows()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < as.size(); ++i) {
        s += p[static_cast<Eigen::Index>(i)] * as[i].trace();
    }
    return s / static_cast<double>(d);
}

/// Off-diagonal term in the two-dimensional Kolotilina-type estimate.
/// `Printed` uses sqrt(A12 + A21); `Classical` uses sqrt(A12 * A21), the form
/// that is exact for a single matrix with equal diagonal entries.
enum class KolotilinaVariant { Printed, Classical };

/// (1/2) sum_i p_i Tr(A_i) + sum_i p_i sqrt(offdiag_i) for a family of 2x2
/// Metzler matrices.
inline double mierczynski_bound_2d(std::span<const Matrix> as, const ProbabilityVector& p,
                                   KolotilinaVariant variant = KolotilinaVariant::Printed) {
    detail::require_family(as, p, "mierczynski_bound_2d");
    if (as.front().rows() != 2) {
        throw DimensionError("mierczynski_bound_2d: requires 2x2 matrices");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < as.size(); ++i) {
        const Matrix& a = as[i];
        if (!is_metzler(a)) {
            throw PreconditionError("mierczynski_bound_2d: matrix " + std::to_string(i) +
                                    " is not Metzler");
        }
        const double off = variant == KolotilinaVariant::Printed ? a(0, 1) + a(1, 0)
                                                                 : a(0, 1) * a(1, 0);
        s += p[static_cast<Eigen::Index>(i)] * (0.5 * a.trace() + std::sqrt(off));
    }
    return s;
}

}  // namespace pdmp
