#pragma once

// Vector fields with a common zero: a type-erased field with optional
// analytic Jacobian, the Lajmanovich-Yorke SIS field, switched families,
// a sampling audit of the epidemic axioms E1-E5, convex averaging and an
// endemic-equilibrium solver.

#include "pdmp/flow.hpp"
#include "pdmp/matrixcore.hpp"
#include "pdmp/rng.hpp"

#include <json.hpp>

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pdmp {

/// Immutable vector field F: R^d -> R^d. Copies share the underlying
/// callables.
class VectorField {
public:
    using Evaluator = std::function<void(const Vector& x, Vector& out)>;
    using JacobianFn = std::function<Matrix(const Vector& x)>;

    VectorField(std::string name, Eigen::Index dim, Evaluator eval, JacobianFn jac = {},
                bool common_zero = true)
        : name_(std::move(name)),
          dim_(dim),
          eval_(std::make_shared<Evaluator>(std::move(eval))),
          jac_(jac ? std::make_shared<JacobianFn>(std::move(jac)) : nullptr),
          common_zero_(common_zero) {
        if (dim_ < 1) throw DimensionError("VectorField: dimension must be >= 1");
    }

    /// x -> A x.
    static VectorField linear(Matrix a, std::string name = "linear") {
        require_square(a, "VectorField::linear");
        const Eigen::Index d = a.rows();
        auto shared = std::make_shared<const Matrix>(std::move(a));
        return VectorField(
            std::move(name), d,
            [shared](const Vector& x, Vector& out) { out.noalias() = (*shared) * x; },
            [shared](const Vector&) { return Matrix(*shared); });
    }

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
    [[nodiscard]] bool has_common_zero() const noexcept { return common_zero_; }
    [[nodiscard]] bool has_analytic_jacobian() const noexcept { return jac_ != nullptr; }

    void evaluate(const Vector& x, Vector& out) const { (*eval_)(x, out); }

    [[nodiscard]] Vector operator()(const Vector& x) const {
        Vector out(dim_);
        evaluate(x, out);
        return out;
    }

    /// Analytic Jacobian when available, otherwise central differences.
    [[nodiscard]] Matrix jacobian(const Vector& x) const {
        if (jac_) return (*jac_)(x);
        return finite_difference_jacobian(x);
    }

    /// Central differences with step 1e-6 (1 + |x|).
    [[nodiscard]] Matrix finite_difference_jacobian(const Vector& x) const {
        const double h = 1e-6 * (1.0 + x.norm());
        Matrix j(dim_, dim_);
        Vector xp = x, xm = x, fp(dim_), fm(dim_);
        for (Eigen::Index k = 0; k < dim_; ++k) {
            xp(k) = x(k) + h;
            xm(k) = x(k) - h;
            evaluate(xp, fp);
            evaluate(xm, fm);
            j.col(k) = (fp - fm) / (2.0 * h);
            xp(k) = x(k);
            xm(k) = x(k);
        }
        return j;
    }

private:
    std::string name_;
    Eigen::Index dim_;
    std::shared_ptr<const Evaluator> eval_;
    std::shared_ptr<const JacobianFn> jac_;
    bool common_zero_;
};

// ---------------------------------------------------------------------------
// Lajmanovich-Yorke fields
// ---------------------------------------------------------------------------

/// dx_i/dt = (1 - x_i) (C x)_i - D_i x_i on the unit cube.
struct LajmanovichYorkeField {
    Matrix C;  ///< nonnegative infection rates
    Vector D;  ///< positive cure rates

    LajmanovichYorkeField(Matrix c, Vector d) : C(std::move(c)), D(std::move(d)) {
        require_square(C, "LajmanovichYorkeField");
        if (D.size() != C.rows()) {
            throw DimensionError("LajmanovichYorkeField: C is " + std::to_string(C.rows()) +
                                 "x" + std::to_string(C.rows()) + " but D has " +
                                 std::to_string(D.size()) + " entries");
        }
        if ((C.array() < 0.0).any()) {
            throw DomainError("LajmanovichYorkeField: C must be entrywise nonnegative");
        }
        if (!D.allFinite() || (D.array() <= 0.0).any()) {
            throw DomainError("LajmanovichYorkeField: D must be strictly positive");
        }
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return D.size(); }

    /// The formula without a domain check; it extends smoothly to R^d.
    void evaluate_unchecked(const Vector& x, Vector& out) const {
        out.noalias() = C * x;
        out.array() = (1.0 - x.array()) * out.array() - D.array() * x.array();
    }

    [[nodiscard]] Matrix jacobian_unchecked(const Vector& x) const {
        const Vector cx = C * x;
        Matrix j(dim(), dim());
        for (Eigen::Index i = 0; i < dim(); ++i) {
            for (Eigen::Index k = 0; k < dim(); ++k) j(i, k) = (1.0 - x(i)) * C(i, k);
            j(i, i) -= cx(i) + D(i);
        }
        return j;
    }

    /// C - diag(D), the Jacobian at the disease-free equilibrium.
    [[nodiscard]] Matrix linearization() const {
        Matrix a = C;
        a.diagonal() -= D;
        return a;
    }

    [[nodiscard]] VectorField to_field(std::string name = "lajmanovich-yorke") const {
        auto self = std::make_shared<const LajmanovichYorkeField>(*this);
        return VectorField(
            std::move(name), dim(),
            [self](const Vector& x, Vector& out) { self->evaluate_unchecked(x, out); },
            [self](const Vector& x) { return self->jacobian_unchecked(x); });
    }
};

namespace detail {
inline void require_in_cube(const LajmanovichYorkeField& f, const Vector& x, const char* who) {
    if (x.size() != f.dim()) throw DimensionError(std::string(who) + ": state dimension mismatch");
    if (!Box::unit_cube(f.dim()).contains(x, kClampTolerance)) {
        throw DomainError(std::string(who) + ": state " + format_vector(x) +
                          " is outside the unit cube");
    }
}
}  // namespace detail

inline Vector ly_eval(const LajmanovichYorkeField& field, const Vector& x) {
    detail::require_in_cube(field, x, "ly_eval");
    Vector out(field.dim());
    field.evaluate_unchecked(x, out);
    return out;
}

inline Matrix ly_jacobian(const LajmanovichYorkeField& field, const Vector& x) {
    detail::require_in_cube(field, x, "ly_jacobian");
    return field.jacobian_unchecked(x);
}

inline void to_json(nlohmann::json& j, const LajmanovichYorkeField& f) {
    nlohmann::json c = nlohmann::json::array();
    for (Eigen::Index i = 0; i < f.C.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < f.C.cols(); ++k) row.push_back(f.C(i, k));
        c.push_back(std::move(row));
    }
    j = nlohmann::json{{"C", std::move(c)}, {"D", std::vector<double>(f.D.begin(), f.D.end())}};
}

/// Row-major JSON array of arrays to a matrix.
inline Matrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw ConfigError("matrix: expected a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ConfigError("matrix: ragged rows");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
    }
    if (!m.allFinite()) throw ConfigError("matrix: non-finite entry");
    return m;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        out.push_back(std::move(row));
    }
    return out;
}

inline Vector vector_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ConfigError("vector: expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

inline LajmanovichYorkeField ly_from_json(const nlohmann::json& j) {
    if (!j.contains("C") || !j.contains("D")) {
        throw ConfigError("Lajmanovich-Yorke field: expected keys \"C\" and \"D\"");
    }
    return LajmanovichYorkeField(matrix_from_json(j.at("C")), vector_from_json(j.at("D")));
}

// ---------------------------------------------------------------------------
// Switched families
// ---------------------------------------------------------------------------

/// One field per mode, all of the same dimension, on a box domain.
class SwitchedFieldFamily {
public:
    SwitchedFieldFamily(std::vector<VectorField> fields, Box domain)
        : fields_(std::move(fields)), domain_(std::move(domain)) {
        if (fields_.empty()) throw DimensionError("SwitchedFieldFamily: no fields");
        for (const auto& f : fields_) {
            if (f.dim() != fields_.front().dim()) {
                throw DimensionError("SwitchedFieldFamily: fields of different dimensions");
            }
        }
        if (domain_.dim() != dim()) throw DimensionError("SwitchedFieldFamily: domain dimension");
    }

    static SwitchedFieldFamily from_ly(std::span<const LajmanovichYorkeField> fields) {
        std::vector<VectorField> out;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            out.push_back(fields[i].to_field("F" + std::to_string(i)));
        }
        if (out.empty()) throw DimensionError("SwitchedFieldFamily::from_ly: no fields");
        const Eigen::Index d = out.front().dim();
        return SwitchedFieldFamily(std::move(out), Box::unit_cube(d));
    }

    static SwitchedFieldFamily from_linear(std::span<const Matrix> as, Box domain) {
        std::vector<VectorField> out;
        for (std::size_t i = 0; i < as.size(); ++i) {
            out.push_back(VectorField::linear(as[i], "A" + std::to_string(i)));
        }
        return SwitchedFieldFamily(std::move(out), std::move(domain));
    }

    [[nodiscard]] std::size_t modes() const noexcept { return fields_.size(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return fields_.front().dim(); }
    [[nodiscard]] const VectorField& operator[](std::size_t i) const { return fields_.at(i); }
    [[nodiscard]] const std::vector<VectorField>& fields() const noexcept { return fields_; }
    [[nodiscard]] const Box& domain() const noexcept { return domain_; }

private:
    std::vector<VectorField> fields_;
    Box domain_;
};

/// A^i = DF^i(0) for every mode; requires F^i(0) = 0.
inline std::vector<Matrix> jacobian_at_zero(const SwitchedFieldFamily& family) {
    std::vector<Matrix> out;
    const Vector zero = Vector::Zero(family.dim());
    for (const auto& f : family.fields()) {
        const Vector f0 = f(zero);
        if (f0.norm() > 1e-9) {
            throw PreconditionError("jacobian_at_zero: field " + f.name() +
                                    " does not vanish at the origin, F(0) = " +
                                    detail::format_vector(f0));
        }
        out.push_back(f.jacobian(zero));
    }
    return out;
}

/// Pointwise convex combination sum_i w_i F^i; the Jacobian is the same
/// combination of Jacobians.
inline VectorField average_field(const SwitchedFieldFamily& family,
                                 const ProbabilityVector& weights) {
    if (static_cast<std::size_t>(weights.size()) != family.modes()) {
        throw DimensionError("average_field: " + std::to_string(weights.size()) +
                             " weights for " + std::to_string(family.modes()) + " modes");
    }
    struct Parts {
        std::vector<VectorField> fields;
        std::vector<double> w;
    };
    auto parts = std::make_shared<Parts>();
    for (std::size_t i = 0; i < family.modes(); ++i) {
        const double w = weights[static_cast<Eigen::Index>(i)];
        if (w > 0.0) {
            parts->fields.push_back(family[i]);
            parts->w.push_back(w);
        }
    }
    const Eigen::Index d = family.dim();
    auto eval = [parts, d](const Vector& x, Vector& out) {
        // Thread-safe scratch: the field object itself stays immutable.
        thread_local Vector scratch;
        scratch.resize(d);
        out.setZero(d);
        for (std::size_t i = 0; i < parts->fields.size(); ++i) {
            parts->fields[i].evaluate(x, scratch);
            out += parts->w[i] * scratch;
        }
    };
    auto jac = [parts, d](const Vector& x) {
        Matrix j = Matrix::Zero(d, d);
        for (std::size_t i = 0; i < parts->fields.size(); ++i) {
            j += parts->w[i] * parts->fields[i].jacobian(x);
        }
        return j;
    };
    return VectorField("average", d, std::move(eval), std::move(jac));
}

/// Averaging Lajmanovich-Yorke fields gives the field with averaged (C, D).
inline LajmanovichYorkeField average_ly(std::span<const LajmanovichYorkeField> fields,
                                        const ProbabilityVector& weights) {
    if (fields.empty() || static_cast<Eigen::Index>(fields.size()) != weights.size()) {
        throw DimensionError("average_ly: weight/field count mismatch");
    }
    Matrix c = Matrix::Zero(fields.front().dim(), fields.front().dim());
    Vector d = Vector::Zero(fields.front().dim());
    for (std::size_t i = 0; i < fields.size(); ++i) {
        c += weights[static_cast<Eigen::Index>(i)] * fields[i].C;
        d += weights[static_cast<Eigen::Index>(i)] * fields[i].D;
    }
    return LajmanovichYorkeField(std::move(c), std::move(d));
}

// ---------------------------------------------------------------------------
// Epidemic-axiom audit
// ---------------------------------------------------------------------------

struct AxiomResult {
    std::string axiom;
    bool passed = true;
    double worst_violation = 0.0;  ///< 0 when no violation was found
    Vector worst_point;            ///< sample realizing worst_violation
    std::size_t checked = 0;
};

struct EpidemicAudit {
    std::array<AxiomResult, 5> axioms;  ///< E1 .. E5

    [[nodiscard]] bool all_passed() const {
        for (const auto& a : axioms) {
            if (!a.passed) return false;
        }
        return true;
    }
    [[nodiscard]] const AxiomResult& operator[](std::size_t i) const { return axioms.at(i); }
};

/// Samples the unit cube and reports, for each of E1-E5, whether a violation
/// was found. A pass means "no violation found", not a proof.
///
/// E1 |F(0)| <= 1e-9; E2 F_i(x) < 0 on the face x_i = 1; E3 Jacobian
/// off-diagonals >= -1e-9; E4 Jacobian irreducible (edges |J_ij| > 1e-9) on
/// [0,1)^d; E5 lambda F(x) - F(lambda x) > 1e-12 componentwise for
/// lambda in {1.1, 1.5, 2} and x in (0, 1/lambda)^d.
inline EpidemicAudit check_epidemic(const VectorField& field, std::size_t samples,
                                    std::uint64_t seed) {
    if (samples < 1) throw PreconditionError("check_epidemic: samples must be >= 1");
    constexpr double kTol = 1e-9;
    const Eigen::Index d = field.dim();
    Rng rng(seed);
    EpidemicAudit audit;
    const char* names[] = {"E1", "E2", "E3", "E4", "E5"};
    for (std::size_t k = 0; k < 5; ++k) audit.axioms[k].axiom = names[k];

    auto record = [](AxiomResult& r, double violation, const Vector& x) {
        if (r.passed || violation > r.worst_violation) {
            r.worst_violation = std::max(r.worst_violation, violation);
            r.worst_point = x;
        }
        r.passed = false;
    };

    // E1
    {
        const Vector zero = Vector::Zero(d);
        const double n = field(zero).cwiseAbs().maxCoeff();
        audit.axioms[0].checked = 1;
        if (n > kTol) record(audit.axioms[0], n, zero);
    }

    Vector x(d), fx(d), flx(d);
    for (std::size_t s = 0; s < samples; ++s) {
        // E2: random face x_i = 1.
        for (Eigen::Index i = 0; i < d; ++i) x(i) = rng.uniform();
        const auto face = static_cast<Eigen::Index>(rng.next() % static_cast<std::uint64_t>(d));
        x(face) = 1.0;
        field.evaluate(x, fx);
        ++audit.axioms[1].checked;
        if (!(fx(face) < 0.0)) record(audit.axioms[1], fx(face) + kTol, x);

        // E3 and E4 on [0,1)^d; the first sample is the origin itself.
        for (Eigen::Index i = 0; i < d; ++i) x(i) = s == 0 ? 0.0 : rng.uniform();
        const Matrix j = field.jacobian(x);
        ++audit.axioms[2].checked;
        ++audit.axioms[3].checked;
        double worst_off = 0.0;
        for (Eigen::Index r = 0; r < d; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) {
                if (r != c) worst_off = std::min(worst_off, j(r, c));
            }
        }
        if (worst_off < -kTol) record(audit.axioms[2], -worst_off, x);
        if (d > 1 && detail::non_communicating_pair(j, kTol).first >= 0) {
            record(audit.axioms[3], 1.0, x);
        }

        // E5 at one of the three dilation factors.
        static constexpr double kLambdas[] = {1.1, 1.5, 2.0};
        const double lambda = kLambdas[s % 3];
        for (Eigen::Index i = 0; i < d; ++i) {
            double u = rng.uniform();
            while (u == 0.0) u = rng.uniform();
            x(i) = u / lambda;
        }
        field.evaluate(x, fx);
        field.evaluate(lambda * x, flx);
        ++audit.axioms[4].checked;
        const double margin = (lambda * fx - flx).minCoeff();
        if (!(margin > 1e-12)) record(audit.axioms[4], 1e-12 - margin, x);
    }
    return audit;
}

// ---------------------------------------------------------------------------
// Endemic equilibrium
// ---------------------------------------------------------------------------

/// Interior zero of an epidemic field when lambda(DF(0)) > 0, nullopt when
/// lambda(DF(0)) <= 0. The flow is integrated from 1e-3 times the Perron
/// direction until |F| < 1e-8, then polished by damped Newton.
inline std::optional<Vector> endemic_equilibrium(const VectorField& field) {
    const Eigen::Index d = field.dim();
    const Matrix a = field.jacobian(Vector::Zero(d));
    if (spectral_abscissa(a) <= 0.0) return std::nullopt;

    Vector theta;
    if (is_metzler(a) && is_irreducible(a)) {
        theta = perron_vector(a).direction;
    } else {
        theta = Vector::Ones(d).normalized();
    }
    Vector x = 1e-3 * theta;
    const Box cube = Box::unit_cube(d);
    auto rhs = [&field](const Vector& y, Vector& out) { field.evaluate(y, out); };
    Rk4Stepper stepper(d);
    Vector fx(d);
    constexpr double kStep = 1e-2;
    constexpr long kMaxSteps = 50'000'000;
    field.evaluate(x, fx);
    for (long n = 0; fx.norm() >= 1e-8; ++n) {
        if (n >= kMaxSteps) {
            throw ConvergenceError("endemic_equilibrium: flow did not settle; last state " +
                                   detail::format_vector(x));
        }
        stepper.step(rhs, x, kStep);
        clamp_into(cube, x, "endemic_equilibrium");
        field.evaluate(x, fx);
    }

    double residual = fx.norm();
    for (int it = 0; it < 100 && residual > 1e-13; ++it) {
        const Vector dx = field.jacobian(x).fullPivLu().solve(fx);
        double damping = 1.0;
        bool improved = false;
        for (int half = 0; half < 40; ++half, damping *= 0.5) {
            const Vector trial = x - damping * dx;
            if (!cube.contains(trial)) continue;
            const double r = field(trial).norm();
            if (r < residual) {
                x = trial;
                residual = r;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    if (!(residual <= 1e-10)) {
        throw ConvergenceError("endemic_equilibrium: Newton polish diverged; last iterate " +
                               detail::format_vector(x));
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(x(i) > 0.0 && x(i) < 1.0)) {
            throw ConvergenceError("endemic_equilibrium: solution on the boundary " +
                                   detail::format_vector(x));
        }
    }
    return x;
}

}  // namespace pdmp
