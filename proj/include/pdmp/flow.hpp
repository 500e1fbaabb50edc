#pragma once

// Domain boxes and the fixed-step classical Runge-Kutta scheme shared by the
// flow integrator, the PDMP engine and the equilibrium solver.

#include "pdmp/matrixcore.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

namespace pdmp {

/// Axis-aligned box, possibly unbounded above or below.
struct Box {
    Vector lower;
    Vector upper;

    static Box unit_cube(Eigen::Index d) { return {Vector::Zero(d), Vector::Ones(d)}; }
    static Box orthant(Eigen::Index d) {
        return {Vector::Zero(d), Vector::Constant(d, std::numeric_limits<double>::infinity())};
    }
    static Box whole_space(Eigen::Index d) {
        const double inf = std::numeric_limits<double>::infinity();
        return {Vector::Constant(d, -inf), Vector::Constant(d, inf)};
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return lower.size(); }

    [[nodiscard]] bool bounded() const {
        return lower.allFinite() && upper.allFinite();
    }

    [[nodiscard]] bool contains(const Vector& x, double slack = 0.0) const {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (x(i) < lower(i) - slack || x(i) > upper(i) + slack) return false;
        }
        return true;
    }

    /// Largest distance from the origin to a point of the box (infinite
    /// when unbounded).
    [[nodiscard]] double max_norm_from_origin() const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < dim(); ++i) {
            const double m = std::max(std::abs(lower(i)), std::abs(upper(i)));
            s += m * m;
        }
        return std::sqrt(s);
    }
};

inline constexpr double kClampTolerance = 1e-9;

/// Pushes components that leaked at most kClampTolerance outside the box
/// back onto its faces; larger excursions are invariance violations.
inline void clamp_into(const Box& box, Vector& x, std::string_view who) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x(i))) {
            throw InvarianceError(std::string(who) + ": non-finite state " +
                                  detail::format_vector(x));
        }
        if (x(i) < box.lower(i)) {
            if (x(i) < box.lower(i) - kClampTolerance) {
                throw InvarianceError(std::string(who) + ": state " + detail::format_vector(x) +
                                      " left the domain through the lower face of axis " +
                                      std::to_string(i));
            }
            x(i) = box.lower(i);
        } else if (x(i) > box.upper(i)) {
            if (x(i) > box.upper(i) + kClampTolerance) {
                throw InvarianceError(std::string(who) + ": state " + detail::format_vector(x) +
                                      " left the domain through the upper face of axis " +
                                      std::to_string(i));
            }
            x(i) = box.upper(i);
        }
    }
}

/// Classical RK4 with preallocated stage buffers. `Rhs` is any callable
/// `void(const Vector& x, Vector& out)`.
class Rk4Stepper {
public:
    explicit Rk4Stepper(Eigen::Index dim)
        : k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

    template <class Rhs>
    void step(const Rhs& rhs, Vector& x, double h) {
        rhs(x, k1_);
        tmp_ = x + (0.5 * h) * k1_;
        rhs(tmp_, k2_);
        tmp_ = x + (0.5 * h) * k2_;
        rhs(tmp_, k3_);
        tmp_ = x + h * k3_;
        rhs(tmp_, k4_);
        x += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

private:
    Vector k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace pdmp
