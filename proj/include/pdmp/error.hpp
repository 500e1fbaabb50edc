#pragma once

#include <Eigen/Dense>

#include <sstream>
#include <stdexcept>
#include <string>

namespace pdmp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. a
/// nonpositive entry passed to the Hilbert metric).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Sizes of the inputs do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A documented precondition does not hold (reducible rate matrix,
/// non-Metzler input to a Perron routine, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// An iterative routine failed to converge. Carries the offending matrix
/// when there is one.
class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& what, Eigen::MatrixXd matrix = {})
        : Error(what), matrix_(std::move(matrix)) {}

    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }

private:
    Eigen::MatrixXd matrix_;
};

/// A simulated state left the domain box by more than the clamp tolerance.
class InvarianceError : public Error {
public:
    using Error::Error;
};

/// Invalid scenario or configuration, detected before any work is done.
class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::string format_matrix(const Eigen::MatrixXd& m) {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << (i ? ", [" : "[");
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            os << (j ? ", " : "") << m(i, j);
        }
        os << ']';
    }
    os << ']';
    return os.str();
}

inline std::string format_vector(const Eigen::VectorXd& v) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        os << (i ? ", " : "") << v(i);
    }
    os << ')';
    return os.str();
}

}  // namespace detail
}  // namespace pdmp
