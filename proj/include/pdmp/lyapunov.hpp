#pragma once

// The linearized switching system dY/dt = A^{J_t} Y at the common zero:
// the angular process on the sphere (intersected with the invariant cone),
// two independent estimators of the top Lyapunov exponent, closed-form
// bounds, the fast-switching limit, and periodic-switching growth.
//
// Hot loops are templated on the state dimension so that small
// systems (d <= 4) run on fixed-size Eigen types; larger d falls back to
// dynamic storage.

#include "pdmp/engine.hpp"
#include "pdmp/matrixcore.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/stats.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace pdmp {

enum class ConeTag { FullSpace, NonnegativeOrthant };

inline const char* to_string(ConeTag c) {
    return c == ConeTag::FullSpace ? "full-space" : "nonnegative-orthant";
}

/// Matrices A^i = DF^i(0) with the mode rates frozen at the origin.
class LinearSwitchedSystem {
public:
    LinearSwitchedSystem(std::vector<Matrix> as, RateMatrix q, ConeTag cone = ConeTag::FullSpace)
        : as_(std::move(as)), q_(std::move(q)), cone_(cone) {
        if (as_.empty()) throw DimensionError("LinearSwitchedSystem: no matrices");
        for (const auto& a : as_) {
            require_square(a, "LinearSwitchedSystem");
            if (a.rows() != as_.front().rows()) {
                throw DimensionError("LinearSwitchedSystem: matrices of different dimensions");
            }
            if (cone_ == ConeTag::NonnegativeOrthant && !is_metzler(a)) {
                throw PreconditionError(
                    "LinearSwitchedSystem: orthant cone requires Metzler matrices");
            }
        }
        if (static_cast<std::size_t>(q_.modes()) != as_.size()) {
            throw DimensionError("LinearSwitchedSystem: " + std::to_string(as_.size()) +
                                 " matrices but " + std::to_string(q_.modes()) + " modes");
        }
        p_ = std::make_unique<ProbabilityVector>(stationary_distribution(q_));
    }

    LinearSwitchedSystem(const LinearSwitchedSystem& o)
        : as_(o.as_), q_(o.q_), cone_(o.cone_), p_(std::make_unique<ProbabilityVector>(*o.p_)) {}
    LinearSwitchedSystem& operator=(const LinearSwitchedSystem& o) {
        if (this != &o) *this = LinearSwitchedSystem(o);
        return *this;
    }
    LinearSwitchedSystem(LinearSwitchedSystem&&) noexcept = default;
    LinearSwitchedSystem& operator=(LinearSwitchedSystem&&) noexcept = default;

    [[nodiscard]] const std::vector<Matrix>& matrices() const noexcept { return as_; }
    [[nodiscard]] const RateMatrix& rates() const noexcept { return q_; }
    [[nodiscard]] ConeTag cone() const noexcept { return cone_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return as_.front().rows(); }
    [[nodiscard]] std::size_t modes() const noexcept { return as_.size(); }
    [[nodiscard]] const ProbabilityVector& stationary() const noexcept { return *p_; }

    [[nodiscard]] LinearSwitchedSystem with_rates(RateMatrix q) const {
        return LinearSwitchedSystem(as_, std::move(q), cone_);
    }

private:
    std::vector<Matrix> as_;
    RateMatrix q_;
    ConeTag cone_;
    std::unique_ptr<ProbabilityVector> p_;
};

enum class EstimatorKind { Angular, LogNorm };

inline const char* to_string(EstimatorKind e) {
    return e == EstimatorKind::Angular ? "angular-average" : "log-norm";
}

struct GrowthRateEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double horizon = 0.0;
    std::size_t replicates = 0;
    double burn_in_fraction = 0.0;
    EstimatorKind estimator = EstimatorKind::Angular;
    std::uint64_t seed = 0;

    /// True when 0 lies outside value +- k * stderr.
    [[nodiscard]] bool sign_resolved(double k = 3.0) const {
        return std::abs(value) > k * std_error;
    }
};

// ---------------------------------------------------------------------------
// Angular process
// ---------------------------------------------------------------------------

/// G(theta) = A theta - <A theta, theta> theta, tangent to the sphere.
inline Vector angular_drift(const Matrix& a, const Vector& theta) {
    require_square(a, "angular_drift");
    if (theta.size() != a.rows()) throw DimensionError("angular_drift: dimension mismatch");
    if (std::abs(theta.norm() - 1.0) > 1e-9) {
        throw DomainError("angular_drift: theta is not a unit vector (norm " +
                          std::to_string(theta.norm()) + ")");
    }
    const Vector at = a * theta;
    return at - theta.dot(at) * theta;
}

struct AngularTrajectory {
    std::vector<double> times;
    std::vector<Vector> thetas;
    std::vector<int> modes;
    std::vector<double> integral;  ///< running integral of <A^J Theta, Theta> from 0
};

namespace detail {

template <int Dim>
using VecN = Eigen::Matrix<double, Dim, 1>;
template <int Dim>
using MatN = Eigen::Matrix<double, Dim, Dim>;

/// Calls f(std::integral_constant<int, D>) with D = d for d <= 4 and
/// Eigen::Dynamic otherwise.
template <class F>
decltype(auto) dispatch_dim(Eigen::Index d, F&& f) {
    switch (d) {
        case 1: return f(std::integral_constant<int, 1>{});
        case 2: return f(std::integral_constant<int, 2>{});
        case 3: return f(std::integral_constant<int, 3>{});
        case 4: return f(std::integral_constant<int, 4>{});
        default: return f(std::integral_constant<int, Eigen::Dynamic>{});
    }
}

inline Vector random_initial_direction(Eigen::Index d, ConeTag cone, Rng& rng) {
    Vector v(d);
    do {
        for (Eigen::Index k = 0; k < d; ++k) {
            v(k) = rng.normal();
            if (cone == ConeTag::NonnegativeOrthant) v(k) = std::abs(v(k));
        }
    } while (v.norm() == 0.0);
    return v.normalized();
}

inline int draw_mode(const ProbabilityVector& p, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size() - 1);
}

/// RK4 for dTheta/dt = G^J(Theta) with renormalization after each step and
/// the trapezoidal integral of <A^J Theta, Theta> on step endpoints.
/// Integral contributions are counted only after `count_from`.
template <int Dim, class Recorder>
double angular_kernel(const std::vector<MatN<Dim>>& as, ConeTag cone, VecN<Dim> theta,
                      const ModePath& path, double count_from, double h, Recorder&& record) {
    const Eigen::Index d = theta.size();
    VecN<Dim> k1(d), k2(d), k3(d), k4(d), tmp(d), av(d);
    double integral = 0.0;
    double t = 0.0;
    std::size_t steps = 0;

    auto drift = [&](const MatN<Dim>& a, const VecN<Dim>& th, VecN<Dim>& out) {
        av.noalias() = a * th;
        out = av - th.dot(av) * th;
    };
    auto check_cone = [&](double when) {
        if (cone == ConeTag::NonnegativeOrthant && theta.minCoeff() < -1e-9) {
            throw InvarianceError("simulate_angular: Theta left the nonnegative orthant at t = " +
                                  std::to_string(when));
        }
    };

    for (std::size_t seg = 0; seg < path.modes.size(); ++seg) {
        const int mode = path.modes[seg];
        const MatN<Dim>& a = as[static_cast<std::size_t>(mode)];
        const double seg_end = seg < path.jump_times.size() ? path.jump_times[seg] : path.horizon;
        av.noalias() = a * theta;
        double g_old = theta.dot(av);
        // Split the segment at count_from so each step lies on one side.
        double piece_end = (t < count_from && count_from < seg_end) ? count_from : seg_end;
        while (t < seg_end) {
            const double span = piece_end - t;
            const bool counted = t >= count_from;
            const auto full = static_cast<long long>(std::floor(span / h));
            const double rest = span - static_cast<double>(full) * h;
            const long long total_steps = full + (rest > 0.0 ? 1 : 0);
            for (long long n = 0; n < total_steps; ++n) {
                const double dt = n < full ? h : rest;
                // av = A theta and g_old = <A theta, theta> carry over from the previous step.
                k1 = av - g_old * theta;
                tmp = theta + (0.5 * dt) * k1;
                drift(a, tmp, k2);
                tmp = theta + (0.5 * dt) * k2;
                drift(a, tmp, k3);
                tmp = theta + dt * k3;
                drift(a, tmp, k4);
                theta += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                theta *= 1.0 / theta.norm();
                av.noalias() = a * theta;
                const double g_new = theta.dot(av);
                if (counted) integral += 0.5 * dt * (g_old + g_new);
                g_old = g_new;
                const double now = n + 1 == total_steps ? piece_end : t + static_cast<double>(n + 1) * h;
                check_cone(now);
                ++steps;
                record(now, theta, mode, integral, n + 1 == total_steps, steps);
            }
            t = piece_end;
            piece_end = seg_end;
        }
        t = seg_end;
    }
    return integral;
}

template <int Dim>
std::vector<MatN<Dim>> fixed_matrices(const std::vector<Matrix>& as) {
    std::vector<MatN<Dim>> out;
    out.reserve(as.size());
    for (const auto& a : as) out.emplace_back(a);
    return out;
}

/// One replicate of angular_kernel unrolled into a resumable state machine,
/// so that several independent replicates can be stepped in lockstep.
/// Each lane performs exactly the arithmetic of angular_kernel, hence the
/// same integral bit for bit; interleaving only hides the latency of the
/// RK4 dependency chain.
template <int Dim>
class AngularLane {
public:
    AngularLane(const std::vector<MatN<Dim>>& as, ConeTag cone, const VecN<Dim>& theta0,
                ModePath path, double count_from, double h)
        : as_(&as), cone_(cone), path_(std::move(path)), count_from_(count_from), h_(h),
          theta_(theta0), k1_(theta0.size()), k2_(theta0.size()), k3_(theta0.size()),
          k4_(theta0.size()), tmp_(theta0.size()), av_(theta0.size()) {
        begin_segment();
    }

    [[nodiscard]] bool done() const noexcept { return done_; }
    [[nodiscard]] double integral() const noexcept { return integral_; }

    void step() {
        const double dt = n_ < full_ ? h_ : rest_;
        const MatN<Dim>& a = *a_;
        k1_ = av_ - g_old_ * theta_;
        tmp_ = theta_ + (0.5 * dt) * k1_;
        drift(a, tmp_, k2_);
        tmp_ = theta_ + (0.5 * dt) * k2_;
        drift(a, tmp_, k3_);
        tmp_ = theta_ + dt * k3_;
        drift(a, tmp_, k4_);
        theta_ += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
        theta_ *= 1.0 / theta_.norm();
        av_.noalias() = a * theta_;
        const double g_new = theta_.dot(av_);
        if (counted_) integral_ += 0.5 * dt * (g_old_ + g_new);
        g_old_ = g_new;
        ++n_;
        if (cone_ == ConeTag::NonnegativeOrthant && theta_.minCoeff() < -1e-9) {
            const double now = n_ == total_ ? piece_end_ : t_ + static_cast<double>(n_) * h_;
            throw InvarianceError("simulate_angular: Theta left the nonnegative orthant at t = " +
                                  std::to_string(now));
        }
        if (n_ == total_) finish_piece();
    }

private:
    void drift(const MatN<Dim>& a, const VecN<Dim>& th, VecN<Dim>& out) {
        av_.noalias() = a * th;
        out = av_ - th.dot(av_) * th;
    }

    void begin_segment() {
        while (seg_ < path_.modes.size()) {
            a_ = &(*as_)[static_cast<std::size_t>(path_.modes[seg_])];
            seg_end_ = seg_ < path_.jump_times.size() ? path_.jump_times[seg_] : path_.horizon;
            av_.noalias() = *a_ * theta_;
            g_old_ = theta_.dot(av_);
            piece_end_ = (t_ < count_from_ && count_from_ < seg_end_) ? count_from_ : seg_end_;
            if (t_ < seg_end_ && begin_piece()) return;
            t_ = seg_end_;
            ++seg_;
        }
        done_ = true;
    }

    // Sets up the steps of [t_, piece_end_); false when the segment is exhausted.
    bool begin_piece() {
        while (t_ < seg_end_) {
            const double span = piece_end_ - t_;
            counted_ = t_ >= count_from_;
            full_ = static_cast<long long>(std::floor(span / h_));
            rest_ = span - static_cast<double>(full_) * h_;
            total_ = full_ + (rest_ > 0.0 ? 1 : 0);
            n_ = 0;
            if (total_ > 0) return true;
            t_ = piece_end_;
            piece_end_ = seg_end_;
        }
        return false;
    }

    void finish_piece() {
        t_ = piece_end_;
        piece_end_ = seg_end_;
        if (begin_piece()) return;
        t_ = seg_end_;
        ++seg_;
        begin_segment();
    }

    const std::vector<MatN<Dim>>* as_;
    ConeTag cone_;
    ModePath path_;
    double count_from_;
    double h_;
    VecN<Dim> theta_, k1_, k2_, k3_, k4_, tmp_, av_;
    const MatN<Dim>* a_ = nullptr;
    std::size_t seg_ = 0;
    double t_ = 0.0, seg_end_ = 0.0, piece_end_ = 0.0, rest_ = 0.0;
    double g_old_ = 0.0, integral_ = 0.0;
    long long full_ = 0, total_ = 0, n_ = 0;
    bool counted_ = false, done_ = false;
};

/// Replicates stepped together; four lanes hide most of the step latency.
inline constexpr std::size_t kAngularLanes = 4;

template <int Dim>
void run_lanes(std::vector<AngularLane<Dim>>& lanes) {
    std::size_t active = lanes.size();
    while (active > 0) {
        active = 0;
        for (auto& lane : lanes) {
            if (lane.done()) continue;
            lane.step();
            ++active;
        }
    }
}

}  // namespace detail

/// One path of (Theta, J) with the running log-radius integral.
inline AngularTrajectory simulate_angular(const LinearSwitchedSystem& sys, const Vector& theta0,
                                          int i0, double horizon, std::uint64_t seed,
                                          const IntegratorConfig& config = {},
                                          std::uint64_t replicate = 0) {
    config.validate();
    if (theta0.size() != sys.dim()) throw DimensionError("simulate_angular: dimension mismatch");
    if (std::abs(theta0.norm() - 1.0) > 1e-9) {
        throw DomainError("simulate_angular: theta0 must be a unit vector");
    }
    if (sys.cone() == ConeTag::NonnegativeOrthant && theta0.minCoeff() < -1e-9) {
        throw DomainError("simulate_angular: theta0 lies outside the nonnegative orthant");
    }
    if (i0 < 0 || static_cast<std::size_t>(i0) >= sys.modes()) {
        throw PreconditionError("simulate_angular: initial mode out of range");
    }
    Rng rng(seed, replicate);
    const ModePath path = detail::draw_mode_path(sys.rates(), i0, horizon, rng,
                                                 std::numeric_limits<std::size_t>::max());
    AngularTrajectory out;
    out.times.push_back(0.0);
    out.thetas.push_back(theta0);
    out.modes.push_back(i0);
    out.integral.push_back(0.0);
    std::size_t next_jump = 0;
    detail::dispatch_dim(sys.dim(), [&](auto dim_tag) {
        constexpr int Dim = decltype(dim_tag)::value;
        const auto as = detail::fixed_matrices<Dim>(sys.matrices());
        detail::angular_kernel<Dim>(
            as, sys.cone(), detail::VecN<Dim>(theta0), path, 0.0, config.step,
            [&](double t, const auto& theta, int mode, double integral, bool seg_end,
                std::size_t steps) {
                const bool at_jump =
                    seg_end && next_jump < path.jump_times.size() && t == path.jump_times[next_jump];
                if (!(seg_end || steps % config.sample_stride == 0)) return;
                out.times.push_back(t);
                out.thetas.emplace_back(theta);
                out.modes.push_back(at_jump ? path.modes[next_jump + 1] : mode);
                out.integral.push_back(integral);
                if (at_jump) ++next_jump;
            });
    });
    return out;
}

/// lambda_1 by the time average of <A^J Theta, Theta> over [T_b, T],
/// averaged over replicates. Theta_0 is uniform on the sphere (or on its
/// orthant patch) and J_0 is drawn from the stationary law.
inline GrowthRateEstimate estimate_lambda_angular(const LinearSwitchedSystem& sys, double horizon,
                                                  std::size_t replicates,
                                                  double burn_in_fraction, std::uint64_t seed,
                                                  const IntegratorConfig& config = {}) {
    config.validate();
    if (replicates < 1) throw PreconditionError("estimate_lambda_angular: replicates must be >= 1");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0) || !(horizon > 0.0)) {
        throw PreconditionError("estimate_lambda_angular: need T > burn-in >= 0");
    }
    const double burn = burn_in_fraction * horizon;
    const std::vector<double> values = detail::dispatch_dim(sys.dim(), [&](auto dim_tag) {
        constexpr int Dim = decltype(dim_tag)::value;
        const auto as = detail::fixed_matrices<Dim>(sys.matrices());
        const std::size_t blocks = (replicates + detail::kAngularLanes - 1) / detail::kAngularLanes;
        const auto per_block = parallel_map(blocks, [&](std::size_t b) {
            std::vector<detail::AngularLane<Dim>> lanes;
            lanes.reserve(detail::kAngularLanes);
            const std::size_t first = b * detail::kAngularLanes;
            const std::size_t last = std::min(replicates, first + detail::kAngularLanes);
            for (std::size_t r = first; r < last; ++r) {
                Rng rng(seed, r);
                const Vector theta0 = detail::random_initial_direction(sys.dim(), sys.cone(), rng);
                const int i0 = detail::draw_mode(sys.stationary(), rng);
                lanes.emplace_back(as, sys.cone(), detail::VecN<Dim>(theta0),
                                   detail::draw_mode_path(sys.rates(), i0, horizon, rng,
                                                          std::numeric_limits<std::size_t>::max()),
                                   burn, config.step);
            }
            detail::run_lanes(lanes);
            std::vector<double> values;
            for (const auto& lane : lanes) values.push_back(lane.integral() / (horizon - burn));
            return values;
        });
        std::vector<double> values;
        values.reserve(replicates);
        for (const auto& block : per_block) values.insert(values.end(), block.begin(), block.end());
        return values;
    });
    const RunningStats stats = reduce_stats(values);
    return {stats.mean(), stats.stderr_of_mean(), horizon, replicates,
            burn_in_fraction, EstimatorKind::Angular, seed};
}

// ---------------------------------------------------------------------------
// Log-norm estimator (exact propagation by matrix exponentials)
// ---------------------------------------------------------------------------

/// e^A by scaling and squaring with a Pade approximant; non-finite results
/// are reported as overflow.
inline Matrix matrix_exponential(const Matrix& a) {
    require_square(a, "matrix_exponential");
    Matrix e = a.exp();
    if (!e.allFinite()) {
        throw DomainError("matrix_exponential: overflow for " + detail::format_matrix(a));
    }
    return e;
}

/// lambda_1 as (1/(T - T_b)) log(|Y_T| / |Y_{T_b}|), with Y propagated
/// exactly between events by e^{A tau} and renormalized every
/// `renorm_every` time units.
inline GrowthRateEstimate estimate_lambda_lognorm(const LinearSwitchedSystem& sys, double horizon,
                                                  std::size_t replicates, double renorm_every,
                                                  std::uint64_t seed,
                                                  double burn_in_fraction = 0.1) {
    if (replicates < 1) throw PreconditionError("estimate_lambda_lognorm: replicates must be >= 1");
    if (!(renorm_every > 0.0)) throw PreconditionError("estimate_lambda_lognorm: bad cadence");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0) || !(horizon > 0.0)) {
        throw PreconditionError("estimate_lambda_lognorm: need T > burn-in >= 0");
    }
    const double burn = burn_in_fraction * horizon;
    const std::vector<double> values = detail::dispatch_dim(sys.dim(), [&](auto dim_tag) {
        constexpr int Dim = decltype(dim_tag)::value;
        using Mat = detail::MatN<Dim>;
        using Vec = detail::VecN<Dim>;
        const auto as = detail::fixed_matrices<Dim>(sys.matrices());
        return parallel_map(replicates, [&](std::size_t r) {
            Rng rng(seed, r);
            Vec y = detail::random_initial_direction(sys.dim(), sys.cone(), rng);
            const int i0 = detail::draw_mode(sys.stationary(), rng);
            const ModePath path = detail::draw_mode_path(sys.rates(), i0, horizon, rng,
                                                         std::numeric_limits<std::size_t>::max());
            double log_growth = 0.0;
            double t = 0.0;
            double next_renorm = renorm_every;
            bool burned = burn <= 0.0;
            std::size_t seg = 0;
            Mat step_matrix(sys.dim(), sys.dim());
            while (t < horizon) {
                const double seg_end =
                    seg < path.jump_times.size() ? path.jump_times[seg] : path.horizon;
                double next = std::min({seg_end, next_renorm, horizon});
                if (!burned) next = std::min(next, burn);
                const double tau = next - t;
                if (tau > 0.0) {
                    const Mat& a = as[static_cast<std::size_t>(path.modes[seg])];
                    step_matrix = (a * tau).exp();
                    y = step_matrix * y;
                }
                t = next;
                const bool at_burn = !burned && t >= burn;
                if (t >= next_renorm || at_burn || t >= horizon) {
                    const double n = y.norm();
                    if (!(n <= 1e100) || !(n > 0.0)) {
                        throw DomainError(
                            "estimate_lambda_lognorm: growth between renormalizations exceeded "
                            "1e100 (or vanished); use a shorter renormalization cadence");
                    }
                    if (burned) log_growth += std::log(n);
                    y /= n;
                    if (at_burn) burned = true;
                    while (next_renorm <= t) next_renorm += renorm_every;
                }
                if (t >= seg_end && seg < path.jump_times.size()) ++seg;
            }
            return log_growth / (horizon - burn);
        });
    });
    const RunningStats stats = reduce_stats(values);
    return {stats.mean(), stats.stderr_of_mean(), horizon, replicates,
            burn_in_fraction, EstimatorKind::LogNorm, seed};
}

// ---------------------------------------------------------------------------
// Limits, sweeps, bounds
// ---------------------------------------------------------------------------

struct AveragedLimit {
    double lambda = 0.0;
    Vector direction;  ///< Perron direction of A^p
};

/// lambda(sum_i p_i A^i), the limit of lambda_1 under rates a / eps as eps -> 0,
/// for a Metzler irreducible average.
inline AveragedLimit averaged_limit(const LinearSwitchedSystem& sys) {
    Matrix ap = Matrix::Zero(sys.dim(), sys.dim());
    for (std::size_t i = 0; i < sys.modes(); ++i) {
        ap += sys.stationary()[static_cast<Eigen::Index>(i)] * sys.matrices()[i];
    }
    if (!is_metzler(ap) || !is_irreducible(ap)) {
        throw PreconditionError(
            "averaged_limit: the averaged matrix is not Metzler irreducible; no closed-form "
            "limit is available, estimate lambda_1 at small eps with the Monte-Carlo estimators");
    }
    const PerronPair pp = perron_vector(ap);
    return {pp.eigenvalue, pp.direction};
}

struct SweepPoint {
    double beta = 0.0;
    GrowthRateEstimate estimate;
};

/// lambda_1 estimates for rates beta * base_rates, same (T, N, seed) at each beta.
inline std::vector<SweepPoint> lambda_beta_sweep(const std::vector<Matrix>& as,
                                                 const RateMatrix& base_rates,
                                                 std::span<const double> betas, double horizon,
                                                 std::size_t replicates, std::uint64_t seed,
                                                 EstimatorKind estimator = EstimatorKind::Angular,
                                                 ConeTag cone = ConeTag::FullSpace,
                                                 double burn_in_fraction = 0.1,
                                                 const IntegratorConfig& config = {}) {
    std::vector<SweepPoint> out;
    for (double beta : betas) {
        if (!(beta > 0.0)) throw PreconditionError("lambda_beta_sweep: betas must be positive");
        const LinearSwitchedSystem sys(as, base_rates.scaled(beta), cone);
        const GrowthRateEstimate est =
            estimator == EstimatorKind::Angular
                ? estimate_lambda_angular(sys, horizon, replicates, burn_in_fraction, seed, config)
                : estimate_lambda_lognorm(sys, horizon, replicates, 1.0, seed, burn_in_fraction);
        out.push_back({beta, est});
    }
    return out;
}

/// CSV `beta,lambda_hat,stderr,T,N,seed`.
inline void write_sweep_csv(std::span<const SweepPoint> points, std::ostream& os) {
    const auto old = os.precision(17);
    os << "beta,lambda_hat,stderr,T,N,seed\n";
    for (const auto& p : points) {
        os << p.beta << ',' << p.estimate.value << ',' << p.estimate.std_error << ','
           << p.estimate.horizon << ',' << p.estimate.replicates << ',' << p.estimate.seed << '\n';
    }
    os.precision(old);
}

struct AnalyticBounds {
    double symmetric_lower = 0.0;
    double symmetric_upper = 0.0;
    double trace_lower = 0.0;
    std::optional<double> mierczynski_printed;    ///< 2-D Metzler families only
    std::optional<double> mierczynski_classical;  ///< 2-D Metzler families only
};

inline AnalyticBounds analytic_bounds(const LinearSwitchedSystem& sys) {
    const auto& as = sys.matrices();
    const auto& p = sys.stationary();
    const GrowthRateBounds sym = growth_rate_bounds(as, p);
    AnalyticBounds out{sym.lower, sym.upper, trace_lower_bound(as, p, sys.dim()), {}, {}};
    bool metzler = true;
    for (const auto& a : as) metzler = metzler && is_metzler(a);
    if (sys.dim() == 2 && metzler) {
        out.mierczynski_printed = mierczynski_bound_2d(as, p, KolotilinaVariant::Printed);
        out.mierczynski_classical = mierczynski_bound_2d(as, p, KolotilinaVariant::Classical);
    }
    return out;
}

struct HullCheck {
    bool all_hurwitz = true;
    std::vector<double> worst_weights;  ///< convex weights realizing worst_lambda
    double worst_t = 0.0;               ///< weight of mode 1 (pairwise reading)
    double worst_lambda = 0.0;
};

/// Scans lambda(sum_i w_i A^i) over the uniform simplex grid with `grid`
/// points per edge (for two modes: t = k / (grid - 1)).
inline HullCheck hurwitz_hull_check(const std::vector<Matrix>& as, int grid) {
    if (grid < 2) throw PreconditionError("hurwitz_hull_check: grid must be >= 2");
    if (as.empty()) throw DimensionError("hurwitz_hull_check: no matrices");
    const std::size_t m = as.size();
    const int parts = grid - 1;
    HullCheck out;
    out.worst_lambda = -std::numeric_limits<double>::infinity();
    std::vector<int> counts(m, 0);
    auto visit = [&] {
        Matrix comb = Matrix::Zero(as.front().rows(), as.front().cols());
        std::vector<double> w(m);
        for (std::size_t i = 0; i < m; ++i) {
            w[i] = static_cast<double>(counts[i]) / parts;
            comb += w[i] * as[i];
        }
        const double lambda = spectral_abscissa(comb);
        if (lambda >= 0.0) out.all_hurwitz = false;
        if (lambda > out.worst_lambda) {
            out.worst_lambda = lambda;
            out.worst_weights = w;
            out.worst_t = m > 1 ? w[1] : 0.0;
        }
    };
    // Enumerate compositions of `parts` into m nonnegative integers.
    auto fill = [&](auto&& self, std::size_t index, int remaining) -> void {
        if (index + 1 == m) {
            counts[index] = remaining;
            visit();
            return;
        }
        for (int c = remaining; c >= 0; --c) {
            counts[index] = c;
            self(self, index + 1, remaining - c);
        }
    };
    fill(fill, 0, parts);
    return out;
}

/// Spectral radius of e^{A^1 period} e^{A^0 period}; growth under periodic
/// switching iff the result exceeds 1.
inline double period_switch_growth(const std::vector<Matrix>& as, double period) {
    if (as.size() != 2) throw PreconditionError("period_switch_growth: requires two modes");
    if (!(period > 0.0)) throw PreconditionError("period_switch_growth: period must be positive");
    const Matrix monodromy =
        matrix_exponential(as[1] * period) * matrix_exponential(as[0] * period);
    if (!monodromy.allFinite()) throw DomainError("period_switch_growth: monodromy overflow");
    return spectral_radius(monodromy);
}

}  // namespace pdmp
