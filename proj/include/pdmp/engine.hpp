#pragma once

// The PDMP simulator Z = (X, I): deterministic flow of F^{I_t} between jumps,
// jump clocks drawn exactly (constant rates) or by thinning against a
// constant majorant (state-dependent rates), plus the autonomous mode chain
// and fixed-step flow integration.

#include "pdmp/flow.hpp"
#include "pdmp/matrixcore.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/vectorfields.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace pdmp {

struct IntegratorConfig {
    double step = 1e-3;                ///< RK4 step h
    std::size_t sample_stride = 10;    ///< record every k-th step
    std::size_t max_jumps = 50'000'000;

    void validate() const {
        if (!(step > 0.0) || !std::isfinite(step)) {
            throw ConfigError("IntegratorConfig: step must be positive and finite");
        }
        if (sample_stride == 0) throw ConfigError("IntegratorConfig: sample_stride must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Deterministic flow
// ---------------------------------------------------------------------------

namespace detail {

/// Advances x along `field` for `duration` with steps of size h (the last
/// one shortened to land exactly), clamping into `box` after every step.
/// on_step(elapsed, x, last) is called after each step; returning true stops
/// the integration early and the function returns the elapsed time.
template <class OnStep>
double flow_for(const VectorField& field, Vector& x, double duration, double h, const Box& box,
                Rk4Stepper& stepper, OnStep&& on_step) {
    auto rhs = [&field](const Vector& y, Vector& out) { field.evaluate(y, out); };
    if (duration <= 0.0) return 0.0;
    const auto full = static_cast<long long>(std::floor(duration / h));
    for (long long n = 1; n <= full; ++n) {
        stepper.step(rhs, x, h);
        clamp_into(box, x, field.name());
        const double elapsed = static_cast<double>(n) * h;
        const bool last = elapsed >= duration;
        if (on_step(last ? duration : elapsed, x, last)) return last ? duration : elapsed;
    }
    const double rest = duration - static_cast<double>(full) * h;
    if (rest > 0.0) {
        stepper.step(rhs, x, rest);
        clamp_into(box, x, field.name());
        on_step(duration, x, true);
    }
    return duration;
}

}  // namespace detail

/// Psi_t(x0) by classical RK4 with fixed step h.
inline Vector integrate_flow(const VectorField& field, const Vector& x0, double t, double h,
                             const Box& box) {
    if (!(t >= 0.0)) throw PreconditionError("integrate_flow: negative duration");
    if (!(h > 0.0)) throw PreconditionError("integrate_flow: step must be positive");
    if (x0.size() != field.dim()) throw DimensionError("integrate_flow: state dimension mismatch");
    Vector x = x0;
    Rk4Stepper stepper(field.dim());
    detail::flow_for(field, x, t, h, box, stepper, [](double, const Vector&, bool) { return false; });
    return x;
}

inline Vector integrate_flow(const VectorField& field, const Vector& x0, double t, double h) {
    return integrate_flow(field, x0, t, h, Box::whole_space(field.dim()));
}

// ---------------------------------------------------------------------------
// Mode chain
// ---------------------------------------------------------------------------

/// Piecewise-constant path of the mode chain on [0, horizon].
struct ModePath {
    std::vector<double> jump_times;  ///< increasing, all < horizon
    std::vector<int> modes;          ///< modes[k] holds on [jump_times[k-1], jump_times[k])
    double horizon = 0.0;

    [[nodiscard]] std::size_t jumps() const noexcept { return jump_times.size(); }

    /// Fraction of [0, horizon] spent in each mode.
    [[nodiscard]] std::vector<double> occupation_fractions(std::size_t mode_count) const {
        std::vector<double> out(mode_count, 0.0);
        double t = 0.0;
        for (std::size_t k = 0; k < modes.size(); ++k) {
            const double end = k < jump_times.size() ? jump_times[k] : horizon;
            out[static_cast<std::size_t>(modes[k])] += end - t;
            t = end;
        }
        for (auto& v : out) v /= horizon;
        return out;
    }

    /// Completed holding times (excluding the one censored at the horizon),
    /// grouped by mode.
    [[nodiscard]] std::vector<std::vector<double>> holding_times(std::size_t mode_count) const {
        std::vector<std::vector<double>> out(mode_count);
        double t = 0.0;
        for (std::size_t k = 0; k < jump_times.size(); ++k) {
            out[static_cast<std::size_t>(modes[k])].push_back(jump_times[k] - t);
            t = jump_times[k];
        }
        return out;
    }
};

namespace detail {

/// Draws j with probability row(j) / total.
inline int draw_target(const Matrix& rates, Eigen::Index from, double total, Rng& rng) {
    const double u = rng.uniform() * total;
    double acc = 0.0;
    Eigen::Index last = -1;
    for (Eigen::Index j = 0; j < rates.cols(); ++j) {
        if (j == from || rates(from, j) <= 0.0) continue;
        acc += rates(from, j);
        last = j;
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(last);
}

inline ModePath draw_mode_path(const RateMatrix& q, int i0, double horizon, Rng& rng,
                               std::size_t max_jumps) {
    ModePath path;
    path.horizon = horizon;
    path.modes.push_back(i0);
    double t = 0.0;
    int i = i0;
    while (path.jump_times.size() < max_jumps) {
        const double total = q.total_rate(i);
        if (total <= 0.0) break;
        t += rng.exponential(total);
        if (t >= horizon) break;
        i = draw_target(q.entries(), i, total, rng);
        path.jump_times.push_back(t);
        path.modes.push_back(i);
    }
    return path;
}

}  // namespace detail

/// Mode chain J with constant rates: holding time in i is Exponential with
/// rate sum_j a_ij, next mode j with probability a_ij / sum_k a_ik.
inline ModePath simulate_mode_chain(const RateMatrix& q, int i0, double horizon,
                                    std::uint64_t seed, std::uint64_t replicate = 0) {
    if (i0 < 0 || i0 >= q.modes()) throw PreconditionError("simulate_mode_chain: bad initial mode");
    if (!(horizon >= 0.0)) throw PreconditionError("simulate_mode_chain: negative horizon");
    if (q.modes() > 1) {
        for (Eigen::Index i = 0; i < q.modes(); ++i) {
            if (q.total_rate(i) <= 0.0) {
                throw PreconditionError("simulate_mode_chain: mode " + std::to_string(i) +
                                        " is absorbing (zero row)");
            }
        }
        if (!is_irreducible(q)) throw PreconditionError("simulate_mode_chain: reducible rates");
    }
    Rng rng(seed, replicate);
    return detail::draw_mode_path(q, i0, horizon, rng, std::numeric_limits<std::size_t>::max());
}

// ---------------------------------------------------------------------------
// Switched systems and trajectories
// ---------------------------------------------------------------------------

/// x -> rate matrix, continuous on the domain.
using RateFunction = std::function<RateMatrix(const Vector& x)>;

class SwitchedSystem {
public:
    static constexpr double kSafetyFactor = 1.1;

    SwitchedSystem(SwitchedFieldFamily family, RateMatrix rates)
        : family_(std::move(family)), rates_(std::move(rates)) {
        const auto& q = std::get<RateMatrix>(rates_);
        if (static_cast<std::size_t>(q.modes()) != family_.modes()) {
            throw DimensionError("SwitchedSystem: rate matrix has " + std::to_string(q.modes()) +
                                 " modes, family has " + std::to_string(family_.modes()));
        }
        if (!is_irreducible(q)) {
            const auto [a, b] = detail::non_communicating_pair(q.entries());
            throw PreconditionError("SwitchedSystem: constant rates are reducible; mode " +
                                    std::to_string(b) + " is unreachable from mode " +
                                    std::to_string(a));
        }
        majorant_ = q.max_total_rate();
    }

    /// State-dependent rates. The domain must be bounded; the thinning
    /// majorant is 1.1 times the largest total rate over a grid of the box
    /// with at most 32^3 points.
    SwitchedSystem(SwitchedFieldFamily family, RateFunction rates)
        : family_(std::move(family)), rates_(std::move(rates)) {
        if (!family_.domain().bounded()) {
            throw PreconditionError("SwitchedSystem: state-dependent rates need a bounded domain");
        }
        majorant_ = kSafetyFactor * grid_max_total_rate();
        if (!(majorant_ > 0.0) || !std::isfinite(majorant_)) {
            throw PreconditionError("SwitchedSystem: rate function has no positive finite bound");
        }
    }

    [[nodiscard]] const SwitchedFieldFamily& family() const noexcept { return family_; }
    [[nodiscard]] bool constant_rates() const noexcept {
        return std::holds_alternative<RateMatrix>(rates_);
    }
    [[nodiscard]] const RateMatrix& rate_matrix() const { return std::get<RateMatrix>(rates_); }
    [[nodiscard]] RateMatrix rates_at(const Vector& x) const {
        if (constant_rates()) return rate_matrix();
        return std::get<RateFunction>(rates_)(x);
    }
    /// Constant-rate case: max total rate. State-dependent case: thinning bound.
    [[nodiscard]] double majorant() const noexcept { return majorant_; }
    [[nodiscard]] std::size_t modes() const noexcept { return family_.modes(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return family_.dim(); }

private:
    double grid_max_total_rate() const {
        const Box& box = family_.domain();
        const Eigen::Index d = box.dim();
        const int per_axis =
            d <= 3 ? 32
                   : std::max(2, static_cast<int>(std::floor(std::pow(32768.0, 1.0 / static_cast<double>(d)))));
        const auto& fn = std::get<RateFunction>(rates_);
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        Vector x(d);
        double best = 0.0;
        while (true) {
            for (Eigen::Index k = 0; k < d; ++k) {
                const double u = static_cast<double>(idx[static_cast<std::size_t>(k)]) / (per_axis - 1);
                x(k) = box.lower(k) + u * (box.upper(k) - box.lower(k));
            }
            const RateMatrix q = fn(x);
            if (static_cast<std::size_t>(q.modes()) != family_.modes()) {
                throw DimensionError("SwitchedSystem: rate function returned wrong mode count");
            }
            best = std::max(best, q.max_total_rate());
            Eigen::Index k = 0;
            while (k < d && ++idx[static_cast<std::size_t>(k)] == per_axis) {
                idx[static_cast<std::size_t>(k)] = 0;
                ++k;
            }
            if (k == d) break;
        }
        return best;
    }

    SwitchedFieldFamily family_;
    std::variant<RateMatrix, RateFunction> rates_;
    double majorant_ = 0.0;
};

struct JumpEvent {
    double time = 0.0;
    int from = 0;
    int to = 0;
    std::size_t sample_index = 0;  ///< sample recorded at the jump (post-jump mode)
};

/// Sampled path of (X, I). Samples are taken every `sample_stride` RK4 steps
/// and at every jump time; the sample at a jump carries the new mode.
struct Trajectory {
    Eigen::Index dim = 0;
    std::vector<double> times;
    std::vector<double> states;  ///< row-major, times.size() x dim
    std::vector<int> modes;
    std::vector<JumpEvent> jumps;
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    bool truncated = false;  ///< stopped by the max-jumps cap
    bool stopped = false;    ///< stopped early by a caller predicate
    Box domain;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
    [[nodiscard]] bool empty() const noexcept { return times.empty(); }
    [[nodiscard]] Eigen::Map<const Vector> state(std::size_t k) const {
        return {states.data() + k * static_cast<std::size_t>(dim), dim};
    }
    [[nodiscard]] double end_time() const { return times.back(); }

    void push(double t, const Vector& x, int mode) {
        times.push_back(t);
        states.insert(states.end(), x.data(), x.data() + dim);
        modes.push_back(mode);
    }

    /// Keeps samples [0, count).
    void truncate_samples(std::size_t count) {
        times.resize(count);
        states.resize(count * static_cast<std::size_t>(dim));
        modes.resize(count);
        std::erase_if(jumps, [count](const JumpEvent& j) { return j.sample_index >= count; });
    }
};

/// CSV with header t,mode,x1..xd; each jump appears as two rows at the same
/// time, pre-jump mode first. Floats carry 17 significant digits.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t,mode";
    for (Eigen::Index k = 0; k < traj.dim; ++k) os << ",x" << (k + 1);
    os << '\n';
    const auto old_precision = os.precision(17);
    std::size_t next_jump = 0;
    auto row = [&](std::size_t s, int mode) {
        os << traj.times[s] << ',' << mode;
        const auto x = traj.state(s);
        for (Eigen::Index k = 0; k < traj.dim; ++k) os << ',' << x(k);
        os << '\n';
    };
    for (std::size_t s = 0; s < traj.size(); ++s) {
        if (next_jump < traj.jumps.size() && traj.jumps[next_jump].sample_index == s) {
            row(s, traj.jumps[next_jump].from);
            ++next_jump;
        }
        row(s, traj.modes[s]);
    }
    os.precision(old_precision);
}

/// Optional early-stop test evaluated after every RK4 step.
using StopPredicate = std::function<bool(double t, const Vector& x)>;

namespace detail {

class TrajectoryBuilder {
public:
    TrajectoryBuilder(Trajectory& traj, const IntegratorConfig& config, const StopPredicate& stop)
        : traj_(traj), config_(config), stop_(stop) {}

    /// Flows from time t for `duration` in mode `mode`. Returns the time
    /// reached (earlier than t + duration only if the stop predicate fired).
    double flow(const VectorField& field, Vector& x, double t, double duration, int mode,
                const Box& box, Rk4Stepper& stepper) {
        const double elapsed = flow_for(
            field, x, duration, config_.step, box, stepper,
            [&](double dt, const Vector& y, bool last) {
                ++steps_;
                if (stop_ && stop_(t + dt, y)) {
                    stopped_ = true;
                    return true;
                }
                if (!last && steps_ % config_.sample_stride == 0) traj_.push(t + dt, y, mode);
                return false;
            });
        return t + elapsed;
    }

    [[nodiscard]] bool stopped() const noexcept { return stopped_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }

private:
    Trajectory& traj_;
    const IntegratorConfig& config_;
    const StopPredicate& stop_;
    std::size_t steps_ = 0;
    bool stopped_ = false;
};

inline void check_start(const SwitchedSystem& system, const Vector& x0, int i0, double horizon) {
    if (x0.size() != system.dim()) throw DimensionError("simulate: state dimension mismatch");
    if (i0 < 0 || static_cast<std::size_t>(i0) >= system.modes()) {
        throw PreconditionError("simulate: initial mode out of range");
    }
    if (!system.family().domain().contains(x0, kClampTolerance)) {
        throw PreconditionError("simulate: initial state " + format_vector(x0) +
                                " is outside the domain");
    }
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
        throw PreconditionError("simulate: horizon must be finite and nonnegative");
    }
}

inline Trajectory flow_along_path(const SwitchedSystem& system, const Vector& x0,
                                  const ModePath& path, const IntegratorConfig& config,
                                  const StopPredicate& stop, std::size_t max_jumps) {
    const auto& family = system.family();
    Trajectory traj;
    traj.dim = system.dim();
    traj.domain = family.domain();
    Vector x = x0;
    clamp_into(traj.domain, x, "simulate");
    traj.push(0.0, x, path.modes.front());
    if (stop && stop(0.0, x)) {
        traj.stopped = true;
        return traj;
    }
    Rk4Stepper stepper(traj.dim);
    TrajectoryBuilder builder(traj, config, stop);
    double t = 0.0;
    for (std::size_t k = 0; k < path.modes.size(); ++k) {
        const int mode = path.modes[k];
        const bool jump_follows = k < path.jump_times.size();
        const double seg_end = jump_follows ? path.jump_times[k] : path.horizon;
        t = builder.flow(family[static_cast<std::size_t>(mode)], x, t, seg_end - t, mode,
                         traj.domain, stepper);
        if (builder.stopped()) {
            traj.push(t, x, mode);
            traj.stopped = true;
            return traj;
        }
        t = seg_end;
        if (!jump_follows) break;
        if (traj.jumps.size() >= max_jumps) {
            traj.truncated = true;
            traj.push(t, x, mode);
            return traj;
        }
        const int next = path.modes[k + 1];
        traj.jumps.push_back({t, mode, next, traj.size()});
        traj.push(t, x, next);
    }
    if (traj.times.back() < path.horizon) traj.push(path.horizon, x, path.modes.back());
    return traj;
}

inline Trajectory simulate_thinned(const SwitchedSystem& system, const Vector& x0, int i0,
                                   double horizon, Rng& rng, const IntegratorConfig& config,
                                   const StopPredicate& stop) {
    const auto& family = system.family();
    const double bound = system.majorant();
    Trajectory traj;
    traj.dim = system.dim();
    traj.domain = family.domain();
    Vector x = x0;
    clamp_into(traj.domain, x, "simulate");
    traj.push(0.0, x, i0);
    if (stop && stop(0.0, x)) {
        traj.stopped = true;
        return traj;
    }
    Rk4Stepper stepper(traj.dim);
    TrajectoryBuilder builder(traj, config, stop);
    double t = 0.0;
    int mode = i0;
    while (t < horizon) {
        const double candidate = t + rng.exponential(bound);
        const double seg_end = std::min(candidate, horizon);
        t = builder.flow(family[static_cast<std::size_t>(mode)], x, t, seg_end - t, mode,
                         traj.domain, stepper);
        if (builder.stopped()) {
            traj.push(t, x, mode);
            traj.stopped = true;
            return traj;
        }
        t = seg_end;
        if (candidate >= horizon) break;
        const RateMatrix q = system.rates_at(x);
        const double total = q.total_rate(mode);
        if (total > bound) {
            throw PreconditionError("simulate: total jump rate " + std::to_string(total) +
                                    " exceeds the thinning bound " + std::to_string(bound) +
                                    " at " + format_vector(x) +
                                    "; increase the safety factor");
        }
        if (rng.uniform() * bound < total) {
            if (traj.jumps.size() >= config.max_jumps) {
                traj.truncated = true;
                traj.push(t, x, mode);
                return traj;
            }
            const int next = draw_target(q.entries(), mode, total, rng);
            traj.jumps.push_back({t, mode, next, traj.size()});
            traj.push(t, x, next);
            mode = next;
        }
    }
    if (traj.times.back() < horizon) traj.push(horizon, x, mode);
    return traj;
}

}  // namespace detail

/// One path of the PDMP on [0, horizon]. With constant rates the mode path
/// is the one simulate_mode_chain draws for the same (seed, replicate).
inline Trajectory simulate(const SwitchedSystem& system, const Vector& x0, int i0, double horizon,
                           std::uint64_t seed, const IntegratorConfig& config = {},
                           std::uint64_t replicate = 0, const StopPredicate& stop = {}) {
    config.validate();
    detail::check_start(system, x0, i0, horizon);
    Trajectory traj;
    if (system.constant_rates()) {
        Rng rng(seed, replicate);
        const ModePath path = detail::draw_mode_path(system.rate_matrix(), i0, horizon, rng,
                                                     config.max_jumps + 1);
        traj = detail::flow_along_path(system, x0, path, config, stop, config.max_jumps);
    } else {
        Rng rng(seed, replicate);
        traj = detail::simulate_thinned(system, x0, i0, horizon, rng, config, stop);
    }
    traj.seed = seed;
    traj.replicate = replicate;
    return traj;
}

/// Two states driven by one switching signal: identical jump times and
/// modes, each state following its own flow.
inline std::pair<Trajectory, Trajectory> simulate_synchronous_pair(
    const SwitchedSystem& system, const Vector& x0, const Vector& y0, int i0, double horizon,
    std::uint64_t seed, const IntegratorConfig& config = {}, std::uint64_t replicate = 0) {
    if (!system.constant_rates()) {
        throw PreconditionError("simulate_synchronous_pair: requires constant rates");
    }
    config.validate();
    detail::check_start(system, x0, i0, horizon);
    detail::check_start(system, y0, i0, horizon);
    Rng rng(seed, replicate);
    const ModePath path =
        detail::draw_mode_path(system.rate_matrix(), i0, horizon, rng, config.max_jumps + 1);
    Trajectory a = detail::flow_along_path(system, x0, path, config, {}, config.max_jumps);
    Trajectory b = detail::flow_along_path(system, y0, path, config, {}, config.max_jumps);
    a.seed = b.seed = seed;
    a.replicate = b.replicate = replicate;
    return {std::move(a), std::move(b)};
}

}  // namespace pdmp
