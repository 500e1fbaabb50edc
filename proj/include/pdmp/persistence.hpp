#pragma once

// Diagnostics on simulated trajectories: empirical occupation measures and
// their mass near the extinction set, tail moments |X|^-theta, extinction
// rate fits, first-passage times away from the origin, and the part-metric
// contraction experiment on synchronously coupled pairs.

#include "pdmp/engine.hpp"
#include "pdmp/matrixcore.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace pdmp {

// ---------------------------------------------------------------------------
// Occupation measure
// ---------------------------------------------------------------------------

/// Time spent by (X_t, I_t) in each (cell, mode) of a uniform box partition.
class OccupationHistogram {
public:
    OccupationHistogram(Box box, int cells_per_axis, std::size_t modes)
        : box_(std::move(box)), cells_(cells_per_axis), modes_(modes) {
        if (!box_.bounded()) throw PreconditionError("OccupationHistogram: box must be bounded");
        if (cells_ < 1) throw PreconditionError("OccupationHistogram: cells_per_axis must be >= 1");
        std::size_t n = 1;
        for (Eigen::Index k = 0; k < box_.dim(); ++k) n *= static_cast<std::size_t>(cells_);
        weights_.assign(n * modes_, 0.0);
    }

    [[nodiscard]] const Box& box() const noexcept { return box_; }
    [[nodiscard]] int cells_per_axis() const noexcept { return cells_; }
    [[nodiscard]] std::size_t modes() const noexcept { return modes_; }
    [[nodiscard]] std::size_t cell_count() const noexcept { return weights_.size() / modes_; }
    [[nodiscard]] double total_time() const noexcept { return total_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

    /// Flat index of the cell containing x (points on the upper faces go to
    /// the last cell).
    [[nodiscard]] std::size_t cell_of(const Eigen::Ref<const Vector>& x) const {
        std::size_t index = 0;
        for (Eigen::Index k = box_.dim() - 1; k >= 0; --k) {
            const double u = (x(k) - box_.lower(k)) / (box_.upper(k) - box_.lower(k));
            const int c = std::clamp(static_cast<int>(std::floor(u * cells_)), 0, cells_ - 1);
            index = index * static_cast<std::size_t>(cells_) + static_cast<std::size_t>(c);
        }
        return index;
    }

    /// Per-axis indices of a flat cell index.
    [[nodiscard]] std::vector<int> axis_indices(std::size_t cell) const {
        std::vector<int> out(static_cast<std::size_t>(box_.dim()));
        for (auto& c : out) {
            c = static_cast<int>(cell % static_cast<std::size_t>(cells_));
            cell /= static_cast<std::size_t>(cells_);
        }
        return out;
    }

    [[nodiscard]] Vector cell_center(std::size_t cell) const {
        const auto idx = axis_indices(cell);
        Vector c(box_.dim());
        for (Eigen::Index k = 0; k < box_.dim(); ++k) {
            const double width = (box_.upper(k) - box_.lower(k)) / cells_;
            c(k) = box_.lower(k) + (idx[static_cast<std::size_t>(k)] + 0.5) * width;
        }
        return c;
    }

    void add(std::size_t cell, int mode, double time) {
        weights_[cell * modes_ + static_cast<std::size_t>(mode)] += time;
        total_ += time;
    }

    [[nodiscard]] double mass(std::size_t cell, int mode) const {
        return total_ > 0.0 ? weights_[cell * modes_ + static_cast<std::size_t>(mode)] / total_
                            : 0.0;
    }

    /// Normalized time fraction per mode.
    [[nodiscard]] std::vector<double> mode_marginal() const {
        std::vector<double> out(modes_, 0.0);
        for (std::size_t i = 0; i < weights_.size(); ++i) out[i % modes_] += weights_[i];
        for (auto& v : out) v = total_ > 0.0 ? v / total_ : 0.0;
        return out;
    }

    void merge(const OccupationHistogram& other) {
        if (other.weights_.size() != weights_.size() || other.cells_ != cells_) {
            throw DimensionError("OccupationHistogram::merge: incompatible histograms");
        }
        for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] += other.weights_[i];
        total_ += other.total_;
    }

private:
    Box box_;
    int cells_;
    std::size_t modes_;
    std::vector<double> weights_;
    double total_ = 0.0;
};

/// Default grid resolution: 64 cells per axis in 2-D, 32 in 3-D.
inline int default_cells_per_axis(Eigen::Index d) {
    if (d <= 2) return 64;
    if (d == 3) return 32;
    return std::max(2, static_cast<int>(std::floor(std::pow(262144.0, 1.0 / static_cast<double>(d)))));
}

/// Trapezoidal time weights: each sample interval [t_k, t_{k+1}) in mode m_k
/// gives half its length to the cell of x_k and half to the cell of x_{k+1}.
/// Samples before `burn_in_time` are ignored.
inline OccupationHistogram occupation_measure(const Trajectory& traj, int cells_per_axis,
                                              std::size_t modes, double burn_in_time = 0.0) {
    if (traj.empty()) throw PreconditionError("occupation_measure: empty trajectory");
    Box box = traj.domain;
    if (!box.bounded()) {
        box.lower = Vector::Constant(traj.dim, std::numeric_limits<double>::infinity());
        box.upper = -box.lower;
        for (std::size_t k = 0; k < traj.size(); ++k) {
            box.lower = box.lower.cwiseMin(traj.state(k).eval());
            box.upper = box.upper.cwiseMax(traj.state(k).eval());
        }
        for (Eigen::Index k = 0; k < traj.dim; ++k) {
            if (box.upper(k) <= box.lower(k)) box.upper(k) = box.lower(k) + 1.0;
        }
    }
    OccupationHistogram hist(std::move(box), cells_per_axis, modes);
    if (traj.size() == 1) {
        hist.add(hist.cell_of(traj.state(0)), traj.modes[0], 0.0);
        return hist;
    }
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
        const double t0 = std::max(traj.times[k], burn_in_time);
        const double t1 = traj.times[k + 1];
        if (t1 <= t0) continue;
        const double half = 0.5 * (t1 - t0);
        hist.add(hist.cell_of(traj.state(k)), traj.modes[k], half);
        hist.add(hist.cell_of(traj.state(k + 1)), traj.modes[k], half);
    }
    return hist;
}

/// Normalized mass of cells whose centers lie in the closed ball B(0, r).
inline double ball_mass(const OccupationHistogram& hist, double r) {
    if (!(r > 0.0)) throw PreconditionError("ball_mass: radius must be positive");
    if (hist.total_time() <= 0.0) return 0.0;
    double m = 0.0;
    for (std::size_t c = 0; c < hist.cell_count(); ++c) {
        if (hist.cell_center(c).norm() > r) continue;
        for (std::size_t i = 0; i < hist.modes(); ++i) m += hist.mass(c, static_cast<int>(i));
    }
    return std::clamp(m, 0.0, 1.0);
}

/// CSV `c1,...,cd,mode,mass` with normalized masses, zero cells omitted.
inline void write_occupation_csv(const OccupationHistogram& hist, std::ostream& os) {
    for (Eigen::Index k = 0; k < hist.box().dim(); ++k) os << 'c' << (k + 1) << ',';
    os << "mode,mass\n";
    const auto old = os.precision(17);
    for (std::size_t c = 0; c < hist.cell_count(); ++c) {
        for (std::size_t i = 0; i < hist.modes(); ++i) {
            const double m = hist.mass(c, static_cast<int>(i));
            if (m <= 0.0) continue;
            for (int idx : hist.axis_indices(c)) os << idx << ',';
            os << i << ',' << m << '\n';
        }
    }
    os.precision(old);
}

// ---------------------------------------------------------------------------
// Tail moments and extinction fits
// ---------------------------------------------------------------------------

struct TailMoment {
    double theta = 0.0;
    double value = 0.0;
    bool infinite = false;  ///< some sample had |x| = 0
};

/// (1/(T - t_b)) * integral over [t_b, T] of |X_t|^-theta, trapezoidal.
inline TailMoment tail_moment(const Trajectory& traj, double theta, double burn_in_time = 0.0) {
    if (!(theta > 0.0)) throw PreconditionError("tail_moment: theta must be positive");
    if (traj.empty()) throw PreconditionError("tail_moment: empty trajectory");
    TailMoment out{theta, 0.0, false};
    auto f = [&](std::size_t k) {
        const double n = traj.state(k).norm();
        if (n == 0.0) out.infinite = true;
        return std::pow(n, -theta);
    };
    if (traj.size() == 1) {
        out.value = f(0);
        return out;
    }
    double integral = 0.0;
    double span = 0.0;
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
        if (traj.times[k] < burn_in_time) continue;
        const double dt = traj.times[k + 1] - traj.times[k];
        if (dt <= 0.0) continue;
        integral += 0.5 * dt * (f(k) + f(k + 1));
        span += dt;
    }
    if (out.infinite) {
        out.value = std::numeric_limits<double>::infinity();
    } else {
        out.value = span > 0.0 ? integral / span : f(traj.size() - 1);
    }
    return out;
}

inline constexpr double kTailExponents[] = {0.05, 0.1, 0.2, 0.5};

inline std::vector<TailMoment> tail_moment_sweep(const Trajectory& traj,
                                                 double burn_in_time = 0.0) {
    std::vector<TailMoment> out;
    for (double theta : kTailExponents) out.push_back(tail_moment(traj, theta, burn_in_time));
    return out;
}

struct ExtinctionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
};

/// Least-squares slope of log|X_t - reference| against t over the trailing
/// `window_fraction` of the trajectory.
inline ExtinctionFit extinction_rate(const Trajectory& traj, double window_fraction,
                                     std::optional<Vector> reference = std::nullopt) {
    if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
        throw PreconditionError("extinction_rate: window_fraction must lie in (0, 1]");
    }
    if (traj.size() < 2) throw PreconditionError("extinction_rate: need at least two samples");
    const Vector ref = reference.value_or(Vector::Zero(traj.dim));
    const double t_end = traj.times.back();
    const double t_start = t_end - window_fraction * (t_end - traj.times.front());
    std::vector<double> ts, logs;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.times[k] < t_start) continue;
        const double n = (traj.state(k) - ref).norm();
        if (!(n > 0.0)) {
            throw PreconditionError(
                "extinction_rate: state reached the reference point (|x| = 0) at t = " +
                std::to_string(traj.times[k]) + "; fit a shorter horizon");
        }
        ts.push_back(traj.times[k]);
        logs.push_back(std::log(n));
    }
    if (ts.size() < 2) throw PreconditionError("extinction_rate: fewer than two samples in window");
    const LinearFit fit = least_squares(ts, logs);
    return {fit.slope, fit.intercept, fit.r2, ts.front(), ts.back()};
}

/// Copy of `traj` ending before the first sample with |x - reference| < floor,
/// i.e. the horizon over which the distance is numerically resolvable.
inline Trajectory resolvable_prefix(const Trajectory& traj, double floor,
                                    std::optional<Vector> reference = std::nullopt) {
    const Vector ref = reference.value_or(Vector::Zero(traj.dim));
    std::size_t keep = traj.size();
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if ((traj.state(k) - ref).norm() < floor) {
            keep = k;
            break;
        }
    }
    Trajectory out = traj;
    out.truncate_samples(keep);
    return out;
}

// ---------------------------------------------------------------------------
// Hitting times
// ---------------------------------------------------------------------------

inline constexpr double kGeometricBases[] = {1.01, 1.05, 1.1};

struct HittingTimeSample {
    double epsilon = 0.0;
    double horizon = 0.0;
    std::vector<double> times;     ///< first t with |X_t| >= eps, or horizon when censored
    std::vector<bool> censored;
    std::size_t censored_count = 0;
    /// (b, mean of b^tau) with censored runs contributing b^horizon, so the
    /// means are lower bounds whenever censored_count > 0.
    std::vector<std::pair<double, double>> geometric_moments;
};

/// First passage of |X_t| above eps, one replicate per run; replicate r
/// starts from x0_list[r % x0_list.size()].
inline HittingTimeSample hitting_times(const SwitchedSystem& system,
                                       std::span<const Vector> x0_list, int i0, double epsilon,
                                       double horizon, std::size_t replicates, std::uint64_t seed,
                                       const IntegratorConfig& config = {}) {
    if (x0_list.empty()) throw PreconditionError("hitting_times: no initial states");
    const double radius = system.family().domain().max_norm_from_origin();
    if (!(epsilon > 0.0 && epsilon < radius)) {
        throw PreconditionError("hitting_times: epsilon must lie in (0, domain radius)");
    }
    const StopPredicate stop = [epsilon](double, const Vector& x) { return x.norm() >= epsilon; };
    struct Hit {
        double time = 0.0;
        bool censored = false;
    };
    const auto hits = parallel_map(replicates, [&](std::size_t r) {
        const Vector& x0 = x0_list[r % x0_list.size()];
        if (x0.norm() >= epsilon) return Hit{0.0, false};
        const Trajectory traj = simulate(system, x0, i0, horizon, seed, config, r, stop);
        return traj.stopped ? Hit{traj.end_time(), false} : Hit{horizon, true};
    });
    HittingTimeSample out;
    out.epsilon = epsilon;
    out.horizon = horizon;
    for (const auto& h : hits) {
        out.times.push_back(h.time);
        out.censored.push_back(h.censored);
        out.censored_count += h.censored ? 1 : 0;
    }
    for (double b : kGeometricBases) {
        RunningStats s;
        for (double t : out.times) s.push(std::pow(b, t));
        out.geometric_moments.emplace_back(b, s.mean());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Part-metric contraction
// ---------------------------------------------------------------------------

struct DecayCurve {
    std::vector<double> times;
    std::vector<double> mean_p;
    std::vector<double> std_error;
    std::size_t excluded = 0;  ///< replicates that left the common part
    double log_slope = 0.0;    ///< slope of log mean_p over the trailing half
    /// Largest p(X_t, Y_t) - p(X_s, Y_s) over consecutive samples s < t, any replicate.
    double max_increase = 0.0;
    /// Largest p(X_t, Y_t) - p(x0, y0) over all samples of any replicate.
    double max_excess_over_start = 0.0;
};

/// Mean part distance between synchronously coupled copies started at
/// (x0, y0), evaluated on `grid_points` equally spaced times in [0, T].
inline DecayCurve part_metric_contraction(const SwitchedSystem& system, const Vector& x0,
                                          const Vector& y0, double horizon,
                                          std::size_t replicates, std::uint64_t seed,
                                          std::size_t grid_points = 101,
                                          const IntegratorConfig& config = {}) {
    if (!system.constant_rates()) {
        throw PreconditionError("part_metric_contraction: requires constant rates");
    }
    const double p_start = part_metric(x0, y0);
    if (!std::isfinite(p_start)) {
        throw PreconditionError("part_metric_contraction: x0 and y0 lie in different parts");
    }
    if (grid_points < 2) throw PreconditionError("part_metric_contraction: grid_points >= 2");
    struct Replicate {
        std::vector<double> grid_values;
        bool escaped = false;
        double max_increase = 0.0;
        double max_excess = 0.0;
    };
    const auto reps = parallel_map(replicates, [&](std::size_t r) {
        const auto [a, b] = simulate_synchronous_pair(system, x0, y0, 0, horizon, seed, config, r);
        Replicate rep;
        std::vector<double> p(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            p[k] = part_metric(a.state(k), b.state(k));
            if (!std::isfinite(p[k])) rep.escaped = true;
            if (k > 0) rep.max_increase = std::max(rep.max_increase, p[k] - p[k - 1]);
            rep.max_excess = std::max(rep.max_excess, p[k] - p_start);
        }
        std::size_t s = 0;
        for (std::size_t g = 0; g < grid_points; ++g) {
            const double tg = horizon * static_cast<double>(g) / static_cast<double>(grid_points - 1);
            while (s + 1 < a.size() && a.times[s + 1] <= tg) ++s;
            rep.grid_values.push_back(p[s]);
        }
        return rep;
    });
    DecayCurve curve;
    std::vector<RunningStats> stats(grid_points);
    for (const auto& rep : reps) {
        if (rep.escaped) {
            ++curve.excluded;
            continue;
        }
        curve.max_increase = std::max(curve.max_increase, rep.max_increase);
        curve.max_excess_over_start = std::max(curve.max_excess_over_start, rep.max_excess);
        for (std::size_t g = 0; g < grid_points; ++g) stats[g].push(rep.grid_values[g]);
    }
    std::vector<double> ts, logs;
    for (std::size_t g = 0; g < grid_points; ++g) {
        const double tg = horizon * static_cast<double>(g) / static_cast<double>(grid_points - 1);
        curve.times.push_back(tg);
        curve.mean_p.push_back(stats[g].mean());
        curve.std_error.push_back(stats[g].stderr_of_mean());
        if (2 * g >= grid_points - 1 && stats[g].mean() > 0.0) {
            ts.push_back(tg);
            logs.push_back(std::log(stats[g].mean()));
        }
    }
    if (ts.size() >= 2) curve.log_slope = least_squares(ts, logs).slope;
    return curve;
}

/// CSV `t,mean_p,stderr,excluded`.
inline void write_decay_csv(const DecayCurve& curve, std::ostream& os) {
    const auto old = os.precision(17);
    os << "t,mean_p,stderr,excluded\n";
    for (std::size_t g = 0; g < curve.times.size(); ++g) {
        os << curve.times[g] << ',' << curve.mean_p[g] << ',' << curve.std_error[g] << ','
           << curve.excluded << '\n';
    }
    os.precision(old);
}

}  // namespace pdmp
