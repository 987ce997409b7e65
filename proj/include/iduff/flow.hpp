#pragma once

// The impulsive system
//
//   x' = y,  y' = -x^(2n+1) - sum_i p_i(t) x^i          for t != t_j
//   x(t_j+) = x(t_j-),  y(t_j+) = -y(t_j-)
//
// Smooth segments are integrated adaptively; impulses are applied at their scheduled times.
// A state reported at an impulse time t_j carries the post-impulse velocity y(t_j+).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "phase_state.hpp"

namespace iduff {

struct ImpulseEvent {
    double t = 0.0;
    PhaseState before;
    PhaseState after;
};

/// Samples at every accepted integrator step plus the impulse events; sample times are strictly
/// increasing and the sample at an impulse time is the post-impulse state.
struct Trajectory {
    std::vector<PhaseState> samples;
    std::vector<ImpulseEvent> impulses;
    bool escaped = false;
};

/// Right-hand side (x', y') of the smooth flow.
inline Vec2 rhs(const SystemConfig& config, const PhaseState& s) {
    const int n = config.n();
    const auto& p = config.coefficients();
    // Horner over x^(2n+1) + p_2n x^2n + ... + p_0
    double poly = 1.0;
    for (int i = 2 * n; i >= 0; --i) poly = poly * s.x + p[static_cast<std::size_t>(i)](s.t);
    return {s.y, -poly};
}

/// y -> -y at fixed t and x.
inline PhaseState apply_impulse(const PhaseState& s) { return {s.t, s.x, -s.y}; }

/// Full Hamiltonian y^2/2 + x^(2n+2)/(2n+2) + sum_i p_i(t) x^(i+1)/(i+1).
inline double hamiltonian(const SystemConfig& config, const PhaseState& s) {
    const int n = config.n();
    double h = 0.5 * s.y * s.y + std::pow(s.x, 2 * n + 2) / (2.0 * n + 2.0);
    for (int i = 0; i <= 2 * n; ++i) h += eval_coefficient(config, i, s.t) * std::pow(s.x, i + 1) / (i + 1.0);
    return h;
}

inline StepControl step_control(const SystemConfig& config, double max_step_cap = 0.0) {
    const auto& s = config.integrator();
    StepControl ctl{s.abs_tol, s.rel_tol, s.max_step, s.escape_guard};
    if (max_step_cap > 0.0) ctl.max_step = std::min(ctl.max_step, max_step_cap);
    return ctl;
}

/// Advances the smooth flow from `state` to `t_end`. No impulse may lie strictly between the two
/// times. `observer(PhaseState)` sees every accepted step.
template <class Observer>
PhaseState integrate_segment(const SystemConfig& config, const PhaseState& state, double t_end, Observer&& observer,
                             double max_step_cap = 0.0) {
    if (!state.finite() || !std::isfinite(t_end)) throw PreconditionError("integrate_segment: non-finite input");
    if (t_end == state.t) return state;
    const double lo = std::min(state.t, t_end);
    const double hi = std::max(state.t, t_end);
    for (double tj : config.schedule().times_in(lo, hi))
        if (tj < hi) throw PreconditionError("integrate_segment: an impulse time lies inside the segment");

    auto f = [&config](double t, const Vec2& y) { return rhs(config, PhaseState{t, y[0], y[1]}); };
    auto obs = [&observer](double t, const Vec2& y) { observer(PhaseState{t, y[0], y[1]}); };
    const Vec2 out = integrate_dopri5(f, state.t, Vec2{state.x, state.y}, t_end, step_control(config, max_step_cap), obs);
    return {t_end, out[0], out[1]};
}

inline PhaseState integrate_segment(const SystemConfig& config, const PhaseState& state, double t_end) {
    return integrate_segment(config, state, t_end, [](const PhaseState&) {});
}

/// Callbacks used by flow_map: `on_step(state)` after each accepted smooth step and
/// `on_impulse(event)` after each impulse.
struct FlowObserver {
    virtual ~FlowObserver() = default;
    virtual void on_step(const PhaseState&) {}
    virtual void on_impulse(const ImpulseEvent&) {}
};

/// Advances the impulsive system from `state` to `t_target`, applying every impulse in
/// (state.t, t_target].
inline PhaseState flow_map(const SystemConfig& config, PhaseState state, double t_target, FlowObserver& observer,
                           double max_step_cap = 0.0) {
    if (!(t_target >= state.t)) throw PreconditionError("flow_map: t_target >= state.t required");
    auto step = [&observer](const PhaseState& s) { observer.on_step(s); };
    for (double tj : config.schedule().times_in(state.t, t_target)) {
        state = integrate_segment(config, state, tj, step, max_step_cap);
        state.t = tj;
        const PhaseState after = apply_impulse(state);
        observer.on_impulse(ImpulseEvent{tj, state, after});
        state = after;
    }
    state = integrate_segment(config, state, t_target, step, max_step_cap);
    state.t = t_target;
    return state;
}

inline PhaseState flow_map(const SystemConfig& config, const PhaseState& state, double t_target) {
    FlowObserver none;
    return flow_map(config, state, t_target, none);
}

/// flow_map that also records the trajectory. An escape is reported through `escaped` with the
/// samples gathered so far; the returned state is then the last accepted one.
inline std::pair<PhaseState, Trajectory> flow_map_trajectory(const SystemConfig& config, const PhaseState& state,
                                                             double t_target) {
    struct Recorder : FlowObserver {
        Trajectory traj;
        void on_step(const PhaseState& s) override {
            if (!traj.samples.empty() && s.t == traj.samples.back().t) traj.samples.back() = s;
            else traj.samples.push_back(s);
        }
        void on_impulse(const ImpulseEvent& e) override {
            traj.impulses.push_back(e);
            if (!traj.samples.empty() && traj.samples.back().t == e.t) traj.samples.back() = e.after;
            else traj.samples.push_back(e.after);
        }
    } rec;
    rec.traj.samples.push_back(state);
    try {
        auto end = flow_map(config, state, t_target, rec);
        return {end, std::move(rec.traj)};
    } catch (const EscapeError& e) {
        rec.traj.escaped = true;
        return {e.last_state(), std::move(rec.traj)};
    }
}

namespace detail {

inline std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// CSV with header "t,x,y".
inline void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "t,x,y\n";
    for (const auto& s : traj.samples)
        out << detail::fmt_real(s.t) << ',' << detail::fmt_real(s.x) << ',' << detail::fmt_real(s.y) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// CSV with header "t_j,x,y_minus,y_plus".
inline void write_impulses_csv(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "t_j,x,y_minus,y_plus\n";
    for (const auto& e : traj.impulses)
        out << detail::fmt_real(e.t) << ',' << detail::fmt_real(e.before.x) << ',' << detail::fmt_real(e.before.y)
            << ',' << detail::fmt_real(e.after.y) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

} // namespace iduff
