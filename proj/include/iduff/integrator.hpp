#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta pair with PI step-size control, for planar systems.
// Propagates the 5th-order solution and lands exactly on the requested end time.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "phase_state.hpp"

namespace iduff {

using Vec2 = std::array<double, 2>;

struct StepControl {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    double max_step = 0.05;
    double escape_guard = 1e12;
};

struct IntegrationStats {
    long accepted = 0;
    long rejected = 0;
};

namespace detail {

struct DormandPrince {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    // b - b_hat
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline Vec2 axpy(const Vec2& y, double h, std::initializer_list<std::pair<double, const Vec2*>> terms) {
    Vec2 out = y;
    for (int i = 0; i < 2; ++i) {
        double acc = 0.0;
        for (const auto& [a, k] : terms) acc += a * (*k)[i];
        out[i] += h * acc;
    }
    return out;
}

} // namespace detail

/// Integrates y' = f(t, y) from (t0, y0) to t_end (either direction).
///
/// `observer(t, y)` is called after every accepted step, including the last one at t_end.
/// Throws EscapeError when |y0| + |y1| exceeds the guard, the state turns non-finite, or the step
/// size underflows.
template <class Rhs, class Observer>
Vec2 integrate_dopri5(Rhs&& f, double t0, Vec2 y0, double t_end, const StepControl& ctl, Observer&& observer,
                      IntegrationStats* stats = nullptr) {
    using DP = detail::DormandPrince;
    if (t_end == t0) return y0;
    const double dir = t_end > t0 ? 1.0 : -1.0;
    const double span = std::abs(t_end - t0);

    auto scale = [&](const Vec2& a, const Vec2& b, int i) {
        return ctl.abs_tol + ctl.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
    };

    double t = t0;
    Vec2 y = y0;
    Vec2 k1 = f(t, y);

    // Initial step guess (Hairer, Norsett & Wanner II.4).
    double h;
    {
        double d0 = 0.0, d1 = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double sc = ctl.abs_tol + ctl.rel_tol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / 2.0);
        d1 = std::sqrt(d1 / 2.0);
        const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        const Vec2 y1{y[0] + dir * h0 * k1[0], y[1] + dir * h0 * k1[1]};
        const Vec2 f1 = f(t + dir * h0, y1);
        double d2 = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double sc = ctl.abs_tol + ctl.rel_tol * std::abs(y[i]);
            d2 += ((f1[i] - k1[i]) / sc) * ((f1[i] - k1[i]) / sc);
        }
        d2 = std::sqrt(d2 / 2.0) / h0;
        const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                    : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
        h = std::min({100.0 * h0, h1, ctl.max_step, span});
    }

    double err_prev = 1e-4;
    bool last_rejected = false;
    while (true) {
        const double remaining = std::abs(t_end - t);
        bool last = false;
        if (h >= remaining) {
            h = remaining;
            last = true;
        } else if (h > 0.5 * remaining && h < remaining) {
            // avoid a sliver step at the end
            h = 0.5 * remaining;
        }
        if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
            throw EscapeError("integrator step-size underflow (possible blow-up)", PhaseState{t, y[0], y[1]});

        const double hs = dir * h;
        const Vec2 y2 = detail::axpy(y, hs, {{DP::a21, &k1}});
        const Vec2 k2 = f(t + DP::c2 * hs, y2);
        const Vec2 y3 = detail::axpy(y, hs, {{DP::a31, &k1}, {DP::a32, &k2}});
        const Vec2 k3 = f(t + DP::c3 * hs, y3);
        const Vec2 y4 = detail::axpy(y, hs, {{DP::a41, &k1}, {DP::a42, &k2}, {DP::a43, &k3}});
        const Vec2 k4 = f(t + DP::c4 * hs, y4);
        const Vec2 y5 = detail::axpy(y, hs, {{DP::a51, &k1}, {DP::a52, &k2}, {DP::a53, &k3}, {DP::a54, &k4}});
        const Vec2 k5 = f(t + DP::c5 * hs, y5);
        const Vec2 y6 =
            detail::axpy(y, hs, {{DP::a61, &k1}, {DP::a62, &k2}, {DP::a63, &k3}, {DP::a64, &k4}, {DP::a65, &k5}});
        const double t_new = last ? t_end : t + hs;
        const Vec2 k6 = f(t + hs, y6);
        const Vec2 y_new =
            detail::axpy(y, hs, {{DP::b1, &k1}, {DP::b3, &k3}, {DP::b4, &k4}, {DP::b5, &k5}, {DP::b6, &k6}});
        const Vec2 k7 = f(t_new, y_new);

        double err = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double e = hs * (DP::e1 * k1[i] + DP::e3 * k3[i] + DP::e4 * k4[i] + DP::e5 * k5[i] + DP::e6 * k6[i] +
                                   DP::e7 * k7[i]);
            const double r = e / scale(y, y_new, i);
            err += r * r;
        }
        err = std::sqrt(err / 2.0);

        if (!std::isfinite(err)) {
            h *= 0.2;
            last_rejected = true;
            if (stats) ++stats->rejected;
            continue;
        }

        if (err <= 1.0) {
            t = t_new;
            y = y_new;
            k1 = k7;
            if (stats) ++stats->accepted;
            if (!(std::isfinite(y[0]) && std::isfinite(y[1])) ||
                std::abs(y[0]) + std::abs(y[1]) > ctl.escape_guard)
                throw EscapeError("trajectory escaped the guard |x|+|y| <= " + std::to_string(ctl.escape_guard),
                                  PhaseState{t, y[0], y[1]});
            observer(t, y);
            if (last) return y;
            double fac = 0.9 * std::pow(err, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            fac = std::clamp(fac, 0.2, 5.0);
            if (last_rejected) fac = std::min(fac, 1.0);
            h = std::min(h * fac, ctl.max_step);
            err_prev = std::max(err, 1e-4);
            last_rejected = false;
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -1.0 / 5.0));
            last_rejected = true;
            if (stats) ++stats->rejected;
        }
    }
}

} // namespace iduff
