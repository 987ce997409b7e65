#pragma once

// Reference orbit of x'' + x^(2n+1) = 0 through (1, 0) and the action-angle chart built on it.
//
// C(tau), S(tau) are the position and velocity of that orbit; T* is its minimal period.
// The chart is
//
//   x = (c lambda)^alpha C(theta T*),   y = (c lambda)^beta S(theta T*)
//
// with alpha = 1/(n+2), beta = 1 - alpha, c = 1/(alpha T*); it is area preserving and maps
// the energy h0 = y^2/2 + x^(2n+2)/(2n+2) to d lambda^(2 beta), d = c^(2 beta)/(2n+2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace iduff {

/// Action lambda > 0 and lifted angle Theta; the circle angle is Theta mod 1.
struct ActionAngle {
    double lambda = 1.0;
    double Theta = 0.0;

    double angle() const { return Theta - std::floor(Theta); }
};

/// Value pair on the reference orbit.
struct OrbitPoint {
    double C = 1.0;
    double S = 0.0;
};

/// h0(x, y) = y^2/2 + x^(2n+2)/(2n+2).
inline double reference_energy(int n, double x, double y) {
    const double m = 2.0 * n + 2.0;
    return 0.5 * y * y + std::pow(std::abs(x), m) / m;
}

namespace detail {

inline double ipow(double x, int e) {
    double r = 1.0;
    double b = x;
    while (e > 0) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

/// Taylor coefficients of the reference ODE solution through (x0, y0), orders 0..order.
class TaylorSeries {
public:
    TaylorSeries(int n, int order)
        : n_(n), order_(order), x_(order + 1), y_(order + 1),
          powers_(static_cast<std::size_t>(2 * n + 2), std::vector<double>(order + 1)) {}

    void expand(double x0, double y0) {
        x_[0] = x0;
        y_[0] = y0;
        const int top = 2 * n_ + 1;
        for (int k = 0; k < order_; ++k) {
            powers_[1][k] = x_[k];
            for (int m = 2; m <= top; ++m) {
                double acc = 0.0;
                for (int i = 0; i <= k; ++i) acc += powers_[m - 1][i] * x_[k - i];
                powers_[m][k] = acc;
            }
            x_[k + 1] = y_[k] / (k + 1);
            y_[k + 1] = -powers_[top][k] / (k + 1);
        }
    }

    OrbitPoint eval(double s) const {
        double cx = x_[order_];
        double cy = y_[order_];
        for (int k = order_ - 1; k >= 0; --k) {
            cx = cx * s + x_[k];
            cy = cy * s + y_[k];
        }
        return {cx, cy};
    }

    /// d/ds of the velocity series.
    double eval_dy(double s) const {
        double d = order_ * y_[order_];
        for (int k = order_ - 1; k >= 1; --k) d = d * s + k * y_[k];
        return d;
    }

    /// Size of the last retained term, used as a truncation estimate.
    double tail(double s) const {
        const double sp = std::pow(std::abs(s), order_);
        return (std::abs(x_[order_]) + std::abs(y_[order_])) * sp;
    }

private:
    int n_;
    int order_;
    std::vector<double> x_, y_;
    std::vector<std::vector<double>> powers_;
};

} // namespace detail

/// Dense, Hermite-interpolated samples of C and S over one period plus the chart constants.
/// Immutable after construction.
class SpecialFunctions {
public:
    static constexpr std::size_t kDefaultIntervals = 8192;

    /// Takes samples at tau_k = k T*/N for k = 0..N; derived tables are rebuilt here, so the same
    /// samples always produce a bit-identical object.
    SpecialFunctions(int n, double tol, double period, std::vector<double> cos_samples,
                     std::vector<double> sin_samples)
        : n_(n), tol_(tol), period_(period), cos_(std::move(cos_samples)), sin_(std::move(sin_samples)) {
        if (n_ < 1) throw PreconditionError("special functions need n >= 1");
        if (cos_.size() != sin_.size() || cos_.size() < 3 || (cos_.size() - 1) % 2 != 0)
            throw ValidationError("special-function sample arrays must have matching odd length");
        if (!(period_ > 0.0)) throw ValidationError("period must be positive");
        alpha_ = 1.0 / (n_ + 2.0);
        beta_ = 1.0 - alpha_;
        c_ = 1.0 / (alpha_ * period_);
        d_ = std::pow(c_, 2.0 * beta_) / (2.0 * n_ + 2.0);
        spacing_ = period_ / static_cast<double>(intervals());
        build_angle_table();
    }

    int n() const { return n_; }
    double tol() const { return tol_; }
    double period() const { return period_; }
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    double c() const { return c_; }
    double d() const { return d_; }
    std::size_t intervals() const { return cos_.size() - 1; }
    double spacing() const { return spacing_; }
    double grid_time(std::size_t k) const { return static_cast<double>(k) * spacing_; }
    const std::vector<double>& cos_samples() const { return cos_; }
    const std::vector<double>& sin_samples() const { return sin_; }

    /// (C, S)(tau) for any real tau, using periodicity and the even/odd symmetry so that only
    /// the half period [0, T*/2] is interpolated.
    OrbitPoint eval(double tau) const {
        auto [r, mirrored] = reduce(tau);
        auto p = interpolate(r).first;
        if (mirrored) p.S = -p.S;
        return p;
    }

    /// Derivative of the interpolant (C', S')(tau).
    OrbitPoint eval_derivative(double tau) const {
        auto [r, mirrored] = reduce(tau);
        auto dp = interpolate(r).second;
        if (mirrored) dp.C = -dp.C;
        return dp;
    }

    /// Unforced angular frequency d(h*)/d(lambda) = 2 beta d lambda^(2 beta - 1), in turns per unit time.
    double frequency(double lambda) const { return 2.0 * beta_ * d_ * std::pow(lambda, 2.0 * beta_ - 1.0); }

    /// h* = d lambda^(2 beta).
    double energy_of_action(double lambda) const { return d_ * std::pow(lambda, 2.0 * beta_); }

    double action_of_energy(double h) const { return std::pow(h / d_, 1.0 / (2.0 * beta_)); }

    /// Cheap estimate of the orbit time of a normalized point (X, Y) on the reference curve, accurate
    /// to about one grid cell; used to seed Newton and to unwind angles.
    double coarse_time(double X, double Y) const {
        double phi = monotone_angle(X, Y);
        auto it = std::upper_bound(phase_angle_.begin(), phase_angle_.end(), phi);
        std::size_t k = it == phase_angle_.begin() ? 0 : static_cast<std::size_t>(it - phase_angle_.begin()) - 1;
        if (k >= intervals()) k = intervals() - 1;
        const double lo = phase_angle_[k];
        const double hi = phase_angle_[k + 1];
        const double u = hi > lo ? std::clamp((phi - lo) / (hi - lo), 0.0, 1.0) : 0.0;
        return (static_cast<double>(k) + u) * spacing_;
    }

private:
    // atan2 of (-sqrt(n+1) S, sgn(C)|C|^(n+1)): strictly increasing along the orbit, from 0 to 2 pi.
    double monotone_angle(double X, double Y) const {
        const double u = std::copysign(detail::ipow(std::abs(X), n_ + 1), X);
        const double v = -std::sqrt(n_ + 1.0) * Y;
        double phi = std::atan2(v, u);
        if (phi < 0.0) phi += 2.0 * std::numbers::pi;
        return phi;
    }

    void build_angle_table() {
        const std::size_t N = intervals();
        phase_angle_.resize(N + 1);
        for (std::size_t k = 0; k <= N; ++k) phase_angle_[k] = monotone_angle(cos_[k], sin_[k]);
        phase_angle_[0] = 0.0;
        phase_angle_[N] = 2.0 * std::numbers::pi;
        for (std::size_t k = 1; k <= N; ++k) {
            if (k < N && phase_angle_[k] < 1.0 && k > N / 2) phase_angle_[k] = 2.0 * std::numbers::pi;
            if (phase_angle_[k] < phase_angle_[k - 1])
                throw NumericalError("reference orbit angle table is not monotone at sample " + std::to_string(k));
        }
    }

    std::pair<double, bool> reduce(double tau) const {
        double r = std::fmod(tau, period_);
        if (r < 0.0) r += period_;
        const double half = 0.5 * period_;
        if (r > half) return {period_ - r, true};
        return {r, false};
    }

    // Quintic Hermite on [0, T*/2] using values, first and second derivatives from the ODE.
    std::pair<OrbitPoint, OrbitPoint> interpolate(double r) const {
        const std::size_t last = intervals() / 2 - 1;
        std::size_t k = static_cast<std::size_t>(r / spacing_);
        if (k > last) k = last;
        const double h = spacing_;
        const double u = std::clamp((r - static_cast<double>(k) * h) / h, 0.0, 1.0);

        const double u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
        const double b0 = 1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5;
        const double b1 = u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5;
        const double b2 = 0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5);
        const double b3 = 0.5 * (u3 - 2.0 * u4 + u5);
        const double b4 = -4.0 * u3 + 7.0 * u4 - 3.0 * u5;
        const double b5 = 10.0 * u3 - 15.0 * u4 + 6.0 * u5;

        const double db0 = -30.0 * u2 + 60.0 * u3 - 30.0 * u4;
        const double db1 = 1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4;
        const double db2 = 0.5 * (2.0 * u - 9.0 * u2 + 12.0 * u3 - 5.0 * u4);
        const double db3 = 0.5 * (3.0 * u2 - 8.0 * u3 + 5.0 * u4);
        const double db4 = -12.0 * u2 + 28.0 * u3 - 15.0 * u4;
        const double db5 = 30.0 * u2 - 60.0 * u3 + 30.0 * u4;

        const double c0 = cos_[k], c1 = cos_[k + 1];
        const double s0 = sin_[k], s1 = sin_[k + 1];
        const int p = 2 * n_;
        const double c0p = detail::ipow(c0, p), c1p = detail::ipow(c1, p);
        // C' = S, C'' = -C^(2n+1); S' = -C^(2n+1), S'' = -(2n+1) C^(2n) S
        const double dc0 = s0, dc1 = s1;
        const double ddc0 = -c0p * c0, ddc1 = -c1p * c1;
        const double ds0 = ddc0, ds1 = ddc1;
        const double dds0 = -(p + 1.0) * c0p * s0, dds1 = -(p + 1.0) * c1p * s1;

        const double hh = h * h;
        OrbitPoint v{b0 * c0 + b1 * h * dc0 + b2 * hh * ddc0 + b3 * hh * ddc1 + b4 * h * dc1 + b5 * c1,
                     b0 * s0 + b1 * h * ds0 + b2 * hh * dds0 + b3 * hh * dds1 + b4 * h * ds1 + b5 * s1};
        OrbitPoint dv{(db0 * c0 + db1 * h * dc0 + db2 * hh * ddc0 + db3 * hh * ddc1 + db4 * h * dc1 + db5 * c1) / h,
                      (db0 * s0 + db1 * h * ds0 + db2 * hh * dds0 + db3 * hh * dds1 + db4 * h * ds1 + db5 * s1) / h};
        return {v, dv};
    }

    int n_;
    double tol_;
    double period_;
    std::vector<double> cos_;
    std::vector<double> sin_;
    std::vector<double> phase_angle_;
    double alpha_ = 0.0, beta_ = 0.0, c_ = 0.0, d_ = 0.0, spacing_ = 0.0;
};

/// Integrates C' = S, S' = -C^(2n+1) from (1, 0) by Taylor series, locates the minimal period as the
/// first downward zero of S near (1, 0) and refines it by Newton, then samples one period on a
/// uniform grid of `intervals` cells (doubled until the local truncation estimate meets `tol`).
inline SpecialFunctions compute_special_functions(int n, double tol = 1e-12,
                                                  std::size_t intervals = SpecialFunctions::kDefaultIntervals) {
    if (n < 1) throw PreconditionError("compute_special_functions: n >= 1 required");
    if (!(tol > 0.0) || tol > 1e-8) throw PreconditionError("compute_special_functions: 0 < tol <= 1e-8 required");
    if (intervals < 16 || intervals % 2 != 0)
        throw PreconditionError("compute_special_functions: even interval count >= 16 required");

    constexpr int kOrder = 24;
    constexpr std::size_t kMaxIntervals = std::size_t{1} << 20;
    detail::TaylorSeries series(n, kOrder);

    // Period search.
    const double scan_step = 1.0 / 1024.0;
    double tau = 0.0, x = 1.0, y = 0.0;
    bool passed_half = false;
    double period = 0.0;
    for (long step = 0; step < 1L << 22; ++step) {
        series.expand(x, y);
        if (series.tail(scan_step) > tol)
            throw ConvergenceError("special functions: tolerance not achievable at scan step", series.tail(scan_step));
        const auto next = series.eval(scan_step);
        if (!passed_half && x < 0.0 && next.S > 0.0) passed_half = true;
        if (passed_half && y > 0.0 && next.S <= 0.0) {
            double s = 0.5 * scan_step;
            double residual = 1.0;
            for (int it = 0; it < 60; ++it) {
                const double f = series.eval(s).S;
                const double df = series.eval_dy(s);
                const double ds = f / df;
                s -= ds;
                residual = std::abs(series.eval(s).S);
                if (std::abs(ds) < 1e-17 && residual <= 1e-12) break;
            }
            const auto at = series.eval(s);
            residual = std::abs(at.S);
            if (residual > 1e-12 || !(s >= 0.0 && s <= scan_step))
                throw ConvergenceError("special functions: period refinement did not converge", residual);
            if (std::abs(at.C - 1.0) > 1e-6)
                throw ConvergenceError("special functions: return point is not near (1, 0)", std::abs(at.C - 1.0));
            period = tau + s;
            break;
        }
        tau += scan_step;
        x = next.C;
        y = next.S;
    }
    if (!(period > 0.0)) throw ConvergenceError("special functions: no return to (1, 0) found", 1.0);

    // Uniform sampling, refined until each Taylor step meets the tolerance.
    for (std::size_t N = intervals; N <= kMaxIntervals; N *= 2) {
        const double h = period / static_cast<double>(N);
        std::vector<double> cs(N + 1), ss(N + 1);
        cs[0] = 1.0;
        ss[0] = 0.0;
        bool ok = true;
        for (std::size_t k = 0; k < N && ok; ++k) {
            series.expand(cs[k], ss[k]);
            if (series.tail(h) > tol) ok = false;
            const auto next = series.eval(h);
            cs[k + 1] = next.C;
            ss[k + 1] = next.S;
        }
        if (ok) return SpecialFunctions(n, tol, period, std::move(cs), std::move(ss));
    }
    throw ConvergenceError("special functions: tolerance not achievable with maximum grid size", tol);
}

/// (x, y) = phi(lambda, Theta).
inline std::pair<double, double> to_phase(const SpecialFunctions& sf, const ActionAngle& aa) {
    if (!(aa.lambda > 0.0)) throw PreconditionError("to_phase: lambda > 0 required");
    const double scale = sf.c() * aa.lambda;
    const auto p = sf.eval(aa.angle() * sf.period());
    return {std::pow(scale, sf.alpha()) * p.C, std::pow(scale, sf.beta()) * p.S};
}

/// Inverse chart. Theta is returned in [0, 1).
inline ActionAngle to_action_angle(const SpecialFunctions& sf, double x, double y) {
    if (x == 0.0 && y == 0.0) throw PreconditionError("to_action_angle: the origin has no action-angle coordinates");
    const int n = sf.n();
    const double lambda = sf.action_of_energy(reference_energy(n, x, y));
    const double scale = sf.c() * lambda;
    const double X = x / std::pow(scale, sf.alpha());
    const double Y = y / std::pow(scale, sf.beta());

    const double T = sf.period();
    double tau = sf.coarse_time(X, Y);
    double residual = 0.0;
    for (int it = 0; it < 50; ++it) {
        const auto p = sf.eval(tau);
        const double tc = p.S;
        const double ts = -detail::ipow(p.C, 2 * n + 1);
        const double rc = p.C - X;
        const double rs = p.S - Y;
        residual = std::hypot(rc, rs);
        const double step = -(rc * tc + rs * ts) / (tc * tc + ts * ts);
        tau += step;
        if (std::abs(step) <= 1e-15 * T) break;
    }
    const auto p = sf.eval(tau);
    residual = std::hypot(p.C - X, p.S - Y);
    if (!(residual <= 1e-9)) throw ConvergenceError("to_action_angle: Newton did not converge", residual);
    double theta = tau / T;
    theta -= std::floor(theta);
    if (theta >= 1.0) theta = 0.0;
    return {lambda, theta};
}

/// Circle angle in [0, 1) from the coarse table, without Newton refinement (error ~ one grid cell).
inline double coarse_angle(const SpecialFunctions& sf, double x, double y) {
    const double lambda = sf.action_of_energy(reference_energy(sf.n(), x, y));
    const double scale = sf.c() * lambda;
    return sf.coarse_time(x / std::pow(scale, sf.alpha()), y / std::pow(scale, sf.beta())) / sf.period();
}

/// |det D phi(lambda, theta)| by central differences; equals 1 for an area-preserving chart.
inline double jacobian_check(const SpecialFunctions& sf, const ActionAngle& aa) {
    if (!(aa.lambda > 0.0)) throw PreconditionError("jacobian_check: lambda > 0 required");
    const double hl = 1e-5 * aa.lambda;
    const double ht = 1e-5;
    const auto xl1 = to_phase(sf, {aa.lambda + hl, aa.Theta});
    const auto xl0 = to_phase(sf, {aa.lambda - hl, aa.Theta});
    const auto xt1 = to_phase(sf, {aa.lambda, aa.Theta + ht});
    const auto xt0 = to_phase(sf, {aa.lambda, aa.Theta - ht});
    const double dx_dl = (xl1.first - xl0.first) / (2.0 * hl);
    const double dy_dl = (xl1.second - xl0.second) / (2.0 * hl);
    const double dx_dt = (xt1.first - xt0.first) / (2.0 * ht);
    const double dy_dt = (xt1.second - xt0.second) / (2.0 * ht);
    return std::abs(dx_dl * dy_dt - dx_dt * dy_dl);
}

} // namespace iduff
