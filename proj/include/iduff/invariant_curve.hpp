#pragma once

// Invariant-curve detection by orbit fitting in conjugacy form.
//
// An orbit (lambda_k, Theta_k) on an invariant circle with rotation number rho is parameterized by
// xi_k = k rho, and the curve is written as
//
//   Theta = xi + p(xi),   lambda = q(xi),
//
// with p, q trigonometric polynomials of degree K fitted by least squares. Invariance means
// P(curve(xi)) = curve(xi + rho); the residual is checked on a 4K-point grid of fresh test angles.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "parallel.hpp"
#include "poincare.hpp"
#include "rotation.hpp"

namespace iduff {

/// a0 + sum_k (a_k cos 2 pi k s + b_k sin 2 pi k s).
struct FourierSeries {
    double a0 = 0.0;
    std::vector<double> a;
    std::vector<double> b;

    int modes() const { return static_cast<int>(a.size()); }

    double operator()(double s) const {
        double v = a0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double w = 2.0 * std::numbers::pi * static_cast<double>(k + 1) * s;
            v += a[k] * std::cos(w) + b[k] * std::sin(w);
        }
        return v;
    }

    double derivative(double s) const {
        double v = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double f = 2.0 * std::numbers::pi * static_cast<double>(k + 1);
            v += f * (b[k] * std::cos(f * s) - a[k] * std::sin(f * s));
        }
        return v;
    }
};

struct CurveOptions {
    int modes = 16;
    int iterates = 2000;
    double dioph_c = 1e-2;
    double dioph_beta = 0.5;
    int q_max = 10000;
    /// Accept when residual <= threshold_factor * median lambda.
    double threshold_factor = 1e-6;
    /// Angle coverage gap limit, in units of 1/N.
    double gap_factor = 3.0;
};

enum class CurveStatus { accepted, rejected_residual, not_diophantine, gap_detected, escaped };

inline const char* to_string(CurveStatus s) {
    switch (s) {
    case CurveStatus::accepted: return "accepted";
    case CurveStatus::rejected_residual: return "rejected_residual";
    case CurveStatus::not_diophantine: return "not_diophantine";
    case CurveStatus::gap_detected: return "gap_detected";
    case CurveStatus::escaped: return "escaped";
    }
    return "unknown";
}

struct InvariantCurveFit {
    CurveStatus status = CurveStatus::escaped;
    PoincarePoint seed;
    FourierSeries angle_shift; // p
    FourierSeries action;      // q
    RotationEstimate rotation;
    DiophantineVerdict diophantine;
    double rho = 0.0;
    double residual = 0.0;
    double threshold = 0.0;
    /// max over test angles of |xi' - xi - rho| where curve(xi') = P(curve(xi)).
    double max_advance_deviation = 0.0;
    double median_lambda = 0.0;
    double max_gap = 0.0;
    /// min over the test grid of 1 + p'(xi); positive means the curve is a graph over the angle.
    double min_angle_speed = 0.0;
    std::string note;

    bool accepted() const { return status == CurveStatus::accepted; }

    /// Curve point at conjugacy parameter xi.
    PoincarePoint at(double xi) const { return {action(xi), xi + angle_shift(xi)}; }

    /// Conjugacy parameter xi with xi + p(xi) = Theta (on the lift).
    double parameter_of_angle(double Theta) const {
        // xi + p(xi) - Theta is increasing; bracket with the bound |p - a0| <= sum |a_k| + |b_k|.
        double amp = 0.0;
        for (std::size_t k = 0; k < angle_shift.a.size(); ++k)
            amp += std::abs(angle_shift.a[k]) + std::abs(angle_shift.b[k]);
        const double base = Theta - angle_shift.a0;
        double lo = base - amp - 1e-12, hi = base + amp + 1e-12;
        double xi = base;
        for (int it = 0; it < 100; ++it) {
            const double g = xi + angle_shift(xi) - Theta;
            if (g > 0.0) hi = xi;
            else lo = xi;
            const double dg = 1.0 + angle_shift.derivative(xi);
            double next = xi - g / dg;
            if (!(next > lo && next < hi) || !(dg > 0.0)) next = 0.5 * (lo + hi);
            if (std::abs(next - xi) < 1e-15 * std::max(1.0, std::abs(xi))) return next;
            xi = next;
        }
        return xi;
    }

    /// Action of the curve above the angle Theta (the curve as a graph lambda(theta)).
    double lambda_at_angle(double Theta) const { return action(parameter_of_angle(Theta)); }
};

namespace detail {

/// Least-squares fit of two series on common sample parameters.
inline std::pair<FourierSeries, FourierSeries> fit_fourier_pair(const std::vector<double>& s,
                                                                const std::vector<double>& u,
                                                                const std::vector<double>& v, int K) {
    const auto N = static_cast<Eigen::Index>(s.size());
    const Eigen::Index cols = 2 * K + 1;
    Eigen::MatrixXd A(N, cols);
    Eigen::MatrixXd rhs(N, 2);
    for (Eigen::Index i = 0; i < N; ++i) {
        const double si = s[static_cast<std::size_t>(i)];
        A(i, 0) = 1.0;
        for (int k = 1; k <= K; ++k) {
            const double w = 2.0 * std::numbers::pi * k * si;
            A(i, 2 * k - 1) = std::cos(w);
            A(i, 2 * k) = std::sin(w);
        }
        rhs(i, 0) = u[static_cast<std::size_t>(i)];
        rhs(i, 1) = v[static_cast<std::size_t>(i)];
    }
    const Eigen::MatrixXd coef = A.colPivHouseholderQr().solve(rhs);
    auto unpack = [&](Eigen::Index col) {
        FourierSeries f;
        f.a0 = coef(0, col);
        for (int k = 1; k <= K; ++k) {
            f.a.push_back(coef(2 * k - 1, col));
            f.b.push_back(coef(2 * k, col));
        }
        return f;
    };
    return {unpack(0), unpack(1)};
}

inline double max_circle_gap(std::vector<double> angles) {
    if (angles.empty()) return 1.0;
    for (double& a : angles) a -= std::floor(a);
    std::sort(angles.begin(), angles.end());
    double gap = angles.front() + 1.0 - angles.back();
    for (std::size_t i = 1; i < angles.size(); ++i) gap = std::max(gap, angles[i] - angles[i - 1]);
    return gap;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

} // namespace detail

/// Iterates `map` from `seed`, screens the orbit (escape, angle gaps, Diophantine rotation number)
/// and fits the curve in conjugacy form. Never throws for numerical trouble along the orbit; the
/// outcome is reported through `status`.
template <class Map>
InvariantCurveFit find_invariant_curve(const Map& map, const PoincarePoint& seed, const CurveOptions& opt = {}) {
    if (opt.modes < 1 || opt.iterates < 4 * opt.modes + 2)
        throw PreconditionError("find_invariant_curve: need modes >= 1 and iterates >= 4 modes + 2");
    InvariantCurveFit fit;
    fit.seed = seed;

    const auto N = static_cast<std::size_t>(opt.iterates);
    std::vector<PoincarePoint> orbit;
    orbit.reserve(N + 1);
    orbit.push_back(seed);
    try {
        for (std::size_t k = 0; k < N; ++k) orbit.push_back(map(orbit.back()));
    } catch (const NumericalError& e) {
        fit.status = CurveStatus::escaped;
        fit.note = e.what();
        return fit;
    }

    std::vector<double> lambdas, angles, increments;
    lambdas.reserve(N);
    angles.reserve(N);
    increments.reserve(N);
    for (std::size_t k = 0; k < N; ++k) {
        lambdas.push_back(orbit[k].lambda);
        angles.push_back(orbit[k].Theta);
        increments.push_back(orbit[k + 1].Theta - orbit[k].Theta);
    }
    fit.median_lambda = detail::median(lambdas);
    fit.threshold = opt.threshold_factor * fit.median_lambda;
    fit.rotation = rotation_from_increments(increments);
    fit.rho = fit.rotation.value;
    fit.diophantine = diophantine_check(fit.rho, opt.dioph_c, opt.dioph_beta, opt.q_max);

    fit.max_gap = detail::max_circle_gap(angles);
    if (fit.max_gap > opt.gap_factor / static_cast<double>(N)) {
        fit.status = CurveStatus::gap_detected;
        fit.note = "angle coverage gap " + std::to_string(fit.max_gap);
        return fit;
    }
    if (!fit.diophantine.pass) {
        fit.status = CurveStatus::not_diophantine;
        fit.note = "rotation number fails the Diophantine bound at q = " + std::to_string(fit.diophantine.worst_q);
        return fit;
    }

    std::vector<double> xi(N), shift(N);
    for (std::size_t k = 0; k < N; ++k) {
        const double lifted = static_cast<double>(k) * fit.rho;
        xi[k] = lifted - std::floor(lifted);
        shift[k] = orbit[k].Theta - seed.Theta - lifted;
    }
    auto [p, q] = detail::fit_fourier_pair(xi, shift, lambdas, opt.modes);
    p.a0 += seed.Theta;
    fit.angle_shift = std::move(p);
    fit.action = std::move(q);

    const int G = 4 * opt.modes;
    fit.min_angle_speed = std::numeric_limits<double>::infinity();
    try {
        for (int j = 0; j < G; ++j) {
            const double s = (j + 0.5) / G;
            const PoincarePoint img = map(fit.at(s));
            const PoincarePoint want = fit.at(s + fit.rho);
            const double dl = std::abs(img.lambda - want.lambda);
            const double da = std::abs(detail::wrap_half(img.Theta - want.Theta));
            fit.residual = std::max(fit.residual, dl + da);
            const double s_img = fit.parameter_of_angle(want.Theta + detail::wrap_half(img.Theta - want.Theta));
            fit.max_advance_deviation = std::max(fit.max_advance_deviation, std::abs(s_img - s - fit.rho));
            fit.min_angle_speed = std::min(fit.min_angle_speed, 1.0 + fit.angle_shift.derivative(s));
        }
    } catch (const NumericalError& e) {
        fit.status = CurveStatus::escaped;
        fit.note = std::string("test grid: ") + e.what();
        return fit;
    }
    if (!(fit.min_angle_speed > 0.0)) {
        fit.status = CurveStatus::rejected_residual;
        fit.note = "fitted curve is not a graph over the angle";
        return fit;
    }
    fit.status = fit.residual <= fit.threshold ? CurveStatus::accepted : CurveStatus::rejected_residual;
    return fit;
}

inline InvariantCurveFit find_invariant_curve(const SystemConfig& config, const SpecialFunctions& sf,
                                              const PoincarePoint& seed, const CurveOptions& opt = {}) {
    return find_invariant_curve(PoincareMap(config, sf), seed, opt);
}

/// Runs find_invariant_curve over a seed grid on `jobs` workers; results are in seed order.
template <class Map>
std::vector<InvariantCurveFit> find_invariant_curves(const Map& map, const std::vector<PoincarePoint>& seeds,
                                                     const CurveOptions& opt = {}, unsigned jobs = 0) {
    return parallel_map(seeds.size(), jobs, [&](std::size_t i) { return find_invariant_curve(map, seeds[i], opt); });
}

} // namespace iduff
