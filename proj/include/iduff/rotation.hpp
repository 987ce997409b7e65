#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "poincare.hpp"

namespace iduff {

struct RotationEstimate {
    double value = 0.0;       // on the lift, not reduced mod 1
    double error_bound = 0.0; // |estimate(N) - estimate(N/2)|
    int iterates_used = 0;
    bool usable = false;      // false when the orbit escaped or tripped a guard early
    std::string method = "weighted-birkhoff";
    std::string failure;
};

/// Bump weight exp(-1/(s(1-s))) on (0, 1), zero outside.
inline double birkhoff_weight(double s) {
    if (!(s > 0.0 && s < 1.0)) return 0.0;
    return std::exp(-1.0 / (s * (1.0 - s)));
}

/// Weighted Birkhoff average sum w(k/N) v_k / sum w(k/N) over k = 0..N-1.
inline double weighted_birkhoff_average(std::span<const double> values) {
    const std::size_t N = values.size();
    if (N == 0) return std::numeric_limits<double>::quiet_NaN();
    if (N < 3) {
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc / static_cast<double>(N);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        const double w = birkhoff_weight(static_cast<double>(k) / static_cast<double>(N));
        num += w * values[k];
        den += w;
    }
    return num / den;
}

/// Rotation number from lifted angle increments.
inline RotationEstimate rotation_from_increments(std::span<const double> increments) {
    RotationEstimate est;
    est.iterates_used = static_cast<int>(increments.size());
    if (increments.empty()) return est;
    est.value = weighted_birkhoff_average(increments);
    const auto half = increments.first(std::max<std::size_t>(1, increments.size() / 2));
    est.error_bound = std::abs(est.value - weighted_birkhoff_average(half));
    est.usable = true;
    return est;
}

/// Iterates a lift map N times from `seed` and estimates the rotation number by a weighted Birkhoff
/// average of the angle increments. Escapes and guard trips yield a partial, unusable estimate.
template <class Map>
RotationEstimate rotation_number(const Map& map, PoincarePoint seed, int N) {
    if (N < 1) throw PreconditionError("rotation_number: N >= 1 required");
    std::vector<double> inc;
    inc.reserve(static_cast<std::size_t>(N));
    PoincarePoint z = seed;
    try {
        for (int k = 0; k < N; ++k) {
            const PoincarePoint next = map(z);
            inc.push_back(next.Theta - z.Theta);
            z = next;
        }
    } catch (const NumericalError& e) {
        auto est = rotation_from_increments(inc);
        est.usable = false;
        est.failure = e.what();
        return est;
    }
    return rotation_from_increments(inc);
}

inline RotationEstimate rotation_number(const SystemConfig& config, const SpecialFunctions& sf, PoincarePoint seed,
                                        int N) {
    return rotation_number(PoincareMap(config, sf), seed, N);
}

struct DiophantineVerdict {
    double omega = 0.0;
    double c = 0.0;
    double beta_exponent = 0.0;
    int q_max = 0;
    bool pass = false;
    /// Minimizer of |omega - p/q| q^(2+beta) over 1 <= q <= q_max, p = round(q omega).
    std::int64_t worst_p = 0;
    std::int64_t worst_q = 0;
    /// |omega - worst_p / worst_q|.
    double margin = 0.0;
    /// margin * worst_q^(2+beta); the verdict passes iff this is >= c.
    double normalized_margin = 0.0;
};

/// Exhaustive check of |omega - p/q| >= c q^(-2-beta) for q = 1..q_max with the nearest p.
inline DiophantineVerdict diophantine_check(double omega, double c, double beta_exponent, int q_max) {
    if (q_max < 1) throw PreconditionError("diophantine_check: q_max >= 1 required");
    if (!(c > 0.0) || !(beta_exponent > 0.0)) throw PreconditionError("diophantine_check: c, beta > 0 required");
    DiophantineVerdict v{omega, c, beta_exponent, q_max};
    v.pass = true;
    double worst = std::numeric_limits<double>::infinity();
    for (int q = 1; q <= q_max; ++q) {
        const double qd = static_cast<double>(q);
        const double p = std::round(qd * omega);
        const double dist = std::abs(qd * omega - p) / qd;
        const double normalized = dist * std::pow(qd, 2.0 + beta_exponent);
        if (dist < c * std::pow(qd, -2.0 - beta_exponent)) v.pass = false;
        if (normalized < worst) {
            worst = normalized;
            v.worst_p = static_cast<std::int64_t>(p);
            v.worst_q = q;
            v.margin = dist;
            v.normalized_margin = normalized;
        }
    }
    return v;
}

/// The small-twist form |omega/(2 pi) - p/q| >= gamma^kappa / q^mu (q > 0), checked for q <= q_max.
inline DiophantineVerdict diophantine_check_small_twist(double omega, double gamma, double kappa, double mu,
                                                        int q_max) {
    if (!(mu > 2.0)) throw PreconditionError("diophantine_check_small_twist: mu > 2 required");
    return diophantine_check(omega / (2.0 * std::numbers::pi), std::pow(gamma, kappa), mu - 2.0, q_max);
}

} // namespace iduff
