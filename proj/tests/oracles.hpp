#pragma once

// Independent reference computations used by the tests. Nothing here calls into the library.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace oracle {

/// 1 - (1 - u^2)^k without cancellation for small u.
inline double one_minus_power(double u, double k) { return -std::expm1(k * std::log1p(-u * u)); }

/// Minimal period of x'' + x^(2n+1) = 0 on the orbit through (1, 0):
/// T* = 4 sqrt(n+1) int_0^1 dx / sqrt(1 - x^(2n+2)), with x = 1 - u^2 removing the endpoint singularity,
/// evaluated by composite 8-point Gauss-Legendre.
inline double period(int n, int panels = 400) {
    static constexpr double nodes[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                        0.9602898564975363};
    static constexpr double weights[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                          0.1012285362903763};
    const double k = 2.0 * n + 2.0;
    auto f = [k](double u) { return 2.0 * u / std::sqrt(one_minus_power(u, k)); };
    double sum = 0.0;
    const double h = 1.0 / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h;
        for (int i = 0; i < 4; ++i) {
            const double off = 0.5 * h * nodes[i];
            sum += weights[i] * (f(mid - off) + f(mid + off));
        }
    }
    return 4.0 * std::sqrt(n + 1.0) * 0.5 * h * sum;
}

struct Constants {
    double T, alpha, beta, c, d;
};

inline Constants constants(int n) {
    Constants k{};
    k.T = period(n);
    k.alpha = 1.0 / (n + 2.0);
    k.beta = 1.0 - k.alpha;
    k.c = 1.0 / (k.alpha * k.T);
    k.d = std::pow(k.c, 2.0 * k.beta) / (2.0 * n + 2.0);
    return k;
}

/// Unforced frequency 2 beta d lambda^(2 beta - 1) (turns per unit time).
inline double frequency(int n, double lambda) {
    const auto k = constants(n);
    return 2.0 * k.beta * k.d * std::pow(lambda, 2.0 * k.beta - 1.0);
}

/// Unforced net angle advance over one period.
inline double unforced_advance(int n, double t1, double t2, double lambda) {
    return frequency(n, lambda) * (1.0 - 2.0 * (t2 - t1));
}

/// Action of the unforced orbit through (x, y): h = y^2/2 + x^(2n+2)/(2n+2) = d lambda^(2 beta).
inline double action(int n, double x, double y) {
    const auto k = constants(n);
    const double h = 0.5 * y * y + std::pow(x, 2 * n + 2) / (2.0 * n + 2.0);
    return std::pow(h / k.d, 1.0 / (2.0 * k.beta));
}

struct DiophantineBrute {
    bool pass = true;
    std::int64_t worst_p = 0;
    std::int64_t worst_q = 0;
    double worst_normalized = std::numeric_limits<double>::infinity();
};

/// Scans every q <= q_max and every p within two units of q omega.
inline DiophantineBrute diophantine(double omega, double c, double beta, int q_max) {
    DiophantineBrute out;
    for (int q = 1; q <= q_max; ++q) {
        const auto centre = static_cast<std::int64_t>(std::floor(q * omega));
        for (std::int64_t p = centre - 2; p <= centre + 2; ++p) {
            const double dist = std::abs(omega - static_cast<double>(p) / q);
            if (dist < c * std::pow(q, -2.0 - beta)) out.pass = false;
            const double normalized = dist * std::pow(q, 2.0 + beta);
            if (normalized < out.worst_normalized) {
                out.worst_normalized = normalized;
                out.worst_p = p;
                out.worst_q = q;
            }
        }
    }
    return out;
}

} // namespace oracle
