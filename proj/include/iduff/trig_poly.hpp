#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace iduff {

/// Real trigonometric polynomial of period 1:
/// f(t) = mean + sum_k a_k cos(2 pi k t) + b_k sin(2 pi k t), k = 1..K.
struct TrigPoly {
    double mean = 0.0;
    std::vector<std::pair<double, double>> harmonics; // (a_k, b_k) for k = 1, 2, ...

    static TrigPoly constant(double value) { return TrigPoly{value, {}}; }

    /// amplitude * cos(2 pi k t)
    static TrigPoly cosine(double amplitude, int k = 1) {
        TrigPoly p;
        p.harmonics.assign(static_cast<std::size_t>(k), {0.0, 0.0});
        p.harmonics.back().first = amplitude;
        return p;
    }

    bool is_zero() const {
        if (mean != 0.0) return false;
        for (const auto& [a, b] : harmonics)
            if (a != 0.0 || b != 0.0) return false;
        return true;
    }

    double operator()(double t) const {
        if (harmonics.empty()) return mean;
        const double phase = 2.0 * std::numbers::pi * reduce(t);
        double value = mean;
        for (std::size_t k = 0; k < harmonics.size(); ++k) {
            const auto [a, b] = harmonics[k];
            if (a == 0.0 && b == 0.0) continue;
            const double arg = static_cast<double>(k + 1) * phase;
            value += a * std::cos(arg) + b * std::sin(arg);
        }
        return value;
    }

    double derivative(double t) const {
        const double phase = 2.0 * std::numbers::pi * reduce(t);
        double value = 0.0;
        for (std::size_t k = 0; k < harmonics.size(); ++k) {
            const auto [a, b] = harmonics[k];
            if (a == 0.0 && b == 0.0) continue;
            const double omega = 2.0 * std::numbers::pi * static_cast<double>(k + 1);
            const double arg = static_cast<double>(k + 1) * phase;
            value += omega * (-a * std::sin(arg) + b * std::cos(arg));
        }
        return value;
    }

    friend bool operator==(const TrigPoly&, const TrigPoly&) = default;

private:
    // Evaluating on [0, 1) makes periodicity exact up to the rounding of t itself.
    static double reduce(double t) { return t - std::floor(t); }
};

} // namespace iduff
