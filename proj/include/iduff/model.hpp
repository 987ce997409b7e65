#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "error.hpp"
#include "trig_poly.hpp"

namespace iduff {

/// Two velocity-reversal impulses per unit period at t1 < t2, repeated with period 1.
class ImpulseSchedule {
public:
    static constexpr double kDegeneracyTolerance = 1e-12;

    ImpulseSchedule(double t1, double t2) : t1_(t1), t2_(t2) {
        if (!(std::isfinite(t1) && std::isfinite(t2)))
            throw ValidationError("impulse times must be finite");
        if (!(t1 > 0.0 && t1 < 1.0)) throw ValidationError("0 < t1 < 1 violated");
        if (!(t2 > 0.0 && t2 < 1.0)) throw ValidationError("0 < t2 < 1 violated");
        if (!(t1 < t2)) throw ValidationError("t1 < t2 violated");
    }

    double t1() const { return t1_; }
    double t2() const { return t2_; }
    double spacing() const { return t2_ - t1_; }

    /// Sign-carrying twist factor 1 - 2 (t2 - t1).
    double twist_factor() const { return 1.0 - 2.0 * spacing(); }

    /// Spacing equal to one half: the leading twist vanishes.
    bool degenerate() const { return std::abs(spacing() - 0.5) < kDegeneracyTolerance; }

    /// j-th impulse time for j >= 1 (t_1, t_2, t_1 + 1, t_2 + 1, ...).
    double impulse_time(long j) const {
        if (j < 1) throw std::out_of_range("impulse index must be >= 1");
        const long k = (j - 1) / 2;
        return ((j - 1) % 2 == 0 ? t1_ : t2_) + static_cast<double>(k);
    }

    /// Impulse times in the half-open window (a, b], ascending.
    std::vector<double> times_in(double a, double b) const {
        std::vector<double> out;
        if (!(b > a)) return out;
        for (double k = std::floor(a) - 1.0; k <= std::ceil(b); k += 1.0) {
            for (double base : {t1_, t2_}) {
                const double tj = k + base;
                if (tj > a && tj <= b) out.push_back(tj);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    friend bool operator==(const ImpulseSchedule&, const ImpulseSchedule&) = default;

private:
    double t1_;
    double t2_;
};

struct IntegratorSettings {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    double max_step = 0.05;
    /// Trajectories with |x| + |y| above this are reported as escaped.
    double escape_guard = 1e12;

    friend bool operator==(const IntegratorSettings&, const IntegratorSettings&) = default;
};

/// Equation data: degree n, coefficients p_0..p_2n, impulse schedule, integrator settings.
/// Immutable once constructed; the constructor enforces every invariant.
class SystemConfig {
public:
    SystemConfig(int n, std::vector<TrigPoly> coefficients, ImpulseSchedule schedule,
                 IntegratorSettings integrator = {})
        : n_(n), coefficients_(std::move(coefficients)), schedule_(schedule),
          integrator_(integrator) {
        validate();
    }

    /// x'' + x^(2n+1) = 0 with the given impulses.
    static SystemConfig unforced(int n, ImpulseSchedule schedule, IntegratorSettings integrator = {}) {
        if (n < 1) throw ValidationError("n >= 1 violated");
        return SystemConfig(n, std::vector<TrigPoly>(static_cast<std::size_t>(2 * n + 1)), schedule,
                            integrator);
    }

    /// Copy with coefficient i replaced.
    SystemConfig with_coefficient(int i, TrigPoly p) const {
        auto coeffs = coefficients_;
        coeffs.at(static_cast<std::size_t>(i)) = std::move(p);
        return SystemConfig(n_, std::move(coeffs), schedule_, integrator_);
    }

    SystemConfig with_schedule(ImpulseSchedule schedule) const {
        return SystemConfig(n_, coefficients_, schedule, integrator_);
    }

    SystemConfig with_integrator(IntegratorSettings integrator) const {
        return SystemConfig(n_, coefficients_, schedule_, integrator);
    }

    int n() const { return n_; }
    const std::vector<TrigPoly>& coefficients() const { return coefficients_; }
    const ImpulseSchedule& schedule() const { return schedule_; }
    const IntegratorSettings& integrator() const { return integrator_; }
    bool degenerate() const { return schedule_.degenerate(); }

    bool unforced_system() const {
        return std::all_of(coefficients_.begin(), coefficients_.end(),
                           [](const TrigPoly& p) { return p.is_zero(); });
    }

    friend bool operator==(const SystemConfig&, const SystemConfig&) = default;

private:
    void validate() const {
        if (n_ < 1) throw ValidationError("n >= 1 violated");
        if (coefficients_.size() != static_cast<std::size_t>(2 * n_ + 1))
            throw ValidationError("coefficient count == 2n+1 violated (expected " +
                                  std::to_string(2 * n_ + 1) + ", got " +
                                  std::to_string(coefficients_.size()) + ")");
        for (const auto& p : coefficients_) {
            bool ok = std::isfinite(p.mean);
            for (const auto& [a, b] : p.harmonics) ok = ok && std::isfinite(a) && std::isfinite(b);
            if (!ok) throw ValidationError("coefficients must be finite");
        }
        if (!(integrator_.abs_tol > 0.0) || !std::isfinite(integrator_.abs_tol))
            throw ValidationError("abs_tol > 0 violated");
        if (!(integrator_.rel_tol > 0.0) || !std::isfinite(integrator_.rel_tol))
            throw ValidationError("rel_tol > 0 violated");
        if (!(integrator_.escape_guard > 0.0))
            throw ValidationError("escape_guard > 0 violated");
        const double gap = std::min({schedule_.t1(), schedule_.spacing(), 1.0 - schedule_.t2()});
        if (!(integrator_.max_step > 0.0) || integrator_.max_step > gap)
            throw ValidationError("max_step in (0, min(t1, t2-t1, 1-t2)] violated");
    }

    int n_;
    std::vector<TrigPoly> coefficients_;
    ImpulseSchedule schedule_;
    IntegratorSettings integrator_;
};

/// p_i(t).
inline double eval_coefficient(const SystemConfig& config, int i, double t) {
    if (i < 0 || i > 2 * config.n())
        throw std::out_of_range("coefficient index " + std::to_string(i) + " outside [0, 2n]");
    return config.coefficients()[static_cast<std::size_t>(i)](t);
}

} // namespace iduff
