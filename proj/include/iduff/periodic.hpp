#pragma once

// Periodic orbits as zeros of F(z) = lift(P^m)(z) - z - (0, p).
//
// The action component of F is measured relative to lambda, so residuals and tolerances are
// dimensionless and comparable across the annulus: F = ((lambda_m - lambda) / lambda, Theta_m - Theta - p).
// Newton runs in the variables (log lambda, Theta), in which this scaled F has an O(1) Jacobian.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "parallel.hpp"
#include "poincare.hpp"

namespace iduff {

struct PeriodicOptions {
    double tol = 1e-9;
    int max_iter = 40;
    /// Central-difference step in log lambda and Theta.
    double fd_step = 1e-7;
    double dedup_tol = 1e-6;
    double minimality_tol = 1e-6;
    double separation = 1e-6;
};

struct PeriodicOrbit {
    PoincarePoint point;
    int m = 1;
    long p = 0;
    double residual = 0.0;
    bool minimal = false;
    /// point, P(point), ..., P^(m-1)(point).
    std::vector<PoincarePoint> orbit;
    /// Smallest pairwise separation among the orbit points.
    double min_separation = 0.0;
    std::size_t seed_index = 0;
};

struct PeriodicSearchResult {
    std::vector<PeriodicOrbit> orbits;
    /// Smallest residual reached from any seed.
    double best_residual = std::numeric_limits<double>::infinity();
    std::vector<std::string> log;
};

/// Action on which the unforced net advance equals p/m:
/// Omega(lambda) (1 - 2 (t2 - t1)) = p / m.
inline double resonant_action(const SpecialFunctions& sf, const ImpulseSchedule& schedule, int m, long p) {
    if (m < 1) throw PreconditionError("resonant_action: m >= 1 required");
    const double target = static_cast<double>(p) / (m * schedule.twist_factor());
    if (schedule.degenerate() || !(target > 0.0))
        throw PreconditionError("resonant_action: p / m and the twist factor must share a sign");
    // Omega(lambda) = 2 beta d lambda^(2 beta - 1)
    return std::pow(target / (2.0 * sf.beta() * sf.d()), 1.0 / (2.0 * sf.beta() - 1.0));
}

namespace detail {

/// Distance on the section: relative action difference plus circular angle difference.
inline double section_distance(const PoincarePoint& a, const PoincarePoint& b) {
    const double scale = 0.5 * (a.lambda + b.lambda);
    return std::max(std::abs(a.lambda - b.lambda) / scale, std::abs(wrap_half(a.Theta - b.Theta)));
}

inline Eigen::Vector2d periodic_defect(const PoincarePoint& z, const PoincarePoint& image, long p) {
    return {(image.lambda - z.lambda) / z.lambda, image.Theta - z.Theta - static_cast<double>(p)};
}

inline double defect_norm(const Eigen::Vector2d& F) { return F.cwiseAbs().maxCoeff(); }

/// Smallest scaled defect of P^k at z over all integer windings.
template <class Map>
double best_winding_defect(const Map& map, const PoincarePoint& z, int k) {
    const PoincarePoint w = map.iterate(z, k);
    const long q = std::lround(w.Theta - z.Theta);
    return defect_norm(periodic_defect(z, w, q));
}

struct NewtonOutcome {
    bool converged = false;
    bool singular = false;
    PoincarePoint z;
    double residual = std::numeric_limits<double>::infinity();
    std::string note;
};

template <class Map>
NewtonOutcome periodic_newton(const Map& map, PoincarePoint z, int m, long p, const PeriodicOptions& opt) {
    NewtonOutcome out;
    auto F = [&](const PoincarePoint& q) { return periodic_defect(q, map.iterate(q, m), p); };
    auto shifted = [](const PoincarePoint& q, double du, double dTheta) {
        return PoincarePoint{q.lambda * std::exp(du), q.Theta + dTheta};
    };
    Eigen::Vector2d Fz = F(z);
    double r = defect_norm(Fz);
    for (int it = 0; it < opt.max_iter && r > opt.tol; ++it) {
        const double h = opt.fd_step;
        Eigen::Matrix2d J;
        J.col(0) = (F(shifted(z, h, 0.0)) - F(shifted(z, -h, 0.0))) / (2.0 * h);
        J.col(1) = (F(shifted(z, 0.0, h)) - F(shifted(z, 0.0, -h))) / (2.0 * h);
        if (!J.allFinite() || J.cwiseAbs().maxCoeff() == 0.0) {
            out.singular = true;
            out.note = "singular finite-difference Jacobian";
            break;
        }
        // Minimum-norm step: rank deficiency (a whole circle of solutions) is legitimate here.
        Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix2d> cod(J);
        cod.setThreshold(1e-10);
        const Eigen::Vector2d delta = cod.solve(-Fz);
        if (!delta.allFinite()) {
            out.singular = true;
            out.note = "Newton step not finite";
            break;
        }
        double t = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 12; ++ls, t *= 0.5) {
            const PoincarePoint trial = shifted(z, t * delta(0), t * delta(1));
            const Eigen::Vector2d Ft = F(trial);
            const double rt = defect_norm(Ft);
            if (std::isfinite(rt) && rt < r) {
                z = trial;
                Fz = Ft;
                r = rt;
                improved = true;
                break;
            }
        }
        if (!improved) {
            out.note = "line search stalled";
            break;
        }
    }
    out.z = z;
    out.residual = r;
    out.converged = r <= opt.tol;
    return out;
}

} // namespace detail

/// Orbit data, separation and minimality for a converged point.
template <class Map>
PeriodicOrbit describe_periodic_orbit(const Map& map, const PoincarePoint& z, int m, long p, double residual,
                                      const PeriodicOptions& opt = {}) {
    PeriodicOrbit orb;
    orb.point = z;
    orb.m = m;
    orb.p = p;
    orb.residual = residual;
    orb.orbit.push_back(z);
    for (int k = 1; k < m; ++k) orb.orbit.push_back(map(orb.orbit.back()));
    orb.min_separation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < orb.orbit.size(); ++i)
        for (std::size_t j = i + 1; j < orb.orbit.size(); ++j)
            orb.min_separation = std::min(orb.min_separation, detail::section_distance(orb.orbit[i], orb.orbit[j]));
    bool minimal = m == 1 || orb.min_separation >= opt.separation;
    for (int d = 1; d < m && minimal; ++d)
        if (m % d == 0 && detail::best_winding_defect(map, z, d) <= opt.minimality_tol) minimal = false;
    orb.minimal = minimal;
    return orb;
}

/// Newton search from every seed (in parallel), then a serial pass that merges solutions lying
/// on the same orbit.
template <class Map>
PeriodicSearchResult find_periodic_orbits(const Map& map, int m, long p, const std::vector<PoincarePoint>& seeds,
                                          const PeriodicOptions& opt = {}, unsigned jobs = 0) {
    if (m < 1) throw PreconditionError("find_periodic_orbit: m >= 1 required");
    struct SeedOutcome {
        detail::NewtonOutcome newton;
        std::string error;
    };
    const auto outcomes = parallel_map(seeds.size(), jobs, [&](std::size_t i) {
        SeedOutcome o;
        try {
            o.newton = detail::periodic_newton(map, seeds[i], m, p, opt);
        } catch (const NumericalError& e) {
            o.error = e.what();
        }
        return o;
    });

    PeriodicSearchResult result;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        const std::string tag = "seed " + std::to_string(i) + ": ";
        if (!o.error.empty()) {
            result.log.push_back(tag + o.error);
            continue;
        }
        result.best_residual = std::min(result.best_residual, o.newton.residual);
        if (o.newton.singular) {
            result.log.push_back(tag + "skipped, " + o.newton.note);
            continue;
        }
        if (!o.newton.converged) {
            result.log.push_back(tag + "no convergence, residual " + std::to_string(o.newton.residual) +
                                 (o.newton.note.empty() ? "" : " (" + o.newton.note + ")"));
            continue;
        }
        bool duplicate = false;
        for (const auto& known : result.orbits)
            for (const auto& q : known.orbit)
                if (detail::section_distance(q, o.newton.z) <= opt.dedup_tol) duplicate = true;
        if (duplicate) continue;
        try {
            PeriodicOrbit orb = describe_periodic_orbit(map, o.newton.z, m, p, o.newton.residual, opt);
            orb.seed_index = i;
            result.orbits.push_back(std::move(orb));
        } catch (const NumericalError& e) {
            result.log.push_back(tag + "orbit check failed, " + e.what());
        }
    }
    return result;
}

inline PeriodicSearchResult find_periodic_orbits(const SystemConfig& config, const SpecialFunctions& sf, int m, long p,
                                                 const std::vector<PoincarePoint>& seeds,
                                                 const PeriodicOptions& opt = {}, unsigned jobs = 0) {
    return find_periodic_orbits(PoincareMap(config, sf), m, p, seeds, opt, jobs);
}

/// Seeds on the unforced resonant circle for (m, p): `count` equally spaced angles.
inline std::vector<PoincarePoint> resonant_seeds(const SpecialFunctions& sf, const ImpulseSchedule& schedule, int m,
                                                 long p, int count) {
    const double lam = resonant_action(sf, schedule, m, p);
    std::vector<PoincarePoint> seeds;
    for (int j = 0; j < count; ++j) seeds.push_back({lam, static_cast<double>(j) / count});
    return seeds;
}

} // namespace iduff
