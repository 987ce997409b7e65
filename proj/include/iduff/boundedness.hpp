#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "invariant_curve.hpp"
#include "parallel.hpp"
#include "poincare.hpp"

namespace iduff {

/// Lower and upper invariant curves bounding an annulus.
struct CurveBracket {
    const InvariantCurveFit* lower = nullptr;
    const InvariantCurveFit* upper = nullptr;

    bool contains(const PoincarePoint& z) const {
        return lower->lambda_at_angle(z.Theta) < z.lambda && z.lambda < upper->lambda_at_angle(z.Theta);
    }
};

struct BoundednessOptions {
    int horizon = 1000;
    /// Number of leading periods used for the reference maximum.
    int window = 100;
};

struct BoundednessRow {
    PoincarePoint seed;
    int periods_completed = 0;
    bool escaped = false;
    std::string failure;
    double max_norm = 0.0;
    double window_max_norm = 0.0;
    /// max_norm / window_max_norm - 1.
    double growth_over_window = 0.0;
    /// Per-period maxima strictly increasing over the last half of the horizon.
    bool monotone_growth_last_half = false;
    std::optional<bool> stayed_between;
    /// First period at which the orbit was found outside the bracket.
    std::optional<int> left_bracket_at;
    bool degenerate = false;
    std::vector<double> period_max;
};

/// Iterates P for up to `horizon` periods from `seed`, recording max(|x| + |y|) along each period.
/// An escape or guard trip ends the run and is recorded, not thrown.
template <class Map>
BoundednessRow bounded_orbit(const Map& map, const PoincarePoint& seed, const BoundednessOptions& opt,
                             const std::optional<CurveBracket>& bracket = std::nullopt) {
    if (opt.horizon < 1) throw PreconditionError("boundedness_scan: horizon >= 1 required");
    BoundednessRow row;
    row.seed = seed;
    row.degenerate = map.config().schedule().degenerate();
    row.period_max.reserve(static_cast<std::size_t>(opt.horizon));
    if (bracket) row.stayed_between = bracket->contains(seed);
    if (bracket && !*row.stayed_between) row.left_bracket_at = 0;
    PoincarePoint z = seed;
    try {
        for (int k = 1; k <= opt.horizon; ++k) {
            const PoincareStep s = map.step(z);
            z = s.image;
            row.period_max.push_back(s.max_norm);
            row.periods_completed = k;
            if (bracket && !row.left_bracket_at && !bracket->contains(z)) {
                row.stayed_between = false;
                row.left_bracket_at = k;
            }
        }
    } catch (const NumericalError& e) {
        row.escaped = true;
        row.failure = e.what();
    }
    if (!row.period_max.empty()) {
        row.max_norm = *std::max_element(row.period_max.begin(), row.period_max.end());
        const auto w = std::min<std::size_t>(row.period_max.size(), static_cast<std::size_t>(std::max(opt.window, 1)));
        row.window_max_norm = *std::max_element(row.period_max.begin(), row.period_max.begin() + static_cast<std::ptrdiff_t>(w));
        row.growth_over_window = row.max_norm / row.window_max_norm - 1.0;
        const std::size_t half = row.period_max.size() / 2;
        bool mono = row.period_max.size() - half >= 2;
        for (std::size_t i = half + 1; i < row.period_max.size() && mono; ++i)
            mono = row.period_max[i] > row.period_max[i - 1];
        row.monotone_growth_last_half = mono;
    }
    return row;
}

/// bounded_orbit over a seed grid on `jobs` workers; rows are in seed order.
template <class Map>
std::vector<BoundednessRow> boundedness_scan(const Map& map, const std::vector<PoincarePoint>& seeds,
                                             const BoundednessOptions& opt,
                                             const std::optional<CurveBracket>& bracket = std::nullopt,
                                             unsigned jobs = 0) {
    return parallel_map(seeds.size(), jobs, [&](std::size_t i) { return bounded_orbit(map, seeds[i], opt, bracket); });
}

} // namespace iduff
