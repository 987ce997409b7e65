#pragma once

#include <cmath>

namespace iduff {

/// A point of the extended phase space (time, position, velocity).
struct PhaseState {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;

    bool finite() const { return std::isfinite(t) && std::isfinite(x) && std::isfinite(y); }
    double norm1() const { return std::abs(x) + std::abs(y); }
};

} // namespace iduff
