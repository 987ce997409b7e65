#pragma once

// Seed grids on the section, written as
//
//   lambda=START:STOP[:lin|log]:COUNT,theta=START:STOP[:lin]:COUNT
//
// lambda grids include both endpoints; theta grids are periodic and exclude STOP. Either axis may
// be omitted (lambda defaults to 1, theta to 0). Seeds are ordered lambda-major.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "poincare.hpp"

namespace iduff {

struct GridAxis {
    double start = 0.0;
    double stop = 0.0;
    bool log_scale = false;
    int count = 1;
};

struct SeedGrid {
    GridAxis lambda{1.0, 1.0, false, 1};
    GridAxis theta{0.0, 1.0, false, 1};

    std::vector<double> lambda_values() const {
        std::vector<double> v;
        for (int i = 0; i < lambda.count; ++i) {
            const double u = lambda.count == 1 ? 0.0 : static_cast<double>(i) / (lambda.count - 1);
            v.push_back(lambda.log_scale ? lambda.start * std::pow(lambda.stop / lambda.start, u)
                                         : lambda.start + u * (lambda.stop - lambda.start));
        }
        if (lambda.count > 1) v.back() = lambda.stop;
        return v;
    }

    std::vector<double> theta_values() const {
        std::vector<double> v;
        for (int i = 0; i < theta.count; ++i)
            v.push_back(theta.start + (theta.stop - theta.start) * static_cast<double>(i) / theta.count);
        return v;
    }

    std::vector<PoincarePoint> points() const {
        std::vector<PoincarePoint> out;
        for (double l : lambda_values())
            for (double t : theta_values()) out.push_back({l, t});
        return out;
    }
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) return out;
        pos = next + 1;
    }
}

inline double parse_real(std::string_view s, std::string_view what) {
    const std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(str, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != str.size() || str.empty() || !std::isfinite(v))
        throw ValidationError("seed grid: bad number '" + str + "' in " + std::string(what));
    return v;
}

inline int parse_count(std::string_view s, std::string_view what) {
    const double v = parse_real(s, what);
    if (v != std::floor(v) || v < 1 || v > 1e6)
        throw ValidationError("seed grid: count must be a positive integer in " + std::string(what));
    return static_cast<int>(v);
}

} // namespace detail

inline SeedGrid parse_seed_grid(std::string_view text) {
    SeedGrid grid;
    bool seen_lambda = false, seen_theta = false;
    for (auto part : detail::split(text, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string_view::npos) throw ValidationError("seed grid: expected key=value in '" + std::string(part) + "'");
        const auto key = part.substr(0, eq);
        const auto fields = detail::split(part.substr(eq + 1), ':');
        if (fields.size() != 3 && fields.size() != 4)
            throw ValidationError("seed grid: expected START:STOP[:SCALE]:COUNT for '" + std::string(key) + "'");
        GridAxis axis;
        axis.start = detail::parse_real(fields[0], key);
        axis.stop = detail::parse_real(fields[1], key);
        axis.count = detail::parse_count(fields.back(), key);
        if (fields.size() == 4) {
            if (fields[2] == "log") axis.log_scale = true;
            else if (fields[2] != "lin") throw ValidationError("seed grid: scale must be lin or log");
        }
        if (key == "lambda") {
            if (seen_lambda) throw ValidationError("seed grid: lambda given twice");
            if (!(axis.start > 0.0 && axis.stop > 0.0)) throw ValidationError("seed grid: lambda range must be positive");
            if (axis.stop < axis.start) throw ValidationError("seed grid: lambda STOP < START");
            grid.lambda = axis;
            seen_lambda = true;
        } else if (key == "theta") {
            if (seen_theta) throw ValidationError("seed grid: theta given twice");
            if (axis.log_scale) throw ValidationError("seed grid: theta axis is linear");
            grid.theta = axis;
            seen_theta = true;
        } else {
            throw ValidationError("seed grid: unknown axis '" + std::string(key) + "'");
        }
    }
    return grid;
}

} // namespace iduff
