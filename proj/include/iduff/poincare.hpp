#pragma once

// Time-1 Poincare map in action-angle coordinates, P = P2 o J2 o P1 o J1 o P0, with a coherent lift of
// the angle: inside smooth segments the angle is unwound continuously, and at an impulse the lifted
// angle is reflected, Theta -> -Theta.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "flow.hpp"
#include "model.hpp"
#include "special.hpp"

namespace iduff {

/// Section point at t = 0 mod 1: action and lifted angle.
struct PoincarePoint {
    double lambda = 1.0;
    double Theta = 0.0;
};

/// Scaled coordinates: rho = lambda^(1/(n+2)), I = gamma rho.
struct ScaledCoords {
    double gamma = 1.0;
    double I = 1.0;
    double rho = 1.0;
};

inline ScaledCoords scaled_coords(int n, double lambda, double gamma) {
    const double rho = std::pow(lambda, 1.0 / (n + 2.0));
    return {gamma, gamma * rho, rho};
}

/// One application of P with bookkeeping.
struct PoincareStep {
    PoincarePoint image;
    /// Integer k at each impulse such that Theta(t_j+) = ((-Theta(t_j-)) mod 1) + k.
    std::array<long, 2> lift_shifts{0, 0};
    /// max |x| + |y| along the trajectory over [0, 1].
    double max_norm = 0.0;
    double min_lambda = 0.0;
};

inline constexpr double kOriginGuardAction = 1e-6;

namespace detail {

inline double wrap_half(double d) { return d - std::round(d); }

/// Maximum of |x| + |y| over one integrator step, from the cubic Hermite interpolants of x and y
/// built on the endpoint states and their time derivatives.
inline double step_norm_max(const PhaseState& a, const Vec2& fa, const PhaseState& b, const Vec2& fb) {
    const double h = b.t - a.t;
    double best = std::max(a.norm1(), b.norm1());
    if (h == 0.0) return best;
    const double sx = (a.x >= 0.0) == (b.x >= 0.0) ? (a.x >= 0.0 ? 1.0 : -1.0) : 0.0;
    const double sy = (a.y >= 0.0) == (b.y >= 0.0) ? (a.y >= 0.0 ? 1.0 : -1.0) : 0.0;
    if (sx == 0.0 || sy == 0.0) return best; // |x| + |y| has a kink (local minimum) inside
    auto deriv = [&](double u) {
        const double d00 = 6.0 * u * u - 6.0 * u, d10 = 3.0 * u * u - 4.0 * u + 1.0;
        const double d01 = -d00, d11 = 3.0 * u * u - 2.0 * u;
        const double dx = (d00 * a.x + d10 * h * fa[0] + d01 * b.x + d11 * h * fb[0]) / h;
        const double dy = (d00 * a.y + d10 * h * fa[1] + d01 * b.y + d11 * h * fb[1]) / h;
        return sx * dx + sy * dy;
    };
    double lo = 0.0, hi = 1.0;
    const double glo = deriv(lo), ghi = deriv(hi);
    if (!(glo > 0.0 && ghi < 0.0)) return best;
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (deriv(mid) > 0.0) lo = mid;
        else hi = mid;
    }
    const double u = 0.5 * (lo + hi);
    const double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u;
    const double h01 = -2 * u * u * u + 3 * u * u, h11 = u * u * u - u * u;
    const double x = h00 * a.x + h10 * h * fa[0] + h01 * b.x + h11 * h * fb[0];
    const double y = h00 * a.y + h10 * h * fa[1] + h01 * b.y + h11 * h * fb[1];
    return std::max(best, std::abs(x) + std::abs(y));
}

/// Tracks the lifted angle along a trajectory from coarse table angles, plus the action guard and
/// the running maximum of |x| + |y|.
class LiftTracker final : public FlowObserver {
public:
    LiftTracker(const SystemConfig& config, const SpecialFunctions& sf, double Theta0, const PhaseState& s0)
        : config_(config), sf_(sf), lift_(Theta0), prev_(coarse_angle(sf, s0.x, s0.y)),
          min_energy_(reference_energy(sf.n(), s0.x, s0.y)), max_norm_(s0.norm1()), last_(s0),
          last_rate_(rhs(config, s0)) {
        guard_energy_ = sf.energy_of_action(kOriginGuardAction);
        check_guard(min_energy_);
    }

    void on_step(const PhaseState& s) override {
        const double e = reference_energy(sf_.n(), s.x, s.y);
        min_energy_ = std::min(min_energy_, e);
        check_guard(e);
        const Vec2 rate = rhs(config_, s);
        max_norm_ = std::max(max_norm_, step_norm_max(last_, last_rate_, s, rate));
        last_ = s;
        last_rate_ = rate;
        const double a = coarse_angle(sf_, s.x, s.y);
        const double inc = wrap_half(a - prev_);
        if (std::abs(inc) > 0.45)
            throw NumericalError("angle increment per step too large to unwind the lift at t = " + std::to_string(s.t));
        lift_ += inc;
        prev_ = a;
    }

    void on_impulse(const ImpulseEvent& e) override {
        lift_ = -lift_;
        prev_ = coarse_angle(sf_, e.after.x, e.after.y);
        last_ = e.after;
        last_rate_ = rhs(config_, e.after);
        const long k = std::lround(lift_ - prev_);
        if (impulses_ < 2) shifts_[static_cast<std::size_t>(impulses_)] = k;
        ++impulses_;
    }

    double lift() const { return lift_; }
    double min_energy() const { return min_energy_; }
    double max_norm() const { return max_norm_; }
    const std::array<long, 2>& shifts() const { return shifts_; }

private:
    void check_guard(double energy) const {
        if (energy < guard_energy_)
            throw OriginGuardError("trajectory passed within the origin guard (lambda < 1e-6)");
    }

    const SystemConfig& config_;
    const SpecialFunctions& sf_;
    double lift_;
    double prev_;
    double min_energy_;
    double max_norm_;
    PhaseState last_;
    Vec2 last_rate_;
    double guard_energy_ = 0.0;
    std::array<long, 2> shifts_{0, 0};
    int impulses_ = 0;
};

} // namespace detail

/// P with lift bookkeeping, integrating from t = 0 to t = 1.
inline PoincareStep poincare_step(const SystemConfig& config, const SpecialFunctions& sf, const PoincarePoint& pt) {
    if (!(pt.lambda > 0.0) || !std::isfinite(pt.Theta)) throw PreconditionError("poincare_map: lambda > 0 required");
    if (config.n() != sf.n()) throw PreconditionError("poincare_map: special functions built for a different n");
    const auto [x0, y0] = to_phase(sf, {pt.lambda, pt.Theta});
    detail::LiftTracker tracker(config, sf, pt.Theta, PhaseState{0.0, x0, y0});
    // A step must not advance the angle by half a turn or the lift cannot be unwound.
    const double cap = 0.2 / std::max(sf.frequency(pt.lambda), 1e-300);
    const PhaseState end = flow_map(config, PhaseState{0.0, x0, y0}, 1.0, tracker, cap);
    const ActionAngle aa = to_action_angle(sf, end.x, end.y);
    PoincareStep out;
    out.image = {aa.lambda, aa.Theta + std::round(tracker.lift() - aa.Theta)};
    out.lift_shifts = tracker.shifts();
    out.max_norm = tracker.max_norm();
    out.min_lambda = sf.action_of_energy(tracker.min_energy());
    return out;
}

inline PoincarePoint poincare_map(const SystemConfig& config, const SpecialFunctions& sf, const PoincarePoint& pt) {
    return poincare_step(config, sf, pt).image;
}

/// A system together with its chart. The config is copied; the chart table is referenced and must
/// outlive the map.
class PoincareMap {
public:
    PoincareMap(SystemConfig config, const SpecialFunctions& sf) : config_(std::move(config)), sf_(&sf) {}
    PoincareMap(SystemConfig, SpecialFunctions&&) = delete;

    PoincarePoint operator()(const PoincarePoint& pt) const { return poincare_map(config_, *sf_, pt); }
    PoincareStep step(const PoincarePoint& pt) const { return poincare_step(config_, *sf_, pt); }

    /// m-fold iterate of the lift.
    PoincarePoint iterate(PoincarePoint pt, int m) const {
        for (int i = 0; i < m; ++i) pt = (*this)(pt);
        return pt;
    }

    const SystemConfig& config() const { return config_; }
    const SpecialFunctions& special() const { return *sf_; }

private:
    SystemConfig config_;
    const SpecialFunctions* sf_;
};

/// Unforced closed form of the net angle advance over one period: Omega(lambda) (1 - 2 (t2 - t1)).
inline double unforced_advance(const SpecialFunctions& sf, const ImpulseSchedule& schedule, double lambda) {
    return sf.frequency(lambda) * schedule.twist_factor();
}

/// Central-difference Jacobian of a lift map at `pt` in (lambda, Theta); the lambda step is
/// relative (h lambda), the Theta step absolute (h).
template <class Map>
Eigen::Matrix2d map_jacobian(const Map& map, const PoincarePoint& pt, double h = 1e-5) {
    if (!(h > 1e-8 && h < 1e-3)) throw PreconditionError("map_jacobian: step must lie in (1e-8, 1e-3)");
    const double hl = h * pt.lambda;
    const auto lp = map(PoincarePoint{pt.lambda + hl, pt.Theta});
    const auto lm = map(PoincarePoint{pt.lambda - hl, pt.Theta});
    const auto tp = map(PoincarePoint{pt.lambda, pt.Theta + h});
    const auto tm = map(PoincarePoint{pt.lambda, pt.Theta - h});
    Eigen::Matrix2d J;
    J(0, 0) = (lp.lambda - lm.lambda) / (2.0 * hl);
    J(1, 0) = (lp.Theta - lm.Theta) / (2.0 * hl);
    J(0, 1) = (tp.lambda - tm.lambda) / (2.0 * h);
    J(1, 1) = (tp.Theta - tm.Theta) / (2.0 * h);
    return J;
}

inline Eigen::Matrix2d map_jacobian(const SystemConfig& config, const SpecialFunctions& sf, const PoincarePoint& pt,
                                    double h = 1e-5) {
    return map_jacobian(PoincareMap(config, sf), pt, h);
}

// ---------------------------------------------------------------------------------------------
// Twist profile

struct TwistSample {
    double lambda = 0.0;
    double I = 0.0;
    double delta_theta = 0.0;
    double d_delta_theta_d_lambda = 0.0;
    double d_delta_theta_d_I = 0.0;
    /// gamma^n dDeltaTheta/dI, the derivative of the scaled twist function.
    double scaled_derivative = 0.0;
    bool sign_ok = false;
};

struct TwistProfile {
    std::vector<TwistSample> samples;
    bool degenerate = false;
    double twist_factor = 0.0; // 1 - 2 (t2 - t1)
    int predicted_sign = 0;
    double gamma = 1.0;
    double bound = 0.0; // d/2 |1 - 2 (t2 - t1)|
    bool all_sign_ok = false;
    /// Smallest grid action from which every sample has the predicted sign.
    std::optional<double> lambda0;
    /// |scaled derivative| >= bound at every sample in the top decade of the grid.
    bool bound_ok_top_decade = false;
    bool monotone = true;
    std::optional<std::pair<double, double>> non_monotone_interval;
};

namespace detail {

/// Fornberg weights for the first derivative at x0 on arbitrary nodes.
inline std::vector<double> first_derivative_weights(double x0, const std::vector<double>& nodes) {
    const std::size_t m = nodes.size();
    std::vector<std::vector<double>> c(m, std::vector<double>(2, 0.0));
    double c1 = 1.0;
    double c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < m; ++i) {
        const std::size_t mn = std::min<std::size_t>(i, 1);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - x0;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = c[i][1];
    return w;
}

/// d values / d x at every node using the (up to) five nearest nodes.
inline std::vector<double> stencil_derivative(const std::vector<double>& x, const std::vector<double>& v) {
    const std::size_t N = x.size();
    std::vector<double> out(N, 0.0);
    if (N < 2) return out;
    const std::size_t width = std::min<std::size_t>(5, N);
    for (std::size_t i = 0; i < N; ++i) {
        std::size_t start = i >= width / 2 ? i - width / 2 : 0;
        if (start + width > N) start = N - width;
        std::vector<double> nodes(x.begin() + static_cast<long>(start), x.begin() + static_cast<long>(start + width));
        const auto w = first_derivative_weights(x[i], nodes);
        double acc = 0.0;
        for (std::size_t j = 0; j < width; ++j) acc += w[j] * v[start + j];
        out[i] = acc;
    }
    return out;
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

} // namespace detail

struct TwistOptions {
    /// Initial angles per action; the net advance is averaged over Theta0 = k / angles.
    int angles = 8;
};

/// Net angle advance over one period on an action grid, its derivative, and the sign / magnitude
/// checks against 1 - 2 (t2 - t1).
template <class Map>
TwistProfile twist_profile(const Map& map, const SpecialFunctions& sf, const ImpulseSchedule& schedule,
                           const std::vector<double>& lambda_grid, const TwistOptions& opt = {}) {
    if (lambda_grid.size() < 2) throw PreconditionError("twist_profile: at least two grid actions required");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0)) throw PreconditionError("twist_profile: actions must be positive");
        if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1]))
            throw PreconditionError("twist_profile: grid must be sorted ascending");
    }
    if (opt.angles < 1) throw PreconditionError("twist_profile: angles >= 1 required");

    const int n = sf.n();
    TwistProfile prof;
    prof.degenerate = schedule.degenerate();
    prof.twist_factor = schedule.twist_factor();
    prof.predicted_sign = prof.degenerate ? 0 : detail::sign_of(prof.twist_factor);
    prof.bound = 0.5 * sf.d() * std::abs(prof.twist_factor);

    const std::size_t N = lambda_grid.size();
    std::vector<double> rho(N);
    for (std::size_t i = 0; i < N; ++i) rho[i] = std::pow(lambda_grid[i], 1.0 / (n + 2.0));
    auto sorted = rho;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(N / 2), sorted.end());
    double median = sorted[N / 2];
    if (N % 2 == 0) {
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(N / 2 - 1), sorted.end());
        median = 0.5 * (median + sorted[N / 2 - 1]);
    }
    prof.gamma = 1.5 / median;

    std::vector<double> advance(N), logl(N);
    for (std::size_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (int k = 0; k < opt.angles; ++k) {
            const double th = static_cast<double>(k) / opt.angles;
            acc += map(PoincarePoint{lambda_grid[i], th}).Theta - th;
        }
        advance[i] = acc / opt.angles;
        logl[i] = std::log(lambda_grid[i]);
    }
    const auto dlog = detail::stencil_derivative(logl, advance);

    prof.samples.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        auto& s = prof.samples[i];
        s.lambda = lambda_grid[i];
        s.I = prof.gamma * rho[i];
        s.delta_theta = advance[i];
        s.d_delta_theta_d_lambda = dlog[i] / s.lambda;
        // lambda = (I / gamma)^(n+2)  =>  dlambda/dI = (n+2) lambda / I
        s.d_delta_theta_d_I = s.d_delta_theta_d_lambda * (n + 2.0) * s.lambda / s.I;
        s.scaled_derivative = std::pow(prof.gamma, n) * s.d_delta_theta_d_I;
        s.sign_ok = prof.predicted_sign != 0 && detail::sign_of(s.d_delta_theta_d_lambda) == prof.predicted_sign;
    }

    prof.all_sign_ok = std::all_of(prof.samples.begin(), prof.samples.end(), [](const auto& s) { return s.sign_ok; });
    for (std::size_t i = N; i-- > 0;) {
        if (!prof.samples[i].sign_ok) break;
        prof.lambda0 = prof.samples[i].lambda;
    }

    const double top = lambda_grid.back() / 10.0;
    prof.bound_ok_top_decade = !prof.degenerate;
    for (const auto& s : prof.samples)
        if (s.lambda >= top && !(std::abs(s.scaled_derivative) >= prof.bound)) prof.bound_ok_top_decade = false;

    const int dir = prof.predicted_sign != 0 ? prof.predicted_sign : detail::sign_of(advance.back() - advance.front());
    for (std::size_t i = 0; i + 1 < N; ++i) {
        if (detail::sign_of(advance[i + 1] - advance[i]) != dir) {
            prof.monotone = false;
            prof.non_monotone_interval = std::make_pair(lambda_grid[i], lambda_grid[i + 1]);
            break;
        }
    }
    return prof;
}

inline TwistProfile twist_profile(const SystemConfig& config, const SpecialFunctions& sf,
                                  const std::vector<double>& lambda_grid, const TwistOptions& opt = {}) {
    return twist_profile(PoincareMap(config, sf), sf, config.schedule(), lambda_grid, opt);
}

/// CSV columns lambda,I,delta_theta,d_delta_theta_d_I,sign_ok.
inline void write_twist_csv(const TwistProfile& prof, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "lambda,I,delta_theta,d_delta_theta_d_I,sign_ok\n";
    for (const auto& s : prof.samples)
        out << detail::fmt_real(s.lambda) << ',' << detail::fmt_real(s.I) << ',' << detail::fmt_real(s.delta_theta)
            << ',' << detail::fmt_real(s.d_delta_theta_d_I) << ',' << (s.sign_ok ? "true" : "false") << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------------------------
// Intersection property

struct CurveSample {
    double lambda = 1.0;
    double theta = 0.0; // in [0, 1)
};

enum class IntersectionStatus { intersects, disjoint, inconclusive };

struct IntersectionResult {
    IntersectionStatus status = IntersectionStatus::inconclusive;
    /// Angle interval on which the radial difference changes sign or vanishes.
    std::optional<std::pair<double, double>> witness;
    /// lambda_image(theta_k) - lambda_curve(theta_k).
    std::vector<double> radial_difference;
    std::string note;

    bool intersects() const { return status == IntersectionStatus::intersects; }
};

/// Maps a closed star-shaped curve and tests whether the image crosses it. A curve mapped strictly
/// inside or outside of itself contradicts area preservation.
template <class Map>
IntersectionResult intersection_check(const Map& map, const std::vector<CurveSample>& curve, double zero_tol = 1e-9) {
    const std::size_t M = curve.size();
    if (M < 64) throw PreconditionError("intersection_check: at least 64 curve samples required");
    double lmax = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
        if (!(curve[k].lambda > 0.0)) throw PreconditionError("intersection_check: positive actions required");
        if (!(curve[k].theta >= 0.0 && curve[k].theta < 1.0) || (k > 0 && !(curve[k].theta > curve[k - 1].theta)))
            throw PreconditionError("intersection_check: curve angles must increase within [0, 1)");
        lmax = std::max(lmax, curve[k].lambda);
    }

    IntersectionResult res;
    std::vector<PoincarePoint> img(M);
    for (std::size_t k = 0; k < M; ++k) img[k] = map(PoincarePoint{curve[k].lambda, curve[k].theta});

    // The image must again be a graph over the angle: lifted angles increase by less than one turn.
    for (std::size_t k = 0; k + 1 < M; ++k)
        if (!(img[k + 1].Theta > img[k].Theta)) {
            res.note = "image is not star-shaped";
            return res;
        }
    if (!(img[M - 1].Theta - img[0].Theta < 1.0)) {
        res.note = "image is not star-shaped";
        return res;
    }

    // Periodic piecewise-linear image lambda(theta), knots ordered by angle mod 1.
    std::vector<std::pair<double, double>> knots(M);
    for (std::size_t k = 0; k < M; ++k) knots[k] = {img[k].Theta - std::floor(img[k].Theta), img[k].lambda};
    std::sort(knots.begin(), knots.end());
    auto image_lambda = [&](double th) {
        auto it = std::upper_bound(knots.begin(), knots.end(), std::make_pair(th, -1.0),
                                   [](const auto& a, const auto& b) { return a.first < b.first; });
        const auto& hi = it == knots.end() ? knots.front() : *it;
        const auto& lo = it == knots.begin() ? knots.back() : *(it - 1);
        double a = lo.first, b = hi.first, t = th;
        if (b <= a) b += 1.0;
        if (t < a) t += 1.0;
        const double u = b > a ? (t - a) / (b - a) : 0.0;
        return lo.second + u * (hi.second - lo.second);
    };

    res.radial_difference.resize(M);
    const double tol = zero_tol * lmax;
    for (std::size_t k = 0; k < M; ++k) {
        double d = image_lambda(curve[k].theta) - curve[k].lambda;
        if (std::abs(d) <= tol) d = 0.0;
        res.radial_difference[k] = d;
    }
    for (std::size_t k = 0; k < M; ++k) {
        const std::size_t j = (k + 1) % M;
        const double a = res.radial_difference[k], b = res.radial_difference[j];
        if (a == 0.0 || a * b < 0.0) {
            res.status = IntersectionStatus::intersects;
            res.witness = std::make_pair(curve[k].theta, j == 0 ? curve[j].theta + 1.0 : curve[j].theta);
            return res;
        }
    }
    res.status = IntersectionStatus::disjoint;
    res.note = "image lies strictly on one side of the curve: area preservation violated";
    return res;
}

inline IntersectionResult intersection_check(const SystemConfig& config, const SpecialFunctions& sf,
                                             const std::vector<CurveSample>& curve) {
    return intersection_check(PoincareMap(config, sf), curve);
}

} // namespace iduff
