#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "iduff/boundedness.hpp"
#include "iduff/invariant_curve.hpp"
#include "iduff/periodic.hpp"
#include "iduff/rotation.hpp"
#include "oracles.hpp"

using namespace iduff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const SpecialFunctions& sf1() {
    static const SpecialFunctions sf = compute_special_functions(1);
    return sf;
}

const SystemConfig& unforced_cfg() {
    static const SystemConfig cfg = SystemConfig::unforced(1, ImpulseSchedule(0.25, 0.5));
    return cfg;
}

const SystemConfig& forced_cfg() {
    static const SystemConfig cfg = unforced_cfg().with_coefficient(1, TrigPoly::cosine(0.1));
    return cfg;
}

struct RigidRotation {
    double omega;
    PoincarePoint operator()(const PoincarePoint& p) const { return {p.lambda, p.Theta + omega}; }
};

/// h o R_omega o h^-1 with h(x) = x + a sin(2 pi x) / (2 pi); rotation number omega.
struct ConjugatedRotation {
    double omega;
    double a = 0.1;
    double h(double x) const { return x + a * std::sin(2.0 * std::numbers::pi * x) / (2.0 * std::numbers::pi); }
    double h_inv(double y) const {
        double x = y;
        for (int i = 0; i < 60; ++i) x -= (h(x) - y) / (1.0 + a * std::cos(2.0 * std::numbers::pi * x));
        return x;
    }
    PoincarePoint operator()(const PoincarePoint& p) const { return {p.lambda, h(h_inv(p.Theta) + omega)}; }
};

/// Rigid rotation that fails after a fixed number of calls.
struct FailingMap {
    mutable int calls = 0;
    int limit;
    PoincarePoint operator()(const PoincarePoint& p) const {
        if (++calls > limit) throw EscapeError("synthetic escape", PhaseState{});
        return {p.lambda, p.Theta + 0.3};
    }
};

} // namespace

// ---------------------------------------------------------------------------------------------
// Rotation numbers

TEST_CASE("weighted Birkhoff average recovers a rigid rotation", "[analysis][rotation]") {
    const auto est = rotation_number(RigidRotation{0.381966}, {1.0, 0.2}, 2000);
    CHECK(est.usable);
    CHECK(est.iterates_used == 2000);
    CHECK(est.method == "weighted-birkhoff");
    CHECK(std::abs(est.value - 0.381966) <= 1e-10);
    CHECK(est.error_bound >= 0.0);
    CHECK(est.error_bound <= 1e-10);
}

TEST_CASE("weighted Birkhoff average converges fast on a conjugated circle", "[analysis][rotation][property]") {
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (double omega : {golden, std::sqrt(2.0) - 1.0, 1.0 + golden}) {
        const ConjugatedRotation map{omega};
        const auto est = rotation_number(map, {1.0, 0.05}, 2000);
        INFO("omega = " << omega);
        CHECK(std::abs(est.value - omega) <= 1e-10);
        // A plain average has an O(1/N) error on the same data.
        PoincarePoint z{1.0, 0.05};
        const auto zN = [&] {
            PoincarePoint w = z;
            for (int k = 0; k < 2000; ++k) w = map(w);
            return w;
        }();
        CHECK(std::abs((zN.Theta - z.Theta) / 2000.0 - omega) > std::abs(est.value - omega));
    }
}

TEST_CASE("escape yields a partial, unusable estimate", "[analysis][rotation]") {
    const auto est = rotation_number(FailingMap{0, 37}, {1.0, 0.0}, 100);
    CHECK_FALSE(est.usable);
    CHECK(est.iterates_used == 37);
    CHECK_FALSE(est.failure.empty());
    CHECK_THROWS_AS(rotation_number(RigidRotation{0.1}, {1.0, 0.0}, 0), PreconditionError);
}

TEST_CASE("unforced rotation numbers match the closed form", "[analysis][rotation]") {
    const PoincareMap P(unforced_cfg(), sf1());
    for (double lam : {1.0, 17.0, 300.0}) {
        const auto est = rotation_number(P, {lam, 0.4}, 2000);
        CHECK(est.usable);
        CHECK(std::abs(est.value - oracle::unforced_advance(1, 0.25, 0.5, lam)) <= 1e-8);
    }
}

// ---------------------------------------------------------------------------------------------
// Diophantine filter

TEST_CASE("Diophantine verdicts on the reference cases", "[analysis][diophantine]") {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const auto g = diophantine_check(phi, 0.2, 0.5, 1000);
    const auto go = oracle::diophantine(phi, 0.2, 0.5, 1000);
    CHECK(g.pass);
    CHECK(go.pass);
    CHECK(g.worst_q == go.worst_q);
    CHECK(g.worst_p == go.worst_p);

    const auto r = diophantine_check(1.5, 1e-12, 0.5, 100);
    CHECK_FALSE(r.pass);
    CHECK(r.worst_p == 3);
    CHECK(r.worst_q == 2);
    CHECK(r.margin == 0.0);

    const auto h = diophantine_check(0.5 + 1e-9, 1e-3, 1.0, 10);
    CHECK_FALSE(h.pass);
    CHECK(h.worst_q == 2);
    CHECK(h.worst_p == 1);
    CHECK_THAT(h.margin, WithinAbs(1e-9, 1e-15));
    CHECK_FALSE(oracle::diophantine(0.5 + 1e-9, 1e-3, 1.0, 10).pass);

    CHECK_THROWS_AS(diophantine_check(0.3, 0.1, 0.5, 0), PreconditionError);
}

TEST_CASE("Diophantine verdicts agree with brute force", "[analysis][diophantine][property]") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double omega = u(rng);
        const double c = std::pow(10.0, -1.0 - 3.0 * (trial % 4) / 3.0);
        const auto v = diophantine_check(omega, c, 0.5, 300);
        const auto o = oracle::diophantine(omega, c, 0.5, 300);
        CHECK(v.pass == o.pass);
        CHECK(v.worst_q == o.worst_q);
        CHECK_THAT(v.normalized_margin, WithinRel(o.worst_normalized, 1e-7));
    }
}

TEST_CASE("small-twist Diophantine form", "[analysis][diophantine]") {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const auto v = diophantine_check_small_twist(2.0 * std::numbers::pi * phi, 0.5, 2.0, 2.5, 500);
    CHECK(v.pass);
    CHECK_THAT(v.c, WithinRel(0.25, 1e-15));
    CHECK_THAT(v.beta_exponent, WithinRel(0.5, 1e-15));
    CHECK_THROWS_AS(diophantine_check_small_twist(1.0, 0.5, 2.0, 2.0, 10), PreconditionError);
}

// ---------------------------------------------------------------------------------------------
// Invariant curves

TEST_CASE("unforced orbits lie on exact circles", "[analysis][curve]") {
    const PoincareMap P(unforced_cfg(), sf1());
    CurveOptions opt;
    opt.iterates = 600;
    opt.modes = 8;
    const auto fit = find_invariant_curve(P, {7.0, 0.3}, opt);
    INFO(fit.note);
    REQUIRE(fit.accepted());
    CHECK(fit.residual <= 1e-7);
    CHECK_THAT(fit.rho, WithinAbs(oracle::unforced_advance(1, 0.25, 0.5, 7.0), 1e-8));
    for (double th : {0.0, 0.25, 0.8}) CHECK_THAT(fit.lambda_at_angle(th), WithinRel(7.0, 1e-9));
    CHECK(fit.max_advance_deviation <= 10.0 * fit.residual + 1e-12);
}

TEST_CASE("forced invariant curve at large action", "[analysis][curve]") {
    const PoincareMap P(forced_cfg(), sf1());
    const auto fit = find_invariant_curve(P, {1221.0, 0.0});
    INFO(fit.note);
    REQUIRE(fit.accepted());
    CHECK(fit.diophantine.pass);
    CHECK(fit.residual <= fit.threshold);
    CHECK_THAT(fit.threshold, WithinRel(1e-6 * fit.median_lambda, 1e-12));
    CHECK(fit.min_angle_speed > 0.0);
    CHECK(fit.max_advance_deviation <= 10.0 * fit.residual);

    // The curve is non-trivial: the action varies along it.
    double lo = 1e300, hi = 0.0;
    for (int k = 0; k < 32; ++k) {
        const double l = fit.lambda_at_angle(k / 32.0);
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    CHECK(hi - lo > 1e3 * fit.residual);

    // A different orbit on the same curve has the fitted rotation number.
    const auto est = rotation_number(P, fit.at(0.37), 2000);
    CHECK(std::abs(est.value - fit.rho) <= 10.0 * fit.residual);
}

TEST_CASE("orbits in a resonance zone are not claimed as curves", "[analysis][curve]") {
    const PoincareMap P(forced_cfg(), sf1());
    const double lam = resonant_action(sf1(), forced_cfg().schedule(), 2, 1);
    const auto fit = find_invariant_curve(P, {lam, 0.1});
    INFO("max gap * N = " << fit.max_gap * 2000 << ", rho = " << fit.rho);
    CHECK(fit.status == CurveStatus::gap_detected);
    CHECK_FALSE(fit.accepted());
}

TEST_CASE("curve search over a seed grid keeps seed order", "[analysis][curve]") {
    const PoincareMap P(unforced_cfg(), sf1());
    CurveOptions opt;
    opt.iterates = 300;
    opt.modes = 4;
    const std::vector<PoincarePoint> seeds{{3.0, 0.0}, {4.0, 0.1}, {5.0, 0.2}};
    const auto fits = find_invariant_curves(P, seeds, opt, 2);
    REQUIRE(fits.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(fits[i].seed.lambda == seeds[i].lambda);
}

// ---------------------------------------------------------------------------------------------
// Boundedness

TEST_CASE("unforced orbits reach a constant maximum on their energy level", "[analysis][bounded]") {
    const PoincareMap P(unforced_cfg(), sf1());
    const auto k = oracle::constants(1);
    const auto rows = boundedness_scan(P, {{2.0, 0.1}, {40.0, 0.7}}, {40, 10});
    for (const auto& r : rows) {
        CHECK_FALSE(r.escaped);
        CHECK(r.periods_completed == 40);
        CHECK_FALSE(r.degenerate);
        CHECK_FALSE(r.stayed_between.has_value());
        // max x + y on y^2/2 + x^4/4 = h sits at y = x^3: x^6/2 + x^4/4 = h.
        const double h = k.d * std::pow(r.seed.lambda, 4.0 / 3.0);
        double lo = 0.0, hi = 10.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (std::pow(mid, 6) / 2.0 + std::pow(mid, 4) / 4.0 < h ? lo : hi) = mid;
        }
        const double level_max = lo + lo * lo * lo;
        CHECK_THAT(r.max_norm, WithinRel(level_max, 1e-6));
        // Once the orbit has swept the level set, the running maximum no longer moves.
        double running = 0.0;
        std::vector<double> cumulative;
        for (double v : r.period_max) cumulative.push_back(running = std::max(running, v));
        for (std::size_t i = 20; i < cumulative.size(); ++i)
            CHECK(std::abs(cumulative[i] - cumulative[20]) <= 1e-6 * cumulative[20]);
        for (double v : r.period_max) CHECK(v <= level_max * (1.0 + 1e-6));
    }
}

TEST_CASE("degenerate schedules are flagged", "[analysis][bounded]") {
    const auto cfg = forced_cfg().with_schedule(ImpulseSchedule(0.25, 0.75));
    const PoincareMap P(cfg, sf1());
    const auto row = bounded_orbit(P, {10.0, 0.0}, {5, 2});
    CHECK(row.degenerate);
}

TEST_CASE("escapes are recorded, not thrown", "[analysis][bounded]") {
    const auto cfg = unforced_cfg().with_integrator({1e-12, 1e-12, 0.05, 5.0});
    const PoincareMap P(cfg, sf1());
    BoundednessRow row;
    REQUIRE_NOTHROW(row = bounded_orbit(P, {50.0, 0.0}, {5, 2}));
    CHECK(row.escaped);
    CHECK(row.periods_completed == 0);
    CHECK_FALSE(row.failure.empty());
    CHECK_THROWS_AS(bounded_orbit(P, {50.0, 0.0}, {0, 1}), PreconditionError);
}

TEST_CASE("an orbit between two invariant curves stays between them", "[analysis][bounded][property]") {
    const PoincareMap P(forced_cfg(), sf1());
    const auto lower = find_invariant_curve(P, {1105.0, 0.0});
    const auto upper = find_invariant_curve(P, {1221.0, 0.0});
    REQUIRE(lower.accepted());
    REQUIRE(upper.accepted());
    const CurveBracket bracket{&lower, &upper};
    const PoincarePoint seed{1160.0, 0.3};
    REQUIRE(bracket.contains(seed));
    const auto row = bounded_orbit(P, seed, {1000, 100}, bracket);
    CHECK_FALSE(row.escaped);
    REQUIRE(row.stayed_between.has_value());
    CHECK(*row.stayed_between);
    CHECK(row.growth_over_window <= 0.01);
}

// ---------------------------------------------------------------------------------------------
// Periodic orbits

TEST_CASE("resonant action solves the unforced rotation condition", "[analysis][periodic]") {
    const auto& sch = unforced_cfg().schedule();
    for (auto [m, p] : {std::pair{1, 1L}, {2, 1L}, {3, 1L}, {5, 2L}}) {
        const double lam = resonant_action(sf1(), sch, m, p);
        CHECK_THAT(oracle::unforced_advance(1, 0.25, 0.5, lam), WithinRel(static_cast<double>(p) / m, 1e-9));
    }
    CHECK_THROWS_AS(resonant_action(sf1(), sch, 1, -1), PreconditionError);
    CHECK_THROWS_AS(resonant_action(sf1(), ImpulseSchedule(0.25, 0.75), 1, 1), PreconditionError);
    CHECK(resonant_action(sf1(), ImpulseSchedule(0.1, 0.8), 2, -1) > 0.0);
}

TEST_CASE("unforced resonant circles are found from nearby seeds", "[analysis][periodic]") {
    const PoincareMap P(unforced_cfg(), sf1());
    const double lam = resonant_action(sf1(), unforced_cfg().schedule(), 3, 1);
    const auto res = find_periodic_orbits(P, 3, 1, {{lam * 1.002, 0.1}, {lam * 0.998, 0.6}});
    REQUIRE(res.orbits.size() == 2);
    for (const auto& o : res.orbits) {
        CHECK(o.residual <= 1e-9);
        CHECK_THAT(o.point.lambda, WithinRel(lam, 1e-8));
        CHECK(o.minimal);
    }
}

TEST_CASE("forced periodic orbits of small period", "[analysis][periodic]") {
    const PoincareMap P(forced_cfg(), sf1());
    const auto& sch = forced_cfg().schedule();
    for (int m : {1, 2, 3}) {
        INFO("m = " << m);
        const auto res = find_periodic_orbits(P, m, 1, resonant_seeds(sf1(), sch, m, 1, 8));
        REQUIRE_FALSE(res.orbits.empty());
        for (const auto& o : res.orbits) {
            CHECK(o.residual <= 1e-9);
            CHECK(o.minimal);
            REQUIRE(o.orbit.size() == static_cast<std::size_t>(m));
            // Independent recheck of the defect.
            const auto w = P.iterate(o.point, m);
            CHECK(std::abs(w.lambda - o.point.lambda) / o.point.lambda <= 1e-9);
            CHECK(std::abs(w.Theta - o.point.Theta - 1.0) <= 1e-9);
            CHECK(o.min_separation >= 1e-6);
        }
        // Distinct records are distinct orbits.
        for (std::size_t i = 0; i < res.orbits.size(); ++i)
            for (std::size_t j = i + 1; j < res.orbits.size(); ++j)
                for (const auto& q : res.orbits[j].orbit)
                    CHECK(detail::section_distance(res.orbits[i].point, q) > 1e-6);
    }
}

TEST_CASE("a fixed point searched with period 2 is not minimal", "[analysis][periodic]") {
    const PoincareMap P(forced_cfg(), sf1());
    const auto seeds = resonant_seeds(sf1(), forced_cfg().schedule(), 1, 1, 4);
    const auto res = find_periodic_orbits(P, 2, 2, seeds);
    REQUIRE_FALSE(res.orbits.empty());
    for (const auto& o : res.orbits) CHECK_FALSE(o.minimal);
}

TEST_CASE("nearby seeds collapse to one orbit record", "[analysis][periodic]") {
    const PoincareMap P(forced_cfg(), sf1());
    const double lam = resonant_action(sf1(), forced_cfg().schedule(), 2, 1);
    const auto res = find_periodic_orbits(P, 2, 1, {{lam, 0.01}, {lam, 0.0}, {lam, -0.01}});
    CHECK(res.orbits.size() == 1);
}

TEST_CASE("curves bracketing p/m enclose a periodic orbit", "[analysis][periodic][property]") {
    const PoincareMap P(forced_cfg(), sf1());
    const double lam = resonant_action(sf1(), forced_cfg().schedule(), 3, 1);
    CurveOptions opt;
    const auto lower = find_invariant_curve(P, {0.8 * lam, 0.0}, opt);
    const auto upper = find_invariant_curve(P, {1.2 * lam, 0.0}, opt);
    INFO(lower.note << " / " << upper.note);
    REQUIRE(lower.accepted());
    REQUIRE(upper.accepted());
    REQUIRE(lower.rho < 1.0 / 3.0);
    REQUIRE(upper.rho > 1.0 / 3.0);
    std::vector<PoincarePoint> seeds;
    for (int j = 0; j < 6; ++j) {
        const double th = j / 6.0;
        seeds.push_back({0.5 * (lower.lambda_at_angle(th) + upper.lambda_at_angle(th)), th});
    }
    const auto res = find_periodic_orbits(P, 3, 1, seeds);
    REQUIRE_FALSE(res.orbits.empty());
    const CurveBracket bracket{&lower, &upper};
    for (const auto& o : res.orbits) CHECK(bracket.contains(o.point));
}
