#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "iduff/config_io.hpp"
#include "iduff/model.hpp"
#include "iduff/seed_grid.hpp"

using namespace iduff;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::string config_text(double t1, double t2, const std::string& extra = "") {
    return R"({"n": 1, "coefficients": [{"mean": 0.0, "harmonics": []}, {"mean": 0.0, "harmonics": []},
               {"mean": 0.0, "harmonics": []}], "impulses": {"t1": )" +
           std::to_string(t1) + R"(, "t2": )" + std::to_string(t2) +
           R"(}, "integrator": {"abs_tol": 1e-12, "rel_tol": 1e-12, "max_step": 0.05})" + extra + "}";
}

TrigPoly random_poly(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    TrigPoly p;
    p.mean = u(rng);
    const int K = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < K; ++k) p.harmonics.emplace_back(u(rng), u(rng));
    return p;
}

} // namespace

TEST_CASE("trig poly evaluates cosine and zero analytically", "[model]") {
    const TrigPoly c = TrigPoly::cosine(1.0);
    CHECK_THAT(c(0.5), WithinAbs(-1.0, 1e-15));
    CHECK_THAT(c(1.5), WithinAbs(-1.0, 1e-15));
    CHECK_THAT(c(0.0), WithinAbs(1.0, 1e-15));
    const TrigPoly zero;
    CHECK(zero.is_zero());
    CHECK(zero(0.3) == 0.0);
    CHECK(zero(-17.25) == 0.0);
}

TEST_CASE("trig poly is 1-periodic", "[model][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ut(-50.0, 50.0);
    for (int trial = 0; trial < 20; ++trial) {
        const TrigPoly p = random_poly(rng);
        for (int i = 0; i < 50; ++i) {
            const double t = ut(rng);
            CHECK(std::abs(p(t + 1.0) - p(t)) <= 1e-12);
        }
    }
}

TEST_CASE("trig poly derivative matches central differences", "[model][property]") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ut(0.0, 1.0);
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        const TrigPoly p = random_poly(rng);
        for (int i = 0; i < 50; ++i) {
            const double t = ut(rng);
            const double fd = (p(t + h) - p(t - h)) / (2.0 * h);
            const double exact = p.derivative(t);
            CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
        }
    }
}

TEST_CASE("impulse schedule validation and degeneracy", "[model]") {
    CHECK_FALSE(ImpulseSchedule(0.25, 0.5).degenerate());
    CHECK(ImpulseSchedule(0.2, 0.7).degenerate());
    CHECK(ImpulseSchedule(0.25, 0.75).degenerate());
    CHECK_FALSE(ImpulseSchedule(0.25, 0.75 + 1e-9).degenerate());
    CHECK_THROWS_WITH(ImpulseSchedule(0.6, 0.4), ContainsSubstring("t1 < t2 violated"));
    CHECK_THROWS_AS(ImpulseSchedule(0.0, 0.4), ValidationError);
    CHECK_THROWS_AS(ImpulseSchedule(0.2, 1.0), ValidationError);
    CHECK(ImpulseSchedule(0.25, 0.5).twist_factor() == 0.5);
}

TEST_CASE("impulse times repeat with period 1", "[model]") {
    const ImpulseSchedule s(0.3, 0.8);
    CHECK(s.impulse_time(1) == 0.3);
    CHECK(s.impulse_time(2) == 0.8);
    for (long j = 1; j < 40; ++j) CHECK_THAT(s.impulse_time(j + 2), WithinAbs(s.impulse_time(j) + 1.0, 1e-12));
    for (int m = 1; m <= 7; ++m) CHECK(s.times_in(0.0, m).size() == static_cast<std::size_t>(2 * m));
    const auto w = s.times_in(0.3, 1.3);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == 0.8);
    CHECK_THAT(w[1], WithinAbs(1.3, 1e-15));
}

TEST_CASE("system config enforces its invariants", "[model]") {
    const ImpulseSchedule s(0.25, 0.5);
    CHECK_NOTHROW(SystemConfig::unforced(2, s));
    CHECK_THROWS_WITH(SystemConfig(1, std::vector<TrigPoly>(2), s), ContainsSubstring("2n+1"));
    IntegratorSettings bad;
    bad.abs_tol = 0.0;
    CHECK_THROWS_AS(SystemConfig::unforced(1, s, bad), ValidationError);
    bad = {};
    bad.rel_tol = -1.0;
    CHECK_THROWS_AS(SystemConfig::unforced(1, s, bad), ValidationError);
    bad = {};
    bad.max_step = 0.3; // > min(t1, t2 - t1, 1 - t2) = 0.25
    CHECK_THROWS_WITH(SystemConfig::unforced(1, s, bad), ContainsSubstring("max_step"));
    TrigPoly nan_poly;
    nan_poly.mean = std::nan("");
    CHECK_THROWS_AS(SystemConfig::unforced(1, s).with_coefficient(0, nan_poly), ValidationError);
}

TEST_CASE("eval_coefficient", "[model]") {
    const auto cfg = SystemConfig::unforced(1, ImpulseSchedule(0.25, 0.5)).with_coefficient(2, TrigPoly::cosine(1.0));
    CHECK(eval_coefficient(cfg, 0, 0.123) == 0.0);
    CHECK_THAT(eval_coefficient(cfg, 2, 0.5), WithinAbs(-1.0, 1e-15));
    CHECK_THAT(eval_coefficient(cfg, 2, 1.5), WithinAbs(-1.0, 1e-15));
    CHECK_THROWS_AS(eval_coefficient(cfg, 3, 0.0), std::out_of_range);
    CHECK_THROWS_AS(eval_coefficient(cfg, -1, 0.0), std::out_of_range);
}

TEST_CASE("config parsing accepts the documented format", "[model][io]") {
    const auto cfg = parse_config(config_text(0.25, 0.5));
    CHECK(cfg.n() == 1);
    CHECK_FALSE(cfg.degenerate());
    CHECK(cfg.unforced_system());
    CHECK(parse_config(config_text(0.2, 0.7)).degenerate());
    CHECK_THROWS_WITH(parse_config(config_text(0.6, 0.4)), ContainsSubstring("t1 < t2 violated"));
}

TEST_CASE("config parsing rejects malformed documents", "[model][io]") {
    CHECK_THROWS_AS(parse_config("{not json"), ParseError);
    CHECK_THROWS_WITH(parse_config(config_text(0.25, 0.5, R"(, "extra": 1)")), ContainsSubstring("unknown key"));
    CHECK_THROWS_AS(parse_config(R"({"n": 1})"), ParseError);
    CHECK_THROWS_AS(parse_config(R"({"n": "one", "coefficients": [], "impulses": {"t1": 0.2, "t2": 0.4},
                                     "integrator": {"abs_tol": 1e-9, "rel_tol": 1e-9, "max_step": 0.05}})"),
                    ParseError);
}

TEST_CASE("config round trip is bit exact", "[model][io][property]") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 3);
        std::vector<TrigPoly> coeffs;
        for (int i = 0; i <= 2 * n; ++i) coeffs.push_back(random_poly(rng));
        std::uniform_real_distribution<double> u(0.05, 0.45);
        const double t1 = u(rng);
        const double t2 = t1 + u(rng);
        IntegratorSettings s;
        s.abs_tol = std::ldexp(1.0 + u(rng), -40);
        s.rel_tol = std::ldexp(1.0 + u(rng), -38);
        s.max_step = 0.01;
        const SystemConfig cfg(n, coeffs, ImpulseSchedule(t1, t2), s);
        const SystemConfig back = parse_config(to_json(cfg).dump());
        CHECK(back == cfg);
        CHECK(config_hash(back) == config_hash(cfg));
    }
}

TEST_CASE("config files load and save", "[model][io]") {
    const auto dir = std::filesystem::temp_directory_path() / "iduff_test_model";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "cfg.json").string();
    const auto cfg = SystemConfig::unforced(1, ImpulseSchedule(0.1, 0.8)).with_coefficient(1, TrigPoly::cosine(0.1));
    save_config(cfg, path);
    CHECK(load_config(path) == cfg);
    CHECK_THROWS_AS(load_config((dir / "missing.json").string()), IoError);
}

TEST_CASE("config hash is a stable SHA-256 of the canonical form", "[model][io]") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto a = parse_config(config_text(0.25, 0.5));
    const auto b = parse_config(R"({"integrator": {"max_step": 0.05, "rel_tol": 1e-12, "abs_tol": 1e-12},
        "impulses": {"t2": 0.5, "t1": 0.25}, "n": 1,
        "coefficients": [{"harmonics": [], "mean": 0}, {"mean": 0.0, "harmonics": []}, {"mean": 0, "harmonics": []}]})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 64);
    CHECK(config_hash(a) != config_hash(a.with_schedule(ImpulseSchedule(0.25, 0.55))));
}

TEST_CASE("seed grids", "[model][cli]") {
    const auto g = parse_seed_grid("lambda=1:100:log:3,theta=0:1:4");
    const auto pts = g.points();
    REQUIRE(pts.size() == 12);
    CHECK(pts[0].lambda == 1.0);
    CHECK_THAT(pts[4].lambda, WithinAbs(10.0, 1e-12));
    CHECK(pts[11].lambda == 100.0);
    CHECK(pts[3].Theta == 0.75);
    const auto lin = parse_seed_grid("lambda=2:4:lin:3").lambda_values();
    CHECK(lin == std::vector<double>{2.0, 3.0, 4.0});
    CHECK(parse_seed_grid("theta=0:1:2").points().size() == 2);
    CHECK_THROWS_AS(parse_seed_grid("lambda=0:1:3"), ValidationError);
    CHECK_THROWS_AS(parse_seed_grid("mu=1:2:3"), ValidationError);
    CHECK_THROWS_AS(parse_seed_grid("lambda=1:2:cubic:3"), ValidationError);
    CHECK_THROWS_AS(parse_seed_grid("lambda=1:2:x"), ValidationError);
}
