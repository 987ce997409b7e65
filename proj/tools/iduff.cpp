// iduff: batch front end for simulation and analysis of impulsive Duffing equations.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "iduff/iduff.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace iduff;

namespace {

#ifndef IDUFF_VERSION
#define IDUFF_VERSION "0.0.0"
#endif

enum ExitCode : int { kOk = 0, kNoFindings = 1, kValidation = 2, kNumerical = 3, kIo = 4, kInternal = 5 };

struct Options {
    std::string config_path;
    std::string out_dir = "out";
    std::string seed_grid;
    unsigned jobs = 0;
    std::optional<double> tol;
    double t_end = 10.0;
    double lambda_min = 1.0;
    double lambda_max = 1000.0;
    int grid_size = 20;
    int angles = 8;
    int iterates = 2000;
    int modes = 16;
    int horizon = 1000;
    int period = 1;
    long winding = 1;
    int n = 1;
    std::vector<double> bracket_seeds;
};

/// Collects the run metadata and writes manifest.json into the output directory.
class Manifest {
public:
    Manifest(std::string command, fs::path dir)
        : command_(std::move(command)), dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {}

    json& parameters() { return params_; }
    void set_config_hash(std::string h) { hash_ = std::move(h); }
    const std::string& config_hash() const { return hash_; }
    const fs::path& dir() const { return dir_; }

    fs::path output(const std::string& name) {
        outputs_.push_back(name);
        return dir_ / name;
    }

    void fail(std::string why) { failure_ = std::move(why); }

    void write() const {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json m{{"command", command_},
               {"config_hash", hash_},
               {"parameters", params_},
               {"outputs", outputs_},
               {"duration_seconds", secs},
               {"version", IDUFF_VERSION},
               {"status", failure_.empty() ? "ok" : "failed"}};
        if (!failure_.empty()) m["failure"] = failure_;
        write_json(m, dir_ / "manifest.json");
    }

    static void write_json(const json& doc, const fs::path& path) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out << doc.dump(2) << '\n';
        if (!out) throw IoError("write failed for '" + path.string() + "'");
    }

private:
    std::string command_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    json params_ = json::object();
    std::vector<std::string> outputs_;
    std::string hash_;
    std::string failure_;
};

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& header) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot write '" + path.string() + "'");
        out_ << header << '\n';
    }

    template <class... Ts>
    void row(const Ts&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(fields), first = false), ...);
        out_ << '\n';
        if (!out_) throw IoError("write failed for '" + path_.string() + "'");
    }

private:
    static std::string cell(double v) { return detail::fmt_real(v); }
    static std::string cell(bool v) { return v ? "true" : "false"; }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v) {
        return std::to_string(v);
    }

    fs::path path_;
    std::ofstream out_;
};

SystemConfig load_with_overrides(const Options& opt) {
    SystemConfig cfg = load_config(opt.config_path);
    if (opt.tol) {
        auto s = cfg.integrator();
        s.abs_tol = *opt.tol;
        s.rel_tol = *opt.tol;
        cfg = cfg.with_integrator(s);
    }
    return cfg;
}

std::vector<PoincarePoint> seeds_or(const Options& opt, const std::string& fallback) {
    return parse_seed_grid(opt.seed_grid.empty() ? fallback : opt.seed_grid).points();
}

json point_json(const PoincarePoint& z) { return {{"lambda", z.lambda}, {"Theta", z.Theta}}; }

/// Findings file: one record per finding, each carrying the config hash and the run parameters.
void write_findings(Manifest& man, const std::string& kind, const std::vector<json>& records) {
    json arr = json::array();
    for (const auto& r : records) {
        json rec = r;
        rec["kind"] = kind;
        rec["config_hash"] = man.config_hash();
        rec["parameters"] = man.parameters();
        arr.push_back(std::move(rec));
    }
    Manifest::write_json(arr, man.output("findings.json"));
}

// -------------------------------------------------------------------------------------------------

int cmd_simulate(const Options& opt, Manifest& man) {
    if (!(opt.t_end > 0.0)) throw ValidationError("--t-end must be positive");
    const SystemConfig cfg = load_with_overrides(opt);
    man.set_config_hash(config_hash(cfg));
    const SpecialFunctions sf = compute_special_functions(cfg.n());
    const auto seeds = seeds_or(opt, "lambda=1:100:log:3,theta=0:1:2");
    man.parameters() = {{"t_end", opt.t_end}, {"seeds", seeds.size()}, {"seed_grid", opt.seed_grid}};

    CsvWriter summary(man.output("seeds.csv"), "index,lambda,theta,x0,y0,t_final,x_final,y_final,impulses,escaped");
    bool any_escape = false;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto [x0, y0] = to_phase(sf, {seeds[i].lambda, seeds[i].Theta});
        const auto [end, traj] = flow_map_trajectory(cfg, PhaseState{0.0, x0, y0}, opt.t_end);
        write_trajectory_csv(traj, man.output("trajectory_" + std::to_string(i) + ".csv"));
        write_impulses_csv(traj, man.output("impulses_" + std::to_string(i) + ".csv"));
        summary.row(i, seeds[i].lambda, seeds[i].Theta, x0, y0, end.t, end.x, end.y, traj.impulses.size(),
                    traj.escaped);
        any_escape = any_escape || traj.escaped;
    }
    if (any_escape) {
        man.fail("escape: at least one trajectory left the guard region");
        return kNumerical;
    }
    return kOk;
}

int cmd_twist(const Options& opt, Manifest& man) {
    if (!(opt.lambda_min > 0.0 && opt.lambda_max > opt.lambda_min)) throw ValidationError("need 0 < lambda-min < lambda-max");
    if (opt.grid_size < 3) throw ValidationError("--grid-size must be at least 3");
    const SystemConfig cfg = load_with_overrides(opt);
    man.set_config_hash(config_hash(cfg));
    const SpecialFunctions sf = compute_special_functions(cfg.n());
    man.parameters() = {{"lambda_min", opt.lambda_min}, {"lambda_max", opt.lambda_max},
                        {"grid_size", opt.grid_size}, {"angles", opt.angles}};

    std::vector<double> grid;
    for (int i = 0; i < opt.grid_size; ++i)
        grid.push_back(opt.lambda_min * std::pow(opt.lambda_max / opt.lambda_min, i / (opt.grid_size - 1.0)));
    grid.back() = opt.lambda_max;
    const TwistProfile prof = twist_profile(cfg, sf, grid, TwistOptions{opt.angles});
    write_twist_csv(prof, man.output("twist.csv"));

    double min_top = std::numeric_limits<double>::infinity();
    for (const auto& s : prof.samples)
        if (s.lambda >= grid.back() / 10.0) min_top = std::min(min_top, std::abs(s.scaled_derivative));
    json verdict{{"config_hash", man.config_hash()},
                 {"degenerate", prof.degenerate},
                 {"twist_factor", prof.twist_factor},
                 {"predicted_sign", prof.predicted_sign},
                 {"sign_ok", prof.all_sign_ok},
                 {"lambda0", prof.lambda0 ? json(*prof.lambda0) : json(nullptr)},
                 {"gamma", prof.gamma},
                 {"bound", prof.bound},
                 {"min_scaled_derivative_top_decade", min_top},
                 {"bound_ok_top_decade", prof.bound_ok_top_decade},
                 {"monotone", prof.monotone},
                 {"parameters", man.parameters()}};
    Manifest::write_json(verdict, man.output("twist_verdict.json"));
    return kOk;
}

int analyze_rotation(const Options& opt, const SystemConfig& cfg, const SpecialFunctions& sf, Manifest& man) {
    const auto seeds = seeds_or(opt, "lambda=1:1000:log:10,theta=0:1:1");
    man.parameters() = {{"iterates", opt.iterates}, {"seed_grid", opt.seed_grid}, {"seeds", seeds.size()}};
    const PoincareMap map(cfg, sf);
    const auto est = parallel_map(seeds.size(), opt.jobs, [&](std::size_t i) { return rotation_number(map, seeds[i], opt.iterates); });

    CsvWriter csv(man.output("rotation.csv"), "index,lambda,theta,value,error_bound,iterates_used,usable,unforced_closed_form");
    std::vector<json> found;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const double closed = cfg.schedule().degenerate() ? 0.0 : unforced_advance(sf, cfg.schedule(), seeds[i].lambda);
        csv.row(i, seeds[i].lambda, seeds[i].Theta, est[i].value, est[i].error_bound, est[i].iterates_used,
                est[i].usable, closed);
        if (est[i].usable)
            found.push_back({{"seed_index", i}, {"seed", point_json(seeds[i])}, {"value", est[i].value},
                             {"error_bound", est[i].error_bound}, {"iterates_used", est[i].iterates_used},
                             {"method", est[i].method}});
    }
    write_findings(man, "rotation_number", found);
    return found.empty() ? kNoFindings : kOk;
}

json curve_json(const InvariantCurveFit& f) {
    auto series = [](const FourierSeries& s) { return json{{"a0", s.a0}, {"a", s.a}, {"b", s.b}}; };
    return {{"seed", point_json(f.seed)},
            {"status", to_string(f.status)},
            {"rho", f.rho},
            {"rho_error_bound", f.rotation.error_bound},
            {"residual", f.residual},
            {"threshold", f.threshold},
            {"max_advance_deviation", f.max_advance_deviation},
            {"median_lambda", f.median_lambda},
            {"diophantine", {{"pass", f.diophantine.pass}, {"worst_p", f.diophantine.worst_p},
                             {"worst_q", f.diophantine.worst_q}, {"margin", f.diophantine.margin}}},
            {"angle_shift", series(f.angle_shift)},
            {"action", series(f.action)}};
}

CurveOptions curve_options(const Options& opt) {
    CurveOptions c;
    c.modes = opt.modes;
    c.iterates = opt.iterates;
    return c;
}

int analyze_curve(const Options& opt, const SystemConfig& cfg, const SpecialFunctions& sf, Manifest& man) {
    const auto seeds = seeds_or(opt, "lambda=1000:3000:log:6,theta=0:1:1");
    const CurveOptions copt = curve_options(opt);
    man.parameters() = {{"modes", copt.modes}, {"iterates", copt.iterates}, {"dioph_c", copt.dioph_c},
                        {"dioph_beta", copt.dioph_beta}, {"q_max", copt.q_max},
                        {"threshold_factor", copt.threshold_factor}, {"gap_factor", copt.gap_factor},
                        {"seed_grid", opt.seed_grid}, {"seeds", seeds.size()}};
    const PoincareMap map(cfg, sf);
    const auto fits = find_invariant_curves(map, seeds, copt, opt.jobs);

    CsvWriter csv(man.output("curves.csv"),
                  "index,lambda,theta,status,rho,residual,threshold,max_advance_deviation,median_lambda,diophantine_pass");
    std::vector<json> found;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& f = fits[i];
        csv.row(i, seeds[i].lambda, seeds[i].Theta, to_string(f.status), f.rho, f.residual, f.threshold,
                f.max_advance_deviation, f.median_lambda, f.diophantine.pass);
        if (f.accepted()) {
            json rec = curve_json(f);
            rec["seed_index"] = i;
            found.push_back(std::move(rec));
        }
    }
    write_findings(man, "invariant_curve", found);
    return found.empty() ? kNoFindings : kOk;
}

int analyze_bounded(const Options& opt, const SystemConfig& cfg, const SpecialFunctions& sf, Manifest& man) {
    const auto seeds = seeds_or(opt, "lambda=1:1000:log:4,theta=0:1:2");
    if (!opt.bracket_seeds.empty() && opt.bracket_seeds.size() != 2)
        throw ValidationError("--bracket-seeds takes exactly two actions");
    man.parameters() = {{"horizon", opt.horizon}, {"seed_grid", opt.seed_grid}, {"seeds", seeds.size()},
                        {"bracket_seeds", opt.bracket_seeds}};
    const PoincareMap map(cfg, sf);

    std::vector<InvariantCurveFit> bracket_fits;
    std::optional<CurveBracket> bracket;
    if (!opt.bracket_seeds.empty()) {
        const CurveOptions copt = curve_options(opt);
        for (double l : opt.bracket_seeds) bracket_fits.push_back(find_invariant_curve(map, {l, 0.0}, copt));
        for (const auto& f : bracket_fits)
            if (!f.accepted())
                throw NumericalError("bracket curve from lambda = " + detail::fmt_real(f.seed.lambda) + " not accepted (" +
                                     to_string(f.status) + ")");
        if (bracket_fits[0].median_lambda > bracket_fits[1].median_lambda) std::swap(bracket_fits[0], bracket_fits[1]);
        bracket = CurveBracket{&bracket_fits[0], &bracket_fits[1]};
    }
    const auto rows = boundedness_scan(map, seeds, BoundednessOptions{opt.horizon, 100}, bracket, opt.jobs);

    CsvWriter csv(man.output("bounded.csv"),
                  "index,lambda,theta,periods_completed,escaped,max_norm,window_max_norm,growth_over_window,"
                  "monotone_growth_last_half,stayed_between,degenerate");
    std::vector<json> found;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string between = r.stayed_between ? (*r.stayed_between ? "true" : "false") : "";
        csv.row(i, seeds[i].lambda, seeds[i].Theta, r.periods_completed, r.escaped, r.max_norm, r.window_max_norm,
                r.growth_over_window, r.monotone_growth_last_half, between, r.degenerate);
        found.push_back({{"seed_index", i},
                         {"seed", point_json(r.seed)},
                         {"periods_completed", r.periods_completed},
                         {"escaped", r.escaped},
                         {"failure", r.failure},
                         {"max_norm", r.max_norm},
                         {"window_max_norm", r.window_max_norm},
                         {"monotone_growth_last_half", r.monotone_growth_last_half},
                         {"stayed_between", r.stayed_between ? json(*r.stayed_between) : json(nullptr)},
                         {"degenerate", r.degenerate}});
    }
    write_findings(man, "boundedness", found);
    return found.empty() ? kNoFindings : kOk;
}

int analyze_periodic(const Options& opt, const SystemConfig& cfg, const SpecialFunctions& sf, Manifest& man) {
    if (opt.period < 1) throw ValidationError("--period must be >= 1");
    const auto seeds = opt.seed_grid.empty() ? resonant_seeds(sf, cfg.schedule(), opt.period, opt.winding, 8)
                                             : parse_seed_grid(opt.seed_grid).points();
    const PeriodicOptions popt;
    man.parameters() = {{"period", opt.period}, {"winding", opt.winding}, {"seed_grid", opt.seed_grid},
                        {"seeds", seeds.size()}, {"tol", popt.tol}, {"dedup_tol", popt.dedup_tol},
                        {"minimality_tol", popt.minimality_tol}};
    const auto res = find_periodic_orbits(PoincareMap(cfg, sf), opt.period, opt.winding, seeds, popt, opt.jobs);
    for (const auto& line : res.log) std::cerr << "periodic: " << line << '\n';

    CsvWriter csv(man.output("periodic.csv"), "index,lambda,Theta,m,p,residual,minimal,min_separation,seed_index");
    std::vector<json> found;
    for (std::size_t i = 0; i < res.orbits.size(); ++i) {
        const auto& o = res.orbits[i];
        csv.row(i, o.point.lambda, o.point.Theta, o.m, o.p, o.residual, o.minimal, o.min_separation, o.seed_index);
        json pts = json::array();
        for (const auto& q : o.orbit) pts.push_back(point_json(q));
        found.push_back({{"point", point_json(o.point)}, {"m", o.m}, {"p", o.p}, {"residual", o.residual},
                         {"minimal", o.minimal}, {"orbit", pts}, {"seed_index", o.seed_index}});
    }
    write_findings(man, "periodic_orbit", found);
    if (found.empty()) man.fail("no convergence from any seed; best residual " + detail::fmt_real(res.best_residual));
    return found.empty() ? kNoFindings : kOk;
}

int cmd_special(const Options& opt, Manifest& man) {
    int n = opt.n;
    if (!opt.config_path.empty()) {
        const SystemConfig cfg = load_config(opt.config_path);
        man.set_config_hash(config_hash(cfg));
        n = cfg.n();
    }
    const double tol = opt.tol.value_or(1e-12);
    const SpecialFunctions sf = compute_special_functions(n, tol);
    man.parameters() = {{"n", n}, {"tol", tol}};
    CsvWriter csv(man.output("special.csv"), "tau,C,S");
    for (std::size_t k = 0; k <= sf.intervals(); ++k)
        csv.row(sf.grid_time(k), sf.cos_samples()[k], sf.sin_samples()[k]);
    Manifest::write_json({{"n", n}, {"tol", tol}, {"period", sf.period()}, {"alpha", sf.alpha()},
                          {"beta", sf.beta()}, {"c", sf.c()}, {"d", sf.d()}, {"intervals", sf.intervals()}},
                         man.output("special.json"));
    return kOk;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const PreconditionError*>(&e))
        return kValidation;
    if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return kIo;
    return kInternal;
}

template <class Fn>
int run(const std::string& name, const Options& opt, Fn&& body) {
    std::optional<Manifest> man;
    try {
        fs::create_directories(opt.out_dir);
        man.emplace(name, fs::path(opt.out_dir));
        const int code = body(*man);
        man->write();
        return code;
    } catch (const std::exception& e) {
        std::cerr << "iduff " << name << ": " << e.what() << '\n';
        const int code = exit_code_for(e);
        if (man && code != kIo) {
            man->fail(e.what());
            try {
                man->write();
            } catch (const std::exception& w) {
                std::cerr << "iduff: could not write manifest: " << w.what() << '\n';
            }
        }
        return code;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and analysis of impulsive Duffing equations"};
    app.set_version_flag("--version", IDUFF_VERSION);
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App* cmd, bool config_required) {
        auto* c = cmd->add_option("--config", opt.config_path, "System config (JSON)");
        if (config_required) c->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
        cmd->add_option("--jobs", opt.jobs, "Worker threads (0 = all logical processors)")->capture_default_str();
        cmd->add_option("--tol", opt.tol, "Integrator tolerance override (special: construction tolerance)");
    };
    auto seeded = [&](CLI::App* cmd) {
        cmd->add_option("--seed-grid", opt.seed_grid, "e.g. lambda=1:100:log:20,theta=0:1:8");
    };

    auto* simulate = app.add_subcommand("simulate", "Integrate trajectories and record impulse events");
    common(simulate, true);
    seeded(simulate);
    simulate->add_option("--t-end", opt.t_end, "End time")->capture_default_str();

    auto* twist = app.add_subcommand("twist", "Net angle advance and twist verdict on an action grid");
    common(twist, true);
    twist->add_option("--lambda-min", opt.lambda_min)->capture_default_str();
    twist->add_option("--lambda-max", opt.lambda_max)->capture_default_str();
    twist->add_option("--grid-size", opt.grid_size)->capture_default_str();
    twist->add_option("--angles", opt.angles, "Initial angles averaged per action")->capture_default_str();

    auto* analyze = app.add_subcommand("analyze", "Run an analysis over a seed grid");
    analyze->require_subcommand(1);
    auto* rotation = analyze->add_subcommand("rotation", "Weighted Birkhoff rotation numbers");
    auto* curve = analyze->add_subcommand("curve", "Invariant-curve detection");
    auto* bounded = analyze->add_subcommand("bounded", "Boundedness scan");
    auto* periodic = analyze->add_subcommand("periodic", "Periodic-orbit search");
    for (auto* cmd : {rotation, curve, bounded, periodic}) {
        common(cmd, true);
        seeded(cmd);
    }
    rotation->add_option("--iterates", opt.iterates)->capture_default_str();
    curve->add_option("--iterates", opt.iterates)->capture_default_str();
    curve->add_option("--modes", opt.modes)->capture_default_str();
    bounded->add_option("--horizon", opt.horizon, "Periods per seed")->capture_default_str();
    bounded->add_option("--bracket-seeds", opt.bracket_seeds, "Two actions seeding the bracketing curves")
        ->expected(2);
    bounded->add_option("--iterates", opt.iterates, "Iterates for bracketing curve fits")->capture_default_str();
    bounded->add_option("--modes", opt.modes, "Modes for bracketing curve fits")->capture_default_str();
    periodic->add_option("--period", opt.period, "Period m")->capture_default_str();
    periodic->add_option("--winding", opt.winding, "Winding integer p")->capture_default_str();

    auto* special = app.add_subcommand("special", "Dump C, S, T* and chart constants");
    common(special, false);
    special->add_option("--n", opt.n, "Degree n (ignored when --config is given)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    if (simulate->parsed()) return run("simulate", opt, [&](Manifest& m) { return cmd_simulate(opt, m); });
    if (twist->parsed()) return run("twist", opt, [&](Manifest& m) { return cmd_twist(opt, m); });
    if (special->parsed()) return run("special", opt, [&](Manifest& m) { return cmd_special(opt, m); });

    const std::pair<CLI::App*, int (*)(const Options&, const SystemConfig&, const SpecialFunctions&, Manifest&)>
        analyses[] = {{rotation, analyze_rotation}, {curve, analyze_curve}, {bounded, analyze_bounded},
                      {periodic, analyze_periodic}};
    for (const auto& [cmd, fn] : analyses) {
        if (!cmd->parsed()) continue;
        return run("analyze " + cmd->get_name(), opt, [&, fn = fn](Manifest& m) {
            const SystemConfig cfg = load_with_overrides(opt);
            m.set_config_hash(config_hash(cfg));
            const SpecialFunctions sf = compute_special_functions(cfg.n());
            return fn(opt, cfg, sf, m);
        });
    }
    return kInternal;
}
