#pragma once

// JSON config documents:
//
//   {
//     "n": 1,
//     "coefficients": [ {"mean": 0.0, "harmonics": [[a1, b1], [a2, b2]]}, ... ],   // 2n+1 entries
//     "impulses":   {"t1": 0.25, "t2": 0.5},
//     "integrator": {"abs_tol": 1e-12, "rel_tol": 1e-12, "max_step": 0.05}        // "escape_guard" optional
//   }
//
// Unknown keys are rejected at every level.

#include <array>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "json.hpp"

#include "error.hpp"
#include "model.hpp"

namespace iduff {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
    if (!obj.is_object()) throw ParseError(std::string(where) + ": expected an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (auto k : allowed) known = known || item.key() == k;
        if (!known) throw ParseError(std::string(where) + ": unknown key '" + item.key() + "'");
    }
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string(where) + ": missing key '" + key + "'");
    return *it;
}

inline double as_real(const nlohmann::json& v, std::string_view where) {
    if (!v.is_number()) throw ParseError(std::string(where) + ": expected a number");
    return v.get<double>();
}

inline TrigPoly trig_poly_from_json(const nlohmann::json& obj, std::string_view where) {
    reject_unknown_keys(obj, {"mean", "harmonics"}, where);
    TrigPoly p;
    p.mean = as_real(require(obj, "mean", where), where);
    const auto& h = require(obj, "harmonics", where);
    if (!h.is_array()) throw ParseError(std::string(where) + ".harmonics: expected an array");
    for (const auto& pair : h) {
        if (!pair.is_array() || pair.size() != 2)
            throw ParseError(std::string(where) + ".harmonics: expected [a_k, b_k] pairs");
        p.harmonics.emplace_back(as_real(pair[0], where), as_real(pair[1], where));
    }
    return p;
}

} // namespace detail

inline SystemConfig config_from_json(const nlohmann::json& doc) {
    detail::reject_unknown_keys(doc, {"n", "coefficients", "impulses", "integrator"}, "config");
    const auto& jn = detail::require(doc, "n", "config");
    if (!jn.is_number_integer()) throw ParseError("config.n: expected an integer");
    const auto n = jn.get<long long>();
    if (n < 1 || n > 64) throw ValidationError("n >= 1 violated (or unreasonably large n)");

    const auto& jc = detail::require(doc, "coefficients", "config");
    if (!jc.is_array()) throw ParseError("config.coefficients: expected an array");
    std::vector<TrigPoly> coeffs;
    for (std::size_t i = 0; i < jc.size(); ++i)
        coeffs.push_back(detail::trig_poly_from_json(jc[i], "config.coefficients[" + std::to_string(i) + "]"));

    const auto& ji = detail::require(doc, "impulses", "config");
    detail::reject_unknown_keys(ji, {"t1", "t2"}, "config.impulses");
    ImpulseSchedule schedule(detail::as_real(detail::require(ji, "t1", "config.impulses"), "config.impulses.t1"),
                             detail::as_real(detail::require(ji, "t2", "config.impulses"), "config.impulses.t2"));

    const auto& jt = detail::require(doc, "integrator", "config");
    detail::reject_unknown_keys(jt, {"abs_tol", "rel_tol", "max_step", "escape_guard"}, "config.integrator");
    IntegratorSettings integ;
    integ.abs_tol = detail::as_real(detail::require(jt, "abs_tol", "config.integrator"), "config.integrator.abs_tol");
    integ.rel_tol = detail::as_real(detail::require(jt, "rel_tol", "config.integrator"), "config.integrator.rel_tol");
    integ.max_step = detail::as_real(detail::require(jt, "max_step", "config.integrator"), "config.integrator.max_step");
    if (jt.contains("escape_guard"))
        integ.escape_guard = detail::as_real(jt["escape_guard"], "config.integrator.escape_guard");

    return SystemConfig(static_cast<int>(n), std::move(coeffs), schedule, integ);
}

inline SystemConfig parse_config(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(doc);
}

inline SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

inline nlohmann::json to_json(const SystemConfig& config) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& p : config.coefficients()) {
        nlohmann::json h = nlohmann::json::array();
        for (const auto& [a, b] : p.harmonics) h.push_back({a, b});
        coeffs.push_back({{"mean", p.mean}, {"harmonics", h}});
    }
    const auto& s = config.integrator();
    return {{"n", config.n()},
            {"coefficients", coeffs},
            {"impulses", {{"t1", config.schedule().t1()}, {"t2", config.schedule().t2()}}},
            {"integrator",
             {{"abs_tol", s.abs_tol}, {"rel_tol", s.rel_tol}, {"max_step", s.max_step},
              {"escape_guard", s.escape_guard}}}};
}

/// Sorted keys, shortest round-trip float formatting, no whitespace.
inline std::string canonical_json(const SystemConfig& config) { return to_json(config).dump(); }

inline void save_config(const SystemConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file '" + path + "'");
    out << to_json(config).dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Lower-case hex SHA-256 of the bytes.
inline std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

inline std::string config_hash(const SystemConfig& config) { return sha256_hex(canonical_json(config)); }

} // namespace iduff
