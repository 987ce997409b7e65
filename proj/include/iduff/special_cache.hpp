#pragma once

// On-disk cache of SpecialFunctions keyed by (n, tol).
//
// Layout, all little-endian:
//   bytes 0..7   magic "IDUFFSF\0"
//   u32          format version (1)
//   u32          n
//   f64          tol
//   f64          period T*
//   u64          number of intervals N
//   f64[N+1]     C samples
//   f64[N+1]     S samples
//
// Every derived quantity is rebuilt from these fields, so a loaded object is bit-identical to a
// freshly computed one.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "special.hpp"

namespace iduff {

inline constexpr std::uint32_t kSpecialCacheVersion = 1;

namespace detail {

inline constexpr std::array<char, 8> kSpecialCacheMagic{'I', 'D', 'U', 'F', 'F', 'S', 'F', '\0'};

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
public:
    explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}
    std::uint64_t u64() { return take(8); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
    double f64() { return std::bit_cast<double>(u64()); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::uint64_t take(int count) {
        if (pos_ + static_cast<std::size_t>(count) > bytes_.size()) throw ParseError("special cache: truncated file");
        std::uint64_t v = 0;
        for (int i = 0; i < count; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(count);
        return v;
    }
    const std::string& bytes_;
    std::size_t pos_ = 8;
};

} // namespace detail

inline std::string serialize_special_functions(const SpecialFunctions& sf) {
    std::string out(detail::kSpecialCacheMagic.begin(), detail::kSpecialCacheMagic.end());
    detail::put_u32(out, kSpecialCacheVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(sf.n()));
    detail::put_f64(out, sf.tol());
    detail::put_f64(out, sf.period());
    detail::put_u64(out, sf.intervals());
    for (double v : sf.cos_samples()) detail::put_f64(out, v);
    for (double v : sf.sin_samples()) detail::put_f64(out, v);
    return out;
}

inline SpecialFunctions deserialize_special_functions(const std::string& bytes) {
    if (bytes.size() < 8 || !std::equal(detail::kSpecialCacheMagic.begin(), detail::kSpecialCacheMagic.end(), bytes.begin()))
        throw ParseError("special cache: bad magic");
    detail::ByteReader r(bytes);
    if (r.u32() != kSpecialCacheVersion) throw ParseError("special cache: unsupported version");
    const int n = static_cast<int>(r.u32());
    const double tol = r.f64();
    const double period = r.f64();
    const std::uint64_t N = r.u64();
    if (N > (std::uint64_t{1} << 24)) throw ParseError("special cache: implausible grid size");
    std::vector<double> cs(N + 1), ss(N + 1);
    for (auto& v : cs) v = r.f64();
    for (auto& v : ss) v = r.f64();
    if (!r.done()) throw ParseError("special cache: trailing bytes");
    return SpecialFunctions(n, tol, period, std::move(cs), std::move(ss));
}

inline void save_special_functions(const SpecialFunctions& sf, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write special cache '" + path.string() + "'");
    const auto bytes = serialize_special_functions(sf);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline SpecialFunctions load_special_functions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open special cache '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return deserialize_special_functions(buf.str());
}

/// File name for the (n, tol) key; tol is encoded by its bit pattern.
inline std::string special_cache_name(int n, double tol) {
    char name[64];
    std::snprintf(name, sizeof name, "special_n%d_tol%016llx.bin", n,
                  static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(tol)));
    return name;
}

/// Loads from `dir` when a matching cache file exists, otherwise computes and stores it.
inline SpecialFunctions cached_special_functions(int n, double tol, const std::filesystem::path& dir) {
    const auto path = dir / special_cache_name(n, tol);
    if (std::filesystem::exists(path)) {
        auto sf = load_special_functions(path);
        if (sf.n() == n && sf.tol() == tol) return sf;
    }
    auto sf = compute_special_functions(n, tol);
    std::filesystem::create_directories(dir);
    save_special_functions(sf, path);
    return sf;
}

} // namespace iduff
