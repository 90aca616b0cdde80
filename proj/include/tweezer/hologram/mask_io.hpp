#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "tweezer/core/error.hpp"
#include "tweezer/hologram/wgs.hpp"

namespace tweezer::hologram {

// Binary layout: "PHMK", u32 N, 8 reserved zero bytes (16-byte header),
// then N*N little-endian IEEE-754 doubles in row-major order.
inline constexpr std::array<char, 4> kMaskMagic{'P', 'H', 'M', 'K'};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(std::istream& in, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) {
            fail(Errc::IoError, "phase mask file is truncated");
        }
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

}  // namespace detail

inline void write_phase_mask(std::ostream& out, const PhaseMask& mask) {
    validate_mask(mask);
    out.write(kMaskMagic.data(), kMaskMagic.size());
    detail::put_u32(out, static_cast<std::uint32_t>(mask.grid_size));
    detail::put_u32(out, 0);
    detail::put_u32(out, 0);
    for (double p : mask.phase) {
        detail::put_u64(out, std::bit_cast<std::uint64_t>(p));
    }
}

inline PhaseMask read_phase_mask(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMaskMagic) {
        fail(Errc::IoError, "not a phase mask file (bad magic)");
    }
    PhaseMask mask;
    mask.grid_size = static_cast<std::size_t>(detail::get_le(in, 4));
    detail::get_le(in, 8);
    if (!is_power_of_two(mask.grid_size)) {
        fail(Errc::InvalidMask, "grid size in header is not a power of two");
    }
    mask.phase.resize(mask.grid_size * mask.grid_size);
    for (double& p : mask.phase) {
        p = std::bit_cast<double>(detail::get_le(in, 8));
    }
    validate_mask(mask);
    return mask;
}

inline void save_phase_mask(const std::string& path, const PhaseMask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::IoError, "cannot open " + path + " for writing");
    write_phase_mask(out, mask);
}

inline PhaseMask load_phase_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open " + path);
    return read_phase_mask(in);
}

inline nlohmann::json to_json(const WgsReport& r) {
    return {{"iterations_run", r.iterations_run},
            {"uniformity", r.uniformity},
            {"efficiency", r.efficiency},
            {"max_parseval_error", r.max_parseval_error},
            {"uniformity_trace", r.uniformity_trace}};
}

}  // namespace tweezer::hologram
