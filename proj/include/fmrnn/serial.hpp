#pragma once

// Byte-order-pinned primitives for the binary file formats. Everything on
// disk is little-endian regardless of host order.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace fmrnn::serial {

inline void write_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool read_u32le(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

inline void write_u64le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool read_u64le(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

inline void write_f32le(std::ostream& os, float v) {
    write_u32le(os, std::bit_cast<std::uint32_t>(v));
}

inline bool read_f32le(std::istream& is, float& v) {
    std::uint32_t u;
    if (!read_u32le(is, u)) return false;
    v = std::bit_cast<float>(u);
    return true;
}

inline void write_f64le(std::ostream& os, double v) {
    write_u64le(os, std::bit_cast<std::uint64_t>(v));
}

inline bool read_f64le(std::istream& is, double& v) {
    std::uint64_t u;
    if (!read_u64le(is, u)) return false;
    v = std::bit_cast<double>(u);
    return true;
}

}  // namespace fmrnn::serial
