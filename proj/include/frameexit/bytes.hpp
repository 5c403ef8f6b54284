#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace frameexit {

// Little-endian f64 encode/decode, independent of host byte order. Used by
// the dataset payload and checkpoint formats.

inline void put_f64_le(std::ostream& os, double value) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

inline bool get_f64_le(std::istream& is, double& value) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) return false;
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    value = std::bit_cast<double>(bits);
    return true;
}

inline void put_f64_span_le(std::ostream& os, std::span<const double> values) {
    for (double v : values) put_f64_le(os, v);
}

}  // namespace frameexit
