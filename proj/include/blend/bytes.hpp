#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace blend {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::string to_hex(ByteView data);

/// Accepts upper/lower case, ignores spaces. Throws Errc::invalid_argument on
/// odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline void append(Bytes& out, ByteView data) { out.insert(out.end(), data.begin(), data.end()); }

inline Bytes concat(ByteView a, ByteView b) {
    Bytes out(a.begin(), a.end());
    append(out, b);
    return out;
}

inline Bytes concat(ByteView a, ByteView b, ByteView c) {
    Bytes out = concat(a, b);
    append(out, c);
    return out;
}

void put_be(Bytes& out, std::uint64_t value, std::size_t width);
std::uint64_t get_be(ByteView data);

}  // namespace blend
