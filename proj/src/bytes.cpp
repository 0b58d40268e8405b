#include "blend/bytes.hpp"

#include "blend/error.hpp"

namespace blend {

const char* to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_argument: return "invalid argument";
        case Errc::cbor_encoding: return "cbor encoding error";
        case Errc::cbor_truncated: return "cbor truncated input";
        case Errc::cbor_non_canonical: return "cbor non-canonical encoding";
        case Errc::cbor_unsupported: return "cbor unsupported item";
        case Errc::authentication: return "authentication failed";
        case Errc::coap_invalid: return "invalid coap message";
        case Errc::coap_parse: return "coap parse error";
        case Errc::oscore_parse: return "oscore parse error";
        case Errc::sequence_exhausted: return "sequence number exhausted";
        case Errc::replay: return "replayed sequence number";
        case Errc::no_context: return "no security context";
        case Errc::flash_violation: return "flash program violation";
        case Errc::storage_full: return "storage full";
        case Errc::batch_mismatch: return "batch mismatch";
        case Errc::end_of_data: return "end of data";
        case Errc::handshake_abort: return "handshake aborted";
        case Errc::transport: return "transport error";
        case Errc::config: return "configuration error";
        case Errc::crypto_backend: return "crypto backend failure";
    }
    return "unknown error";
}

std::string to_hex(ByteView data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

namespace {
int nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
    Bytes out;
    int high = -1;
    for (char c : hex) {
        if (c == ' ') continue;
        int v = nibble(c);
        if (v < 0) throw Error(Errc::invalid_argument, "non-hex character in '" + std::string(hex) + "'");
        if (high < 0) {
            high = v;
        } else {
            out.push_back(static_cast<std::uint8_t>((high << 4) | v));
            high = -1;
        }
    }
    if (high >= 0) throw Error(Errc::invalid_argument, "odd-length hex string");
    return out;
}

void put_be(Bytes& out, std::uint64_t value, std::size_t width) {
    for (std::size_t i = width; i-- > 0;) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

std::uint64_t get_be(ByteView data) {
    std::uint64_t v = 0;
    for (auto b : data) v = (v << 8) | b;
    return v;
}

}  // namespace blend
