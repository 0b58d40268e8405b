#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "blend/bytes.hpp"

/// The CBOR subset used by OSCORE and COSE: unsigned integers, byte strings,
/// text strings, definite-length arrays and null. Encoding is always
/// canonical; decoding rejects anything non-minimal.
namespace blend::cbor {

inline constexpr std::size_t max_depth = 8;

class Item {
public:
    enum class Kind { uint, bytes, text, array, null };
    using Array = std::vector<Item>;

    Item() : value_(NullValue{}) {}

    static Item uint(std::uint64_t v) { return Item(v); }
    static Item bytes(Bytes v) { return Item(std::move(v)); }
    static Item bytes(ByteView v) { return Item(Bytes(v.begin(), v.end())); }
    static Item text(std::string v) { return Item(TextValue{std::move(v)}); }
    static Item array(Array v) { return Item(std::move(v)); }
    static Item null() { return Item(); }

    Kind kind() const noexcept { return static_cast<Kind>(value_.index()); }

    // Accessors throw Errc::cbor_unsupported on a kind mismatch.
    std::uint64_t as_uint() const;
    const Bytes& as_bytes() const;
    const std::string& as_text() const;
    const Array& as_array() const;

    bool operator==(const Item&) const = default;

private:
    struct TextValue {
        std::string value;
        bool operator==(const TextValue&) const = default;
    };
    struct NullValue {
        bool operator==(const NullValue&) const = default;
    };

    template <typename T>
    explicit Item(T v) : value_(std::move(v)) {}

    // Alternative order mirrors Kind.
    std::variant<std::uint64_t, Bytes, TextValue, Array, NullValue> value_;
};

Bytes encode(const Item& item);
void encode_into(Bytes& out, const Item& item);

struct Decoded {
    Item item;
    std::size_t consumed = 0;
};

Decoded decode(ByteView data);

/// Decodes and requires the item to span the whole input.
Item decode_exact(ByteView data);

}  // namespace blend::cbor
