#include "blend/cbor.hpp"

#include "blend/error.hpp"

namespace blend::cbor {

namespace {

enum Major : std::uint8_t { major_uint = 0, major_bytes = 2, major_text = 3, major_array = 4, major_simple = 7 };

constexpr std::uint8_t null_byte = 0xf6;

void put_head(Bytes& out, std::uint8_t major, std::uint64_t arg) {
    const auto mt = static_cast<std::uint8_t>(major << 5);
    if (arg < 24) {
        out.push_back(static_cast<std::uint8_t>(mt | arg));
    } else if (arg <= 0xff) {
        out.push_back(mt | 24);
        put_be(out, arg, 1);
    } else if (arg <= 0xffff) {
        out.push_back(mt | 25);
        put_be(out, arg, 2);
    } else if (arg <= 0xffffffffULL) {
        out.push_back(mt | 26);
        put_be(out, arg, 4);
    } else {
        out.push_back(mt | 27);
        put_be(out, arg, 8);
    }
}

void encode_rec(Bytes& out, const Item& item, std::size_t depth) {
    switch (item.kind()) {
        case Item::Kind::uint:
            put_head(out, major_uint, item.as_uint());
            break;
        case Item::Kind::bytes:
            put_head(out, major_bytes, item.as_bytes().size());
            append(out, item.as_bytes());
            break;
        case Item::Kind::text: {
            const auto& s = item.as_text();
            put_head(out, major_text, s.size());
            out.insert(out.end(), s.begin(), s.end());
            break;
        }
        case Item::Kind::array: {
            if (depth + 1 > max_depth) throw Error(Errc::cbor_encoding, "array nesting deeper than 8");
            const auto& items = item.as_array();
            put_head(out, major_array, items.size());
            for (const auto& child : items) encode_rec(out, child, depth + 1);
            break;
        }
        case Item::Kind::null:
            out.push_back(null_byte);
            break;
    }
}

bool valid_utf8(ByteView s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const std::uint8_t c = s[i];
        std::size_t extra;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            extra = 1;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            extra = 2;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= s.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((s[i + k] & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (s[i + k] & 0x3f);
        }
        static constexpr std::uint32_t min_for_len[] = {0, 0x80, 0x800, 0x10000};
        if (cp < min_for_len[extra] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
        i += extra + 1;
    }
    return true;
}

class Reader {
public:
    explicit Reader(ByteView data) : data_(data) {}

    std::size_t position() const { return pos_; }

    Item read(std::size_t depth) {
        const std::uint8_t initial = take();
        const std::uint8_t major = initial >> 5;
        const std::uint8_t info = initial & 0x1f;

        if (major == major_simple) {
            if (initial == null_byte) return Item::null();
            throw Error(Errc::cbor_unsupported, "simple/float value 0x" + to_hex(ByteView(&initial, 1)));
        }
        const std::uint64_t arg = read_argument(info);
        switch (major) {
            case major_uint:
                return Item::uint(arg);
            case major_bytes: {
                auto view = take_n(arg);
                return Item::bytes(Bytes(view.begin(), view.end()));
            }
            case major_text: {
                auto view = take_n(arg);
                if (!valid_utf8(view)) throw Error(Errc::cbor_unsupported, "text string is not valid UTF-8");
                return Item::text(std::string(view.begin(), view.end()));
            }
            case major_array: {
                if (depth + 1 > max_depth) throw Error(Errc::cbor_unsupported, "array nesting deeper than 8");
                // Each element needs at least one byte, which bounds hostile lengths.
                if (arg > data_.size() - pos_) throw Error(Errc::cbor_truncated, "array longer than input");
                Item::Array items;
                items.reserve(static_cast<std::size_t>(arg));
                for (std::uint64_t i = 0; i < arg; ++i) items.push_back(read(depth + 1));
                return Item::array(std::move(items));
            }
            default:
                throw Error(Errc::cbor_unsupported, "major type " + std::to_string(major));
        }
    }

private:
    std::uint8_t take() {
        if (pos_ >= data_.size()) throw Error(Errc::cbor_truncated, "unexpected end of input");
        return data_[pos_++];
    }

    ByteView take_n(std::uint64_t n) {
        if (n > data_.size() - pos_) throw Error(Errc::cbor_truncated, "string longer than input");
        auto view = data_.subspan(pos_, static_cast<std::size_t>(n));
        pos_ += static_cast<std::size_t>(n);
        return view;
    }

    std::uint64_t read_argument(std::uint8_t info) {
        if (info < 24) return info;
        std::size_t width;
        std::uint64_t minimum;
        switch (info) {
            case 24: width = 1; minimum = 24; break;
            case 25: width = 2; minimum = 0x100; break;
            case 26: width = 4; minimum = 0x10000; break;
            case 27: width = 8; minimum = 0x100000000ULL; break;
            default: throw Error(Errc::cbor_unsupported, "indefinite or reserved length");
        }
        const std::uint64_t v = get_be(take_n(width));
        if (v < minimum) throw Error(Errc::cbor_non_canonical, "argument " + std::to_string(v) + " not minimally encoded");
        return v;
    }

    ByteView data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t Item::as_uint() const {
    if (auto* v = std::get_if<std::uint64_t>(&value_)) return *v;
    throw Error(Errc::cbor_unsupported, "item is not an unsigned integer");
}

const Bytes& Item::as_bytes() const {
    if (auto* v = std::get_if<Bytes>(&value_)) return *v;
    throw Error(Errc::cbor_unsupported, "item is not a byte string");
}

const std::string& Item::as_text() const {
    if (auto* v = std::get_if<TextValue>(&value_)) return v->value;
    throw Error(Errc::cbor_unsupported, "item is not a text string");
}

const Item::Array& Item::as_array() const {
    if (auto* v = std::get_if<Array>(&value_)) return *v;
    throw Error(Errc::cbor_unsupported, "item is not an array");
}

void encode_into(Bytes& out, const Item& item) { encode_rec(out, item, 0); }

Bytes encode(const Item& item) {
    Bytes out;
    encode_into(out, item);
    return out;
}

Decoded decode(ByteView data) {
    if (data.empty()) throw Error(Errc::cbor_truncated, "empty input");
    Reader reader(data);
    Item item = reader.read(0);
    return {std::move(item), reader.position()};
}

Item decode_exact(ByteView data) {
    auto [item, consumed] = decode(data);
    if (consumed != data.size()) throw Error(Errc::cbor_unsupported, "trailing bytes after item");
    return item;
}

}  // namespace blend::cbor
