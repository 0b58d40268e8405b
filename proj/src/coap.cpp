#include "blend/coap.hpp"

#include <algorithm>

#include "blend/error.hpp"

namespace blend::coap {

namespace {

constexpr std::size_t max_uri_segment = 255;

void put_extended(Bytes& out, std::uint32_t v) {
    if (v >= 269) {
        put_be(out, v - 269, 2);
    } else if (v >= 13) {
        out.push_back(static_cast<std::uint8_t>(v - 13));
    }
}

std::uint8_t nibble_for(std::uint32_t v) {
    if (v >= 269) return 14;
    if (v >= 13) return 13;
    return static_cast<std::uint8_t>(v);
}

std::uint32_t read_extended(ByteView data, std::size_t& pos, std::uint8_t nib) {
    switch (nib) {
        case 13:
            if (pos + 1 > data.size()) throw Error(Errc::coap_parse, "truncated option extension");
            return 13u + data[pos++];
        case 14: {
            if (pos + 2 > data.size()) throw Error(Errc::coap_parse, "truncated option extension");
            const auto v = static_cast<std::uint32_t>(get_be(data.subspan(pos, 2)));
            pos += 2;
            return 269u + v;
        }
        case 15:
            throw Error(Errc::coap_parse, "reserved option nibble 15");
        default:
            return nib;
    }
}

void validate_header(const Header& h) {
    if (h.token.size() > max_token_length) throw Error(Errc::coap_invalid, "token longer than 8 bytes");
}

}  // namespace

void encode_options(Bytes& out, const std::vector<Option>& options) {
    std::uint32_t previous = 0;
    for (const auto& opt : options) {
        if (opt.number < previous) throw Error(Errc::coap_invalid, "options not sorted");
        const std::uint32_t delta = opt.number - previous;
        const auto length = static_cast<std::uint32_t>(opt.value.size());
        if (length > 0xffff + 269) throw Error(Errc::coap_invalid, "option value too long");
        out.push_back(static_cast<std::uint8_t>((nibble_for(delta) << 4) | nibble_for(length)));
        put_extended(out, delta);
        put_extended(out, length);
        append(out, opt.value);
        previous = opt.number;
    }
}

std::vector<Option> decode_options(ByteView data, std::size_t& pos, Bytes& payload) {
    std::vector<Option> options;
    std::uint32_t number = 0;
    while (pos < data.size()) {
        const std::uint8_t byte = data[pos++];
        if (byte == payload_marker) {
            if (pos == data.size()) throw Error(Errc::coap_parse, "payload marker followed by empty payload");
            payload.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end());
            pos = data.size();
            return options;
        }
        const std::uint32_t delta = read_extended(data, pos, byte >> 4);
        const std::uint32_t length = read_extended(data, pos, byte & 0x0f);
        if (length > data.size() - pos) throw Error(Errc::coap_parse, "option value runs past end");
        number += delta;
        if (number > 0xffff) throw Error(Errc::coap_parse, "option number overflow");
        options.push_back({static_cast<std::uint16_t>(number),
                           Bytes(data.begin() + static_cast<std::ptrdiff_t>(pos),
                                 data.begin() + static_cast<std::ptrdiff_t>(pos + length))});
        pos += length;
    }
    payload.clear();
    return options;
}

Bytes serialize_raw(const RawMessage& msg) {
    validate_header(msg.header);
    Bytes out;
    out.reserve(4 + msg.header.token.size() + msg.payload.size() + 16);
    out.push_back(static_cast<std::uint8_t>((version << 6) | (static_cast<std::uint8_t>(msg.header.type) << 4) |
                                            msg.header.token.size()));
    out.push_back(msg.header.code);
    put_be(out, msg.header.message_id, 2);
    append(out, msg.header.token);
    encode_options(out, msg.options);
    if (!msg.payload.empty()) {
        out.push_back(payload_marker);
        append(out, msg.payload);
    }
    return out;
}

RawMessage parse_raw(ByteView data) {
    if (data.size() < 4) throw Error(Errc::coap_parse, "message shorter than 4 bytes");
    RawMessage msg;
    const std::uint8_t first = data[0];
    if ((first >> 6) != version) throw Error(Errc::coap_parse, "unsupported CoAP version");
    msg.header.type = static_cast<MessageType>((first >> 4) & 0x03);
    const std::size_t tkl = first & 0x0f;
    if (tkl > max_token_length) throw Error(Errc::coap_parse, "token length > 8");
    msg.header.code = data[1];
    msg.header.message_id = static_cast<std::uint16_t>(get_be(data.subspan(2, 2)));
    if (data.size() < 4 + tkl) throw Error(Errc::coap_parse, "truncated token");
    msg.header.token.assign(data.begin() + 4, data.begin() + 4 + static_cast<std::ptrdiff_t>(tkl));
    std::size_t pos = 4 + tkl;
    msg.options = decode_options(data, pos, msg.payload);
    return msg;
}

std::vector<Option> uri_path_options(const std::string& path) {
    std::vector<Option> options;
    std::size_t start = 0;
    while (true) {
        const std::size_t slash = path.find('/', start);
        const std::string segment = path.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
        if (segment.size() > max_uri_segment) throw Error(Errc::coap_invalid, "Uri-Path segment longer than 255 bytes");
        options.push_back({option::uri_path, to_bytes(segment)});
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
    return options;
}

std::string uri_path_from_options(const std::vector<Option>& options) {
    std::string path;
    bool first = true;
    for (const auto& opt : options) {
        if (opt.number != option::uri_path) continue;
        if (!first) path.push_back('/');
        path.append(opt.value.begin(), opt.value.end());
        first = false;
    }
    return path;
}

namespace {

std::vector<Option> message_options(const Message& msg) {
    if (is_request(msg.code)) return uri_path_options(msg.uri_path);
    if (!msg.uri_path.empty()) throw Error(Errc::coap_invalid, "only requests carry a Uri-Path");
    return {};
}

std::string checked_path(std::uint8_t c, const std::vector<Option>& options) {
    for (const auto& opt : options) {
        if (opt.number != option::uri_path)
            throw Error(Errc::coap_parse, "unsupported option " + std::to_string(opt.number));
        if (!is_request(c)) throw Error(Errc::coap_parse, "Uri-Path in a non-request");
    }
    return uri_path_from_options(options);
}

}  // namespace

Bytes serialize(const Message& msg) {
    RawMessage raw{{msg.type, msg.code, msg.message_id, msg.token}, message_options(msg), msg.payload};
    return serialize_raw(raw);
}

Message parse(ByteView data) {
    RawMessage raw = parse_raw(data);
    Message msg;
    msg.type = raw.header.type;
    msg.code = raw.header.code;
    msg.message_id = raw.header.message_id;
    msg.token = std::move(raw.header.token);
    msg.uri_path = checked_path(msg.code, raw.options);
    msg.payload = std::move(raw.payload);
    return msg;
}

Bytes inner_plaintext(const Message& msg) {
    Bytes out;
    out.push_back(msg.code);
    encode_options(out, message_options(msg));
    if (!msg.payload.empty()) {
        out.push_back(payload_marker);
        append(out, msg.payload);
    }
    return out;
}

Message from_inner(ByteView inner, MessageType type, std::uint16_t message_id, const Bytes& token) {
    if (inner.empty()) throw Error(Errc::coap_parse, "empty inner message");
    Message msg;
    msg.type = type;
    msg.code = inner[0];
    msg.message_id = message_id;
    msg.token = token;
    std::size_t pos = 1;
    auto options = decode_options(inner, pos, msg.payload);
    msg.uri_path = checked_path(msg.code, options);
    return msg;
}

}  // namespace blend::coap
