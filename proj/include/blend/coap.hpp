#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blend/bytes.hpp"

namespace blend::coap {

inline constexpr std::uint8_t version = 1;
inline constexpr std::size_t max_token_length = 8;
inline constexpr std::uint8_t payload_marker = 0xff;

enum class MessageType : std::uint8_t { confirmable = 0, non_confirmable = 1, acknowledgement = 2, reset = 3 };

constexpr std::uint8_t make_code(unsigned cls, unsigned detail) {
    return static_cast<std::uint8_t>((cls << 5) | detail);
}

namespace code {
inline constexpr std::uint8_t empty = make_code(0, 0);
inline constexpr std::uint8_t get = make_code(0, 1);
inline constexpr std::uint8_t post = make_code(0, 2);
inline constexpr std::uint8_t changed = make_code(2, 4);
inline constexpr std::uint8_t content = make_code(2, 5);
inline constexpr std::uint8_t unauthorized = make_code(4, 1);
}  // namespace code

constexpr bool is_request(std::uint8_t c) { return (c >> 5) == 0 && c != code::empty; }
constexpr bool is_response(std::uint8_t c) { return (c >> 5) >= 2; }

namespace option {
inline constexpr std::uint16_t oscore = 9;
inline constexpr std::uint16_t uri_path = 11;
}  // namespace option

struct Option {
    std::uint16_t number = 0;
    Bytes value;
    bool operator==(const Option&) const = default;
};

/// Fixed header fields, shared between plain CoAP and the OSCORE outer message.
struct Header {
    MessageType type = MessageType::confirmable;
    std::uint8_t code = code::post;
    std::uint16_t message_id = 0;
    Bytes token;
    bool operator==(const Header&) const = default;
};

/// Header + any options + payload, with no restriction on which options appear.
struct RawMessage {
    Header header;
    std::vector<Option> options;  // sorted by number
    Bytes payload;
    bool operator==(const RawMessage&) const = default;
};

/// A message restricted to the fields needed for precomputed sensor packets.
/// Requests always carry at least one Uri-Path option; the empty root path
/// is encoded as a single zero-length Uri-Path (0xB0). Segments are split on
/// '/'. Responses carry no options.
struct Message {
    MessageType type = MessageType::confirmable;
    std::uint8_t code = code::post;
    std::uint16_t message_id = 0;
    Bytes token;
    std::string uri_path;
    Bytes payload;

    bool operator==(const Message&) const = default;
};

Bytes serialize_raw(const RawMessage& msg);
RawMessage parse_raw(ByteView data);

/// Options are appended with delta encoding; `options` must be sorted.
void encode_options(Bytes& out, const std::vector<Option>& options);

/// Parses options starting at `pos` up to the payload marker (consumed) or
/// end of input. Returns the payload that follows.
std::vector<Option> decode_options(ByteView data, std::size_t& pos, Bytes& payload);

std::vector<Option> uri_path_options(const std::string& path);
std::string uri_path_from_options(const std::vector<Option>& options);

Bytes serialize(const Message& msg);
Message parse(ByteView data);

/// Code, Class-E options and payload: the bytes OSCORE encrypts.
Bytes inner_plaintext(const Message& msg);

/// Inverse of inner_plaintext; header fields come from the outer message.
Message from_inner(ByteView inner, MessageType type, std::uint16_t message_id, const Bytes& token);

}  // namespace blend::coap
