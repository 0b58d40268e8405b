#include <gtest/gtest.h>

#include <random>

#include "blend/coap.hpp"
#include "blend/error.hpp"

using namespace blend;
using coap::Message;

namespace {

Message table_one_message(Bytes payload) {
    Message m;
    m.type = coap::MessageType::confirmable;
    m.code = coap::code::post;
    m.message_id = 0x4a84;
    m.token = {0x84};
    m.payload = std::move(payload);
    return m;
}

Errc parse_error(const Bytes& wire) {
    try {
        coap::parse(wire);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "parsed " << to_hex(wire);
    return Errc::invalid_argument;
}

}  // namespace

TEST(CoapSerialize, TableOneLayout) {
    const Bytes p = from_hex("010203040506");
    const Bytes wire = coap::serialize(table_one_message(p));
    // TKL is 1 for the one-byte token, hence 0x41 rather than 0x40.
    EXPECT_EQ(to_hex(wire), "41024a8484b0ff010203040506");
    EXPECT_EQ(wire.size(), 7 + p.size());
}

TEST(CoapSerialize, EmptyPayloadHasNoMarker) {
    const Bytes wire = coap::serialize(table_one_message({}));
    EXPECT_EQ(to_hex(wire), "41024a8484b0");
}

TEST(CoapSerialize, UriPathOption) {
    Message m = table_one_message(Bytes(6, 0));
    m.uri_path = "r";
    const Bytes wire = coap::serialize(m);
    EXPECT_EQ(to_hex(Bytes(wire.begin() + 5, wire.begin() + 7)), "b172");
    m.uri_path = "collect";
    EXPECT_EQ(to_hex(coap::serialize(m)).substr(10, 16), "b7636f6c6c656374");
    m.uri_path = "a/b";
    EXPECT_EQ(to_hex(coap::serialize(m)).substr(10, 8), "b1610162");
}

TEST(CoapSerialize, ExtendedOptionLength) {
    Message m = table_one_message({});
    m.uri_path = std::string(20, 'x');
    // delta 11, length 13 + 7 => 0xbd 0x07.
    EXPECT_EQ(to_hex(coap::serialize(m)).substr(10, 4), "bd07");
    EXPECT_EQ(coap::parse(coap::serialize(m)), m);
    m.uri_path = std::string(300, 'x');
    EXPECT_THROW(coap::serialize(m), Error);
}

TEST(CoapSerialize, OversizeToken) {
    Message m = table_one_message({});
    m.token = Bytes(9, 1);
    EXPECT_THROW(coap::serialize(m), Error);
}

TEST(CoapSerialize, ResponsesCarryNoPath) {
    Message m = table_one_message({0x00});
    m.code = coap::code::content;
    m.type = coap::MessageType::acknowledgement;
    EXPECT_EQ(to_hex(coap::serialize(m)), "61454a8484ff00");
    m.uri_path = "x";
    EXPECT_THROW(coap::serialize(m), Error);
}

TEST(CoapParse, Errors) {
    EXPECT_EQ(parse_error(from_hex("410200")), Errc::coap_parse);
    EXPECT_EQ(parse_error(from_hex("41024a8484b0ff")), Errc::coap_parse);  // marker, no payload
    EXPECT_EQ(parse_error(from_hex("81024a84")), Errc::coap_parse);        // version 2
    EXPECT_EQ(parse_error(from_hex("49024a84")), Errc::coap_parse);        // TKL 9
    EXPECT_EQ(parse_error(from_hex("42024a8484")), Errc::coap_parse);      // truncated token
    EXPECT_EQ(parse_error(from_hex("41024a8484b3aa")), Errc::coap_parse);  // option past end
    EXPECT_EQ(parse_error(from_hex("41024a8484f0")), Errc::coap_parse);    // delta nibble 15
    EXPECT_EQ(parse_error(from_hex("41024a848491aa")), Errc::coap_parse);  // option 9 not allowed
}

TEST(CoapParse, RoundTripRandomMessages) {
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 2000; ++i) {
        Message m;
        m.type = static_cast<coap::MessageType>(rng() % 4);
        const bool request = rng() % 3 != 0;
        m.code = request ? static_cast<std::uint8_t>(1 + rng() % 4) : coap::make_code(2 + rng() % 3, rng() % 6);
        m.message_id = static_cast<std::uint16_t>(rng());
        m.token.resize(rng() % 9);
        for (auto& b : m.token) b = static_cast<std::uint8_t>(rng());
        if (request) {
            const int segments = static_cast<int>(rng() % 3);
            for (int s = 0; s < segments; ++s) {
                if (s) m.uri_path.push_back('/');
                m.uri_path.append(rng() % 16, static_cast<char>('a' + rng() % 26));
            }
        }
        m.payload.resize(rng() % 57);
        for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng());
        const Bytes wire = coap::serialize(m);
        ASSERT_EQ(coap::parse(wire), m) << to_hex(wire);
        ASSERT_EQ(coap::serialize(coap::parse(wire)), wire);
    }
}

TEST(InnerPlaintext, TableOneLaw) {
    EXPECT_EQ(to_hex(coap::inner_plaintext(table_one_message(from_hex("010203040506")))), "02b0ff010203040506");
    for (std::size_t n = 1; n <= 56; ++n) EXPECT_EQ(coap::inner_plaintext(table_one_message(Bytes(n, 7))).size(), 3 + n);
    Message m = table_one_message(Bytes(6, 1));
    m.uri_path = "r";
    EXPECT_EQ(coap::inner_plaintext(m).size(), 10u);
}

TEST(InnerPlaintext, RoundTripThroughFromInner) {
    Message m = table_one_message(Bytes{9, 8, 7});
    m.uri_path = "collect";
    EXPECT_EQ(coap::from_inner(coap::inner_plaintext(m), m.type, m.message_id, m.token), m);
}
