#include <gtest/gtest.h>

#include <random>

#include "blend/crypto.hpp"
#include "blend/error.hpp"

using blend::Bytes;
using blend::Errc;
using blend::Error;
using blend::from_hex;
using blend::to_hex;
using blend::crypto::AeadKey;
using blend::crypto::CryptoEngine;

// Golden values computed with tests/oracles/oscore_vectors.py (Python
// `cryptography` AESCCM/HKDF) and frozen here.
namespace {
const AeadKey golden_key{from_hex("000102030405060708090a0b0c0d0e0f")};
const Bytes golden_nonce = from_hex("101112131415161718191a1b1c");
}  // namespace

TEST(Aead, CiphertextIsPlaintextPlusTag) {
    CryptoEngine engine;
    EXPECT_EQ(engine.seal(golden_key, golden_nonce, {}, Bytes(9, 0x55)).size(), 17u);
    EXPECT_EQ(engine.seal(golden_key, golden_nonce, {}, Bytes{}).size(), 8u);
}

TEST(Aead, GoldenVectors) {
    CryptoEngine engine;
    const Bytes pt = from_hex("02b0ff73656e736f72");  // 02 b0 ff "sensor"
    EXPECT_EQ(to_hex(engine.seal(golden_key, golden_nonce, from_hex("a1a2a3"), pt)),
              "7e518f32dd329dbbc9cc75ccd6ae96c682");
    EXPECT_EQ(to_hex(engine.seal(golden_key, golden_nonce, {}, {})), "5e5234e976e983a6");
    EXPECT_EQ(engine.open(golden_key, golden_nonce, from_hex("a1a2a3"), from_hex("7e518f32dd329dbbc9cc75ccd6ae96c682")),
              pt);
    EXPECT_TRUE(engine.open(golden_key, golden_nonce, {}, from_hex("5e5234e976e983a6")).empty());
}

TEST(Aead, WrongNonceLength) {
    CryptoEngine engine;
    try {
        engine.seal(golden_key, Bytes(12), {}, Bytes{1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_argument);
    }
    EXPECT_THROW(AeadKey(Bytes(15)), Error);
}

TEST(Aead, RoundTripAndBitFlips) {
    CryptoEngine engine;
    std::mt19937_64 rng(42);
    for (int round = 0; round < 50; ++round) {
        Bytes pt(rng() % 64), aad(rng() % 40);
        for (auto& b : pt) b = static_cast<std::uint8_t>(rng());
        for (auto& b : aad) b = static_cast<std::uint8_t>(rng());
        const Bytes ct = engine.seal(golden_key, golden_nonce, aad, pt);
        ASSERT_EQ(ct.size(), pt.size() + 8);
        ASSERT_EQ(engine.open(golden_key, golden_nonce, aad, ct), pt);

        for (std::size_t bit = 0; bit < ct.size() * 8; bit += 5) {
            Bytes bad = ct;
            bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            try {
                engine.open(golden_key, golden_nonce, aad, bad);
                FAIL() << "flip accepted";
            } catch (const Error& e) {
                ASSERT_EQ(e.code(), Errc::authentication);
            }
        }
        for (std::size_t bit = 0; bit < aad.size() * 8; bit += 7) {
            Bytes bad = aad;
            bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            EXPECT_THROW(engine.open(golden_key, golden_nonce, bad, ct), Error);
        }
    }
}

TEST(Aead, ShortCiphertextIsAuthError) {
    CryptoEngine engine;
    try {
        engine.open(golden_key, golden_nonce, {}, Bytes(7));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::authentication);
    }
}

TEST(Hkdf, Rfc5869Case1) {
    CryptoEngine engine;
    const Bytes okm = engine.hkdf(from_hex("000102030405060708090a0b0c"), Bytes(22, 0x0b),
                                  from_hex("f0f1f2f3f4f5f6f7f8f9"), 42);
    EXPECT_EQ(to_hex(okm), "3cb25f25faacd57a90434f64d0362f2a2d2d0a90cf1a5a4c5db02d56ecc4c5bf34007208d5b887185865");
}

TEST(Hkdf, DeterministicAndInfoSensitive) {
    CryptoEngine engine;
    const Bytes ikm = from_hex("0102030405060708090a0b0c0d0e0f10");
    EXPECT_EQ(engine.hkdf({}, ikm, blend::to_bytes("a"), 16), engine.hkdf({}, ikm, blend::to_bytes("a"), 16));
    EXPECT_NE(engine.hkdf({}, ikm, blend::to_bytes("a"), 16), engine.hkdf({}, ikm, blend::to_bytes("b"), 16));
}

TEST(Hkdf, OutputLengthRange) {
    CryptoEngine engine;
    EXPECT_EQ(engine.hkdf({}, Bytes(16), {}, 1).size(), 1u);
    EXPECT_EQ(engine.hkdf({}, Bytes(16), {}, 64).size(), 64u);
    EXPECT_THROW(engine.hkdf({}, Bytes(16), {}, 0), Error);
    EXPECT_THROW(engine.hkdf({}, Bytes(16), {}, 65), Error);
}

TEST(Counters, CountEveryOperation) {
    CryptoEngine engine;
    const auto ct = engine.seal(golden_key, golden_nonce, {}, Bytes{1, 2});
    engine.open(golden_key, golden_nonce, {}, ct);
    EXPECT_THROW(engine.open(golden_key, golden_nonce, Bytes{1}, ct), Error);
    engine.hkdf({}, Bytes(16), {}, 16);
    const auto c = engine.counters();
    EXPECT_EQ(c.seal_count, 1u);
    EXPECT_EQ(c.open_count, 2u);
    EXPECT_EQ(c.kdf_count, 1u);
    EXPECT_EQ(c.pk_count, 0u);
    engine.reset_counters();
    EXPECT_EQ(engine.counters(), blend::crypto::CryptoCounters{});
}

TEST(PublicKey, DhAgreementAndSignatures) {
    CryptoEngine engine;
    auto a = engine.generate_x25519();
    auto b = engine.generate_x25519();
    EXPECT_EQ(engine.x25519(a, b.public_key()), engine.x25519(b, a.public_key()));
    auto sk = engine.generate_signing_key();
    const Bytes msg = blend::to_bytes("transcript");
    const Bytes sig = engine.sign(sk, msg);
    EXPECT_TRUE(engine.verify(sk.public_key(), msg, sig));
    Bytes bad = sig;
    bad[3] ^= 1;
    EXPECT_FALSE(engine.verify(sk.public_key(), msg, bad));
    EXPECT_GE(engine.counters().pk_count, 7u);
}

TEST(PublicKey, LowOrderPointRejected) {
    CryptoEngine engine;
    auto a = engine.generate_x25519();
    EXPECT_THROW(engine.x25519(a, Bytes(32, 0)), Error);
}

// Frozen by tests/oracles/pk_vectors.py.
TEST(PublicKey, X25519KnownAnswer) {
    CryptoEngine engine;
    auto alice = engine.import_x25519(from_hex("77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a"));
    auto bob = engine.import_x25519(from_hex("5dab087e624a8a4b79e17f8b83800ee66f3bb1292618b6fd1c2f8b27ff88e0eb"));
    EXPECT_EQ(blend::to_hex(alice.public_key()), "8520f0098930a754748b7ddcb43ef75a0dbf3a0d26381af4eba4a98eaa9b4e6a");
    EXPECT_EQ(blend::to_hex(bob.public_key()), "de9edb7d7b7dc1b4d35b61c2ece435373f8343c85b78674dadfc7e146f882b4f");
    EXPECT_EQ(blend::to_hex(engine.x25519(alice, bob.public_key())),
              "4a5d9d5ba4ce2de1728e3bf480350f25e07e21c947d19e3376f09b3c1e161742");
    EXPECT_THROW(engine.import_x25519(Bytes(31)), blend::Error);
}

TEST(PublicKey, Ed25519KnownAnswer) {
    CryptoEngine engine;
    auto sk = engine.import_signing_key(from_hex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"));
    EXPECT_EQ(blend::to_hex(sk.public_key()), "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
    const Bytes sig = engine.sign(sk, {});
    EXPECT_EQ(blend::to_hex(sig),
              "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b");
    EXPECT_TRUE(engine.verify(sk.public_key(), {}, sig));
}
