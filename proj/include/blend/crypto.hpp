#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>

#include "blend/bytes.hpp"

// AES-CCM-16-64-128 (L=2, 8-byte tag, 13-byte nonce), HKDF-SHA256 and the
// public-key primitives used by the handshake. Backed by OpenSSL.
namespace blend::crypto {

inline constexpr std::size_t key_size = 16;
inline constexpr std::size_t nonce_size = 13;
inline constexpr std::size_t tag_size = 8;
inline constexpr std::size_t hkdf_max_output = 64;

using Nonce = std::array<std::uint8_t, nonce_size>;

class AeadKey {
public:
    AeadKey() = default;
    explicit AeadKey(ByteView bytes);

    ByteView bytes() const noexcept { return bytes_; }
    bool operator==(const AeadKey&) const = default;

private:
    std::array<std::uint8_t, key_size> bytes_{};
};

struct CryptoCounters {
    std::uint64_t seal_count = 0;
    std::uint64_t open_count = 0;
    std::uint64_t kdf_count = 0;
    // Key generation, DH, sign and verify.
    std::uint64_t pk_count = 0;
    // Plaintext bytes passed through seal and open.
    std::uint64_t aead_bytes = 0;

    bool operator==(const CryptoCounters&) const = default;
    CryptoCounters operator-(const CryptoCounters& earlier) const {
        return {seal_count - earlier.seal_count, open_count - earlier.open_count, kdf_count - earlier.kdf_count,
                pk_count - earlier.pk_count, aead_bytes - earlier.aead_bytes};
    }
    CryptoCounters& operator+=(const CryptoCounters& more) {
        seal_count += more.seal_count;
        open_count += more.open_count;
        kdf_count += more.kdf_count;
        pk_count += more.pk_count;
        aead_bytes += more.aead_bytes;
        return *this;
    }
};

class X25519KeyPair;
class SigningKey;

/// Owns the operation counters. Every crypto call the protocol makes goes
/// through an engine so send-path costs can be measured exactly. The
/// primitives themselves are stateless; counters are atomic.
class CryptoEngine {
public:
    CryptoEngine() = default;
    CryptoEngine(const CryptoEngine&) = delete;
    CryptoEngine& operator=(const CryptoEngine&) = delete;

    /// Returns ciphertext || tag; output length is plaintext length + 8.
    Bytes seal(const AeadKey& key, ByteView nonce, ByteView aad, ByteView plaintext);

    /// Throws Errc::authentication on tag mismatch; nothing is released then.
    Bytes open(const AeadKey& key, ByteView nonce, ByteView aad, ByteView ciphertext);

    /// out_len must be in [1, 64].
    Bytes hkdf(ByteView salt, ByteView ikm, ByteView info, std::size_t out_len);

    X25519KeyPair generate_x25519();
    SigningKey generate_signing_key();
    /// From 32 raw private bytes, for provisioned identities and test vectors.
    X25519KeyPair import_x25519(ByteView private_key);
    SigningKey import_signing_key(ByteView seed);
    Bytes x25519(const X25519KeyPair& own, ByteView peer_public);
    Bytes sign(const SigningKey& key, ByteView message);
    bool verify(ByteView public_key, ByteView message, ByteView signature);

    CryptoCounters counters() const noexcept;
    void reset_counters() noexcept;

private:
    std::atomic<std::uint64_t> seal_{0};
    std::atomic<std::uint64_t> open_{0};
    std::atomic<std::uint64_t> kdf_{0};
    std::atomic<std::uint64_t> pk_{0};
    std::atomic<std::uint64_t> aead_bytes_{0};
};

// Uncounted helpers; hashing is not an AEAD/KDF operation for accounting.
std::array<std::uint8_t, 32> sha256(ByteView data);
std::array<std::uint8_t, 32> hmac_sha256(ByteView key, ByteView data);

/// Constant-time comparison.
bool equal_ct(ByteView a, ByteView b) noexcept;

Bytes random_bytes(std::size_t n);

namespace detail {
struct PkeyDeleter {
    void operator()(void* pkey) const noexcept;
};
using PkeyPtr = std::unique_ptr<void, PkeyDeleter>;
}  // namespace detail

class X25519KeyPair {
public:
    const Bytes& public_key() const noexcept { return public_; }

private:
    friend class CryptoEngine;
    detail::PkeyPtr pkey_;
    Bytes public_;
};

/// Ed25519 key pair.
class SigningKey {
public:
    const Bytes& public_key() const noexcept { return public_; }

private:
    friend class CryptoEngine;
    detail::PkeyPtr pkey_;
    Bytes public_;
};

}  // namespace blend::crypto
