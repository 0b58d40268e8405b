#include "blend/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>
#include <openssl/rand.h>

#include "blend/error.hpp"

namespace blend::crypto {

namespace {

struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* ctx) const noexcept { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* ctx) const noexcept { EVP_PKEY_CTX_free(ctx); }
};
using PkeyCtx = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

[[noreturn]] void backend_failure(const char* what) { throw Error(Errc::crypto_backend, what); }

void check(int rc, const char* what) {
    if (rc <= 0) backend_failure(what);
}

// The empty-buffer case still needs a valid pointer for OpenSSL.
const unsigned char* ptr(ByteView v) {
    static const unsigned char dummy = 0;
    return v.empty() ? &dummy : v.data();
}

CipherCtx ccm_context(ByteView nonce, bool encrypt) {
    if (nonce.size() != nonce_size) throw Error(Errc::invalid_argument, "AEAD nonce must be 13 bytes");
    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) backend_failure("EVP_CIPHER_CTX_new");
    check(EVP_CipherInit_ex(ctx.get(), EVP_aes_128_ccm(), nullptr, nullptr, nullptr, encrypt ? 1 : 0), "ccm init");
    check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_IVLEN, static_cast<int>(nonce_size), nullptr), "ccm ivlen");
    return ctx;
}

EVP_PKEY* raw(const detail::PkeyPtr& p) { return static_cast<EVP_PKEY*>(p.get()); }

Bytes raw_public(EVP_PKEY* pkey) {
    std::size_t len = 0;
    check(EVP_PKEY_get_raw_public_key(pkey, nullptr, &len), "raw public length");
    Bytes out(len);
    check(EVP_PKEY_get_raw_public_key(pkey, out.data(), &len), "raw public key");
    return out;
}

detail::PkeyPtr keygen(int type) {
    PkeyCtx ctx(EVP_PKEY_CTX_new_id(type, nullptr));
    if (!ctx) backend_failure("EVP_PKEY_CTX_new_id");
    check(EVP_PKEY_keygen_init(ctx.get()), "keygen init");
    EVP_PKEY* pkey = nullptr;
    check(EVP_PKEY_keygen(ctx.get(), &pkey), "keygen");
    return detail::PkeyPtr(pkey);
}

}  // namespace

void detail::PkeyDeleter::operator()(void* pkey) const noexcept { EVP_PKEY_free(static_cast<EVP_PKEY*>(pkey)); }

AeadKey::AeadKey(ByteView bytes) {
    if (bytes.size() != key_size) throw Error(Errc::invalid_argument, "AEAD key must be 16 bytes");
    std::copy(bytes.begin(), bytes.end(), bytes_.begin());
}

Bytes CryptoEngine::seal(const AeadKey& key, ByteView nonce, ByteView aad, ByteView plaintext) {
    auto ctx = ccm_context(nonce, true);
    check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG, static_cast<int>(tag_size), nullptr), "ccm tag len");
    check(EVP_CipherInit_ex(ctx.get(), nullptr, nullptr, key.bytes().data(), nonce.data(), 1), "ccm key");

    int len = 0;
    check(EVP_EncryptUpdate(ctx.get(), nullptr, &len, nullptr, static_cast<int>(plaintext.size())), "ccm length");
    if (!aad.empty()) check(EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())), "ccm aad");

    Bytes out(plaintext.size() + tag_size);
    unsigned char scratch = 0;
    check(EVP_EncryptUpdate(ctx.get(), plaintext.empty() ? &scratch : out.data(), &len, ptr(plaintext),
                            static_cast<int>(plaintext.size())),
          "ccm encrypt");
    check(EVP_EncryptFinal_ex(ctx.get(), &scratch, &len), "ccm final");
    check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_GET_TAG, static_cast<int>(tag_size),
                              out.data() + plaintext.size()),
          "ccm get tag");
    seal_.fetch_add(1, std::memory_order_relaxed);
    aead_bytes_.fetch_add(plaintext.size(), std::memory_order_relaxed);
    return out;
}

Bytes CryptoEngine::open(const AeadKey& key, ByteView nonce, ByteView aad, ByteView ciphertext) {
    if (ciphertext.size() < tag_size) throw Error(Errc::authentication, "ciphertext shorter than tag");
    const std::size_t pt_len = ciphertext.size() - tag_size;
    auto ctx = ccm_context(nonce, false);
    // CCM wants the expected tag before decryption starts.
    check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG, static_cast<int>(tag_size),
                              const_cast<unsigned char*>(ciphertext.data() + pt_len)),
          "ccm set tag");
    check(EVP_CipherInit_ex(ctx.get(), nullptr, nullptr, key.bytes().data(), nonce.data(), 0), "ccm key");

    int len = 0;
    check(EVP_DecryptUpdate(ctx.get(), nullptr, &len, nullptr, static_cast<int>(pt_len)), "ccm length");
    if (!aad.empty()) check(EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())), "ccm aad");

    Bytes out(pt_len);
    unsigned char scratch = 0;
    const int ok = EVP_DecryptUpdate(ctx.get(), pt_len == 0 ? &scratch : out.data(), &len, ptr(ciphertext),
                                     static_cast<int>(pt_len));
    open_.fetch_add(1, std::memory_order_relaxed);
    aead_bytes_.fetch_add(pt_len, std::memory_order_relaxed);
    if (ok <= 0) {
        OPENSSL_cleanse(out.data(), out.size());
        throw Error(Errc::authentication, "AEAD tag mismatch");
    }
    return out;
}

Bytes CryptoEngine::hkdf(ByteView salt, ByteView ikm, ByteView info, std::size_t out_len) {
    if (out_len < 1 || out_len > hkdf_max_output)
        throw Error(Errc::invalid_argument, "HKDF output length must be in [1, 64]");
    PkeyCtx ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr));
    if (!ctx) backend_failure("EVP_PKEY_CTX_new_id(HKDF)");
    check(EVP_PKEY_derive_init(ctx.get()), "hkdf init");
    check(EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()), "hkdf md");
    // An absent salt is HashLen zero bytes, which HMAC treats the same as an empty key.
    if (!salt.empty()) check(EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), salt.data(), static_cast<int>(salt.size())), "hkdf salt");
    check(EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), ptr(ikm), static_cast<int>(ikm.size())), "hkdf key");
    if (!info.empty()) check(EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), info.data(), static_cast<int>(info.size())), "hkdf info");
    Bytes out(out_len);
    std::size_t len = out_len;
    check(EVP_PKEY_derive(ctx.get(), out.data(), &len), "hkdf derive");
    kdf_.fetch_add(1, std::memory_order_relaxed);
    return out;
}

X25519KeyPair CryptoEngine::generate_x25519() {
    X25519KeyPair kp;
    kp.pkey_ = keygen(EVP_PKEY_X25519);
    kp.public_ = raw_public(raw(kp.pkey_));
    pk_.fetch_add(1, std::memory_order_relaxed);
    return kp;
}

SigningKey CryptoEngine::generate_signing_key() {
    SigningKey key;
    key.pkey_ = keygen(EVP_PKEY_ED25519);
    key.public_ = raw_public(raw(key.pkey_));
    pk_.fetch_add(1, std::memory_order_relaxed);
    return key;
}

namespace {

detail::PkeyPtr import_private(int type, ByteView bytes, const char* what) {
    if (bytes.size() != 32) throw Error(Errc::invalid_argument, std::string(what) + " private key must be 32 bytes");
    detail::PkeyPtr pkey(EVP_PKEY_new_raw_private_key(type, nullptr, bytes.data(), bytes.size()));
    if (!pkey) backend_failure("EVP_PKEY_new_raw_private_key");
    return pkey;
}

}  // namespace

X25519KeyPair CryptoEngine::import_x25519(ByteView private_key) {
    X25519KeyPair kp;
    kp.pkey_ = import_private(EVP_PKEY_X25519, private_key, "X25519");
    kp.public_ = raw_public(raw(kp.pkey_));
    return kp;
}

SigningKey CryptoEngine::import_signing_key(ByteView seed) {
    SigningKey key;
    key.pkey_ = import_private(EVP_PKEY_ED25519, seed, "Ed25519");
    key.public_ = raw_public(raw(key.pkey_));
    return key;
}

Bytes CryptoEngine::x25519(const X25519KeyPair& own, ByteView peer_public) {
    pk_.fetch_add(1, std::memory_order_relaxed);
    if (peer_public.size() != 32) throw Error(Errc::handshake_abort, "X25519 public key must be 32 bytes");
    detail::PkeyPtr peer(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, peer_public.data(), peer_public.size()));
    if (!peer) throw Error(Errc::handshake_abort, "malformed X25519 public key");
    PkeyCtx ctx(EVP_PKEY_CTX_new(raw(own.pkey_), nullptr));
    if (!ctx) backend_failure("EVP_PKEY_CTX_new");
    check(EVP_PKEY_derive_init(ctx.get()), "x25519 init");
    check(EVP_PKEY_derive_set_peer(ctx.get(), raw(peer)), "x25519 peer");
    std::size_t len = 0;
    check(EVP_PKEY_derive(ctx.get(), nullptr, &len), "x25519 length");
    Bytes secret(len);
    // Fails on low-order peer points (all-zero shared secret).
    if (EVP_PKEY_derive(ctx.get(), secret.data(), &len) <= 0) throw Error(Errc::handshake_abort, "X25519 derivation failed");
    return secret;
}

Bytes CryptoEngine::sign(const SigningKey& key, ByteView message) {
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx) backend_failure("EVP_MD_CTX_new");
    check(EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, raw(key.pkey_)), "sign init");
    std::size_t len = 0;
    check(EVP_DigestSign(ctx.get(), nullptr, &len, ptr(message), message.size()), "sign length");
    Bytes sig(len);
    check(EVP_DigestSign(ctx.get(), sig.data(), &len, ptr(message), message.size()), "sign");
    pk_.fetch_add(1, std::memory_order_relaxed);
    return sig;
}

bool CryptoEngine::verify(ByteView public_key, ByteView message, ByteView signature) {
    pk_.fetch_add(1, std::memory_order_relaxed);
    if (public_key.size() != 32 || signature.size() != 64) return false;
    detail::PkeyPtr pub(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.data(), public_key.size()));
    if (!pub) return false;
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx) backend_failure("EVP_MD_CTX_new");
    check(EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, raw(pub)), "verify init");
    return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), ptr(message), message.size()) == 1;
}

CryptoCounters CryptoEngine::counters() const noexcept {
    return {seal_.load(), open_.load(), kdf_.load(), pk_.load(), aead_bytes_.load()};
}

void CryptoEngine::reset_counters() noexcept {
    seal_ = 0;
    open_ = 0;
    kdf_ = 0;
    pk_ = 0;
    aead_bytes_ = 0;
}

std::array<std::uint8_t, 32> sha256(ByteView data) {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    check(EVP_Digest(ptr(data), data.size(), out.data(), &len, EVP_sha256(), nullptr), "sha256");
    return out;
}

std::array<std::uint8_t, 32> hmac_sha256(ByteView key, ByteView data) {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), ptr(key), static_cast<int>(key.size()), ptr(data), data.size(), out.data(), &len))
        backend_failure("hmac");
    return out;
}

bool equal_ct(ByteView a, ByteView b) noexcept {
    return a.size() == b.size() && CRYPTO_memcmp(ptr(a), ptr(b), a.size()) == 0;
}

Bytes random_bytes(std::size_t n) {
    Bytes out(n);
    if (n > 0) check(RAND_bytes(out.data(), static_cast<int>(n)), "RAND_bytes");
    return out;
}

}  // namespace blend::crypto
