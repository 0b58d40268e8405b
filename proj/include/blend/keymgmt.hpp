#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "blend/bytes.hpp"
#include "blend/crypto.hpp"
#include "blend/flash.hpp"
#include "blend/oscore.hpp"

namespace blend::keymgmt {

enum class Role { initiator, responder };

/// Long-term identity for one side of the handshake. The peer's static key is
/// distributed out of band and trusted as is.
struct HandshakeIdentity {
    std::shared_ptr<const crypto::SigningKey> signing_key;
    Bytes peer_public_key;
};

/// Handshake output, written from the initiator's point of view: sender_id is
/// what the initiator sends under (the responder's connection id) and
/// recipient_id is the initiator's own connection id. Both sides hold the
/// same bytes; context_inputs() mirrors them for the responder.
struct MasterSecretBundle {
    Bytes master_secret;
    Bytes master_salt;
    Bytes sender_id;
    Bytes recipient_id;
    std::uint32_t generation = 0;

    Bytes encode() const;
    static MasterSecretBundle decode(ByteView data);
    bool operator==(const MasterSecretBundle&) const = default;
};

inline constexpr std::size_t master_secret_size = 16;
inline constexpr std::size_t master_salt_size = 8;
inline constexpr std::size_t id_context_size = 8;
inline constexpr std::size_t handshake_mac_size = 16;

/// ID Context for a generation: none for generation 0, otherwise
/// HKDF(salt = master_salt, ikm = master_secret, info = "gen" || u32be(gen), 8).
std::optional<Bytes> generation_id_context(crypto::CryptoEngine& engine, const MasterSecretBundle& bundle);

oscore::ContextInputs context_inputs(crypto::CryptoEngine& engine, const MasterSecretBundle& bundle, Role role);
oscore::SecurityContext derive_bundle_context(crypto::CryptoEngine& engine, const MasterSecretBundle& bundle,
                                              Role role);

struct RefreshResult {
    MasterSecretBundle bundle;
    oscore::SecurityContext context;
    /// Reusing the master secret means a later compromise exposes every
    /// generation derived from it.
    bool forward_secrecy_warning = true;
};

/// Next generation from the same master secret. Symmetric KDF only; the peer
/// derives the identical context from its copy of the bundle.
RefreshResult refresh_context(crypto::CryptoEngine& engine, const MasterSecretBundle& bundle, Role role);

// Three-message authenticated ephemeral DH. Each message is
// [index 1B][CBOR array]:
//   1: [eph_I, C_I]
//   2: [eph_R, C_R, sig_R(TH2), mac_R]
//   3: [sig_I(TH3), mac_I]
// TH2 = H(m1 || eph_R || C_R), TH3 = H(TH2 || m2), TH4 = H(TH3 || m3).
// Session keys and the bundle come from HKDF over the DH secret salted with
// the running transcript hash.

class HandshakeInitiator {
public:
    HandshakeInitiator(crypto::CryptoEngine& engine, HandshakeIdentity identity, Bytes connection_id);

    /// Same bytes on every call so the message can be retransmitted.
    const Bytes& message1() const noexcept { return m1_; }

    /// Verifies message 2 and returns message 3. A repeat of the accepted
    /// message 2 returns the same message 3. Throws Errc::handshake_abort.
    Bytes on_message2(ByteView m2);

    const std::optional<MasterSecretBundle>& bundle() const noexcept { return bundle_; }
    bool aborted() const noexcept { return aborted_; }

private:
    [[noreturn]] void abort(const char* why);

    crypto::CryptoEngine& engine_;
    HandshakeIdentity identity_;
    Bytes c_i_;
    crypto::X25519KeyPair eph_;
    Bytes m1_;
    Bytes accepted_m2_;
    Bytes m3_;
    std::optional<MasterSecretBundle> bundle_;
    bool aborted_ = false;
};

class HandshakeResponder {
public:
    HandshakeResponder(crypto::CryptoEngine& engine, HandshakeIdentity identity, Bytes connection_id);

    /// Answers message 1. A repeat of the accepted message 1 gets the same
    /// message 2; any other message 1 aborts the session.
    Bytes on_message1(ByteView m1);

    /// Verifies message 3. Repeating the accepted message 3 is harmless.
    const MasterSecretBundle& on_message3(ByteView m3);

    const std::optional<MasterSecretBundle>& bundle() const noexcept { return bundle_; }
    bool aborted() const noexcept { return aborted_; }

private:
    [[noreturn]] void abort(const char* why);

    crypto::CryptoEngine& engine_;
    HandshakeIdentity identity_;
    Bytes c_r_;
    std::optional<crypto::X25519KeyPair> eph_;
    Bytes accepted_m1_;
    Bytes m2_;
    Bytes c_i_;
    Bytes shared_;
    std::array<std::uint8_t, 32> th3_{};
    Bytes accepted_m3_;
    std::optional<MasterSecretBundle> bundle_;
    bool aborted_ = false;
};

enum class Direction { to_responder, to_initiator };

/// Carries one handshake message and returns what arrives at the other side,
/// or nothing when it was lost. An empty message is the confirmation of
/// message 3.
class HandshakeTransport {
public:
    virtual ~HandshakeTransport() = default;
    virtual std::optional<Bytes> carry(Direction direction, ByteView message) = 0;
};

struct HandshakeResult {
    MasterSecretBundle initiator_bundle;
    MasterSecretBundle responder_bundle;
    unsigned transmissions = 0;
};

/// Runs both state machines over `transport`, retransmitting lost messages.
/// Throws Errc::handshake_abort when verification fails on either side and
/// Errc::transport after max_attempts tries of one exchange.
HandshakeResult run_handshake(HandshakeInitiator& initiator, HandshakeResponder& responder,
                              HandshakeTransport& transport, unsigned max_attempts = 8);

enum class RecoveryPolicy { request_reauth, blind_trigger };

const char* to_string(RecoveryPolicy policy) noexcept;
RecoveryPolicy parse_recovery_policy(std::string_view name);

/// A batch left behind by a lost context, described by what is readable
/// without keys.
struct StoredBatchRef {
    storage::FileId batch = 0;
    Bytes kid;
    std::size_t packets = 0;
};

struct RecoveryAction {
    enum class Kind { handshake, send_batch, reply_no_data, await_trigger };
    Kind kind = Kind::reply_no_data;
    storage::FileId batch = 0;
    Bytes kid;
    bool operator==(const RecoveryAction&) const = default;
};

/// Plans what a node that lost its context does with the packets it still
/// holds. Stored packets are forwarded untouched; nothing is decrypted.
std::vector<RecoveryAction> recover_after_loss(const std::vector<StoredBatchRef>& stored, RecoveryPolicy policy,
                                               bool undecipherable_inbound);

}  // namespace blend::keymgmt
