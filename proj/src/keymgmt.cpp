#include "blend/keymgmt.hpp"

#include <string>

#include "blend/cbor.hpp"
#include "blend/error.hpp"

namespace blend::keymgmt {

namespace {

constexpr std::size_t x25519_public_size = 32;
constexpr std::size_t signature_size = 64;

constexpr std::string_view label_k2 = "blend-sigma K2";
constexpr std::string_view label_k3 = "blend-sigma K3";
constexpr std::string_view label_sig_r = "blend-sigma sig R";
constexpr std::string_view label_sig_i = "blend-sigma sig I";
constexpr std::string_view label_secret = "blend-sigma master secret";
constexpr std::string_view label_salt = "blend-sigma master salt";

ByteView view(std::string_view s) { return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}; }

Bytes hash(ByteView a, ByteView b = {}, ByteView c = {}) {
    const Bytes joined = concat(a, b, c);
    const auto digest = crypto::sha256(joined);
    return Bytes(digest.begin(), digest.end());
}

Bytes frame(std::uint8_t index, cbor::Item::Array items) {
    Bytes out{index};
    cbor::encode_into(out, cbor::Item::array(std::move(items)));
    return out;
}

/// Splits a framed message into its byte-string fields; nullopt on any
/// framing or shape error.
std::optional<std::vector<Bytes>> unframe(ByteView message, std::uint8_t index, std::size_t fields) {
    if (message.size() < 2 || message[0] != index) return std::nullopt;
    try {
        const cbor::Item item = cbor::decode_exact(message.subspan(1));
        const auto& array = item.as_array();
        if (array.size() != fields) return std::nullopt;
        std::vector<Bytes> out;
        for (const auto& field : array) out.push_back(field.as_bytes());
        return out;
    } catch (const Error&) {
        return std::nullopt;
    }
}

Bytes mac(ByteView key, std::string_view party, ByteView th, ByteView public_key) {
    const auto full = crypto::hmac_sha256(key, concat(view(party), th, public_key));
    return Bytes(full.begin(), full.begin() + handshake_mac_size);
}

bool valid_connection_id(ByteView id) { return id.size() <= oscore::max_id_length; }

MasterSecretBundle finish(crypto::CryptoEngine& engine, ByteView th4, ByteView shared, ByteView c_i, ByteView c_r) {
    MasterSecretBundle bundle;
    bundle.master_secret = engine.hkdf(th4, shared, view(label_secret), master_secret_size);
    bundle.master_salt = engine.hkdf(th4, shared, view(label_salt), master_salt_size);
    bundle.sender_id = Bytes(c_r.begin(), c_r.end());
    bundle.recipient_id = Bytes(c_i.begin(), c_i.end());
    return bundle;
}

}  // namespace

Bytes MasterSecretBundle::encode() const {
    return cbor::encode(cbor::Item::array({cbor::Item::bytes(master_secret), cbor::Item::bytes(master_salt),
                                           cbor::Item::bytes(sender_id), cbor::Item::bytes(recipient_id),
                                           cbor::Item::uint(generation)}));
}

MasterSecretBundle MasterSecretBundle::decode(ByteView data) {
    const cbor::Item item = cbor::decode_exact(data);
    const auto& a = item.as_array();
    if (a.size() != 5 || a[4].as_uint() > UINT32_MAX) throw Error(Errc::config, "malformed bundle");
    return {a[0].as_bytes(), a[1].as_bytes(), a[2].as_bytes(), a[3].as_bytes(),
            static_cast<std::uint32_t>(a[4].as_uint())};
}

std::optional<Bytes> generation_id_context(crypto::CryptoEngine& engine, const MasterSecretBundle& bundle) {
    if (bundle.generation == 0) return std::nullopt;
    Bytes info = to_bytes("gen");
    put_be(info, bundle.generation, 4);
    return engine.hkdf(bundle.master_salt, bundle.master_secret, info, id_context_size);
}

oscore::ContextInputs context_inputs(crypto::CryptoEngine& engine, const MasterSecretBundle& bundle, Role role) {
    oscore::ContextInputs in;
    in.master_secret = bundle.master_secret;
    in.master_salt = bundle.master_salt;
    in.sender_id = role == Role::initiator ? bundle.sender_id : bundle.recipient_id;
    in.recipient_id = role == Role::initiator ? bundle.recipient_id : bundle.sender_id;
    in.id_context = generation_id_context(engine, bundle);
    return in;
}

oscore::SecurityContext derive_bundle_context(crypto::CryptoEngine& engine, const MasterSecretBundle& bundle,
                                              Role role) {
    return oscore::derive_context(engine, context_inputs(engine, bundle, role));
}

RefreshResult refresh_context(crypto::CryptoEngine& engine, const MasterSecretBundle& bundle, Role role) {
    if (bundle.generation == UINT32_MAX) throw Error(Errc::sequence_exhausted, "bundle generations exhausted");
    RefreshResult out;
    out.bundle = bundle;
    ++out.bundle.generation;
    out.context = derive_bundle_context(engine, out.bundle, role);
    return out;
}

HandshakeInitiator::HandshakeInitiator(crypto::CryptoEngine& engine, HandshakeIdentity identity, Bytes connection_id)
    : engine_(engine), identity_(std::move(identity)), c_i_(std::move(connection_id)) {
    if (!identity_.signing_key || !valid_connection_id(c_i_))
        throw Error(Errc::invalid_argument, "bad initiator identity");
    eph_ = engine_.generate_x25519();
    m1_ = frame(1, {cbor::Item::bytes(eph_.public_key()), cbor::Item::bytes(c_i_)});
}

void HandshakeInitiator::abort(const char* why) {
    aborted_ = true;
    throw Error(Errc::handshake_abort, why);
}

Bytes HandshakeInitiator::on_message2(ByteView m2) {
    if (aborted_) throw Error(Errc::handshake_abort, "session aborted");
    if (bundle_) {
        if (crypto::equal_ct(m2, accepted_m2_)) return m3_;
        abort("unexpected message 2");
    }
    const auto fields = unframe(m2, 2, 4);
    if (!fields) abort("malformed message 2");
    const Bytes& eph_r = (*fields)[0];
    const Bytes& c_r = (*fields)[1];
    const Bytes& sig_r = (*fields)[2];
    const Bytes& mac_r = (*fields)[3];
    if (eph_r.size() != x25519_public_size || sig_r.size() != signature_size || !valid_connection_id(c_r) ||
        c_r == c_i_)
        abort("malformed message 2");

    const Bytes th2 = hash(m1_, eph_r, c_r);
    if (!engine_.verify(identity_.peer_public_key, concat(view(label_sig_r), th2), sig_r))
        abort("responder signature invalid");
    Bytes shared;
    try {
        shared = engine_.x25519(eph_, eph_r);
    } catch (const Error&) {
        abort("responder ephemeral key rejected");
    }
    const Bytes k2 = engine_.hkdf(th2, shared, view(label_k2), 32);
    if (!crypto::equal_ct(mac_r, mac(k2, "R", th2, identity_.peer_public_key))) abort("responder MAC invalid");

    const Bytes th3 = hash(th2, m2);
    const Bytes k3 = engine_.hkdf(th3, shared, view(label_k3), 32);
    const Bytes sig_i = engine_.sign(*identity_.signing_key, concat(view(label_sig_i), th3));
    const Bytes mac_i = mac(k3, "I", th3, identity_.signing_key->public_key());
    m3_ = frame(3, {cbor::Item::bytes(sig_i), cbor::Item::bytes(mac_i)});
    accepted_m2_ = Bytes(m2.begin(), m2.end());
    bundle_ = finish(engine_, hash(th3, m3_), shared, c_i_, c_r);
    return m3_;
}

HandshakeResponder::HandshakeResponder(crypto::CryptoEngine& engine, HandshakeIdentity identity, Bytes connection_id)
    : engine_(engine), identity_(std::move(identity)), c_r_(std::move(connection_id)) {
    if (!identity_.signing_key || !valid_connection_id(c_r_))
        throw Error(Errc::invalid_argument, "bad responder identity");
}

void HandshakeResponder::abort(const char* why) {
    aborted_ = true;
    throw Error(Errc::handshake_abort, why);
}

Bytes HandshakeResponder::on_message1(ByteView m1) {
    if (aborted_) throw Error(Errc::handshake_abort, "session aborted");
    if (!accepted_m1_.empty()) {
        if (crypto::equal_ct(m1, accepted_m1_) && !bundle_) return m2_;
        abort("unexpected message 1");
    }
    const auto fields = unframe(m1, 1, 2);
    if (!fields) abort("malformed message 1");
    const Bytes& eph_i = (*fields)[0];
    c_i_ = (*fields)[1];
    if (eph_i.size() != x25519_public_size || !valid_connection_id(c_i_) || c_i_ == c_r_)
        abort("malformed message 1");

    eph_ = engine_.generate_x25519();
    try {
        shared_ = engine_.x25519(*eph_, eph_i);
    } catch (const Error&) {
        abort("initiator ephemeral key rejected");
    }
    const Bytes& eph_r = eph_->public_key();
    const Bytes th2 = hash(m1, eph_r, c_r_);
    const Bytes k2 = engine_.hkdf(th2, shared_, view(label_k2), 32);
    const Bytes sig_r = engine_.sign(*identity_.signing_key, concat(view(label_sig_r), th2));
    const Bytes mac_r = mac(k2, "R", th2, identity_.signing_key->public_key());
    m2_ = frame(2, {cbor::Item::bytes(eph_r), cbor::Item::bytes(c_r_), cbor::Item::bytes(sig_r),
                    cbor::Item::bytes(mac_r)});
    const Bytes th3 = hash(th2, m2_);
    std::copy(th3.begin(), th3.end(), th3_.begin());
    accepted_m1_ = Bytes(m1.begin(), m1.end());
    return m2_;
}

const MasterSecretBundle& HandshakeResponder::on_message3(ByteView m3) {
    if (aborted_) throw Error(Errc::handshake_abort, "session aborted");
    if (bundle_) {
        if (crypto::equal_ct(m3, accepted_m3_)) return *bundle_;
        abort("unexpected message 3");
    }
    if (accepted_m1_.empty()) abort("message 3 before message 1");
    const auto fields = unframe(m3, 3, 2);
    if (!fields) abort("malformed message 3");
    const Bytes& sig_i = (*fields)[0];
    const Bytes& mac_i = (*fields)[1];
    if (sig_i.size() != signature_size) abort("malformed message 3");

    if (!engine_.verify(identity_.peer_public_key, concat(view(label_sig_i), th3_), sig_i))
        abort("initiator signature invalid");
    const Bytes k3 = engine_.hkdf(th3_, shared_, view(label_k3), 32);
    if (!crypto::equal_ct(mac_i, mac(k3, "I", th3_, identity_.peer_public_key))) abort("initiator MAC invalid");

    accepted_m3_ = Bytes(m3.begin(), m3.end());
    bundle_ = finish(engine_, hash(th3_, m3), shared_, c_i_, c_r_);
    return *bundle_;
}

HandshakeResult run_handshake(HandshakeInitiator& initiator, HandshakeResponder& responder,
                              HandshakeTransport& transport, unsigned max_attempts) {
    HandshakeResult result;
    std::optional<Bytes> m3;
    for (unsigned attempt = 0; !m3; ++attempt) {
        if (attempt == max_attempts) throw Error(Errc::transport, "message 1/2 exchange timed out");
        ++result.transmissions;
        const auto m1 = transport.carry(Direction::to_responder, initiator.message1());
        if (!m1) continue;
        const Bytes m2 = responder.on_message1(*m1);
        ++result.transmissions;
        const auto got_m2 = transport.carry(Direction::to_initiator, m2);
        if (!got_m2) continue;
        m3 = initiator.on_message2(*got_m2);
    }
    for (unsigned attempt = 0;; ++attempt) {
        if (attempt == max_attempts) throw Error(Errc::transport, "message 3 confirmation timed out");
        ++result.transmissions;
        const auto got_m3 = transport.carry(Direction::to_responder, *m3);
        if (!got_m3) continue;
        responder.on_message3(*got_m3);
        ++result.transmissions;
        const auto confirmation = transport.carry(Direction::to_initiator, Bytes{});
        if (confirmation && confirmation->empty()) break;
    }
    result.initiator_bundle = *initiator.bundle();
    result.responder_bundle = *responder.bundle();
    return result;
}

const char* to_string(RecoveryPolicy policy) noexcept {
    return policy == RecoveryPolicy::request_reauth ? "request_reauth" : "blind_trigger";
}

RecoveryPolicy parse_recovery_policy(std::string_view name) {
    if (name == "request_reauth") return RecoveryPolicy::request_reauth;
    if (name == "blind_trigger") return RecoveryPolicy::blind_trigger;
    throw Error(Errc::config, "unknown recovery policy: " + std::string(name));
}

std::vector<RecoveryAction> recover_after_loss(const std::vector<StoredBatchRef>& stored, RecoveryPolicy policy,
                                               bool undecipherable_inbound) {
    using Kind = RecoveryAction::Kind;
    std::vector<RecoveryAction> plan;
    bool any = false;
    for (const auto& b : stored) any = any || b.packets > 0;
    if (!any) return {{Kind::reply_no_data, 0, {}}};

    if (policy == RecoveryPolicy::request_reauth) {
        plan.push_back({Kind::handshake, 0, {}});
    } else if (!undecipherable_inbound) {
        return {{Kind::await_trigger, 0, {}}};
    }
    for (const auto& b : stored)
        if (b.packets > 0) plan.push_back({Kind::send_batch, b.batch, b.kid});
    return plan;
}

}  // namespace blend::keymgmt
