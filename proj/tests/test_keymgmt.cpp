#include <gtest/gtest.h>

#include <random>

#include "blend/keymgmt.hpp"
#include "test_support.hpp"

using namespace blend;
using namespace blend::keymgmt;
using blend::test::DirectTransport;
using blend::test::error_code;

namespace {

struct Parties {
    crypto::CryptoEngine engine;
    std::shared_ptr<const crypto::SigningKey> node_key =
        std::make_shared<crypto::SigningKey>(engine.generate_signing_key());
    std::shared_ptr<const crypto::SigningKey> mule_key =
        std::make_shared<crypto::SigningKey>(engine.generate_signing_key());

    HandshakeInitiator initiator() { return {engine, {node_key, mule_key->public_key()}, Bytes{0x01}}; }
    HandshakeResponder responder() { return {engine, {mule_key, node_key->public_key()}, Bytes{0x42}}; }
};

MasterSecretBundle c1_bundle(std::uint32_t generation) {
    MasterSecretBundle b;
    b.master_secret = from_hex("0102030405060708090a0b0c0d0e0f10");
    b.master_salt = from_hex("9e7ca92223786340");
    b.sender_id = {0x42};
    b.recipient_id = {0x01};
    b.generation = generation;
    return b;
}

/// Flips one byte of the n-th transmission (0-based) and reports what the
/// run did.
Errc tampered_run(Parties& p, std::size_t target, std::size_t offset, std::uint8_t mask) {
    auto i = p.initiator();
    auto r = p.responder();
    DirectTransport t;
    std::size_t n = 0;
    t.hook = [&](Direction, Bytes m) -> std::optional<Bytes> {
        if (n++ == target && !m.empty()) m[offset % m.size()] ^= mask;
        return m;
    };
    return error_code([&] {
        run_handshake(i, r, t);
        ADD_FAILURE() << "tampered transmission " << target << " offset " << offset << " was accepted";
    });
}

}  // namespace

TEST(Handshake, HonestRunAgrees) {
    Parties p;
    auto i = p.initiator();
    auto r = p.responder();
    DirectTransport t;
    const auto result = run_handshake(i, r, t);
    EXPECT_EQ(result.initiator_bundle, result.responder_bundle);
    EXPECT_EQ(result.initiator_bundle.master_secret.size(), master_secret_size);
    EXPECT_EQ(result.initiator_bundle.master_salt.size(), master_salt_size);
    EXPECT_EQ(result.initiator_bundle.sender_id, Bytes{0x42});
    EXPECT_EQ(result.initiator_bundle.recipient_id, Bytes{0x01});
    EXPECT_EQ(result.initiator_bundle.generation, 0u);
    EXPECT_EQ(result.transmissions, 4u);

    auto node_ctx = derive_bundle_context(p.engine, result.initiator_bundle, Role::initiator);
    auto mule_ctx = derive_bundle_context(p.engine, result.responder_bundle, Role::responder);
    EXPECT_EQ(node_ctx.sender_key, mule_ctx.recipient_key);
    EXPECT_EQ(node_ctx.recipient_key, mule_ctx.sender_key);
    EXPECT_EQ(node_ctx.sender_id, Bytes{0x42});
    EXPECT_EQ(mule_ctx.sender_id, Bytes{0x01});
}

TEST(Handshake, FreshSecretsPerRun) {
    Parties p;
    DirectTransport t;
    auto i1 = p.initiator();
    auto r1 = p.responder();
    auto i2 = p.initiator();
    auto r2 = p.responder();
    const auto a = run_handshake(i1, r1, t);
    const auto b = run_handshake(i2, r2, t);
    EXPECT_NE(a.initiator_bundle.master_secret, b.initiator_bundle.master_secret);
    EXPECT_NE(i1.message1(), i2.message1());
}

TEST(Handshake, SurvivesLostMessages) {
    Parties p;
    auto i = p.initiator();
    auto r = p.responder();
    DirectTransport t;
    std::size_t n = 0;
    // Drops m1, m2, m3 and the confirmation once each.
    t.hook = [&](Direction, Bytes m) -> std::optional<Bytes> {
        const std::size_t k = n++;
        if (k == 0 || k == 2 || k == 5 || k == 8) return std::nullopt;
        return m;
    };
    const auto result = run_handshake(i, r, t);
    EXPECT_EQ(result.initiator_bundle, result.responder_bundle);
}

TEST(Handshake, TimesOut) {
    Parties p;
    auto i = p.initiator();
    auto r = p.responder();
    DirectTransport t;
    t.hook = [](Direction, Bytes) -> std::optional<Bytes> { return std::nullopt; };
    EXPECT_EQ(error_code([&] { run_handshake(i, r, t, 3); }), Errc::transport);
}

TEST(Handshake, EveryByteFlipAborts) {
    Parties p;
    auto i = p.initiator();
    auto r = p.responder();
    DirectTransport sizes;
    std::vector<std::size_t> lengths;
    sizes.hook = [&](Direction, Bytes m) -> std::optional<Bytes> {
        lengths.push_back(m.size());
        return m;
    };
    run_handshake(i, r, sizes);
    ASSERT_EQ(lengths.size(), 4u);
    ASSERT_EQ(lengths[3], 0u);
    for (std::size_t msg = 0; msg < 3; ++msg)
        for (std::size_t off = 0; off < lengths[msg]; ++off)
            EXPECT_EQ(tampered_run(p, msg, off, 0x01), Errc::handshake_abort) << "message " << msg + 1 << " byte " << off;
}

TEST(Handshake, RandomTampersNeverAccepted) {
    Parties p;
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t msg = rng() % 3;
        const auto mask = static_cast<std::uint8_t>(1 + rng() % 255);
        EXPECT_EQ(tampered_run(p, msg, rng(), mask), Errc::handshake_abort);
    }
}

TEST(Handshake, WrongPeerKeyAborts) {
    Parties p;
    auto stranger = std::make_shared<crypto::SigningKey>(p.engine.generate_signing_key());
    HandshakeInitiator i(p.engine, {p.node_key, stranger->public_key()}, Bytes{0x01});
    auto r = p.responder();
    DirectTransport t;
    EXPECT_EQ(error_code([&] { run_handshake(i, r, t); }), Errc::handshake_abort);
    EXPECT_TRUE(i.aborted());
}

TEST(Handshake, RetransmissionsAreIdempotent) {
    Parties p;
    auto i = p.initiator();
    auto r = p.responder();
    const Bytes m2 = r.on_message1(i.message1());
    EXPECT_EQ(r.on_message1(i.message1()), m2);
    const Bytes m3 = i.on_message2(m2);
    EXPECT_EQ(i.on_message2(m2), m3);
    const auto bundle = r.on_message3(m3);
    EXPECT_EQ(r.on_message3(m3), bundle);
    EXPECT_EQ(*i.bundle(), bundle);
}

TEST(Handshake, SecondMessage1Aborts) {
    Parties p;
    auto i1 = p.initiator();
    auto i2 = p.initiator();
    auto r = p.responder();
    r.on_message1(i1.message1());
    EXPECT_EQ(error_code([&] { r.on_message1(i2.message1()); }), Errc::handshake_abort);
    EXPECT_TRUE(r.aborted());
}

TEST(Bundle, CborRoundTrip) {
    const auto b = c1_bundle(7);
    EXPECT_EQ(MasterSecretBundle::decode(b.encode()), b);
    Bytes broken = b.encode();
    broken.pop_back();
    EXPECT_THROW(MasterSecretBundle::decode(broken), Error);
}

// Frozen by tests/oracles/keymgmt_vectors.py.
TEST(Refresh, GenerationIdContextKnownAnswers) {
    crypto::CryptoEngine e;
    EXPECT_FALSE(generation_id_context(e, c1_bundle(0)));
    EXPECT_EQ(to_hex(*generation_id_context(e, c1_bundle(1))), "720249aa56708869");
    EXPECT_EQ(to_hex(*generation_id_context(e, c1_bundle(2))), "0caab7f0d4286ac1");
    EXPECT_EQ(to_hex(*generation_id_context(e, c1_bundle(0xFFFFFFFF))), "9040c2ccc685840c");
}

TEST(Refresh, DerivedContextKnownAnswers) {
    crypto::CryptoEngine e;
    MasterSecretBundle b = c1_bundle(0);
    b.sender_id = {0x01};
    b.recipient_id = {0x42};
    const auto r = refresh_context(e, b, Role::initiator);
    EXPECT_TRUE(r.forward_secrecy_warning);
    EXPECT_EQ(r.bundle.generation, 1u);
    EXPECT_EQ(r.bundle.master_secret, b.master_secret);
    EXPECT_EQ(to_hex(*r.context.id_context), "720249aa56708869");
    EXPECT_EQ(to_hex(r.context.sender_key.bytes()), "41685d9471ac233609d2c02949502cff");
    EXPECT_EQ(to_hex(r.context.recipient_key.bytes()), "0ab8bb5ba8ea5a24285d480f306378b4");
    EXPECT_EQ(to_hex(r.context.common_iv), "f4b142c13feb588fc024942780");
    EXPECT_EQ(r.context.sender_seq, 0u);
}

TEST(Refresh, BothSidesAgree) {
    crypto::CryptoEngine e;
    const auto node = refresh_context(e, c1_bundle(3), Role::initiator);
    const auto mule = refresh_context(e, c1_bundle(3), Role::responder);
    EXPECT_EQ(node.bundle, mule.bundle);
    EXPECT_EQ(node.context.sender_key, mule.context.recipient_key);
    EXPECT_EQ(node.context.id_context, mule.context.id_context);
    EXPECT_EQ(node.context.common_iv, mule.context.common_iv);
}

TEST(Refresh, ProtectedUnderNewContextOnly) {
    crypto::CryptoEngine e;
    auto next = refresh_context(e, c1_bundle(0), Role::initiator);
    auto mule_old = derive_bundle_context(e, c1_bundle(0), Role::responder);
    auto mule_new = derive_bundle_context(e, next.bundle, Role::responder);
    const Bytes pkt = oscore::protect(e, next.context, test::sensor_request(Bytes(6, 0xab)), 0);
    EXPECT_EQ(oscore::unprotect(e, mule_new, pkt).message.payload, Bytes(6, 0xab));
    EXPECT_EQ(error_code([&] { oscore::unprotect(e, mule_old, pkt); }), Errc::no_context);
}

TEST(Recovery, PolicyNames) {
    EXPECT_EQ(parse_recovery_policy("request_reauth"), RecoveryPolicy::request_reauth);
    EXPECT_EQ(parse_recovery_policy("blind_trigger"), RecoveryPolicy::blind_trigger);
    EXPECT_STREQ(to_string(RecoveryPolicy::blind_trigger), "blind_trigger");
    EXPECT_EQ(error_code([] { parse_recovery_policy("pray"); }), Errc::config);
}

TEST(Recovery, Plans) {
    using K = RecoveryAction::Kind;
    const std::vector<StoredBatchRef> stored{{1, {0x42}, 25}, {2, {0x42}, 0}, {3, {0x43}, 4}};
    const std::vector<RecoveryAction> reauth{{K::handshake, 0, {}}, {K::send_batch, 1, {0x42}}, {K::send_batch, 3, {0x43}}};
    EXPECT_EQ(recover_after_loss(stored, RecoveryPolicy::request_reauth, false), reauth);
    EXPECT_EQ(recover_after_loss(stored, RecoveryPolicy::blind_trigger, false),
              (std::vector<RecoveryAction>{{K::await_trigger, 0, {}}}));
    EXPECT_EQ(recover_after_loss(stored, RecoveryPolicy::blind_trigger, true),
              (std::vector<RecoveryAction>{{K::send_batch, 1, {0x42}}, {K::send_batch, 3, {0x43}}}));
    for (auto policy : {RecoveryPolicy::request_reauth, RecoveryPolicy::blind_trigger})
        EXPECT_EQ(recover_after_loss({}, policy, true), (std::vector<RecoveryAction>{{K::reply_no_data, 0, {}}}));
}
