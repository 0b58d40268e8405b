#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>

#include <gtest/gtest.h>

#include "blend/error.hpp"
#include "blend/keymgmt.hpp"
#include "blend/mule.hpp"
#include "blend/node.hpp"
#include "blend/oscore.hpp"

namespace blend::test {

/// Runs fn and returns the Errc it threw; fails the test if nothing was thrown.
inline Errc error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected blend::Error";
    return Errc::invalid_argument;
}

/// OSCORE appendix C.1 master secret and salt.
inline oscore::ContextInputs rfc_inputs(Bytes sender, Bytes recipient) {
    oscore::ContextInputs in;
    in.master_secret = from_hex("0102030405060708090a0b0c0d0e0f10");
    in.master_salt = from_hex("9e7ca92223786340");
    in.sender_id = std::move(sender);
    in.recipient_id = std::move(recipient);
    return in;
}

/// Node (kid 0x42) and collector (kid 0x01) contexts over the C.1 secret.
inline oscore::ContextInputs node_inputs() { return rfc_inputs({0x42}, {0x01}); }
inline oscore::ContextInputs mule_inputs() { return rfc_inputs({0x01}, {0x42}); }

inline coap::Message sensor_request(Bytes payload, std::uint16_t mid = 0x4a84, std::uint8_t token = 0x84) {
    coap::Message m;
    m.message_id = mid;
    m.token = {token};
    m.payload = std::move(payload);
    return m;
}

/// Lossless in-memory handshake carrier with an optional hook that may
/// rewrite or drop each message.
class DirectTransport : public keymgmt::HandshakeTransport {
public:
    using Hook = std::function<std::optional<Bytes>(keymgmt::Direction, Bytes)>;
    Hook hook;
    std::size_t carried = 0;

    std::optional<Bytes> carry(keymgmt::Direction direction, ByteView message) override {
        ++carried;
        Bytes m(message.begin(), message.end());
        return hook ? hook(direction, std::move(m)) : std::optional<Bytes>(std::move(m));
    }
};

/// One node and one mule, each with its own engine, joined by perfect
/// in-memory delivery.
struct NodeMulePair {
    crypto::CryptoEngine node_engine;
    crypto::CryptoEngine mule_engine;
    storage::FlashDevice flash;
    std::shared_ptr<const crypto::SigningKey> node_key;
    std::shared_ptr<const crypto::SigningKey> mule_key;
    node::SensorNode node;
    mule::DataMule mule;
    std::string name = "n0";

    explicit NodeMulePair(node::NodeConfig config = {}, std::size_t page_size = storage::default_page_size,
                          std::size_t page_count = storage::default_page_count)
        : flash(page_size, page_count),
          node_key(std::make_shared<crypto::SigningKey>(node_engine.generate_signing_key())),
          mule_key(std::make_shared<crypto::SigningKey>(mule_engine.generate_signing_key())),
          node(node_engine, flash, std::move(config)),
          mule(mule_engine, mule_key) {
        mule.add_node(name, node_key->public_key());
    }

    keymgmt::HandshakeResult connect() {
        keymgmt::HandshakeInitiator initiator(node_engine, {node_key, mule.public_key()}, node.config().connection_id);
        auto responder = mule.begin_handshake(name);
        DirectTransport transport;
        auto result = keymgmt::run_handshake(initiator, responder, transport);
        node.install_bundle(result.initiator_bundle);
        mule.install_bundle(name, result.responder_bundle);
        return result;
    }

    /// Delivers datagrams back and forth until both sides go quiet. Returns
    /// how many datagrams the node sent.
    std::size_t exchange(std::vector<Bytes> to_node) {
        std::deque<Bytes> down(to_node.begin(), to_node.end()), up;
        std::size_t from_node = 0;
        while (!down.empty() || !up.empty()) {
            while (!down.empty()) {
                for (auto& out : node.on_datagram(down.front())) up.push_back(std::move(out)), ++from_node;
                down.pop_front();
            }
            while (!up.empty()) {
                for (auto& out : mule.on_datagram(name, up.front())) down.push_back(std::move(out));
                up.pop_front();
            }
        }
        return from_node;
    }

    std::size_t collect() { return exchange({mule.send_trigger(name)}); }

    void store(std::size_t count, std::size_t size = 6) {
        for (std::size_t i = 0; i < count; ++i) node.precompute_and_store(Bytes(size, static_cast<std::uint8_t>(i)));
    }
};

}  // namespace blend::test
