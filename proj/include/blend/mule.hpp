#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "blend/keymgmt.hpp"
#include "blend/node.hpp"
#include "blend/oscore.hpp"

namespace blend::mule {

struct ReceivedPacket {
    std::string node;
    Bytes kid;
    std::optional<Bytes> kid_context;
    std::uint64_t seq = 0;
    Bytes payload;
    bool operator==(const ReceivedPacket&) const = default;
};

struct MuleStats {
    std::uint64_t accepted = 0;
    std::uint64_t replays = 0;
    std::uint64_t reacknowledged = 0;
    std::uint64_t unknown_kid = 0;
    std::uint64_t auth_failures = 0;
    std::uint64_t malformed = 0;
    std::uint64_t no_data_replies = 0;
    std::uint64_t evictions = 0;
};

/// Collector. Acts as OSCORE client for triggers and as server for the
/// stored packets that follow. Keeps every context a node may still have
/// packets under, routed by kid and kid context.
class DataMule {
public:
    DataMule(crypto::CryptoEngine& engine, std::shared_ptr<const crypto::SigningKey> signing_key);

    const Bytes& public_key() const noexcept { return signing_key_->public_key(); }

    /// Registers a node by its static public key. Replaces nothing if known.
    void add_node(const std::string& node, Bytes node_public_key);

    /// Responder side of a handshake with `node`. The connection id is a kid
    /// no context of this mule uses, so old and new contexts stay apart.
    keymgmt::HandshakeResponder begin_handshake(const std::string& node);

    /// Adds the handshake result as the node's current context. Earlier
    /// contexts stay until a collection round under the new one completes.
    void install_bundle(const std::string& node, const keymgmt::MasterSecretBundle& bundle);

    /// Protected POST to "collect" under the node's current context. The
    /// payload carries receipts for every context kept besides the current.
    Bytes send_trigger(const std::string& node);

    /// Handles data packets and the node's "no data" reply. Returns the
    /// datagrams to send back to the node.
    std::vector<Bytes> on_datagram(const std::string& node, ByteView datagram);
    std::vector<Bytes> on_data_packet(const std::string& node, ByteView datagram);

    /// Whether the node answered the latest trigger with "no data".
    bool transfer_complete(const std::string& node) const;
    std::size_t context_count(const std::string& node) const;
    bool has_context(ByteView kid, const std::optional<Bytes>& kid_context) const;

    const std::vector<ReceivedPacket>& received() const noexcept { return received_; }
    const MuleStats& stats() const noexcept { return stats_; }

    /// CSV with columns node,kid,kid_context,seq,payload_hex.
    void write_received_csv(std::ostream& out) const;
    /// One payload per line, hex encoded.
    void write_received_hex(std::ostream& out) const;

private:
    struct Context {
        oscore::SecurityContext ctx;
        keymgmt::MasterSecretBundle bundle;
        std::set<std::uint64_t> seen;
        // ID context of the next generation, so a refresh on the node side is
        // picked up from the first packet that uses it.
        std::optional<Bytes> next_id_context;
    };
    struct Peer {
        Bytes public_key;
        std::vector<Context> contexts;  // back() is current
        std::optional<oscore::RequestBinding> trigger;
        std::uint16_t trigger_message_id = 0;
        std::uint16_t next_message_id = 0x9000;
        bool complete = false;
    };

    Peer& peer(const std::string& node);
    const Peer& peer(const std::string& node) const;
    Context make_context(const keymgmt::MasterSecretBundle& bundle);
    Context* route(Peer& p, ByteView kid, const std::optional<Bytes>& kid_context);
    Bytes acknowledgement(const Context& c, const coap::Header& request, const oscore::RequestBinding& binding);
    void on_response(Peer& p, ByteView datagram);

    crypto::CryptoEngine& engine_;
    std::shared_ptr<const crypto::SigningKey> signing_key_;
    std::map<std::string, Peer> peers_;
    std::vector<ReceivedPacket> received_;
    MuleStats stats_;
    std::uint8_t next_kid_ = 0x42;
};

/// CSV with columns node,kid,kid_context,seq,payload_hex.
void write_received_csv(std::ostream& out, const std::vector<ReceivedPacket>& packets);

}  // namespace blend::mule
