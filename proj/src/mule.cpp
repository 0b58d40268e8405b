#include "blend/mule.hpp"

#include <algorithm>
#include <ostream>

#include "blend/error.hpp"

namespace blend::mule {

namespace {

/// Contiguous runs of a sorted set as [first, last] pairs.
std::vector<std::pair<std::uint64_t, std::uint64_t>> runs(const std::set<std::uint64_t>& seqs) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (auto s : seqs) {
        if (!out.empty() && out.back().second + 1 == s)
            out.back().second = s;
        else
            out.emplace_back(s, s);
    }
    return out;
}

}  // namespace

DataMule::DataMule(crypto::CryptoEngine& engine, std::shared_ptr<const crypto::SigningKey> signing_key)
    : engine_(engine), signing_key_(std::move(signing_key)) {
    if (!signing_key_) throw Error(Errc::invalid_argument, "mule needs a signing key");
}

void DataMule::add_node(const std::string& node, Bytes node_public_key) {
    peers_.try_emplace(node, Peer{std::move(node_public_key), {}, std::nullopt, 0, 0x9000, false});
}

DataMule::Peer& DataMule::peer(const std::string& node) {
    auto it = peers_.find(node);
    if (it == peers_.end()) throw Error(Errc::no_context, "unknown node " + node);
    return it->second;
}

const DataMule::Peer& DataMule::peer(const std::string& node) const {
    auto it = peers_.find(node);
    if (it == peers_.end()) throw Error(Errc::no_context, "unknown node " + node);
    return it->second;
}

keymgmt::HandshakeResponder DataMule::begin_handshake(const std::string& node) {
    Peer& p = peer(node);
    const auto in_use = [&](std::uint8_t kid) {
        for (const auto& [name, other] : peers_)
            for (const auto& c : other.contexts)
                if (c.ctx.recipient_id == Bytes{kid}) return true;
        return false;
    };
    // 0x01 is left to the nodes' own connection ids.
    for (int tries = 0; tries < 256; ++tries) {
        const std::uint8_t kid = next_kid_++;
        if (kid == 0x01 || in_use(kid)) continue;
        return keymgmt::HandshakeResponder(engine_, {signing_key_, p.public_key}, Bytes{kid});
    }
    throw Error(Errc::handshake_abort, "no free kid");
}

DataMule::Context DataMule::make_context(const keymgmt::MasterSecretBundle& bundle) {
    Context c;
    c.ctx = keymgmt::derive_bundle_context(engine_, bundle, keymgmt::Role::responder);
    c.bundle = bundle;
    keymgmt::MasterSecretBundle next = bundle;
    ++next.generation;
    c.next_id_context = keymgmt::generation_id_context(engine_, next);
    return c;
}

void DataMule::install_bundle(const std::string& node, const keymgmt::MasterSecretBundle& bundle) {
    Peer& p = peer(node);
    p.contexts.push_back(make_context(bundle));
    p.trigger.reset();
    p.complete = false;
}

DataMule::Context* DataMule::route(Peer& p, ByteView kid, const std::optional<Bytes>& kid_context) {
    const auto same = [&](const Bytes& id) { return std::equal(id.begin(), id.end(), kid.begin(), kid.end()); };
    for (auto& c : p.contexts)
        if (same(c.ctx.recipient_id) && c.ctx.id_context == kid_context) return &c;
    for (std::size_t i = 0; i < p.contexts.size(); ++i) {
        const Context& c = p.contexts[i];
        if (same(c.ctx.recipient_id) && kid_context && c.next_id_context == kid_context) {
            auto next = keymgmt::refresh_context(engine_, c.bundle, keymgmt::Role::responder);
            p.contexts.push_back(make_context(next.bundle));
            return &p.contexts.back();
        }
    }
    return nullptr;
}

bool DataMule::has_context(ByteView kid, const std::optional<Bytes>& kid_context) const {
    for (const auto& [name, p] : peers_)
        for (const auto& c : p.contexts)
            if (std::equal(c.ctx.recipient_id.begin(), c.ctx.recipient_id.end(), kid.begin(), kid.end()) &&
                c.ctx.id_context == kid_context)
                return true;
    return false;
}

Bytes DataMule::send_trigger(const std::string& node) {
    Peer& p = peer(node);
    if (p.contexts.empty()) throw Error(Errc::no_context, "no context for " + node);

    std::vector<node::Receipt> receipts;
    for (std::size_t i = 0; i + 1 < p.contexts.size(); ++i) {
        const Context& c = p.contexts[i];
        for (auto [first, last] : runs(c.seen)) receipts.push_back({c.ctx.recipient_id, c.ctx.id_context, first, last});
    }

    Context& current = p.contexts.back();
    coap::Message m;
    m.type = coap::MessageType::confirmable;
    m.code = coap::code::post;
    m.message_id = p.next_message_id++;
    m.token = {static_cast<std::uint8_t>(m.message_id)};
    m.uri_path = std::string(node::trigger_path);
    m.payload = node::encode_receipts(receipts);
    const std::uint64_t seq = current.ctx.sender_seq;
    Bytes packet = oscore::protect(engine_, current.ctx, m, seq);
    p.trigger = oscore::RequestBinding{current.ctx.sender_id, oscore::encode_piv(seq)};
    p.trigger_message_id = m.message_id;
    p.complete = false;
    return packet;
}

std::vector<Bytes> DataMule::on_datagram(const std::string& node, ByteView datagram) {
    coap::RawMessage raw;
    try {
        raw = coap::parse_raw(datagram);
    } catch (const Error&) {
        ++stats_.malformed;
        return {};
    }
    if (coap::is_request(raw.header.code)) return on_data_packet(node, datagram);
    if (coap::is_response(raw.header.code)) on_response(peer(node), datagram);
    return {};
}

Bytes DataMule::acknowledgement(const Context& c, const coap::Header& request, const oscore::RequestBinding& binding) {
    coap::Message ack;
    ack.type = request.type == coap::MessageType::confirmable ? coap::MessageType::acknowledgement
                                                              : coap::MessageType::non_confirmable;
    ack.code = coap::code::changed;
    ack.message_id = request.message_id;
    ack.token = request.token;
    return oscore::protect_response(engine_, c.ctx, ack, binding);
}

std::vector<Bytes> DataMule::on_data_packet(const std::string& node, ByteView datagram) {
    Peer& p = peer(node);
    oscore::PacketView view;
    try {
        view = oscore::inspect(datagram);
    } catch (const Error&) {
        ++stats_.malformed;
        return {};
    }
    if (!view.option.kid) {
        ++stats_.unknown_kid;
        return {};
    }
    Context* c = route(p, *view.option.kid, view.option.kid_context);
    if (!c) {
        ++stats_.unknown_kid;
        return {};
    }
    try {
        auto got = oscore::unprotect(engine_, c->ctx, datagram);
        c->seen.insert(got.seq);
        received_.push_back({node, *view.option.kid, view.option.kid_context, got.seq, std::move(got.message.payload)});
        ++stats_.accepted;
        return {acknowledgement(*c, view.header, got.binding)};
    } catch (const Error& e) {
        switch (e.code()) {
            case Errc::replay: {
                ++stats_.replays;
                // A retransmission whose acknowledgement got lost: the packet is
                // not delivered again, but the node still needs its ack.
                const std::uint64_t seq = oscore::decode_piv(view.option.piv);
                if (!c->seen.count(seq)) return {};
                ++stats_.reacknowledged;
                return {acknowledgement(*c, view.header, {*view.option.kid, view.option.piv})};
            }
            case Errc::authentication: ++stats_.auth_failures; return {};
            default: ++stats_.malformed; return {};
        }
    }
}

void DataMule::on_response(Peer& p, ByteView datagram) {
    if (!p.trigger || p.contexts.empty()) return;
    try {
        if (oscore::inspect(datagram).header.message_id != p.trigger_message_id) return;
        const auto reply = oscore::unprotect_response(engine_, p.contexts.back().ctx, datagram, *p.trigger);
        if (reply.code != coap::code::content || reply.payload != Bytes{node::no_data_payload}) return;
    } catch (const Error&) {
        ++stats_.malformed;
        return;
    }
    ++stats_.no_data_replies;
    p.complete = true;
    p.trigger.reset();
    // The node has nothing left under any context; older ones can go.
    if (p.contexts.size() > 1) {
        stats_.evictions += p.contexts.size() - 1;
        p.contexts.erase(p.contexts.begin(), p.contexts.end() - 1);
    }
}

bool DataMule::transfer_complete(const std::string& node) const { return peer(node).complete; }

std::size_t DataMule::context_count(const std::string& node) const { return peer(node).contexts.size(); }

void write_received_csv(std::ostream& out, const std::vector<ReceivedPacket>& packets) {
    out << "node,kid,kid_context,seq,payload_hex\n";
    for (const auto& r : packets)
        out << r.node << ',' << to_hex(r.kid) << ',' << (r.kid_context ? to_hex(*r.kid_context) : "") << ',' << r.seq
            << ',' << to_hex(r.payload) << '\n';
}

void DataMule::write_received_csv(std::ostream& out) const { mule::write_received_csv(out, received_); }

void DataMule::write_received_hex(std::ostream& out) const {
    for (const auto& r : received_) out << to_hex(r.payload) << '\n';
}

}  // namespace blend::mule
