#include "blend/simnet.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "blend/coap.hpp"
#include "blend/error.hpp"

namespace blend::simnet {

void ChannelConfig::validate() const {
    const auto in_range = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_range(loss_prob) || !in_range(dup_prob)) throw Error(Errc::config, "channel probability out of [0, 1]");
}

Channel::Channel(std::string name, ChannelConfig config) : name_(std::move(name)), config_(config), rng_(config.seed) {
    config_.validate();
}

double Channel::uniform() {
    // 53 random bits, same sequence on every standard library.
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

void Channel::record(const char* event, ByteView datagram) {
    if (!tracing_) return;
    trace_.push_back({step_, name_, event, Bytes(datagram.begin(), datagram.end())});
}

void Channel::adversary_tamper(TamperRule rule) { rules_.push_back({std::move(rule), 0}); }

void Channel::send(ByteView datagram) {
    if (datagram.size() > max_datagram_size) throw Error(Errc::transport, "datagram exceeds 1280 bytes");
    ++step_;
    const std::size_t index = stats_.sent++;
    record("send", datagram);

    Bytes wire(datagram.begin(), datagram.end());
    std::size_t replays = 0;
    for (auto& active : rules_) {
        const TamperRule& r = active.rule;
        if (r.limit != 0 && active.fired >= r.limit) continue;
        if (r.match && !r.match(wire, index)) continue;
        if (r.action == TamperRule::Action::flip_byte) {
            if (wire.empty()) continue;
            wire[r.offset % wire.size()] ^= r.mask;
            ++stats_.tampered;
            record("tamper", wire);
        } else {
            ++replays;
        }
        ++active.fired;
    }

    if (uniform() < config_.loss_prob) {
        ++stats_.dropped;
        record("drop", wire);
    } else {
        in_flight_.push_back(wire);
        if (uniform() < config_.dup_prob) {
            ++stats_.duplicated;
            in_flight_.push_back(wire);
            record("duplicate", wire);
        }
    }
    // A replayed copy is injected even when the original was lost; the
    // adversary captured it off the air.
    for (std::size_t i = 0; i < replays; ++i) {
        ++stats_.replayed;
        in_flight_.push_back(wire);
        record("replay", wire);
    }
}

std::optional<Bytes> Channel::receive() {
    if (in_flight_.empty()) return std::nullopt;
    ++step_;
    const std::size_t span = std::min(in_flight_.size(), config_.reorder_window + 1);
    const std::size_t pick = span == 1 ? 0 : static_cast<std::size_t>(rng_() % span);
    Bytes out = std::move(in_flight_[pick]);
    in_flight_.erase(in_flight_.begin() + static_cast<std::ptrdiff_t>(pick));
    ++stats_.delivered;
    record("deliver", out);
    return out;
}

namespace {

ChannelConfig reverse_config(ChannelConfig c) {
    c.seed ^= 0x9e3779b97f4a7c15ULL;
    return c;
}

}  // namespace

Link::Link(ChannelConfig config, const std::string& name)
    : forward_(name + ":a>b", config), backward_(name + ":b>a", reverse_config(config)) {}

void write_trace_csv(std::ostream& out, const std::vector<const Channel*>& channels) {
    std::vector<const TraceEntry*> all;
    for (const auto* c : channels)
        for (const auto& e : c->trace()) all.push_back(&e);
    std::stable_sort(all.begin(), all.end(), [](auto* a, auto* b) { return a->step < b->step; });
    out << "step,channel,event,length,hex\n";
    for (const auto* e : all)
        out << e->step << ',' << e->channel << ',' << e->event << ',' << e->datagram.size() << ','
            << to_hex(e->datagram) << '\n';
}

std::optional<Bytes> LinkHandshakeTransport::carry(keymgmt::Direction direction, ByteView message) {
    const bool to_responder = direction == keymgmt::Direction::to_responder;
    coap::Message m;
    if (to_responder) {
        pending_request_id_ = message_id_++;
        m.type = coap::MessageType::confirmable;
        m.code = coap::code::post;
        m.uri_path = "hs";
    } else {
        m.type = coap::MessageType::acknowledgement;
        m.code = coap::code::changed;
    }
    m.message_id = pending_request_id_;
    m.token = {static_cast<std::uint8_t>(pending_request_id_)};
    m.payload = Bytes(message.begin(), message.end());

    Channel& channel = to_responder ? link_.a_to_b() : link_.b_to_a();
    channel.send(coap::serialize(m));

    // The receiving side keeps the first copy that parses and matches the
    // exchange; stale copies and duplicates are discarded.
    std::optional<Bytes> delivered;
    while (auto datagram = channel.receive()) {
        if (delivered) continue;
        try {
            const coap::Message got = coap::parse(*datagram);
            if (got.message_id == pending_request_id_ && got.type == m.type && got.code == m.code)
                delivered = got.payload;
        } catch (const Error&) {
        }
    }
    return delivered;
}

}  // namespace blend::simnet
