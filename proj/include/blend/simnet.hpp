#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blend/bytes.hpp"
#include "blend/keymgmt.hpp"

namespace blend::simnet {

/// IPv6 minimum MTU.
inline constexpr std::size_t max_datagram_size = 1280;

struct ChannelConfig {
    double loss_prob = 0.0;
    double dup_prob = 0.0;
    std::size_t reorder_window = 0;
    std::uint64_t seed = 0;

    /// Throws Errc::config when a probability is outside [0, 1].
    void validate() const;
};

/// Dolev-Yao style interference applied to datagrams as they are sent. The
/// adversary only alters or repeats what was really sent.
struct TamperRule {
    enum class Action { flip_byte, replay };

    Action action = Action::flip_byte;
    /// Which datagrams the rule applies to; all of them when empty. The
    /// second argument counts datagrams sent on the channel so far.
    std::function<bool(ByteView, std::size_t)> match;
    /// flip_byte: offset into the datagram, taken modulo its length.
    std::size_t offset = 0;
    std::uint8_t mask = 0x01;
    /// How many times the rule fires; 0 means without limit.
    std::size_t limit = 1;
};

struct TraceEntry {
    std::uint64_t step = 0;
    std::string channel;
    std::string event;  // send, tamper, replay, drop, duplicate, deliver
    Bytes datagram;
};

struct ChannelStats {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t duplicated = 0;
    std::uint64_t tampered = 0;
    std::uint64_t replayed = 0;
};

/// One direction of a link. Datagrams wait in flight until receive() is
/// called; with a reorder window of w the next delivery is picked uniformly
/// from the w + 1 oldest datagrams in flight.
class Channel {
public:
    Channel(std::string name, ChannelConfig config);

    /// Throws Errc::transport for datagrams larger than 1280 bytes.
    void send(ByteView datagram);
    std::optional<Bytes> receive();
    bool idle() const noexcept { return in_flight_.empty(); }
    std::size_t in_flight() const noexcept { return in_flight_.size(); }

    void adversary_tamper(TamperRule rule);
    void clear_rules() { rules_.clear(); }

    /// Off by default so long property runs stay cheap.
    void enable_trace(bool on) { tracing_ = on; }
    const std::vector<TraceEntry>& trace() const noexcept { return trace_; }
    const ChannelStats& stats() const noexcept { return stats_; }
    const std::string& name() const noexcept { return name_; }

private:
    struct ActiveRule {
        TamperRule rule;
        std::size_t fired = 0;
    };

    double uniform();
    void record(const char* event, ByteView datagram);

    std::string name_;
    ChannelConfig config_;
    std::mt19937_64 rng_;
    std::deque<Bytes> in_flight_;
    std::vector<ActiveRule> rules_;
    std::vector<TraceEntry> trace_;
    ChannelStats stats_;
    std::uint64_t step_ = 0;
    bool tracing_ = false;
};

/// A pair of channels between two endpoints, a and b. The reverse direction
/// gets a seed derived from the configured one.
class Link {
public:
    explicit Link(ChannelConfig config, const std::string& name = "link");

    Channel& a_to_b() noexcept { return forward_; }
    Channel& b_to_a() noexcept { return backward_; }
    bool idle() const noexcept { return forward_.idle() && backward_.idle(); }

private:
    Channel forward_;
    Channel backward_;
};

/// Trace of both channels merged in step order, as CSV with columns
/// step,channel,event,length,hex.
void write_trace_csv(std::ostream& out, const std::vector<const Channel*>& channels);

/// Carries handshake messages as CoAP payloads: messages to the responder
/// travel as confirmable POSTs to "hs" on a_to_b, replies as piggybacked
/// 2.04 acknowledgements on b_to_a.
class LinkHandshakeTransport : public keymgmt::HandshakeTransport {
public:
    explicit LinkHandshakeTransport(Link& link, std::uint16_t first_message_id = 0x7000)
        : link_(link), message_id_(first_message_id) {}

    std::optional<Bytes> carry(keymgmt::Direction direction, ByteView message) override;

private:
    Link& link_;
    std::uint16_t message_id_;
    std::uint16_t pending_request_id_ = 0;
};

}  // namespace blend::simnet
