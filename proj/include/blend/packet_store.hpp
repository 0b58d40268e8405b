#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string_view>

#include "blend/coap.hpp"
#include "blend/flash.hpp"

namespace blend::storage {

enum class StorageMode { full_udp, full_oscore, optimized };

const char* to_string(StorageMode mode) noexcept;
StorageMode parse_storage_mode(std::string_view name);

inline constexpr std::size_t default_batch_capacity = 25;
/// message id (2) + token (1) + start sequence number (3).
inline constexpr std::size_t header_fields_size = 6;
/// header_fields_size plus the 2-byte record length.
inline constexpr std::size_t batch_header_size = 8;
inline constexpr std::size_t udp_header_size = 8;
inline constexpr std::uint64_t max_batch_start_seq = 1ULL << 24;

/// On-flash layout: [mid 2B BE][token 1B][seq 3B BE][record_len 2B BE].
struct BatchHeader {
    std::uint16_t start_message_id = 0;
    std::uint8_t start_token = 0;
    std::uint32_t start_seq = 0;
    std::uint16_t record_len = 0;

    Bytes encode() const;
    static BatchHeader decode(ByteView data);
    bool operator==(const BatchHeader&) const = default;
};

struct UdpEndpoints {
    std::array<std::uint8_t, 16> source{};
    std::array<std::uint8_t, 16> destination{};
    std::uint16_t source_port = 5683;
    std::uint16_t destination_port = 5683;
};

/// UDP header for `payload` with the checksum over the IPv6 pseudo-header.
Bytes udp_header(const UdpEndpoints& endpoints, ByteView payload);
bool udp_checksum_ok(const UdpEndpoints& endpoints, ByteView datagram);

/// Non-secret per-batch values needed to rebuild packet headers. They are
/// kept with the batch catalog and survive loss of the security context.
struct StaticFields {
    coap::MessageType type = coap::MessageType::confirmable;
    Bytes kid;
    std::optional<Bytes> kid_context;
    bool operator==(const StaticFields&) const = default;
};

struct BatchInfo {
    FileId file = 0;
    StaticFields fields;
    std::size_t count = 0;
    std::size_t record_len = 0;  // ciphertext bytes per record, MIC included
    BatchHeader start;
    std::vector<std::size_t> offsets;  // full modes only: packet offsets in the file
    bool open = true;
};

/// Closed-form stored bytes per packet for a 1-byte Partial IV, 1-byte kid
/// and token, and the empty root path.
double storage_overhead(StorageMode mode, std::size_t payload_len,
                        std::size_t batch_capacity = default_batch_capacity);

/// Precomputed OSCORE packets on flash in one of three layouts. full_oscore
/// stores packets as-is; full_udp prefixes the UDP header; optimized keeps one
/// header per batch followed by ciphertext records, and rebuilds each packet
/// from the header counters when it is loaded.
class PacketStore {
public:
    PacketStore(FileStore& files, StorageMode mode, std::size_t batch_capacity = default_batch_capacity,
                UdpEndpoints udp = {}, FileId first_file = 1);

    struct StoreResult {
        std::size_t bytes_used = 0;
        FileId batch = 0;
        std::size_t index = 0;
    };

    /// Takes a packet produced by oscore::protect. Throws Errc::batch_mismatch
    /// when it cannot extend the open optimized batch.
    StoreResult store_packet(ByteView packet);

    /// Whether store_packet would append to the open batch instead of failing.
    bool fits_open_batch(ByteView packet) const;

    /// Subsequent packets go to a new batch; partial batches keep the same format.
    void close_batch();

    struct Cursor {
        FileId batch = 0;
        std::size_t index = 0;
        bool operator==(const Cursor&) const = default;
    };

    Cursor begin() const;
    bool at_end(const Cursor& cursor) const;

    /// Returns the serialized OSCORE packet at the cursor and advances it.
    /// Throws Errc::end_of_data past the last packet.
    Bytes load_next_packet(Cursor& cursor) const;
    Bytes load_packet(FileId batch, std::size_t index) const;

    /// full_udp only: the stored datagram including the UDP header.
    Bytes load_datagram(FileId batch, std::size_t index) const;

    void remove_batch(FileId batch);

    StorageMode mode() const noexcept { return mode_; }
    std::size_t batch_capacity() const noexcept { return capacity_; }
    const std::map<FileId, BatchInfo>& batches() const noexcept { return batches_; }
    std::size_t packet_count() const;
    std::uint64_t stored_bytes() const;
    /// Bytes read from flash to load the given packet (header included for the
    /// first record of an optimized batch).
    std::size_t read_cost(FileId batch, std::size_t index) const;

private:
    struct Parsed;
    Parsed parse_for_store(ByteView packet) const;
    bool extends(const BatchInfo& batch, const Parsed& p) const;
    Bytes rebuild(const BatchInfo& batch, const BatchHeader& header, std::size_t index, ByteView record) const;

    FileStore& files_;
    StorageMode mode_;
    std::size_t capacity_;
    UdpEndpoints udp_;
    FileId next_file_;
    std::optional<FileId> open_batch_;
    std::map<FileId, BatchInfo> batches_;
};

}  // namespace blend::storage
