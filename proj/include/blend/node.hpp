#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "blend/keymgmt.hpp"
#include "blend/oscore.hpp"
#include "blend/packet_store.hpp"

namespace blend::node {

enum class NodeMode { blend, baseline };
enum class Buffering { allowed, forbidden };
enum class Phase { idle, accumulating, storing, sending, recovering };

const char* to_string(NodeMode mode) noexcept;
NodeMode parse_node_mode(std::string_view name);
const char* to_string(Phase phase) noexcept;

inline constexpr std::size_t max_payload_size = 56;
inline constexpr std::size_t local_counter_size = 4;
inline constexpr std::uint8_t no_data_payload = 0x00;
inline constexpr std::string_view trigger_path = "collect";

struct NodeConfig {
    std::size_t payload_target = 48;
    storage::StorageMode storage_mode = storage::StorageMode::optimized;
    Buffering plaintext_buffering = Buffering::allowed;
    NodeMode mode = NodeMode::blend;
    std::size_t batch_capacity = storage::default_batch_capacity;
    /// Maximum stored packets in flight without an acknowledgement. Keeping
    /// it well below the 32-entry replay window means a retransmission can
    /// never fall behind the collector's window.
    std::size_t send_window = 16;
    keymgmt::RecoveryPolicy recovery_policy = keymgmt::RecoveryPolicy::request_reauth;
    /// Our handshake connection id; it becomes the collector's sender id.
    Bytes connection_id{0x01};
    storage::UdpEndpoints udp;
    std::uint16_t first_message_id = 0;

    /// Throws Errc::config.
    void validate() const;
};

enum class ReadingStatus { buffered, stored, backpressure };

struct ReadingOutcome {
    ReadingStatus status = ReadingStatus::buffered;
    /// The payload that went into a packet, when one was stored.
    std::optional<Bytes> stored_payload;
};

/// One stored packet as seen from outside the crypto: enough to rebuild or
/// forward it and to match its acknowledgement.
struct StoredPacket {
    storage::FileId batch = 0;
    std::size_t index = 0;
    std::uint16_t message_id = 0;
    // Known at store time in blend mode, at first transmission in baseline
    // mode.
    std::optional<std::uint64_t> seq;
    Bytes kid;
    std::optional<Bytes> kid_context;
    enum class State { pending, released, acknowledged } state = State::pending;
    bool sent_this_round = false;
    // Baseline mode: local blob location and the packet built on first send.
    std::size_t blob_offset = 0;
    std::size_t blob_size = 0;
    std::optional<Bytes> built;
};

/// Sensor node: buffers readings, precomputes and stores OSCORE packets, and
/// streams them as a client when an authorized trigger arrives. Baseline mode
/// keeps AEAD-at-rest blobs instead and protects them at send time.
class SensorNode {
public:
    SensorNode(crypto::CryptoEngine& engine, storage::FlashDevice& flash, NodeConfig config);

    const NodeConfig& config() const noexcept { return config_; }

    /// Installs a fresh handshake result; the node is always the initiator.
    void install_bundle(const keymgmt::MasterSecretBundle& bundle);

    /// Forgets all keying material. Stored packets stay on flash.
    void lose_context();
    bool has_context() const noexcept { return !contexts_.empty(); }

    ReadingOutcome on_sensor_reading(ByteView reading);
    /// Stores whatever is buffered. Returns the stored payload, if any.
    std::optional<Bytes> flush();

    /// One AEAD seal per call in either mode. Re-keys from the bundle when the
    /// sequence space is used up.
    void precompute_and_store(ByteView payload);

    /// Entry point for every inbound datagram: triggers and acknowledgements.
    std::vector<Bytes> on_datagram(ByteView inbound);
    std::vector<Bytes> on_trigger(ByteView inbound);

    /// Emits stored packets that fit in the send window and have not gone out
    /// in the current round. No AEAD work in blend mode.
    std::vector<Bytes> send_stored();

    std::vector<keymgmt::RecoveryAction> recovery_plan(bool undecipherable_inbound) const;

    Phase phase() const noexcept;
    std::size_t stored_packet_count() const noexcept { return queue_.size(); }
    std::size_t pending_plaintext_size() const noexcept { return pending_.size(); }
    const std::deque<StoredPacket>& stored_packets() const noexcept { return queue_; }
    const storage::PacketStore& packet_store() const noexcept { return store_; }
    const storage::FileStore& files() const noexcept { return files_; }

    /// AEAD work done inside send_stored() since construction.
    const crypto::CryptoCounters& send_path_counters() const noexcept { return send_path_ops_; }
    /// Flash bytes read on the send path.
    std::uint64_t send_path_flash_reads() const noexcept { return send_path_reads_; }
    /// Bytes of stored data currently on flash.
    std::uint64_t stored_bytes() const;

    /// Current sending context, for inspection and tests.
    oscore::SecurityContext* current_context() noexcept;
    const std::optional<keymgmt::MasterSecretBundle>& bundle() const noexcept { return bundle_; }
    std::uint64_t triggers_accepted() const noexcept { return triggers_accepted_; }
    std::uint64_t refreshes() const noexcept { return refreshes_; }

private:
    struct Slot {
        std::uint32_t generation = 0;
        oscore::SecurityContext ctx;
    };

    void store_blend(ByteView payload);
    void store_baseline(ByteView payload);
    void ensure_sequence_space();
    void refresh();
    Slot* find_slot(ByteView kid, const std::optional<Bytes>& kid_context);
    Bytes packet_for(StoredPacket& p);
    void handle_ack(ByteView inbound);
    void apply_receipts(ByteView payload);
    void acknowledge(StoredPacket& p);
    void collect_garbage();
    std::vector<Bytes> start_round();

    crypto::CryptoEngine& engine_;
    NodeConfig config_;
    storage::FileStore files_;
    storage::PacketStore store_;
    std::optional<keymgmt::MasterSecretBundle> bundle_;
    std::vector<Slot> contexts_;  // back() is current
    Bytes pending_;
    std::deque<StoredPacket> queue_;
    std::uint16_t next_message_id_;
    bool recovering_ = false;
    bool sending_ = false;

    // Baseline local storage.
    std::optional<crypto::AeadKey> local_key_;
    std::uint32_t local_counter_ = 0;
    storage::FileId baseline_file_ = 0;
    std::size_t baseline_file_records_ = 0;
    std::map<storage::FileId, std::size_t> baseline_live_;

    crypto::CryptoCounters send_path_ops_;
    std::uint64_t send_path_reads_ = 0;
    std::uint64_t triggers_accepted_ = 0;
    std::uint64_t refreshes_ = 0;
};

/// Trigger payload entries: the collector's receipts for contexts the node
/// may no longer hold. Encoded as a CBOR array of [kid, kid_context / null,
/// first_seq, last_seq].
struct Receipt {
    Bytes kid;
    std::optional<Bytes> kid_context;
    std::uint64_t first = 0;
    std::uint64_t last = 0;
    bool operator==(const Receipt&) const = default;
};

Bytes encode_receipts(const std::vector<Receipt>& receipts);
std::vector<Receipt> decode_receipts(ByteView payload);

}  // namespace blend::node
