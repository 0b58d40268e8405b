#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "blend/keymgmt.hpp"
#include "blend/mule.hpp"
#include "blend/node.hpp"
#include "blend/simnet.hpp"

namespace blend::scenario {

/// Line-oriented key=value file; '#' starts a comment. Keys:
///   name, nodes, readings, reading_size, payload_target,
///   buffering (allowed|forbidden), node_mode (blend|baseline),
///   storage_mode (full_udp|full_oscore|optimized), batch,
///   loss, dup, reorder, seed, collect_every, context_loss_after,
///   recovery_policy (request_reauth|blind_trigger), max_rounds,
///   blind_rounds, initial_seq, trace (true|false)
struct ScenarioConfig {
    std::string name = "scenario";
    std::size_t nodes = 1;
    std::size_t readings = 25;
    std::size_t reading_size = 6;
    std::size_t payload_target = 48;
    node::Buffering buffering = node::Buffering::forbidden;
    node::NodeMode node_mode = node::NodeMode::blend;
    storage::StorageMode storage_mode = storage::StorageMode::optimized;
    std::size_t batch = storage::default_batch_capacity;
    simnet::ChannelConfig channel;
    /// Mule visit after every this many readings; 0 means one visit at the end.
    std::size_t collect_every = 0;
    /// The nodes lose their contexts after this many readings.
    std::optional<std::size_t> context_loss_after;
    keymgmt::RecoveryPolicy recovery_policy = keymgmt::RecoveryPolicy::request_reauth;
    std::size_t max_rounds = 200;
    std::size_t blind_rounds = 3;
    /// Starting sender sequence number of each node's first context.
    std::uint64_t initial_seq = 0;
    bool trace = false;

    void validate() const;
};

ScenarioConfig parse_scenario(std::istream& in);
ScenarioConfig load_scenario(const std::string& path);

struct NodeReport {
    std::string node;
    std::size_t stored = 0;
    std::uint64_t stored_payload_bytes = 0;
    std::size_t collected = 0;
    std::size_t duplicates = 0;
    std::size_t left_on_node = 0;
    /// Packets collected under the context that was later lost, and under
    /// contexts established afterwards.
    std::size_t collected_old_context = 0;
    std::size_t collected_new_context = 0;
    std::size_t stored_before_loss = 0;
    std::uint64_t flash_bytes_written = 0;
    crypto::CryptoCounters node_ops;
    crypto::CryptoCounters send_path_ops;
    std::uint64_t send_path_flash_reads = 0;
    std::uint64_t refreshes = 0;
};

struct ScenarioReport {
    ScenarioConfig config;
    std::vector<NodeReport> nodes;
    std::vector<mule::ReceivedPacket> received;
    std::vector<std::string> violations;
    std::size_t rounds = 0;
    std::string trace_csv;

    bool ok() const noexcept { return violations.empty(); }
};

/// Handshake, sensing, storage, trigger and collection over simnet, then the
/// end-to-end invariants: every stored payload collected exactly once, with
/// the right bytes, and no packet left behind.
ScenarioReport run_scenario(const ScenarioConfig& config);

}  // namespace blend::scenario
