#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "blend/node.hpp"
#include "blend/packet_store.hpp"
#include "blend/scenario.hpp"

namespace blend::bench {

/// Per-operation costs, all supplied by the user. There are no defaults: a
/// file must set every field.
struct CostModel {
    double aead_per_byte_us = 0;
    double aead_fixed_us = 0;
    double flash_write_per_byte_us = 0;
    double flash_read_per_byte_us = 0;
    double cpu_current_mA = 0;
    double flash_current_mA = 0;
    double voltage_V = 0;

    static CostModel parse(std::istream& in);
    static CostModel load(const std::string& path);
};

/// What a workload did, in units a cost model can price.
struct Work {
    std::uint64_t aead_ops = 0;
    std::uint64_t aead_bytes = 0;
    std::uint64_t flash_read_bytes = 0;
    std::uint64_t flash_write_bytes = 0;
};

struct Estimate {
    double time_us = 0;
    double energy_uJ = 0;
};

Estimate estimate(const CostModel& model, const Work& work);

/// Columns: scenario,payload_len,mode,stored_bytes,overhead_pct,seal_ops,
/// open_ops,flash_bytes_rw,est_time_us,est_energy_uJ,delta_bytes. Empty cells
/// mean "not applicable".
struct BenchRow {
    std::string scenario;
    std::size_t payload_len = 0;
    std::string mode;
    double stored_bytes = 0;
    double overhead_pct = 0;
    std::optional<std::uint64_t> seal_ops;
    std::optional<std::uint64_t> open_ops;
    std::optional<std::uint64_t> flash_bytes_rw;
    std::optional<double> est_time_us;
    std::optional<double> est_energy_uJ;
    std::optional<double> delta_bytes;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    void write_csv(std::ostream& out) const;
};

inline constexpr const char* csv_header =
    "scenario,payload_len,mode,stored_bytes,overhead_pct,seal_ops,open_ops,flash_bytes_rw,est_time_us,"
    "est_energy_uJ,delta_bytes";

std::vector<std::size_t> default_payloads();
std::vector<std::size_t> parse_payloads(const std::string& list);

/// DTLS 1.2 record with AES-CCM-8: 13-byte header, 8-byte explicit nonce,
/// 8-byte tag.
inline constexpr std::size_t dtls_record_overhead = 13 + 8 + 8;

/// Per-packet stored bytes for each storage mode, measured by storing
/// batch_capacity packets and checked against the closed form. Rows are per
/// packet; flash_bytes_rw is the flash write per packet.
BenchReport bench_storage(const std::vector<std::size_t>& payloads, std::size_t batch_capacity,
                          const std::vector<storage::StorageMode>& modes);

/// Stores n packets, then collects them over a loss-free link and reports
/// the send-path work as totals over the n packets. stored_bytes is the
/// total on flash before sending; flash_bytes_rw counts flash reads on the
/// send path. Time and energy appear only with a cost model.
BenchReport bench_send_path(std::size_t n_packets, const std::vector<std::size_t>& payloads,
                            const std::vector<node::NodeMode>& modes, storage::StorageMode storage_mode,
                            std::size_t batch_capacity, const std::optional<CostModel>& model,
                            std::uint64_t seed = 1);

/// Record sizes for DTLS and OSCORE; the OSCORE size is measured from a
/// protected packet. Payloads must be in [6, 51].
BenchReport bench_dtls_compare(const std::vector<std::size_t>& payloads);

/// One row per node. Totals over the run; stored_bytes is flash written.
BenchReport scenario_rows(const scenario::ScenarioReport& report, const std::optional<CostModel>& model);

}  // namespace blend::bench
