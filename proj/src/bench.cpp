#include "blend/bench.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "blend/error.hpp"
#include "blend/oscore.hpp"

namespace blend::bench {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Up to four decimals, trailing zeros dropped.
std::string number(double v) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << v;
    std::string s = out.str();
    if (s.find('.') != std::string::npos) {
        s.erase(s.find_last_not_of('0') + 1);
        if (s.back() == '.') s.pop_back();
    }
    return s == "-0" ? "0" : s;
}

template <typename T>
std::string cell(const std::optional<T>& v) {
    if (!v) return {};
    if constexpr (std::is_floating_point_v<T>)
        return number(*v);
    else
        return std::to_string(*v);
}

void check_payloads(const std::vector<std::size_t>& payloads, std::size_t lo, std::size_t hi) {
    for (auto p : payloads)
        if (p < lo || p > hi)
            throw Error(Errc::config, "payload " + std::to_string(p) + " outside [" + std::to_string(lo) + ", " +
                                          std::to_string(hi) + "]");
}

oscore::ContextInputs bench_inputs() {
    oscore::ContextInputs in;
    in.master_secret = from_hex("000102030405060708090a0b0c0d0e0f");
    in.master_salt = from_hex("a0a1a2a3a4a5a6a7");
    in.sender_id = {0x42};
    in.recipient_id = {0x01};
    return in;
}

coap::Message reading(std::size_t len, std::size_t i) {
    coap::Message m;
    m.message_id = static_cast<std::uint16_t>(0x100 + i);
    m.token = {static_cast<std::uint8_t>(i)};
    m.payload = Bytes(len, static_cast<std::uint8_t>(i));
    return m;
}

double overhead_pct(double stored, double payload) { return payload > 0 ? (stored - payload) / payload * 100.0 : 0; }

}  // namespace

CostModel CostModel::parse(std::istream& in) {
    CostModel m;
    const std::map<std::string, double CostModel::*> fields{
        {"aead_per_byte_us", &CostModel::aead_per_byte_us},
        {"aead_fixed_us", &CostModel::aead_fixed_us},
        {"flash_write_per_byte_us", &CostModel::flash_write_per_byte_us},
        {"flash_read_per_byte_us", &CostModel::flash_read_per_byte_us},
        {"cpu_current_mA", &CostModel::cpu_current_mA},
        {"flash_current_mA", &CostModel::flash_current_mA},
        {"voltage_V", &CostModel::voltage_V},
    };
    std::map<std::string, bool> seen;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(Errc::config, "cost model line " + std::to_string(n) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = fields.find(key);
        if (it == fields.end()) throw Error(Errc::config, "cost model: unknown key '" + key + "'");
        double v = 0;
        std::size_t used = 0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != value.size() || value.empty() || !std::isfinite(v) || v < 0)
            throw Error(Errc::config, "cost model: " + key + " must be a non-negative number");
        m.*(it->second) = v;
        seen[key] = true;
    }
    for (const auto& [key, member] : fields)
        if (!seen[key]) throw Error(Errc::config, "cost model: missing " + key);
    return m;
}

CostModel CostModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::config, "cannot open cost model " + path);
    return parse(in);
}

Estimate estimate(const CostModel& m, const Work& w) {
    const double aead_us = m.aead_fixed_us * w.aead_ops + m.aead_per_byte_us * w.aead_bytes;
    const double flash_us = m.flash_read_per_byte_us * w.flash_read_bytes + m.flash_write_per_byte_us * w.flash_write_bytes;
    // mA * V = mW, and mW * us = nJ.
    const double energy_nJ = m.voltage_V * (m.cpu_current_mA * aead_us + m.flash_current_mA * flash_us);
    return {aead_us + flash_us, energy_nJ / 1000.0};
}

void BenchReport::write_csv(std::ostream& out) const {
    out << csv_header << '\n';
    for (const auto& r : rows) {
        out << r.scenario << ',' << r.payload_len << ',' << r.mode << ',' << number(r.stored_bytes) << ','
            << number(r.overhead_pct) << ',' << cell(r.seal_ops) << ',' << cell(r.open_ops) << ','
            << cell(r.flash_bytes_rw) << ',' << cell(r.est_time_us) << ',' << cell(r.est_energy_uJ) << ','
            << cell(r.delta_bytes) << '\n';
    }
}

std::vector<std::size_t> default_payloads() { return {6, 16, 26, 36, 46, 56}; }

std::vector<std::size_t> parse_payloads(const std::string& list) {
    std::vector<std::size_t> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            if (!item.empty() && item[0] != '-') v = std::stoul(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw Error(Errc::config, "bad payload length '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw Error(Errc::config, "empty payload list");
    return out;
}

BenchReport bench_storage(const std::vector<std::size_t>& payloads, std::size_t batch_capacity,
                          const std::vector<storage::StorageMode>& modes) {
    check_payloads(payloads, 6, 56);
    if (batch_capacity == 0) throw Error(Errc::config, "batch capacity must be positive");
    BenchReport report;
    for (auto p : payloads) {
        for (auto mode : modes) {
            crypto::CryptoEngine engine;
            auto ctx = oscore::derive_context(engine, bench_inputs());
            storage::FlashDevice flash;
            storage::FileStore files(flash);
            storage::PacketStore store(files, mode, batch_capacity);
            for (std::size_t i = 0; i < batch_capacity; ++i) store.store_packet(oscore::protect(engine, ctx, reading(p, i), i));
            const double measured = static_cast<double>(store.stored_bytes()) / static_cast<double>(batch_capacity);
            const double closed = storage::storage_overhead(mode, p, batch_capacity);
            if (std::abs(measured - closed) > 1e-9)
                throw Error(Errc::invalid_argument, "stored bytes disagree with the closed form");
            BenchRow row;
            row.scenario = "storage";
            row.payload_len = p;
            row.mode = storage::to_string(mode);
            row.stored_bytes = measured;
            row.overhead_pct = overhead_pct(measured, static_cast<double>(p));
            report.rows.push_back(row);
        }
    }
    return report;
}

BenchReport bench_send_path(std::size_t n_packets, const std::vector<std::size_t>& payloads,
                            const std::vector<node::NodeMode>& modes, storage::StorageMode storage_mode,
                            std::size_t batch_capacity, const std::optional<CostModel>& model, std::uint64_t seed) {
    check_payloads(payloads, 1, 56);
    if (n_packets == 0) throw Error(Errc::config, "need at least one packet");
    BenchReport report;
    for (auto p : payloads) {
        for (auto mode : modes) {
            scenario::ScenarioConfig sc;
            sc.name = "sendpath";
            sc.readings = n_packets;
            sc.reading_size = p;
            sc.buffering = node::Buffering::forbidden;
            sc.node_mode = mode;
            sc.storage_mode = storage_mode;
            sc.batch = batch_capacity;
            sc.channel.seed = seed;
            const auto run = scenario::run_scenario(sc);
            if (!run.ok()) throw Error(Errc::transport, "send-path run failed: " + run.violations.front());
            const auto& nr = run.nodes.front();

            BenchRow row;
            row.scenario = "sendpath";
            row.payload_len = p;
            row.mode = node::to_string(mode);
            row.stored_bytes = static_cast<double>(nr.flash_bytes_written);
            row.overhead_pct = overhead_pct(row.stored_bytes, static_cast<double>(nr.stored_payload_bytes));
            row.seal_ops = nr.send_path_ops.seal_count;
            row.open_ops = nr.send_path_ops.open_count;
            row.flash_bytes_rw = nr.send_path_flash_reads;
            if (model) {
                const auto e = estimate(*model, {nr.send_path_ops.seal_count + nr.send_path_ops.open_count,
                                                 nr.send_path_ops.aead_bytes, nr.send_path_flash_reads, 0});
                row.est_time_us = e.time_us;
                row.est_energy_uJ = e.energy_uJ;
            }
            report.rows.push_back(row);
        }
    }
    return report;
}

BenchReport bench_dtls_compare(const std::vector<std::size_t>& payloads) {
    check_payloads(payloads, 6, 51);
    BenchReport report;
    crypto::CryptoEngine engine;
    auto ctx = oscore::derive_context(engine, bench_inputs());
    for (auto p : payloads) {
        const double oscore_len = static_cast<double>(oscore::protect(engine, ctx, reading(p, 0x13), ctx.sender_seq).size());
        const double dtls_len = static_cast<double>(p + dtls_record_overhead);
        for (const auto& [mode, len] : {std::pair{"dtls", dtls_len}, std::pair{"oscore", oscore_len}}) {
            BenchRow row;
            row.scenario = "dtls";
            row.payload_len = p;
            row.mode = mode;
            row.stored_bytes = len;
            row.overhead_pct = overhead_pct(len, static_cast<double>(p));
            row.delta_bytes = dtls_len - oscore_len;
            report.rows.push_back(row);
        }
    }
    return report;
}

BenchReport scenario_rows(const scenario::ScenarioReport& run, const std::optional<CostModel>& model) {
    BenchReport report;
    const auto& c = run.config;
    for (const auto& nr : run.nodes) {
        BenchRow row;
        row.scenario = c.name + ":" + nr.node;
        row.payload_len = c.buffering == node::Buffering::forbidden ? c.reading_size : c.payload_target;
        row.mode = node::to_string(c.node_mode);
        row.stored_bytes = static_cast<double>(nr.flash_bytes_written);
        row.overhead_pct = overhead_pct(row.stored_bytes, static_cast<double>(nr.stored_payload_bytes));
        row.seal_ops = nr.node_ops.seal_count;
        row.open_ops = nr.node_ops.open_count;
        row.flash_bytes_rw = nr.flash_bytes_written + nr.send_path_flash_reads;
        if (model) {
            const auto e = estimate(*model, {nr.node_ops.seal_count + nr.node_ops.open_count, nr.node_ops.aead_bytes,
                                             nr.send_path_flash_reads, nr.flash_bytes_written});
            row.est_time_us = e.time_us;
            row.est_energy_uJ = e.energy_uJ;
        }
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace blend::bench
