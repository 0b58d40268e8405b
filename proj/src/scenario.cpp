#include "blend/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "blend/error.hpp"

namespace blend::scenario {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::uint64_t to_uint(const std::string& v, const std::string& key) {
    std::size_t used = 0;
    try {
        if (!v.empty() && v[0] != '-') {
            const auto out = std::stoull(v, &used, 0);
            if (used == v.size()) return out;
        }
    } catch (const std::exception&) {
    }
    throw Error(Errc::config, key + ": expected a non-negative integer, got '" + v + "'");
}

double to_double(const std::string& v, const std::string& key) {
    std::size_t used = 0;
    try {
        const double out = std::stod(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw Error(Errc::config, key + ": expected a number, got '" + v + "'");
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error(Errc::config, key + ": expected true or false, got '" + v + "'");
}

node::Buffering to_buffering(const std::string& v) {
    if (v == "allowed") return node::Buffering::allowed;
    if (v == "forbidden") return node::Buffering::forbidden;
    throw Error(Errc::config, "buffering: expected allowed or forbidden, got '" + v + "'");
}

using PacketKey = std::tuple<Bytes, std::optional<Bytes>, std::uint64_t>;

struct Rig {
    std::string name;
    crypto::CryptoEngine engine;
    std::shared_ptr<const crypto::SigningKey> key;
    storage::FlashDevice flash;
    std::unique_ptr<node::SensorNode> node;
    std::unique_ptr<simnet::Link> link;
    std::mt19937_64 readings;
    std::vector<Bytes> expected;
    std::map<PacketKey, Bytes> expected_by_key;
    std::set<std::pair<Bytes, std::optional<Bytes>>> lost_contexts;
    std::size_t stored_before_loss = 0;
    bool alive = true;

    Rig() : flash(storage::default_page_size, storage::default_page_count) {}
};

class Runner {
public:
    explicit Runner(const ScenarioConfig& config)
        : config_(config), mule_key_(std::make_shared<crypto::SigningKey>(mule_engine_.generate_signing_key())),
          mule_(mule_engine_, mule_key_) {
        report_.config = config;
    }

    ScenarioReport run();

private:
    void handshake(Rig& rig);
    void pump(Rig& rig);
    bool collect(Rig& rig);
    void visit(Rig& rig);
    void reading(Rig& rig);
    void record_stored(Rig& rig, const Bytes& payload);
    void verify(Rig& rig);
    void violation(const Rig& rig, const std::string& what) { report_.violations.push_back(rig.name + ": " + what); }

    const ScenarioConfig& config_;
    crypto::CryptoEngine mule_engine_;
    std::shared_ptr<const crypto::SigningKey> mule_key_;
    mule::DataMule mule_;
    std::vector<std::unique_ptr<Rig>> rigs_;
    ScenarioReport report_;
};

void Runner::handshake(Rig& rig) {
    try {
        keymgmt::HandshakeInitiator initiator(rig.engine, {rig.key, mule_.public_key()},
                                              rig.node->config().connection_id);
        auto responder = mule_.begin_handshake(rig.name);
        simnet::LinkHandshakeTransport transport(*rig.link);
        const auto result = keymgmt::run_handshake(initiator, responder, transport, 32);
        if (!(result.initiator_bundle == result.responder_bundle)) violation(rig, "handshake bundles differ");
        rig.node->install_bundle(result.initiator_bundle);
        mule_.install_bundle(rig.name, result.responder_bundle);
    } catch (const Error& e) {
        violation(rig, std::string("handshake failed: ") + e.what());
        rig.alive = false;
    }
}

void Runner::pump(Rig& rig) {
    auto& up = rig.link->a_to_b();
    auto& down = rig.link->b_to_a();
    for (std::size_t guard = 0; !rig.link->idle(); ++guard) {
        if (guard > 1'000'000) throw Error(Errc::transport, "exchange did not settle");
        while (auto d = down.receive())
            for (auto& out : rig.node->on_datagram(*d)) up.send(out);
        while (auto d = up.receive())
            for (auto& out : mule_.on_datagram(rig.name, *d)) down.send(out);
    }
}

bool Runner::collect(Rig& rig) {
    for (std::size_t round = 0; round < config_.max_rounds; ++round) {
        ++report_.rounds;
        rig.link->b_to_a().send(mule_.send_trigger(rig.name));
        pump(rig);
        if (mule_.transfer_complete(rig.name)) return true;
    }
    return false;
}

void Runner::visit(Rig& rig) {
    if (!rig.alive) return;
    if (!rig.node->has_context()) {
        if (config_.recovery_policy == keymgmt::RecoveryPolicy::blind_trigger) {
            // The mule still triggers under the context the node lost.
            for (std::size_t i = 0; i < config_.blind_rounds; ++i) {
                ++report_.rounds;
                rig.link->b_to_a().send(mule_.send_trigger(rig.name));
                pump(rig);
            }
        }
        handshake(rig);
        if (!rig.alive) return;
    }
    if (!collect(rig)) violation(rig, "collection did not finish within max_rounds");
}

void Runner::reading(Rig& rig) {
    if (!rig.alive) return;
    Bytes r(config_.reading_size);
    for (auto& b : r) b = static_cast<std::uint8_t>(rig.readings());
    const auto outcome = rig.node->on_sensor_reading(r);
    if (outcome.status == node::ReadingStatus::backpressure) violation(rig, "storage full");
    if (outcome.stored_payload) record_stored(rig, *outcome.stored_payload);
}

void Runner::record_stored(Rig& rig, const Bytes& payload) {
    rig.expected.push_back(payload);
    // Blend packets have their sequence number from the moment they are stored.
    const auto& p = rig.node->stored_packets().back();
    if (p.seq) rig.expected_by_key[{p.kid, p.kid_context, *p.seq}] = payload;
}

void Runner::verify(Rig& rig) {
    NodeReport nr;
    nr.node = rig.name;
    nr.stored = rig.expected.size();
    for (const auto& e : rig.expected) nr.stored_payload_bytes += e.size();
    nr.stored_before_loss = rig.stored_before_loss;

    std::set<PacketKey> keys;
    std::vector<Bytes> got;
    for (const auto& r : mule_.received()) {
        if (r.node != rig.name) continue;
        ++nr.collected;
        if (!keys.insert({r.kid, r.kid_context, r.seq}).second) ++nr.duplicates;
        if (rig.lost_contexts.count({r.kid, r.kid_context}))
            ++nr.collected_old_context;
        else
            ++nr.collected_new_context;
        got.push_back(r.payload);
        if (!rig.expected_by_key.empty()) {
            auto it = rig.expected_by_key.find({r.kid, r.kid_context, r.seq});
            if (it == rig.expected_by_key.end())
                violation(rig, "collected a packet that was never stored (seq " + std::to_string(r.seq) + ")");
            else if (it->second != r.payload)
                violation(rig, "payload mismatch at seq " + std::to_string(r.seq));
        }
    }
    if (nr.duplicates) violation(rig, std::to_string(nr.duplicates) + " duplicate deliveries");

    const bool ideal = config_.channel.loss_prob == 0 && config_.channel.dup_prob == 0 && config_.channel.reorder_window == 0;
    if (ideal && got != rig.expected) violation(rig, "payloads not collected in order");
    auto sorted_got = got;
    auto sorted_expected = rig.expected;
    std::sort(sorted_got.begin(), sorted_got.end());
    std::sort(sorted_expected.begin(), sorted_expected.end());
    if (sorted_got != sorted_expected)
        violation(rig, "collected " + std::to_string(got.size()) + " payloads, expected " +
                           std::to_string(rig.expected.size()));

    nr.left_on_node = rig.node->stored_packet_count();
    if (nr.left_on_node) violation(rig, std::to_string(nr.left_on_node) + " packets still on the node");
    if (config_.context_loss_after) {
        if (nr.collected_old_context != rig.stored_before_loss)
            violation(rig, "old-context packets collected: " + std::to_string(nr.collected_old_context) + " of " +
                               std::to_string(rig.stored_before_loss));
        if (nr.collected_new_context != nr.stored - rig.stored_before_loss)
            violation(rig, "new-context packets collected: " + std::to_string(nr.collected_new_context));
    }

    nr.flash_bytes_written = rig.flash.write_byte_count();
    nr.node_ops = rig.engine.counters();
    nr.send_path_ops = rig.node->send_path_counters();
    nr.send_path_flash_reads = rig.node->send_path_flash_reads();
    nr.refreshes = rig.node->refreshes();
    report_.nodes.push_back(std::move(nr));
}

ScenarioReport Runner::run() {
    for (std::size_t i = 0; i < config_.nodes; ++i) {
        auto rig = std::make_unique<Rig>();
        rig->name = "node" + std::to_string(i);
        rig->key = std::make_shared<crypto::SigningKey>(rig->engine.generate_signing_key());
        node::NodeConfig nc;
        nc.payload_target = config_.payload_target;
        nc.storage_mode = config_.storage_mode;
        nc.plaintext_buffering = config_.buffering;
        nc.mode = config_.node_mode;
        nc.batch_capacity = config_.batch;
        nc.recovery_policy = config_.recovery_policy;
        nc.first_message_id = static_cast<std::uint16_t>(0x1000 * i);
        rig->node = std::make_unique<node::SensorNode>(rig->engine, rig->flash, nc);
        simnet::ChannelConfig cc = config_.channel;
        cc.seed = config_.channel.seed + 0x1000193ULL * i;
        rig->link = std::make_unique<simnet::Link>(cc, rig->name);
        rig->link->a_to_b().enable_trace(config_.trace);
        rig->link->b_to_a().enable_trace(config_.trace);
        rig->readings.seed(cc.seed ^ 0x5eed5eedULL);
        mule_.add_node(rig->name, rig->key->public_key());
        handshake(*rig);
        if (rig->alive && config_.initial_seq) rig->node->current_context()->sender_seq = config_.initial_seq;
        rigs_.push_back(std::move(rig));
    }

    for (std::size_t j = 0; j < config_.readings; ++j) {
        for (auto& rig : rigs_) reading(*rig);
        const std::size_t done = j + 1;
        if (config_.context_loss_after && done == *config_.context_loss_after) {
            for (auto& rig : rigs_) {
                for (const auto& p : rig->node->stored_packets()) rig->lost_contexts.insert({p.kid, p.kid_context});
                rig->stored_before_loss = rig->expected.size();
                rig->node->lose_context();
                visit(*rig);
            }
        } else if (config_.collect_every && done % config_.collect_every == 0 && done != config_.readings) {
            for (auto& rig : rigs_) visit(*rig);
        }
    }
    for (auto& rig : rigs_) {
        if (rig->alive && rig->node->has_context()) {
            if (auto p = rig->node->flush()) record_stored(*rig, *p);
        }
        visit(*rig);
    }
    for (auto& rig : rigs_) verify(*rig);

    report_.received = mule_.received();
    if (config_.trace) {
        std::ostringstream out;
        std::vector<const simnet::Channel*> channels;
        for (auto& rig : rigs_) {
            channels.push_back(&rig->link->a_to_b());
            channels.push_back(&rig->link->b_to_a());
        }
        simnet::write_trace_csv(out, channels);
        report_.trace_csv = out.str();
    }
    return std::move(report_);
}

}  // namespace

void ScenarioConfig::validate() const {
    channel.validate();
    if (nodes == 0) throw Error(Errc::config, "nodes must be positive");
    if (reading_size == 0 || reading_size > node::max_payload_size) throw Error(Errc::config, "reading_size not in [1, 56]");
    if (payload_target == 0 || payload_target > node::max_payload_size)
        throw Error(Errc::config, "payload_target not in [1, 56]");
    if (batch == 0) throw Error(Errc::config, "batch must be positive");
    if (max_rounds == 0) throw Error(Errc::config, "max_rounds must be positive");
    if (context_loss_after) {
        if (node_mode != node::NodeMode::blend)
            throw Error(Errc::config, "context loss recovery needs node_mode=blend; baseline blobs die with the key");
        if (*context_loss_after == 0 || *context_loss_after > readings)
            throw Error(Errc::config, "context_loss_after must be in [1, readings]");
    }
    if (initial_seq >= oscore::sequence_cap) throw Error(Errc::config, "initial_seq beyond the sequence cap");
}

ScenarioConfig parse_scenario(std::istream& in) {
    ScenarioConfig c;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(Errc::config, "line " + std::to_string(number) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "name") c.name = value;
            else if (key == "nodes") c.nodes = to_uint(value, key);
            else if (key == "readings") c.readings = to_uint(value, key);
            else if (key == "reading_size") c.reading_size = to_uint(value, key);
            else if (key == "payload_target") c.payload_target = to_uint(value, key);
            else if (key == "buffering") c.buffering = to_buffering(value);
            else if (key == "node_mode") c.node_mode = node::parse_node_mode(value);
            else if (key == "storage_mode") c.storage_mode = storage::parse_storage_mode(value);
            else if (key == "batch") c.batch = to_uint(value, key);
            else if (key == "loss") c.channel.loss_prob = to_double(value, key);
            else if (key == "dup") c.channel.dup_prob = to_double(value, key);
            else if (key == "reorder") c.channel.reorder_window = to_uint(value, key);
            else if (key == "seed") c.channel.seed = to_uint(value, key);
            else if (key == "collect_every") c.collect_every = to_uint(value, key);
            else if (key == "context_loss_after") c.context_loss_after = to_uint(value, key);
            else if (key == "recovery_policy") c.recovery_policy = keymgmt::parse_recovery_policy(value);
            else if (key == "max_rounds") c.max_rounds = to_uint(value, key);
            else if (key == "blind_rounds") c.blind_rounds = to_uint(value, key);
            else if (key == "initial_seq") c.initial_seq = to_uint(value, key);
            else if (key == "trace") c.trace = to_bool(value, key);
            else throw Error(Errc::config, "unknown key '" + key + "'");
        } catch (const Error& e) {
            // Drop the category prefix so it is not repeated.
            std::string what = e.what();
            const std::string prefix = std::string(to_string(e.code())) + ": ";
            if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
            throw Error(Errc::config, "line " + std::to_string(number) + ": " + what);
        }
    }
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::config, "cannot open scenario file " + path);
    return parse_scenario(in);
}

ScenarioReport run_scenario(const ScenarioConfig& config) {
    config.validate();
    return Runner(config).run();
}

}  // namespace blend::scenario
