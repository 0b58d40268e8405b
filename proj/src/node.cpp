#include "blend/node.hpp"

#include <algorithm>
#include <string>

#include "blend/cbor.hpp"
#include "blend/error.hpp"

namespace blend::node {

namespace {

constexpr storage::FileId baseline_first_file = 0x80000000u;

crypto::Nonce local_nonce(std::uint32_t counter) {
    crypto::Nonce n{};
    for (std::size_t i = 0; i < local_counter_size; ++i)
        n[crypto::nonce_size - 1 - i] = static_cast<std::uint8_t>(counter >> (8 * i));
    return n;
}

coap::Message data_request(std::uint16_t message_id, ByteView payload) {
    coap::Message m;
    m.type = coap::MessageType::confirmable;
    m.code = coap::code::post;
    m.message_id = message_id;
    m.token = {static_cast<std::uint8_t>(message_id)};
    m.payload = Bytes(payload.begin(), payload.end());
    return m;
}

}  // namespace

const char* to_string(NodeMode mode) noexcept { return mode == NodeMode::blend ? "blend" : "baseline"; }

NodeMode parse_node_mode(std::string_view name) {
    if (name == "blend") return NodeMode::blend;
    if (name == "baseline") return NodeMode::baseline;
    throw Error(Errc::config, "unknown node mode: " + std::string(name));
}

const char* to_string(Phase phase) noexcept {
    switch (phase) {
        case Phase::idle: return "idle";
        case Phase::accumulating: return "accumulating";
        case Phase::storing: return "storing";
        case Phase::sending: return "sending";
        case Phase::recovering: return "recovering";
    }
    return "?";
}

void NodeConfig::validate() const {
    if (payload_target == 0 || payload_target > max_payload_size) throw Error(Errc::config, "payload_target not in [1, 56]");
    if (batch_capacity == 0) throw Error(Errc::config, "batch capacity must be positive");
    if (send_window == 0 || send_window > oscore::replay_window_width / 2)
        throw Error(Errc::config, "send_window must be in [1, 16]");
    if (connection_id.size() > oscore::max_id_length) throw Error(Errc::config, "connection id too long");
}

SensorNode::SensorNode(crypto::CryptoEngine& engine, storage::FlashDevice& flash, NodeConfig config)
    : engine_(engine),
      config_((config.validate(), std::move(config))),
      files_(flash),
      store_(files_, config_.storage_mode, config_.batch_capacity, config_.udp),
      next_message_id_(config_.first_message_id) {}

void SensorNode::install_bundle(const keymgmt::MasterSecretBundle& bundle) {
    bundle_ = bundle;
    Slot slot{bundle.generation, keymgmt::derive_bundle_context(engine_, bundle, keymgmt::Role::initiator)};
    // An optimized batch header has room for a 24-bit start sequence number,
    // so re-key before reaching it.
    if (config_.storage_mode == storage::StorageMode::optimized)
        slot.ctx.seq_cap = std::min(slot.ctx.seq_cap, storage::max_batch_start_seq);
    contexts_.push_back(std::move(slot));
    if (!local_key_) {
        local_key_ = crypto::AeadKey(engine_.hkdf({}, bundle.master_secret, to_bytes("local-storage"), crypto::key_size));
    }
    recovering_ = false;
    store_.close_batch();
}

void SensorNode::lose_context() {
    contexts_.clear();
    bundle_.reset();
    local_key_.reset();
    pending_.clear();
    recovering_ = true;
    store_.close_batch();
}

ReadingOutcome SensorNode::on_sensor_reading(ByteView reading) {
    if (reading.empty()) throw Error(Errc::invalid_argument, "empty sensor reading");
    if (reading.size() > max_payload_size) throw Error(Errc::invalid_argument, "sensor reading exceeds 56 bytes");

    if (config_.plaintext_buffering == Buffering::forbidden) {
        try {
            precompute_and_store(reading);
        } catch (const Error& e) {
            if (e.code() == Errc::storage_full) return {ReadingStatus::backpressure, std::nullopt};
            throw;
        }
        return {ReadingStatus::stored, Bytes(reading.begin(), reading.end())};
    }

    // Buffered data survives backpressure; the new reading is taken only when
    // it fits in the buffer.
    std::optional<Bytes> stored;
    try {
        if (pending_.size() + reading.size() > max_payload_size) stored = flush();
        append(pending_, reading);
        if (pending_.size() >= config_.payload_target) {
            if (stored) return {ReadingStatus::stored, stored};
            stored = flush();
        }
    } catch (const Error& e) {
        if (e.code() == Errc::storage_full) return {ReadingStatus::backpressure, stored};
        throw;
    }
    return {stored ? ReadingStatus::stored : ReadingStatus::buffered, stored};
}

std::optional<Bytes> SensorNode::flush() {
    if (pending_.empty()) return std::nullopt;
    precompute_and_store(pending_);
    Bytes out;
    out.swap(pending_);
    return out;
}

void SensorNode::precompute_and_store(ByteView payload) {
    if (payload.empty() || payload.size() > max_payload_size)
        throw Error(Errc::invalid_argument, "payload must be 1..56 bytes");
    if (!has_context()) throw Error(Errc::no_context, "no security context");
    if (config_.mode == NodeMode::blend)
        store_blend(payload);
    else
        store_baseline(payload);
}

void SensorNode::ensure_sequence_space() {
    const auto& ctx = contexts_.back().ctx;
    if (ctx.sender_seq >= ctx.seq_cap) refresh();
}

void SensorNode::refresh() {
    if (!bundle_) throw Error(Errc::sequence_exhausted, "sequence space used up and no bundle to refresh from");
    auto r = keymgmt::refresh_context(engine_, *bundle_, keymgmt::Role::initiator);
    bundle_ = r.bundle;
    if (config_.storage_mode == storage::StorageMode::optimized)
        r.context.seq_cap = std::min(r.context.seq_cap, storage::max_batch_start_seq);
    contexts_.push_back({r.bundle.generation, std::move(r.context)});
    ++refreshes_;
    store_.close_batch();
    collect_garbage();
}

void SensorNode::store_blend(ByteView payload) {
    ensure_sequence_space();
    auto& ctx = contexts_.back().ctx;
    const std::uint64_t seq = ctx.sender_seq;
    const Bytes packet = oscore::protect(engine_, ctx, data_request(next_message_id_, payload), seq);
    if (config_.storage_mode == storage::StorageMode::optimized && !store_.fits_open_batch(packet)) store_.close_batch();
    const auto result = store_.store_packet(packet);

    StoredPacket p;
    p.batch = result.batch;
    p.index = result.index;
    p.message_id = next_message_id_++;
    p.seq = seq;
    p.kid = ctx.sender_id;
    p.kid_context = ctx.id_context;
    queue_.push_back(std::move(p));
}

void SensorNode::store_baseline(ByteView payload) {
    if (!local_key_) throw Error(Errc::no_context, "no local storage key");
    if (local_counter_ == UINT32_MAX) throw Error(Errc::sequence_exhausted, "local nonce counter used up");
    const std::uint32_t counter = local_counter_;
    const auto nonce = local_nonce(counter);
    Bytes blob;
    put_be(blob, counter, local_counter_size);
    append(blob, engine_.seal(*local_key_, nonce, {}, payload));

    if (baseline_file_ == 0 || baseline_file_records_ == config_.batch_capacity) {
        baseline_file_ = baseline_first_file + counter;
        baseline_file_records_ = 0;
    }
    const std::size_t offset = files_.exists(baseline_file_) ? files_.size(baseline_file_) : 0;
    files_.append(baseline_file_, blob);
    ++local_counter_;

    StoredPacket p;
    p.batch = baseline_file_;
    p.index = baseline_file_records_++;
    p.blob_offset = offset;
    p.blob_size = blob.size();
    ++baseline_live_[baseline_file_];
    queue_.push_back(std::move(p));
}

SensorNode::Slot* SensorNode::find_slot(ByteView kid, const std::optional<Bytes>& kid_context) {
    for (auto it = contexts_.rbegin(); it != contexts_.rend(); ++it) {
        const auto& c = it->ctx;
        if (std::equal(c.sender_id.begin(), c.sender_id.end(), kid.begin(), kid.end()) && c.id_context == kid_context)
            return &*it;
    }
    return nullptr;
}

Bytes SensorNode::packet_for(StoredPacket& p) {
    if (config_.mode == NodeMode::blend) {
        send_path_reads_ += store_.read_cost(p.batch, p.index);
        return store_.load_packet(p.batch, p.index);
    }
    if (p.built) return *p.built;

    // Baseline: decrypt the local blob, then protect it for the network.
    if (!local_key_ || !has_context()) throw Error(Errc::no_context, "baseline send needs both keys");
    const Bytes blob = files_.read(p.batch, p.blob_offset, p.blob_size);
    send_path_reads_ += blob.size();
    const auto counter = static_cast<std::uint32_t>(get_be(ByteView(blob).first(local_counter_size)));
    const Bytes payload = engine_.open(*local_key_, local_nonce(counter), {}, ByteView(blob).subspan(local_counter_size));
    ensure_sequence_space();
    auto& ctx = contexts_.back().ctx;
    p.seq = ctx.sender_seq;
    p.message_id = next_message_id_++;
    p.kid = ctx.sender_id;
    p.kid_context = ctx.id_context;
    p.built = oscore::protect(engine_, ctx, data_request(p.message_id, payload), *p.seq);
    return *p.built;
}

std::vector<Bytes> SensorNode::send_stored() {
    std::vector<Bytes> out;
    const auto before = engine_.counters();
    if (config_.mode == NodeMode::blend) store_.close_batch();

    // The window is anchored at the oldest unacknowledged sequence number of
    // each context, so a lost packet can never fall behind the collector's
    // replay window while later ones get through.
    using ContextKey = std::pair<Bytes, std::optional<Bytes>>;
    std::map<ContextKey, std::uint64_t> oldest;
    for (const auto& p : queue_) {
        if (p.state != StoredPacket::State::pending || !p.seq) continue;
        auto [it, fresh] = oldest.try_emplace({p.kid, p.kid_context}, *p.seq);
        if (!fresh) it->second = std::min(it->second, *p.seq);
    }
    for (auto& p : queue_) {
        if (p.state != StoredPacket::State::pending || p.sent_this_round) continue;
        if (!p.seq) {
            // Baseline blob not yet protected; it takes the next sequence number.
            if (!has_context()) break;
            const auto& ctx = contexts_.back().ctx;
            auto it = oldest.find({ctx.sender_id, ctx.id_context});
            if (it != oldest.end() && ctx.sender_seq >= it->second + config_.send_window) break;
            out.push_back(packet_for(p));
            oldest.try_emplace({p.kid, p.kid_context}, *p.seq);
        } else {
            if (*p.seq >= oldest.at({p.kid, p.kid_context}) + config_.send_window) continue;
            out.push_back(packet_for(p));
        }
        p.sent_this_round = true;
    }
    send_path_ops_ += engine_.counters() - before;
    return out;
}

std::vector<Bytes> SensorNode::start_round() {
    for (auto& p : queue_) p.sent_this_round = false;
    return send_stored();
}

std::vector<Bytes> SensorNode::on_datagram(ByteView inbound) {
    coap::RawMessage raw;
    try {
        raw = coap::parse_raw(inbound);
    } catch (const Error&) {
        return {};
    }
    if (coap::is_request(raw.header.code)) return on_trigger(inbound);
    if (!coap::is_response(raw.header.code)) return {};
    handle_ack(inbound);
    collect_garbage();
    return send_stored();
}

std::vector<Bytes> SensorNode::on_trigger(ByteView inbound) {
    std::optional<oscore::Unprotected> trigger;
    Slot* slot = nullptr;
    try {
        const auto view = oscore::inspect(inbound);
        // The collector sends under our recipient id.
        for (auto it = contexts_.rbegin(); it != contexts_.rend() && !slot; ++it) {
            const auto& c = it->ctx;
            if (view.option.kid == c.recipient_id && view.option.kid_context == c.id_context) slot = &*it;
        }
        if (slot) trigger = oscore::unprotect(engine_, slot->ctx, inbound);
    } catch (const Error&) {
        trigger.reset();
    }

    if (!trigger) {
        // Recovery: an undecipherable message stands in for the trigger.
        if (recovering_ && config_.recovery_policy == keymgmt::RecoveryPolicy::blind_trigger) return start_round();
        return {};
    }
    if (trigger->message.code != coap::code::post || trigger->message.uri_path != trigger_path) return {};

    ++triggers_accepted_;
    apply_receipts(trigger->message.payload);
    collect_garbage();
    if (!queue_.empty()) return start_round();

    coap::Message reply;
    reply.type = trigger->message.type == coap::MessageType::confirmable ? coap::MessageType::acknowledgement
                                                                         : coap::MessageType::non_confirmable;
    reply.code = coap::code::content;
    reply.message_id = trigger->message.message_id;
    reply.token = trigger->message.token;
    reply.payload = {no_data_payload};
    return {oscore::protect_response(engine_, slot->ctx, reply, trigger->binding)};
}

void SensorNode::handle_ack(ByteView inbound) {
    coap::Header header;
    try {
        header = coap::parse_raw(inbound).header;
    } catch (const Error&) {
        return;
    }
    for (auto& p : queue_) {
        if (p.state != StoredPacket::State::pending || !p.seq || p.message_id != header.message_id) continue;
        if (header.token != Bytes{static_cast<std::uint8_t>(p.message_id)}) continue;
        Slot* slot = find_slot(p.kid, p.kid_context);
        if (!slot) {
            // Without the context the acknowledgement cannot be checked; it
            // only frees the window. Deletion waits for a receipt.
            p.state = StoredPacket::State::released;
            return;
        }
        try {
            const auto reply = oscore::unprotect_response(engine_, slot->ctx, inbound, {p.kid, oscore::encode_piv(*p.seq)});
            if (reply.code == coap::code::changed) acknowledge(p);
        } catch (const Error&) {
        }
        return;
    }
}

void SensorNode::apply_receipts(ByteView payload) {
    std::vector<Receipt> receipts;
    try {
        receipts = decode_receipts(payload);
    } catch (const Error&) {
        return;
    }
    for (const auto& r : receipts)
        for (auto& p : queue_)
            if (p.seq && p.kid == r.kid && p.kid_context == r.kid_context && *p.seq >= r.first && *p.seq <= r.last)
                acknowledge(p);
}

void SensorNode::acknowledge(StoredPacket& p) {
    if (p.state == StoredPacket::State::acknowledged) return;
    p.state = StoredPacket::State::acknowledged;
    if (config_.mode == NodeMode::baseline) --baseline_live_[p.batch];
}

void SensorNode::collect_garbage() {
    std::erase_if(queue_, [](const StoredPacket& p) { return p.state == StoredPacket::State::acknowledged; });

    if (config_.mode == NodeMode::blend) {
        std::vector<storage::FileId> done;
        for (const auto& [id, info] : store_.batches()) {
            if (info.open) continue;
            const bool live = std::any_of(queue_.begin(), queue_.end(), [&](const auto& p) { return p.batch == id; });
            if (!live) done.push_back(id);
        }
        for (auto id : done) store_.remove_batch(id);
    } else {
        for (auto it = baseline_live_.begin(); it != baseline_live_.end();) {
            const bool current = it->first == baseline_file_ && baseline_file_records_ < config_.batch_capacity;
            if (it->second == 0 && !current) {
                files_.remove(it->first);
                if (it->first == baseline_file_) baseline_file_ = 0;
                it = baseline_live_.erase(it);
            } else {
                ++it;
            }
        }
    }

    // Keep the current and previous contexts; older ones only while packets
    // protected under them are still waiting.
    if (contexts_.size() > 2) {
        std::vector<Slot> kept;
        for (std::size_t i = 0; i < contexts_.size(); ++i) {
            const auto& c = contexts_[i].ctx;
            const bool recent = i + 2 >= contexts_.size();
            const bool referenced = std::any_of(queue_.begin(), queue_.end(), [&](const auto& p) {
                return p.kid == c.sender_id && p.kid_context == c.id_context;
            });
            if (recent || referenced) kept.push_back(std::move(contexts_[i]));
        }
        contexts_ = std::move(kept);
    }
}

std::vector<keymgmt::RecoveryAction> SensorNode::recovery_plan(bool undecipherable_inbound) const {
    std::vector<keymgmt::StoredBatchRef> refs;
    for (const auto& p : queue_) {
        if (refs.empty() || refs.back().batch != p.batch) refs.push_back({p.batch, p.kid, 0});
        ++refs.back().packets;
    }
    return keymgmt::recover_after_loss(refs, config_.recovery_policy, undecipherable_inbound);
}

Phase SensorNode::phase() const noexcept {
    if (recovering_) return Phase::recovering;
    const bool in_flight = std::any_of(queue_.begin(), queue_.end(), [](const auto& p) {
        return p.sent_this_round && p.state == StoredPacket::State::pending;
    });
    if (in_flight) return Phase::sending;
    if (!pending_.empty()) return Phase::accumulating;
    return Phase::idle;
}

std::uint64_t SensorNode::stored_bytes() const {
    if (config_.mode == NodeMode::blend) return store_.stored_bytes();
    std::uint64_t total = 0;
    for (const auto& [id, live] : baseline_live_)
        if (files_.exists(id)) total += files_.size(id);
    return total;
}

oscore::SecurityContext* SensorNode::current_context() noexcept {
    return contexts_.empty() ? nullptr : &contexts_.back().ctx;
}

Bytes encode_receipts(const std::vector<Receipt>& receipts) {
    cbor::Item::Array items;
    for (const auto& r : receipts) {
        items.push_back(cbor::Item::array({cbor::Item::bytes(r.kid),
                                           r.kid_context ? cbor::Item::bytes(*r.kid_context) : cbor::Item::null(),
                                           cbor::Item::uint(r.first), cbor::Item::uint(r.last)}));
    }
    return cbor::encode(cbor::Item::array(std::move(items)));
}

std::vector<Receipt> decode_receipts(ByteView payload) {
    std::vector<Receipt> out;
    if (payload.empty()) return out;
    const cbor::Item item = cbor::decode_exact(payload);
    for (const auto& entry : item.as_array()) {
        const auto& f = entry.as_array();
        if (f.size() != 4) throw Error(Errc::cbor_unsupported, "receipt needs four fields");
        Receipt r;
        r.kid = f[0].as_bytes();
        if (f[1].kind() != cbor::Item::Kind::null) r.kid_context = f[1].as_bytes();
        r.first = f[2].as_uint();
        r.last = f[3].as_uint();
        if (r.first > r.last) throw Error(Errc::cbor_unsupported, "receipt range reversed");
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace blend::node
