#include "blend/packet_store.hpp"

#include "blend/error.hpp"
#include "blend/oscore.hpp"

namespace blend::storage {

const char* to_string(StorageMode mode) noexcept {
    switch (mode) {
        case StorageMode::full_udp: return "full_udp";
        case StorageMode::full_oscore: return "full_oscore";
        case StorageMode::optimized: return "optimized";
    }
    return "?";
}

StorageMode parse_storage_mode(std::string_view name) {
    if (name == "full_udp" || name == "udp") return StorageMode::full_udp;
    if (name == "full_oscore" || name == "oscore") return StorageMode::full_oscore;
    if (name == "optimized") return StorageMode::optimized;
    throw Error(Errc::config, "unknown storage mode '" + std::string(name) + "'");
}

Bytes BatchHeader::encode() const {
    Bytes out;
    put_be(out, start_message_id, 2);
    out.push_back(start_token);
    put_be(out, start_seq, 3);
    put_be(out, record_len, 2);
    return out;
}

BatchHeader BatchHeader::decode(ByteView data) {
    if (data.size() < batch_header_size) throw Error(Errc::end_of_data, "truncated batch header");
    BatchHeader h;
    h.start_message_id = static_cast<std::uint16_t>(get_be(data.subspan(0, 2)));
    h.start_token = data[2];
    h.start_seq = static_cast<std::uint32_t>(get_be(data.subspan(3, 3)));
    h.record_len = static_cast<std::uint16_t>(get_be(data.subspan(6, 2)));
    return h;
}

namespace {

constexpr std::uint8_t next_header_udp = 17;

std::uint16_t udp_checksum(const UdpEndpoints& ep, ByteView udp) {
    Bytes pseudo(ep.source.begin(), ep.source.end());
    pseudo.insert(pseudo.end(), ep.destination.begin(), ep.destination.end());
    put_be(pseudo, udp.size(), 4);
    pseudo.insert(pseudo.end(), {0, 0, 0, next_header_udp});
    append(pseudo, udp);
    if (pseudo.size() % 2) pseudo.push_back(0);
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i < pseudo.size(); i += 2) sum += static_cast<std::uint32_t>((pseudo[i] << 8) | pseudo[i + 1]);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    const auto result = static_cast<std::uint16_t>(~sum & 0xffff);
    return result == 0 ? 0xffff : result;
}

}  // namespace

Bytes udp_header(const UdpEndpoints& ep, ByteView payload) {
    const std::size_t length = udp_header_size + payload.size();
    if (length > 0xffff) throw Error(Errc::invalid_argument, "UDP datagram too long");
    Bytes datagram;
    put_be(datagram, ep.source_port, 2);
    put_be(datagram, ep.destination_port, 2);
    put_be(datagram, length, 2);
    put_be(datagram, 0, 2);
    append(datagram, payload);
    const std::uint16_t sum = udp_checksum(ep, datagram);
    return Bytes{datagram[0], datagram[1], datagram[2], datagram[3], datagram[4], datagram[5],
                 static_cast<std::uint8_t>(sum >> 8), static_cast<std::uint8_t>(sum & 0xff)};
}

bool udp_checksum_ok(const UdpEndpoints& ep, ByteView datagram) {
    if (datagram.size() < udp_header_size) return false;
    if (get_be(datagram.subspan(4, 2)) != datagram.size()) return false;
    Bytes zeroed(datagram.begin(), datagram.end());
    zeroed[6] = zeroed[7] = 0;
    return udp_checksum(ep, zeroed) == get_be(datagram.subspan(6, 2));
}

double storage_overhead(StorageMode mode, std::size_t payload_len, std::size_t batch_capacity) {
    if (payload_len > 56) throw Error(Errc::invalid_argument, "payload length must be at most 56");
    const auto p = static_cast<double>(payload_len);
    switch (mode) {
        case StorageMode::full_oscore: return p + 21;
        case StorageMode::full_udp: return p + 21 + udp_header_size;
        case StorageMode::optimized:
            if (batch_capacity == 0) throw Error(Errc::invalid_argument, "batch capacity must be positive");
            // code + empty Uri-Path + payload marker, then the MIC.
            return p + 3 + 8 + static_cast<double>(batch_header_size) / static_cast<double>(batch_capacity);
    }
    return 0;
}

struct PacketStore::Parsed {
    coap::MessageType type;
    std::uint16_t message_id;
    Bytes token;
    std::uint64_t seq;
    StaticFields fields;
    Bytes ciphertext;
};

PacketStore::PacketStore(FileStore& files, StorageMode mode, std::size_t batch_capacity, UdpEndpoints udp,
                         FileId first_file)
    : files_(files), mode_(mode), capacity_(batch_capacity), udp_(udp), next_file_(first_file) {
    if (batch_capacity == 0) throw Error(Errc::invalid_argument, "batch capacity must be positive");
}

PacketStore::Parsed PacketStore::parse_for_store(ByteView packet) const {
    auto view = oscore::inspect(packet);
    if (!coap::is_request(view.header.code) || !view.option.kid || view.option.piv.empty())
        throw Error(Errc::invalid_argument, "stored packets must be OSCORE requests");
    return {view.header.type,
            view.header.message_id,
            std::move(view.header.token),
            oscore::decode_piv(view.option.piv),
            {view.header.type, *view.option.kid, view.option.kid_context},
            std::move(view.ciphertext)};
}

bool PacketStore::extends(const BatchInfo& b, const Parsed& p) const {
    if (b.count >= capacity_) return false;
    if (mode_ != StorageMode::optimized) return true;
    const auto i = b.count;
    return p.fields == b.fields && p.ciphertext.size() == b.record_len && p.token.size() == 1 &&
           p.message_id == static_cast<std::uint16_t>(b.start.start_message_id + i) &&
           p.token[0] == static_cast<std::uint8_t>(b.start.start_token + i) && p.seq == b.start.start_seq + i;
}

bool PacketStore::fits_open_batch(ByteView packet) const {
    if (!open_batch_) return false;
    return extends(batches_.at(*open_batch_), parse_for_store(packet));
}

void PacketStore::close_batch() {
    if (open_batch_) batches_.at(*open_batch_).open = false;
    open_batch_.reset();
}

PacketStore::StoreResult PacketStore::store_packet(ByteView packet) {
    Parsed p = parse_for_store(packet);

    if (open_batch_) {
        BatchInfo& b = batches_.at(*open_batch_);
        if (b.count >= capacity_) {
            close_batch();
        } else if (!extends(b, p)) {
            throw Error(Errc::batch_mismatch, "packet does not continue the open batch");
        }
    }

    Bytes bytes;
    if (!open_batch_) {
        BatchInfo fresh;
        fresh.file = next_file_;
        fresh.fields = p.fields;
        fresh.record_len = p.ciphertext.size();
        fresh.start.start_message_id = p.message_id;
        fresh.start.start_token = p.token.empty() ? 0 : p.token[0];
        fresh.start.start_seq = static_cast<std::uint32_t>(p.seq & 0xffffff);
        fresh.start.record_len = static_cast<std::uint16_t>(p.ciphertext.size());
        if (mode_ == StorageMode::optimized) {
            if (p.token.size() != 1) throw Error(Errc::batch_mismatch, "optimized storage needs 1-byte tokens");
            if (p.seq >= max_batch_start_seq) throw Error(Errc::batch_mismatch, "start sequence exceeds 24 bits");
            if (p.ciphertext.size() > 0xffff) throw Error(Errc::batch_mismatch, "record too long");
            bytes = fresh.start.encode();
        }
        // Write before registering so a full device leaves no empty batch.
        if (mode_ == StorageMode::optimized) append(bytes, p.ciphertext);
        else if (mode_ == StorageMode::full_udp) bytes = concat(udp_header(udp_, packet), packet);
        else bytes.assign(packet.begin(), packet.end());
        files_.append(fresh.file, bytes);
        if (mode_ != StorageMode::optimized) fresh.offsets.push_back(0);
        fresh.count = 1;
        ++next_file_;
        open_batch_ = fresh.file;
        batches_.emplace(fresh.file, std::move(fresh));
        return {bytes.size(), *open_batch_, 0};
    }

    BatchInfo* batch = &batches_.at(*open_batch_);
    if (mode_ == StorageMode::optimized) bytes = p.ciphertext;
    else if (mode_ == StorageMode::full_udp) bytes = concat(udp_header(udp_, packet), packet);
    else bytes.assign(packet.begin(), packet.end());
    const std::size_t offset = files_.size(batch->file);
    files_.append(batch->file, bytes);
    if (mode_ != StorageMode::optimized) batch->offsets.push_back(offset);
    const std::size_t index = batch->count++;
    return {bytes.size(), batch->file, index};
}

PacketStore::Cursor PacketStore::begin() const {
    for (const auto& [id, b] : batches_)
        if (b.count > 0) return {id, 0};
    return {next_file_, 0};
}

bool PacketStore::at_end(const Cursor& c) const {
    auto it = batches_.lower_bound(c.batch);
    while (it != batches_.end() && (it->first == c.batch ? c.index >= it->second.count : it->second.count == 0)) ++it;
    return it == batches_.end();
}

Bytes PacketStore::rebuild(const BatchInfo& b, const BatchHeader& h, std::size_t index, ByteView record) const {
    const auto mid = static_cast<std::uint16_t>(h.start_message_id + index);
    const Bytes token{static_cast<std::uint8_t>(h.start_token + index)};
    const std::uint64_t seq = std::uint64_t{h.start_seq} + index;
    oscore::OptionValue ov{oscore::encode_piv(seq), b.fields.kid_context, b.fields.kid};
    return oscore::assemble_request(b.fields.type, mid, token, ov, record);
}

Bytes PacketStore::load_packet(FileId batch, std::size_t index) const {
    auto it = batches_.find(batch);
    if (it == batches_.end() || index >= it->second.count) throw Error(Errc::end_of_data, "no such stored packet");
    const BatchInfo& b = it->second;
    switch (mode_) {
        case StorageMode::optimized: {
            const BatchHeader h = BatchHeader::decode(files_.read(b.file, 0, batch_header_size));
            const Bytes record = files_.read(b.file, batch_header_size + index * h.record_len, h.record_len);
            return rebuild(b, h, index, record);
        }
        case StorageMode::full_udp: {
            Bytes datagram = load_datagram(batch, index);
            if (!udp_checksum_ok(udp_, datagram)) throw Error(Errc::batch_mismatch, "stored UDP checksum mismatch");
            return Bytes(datagram.begin() + udp_header_size, datagram.end());
        }
        case StorageMode::full_oscore: {
            const std::size_t end = index + 1 < b.count ? b.offsets[index + 1] : files_.size(b.file);
            return files_.read(b.file, b.offsets[index], end - b.offsets[index]);
        }
    }
    return {};
}

Bytes PacketStore::load_datagram(FileId batch, std::size_t index) const {
    if (mode_ != StorageMode::full_udp) throw Error(Errc::invalid_argument, "not a full_udp store");
    auto it = batches_.find(batch);
    if (it == batches_.end() || index >= it->second.count) throw Error(Errc::end_of_data, "no such stored packet");
    const BatchInfo& b = it->second;
    const Bytes head = files_.read(b.file, b.offsets[index], udp_header_size);
    const auto length = static_cast<std::size_t>(get_be(ByteView(head).subspan(4, 2)));
    return files_.read(b.file, b.offsets[index], length);
}

Bytes PacketStore::load_next_packet(Cursor& c) const {
    auto it = batches_.lower_bound(c.batch);
    if (it != batches_.end() && it->first == c.batch && c.index >= it->second.count) ++it, c.index = 0;
    while (it != batches_.end() && it->second.count == 0) ++it;
    if (it == batches_.end()) throw Error(Errc::end_of_data, "no more stored packets");
    if (it->first != c.batch) {
        c.batch = it->first;
        c.index = 0;
    }
    Bytes packet = load_packet(c.batch, c.index);
    ++c.index;
    return packet;
}

void PacketStore::remove_batch(FileId batch) {
    auto it = batches_.find(batch);
    if (it == batches_.end()) return;
    files_.remove(it->second.file);
    if (open_batch_ == batch) open_batch_.reset();
    batches_.erase(it);
}

std::size_t PacketStore::packet_count() const {
    std::size_t n = 0;
    for (const auto& [id, b] : batches_) n += b.count;
    return n;
}

std::uint64_t PacketStore::stored_bytes() const {
    std::uint64_t n = 0;
    for (const auto& [id, b] : batches_) n += files_.size(b.file);
    return n;
}

std::size_t PacketStore::read_cost(FileId batch, std::size_t index) const {
    const BatchInfo& b = batches_.at(batch);
    if (mode_ == StorageMode::optimized) return b.record_len + (index == 0 ? batch_header_size : 0);
    if (mode_ == StorageMode::full_udp) return load_datagram(batch, index).size();
    const std::size_t end = index + 1 < b.count ? b.offsets[index + 1] : files_.size(b.file);
    return end - b.offsets[index];
}

}  // namespace blend::storage
