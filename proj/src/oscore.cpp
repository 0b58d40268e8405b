#include "blend/oscore.hpp"

#include "blend/cbor.hpp"
#include "blend/error.hpp"

namespace blend::oscore {

namespace {

constexpr std::uint8_t flag_kid = 0x08;
constexpr std::uint8_t flag_kid_context = 0x10;
constexpr std::uint8_t flag_piv_mask = 0x07;
constexpr std::uint8_t flag_reserved = 0xe0;

void check_id(ByteView id, const char* what) {
    if (id.size() > max_id_length) throw Error(Errc::invalid_argument, std::string(what) + " longer than 7 bytes");
}

}  // namespace

bool ReplayWindow::would_accept(std::uint64_t seq) const noexcept {
    if (!highest_ || seq > *highest_) return true;
    const std::uint64_t offset = *highest_ - seq;
    if (offset >= replay_window_width) return false;
    return (bitmap_ & (1u << offset)) == 0;
}

bool ReplayWindow::accept(std::uint64_t seq) noexcept {
    if (!would_accept(seq)) return false;
    if (!highest_) {
        highest_ = seq;
        bitmap_ = 1;
    } else if (seq > *highest_) {
        const std::uint64_t shift = seq - *highest_;
        bitmap_ = shift >= replay_window_width ? 0 : bitmap_ << shift;
        bitmap_ |= 1;
        highest_ = seq;
    } else {
        bitmap_ |= 1u << (*highest_ - seq);
    }
    return true;
}

std::pair<bool, ReplayWindow> replay_check(const ReplayWindow& window, std::uint64_t seq) {
    ReplayWindow updated = window;
    const bool ok = updated.accept(seq);
    return {ok, updated};
}

Bytes derivation_info(ByteView id, const std::optional<Bytes>& id_context, std::int64_t alg, const char* type,
                      std::size_t length) {
    using cbor::Item;
    return cbor::encode(Item::array({
        Item::bytes(id),
        id_context ? Item::bytes(*id_context) : Item::null(),
        Item::uint(static_cast<std::uint64_t>(alg)),
        Item::text(type),
        Item::uint(length),
    }));
}

SecurityContext derive_context(crypto::CryptoEngine& engine, const ContextInputs& in) {
    if (in.alg != alg_aes_ccm_16_64_128) throw Error(Errc::invalid_argument, "only AES-CCM-16-64-128 is supported");
    if (in.master_secret.size() < 16) throw Error(Errc::invalid_argument, "master secret shorter than 16 bytes");
    check_id(in.sender_id, "sender id");
    check_id(in.recipient_id, "recipient id");
    if (in.sender_id == in.recipient_id) throw Error(Errc::invalid_argument, "sender and recipient id must differ");

    SecurityContext ctx;
    ctx.sender_id = in.sender_id;
    ctx.recipient_id = in.recipient_id;
    ctx.id_context = in.id_context;
    ctx.alg = in.alg;
    ctx.sender_key = crypto::AeadKey(engine.hkdf(
        in.master_salt, in.master_secret, derivation_info(in.sender_id, in.id_context, in.alg, "Key", crypto::key_size),
        crypto::key_size));
    ctx.recipient_key = crypto::AeadKey(engine.hkdf(
        in.master_salt, in.master_secret,
        derivation_info(in.recipient_id, in.id_context, in.alg, "Key", crypto::key_size), crypto::key_size));
    const Bytes iv = engine.hkdf(in.master_salt, in.master_secret,
                                 derivation_info({}, in.id_context, in.alg, "IV", crypto::nonce_size),
                                 crypto::nonce_size);
    std::copy(iv.begin(), iv.end(), ctx.common_iv.begin());
    return ctx;
}

Bytes encode_piv(std::uint64_t seq) {
    if (seq >= piv_limit) throw Error(Errc::invalid_argument, "sequence number does not fit a 5-byte Partial IV");
    Bytes out;
    std::size_t width = 1;
    while (width < max_piv_length && (seq >> (8 * width)) != 0) ++width;
    put_be(out, seq, width);
    return out;
}

std::uint64_t decode_piv(ByteView piv) {
    if (piv.empty() || piv.size() > max_piv_length) throw Error(Errc::oscore_parse, "Partial IV must be 1..5 bytes");
    return get_be(piv);
}

crypto::Nonce build_nonce(ByteView piv, ByteView piv_owner_id, const crypto::Nonce& common_iv) {
    if (piv.size() > max_piv_length) throw Error(Errc::invalid_argument, "Partial IV longer than 5 bytes");
    check_id(piv_owner_id, "id");
    crypto::Nonce nonce{};
    nonce[0] = static_cast<std::uint8_t>(piv_owner_id.size());
    std::copy(piv_owner_id.begin(), piv_owner_id.end(), nonce.begin() + 1 + (max_id_length - piv_owner_id.size()));
    std::copy(piv.begin(), piv.end(), nonce.end() - static_cast<std::ptrdiff_t>(piv.size()));
    for (std::size_t i = 0; i < nonce.size(); ++i) nonce[i] ^= common_iv[i];
    return nonce;
}

Bytes build_external_aad(std::int64_t alg, ByteView request_kid, ByteView request_piv) {
    using cbor::Item;
    return cbor::encode(Item::array({
        Item::uint(1),
        Item::array({Item::uint(static_cast<std::uint64_t>(alg))}),
        Item::bytes(request_kid),
        Item::bytes(request_piv),
        Item::bytes(Bytes{}),
    }));
}

Bytes build_aad(std::int64_t alg, ByteView request_kid, ByteView request_piv) {
    using cbor::Item;
    return cbor::encode(Item::array({
        Item::text("Encrypt0"),
        Item::bytes(Bytes{}),
        Item::bytes(build_external_aad(alg, request_kid, request_piv)),
    }));
}

std::uint8_t OptionValue::flag_byte() const {
    if (piv.size() > max_piv_length) throw Error(Errc::invalid_argument, "Partial IV longer than 5 bytes");
    std::uint8_t flags = static_cast<std::uint8_t>(piv.size());
    if (kid) flags |= flag_kid;
    if (kid_context) flags |= flag_kid_context;
    return flags;
}

Bytes OptionValue::encode() const {
    const std::uint8_t flags = flag_byte();
    Bytes out;
    if (flags == 0) return out;
    out.push_back(flags);
    append(out, piv);
    if (kid_context) {
        if (kid_context->size() > 255) throw Error(Errc::invalid_argument, "kid context longer than 255 bytes");
        out.push_back(static_cast<std::uint8_t>(kid_context->size()));
        append(out, *kid_context);
    }
    if (kid) append(out, *kid);
    return out;
}

OptionValue OptionValue::decode(ByteView value) {
    OptionValue ov;
    if (value.empty()) return ov;
    const std::uint8_t flags = value[0];
    if (flags & flag_reserved) throw Error(Errc::oscore_parse, "reserved OSCORE flag bits set");
    const std::size_t n = flags & flag_piv_mask;
    if (n > max_piv_length) throw Error(Errc::oscore_parse, "reserved Partial IV length");
    std::size_t pos = 1;
    if (value.size() < pos + n) throw Error(Errc::oscore_parse, "truncated Partial IV");
    ov.piv.assign(value.begin() + 1, value.begin() + 1 + static_cast<std::ptrdiff_t>(n));
    pos += n;
    if (flags & flag_kid_context) {
        if (pos >= value.size()) throw Error(Errc::oscore_parse, "truncated kid context length");
        const std::size_t s = value[pos++];
        if (value.size() < pos + s) throw Error(Errc::oscore_parse, "truncated kid context");
        ov.kid_context = Bytes(value.begin() + static_cast<std::ptrdiff_t>(pos),
                               value.begin() + static_cast<std::ptrdiff_t>(pos + s));
        pos += s;
    }
    if (flags & flag_kid) {
        ov.kid = Bytes(value.begin() + static_cast<std::ptrdiff_t>(pos), value.end());
        if (ov.kid->size() > max_id_length) throw Error(Errc::oscore_parse, "kid longer than 7 bytes");
    } else if (pos != value.size()) {
        throw Error(Errc::oscore_parse, "trailing bytes in OSCORE option");
    }
    return ov;
}

Bytes assemble_request(coap::MessageType type, std::uint16_t message_id, ByteView token,
                       const OptionValue& option_value, ByteView ciphertext) {
    coap::RawMessage outer;
    outer.header = {type, coap::code::post, message_id, Bytes(token.begin(), token.end())};
    outer.options.push_back({coap::option::oscore, option_value.encode()});
    outer.payload.assign(ciphertext.begin(), ciphertext.end());
    return coap::serialize_raw(outer);
}

Bytes protect(crypto::CryptoEngine& engine, SecurityContext& ctx, const coap::Message& msg, std::uint64_t seq) {
    if (!coap::is_request(msg.code)) throw Error(Errc::invalid_argument, "protect() takes requests");
    if (seq >= ctx.seq_cap) throw Error(Errc::sequence_exhausted, "sequence number " + std::to_string(seq) + " at cap");
    if (seq < ctx.sender_seq) throw Error(Errc::invalid_argument, "sequence number already used");

    const Bytes piv = encode_piv(seq);
    const auto nonce = build_nonce(piv, ctx.sender_id, ctx.common_iv);
    const Bytes aad = build_aad(ctx.alg, ctx.sender_id, piv);
    const Bytes ciphertext = engine.seal(ctx.sender_key, nonce, aad, coap::inner_plaintext(msg));
    ctx.sender_seq = seq + 1;

    OptionValue ov{piv, ctx.id_context, ctx.sender_id};
    return assemble_request(msg.type, msg.message_id, msg.token, ov, ciphertext);
}

Bytes protect_next(crypto::CryptoEngine& engine, SecurityContext& ctx, const coap::Message& msg) {
    return protect(engine, ctx, msg, ctx.sender_seq);
}

PacketView inspect(ByteView packet) {
    coap::RawMessage raw;
    try {
        raw = coap::parse_raw(packet);
    } catch (const Error& e) {
        throw Error(Errc::oscore_parse, e.what());
    }
    if (raw.options.size() != 1 || raw.options[0].number != coap::option::oscore)
        throw Error(Errc::oscore_parse, "expected exactly one outer option (OSCORE)");
    if (raw.payload.empty()) throw Error(Errc::oscore_parse, "OSCORE message without ciphertext");
    return {std::move(raw.header), OptionValue::decode(raw.options[0].value), std::move(raw.payload)};
}

Unprotected unprotect(crypto::CryptoEngine& engine, SecurityContext& ctx, ByteView packet) {
    PacketView view = inspect(packet);
    if (!coap::is_request(view.header.code)) throw Error(Errc::oscore_parse, "not a request");
    if (!view.option.kid || view.option.piv.empty()) throw Error(Errc::oscore_parse, "request lacks kid or Partial IV");
    if (*view.option.kid != ctx.recipient_id || view.option.kid_context != ctx.id_context)
        throw Error(Errc::no_context, "no context for kid " + to_hex(*view.option.kid));

    const std::uint64_t seq = decode_piv(view.option.piv);
    if (!ctx.replay.would_accept(seq)) throw Error(Errc::replay, "sequence number " + std::to_string(seq));

    const auto nonce = build_nonce(view.option.piv, ctx.recipient_id, ctx.common_iv);
    const Bytes aad = build_aad(ctx.alg, ctx.recipient_id, view.option.piv);
    const Bytes inner = engine.open(ctx.recipient_key, nonce, aad, view.ciphertext);

    Unprotected out;
    try {
        out.message = coap::from_inner(inner, view.header.type, view.header.message_id, view.header.token);
    } catch (const Error& e) {
        throw Error(Errc::oscore_parse, std::string("inner message: ") + e.what());
    }
    ctx.replay.accept(seq);
    out.seq = seq;
    out.binding = {ctx.recipient_id, view.option.piv};
    return out;
}

Bytes protect_response(crypto::CryptoEngine& engine, const SecurityContext& ctx, const coap::Message& response,
                       const RequestBinding& request) {
    if (!coap::is_response(response.code)) throw Error(Errc::invalid_argument, "protect_response() takes responses");
    const auto nonce = build_nonce(request.piv, request.kid, ctx.common_iv);
    const Bytes aad = build_aad(ctx.alg, request.kid, request.piv);
    const Bytes ciphertext = engine.seal(ctx.sender_key, nonce, aad, coap::inner_plaintext(response));

    coap::RawMessage outer;
    outer.header = {response.type, coap::code::changed, response.message_id, response.token};
    outer.options.push_back({coap::option::oscore, OptionValue{}.encode()});
    outer.payload = ciphertext;
    return coap::serialize_raw(outer);
}

coap::Message unprotect_response(crypto::CryptoEngine& engine, const SecurityContext& ctx, ByteView packet,
                                 const RequestBinding& request) {
    PacketView view = inspect(packet);
    if (!coap::is_response(view.header.code)) throw Error(Errc::oscore_parse, "not a response");
    if (!view.option.piv.empty() || view.option.kid)
        throw Error(Errc::oscore_parse, "responses with their own Partial IV are not used");
    const auto nonce = build_nonce(request.piv, request.kid, ctx.common_iv);
    const Bytes aad = build_aad(ctx.alg, request.kid, request.piv);
    const Bytes inner = engine.open(ctx.recipient_key, nonce, aad, view.ciphertext);
    try {
        return coap::from_inner(inner, view.header.type, view.header.message_id, view.header.token);
    } catch (const Error& e) {
        throw Error(Errc::oscore_parse, std::string("inner message: ") + e.what());
    }
}

}  // namespace blend::oscore
