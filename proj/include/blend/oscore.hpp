#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "blend/bytes.hpp"
#include "blend/coap.hpp"
#include "blend/crypto.hpp"

namespace blend::oscore {

inline constexpr std::int64_t alg_aes_ccm_16_64_128 = 10;
inline constexpr std::uint64_t sequence_cap = 1ULL << 32;
inline constexpr std::uint64_t piv_limit = 1ULL << 40;
inline constexpr std::size_t max_id_length = 7;
inline constexpr std::size_t max_piv_length = 5;
inline constexpr std::size_t replay_window_width = 32;

struct ContextInputs {
    Bytes master_secret;
    Bytes master_salt;
    Bytes sender_id;
    Bytes recipient_id;
    std::optional<Bytes> id_context;
    std::int64_t alg = alg_aes_ccm_16_64_128;
};

/// Sliding window anchored at the highest accepted sequence number. Bit i of
/// the bitmap marks highest - i as seen.
class ReplayWindow {
public:
    bool would_accept(std::uint64_t seq) const noexcept;

    /// Returns false (and leaves the window untouched) for a replay.
    bool accept(std::uint64_t seq) noexcept;

    bool empty() const noexcept { return !highest_; }
    std::optional<std::uint64_t> highest() const noexcept { return highest_; }
    std::uint32_t bitmap() const noexcept { return bitmap_; }

    bool operator==(const ReplayWindow&) const = default;

private:
    std::optional<std::uint64_t> highest_;
    std::uint32_t bitmap_ = 0;
};

std::pair<bool, ReplayWindow> replay_check(const ReplayWindow& window, std::uint64_t seq);

struct SecurityContext {
    crypto::AeadKey sender_key;
    crypto::AeadKey recipient_key;
    crypto::Nonce common_iv{};
    Bytes sender_id;
    Bytes recipient_id;
    std::optional<Bytes> id_context;
    std::int64_t alg = alg_aes_ccm_16_64_128;
    std::uint64_t sender_seq = 0;
    ReplayWindow replay;
    std::uint64_t seq_cap = sequence_cap;

    bool operator==(const SecurityContext&) const = default;
};

SecurityContext derive_context(crypto::CryptoEngine& engine, const ContextInputs& inputs);

/// CBOR info structure [id, id_context / null, alg, type, L] used for key and
/// IV derivation.
Bytes derivation_info(ByteView id, const std::optional<Bytes>& id_context, std::int64_t alg, const char* type,
                      std::size_t length);

/// Minimal big-endian encoding; 0 encodes as a single 0x00.
Bytes encode_piv(std::uint64_t seq);
std::uint64_t decode_piv(ByteView piv);

crypto::Nonce build_nonce(ByteView piv, ByteView piv_owner_id, const crypto::Nonce& common_iv);

/// Enc_structure ["Encrypt0", h'', external_aad] with external_aad =
/// bstr .cbor [1, [alg], request_kid, request_piv, h''].
Bytes build_aad(std::int64_t alg, ByteView request_kid, ByteView request_piv);
Bytes build_external_aad(std::int64_t alg, ByteView request_kid, ByteView request_piv);

/// Decoded value of the OSCORE CoAP option.
struct OptionValue {
    Bytes piv;
    std::optional<Bytes> kid_context;
    std::optional<Bytes> kid;

    std::uint8_t flag_byte() const;
    Bytes encode() const;
    static OptionValue decode(ByteView value);

    bool operator==(const OptionValue&) const = default;
};

/// Builds the OSCORE request as it goes on the wire: outer POST with the
/// OSCORE option as the only outer option, then the ciphertext as payload.
Bytes assemble_request(coap::MessageType type, std::uint16_t message_id, ByteView token,
                       const OptionValue& option_value, ByteView ciphertext);

/// What the receiver of a request must remember to process the response.
struct RequestBinding {
    Bytes kid;
    Bytes piv;
    bool operator==(const RequestBinding&) const = default;
};

/// Encrypts `msg` as an OSCORE request under `seq`. Requires
/// ctx.sender_seq <= seq < ctx.seq_cap; afterwards ctx.sender_seq == seq + 1.
/// Throws Errc::sequence_exhausted at the cap; the caller must re-key.
Bytes protect(crypto::CryptoEngine& engine, SecurityContext& ctx, const coap::Message& msg, std::uint64_t seq);

/// Protects with the context's next sequence number.
Bytes protect_next(crypto::CryptoEngine& engine, SecurityContext& ctx, const coap::Message& msg);

struct Unprotected {
    coap::Message message;
    std::uint64_t seq = 0;
    RequestBinding binding;
};

/// Request receive path: kid match, replay check, AEAD open, then the window
/// is updated. Errors: no_context, replay, authentication, oscore_parse.
Unprotected unprotect(crypto::CryptoEngine& engine, SecurityContext& ctx, ByteView packet);

/// Responses carry no Partial IV; nonce and AAD come from the request.
Bytes protect_response(crypto::CryptoEngine& engine, const SecurityContext& ctx, const coap::Message& response,
                       const RequestBinding& request);
coap::Message unprotect_response(crypto::CryptoEngine& engine, const SecurityContext& ctx, ByteView packet,
                                 const RequestBinding& request);

/// Outer header and OSCORE option of a packet, without decrypting.
struct PacketView {
    coap::Header header;
    OptionValue option;
    Bytes ciphertext;
};

/// Throws Errc::oscore_parse when the packet isn't an OSCORE message.
PacketView inspect(ByteView packet);

}  // namespace blend::oscore
