#pragma once

#include <stdexcept>
#include <string>

namespace blend {

enum class Errc {
    invalid_argument,
    cbor_encoding,
    cbor_truncated,
    cbor_non_canonical,
    cbor_unsupported,
    authentication,
    coap_invalid,
    coap_parse,
    oscore_parse,
    sequence_exhausted,
    replay,
    no_context,
    flash_violation,
    storage_full,
    batch_mismatch,
    end_of_data,
    handshake_abort,
    transport,
    config,
    crypto_backend,
};

const char* to_string(Errc code) noexcept;

/// Every failure in the library is reported as an Error carrying a code;
/// callers that care about the category switch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace blend
