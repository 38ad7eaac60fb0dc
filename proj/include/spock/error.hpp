#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spock {

enum class ErrorCode {
    usage,
    parse,
    not_found,
    ambiguous,
    integrity,
    signature_invalid,
    rebuild_denied,
    purged,
    already_registered,
    untrusted_signer,
    parent_rejected,
    duplicate_entity,
    already_purged,
    already_distrusted,
    ledger_exists,
    engine,
    io,
    crypto,
};

/// Stable, greppable token printed by the CLI for each error code.
std::string_view error_token(ErrorCode code);

/// Process exit status the CLI uses for an error code.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view token() const { return error_token(code_); }

private:
    ErrorCode code_;
};

} // namespace spock
