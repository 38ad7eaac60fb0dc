#include <spock/error.hpp>

namespace spock {

std::string_view error_token(ErrorCode code) {
    switch (code) {
    case ErrorCode::usage: return "E_USAGE";
    case ErrorCode::parse: return "E_PARSE";
    case ErrorCode::not_found: return "E_NOT_FOUND";
    case ErrorCode::ambiguous: return "E_AMBIGUOUS";
    case ErrorCode::integrity: return "E_INTEGRITY";
    case ErrorCode::signature_invalid: return "E_SIGNATURE_INVALID";
    case ErrorCode::rebuild_denied: return "E_REBUILD_DENIED";
    case ErrorCode::purged: return "E_PURGED";
    case ErrorCode::already_registered: return "E_ALREADY_REGISTERED";
    case ErrorCode::untrusted_signer: return "E_UNTRUSTED_SIGNER";
    case ErrorCode::parent_rejected: return "E_PARENT_REJECTED";
    case ErrorCode::duplicate_entity: return "E_DUPLICATE_ENTITY";
    case ErrorCode::already_purged: return "E_ALREADY_PURGED";
    case ErrorCode::already_distrusted: return "E_ALREADY_DISTRUSTED";
    case ErrorCode::ledger_exists: return "E_LEDGER_EXISTS";
    case ErrorCode::engine: return "E_ENGINE";
    case ErrorCode::io: return "E_IO";
    case ErrorCode::crypto: return "E_CRYPTO";
    }
    return "E_UNKNOWN";
}

int exit_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::usage:
    case ErrorCode::parse:
    case ErrorCode::ambiguous:
        return 2;
    case ErrorCode::not_found:
        return 3;
    case ErrorCode::integrity:
    case ErrorCode::signature_invalid:
    case ErrorCode::crypto:
        return 4;
    case ErrorCode::rebuild_denied:
    case ErrorCode::purged:
    case ErrorCode::already_registered:
    case ErrorCode::untrusted_signer:
    case ErrorCode::parent_rejected:
    case ErrorCode::duplicate_entity:
    case ErrorCode::already_purged:
    case ErrorCode::already_distrusted:
        return 5;
    case ErrorCode::ledger_exists:
    case ErrorCode::engine:
    case ErrorCode::io:
        return 1;
    }
    return 1;
}

} // namespace spock
