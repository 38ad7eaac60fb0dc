#pragma once

#include <spock/ledger.hpp>

#include <string>
#include <vector>

namespace spock {

enum class Verdict { allow, deny };
std::string_view to_string(Verdict v);

/// One failed admission check, e.g. {"purged", "image 2018...-ab12..."}.
struct DenyReason {
    std::string code;
    std::string subject;

    std::string str() const { return code + ": " + subject; }
    bool operator==(const DenyReason&) const = default;
};

namespace deny_code {
inline constexpr std::string_view unknown_image = "unknown-image";
inline constexpr std::string_view purged = "purged";
inline constexpr std::string_view signature_invalid = "signature-invalid";
inline constexpr std::string_view integrity = "integrity";
inline constexpr std::string_view signer_untrusted = "signer-untrusted";
} // namespace deny_code

struct AdmissionDecision {
    std::string image_id;
    Verdict verdict = Verdict::deny;
    std::vector<DenyReason> reasons;  // empty iff allow
    Timestamp checked_at;

    bool allowed() const { return verdict == Verdict::allow; }
};

nlohmann::json to_json(const AdmissionDecision& d);

/// Pure lineage-deep check: the image and every ancestor recipe and image
/// must be present, live and signature-valid, and every signer trusted.
/// Reasons are ordered from the target up to the root.
std::vector<DenyReason> evaluate_lineage(const LedgerState& state, const ImageId& image);

/// Evaluates and appends the decision to the audit history. Unknown or
/// malformed ids are denied rather than reported as errors.
AdmissionDecision check_runnable(Ledger& ledger, std::string_view image_id);

/// "spock/<image id, lowercased>", the engine-side reference for an image.
std::string image_reference(const ImageId& id);

struct RunResult {
    AdmissionDecision decision;
    bool spawned = false;
    int exit_status = 0;
};

inline constexpr int run_denied_status = 10;

/// Spawns `command_template` (with "{image}" and "{image_id}" substituted)
/// through /bin/sh only if the image is admitted.
RunResult run_image(Ledger& ledger, std::string_view image_id, const std::string& command_template);

} // namespace spock
