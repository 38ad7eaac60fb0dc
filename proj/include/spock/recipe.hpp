#pragma once

#include <spock/ledger.hpp>

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spock {

inline constexpr std::string_view internal_ref_prefix = "trusted:";

/// Registry name, URL or tarball path outside the trust domain.
struct ExternalRef {
    std::string name;
    bool operator==(const ExternalRef&) const = default;
};

/// "trusted:<ImageId>", an image already in the ledger.
struct InternalRef {
    ImageId image_id;
    bool operator==(const InternalRef&) const = default;
};

using FromRef = std::variant<ExternalRef, InternalRef>;

struct Recipe {
    FromRef from_ref;
    std::vector<std::string> preamble;  // comment/blank lines before FROM
    std::string from_line;
    std::vector<std::string> steps;     // every line after FROM, verbatim

    RecipeKind kind() const {
        return std::holds_alternative<InternalRef>(from_ref) ? RecipeKind::child : RecipeKind::root;
    }
    /// The reference exactly as it appears after FROM.
    std::string from_text() const;
};

/// Only the FROM line is interpreted; everything else is an opaque step.
/// Throws Error(parse) on empty input, invalid UTF-8, missing FROM, FROM not
/// being the first significant line, or more than one FROM.
Recipe parse_recipe(std::string_view text);

RecipeRecord register_root(Ledger& ledger, std::string_view text, const std::string& signer,
                           const PrivateKey& key);

RecipeRecord register_child(Ledger& ledger, std::string_view text, const std::string& signer,
                            const PrivateKey& key);

/// Dispatches on the recipe's FROM reference.
RecipeRecord register_recipe(Ledger& ledger, std::string_view text, const std::string& signer,
                             const PrivateKey& key);

/// Throws unless `signer` is a trusted entity whose registered key matches `key`.
void require_signer(const LedgerState& state, const std::string& signer, const PrivateKey& key);

} // namespace spock
