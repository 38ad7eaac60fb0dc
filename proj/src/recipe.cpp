#include <spock/error.hpp>
#include <spock/recipe.hpp>
#include <spock/rungate.hpp>

#include <algorithm>
#include <cctype>

namespace spock {

namespace {

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
        if (len == 0 || i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        auto c1 = len > 1 ? static_cast<unsigned char>(s[i + 1]) : 0;
        if (len == 2 && c < 0xc2) return false;                  // overlong
        if (len == 3 && c == 0xe0 && c1 < 0xa0) return false;    // overlong
        if (len == 3 && c == 0xed && c1 >= 0xa0) return false;   // surrogate
        if (len == 4 && (c > 0xf4 || (c == 0xf0 && c1 < 0x90) || (c == 0xf4 && c1 >= 0x90)))
            return false;
        i += len;
    }
    return true;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_words(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        auto start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
           });
}

bool is_significant(std::string_view line) {
    auto t = trim(line);
    return !t.empty() && t.front() != '#';
}

bool is_from(std::string_view line) {
    auto words = split_words(line);
    return !words.empty() && iequals(words.front(), "FROM");
}

FromRef parse_from(std::string_view line) {
    auto words = split_words(line);
    std::vector<std::string_view> args;
    for (std::size_t i = 1; i < words.size(); ++i)
        if (words[i].rfind("--", 0) != 0) args.push_back(words[i]);
    bool named_stage = args.size() == 3 && iequals(args[1], "AS");
    if (args.size() != 1 && !named_stage)
        throw Error(ErrorCode::parse, "FROM takes exactly one image reference: '" + std::string(trim(line)) + "'");
    auto ref = args.front();
    if (ref.rfind(internal_ref_prefix, 0) == 0) {
        auto id = ImageId::try_parse(ref.substr(internal_ref_prefix.size()));
        if (!id) throw Error(ErrorCode::parse, "malformed trusted reference '" + std::string(ref) + "'");
        return InternalRef{*id};
    }
    return ExternalRef{std::string(ref)};
}

std::string_view kind_noun(RecipeKind k) { return k == RecipeKind::root ? "root" : "child"; }

RecipeRecord register_checked(Ledger& ledger, std::string_view text, RecipeKind expected,
                              const std::string& signer, const PrivateKey& key) {
    auto recipe = parse_recipe(text);
    if (recipe.kind() != expected) {
        throw Error(ErrorCode::usage, "recipe references " +
                                          std::string(expected == RecipeKind::root ? "a trusted image" : "an external source") +
                                          "; register it as a " + std::string(kind_noun(recipe.kind())));
    }
    auto hash = digest(text);

    auto writer = ledger.begin_write();
    const auto& st = writer.state();
    const auto* existing = st.find_recipe(hash);
    if (existing && existing->status == RecordStatus::purged)
        throw Error(ErrorCode::purged, "recipe " + hash.hex() + " was purged; it can never be registered again");
    require_signer(st, signer, key);
    if (existing) throw Error(ErrorCode::already_registered, "recipe " + hash.hex() + " is already registered");

    std::optional<ImageId> parent;
    if (const auto* ref = std::get_if<InternalRef>(&recipe.from_ref)) {
        parent = ref->image_id;
        if (!st.find_image(*parent))
            throw Error(ErrorCode::parent_rejected,
                        "FROM does not reference an existing trusted image: " + parent->str());
        auto reasons = evaluate_lineage(st, *parent);
        if (!reasons.empty())
            throw Error(ErrorCode::parent_rejected,
                        "parent image " + parent->str() + " is not trusted (" + reasons.front().str() + ")");
    }

    RecipeRecord record{hash,
                        recipe.kind(),
                        std::string(text),
                        sign(text, key, signer),
                        parent,
                        RecordStatus::live,
                        ledger.clock().now()};
    return writer.put_recipe(record);
}

} // namespace

std::string Recipe::from_text() const {
    if (const auto* ext = std::get_if<ExternalRef>(&from_ref)) return ext->name;
    return std::string(internal_ref_prefix) + std::get<InternalRef>(from_ref).image_id.str();
}

Recipe parse_recipe(std::string_view text) {
    if (trim(text).empty()) throw Error(ErrorCode::parse, "empty recipe");
    if (!valid_utf8(text)) throw Error(ErrorCode::parse, "recipe is not valid UTF-8");

    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        lines.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }

    auto first = std::find_if(lines.begin(), lines.end(), [](const auto& l) { return is_significant(l); });
    if (first == lines.end()) throw Error(ErrorCode::parse, "recipe has no instructions");
    auto from_count = std::count_if(lines.begin(), lines.end(),
                                    [](const auto& l) { return is_significant(l) && is_from(l); });
    if (from_count == 0) throw Error(ErrorCode::parse, "recipe has no FROM line");
    if (from_count > 1) throw Error(ErrorCode::parse, "recipe has multiple FROM lines (multi-stage builds are not supported)");
    if (!is_from(*first)) throw Error(ErrorCode::parse, "FROM must be the first instruction");

    Recipe recipe{parse_from(*first), {}, *first, {}};
    recipe.preamble.assign(lines.begin(), first);
    recipe.steps.assign(first + 1, lines.end());
    return recipe;
}

void require_signer(const LedgerState& state, const std::string& signer, const PrivateKey& key) {
    const auto* entity = state.find_entity(signer);
    if (!entity) throw Error(ErrorCode::untrusted_signer, "signer '" + signer + "' is not a known entity");
    if (entity->status != EntityStatus::trusted)
        throw Error(ErrorCode::untrusted_signer, "signer '" + signer + "' is distrusted");
    if (key.public_key() != entity->public_key)
        throw Error(ErrorCode::crypto, "private key does not belong to signer '" + signer + "'");
}

RecipeRecord register_root(Ledger& ledger, std::string_view text, const std::string& signer,
                           const PrivateKey& key) {
    return register_checked(ledger, text, RecipeKind::root, signer, key);
}

RecipeRecord register_child(Ledger& ledger, std::string_view text, const std::string& signer,
                            const PrivateKey& key) {
    return register_checked(ledger, text, RecipeKind::child, signer, key);
}

RecipeRecord register_recipe(Ledger& ledger, std::string_view text, const std::string& signer,
                             const PrivateKey& key) {
    return register_checked(ledger, text, parse_recipe(text).kind(), signer, key);
}

} // namespace spock
