#include <doctest.h>

#include "fixture.hpp"

#include <spock/error.hpp>
#include <spock/process.hpp>

using namespace spock;
using namespace spock::test;

namespace {

bool has_reason(const AdmissionDecision& d, std::string_view code, const std::string& subject) {
    for (const auto& r : d.reasons)
        if (r.code == code && r.subject == subject) return true;
    return false;
}

} // namespace

TEST_SUITE("rungate") {

TEST_CASE("a freshly built image is admitted") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    for (const auto& [n, id] : t.image) {
        auto d = check_runnable(f.ledger, id.str());
        CHECK(d.allowed());
        CHECK(d.reasons.empty());
        CHECK(d.image_id == id.str());
    }
}

TEST_CASE("a removed ancestor denies every descendant image") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    // Purge only image 3, leaving recipe 3 live.
    remove(f.ledger, t.image.at(3), "bad build");
    auto d = check_runnable(f.ledger, t.image.at(1).str());
    CHECK_FALSE(d.allowed());
    CHECK(has_reason(d, deny_code::purged, "image " + t.image.at(3).str()));
    CHECK(has_reason(d, deny_code::purged, "image " + t.image.at(1).str()));
    CHECK(check_runnable(f.ledger, t.image.at(6).str()).allowed());
    CHECK(check_runnable(f.ledger, t.image.at(5).str()).allowed());
}

TEST_CASE("a flipped signature anywhere in the lineage denies") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    flip_signature(f.ledger.log_path(), "recipe", "recipe_hash", t.recipe.at(5).hex());
    f.ledger.refresh();
    for (int n : {1, 2, 3, 4, 5, 6}) {
        auto d = check_runnable(f.ledger, t.image.at(n).str());
        CHECK_FALSE(d.allowed());
        CHECK(has_reason(d, deny_code::signature_invalid, "recipe " + t.recipe.at(5).hex()));
    }
}

TEST_CASE("a flipped image signature denies that image and its descendants") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    flip_signature(f.ledger.log_path(), "image", "image_id", t.image.at(4).str());
    f.ledger.refresh();
    CHECK(has_reason(check_runnable(f.ledger, t.image.at(6).str()), deny_code::signature_invalid,
                     "image " + t.image.at(4).str()));
    CHECK(check_runnable(f.ledger, t.image.at(1).str()).allowed());
}

TEST_CASE("unknown and malformed ids are denied") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    ImageId ghost{t.image.at(1).built_at, digest("ghost")};
    auto d = check_runnable(f.ledger, ghost.str());
    CHECK_FALSE(d.allowed());
    CHECK(d.reasons.at(0).code == deny_code::unknown_image);
    for (const char* bad : {"", "nonsense", "20181001T120000Z-abc", "spock/whatever"}) {
        auto bd = check_runnable(f.ledger, bad);
        CHECK_FALSE(bd.allowed());
        CHECK(bd.reasons.at(0).code == deny_code::unknown_image);
    }
}

TEST_CASE("a distrusted signer denies") {
    Fixture f;
    f.trust("alice", 1);
    f.trust("bob", 2);
    auto root = f.root("FROM base\n");
    auto img = f.build_image(root.recipe_hash);
    auto c = f.child(img.image_id, "RUN bob\n", "bob");
    auto cimg = f.build_image(c.recipe_hash, "alice");
    // A bare revoke event distrusts without purging, as a hand-edited log might.
    {
        auto w = f.ledger.begin_write();
        w.put_revoke({digest("manual"), f.clock->now(), "manual", {"bob"}, {}, {}});
    }
    auto d = check_runnable(f.ledger, cimg.image_id.str());
    CHECK_FALSE(d.allowed());
    CHECK(has_reason(d, deny_code::signer_untrusted, "entity bob"));
    CHECK(check_runnable(f.ledger, img.image_id.str()).allowed());
}

TEST_CASE("decisions are audited and nothing else changes") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    auto before = f.state().lines.size();
    auto live_before = live_keys(f.state());
    check_runnable(f.ledger, t.image.at(2).str());
    check_runnable(f.ledger, "nonsense");
    f.ledger.refresh();
    const auto& st = f.state();
    REQUIRE(st.lines.size() == before + 2);
    CHECK(st.lines[before].type == "admission");
    CHECK(st.audit.size() == 2);
    CHECK(st.audit[0].body["verdict"] == "allow");
    CHECK(st.audit[1].body["verdict"] == "deny");
    CHECK(st.audit[1].body["reasons"][0]["code"] == "unknown-image");
    CHECK(live_keys(st) == live_before);
}

TEST_CASE("denial is monotone under interleaved operations") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        Fixture f;
        f.trust("alice", 1);
        f.trust("bob", 2);
        f.trust("carol", 3);
        grow_random_forest(f, rng, 10);
        std::set<ImageId> denied;
        for (int step = 0; step < 12; ++step) {
            auto& st = f.state();
            for (const auto& [id, img] : st.images) {
                bool allowed = evaluate_lineage(st, id).empty();
                if (denied.count(id)) CHECK_FALSE(allowed);
                if (!allowed) denied.insert(id);
            }
            auto live = st.list_images(RecordStatus::live);
            auto roll = rng() % 6;
            if (roll == 0 && st.is_trusted("carol")) {
                distrust(f.ledger, "carol", "rotation");
            } else if (roll < 3 && !live.empty()) {
                remove(f.ledger, live[rng() % live.size()]->image_id, "x");
            } else if (roll < 4) {
                auto recipes = st.list_recipes({std::nullopt, RecordStatus::live, std::nullopt});
                if (!recipes.empty()) remove(f.ledger, recipes[rng() % recipes.size()]->recipe_hash, "x");
            } else if (!live.empty()) {
                auto signer = st.is_trusted("carol") && rng() % 2 ? "carol" : "alice";
                auto c = f.child(live[rng() % live.size()]->image_id, "LABEL s=" + std::to_string(step) + "\n", signer);
                f.build_image(c.recipe_hash, signer);
            }
        }
    }
}

TEST_CASE("an admitted image has a fully valid lineage") {
    std::mt19937_64 rng(91);
    for (int trial = 0; trial < 40; ++trial) {
        Fixture f;
        f.trust("alice", 1);
        f.trust("bob", 2);
        grow_random_forest(f, rng, 12);
        auto& st = f.state();
        for (const auto& [id, img] : st.images) {
            if (!evaluate_lineage(st, id).empty()) continue;
            std::optional<ImageId> cursor = id;
            while (cursor) {
                const auto* i = st.find_image(*cursor);
                REQUIRE(i);
                CHECK(i->status == RecordStatus::live);
                CHECK(check_image(st, *i).empty());
                CHECK(st.is_trusted(i->signer_id()));
                const auto* r = st.find_recipe(cursor->recipe_hash);
                REQUIRE(r);
                CHECK(r->status == RecordStatus::live);
                CHECK(check_recipe(st, *r).empty());
                CHECK(st.is_trusted(r->signer_id()));
                cursor = r->parent_image_id;
            }
        }
    }
}

TEST_CASE("run spawns only admitted images and propagates exit status") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    auto marker = f.tmp / "ran";
    auto ok = run_image(f.ledger, t.image.at(1).str(), "echo {image} {image_id} > " + shell_quote(marker.string()));
    CHECK(ok.decision.allowed());
    CHECK(ok.spawned);
    CHECK(ok.exit_status == 0);
    auto expected_ref = image_reference(t.image.at(1));
    CHECK(slurp(marker) == expected_ref + " " + t.image.at(1).str() + "\n");
    CHECK(expected_ref.rfind("spock/20181001t", 0) == 0);

    CHECK(run_image(f.ledger, t.image.at(1).str(), "exit 7").exit_status == 7);

    fs::remove(marker);
    remove(f.ledger, t.recipe.at(3), "x");
    auto denied = run_image(f.ledger, t.image.at(1).str(), "touch " + shell_quote(marker.string()));
    CHECK_FALSE(denied.decision.allowed());
    CHECK_FALSE(denied.spawned);
    CHECK(denied.exit_status == run_denied_status);
    CHECK_FALSE(fs::exists(marker));
}

TEST_CASE("shell helpers") {
    CHECK(shell_quote("plain") == "'plain'");
    CHECK(shell_quote("it's") == "'it'\\''s'");
    CHECK(shell_quote("") == "''");
    CHECK(expand_template("run {a} {b} {a}", {{"a", "x y"}, {"b", "$(z)"}}) == "run 'x y' '$(z)' 'x y'");
    CHECK(expand_template("keep {unknown}", {{"a", "1"}}) == "keep {unknown}");
    auto echoed = run_shell("printf %s " + shell_quote("a'b $HOME \"q\""), true);
    CHECK(echoed.exit_status == 0);
    CHECK(echoed.output == "a'b $HOME \"q\"");
    CHECK(run_shell("kill -9 $$", true).exit_status == 128 + 9);
}

}
