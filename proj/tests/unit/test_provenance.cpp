#include <doctest.h>

#include "fixture.hpp"

#include <spock/error.hpp>

#include <algorithm>
#include <random>
#include <set>

using namespace spock;
using namespace spock::test;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io;
}

std::vector<Digest> hashes_of(const LineagePath& p) {
    std::vector<Digest> out;
    for (const auto& n : p) out.push_back(n.recipe_hash);
    return out;
}

} // namespace

TEST_SUITE("provenance") {

TEST_CASE("lineage of node 1 is 5 -> 3 -> 1") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    auto path = lineage(f.state(), t.recipe.at(1));
    CHECK(hashes_of(path) == std::vector<Digest>{t.recipe.at(5), t.recipe.at(3), t.recipe.at(1)});
    CHECK(format_lineage(path) == t.label(5) + " -> " + t.label(3) + " -> " + t.label(1));
    CHECK(path.front().kind == RecipeKind::root);
    CHECK(path[1].image_id == t.image.at(3));
    CHECK(path.back().image_id == t.image.at(1));

    // Image nodes resolve to the same path.
    CHECK(hashes_of(lineage(f.state(), t.image.at(1))) == hashes_of(path));
    CHECK(hashes_of(lineage(f.state(), t.recipe.at(5))) == std::vector<Digest>{t.recipe.at(5)});
}

TEST_CASE("lineage errors and purged ancestors") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    CHECK(code_of([&] { lineage(f.state(), digest("unknown")); }) == ErrorCode::not_found);
    CHECK(code_of([&] { lineage(f.state(), ImageId{parse_timestamp(fixture_epoch), t.recipe.at(1)}); }) ==
          ErrorCode::not_found);

    remove(f.ledger, t.recipe.at(5), "x");
    auto path = lineage(f.state(), t.recipe.at(1));
    REQUIRE(path.size() == 3);
    for (const auto& n : path) CHECK(n.purged());
}

TEST_CASE("every lineage ends at a root without repeats") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    for (const auto& [hash, r] : f.state().recipes) {
        auto path = lineage(f.state(), hash);
        REQUIRE_FALSE(path.empty());
        CHECK(path.front().kind == RecipeKind::root);
        CHECK(path.back().recipe_hash == hash);
        std::set<Digest> uniq;
        for (const auto& n : path) uniq.insert(n.recipe_hash);
        CHECK(uniq.size() == path.size());
        for (std::size_t i = 1; i < path.size(); ++i)
            CHECK(f.state().find_recipe(path[i].recipe_hash)->parent_image_id == path[i - 1].image_id);
    }
}

TEST_CASE("children and descendants") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    auto& st = f.state();
    CHECK(children(st, t.recipe.at(5)) == std::vector<Digest>{t.recipe.at(3), t.recipe.at(4)});
    CHECK(children(st, t.recipe.at(3)) == std::vector<Digest>{t.recipe.at(1), t.recipe.at(2)});
    CHECK(children(st, t.recipe.at(1)).empty());
    CHECK(children(st, t.image.at(4)) == std::vector<Digest>{t.recipe.at(6)});

    auto all = descendants(st, t.recipe.at(5));
    CHECK(all.size() == 5);
    std::set<Digest> got(all.begin(), all.end());
    for (int n : {1, 2, 3, 4, 6}) CHECK(got.count(t.recipe.at(n)));
    CHECK(descendants(st, t.recipe.at(3)) == std::vector<Digest>{t.recipe.at(1), t.recipe.at(2)});
    CHECK(code_of([&] { children(st, digest("nope")); }) == ErrorCode::not_found);
}

TEST_CASE("descendants of a five-node chain") {
    Fixture f;
    f.trust("alice", 1);
    auto r = f.root("FROM chain:0\n");
    auto img = f.build_image(r.recipe_hash);
    for (int i = 1; i < 5; ++i) {
        auto c = f.child(img.image_id, "LABEL link=" + std::to_string(i) + "\n");
        img = f.build_image(c.recipe_hash);
    }
    CHECK(descendants(f.state(), r.recipe_hash).size() == 4);
    CHECK(lineage(f.state(), img.image_id).size() == 5);
}

TEST_CASE("recipe nodes cover children of every image; image nodes only their own") {
    Fixture f;
    f.trust("alice", 1);
    auto r = f.root("FROM a\n");
    auto first = f.build_image(r.recipe_hash);
    auto c1 = f.child(first.image_id, "RUN one\n");
    remove(f.ledger, first.image_id, "rebuild");
    auto second = f.build_image(r.recipe_hash);
    auto c2 = f.child(second.image_id, "RUN two\n");
    CHECK(children(f.state(), r.recipe_hash) == std::vector<Digest>{c1.recipe_hash, c2.recipe_hash});
    CHECK(children(f.state(), second.image_id) == std::vector<Digest>{c2.recipe_hash});
    CHECK(children(f.state(), first.image_id) == std::vector<Digest>{c1.recipe_hash});
}

TEST_CASE("node resolution") {
    Fixture f;
    f.trust("alice", 1);
    QueryFixture q(f);
    auto& st = f.state();
    CHECK(q.malicious.recipe_hash.hex().rfind("80b6e", 0) == 0);
    CHECK(std::get<Digest>(resolve_node(st, "80b6e")) == q.malicious.recipe_hash);
    CHECK(std::get<Digest>(resolve_node(st, q.root.recipe_hash.hex())) == q.root.recipe_hash);
    CHECK(std::get<ImageId>(resolve_node(st, q.root_image.image_id.str())) == q.root_image.image_id);
    CHECK(std::get<ImageId>(resolve_node(st, "trusted:" + q.root_image.image_id.str())) == q.root_image.image_id);
    CHECK(code_of([&] { resolve_node(st, "80b"); }) == ErrorCode::not_found);      // too short
    CHECK(code_of([&] { resolve_node(st, "zzzzz"); }) == ErrorCode::not_found);
    CHECK(code_of([&] { resolve_node(st, digest("x").hex()); }) == ErrorCode::not_found);
    CHECK(code_of([&] { resolve_node(st, "20181001T120000Z-" + digest("x").hex()); }) == ErrorCode::not_found);
}

TEST_CASE("ambiguous prefixes are reported") {
    Fixture f;
    f.trust("alice", 1);
    // Register roots until two share a 4-character prefix.
    std::map<std::string, Digest> seen;
    std::string clash;
    for (int i = 0; clash.empty(); ++i) {
        auto r = f.root("FROM a\nLABEL n=" + std::to_string(i) + "\n");
        auto p = std::string(r.recipe_hash.prefix(4));
        if (seen.count(p)) clash = p;
        seen.emplace(p, r.recipe_hash);
    }
    CHECK(code_of([&] { resolve_node(f.state(), clash); }) == ErrorCode::ambiguous);
}

TEST_CASE("show_content") {
    Fixture f;
    f.trust("alice", 1);
    QueryFixture q(f);
    auto& st = f.state();
    CHECK(show_content(st, q.malicious.recipe_hash, false) == q.malicious.content);
    auto text = show_content(st, q.malicious_image.image_id, true);
    auto expected = "### " + std::string(q.root.recipe_hash.prefix()) + " root signer=alice status=live image=" +
                    q.root_image.image_id.str() + "\n" + q.root.content + "### " +
                    std::string(q.malicious.recipe_hash.prefix()) + " child signer=alice status=live image=" +
                    q.malicious_image.image_id.str() + "\n" + q.malicious.content;
    CHECK(text == expected);
}

TEST_CASE("dot export") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    auto dot = export_tree(f.state(), TreeFormat::dot);
    CHECK(dot.find("\"" + t.label(5) + "\" -> \"" + t.label(3) + "\"") != std::string::npos);
    CHECK(dot.find("\"" + t.label(3) + "\" -> \"" + t.label(1) + "\"") != std::string::npos);
    CHECK(dot.find(t.label(5) + " (root)") != std::string::npos);
    CHECK(dot.find("dashed") == std::string::npos);
    remove(f.ledger, t.recipe.at(4), "x");
    dot = export_tree(f.state(), TreeFormat::dot);
    CHECK(std::count(dot.begin(), dot.end(), '\n') == 3 + 6 + 5);
    CHECK(dot.find("\"" + t.label(6) + "\" [label=\"" + t.label(6) + " (child)\\nalice\" style=dashed") !=
          std::string::npos);
}

TEST_CASE("json export round-trips") {
    Fixture f;
    CHECK(nlohmann::json::parse(export_tree(f.state(), TreeFormat::json))["nodes"].empty());
    f.trust("alice", 1);
    FigTree t(f);
    remove(f.ledger, t.image.at(3), "x");
    auto text = export_tree(f.state(), TreeFormat::json);
    auto j = nlohmann::json::parse(text);
    CHECK(j["version"] == 1);
    CHECK(j["nodes"].size() == 6);
    CHECK(j["edges"].size() == 5);
    for (const auto& n : j["nodes"])
        for (const char* k : {"hash", "kind", "status", "signer", "images", "parent_image"}) CHECK(n.contains(k));

    auto original = forest_of(f.state());
    auto back = import_tree_json(text);
    std::set<ForestNode> n1(original.nodes.begin(), original.nodes.end()), n2(back.nodes.begin(), back.nodes.end());
    std::set<ForestEdge> e1(original.edges.begin(), original.edges.end()), e2(back.edges.begin(), back.edges.end());
    CHECK(n1 == n2);
    CHECK(e1 == e2);
    CHECK(render_json(back) == text);
    CHECK_THROWS_AS(import_tree_json("{"), Error);
    CHECK_THROWS_AS(import_tree_json(R"({"version":2,"nodes":[],"edges":[]})"), Error);
}

TEST_CASE("queries never mutate the ledger") {
    Fixture f;
    f.trust("alice", 1);
    FigTree t(f);
    auto before = f.state().state_digest();
    auto log = slurp(f.ledger.log_path());
    for (const auto& [n, h] : t.recipe) {
        lineage(f.state(), h);
        descendants(f.state(), h);
        show_content(f.state(), h, true);
    }
    export_tree(f.state(), TreeFormat::json);
    export_tree(f.state(), TreeFormat::dot);
    f.ledger.refresh();
    CHECK(f.state().state_digest() == before);
    CHECK(slurp(f.ledger.log_path()) == log);
}

}
