#include "helpers.hpp"

#include "protobias/blob_store.hpp"
#include "protobias/hashing.hpp"
#include "protobias/jsonl.hpp"
#include "protobias/parallel.hpp"
#include "protobias/sampling.hpp"
#include "protobias/text.hpp"
#include "protobias/token_diff.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

using namespace protobias;
using protobias::testing::TempDir;
namespace fs = std::filesystem;

TEST_CASE("sha256 and base64 match published vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_decode("Zm9v\nYmFy") == "foobar");
    const std::string bin("\x00\xff\x10 \x7f", 5);
    CHECK(base64_decode(base64_encode(bin)) == bin);
    CHECK_ERROR(base64_decode("Zm9v!"), ParseError);
}

TEST_CASE("derive_seed is stable and tag sensitive") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("blob store is content addressed and refuses corrupted bytes") {
    TempDir dir("blobs");
    BlobStore store(dir.path());
    const std::string digest = store.put("pixels");
    CHECK(digest == sha256_hex("pixels"));
    CHECK(store.put("pixels") == digest);
    CHECK(store.contains(digest));
    CHECK(store.get(digest).value() == "pixels");
    CHECK(store.path_for(digest).parent_path().filename() == digest.substr(0, 2));
    {
        std::ofstream out(store.path_for(digest), std::ios::trunc);
        out << "tampered";
    }
    CHECK_FALSE(store.get(digest).has_value());
    CHECK_FALSE(store.get(sha256_hex("never stored")).has_value());
    CHECK_FALSE(is_valid_digest("abc"));
    CHECK(is_valid_digest(digest));
}

TEST_CASE("jsonl writer resumes, truncates torn lines and checks its header") {
    TempDir dir("jsonl");
    const fs::path path = dir / "m.jsonl";
    const Json header = make_header("stage", 7, {{"in", "x"}}, {{"n", 2}});
    {
        JsonlWriter w(path, header);
        w.append({{"id", "a"}, {"v", 1}});
        w.append({{"id", "b"}, {"v", 2}});
    }
    {
        std::ofstream out(path, std::ios::app);
        out << R"({"id":"c","v)"; // torn
    }
    const JsonlDocument doc = read_jsonl(path);
    CHECK(doc.records.size() == 2);
    CHECK(doc.header.at("schema_version") == 1);
    CHECK(doc.header.at("seed") == 7);
    {
        JsonlWriter w(path, header);
        CHECK(w.existing_records().size() == 2);
        w.append({{"id", "c"}, {"v", 3}});
    }
    const std::string text = read_file(path);
    CHECK(text.find(R"({"id":"c","v)" "\n") == std::string::npos);
    CHECK(read_jsonl(path).records.size() == 3);
    CHECK(read_jsonl(path).records.back().at("v") == 3);

    CHECK_ERROR(JsonlWriter(path, make_header("stage", 8)), ConfigError);
    CHECK_ERROR(read_jsonl(dir / "absent.jsonl"), MissingManifestError);

    write_file_atomic(dir / "bad.jsonl", "{\"kind\":\"header\",\"schema_version\":2}\n");
    CHECK_ERROR(read_jsonl(dir / "bad.jsonl"), SchemaError);
}

TEST_CASE("records serialize with sorted keys") {
    CHECK(dump_line({{"b", 1}, {"a", {{"d", 1}, {"c", 2}}}}) == R"({"a":{"c":2,"d":1},"b":1})");
}

TEST_CASE("rng and stratified sampling are reproducible") {
    Rng a(5), b(5);
    for (int i = 0; i < 10; ++i) {
        CHECK(a.next() == b.next());
    }
    Rng r(9);
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.below(7);
        CHECK(v < 7);
        const double u = r.uniform();
        CHECK((u >= 0.0 && u < 1.0));
    }
    CHECK(even_quota(10, 3) == std::vector<std::size_t>{4, 3, 3});

    std::vector<StratifiedItem> items;
    for (int i = 0; i < 30; ++i) {
        items.push_back({"id" + std::to_string(i), i % 3 == 0 ? "x" : (i % 3 == 1 ? "y" : "z")});
    }
    const auto pick = stratified_sample(items, 9, 4);
    CHECK(pick.size() == 9);
    std::map<std::string, int> per;
    std::set<std::string> ids;
    for (auto i : pick) {
        ++per[items[i].stratum];
        ids.insert(items[i].id);
    }
    CHECK(per == std::map<std::string, int>{{"x", 3}, {"y", 3}, {"z", 3}});

    auto reversed = items;
    std::reverse(reversed.begin(), reversed.end());
    std::set<std::string> ids_rev;
    for (auto i : stratified_sample(reversed, 9, 4)) {
        ids_rev.insert(reversed[i].id);
    }
    CHECK(ids == ids_rev);
    CHECK_ERROR(stratified_sample(items, 40, 4), InsufficientPairsError);
    CHECK(stratified_sample(items, 0, 4).empty());
}

TEST_CASE("text helpers") {
    CHECK(text::words("  An owl, perched!  ") == std::vector<std::string>{"An", "owl", "perched"});
    CHECK(text::comparison_tokens("An Owl sits.") == std::vector<std::string>{"a", "owl", "sits"});
    CHECK(text::pluralize("bamboo stalk") == "bamboo stalks");
    CHECK(text::pluralize("bench") == "benches");
    CHECK(text::pluralize("pony") == "ponies");
    CHECK(text::pluralize("day") == "days");
    CHECK(text::indefinite_article("owl") == "an");
    CHECK(text::indefinite_article("robin") == "a");
    CHECK(text::word_count("one two  three") == 3);
    CHECK(text::trim("\t x \n") == "x");
}

TEST_CASE("token diff reports maximal edit regions") {
    auto tok = [](const char *s) { return text::comparison_tokens(s); };
    const auto a = tok("a dog sits near two rocks");
    CHECK(token_diff(a, a).empty());
    const auto h = token_diff(a, tok("a cat sits near three rocks"));
    REQUIRE(h.size() == 2);
    CHECK(h[0] == Hunk{1, 2, 1, 2});
    CHECK(h[1] == Hunk{4, 5, 4, 5});
    const auto ins = token_diff(a, tok("a big dog sits near two rocks"));
    REQUIRE(ins.size() == 1);
    CHECK(ins[0] == Hunk{1, 1, 1, 2});
    const auto del = token_diff(a, tok("a dog near two rocks"));
    REQUIRE(del.size() == 1);
    CHECK(del[0] == Hunk{2, 3, 2, 2});
}

TEST_CASE("ordered parallel map commits in index order") {
    std::vector<std::size_t> order;
    ordered_parallel_map<std::size_t>(
        50, 4, [](std::size_t i) { return i * i; },
        [&](std::size_t i, std::size_t v) {
            CHECK(v == i * i);
            order.push_back(i);
        });
    std::vector<std::size_t> want(50);
    std::iota(want.begin(), want.end(), 0);
    CHECK(order == want);

    std::vector<std::size_t> committed;
    CHECK_THROWS_AS(ordered_parallel_map<int>(
                        20, 3,
                        [](std::size_t i) {
                            if (i == 7) throw std::runtime_error("boom");
                            return static_cast<int>(i);
                        },
                        [&](std::size_t i, int) { committed.push_back(i); }),
                    std::runtime_error);
    for (auto i : committed) {
        CHECK(i < 7);
    }
}
