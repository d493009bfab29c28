#include "helpers.hpp"

#include "protobias/mock_endpoints.hpp"
#include "protobias/prompt_forge.hpp"
#include "protobias/taxonomy.hpp"

#include "../support/validator_cases.hpp"

#include <mutex>
#include <set>

using namespace protobias;

namespace {

const Taxonomy &bundled() {
    static const Taxonomy t = load_taxonomy(bundled_taxonomy_dir());
    return t;
}

Json animals_doc() { return Json::parse(read_file(bundled_taxonomy_dir() / "animals.json")); }

} // namespace

TEST_CASE("bundled taxonomy loads with all three domains") {
    const Taxonomy &t = bundled();
    for (Domain d : all_domains()) {
        REQUIRE(t.has(d));
        CHECK(t.get(d).subject_count() > 0);
        CHECK_FALSE(t.get(d).knobs.empty());
    }
    CHECK(t.get(Domain::Objects).knobs.size() == 5);
}

TEST_CASE("taxonomy invariants are enforced") {
    Json doc = animals_doc();
    doc["pairs"].push_back(doc["pairs"][0]);
    CHECK_ERROR(parse_domain_taxonomy(doc, "dup"), DuplicateIdError);

    doc = animals_doc();
    doc.erase("schema_version");
    CHECK_ERROR(parse_domain_taxonomy(doc, "nover"), SchemaError);

    doc = animals_doc();
    doc["pairs"][0]["proto"] = doc["pairs"][0]["non_proto"];
    CHECK_ERROR(parse_domain_taxonomy(doc, "same"), InvariantError);

    doc = animals_doc();
    doc["knobs"][0]["kind"] = "texture";
    CHECK_ERROR(parse_domain_taxonomy(doc, "knob"), SchemaError);

    Taxonomy empty;
    CHECK_ERROR(enumerate_cells(empty, Domain::Animals, 3, 0), EmptyTaxonomyError);
    CHECK_ERROR(load_taxonomy("/nonexistent/taxonomy"), IoError);
}

TEST_CASE("cell enumeration is deterministic, prefix stable and balanced") {
    const auto small = enumerate_cells(bundled(), Domain::Animals, 7, 3);
    const auto big = enumerate_cells(bundled(), Domain::Animals, 40, 3);
    REQUIRE(small.size() == 7);
    for (std::size_t i = 0; i < small.size(); ++i) {
        CHECK(small[i].id == big[i].id);
        CHECK(small[i].to_json() == big[i].to_json());
    }
    const std::size_t subjects = bundled().get(Domain::Animals).subject_count();
    const auto round = enumerate_cells(bundled(), Domain::Animals, subjects, 3);
    std::set<std::string> seen;
    for (const auto &c : round) {
        seen.insert(c.subject_id());
    }
    CHECK(seen.size() == subjects);
    CHECK(enumerate_cells(bundled(), Domain::Animals, 7, 4).front().id == small.front().id);
    const auto again = GenerationCell::from_json(big[5].to_json());
    CHECK(again.to_json() == big[5].to_json());
}

TEST_CASE("generation prompts fill every placeholder") {
    const AssetLibrary assets = AssetLibrary::bundled();
    for (Domain d : all_domains()) {
        for (const auto &cell : enumerate_cells(bundled(), d, 12, 1)) {
            const std::string prompt = build_generation_prompt(cell, assets);
            CHECK(unresolved_placeholders(prompt).empty());
            CHECK(prompt.find(cell.extra_element) != std::string::npos);
        }
    }
    CHECK_ERROR(fill_placeholders("x {a} {b}", {{"a", "1"}}), MissingPlaceholderError);
    CHECK(fill_placeholders("x {a}", {{"a", "1"}}) == "x 1");
}

TEST_CASE("triplet replies are parsed from the first JSON object") {
    const auto t = parse_triplet("Sure!\n```json\n{\"text\": \" A {dog} \", \"correct\": \"b\", \"adversarial\": \"c\"}\n```");
    CHECK(t.text == "A {dog}");
    CHECK(t.correct == "b");
    CHECK(t.adversarial == "c");
    const auto span = find_first_json_object(R"(x {"a": "}{"} y)");
    REQUIRE(span.has_value());
    CHECK(span->first == 2);
    CHECK_ERROR(parse_triplet("no json here"), ParseError);
    CHECK_ERROR(parse_triplet(R"({"text": "a", "correct": "b"})"), MissingFieldError);
    CHECK_ERROR(parse_triplet(R"({"text": "a", "correct": "b", "adversarial": 3})"), MissingFieldError);
}

TEST_CASE("the validator accepts contract triplets and labels broken ones") {
    const auto cells = protobias::testing::mixed_cells(77);
    for (const auto &c : protobias::testing::valid_cases(cells)) {
        const auto rep = check_triplet(c.triplet, c.cell);
        INFO(c.what << " " << rep.to_json().dump());
        CHECK(rep.ok());
    }
    for (const auto &c : protobias::testing::corrupted_cases(cells)) {
        const auto rep = check_triplet(c.triplet, c.cell);
        INFO(c.what << " " << rep.to_json().dump());
        CHECK(rep.kinds().count(*c.expected) == 1);
    }
}

TEST_CASE("validator specifics") {
    const GenerationCell cell = enumerate_cells(bundled(), Domain::Animals, 1, 0).front();
    const CategoryPair &p = *cell.pair();
    const std::string x = cell.extra_element;
    auto s = [&](const std::string &subject, const std::string &n) {
        return protobias::testing::cap(protobias::testing::np(subject)) + " stands by exactly " + n + " " +
               text::pluralize(x) + ".";
    };
    TripletCandidate ok{s(p.hypernym, "two"), s(p.non_proto, "two"), s(p.proto, "three")};
    CHECK(check_triplet(ok, cell).ok());

    TripletCandidate no_subject{"A thing stands by exactly two " + text::pluralize(x) + ".", ok.correct, ok.adversarial};
    CHECK(check_triplet(no_subject, cell).kinds() == std::set<ViolationKind>{ViolationKind::SubjectMissing});

    TripletCandidate no_anchor{s(p.hypernym, "two") + " Nothing else.", ok.correct, ok.adversarial};
    no_anchor.text = protobias::testing::np(p.hypernym) + " stands alone.";
    CHECK(check_triplet(no_anchor, cell).kinds().count(ViolationKind::AnchorMissing) == 1);

    TripletCandidate extra_edit = ok;
    extra_edit.correct = s(p.non_proto, "four");
    CHECK(check_triplet(extra_edit, cell).kinds().count(ViolationKind::CorrectExtraEdit) == 1);

    TripletCandidate no_knob = ok;
    no_knob.adversarial = s(p.proto, "two");
    CHECK(check_triplet(no_knob, cell).kinds().count(ViolationKind::MissingKnobEdit) == 1);

    const auto v = validate_triplet(ok, cell);
    REQUIRE(std::holds_alternative<Triplet>(v));
    const Triplet &t = std::get<Triplet>(v);
    CHECK(t.id == cell.id);
    CHECK(Triplet::from_json(t.to_json()).to_json() == t.to_json());
}

TEST_CASE("mock replies satisfy the validator in every domain") {
    const AssetLibrary assets = AssetLibrary::bundled();
    for (Domain d : all_domains()) {
        for (const auto &cell : enumerate_cells(bundled(), d, 30, 9)) {
            const auto cand = parse_triplet(mock_triplet_reply(build_generation_prompt(cell, assets)));
            const auto rep = check_triplet(cand, cell);
            INFO(cell.id << " " << cand.text << " | " << cand.adversarial << " " << rep.to_json().dump());
            CHECK(rep.ok());
        }
    }
}

namespace {

// Replies from a script; thread-safe so generation can run wide.
class ScriptedGenerator : public TextGenerator {
public:
    explicit ScriptedGenerator(std::function<std::string(const std::string &, int)> fn) : m_fn(std::move(fn)) {}
    std::string complete(const std::string &prompt) override {
        int n;
        {
            std::lock_guard lock(m_mutex);
            n = ++m_calls[prompt];
        }
        return m_fn(prompt, n);
    }
    std::string model() const override { return "scripted"; }

private:
    std::function<std::string(const std::string &, int)> m_fn;
    std::map<std::string, int> m_calls;
    std::mutex m_mutex;
};

} // namespace

TEST_CASE("generation retries rejected cells and reports exhausted ones") {
    const AssetLibrary assets = AssetLibrary::bundled();
    const auto cells = enumerate_cells(bundled(), Domain::Objects, 6, 2);
    ScriptedGenerator gen([](const std::string &prompt, int call) {
        if (call == 1) return std::string("I'd rather not.");
        return mock_triplet_reply(prompt);
    });
    std::vector<std::string> committed;
    GenerationOptions opt;
    opt.width = 3;
    const auto result = generate_triplets(cells, gen, assets, opt, [&](const CellOutcome &o) {
        committed.push_back(o.cell.id);
        CHECK(o.attempts == 2);
    });
    CHECK(result.triplets.size() == 6);
    CHECK(result.rejections.size() == 6);
    CHECK(result.rejections.front().reason == "parse");
    CHECK(result.triplets.front().cell_metadata.at("generation").at("attempt") == 2);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(committed[i] == cells[i].id);
    }

    ScriptedGenerator bad([](const std::string &, int) {
        return std::string(R"({"text": "A dog.", "correct": "A cat.", "adversarial": "A cow."})");
    });
    const auto none = generate_triplets(cells, bad, assets, {2, 1});
    CHECK(none.triplets.empty());
    CHECK(none.exhausted_cells.size() == 6);
    CHECK(none.rejections.size() == 12);
    CHECK(none.rejections.front().reason == "validation");
}
