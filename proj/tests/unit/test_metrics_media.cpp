#include "helpers.hpp"

#include "protobias/media_pipeline.hpp"
#include "protobias/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <mutex>

using namespace protobias;
using protobias::testing::TempDir;

namespace {

Triplet triplet(const std::string &id, Domain d = Domain::Animals) {
    Triplet t;
    t.id = id;
    t.domain = d;
    t.text = "text " + id;
    t.correct = "correct " + id;
    t.adversarial = "adversarial " + id;
    return t;
}

// Echoes the prompt as image bytes; fails for prompts containing `poison`.
class EchoImages : public ImageGenerator {
public:
    std::string poison = "\x01";
    std::string generate(const std::string &prompt, int steps, std::uint64_t seed) override {
        if (prompt.find(poison) != std::string::npos) {
            fail(ErrorCode::EndpointError, "503 after retries");
        }
        return prompt + "|" + std::to_string(steps) + "|" + std::to_string(seed);
    }
    std::string model() const override { return "echo"; }
};

class ReplyRater : public AlignmentRater {
public:
    std::function<std::string(const std::string &)> reply;
    std::string rate(const std::string &, const std::string &image) override { return reply(image); }
    std::string model() const override { return "rater"; }
};

// Scores by image bytes; "garbled" images fail to parse on the first ask.
class FakeMetric : public Metric {
public:
    std::mutex m;
    std::map<std::string, int> asks;
    MetricId id() const override { return MetricId::LlmJudge; }
    std::string model() const override { return "judge-x"; }
    RawScore score(const std::string &, const std::string &image) override {
        int n;
        {
            std::lock_guard lock(m);
            n = ++asks[image];
        }
        if (image.find("never") != std::string::npos || (image.find("garbled") != std::string::npos && n == 1)) {
            fail(ErrorCode::ScoreParseError, "unreadable");
        }
        const int k = image.find("correct") == 0 ? 4 : 2;
        return {static_cast<double>(k), normalize_judge(k)};
    }
};

} // namespace

TEST_CASE("normalizations are monotone and land in [0,1]") {
    CHECK(normalize_clip(-0.3) == 0.0);
    CHECK(normalize_clip(0.2) == doctest::Approx(0.5));
    CHECK(normalize_clip(0.9) == 1.0);
    CHECK(normalize_pick(0.0) == doctest::Approx(0.5));
    CHECK(normalize_pick(-800.0) >= 0.0);
    CHECK(normalize_pick(800.0) == doctest::Approx(1.0));
    CHECK(normalize_judge(1) == 0.0);
    CHECK(normalize_judge(4) == 1.0);
    CHECK_ERROR(normalize_judge(5), ScoreParseError);
    CHECK(normalize_proto(1.7) == 1.0);
    for (MetricId id : {MetricId::ClipScore, MetricId::PickScore, MetricId::ProtoScore}) {
        double prev = -1.0;
        for (double x = -3.0; x <= 3.0; x += 0.05) {
            const double v = normalize(id, x);
            CHECK((v >= 0.0 && v <= 1.0));
            CHECK(v >= prev);
            prev = v;
        }
    }
    CHECK(yes_probability(0.3, 0.1) == doctest::Approx(0.75));
    CHECK_ERROR(yes_probability(0, 0), ProbabilityUnavailableError);
    CHECK_ERROR(yes_probability(NAN, 0.2), ProbabilityUnavailableError);
    CHECK(cosine({1, 0}, {1, 1}) == doctest::Approx(std::sqrt(0.5)));
    CHECK_ERROR(cosine({0, 0}, {1, 1}), DegenerateEmbeddingError);
    CHECK_ERROR(cosine({1}, {1, 1}), DegenerateEmbeddingError);
}

TEST_CASE("metric reply parsing") {
    CHECK(parse_judge_rating("Here: {\"score\": 3, \"why\": \"ok\"}") == 3);
    CHECK_ERROR(parse_judge_rating("{\"score\": 7}"), ScoreParseError);
    CHECK_ERROR(parse_judge_rating("three"), ScoreParseError);
    CHECK_ERROR(parse_judge_rating("{\"rating\": 2}"), ScoreParseError);
    CHECK(parse_decimal_score("score: 0.40") == doctest::Approx(0.40));
    CHECK(parse_decimal_score(".5") == doctest::Approx(0.5));
    CHECK_ERROR(parse_decimal_score("none"), ScoreParseError);
    CHECK(parse_metric_id("vqascore") == MetricId::VqaScore);
    CHECK(label_filename("llm_judge/gpt-4o") == "llm_judge__gpt-4o");

    ::setenv("SOURCE_DATE_EPOCH", "0", 1);
    CHECK(utc_timestamp() == "1970-01-01T00:00:00Z");
    ::unsetenv("SOURCE_DATE_EPOCH");
}

TEST_CASE("filter score parsing and the pair threshold") {
    CHECK(parse_filter_score("8") == 8);
    CHECK(parse_filter_score("Score: 8/10") == 8);
    CHECK(parse_filter_score("10.0") == 10);
    CHECK_ERROR(parse_filter_score("7.5"), ScoreParseError);
    CHECK_ERROR(parse_filter_score("11"), ScoreParseError);
    CHECK_ERROR(parse_filter_score("0"), ScoreParseError);
    CHECK_ERROR(parse_filter_score("great"), ScoreParseError);
    CHECK(passes_threshold(8, 9, 8));
    CHECK_FALSE(passes_threshold(8, 7, 8));
    CHECK_FALSE(passes_threshold(std::nullopt, 9, 8));
    CHECK_ERROR(check_threshold(0), InvalidArgument);
    CHECK_ERROR(check_threshold(11), InvalidArgument);

    std::vector<FilterRecord> recs(3);
    recs[0] = {"a", "t", Domain::Animals, 9, 9};
    recs[1] = {"b", "t", Domain::Animals, 9, 6};
    recs[2] = {"c", "t", Domain::Objects, std::nullopt, 9};
    const auto at8 = apply_threshold(recs, 8);
    CHECK(at8[0].retained);
    CHECK_FALSE(at8[1].retained);
    CHECK_FALSE(at8[2].retained);
    CHECK(apply_threshold(at8, 6)[1].retained);
    const auto sum = summarize_filtration(at8, 8);
    CHECK(sum.domains.at("animals").retained == 1);
    CHECK(sum.domains.at("objects").unscored == 1);
    CHECK(sum.domains.at("overall").total == 3);
    CHECK(FilterRecord::from_json(at8[2].to_json()).to_json() == at8[2].to_json());
}

TEST_CASE("rate_image re-queries once") {
    ReplyRater r;
    int calls = 0;
    r.reply = [&](const std::string &) { return ++calls == 1 ? std::string("hmm") : std::string("9"); };
    const auto ok = rate_image(r, "rubric", "img");
    CHECK(ok.score == 9);
    CHECK(ok.queries == 2);
    r.reply = [](const std::string &) { return std::string("no idea"); };
    const auto bad = rate_image(r, "rubric", "img");
    CHECK_FALSE(bad.score.has_value());
    CHECK(bad.queries == 2);
    CHECK_FALSE(bad.error.empty());
}

TEST_CASE("pair generation plans, seeds and drops failures") {
    TempDir dir("pairs");
    BlobStore blobs(dir.path());
    std::vector<Triplet> ts{triplet("a"), triplet("b"), triplet("c")};
    ts[1].adversarial += "\x01";
    const auto plan = plan_pairs(ts, 2);
    REQUIRE(plan.size() == 6);
    CHECK(plan[3].pair_id == "b-p1");
    CHECK_ERROR(plan_pairs(ts, 0), InvalidArgument);
    CHECK(pair_seed(1, "a-p0") <= 0x7fffffffULL);
    CHECK(pair_seed(1, "a-p0") != pair_seed(1, "a-p1"));

    EchoImages gen;
    std::vector<PairRecord> out;
    std::vector<PairFailure> failures;
    PairGenOptions opt{2, 3, 11, 3};
    generate_pairs(ts, gen, blobs, opt, {"c-p0"}, [&](const PairRecord &r) { out.push_back(r); },
                   [&](const PairFailure &f) { failures.push_back(f); });
    REQUIRE(out.size() == 3);
    CHECK(out[0].pair_id == "a-p0");
    CHECK(out[2].pair_id == "c-p1");
    REQUIRE(failures.size() == 2);
    CHECK(failures[0].side == "adv");
    const auto &r = out[0];
    CHECK(r.params.seed == pair_seed(11, "a-p0"));
    CHECK(blobs.get(r.image_corr).value() == "correct a|3|" + std::to_string(r.params.seed));
    CHECK(blobs.get(r.image_adv).value() == "adversarial a|3|" + std::to_string(r.params.seed));
    CHECK(PairRecord::from_json(r.to_json()).to_json() == r.to_json());
    CHECK_ERROR(generate_pairs(ts, gen, blobs, PairGenOptions{1, 0, 1, 1}), InvalidArgument);
}

TEST_CASE("filter_pairs rates both sides against their own prompt") {
    TempDir dir("filter");
    BlobStore blobs(dir.path());
    EchoImages gen;
    const auto pairs = generate_pairs({triplet("a"), triplet("b", Domain::Objects)}, gen, blobs, {1, 1, 5, 1});
    ReplyRater rater;
    rater.reply = [](const std::string &img) {
        if (img.find("adversarial b") == 0) return std::string("who knows");
        return std::string(img.find("correct") == 0 ? "9" : "8");
    };
    std::vector<FilterRecord> recs;
    filter_pairs(pairs, rater, blobs, AssetLibrary::bundled(), 9, 2, {}, [&](const FilterRecord &r) { recs.push_back(r); });
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].score_corr == 9);
    CHECK(recs[0].score_adv == 8);
    CHECK_FALSE(recs[0].retained);
    CHECK_FALSE(recs[1].scored());
    CHECK_FALSE(recs[1].note.empty());
}

TEST_CASE("score_pairs re-queries parse failures then reports the pair unscored") {
    TempDir dir("score");
    BlobStore blobs(dir.path());
    std::vector<PairRecord> pairs;
    for (const char *name : {"p1", "garbled", "never", "done"}) {
        PairRecord p;
        p.pair_id = name;
        p.text = "t";
        p.image_corr = blobs.put(std::string("correct ") + name);
        p.image_adv = blobs.put(std::string("adv ") + name);
        pairs.push_back(p);
    }
    FakeMetric metric;
    std::vector<MetricScore> scores;
    std::vector<UnscoredPair> unscored;
    ::setenv("SOURCE_DATE_EPOCH", "0", 1);
    score_pairs(pairs, metric, blobs, 2, {"done"}, [&](const MetricScore &s) { scores.push_back(s); },
                [&](const UnscoredPair &u) { unscored.push_back(u); });
    ::unsetenv("SOURCE_DATE_EPOCH");
    REQUIRE(scores.size() == 2);
    CHECK(scores[0].pair_id == "p1");
    CHECK(scores[0].s_corr == 1.0);
    CHECK(scores[0].s_adv == doctest::Approx(1.0 / 3));
    CHECK(scores[0].metric == metric.label());
    CHECK(scores[0].timestamp == "1970-01-01T00:00:00Z");
    CHECK(scores[1].pair_id == "garbled");
    REQUIRE(unscored.size() == 1);
    CHECK(unscored[0].pair_id == "never");
    CHECK(metric.asks["correct never"] == 2);
    CHECK(MetricScore::from_json(scores[0].to_json()).to_json() == scores[0].to_json());
}

TEST_CASE("sample_pairs is seeded and domain balanced") {
    std::vector<PairRecord> pairs;
    for (int i = 0; i < 30; ++i) {
        PairRecord p;
        p.pair_id = "p" + std::to_string(i);
        p.domain = all_domains()[i % 3];
        pairs.push_back(p);
    }
    const auto a = sample_pairs(pairs, 12, 3);
    CHECK(a == sample_pairs(pairs, 12, 3));
    std::map<Domain, int> per;
    for (auto i : a) ++per[pairs[i].domain];
    for (auto &[d, n] : per) CHECK(n == 4);
    CHECK(sample_pairs(pairs, 0, 3).empty());
    CHECK_ERROR(sample_pairs(pairs, 31, 3), InsufficientPairsError);
}
