#include "protobias/media_pipeline.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/parallel.hpp"

#include <regex>

namespace protobias {

Json PairRecord::to_json() const {
    return {{"pair_id", pair_id},
            {"triplet_id", triplet_id},
            {"domain", to_string(domain)},
            {"text", text},
            {"correct", correct},
            {"adversarial", adversarial},
            {"image_corr", image_corr},
            {"image_adv", image_adv},
            {"generation", {{"model", params.model}, {"steps", params.steps}, {"seed", params.seed}}}};
}

PairRecord PairRecord::from_json(const Json &j) {
    try {
        PairRecord r;
        r.pair_id = j.at("pair_id").get<std::string>();
        r.triplet_id = j.at("triplet_id").get<std::string>();
        r.domain = parse_domain(j.at("domain").get<std::string>());
        r.text = j.at("text").get<std::string>();
        r.correct = j.at("correct").get<std::string>();
        r.adversarial = j.at("adversarial").get<std::string>();
        r.image_corr = j.at("image_corr").get<std::string>();
        r.image_adv = j.at("image_adv").get<std::string>();
        const Json &g = j.at("generation");
        r.params.model = g.at("model").get<std::string>();
        r.params.steps = g.at("steps").get<int>();
        r.params.seed = g.at("seed").get<std::uint64_t>();
        return r;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed pair record: ") + e.what());
    }
}

std::vector<PairJob> plan_pairs(const std::vector<Triplet> &triplets, int pairs_per_prompt) {
    if (pairs_per_prompt < 1) {
        fail(ErrorCode::InvalidArgument, "pairs_per_prompt must be >= 1");
    }
    std::vector<PairJob> jobs;
    jobs.reserve(triplets.size() * static_cast<std::size_t>(pairs_per_prompt));
    for (const auto &t : triplets) {
        for (int k = 0; k < pairs_per_prompt; ++k) {
            jobs.push_back({t.id + "-p" + std::to_string(k), &t, k});
        }
    }
    return jobs;
}

std::uint64_t pair_seed(std::uint64_t run_seed, const std::string &pair_id) {
    // keep seeds in 31 bits; several diffusion servers reject larger values
    return derive_seed(run_seed, "pair:" + pair_id) & 0x7fffffffULL;
}

void generate_pairs(const std::vector<Triplet> &triplets, ImageGenerator &endpoint, BlobStore &blobs,
                    const PairGenOptions &options, const std::set<std::string> &done,
                    const std::function<void(const PairRecord &)> &on_pair,
                    const std::function<void(const PairFailure &)> &on_failure) {
    if (options.steps < 1) {
        fail(ErrorCode::InvalidArgument, "inference steps must be >= 1");
    }
    std::vector<PairJob> todo;
    for (auto &job : plan_pairs(triplets, options.pairs_per_prompt)) {
        if (done.count(job.pair_id) == 0) {
            todo.push_back(job);
        }
    }
    const std::string model = endpoint.model();

    using Outcome = std::variant<PairRecord, PairFailure>;
    auto work = [&](std::size_t i) -> Outcome {
        const PairJob &job = todo[i];
        const Triplet &t = *job.triplet;
        PairRecord r;
        r.pair_id = job.pair_id;
        r.triplet_id = t.id;
        r.domain = t.domain;
        r.text = t.text;
        r.correct = t.correct;
        r.adversarial = t.adversarial;
        r.params = {model, options.steps, pair_seed(options.seed, job.pair_id)};
        const char *side = "corr";
        try {
            r.image_corr = blobs.put(endpoint.generate(t.correct, options.steps, r.params.seed));
            side = "adv";
            r.image_adv = blobs.put(endpoint.generate(t.adversarial, options.steps, r.params.seed));
        } catch (const Error &e) {
            if (e.code() != ErrorCode::EndpointError && e.code() != ErrorCode::ParseError) {
                throw;
            }
            return PairFailure{job.pair_id, side, e.what()};
        }
        return r;
    };
    auto commit = [&](std::size_t, Outcome out) {
        if (auto *r = std::get_if<PairRecord>(&out)) {
            on_pair(*r);
        } else if (on_failure) {
            on_failure(std::get<PairFailure>(out));
        }
    };
    ordered_parallel_map<Outcome>(todo.size(), options.width, work, commit);
}

std::vector<PairRecord> generate_pairs(const std::vector<Triplet> &triplets, ImageGenerator &endpoint,
                                       BlobStore &blobs, const PairGenOptions &options) {
    std::vector<PairRecord> out;
    generate_pairs(triplets, endpoint, blobs, options, {}, [&](const PairRecord &r) { out.push_back(r); });
    return out;
}

int parse_filter_score(std::string_view reply) {
    static const std::regex number(R"([-+]?\d+(\.\d+)?)");
    const std::string s(reply);
    std::smatch m;
    if (!std::regex_search(s, m, number)) {
        fail(ErrorCode::ScoreParseError, "no score in reply: '" + s.substr(0, 80) + "'");
    }
    const std::string tok = m.str(0);
    if (m[1].matched && m.str(1).find_first_not_of(".0") != std::string::npos) {
        fail(ErrorCode::ScoreParseError, "non-integer score '" + tok + "'");
    }
    const long value = std::stol(tok);
    if (value < kFilterScoreMin || value > kFilterScoreMax) {
        fail(ErrorCode::ScoreParseError, "score " + tok + " outside 1..10");
    }
    return static_cast<int>(value);
}

ImageRating rate_image(AlignmentRater &rater, const std::string &rubric_prompt, const std::string &image) {
    ImageRating out;
    for (int q = 1; q <= 2; ++q) {
        out.queries = q;
        try {
            out.score = parse_filter_score(rater.rate(rubric_prompt, image));
            out.error.clear();
            return out;
        } catch (const Error &e) {
            if (e.code() != ErrorCode::ScoreParseError) {
                throw;
            }
            out.error = e.what();
        }
    }
    return out;
}

namespace {

Json opt_int(const std::optional<int> &v) { return v ? Json(*v) : Json(nullptr); }

std::optional<int> read_opt_int(const Json &j, const char *key) {
    if (!j.contains(key) || j[key].is_null()) {
        return std::nullopt;
    }
    return j[key].get<int>();
}

} // namespace

Json FilterRecord::to_json() const {
    Json j = {{"pair_id", pair_id},
              {"triplet_id", triplet_id},
              {"domain", to_string(domain)},
              {"score_corr", opt_int(score_corr)},
              {"score_adv", opt_int(score_adv)},
              {"retained", retained}};
    if (!note.empty()) {
        j["note"] = note;
    }
    return j;
}

FilterRecord FilterRecord::from_json(const Json &j) {
    try {
        FilterRecord r;
        r.pair_id = j.at("pair_id").get<std::string>();
        r.triplet_id = j.at("triplet_id").get<std::string>();
        r.domain = parse_domain(j.at("domain").get<std::string>());
        r.score_corr = read_opt_int(j, "score_corr");
        r.score_adv = read_opt_int(j, "score_adv");
        r.retained = j.at("retained").get<bool>();
        r.note = j.value("note", "");
        return r;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed filtration record: ") + e.what());
    }
}

void check_threshold(int threshold) {
    if (threshold < kFilterScoreMin || threshold > kFilterScoreMax) {
        fail(ErrorCode::InvalidArgument, "threshold must be in [1,10], got " + std::to_string(threshold));
    }
}

bool passes_threshold(const std::optional<int> &corr, const std::optional<int> &adv, int threshold) {
    return corr && adv && *corr >= threshold && *adv >= threshold;
}

std::vector<FilterRecord> apply_threshold(std::vector<FilterRecord> records, int threshold) {
    check_threshold(threshold);
    for (auto &r : records) {
        r.retained = passes_threshold(r.score_corr, r.score_adv, threshold);
    }
    return records;
}

void filter_pairs(const std::vector<PairRecord> &pairs, AlignmentRater &rater, const BlobStore &blobs,
                  const AssetLibrary &assets, int threshold, std::size_t width, const std::set<std::string> &done,
                  const std::function<void(const FilterRecord &)> &on_record) {
    check_threshold(threshold);
    const Asset &rubric = assets.get("rubric.filtration");
    std::vector<const PairRecord *> todo;
    for (const auto &p : pairs) {
        if (done.count(p.pair_id) == 0) {
            todo.push_back(&p);
        }
    }
    auto load = [&](const std::string &digest) {
        auto bytes = blobs.get(digest);
        if (!bytes) {
            fail(ErrorCode::MissingManifestError, "image blob " + digest + " is missing or corrupt");
        }
        return *bytes;
    };
    auto work = [&](std::size_t i) {
        const PairRecord &p = *todo[i];
        FilterRecord r;
        r.pair_id = p.pair_id;
        r.triplet_id = p.triplet_id;
        r.domain = p.domain;
        const auto corr = rate_image(rater, fill_placeholders(rubric.text, {{"prompt", p.correct}}), load(p.image_corr));
        const auto adv = rate_image(rater, fill_placeholders(rubric.text, {{"prompt", p.adversarial}}), load(p.image_adv));
        r.score_corr = corr.score;
        r.score_adv = adv.score;
        if (!corr.score) {
            r.note = "corr unscored: " + corr.error;
        } else if (!adv.score) {
            r.note = "adv unscored: " + adv.error;
        }
        r.retained = passes_threshold(r.score_corr, r.score_adv, threshold);
        return r;
    };
    ordered_parallel_map<FilterRecord>(todo.size(), width, work,
                                       [&](std::size_t, FilterRecord r) { on_record(r); });
}

Json FiltrationSummary::to_json() const {
    Json d = Json::object();
    for (const auto &[name, r] : domains) {
        d[name] = {{"total", r.total}, {"retained", r.retained}, {"unscored", r.unscored}, {"retention_rate", r.rate()}};
    }
    return {{"threshold", threshold}, {"domains", d}};
}

FiltrationSummary summarize_filtration(const std::vector<FilterRecord> &records, int threshold) {
    check_threshold(threshold);
    FiltrationSummary s;
    s.threshold = threshold;
    for (const auto &r : records) {
        const bool kept = passes_threshold(r.score_corr, r.score_adv, threshold);
        for (const std::string &key : {std::string(to_string(r.domain)), std::string("overall")}) {
            auto &d = s.domains[key];
            ++d.total;
            d.retained += kept ? 1 : 0;
            d.unscored += r.scored() ? 0 : 1;
        }
    }
    return s;
}

} // namespace protobias
