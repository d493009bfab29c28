#include "protobias/metrics.hpp"

#include "protobias/error.hpp"
#include "protobias/parallel.hpp"
#include "protobias/prompt_forge.hpp"
#include "protobias/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <regex>

namespace protobias {

std::string_view to_string(MetricId id) noexcept {
    switch (id) {
    case MetricId::ClipScore: return "clipscore";
    case MetricId::PickScore: return "pickscore";
    case MetricId::VqaScore: return "vqascore";
    case MetricId::LlmJudge: return "llm_judge";
    case MetricId::ProtoScore: return "protoscore";
    }
    return "unknown";
}

const std::vector<MetricId> &all_metrics() {
    static const std::vector<MetricId> ids{MetricId::ClipScore, MetricId::PickScore, MetricId::VqaScore,
                                           MetricId::LlmJudge, MetricId::ProtoScore};
    return ids;
}

MetricId parse_metric_id(std::string_view name) {
    for (MetricId id : all_metrics()) {
        if (to_string(id) == name) {
            return id;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

double normalize_clip(double cosine) { return std::clamp(2.5 * std::max(cosine, 0.0), 0.0, 1.0); }

double normalize_pick(double logit) {
    // split by sign so neither branch overflows
    if (logit >= 0) {
        return 1.0 / (1.0 + std::exp(-logit));
    }
    const double e = std::exp(logit);
    return e / (1.0 + e);
}

double normalize_judge(int rating) {
    if (rating < 1 || rating > 4) {
        fail(ErrorCode::ScoreParseError, "judge rating " + std::to_string(rating) + " outside 1..4");
    }
    return (rating - 1) / 3.0;
}

double normalize_proto(double value) { return std::clamp(value, 0.0, 1.0); }

double normalize(MetricId id, double raw) {
    switch (id) {
    case MetricId::ClipScore: return normalize_clip(raw);
    case MetricId::PickScore: return normalize_pick(raw);
    case MetricId::VqaScore: return std::clamp(raw, 0.0, 1.0);
    case MetricId::LlmJudge: return normalize_judge(static_cast<int>(raw));
    case MetricId::ProtoScore: return normalize_proto(raw);
    }
    return 0.0;
}

double yes_probability(double p_yes, double p_no) {
    if (!std::isfinite(p_yes) || !std::isfinite(p_no) || p_yes < 0 || p_no < 0 || p_yes + p_no <= 0) {
        fail(ErrorCode::ProbabilityUnavailableError, "no usable yes/no probability mass");
    }
    return p_yes / (p_yes + p_no);
}

double cosine(const std::vector<double> &a, const std::vector<double> &b) {
    if (a.size() != b.size() || a.empty()) {
        fail(ErrorCode::DegenerateEmbeddingError,
             "embedding sizes differ or are empty (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) {
        fail(ErrorCode::DegenerateEmbeddingError, "zero-norm embedding");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

int parse_judge_rating(std::string_view reply) {
    const auto range = find_first_json_object(reply);
    if (!range) {
        fail(ErrorCode::ScoreParseError, "judge reply has no JSON object");
    }
    const Json obj = Json::parse(reply.substr(range->first, range->second - range->first));
    if (!obj.contains("score")) {
        fail(ErrorCode::ScoreParseError, "judge reply has no 'score'");
    }
    const Json &s = obj["score"];
    if (s.is_number_integer()) {
        const auto k = s.get<long long>();
        if (k >= 1 && k <= 4) {
            return static_cast<int>(k);
        }
    } else if (s.is_string()) {
        const std::string v = s.get<std::string>();
        if (v.size() == 1 && v[0] >= '1' && v[0] <= '4') {
            return v[0] - '0';
        }
    }
    fail(ErrorCode::ScoreParseError, "judge score must be an integer 1..4, got " + s.dump());
}

double parse_decimal_score(std::string_view reply) {
    static const std::regex number(R"([-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)");
    const std::string s(reply);
    std::smatch m;
    if (!std::regex_search(s, m, number)) {
        fail(ErrorCode::ScoreParseError, "no decimal in reply: '" + s.substr(0, 80) + "'");
    }
    const double v = std::stod(m.str(0));
    if (!std::isfinite(v)) {
        fail(ErrorCode::ScoreParseError, "non-finite score in reply");
    }
    return v;
}

std::string Metric::label() const {
    if (id() == MetricId::LlmJudge) {
        return std::string(to_string(id())) + "/" + model();
    }
    return std::string(to_string(id()));
}

Json MetricScore::to_json() const {
    return {{"metric", metric},   {"pair_id", pair_id},   {"domain", to_string(domain)},
            {"s_corr", s_corr},   {"s_adv", s_adv},       {"raw_corr", raw_corr},
            {"raw_adv", raw_adv}, {"judge_model", judge_model}, {"timestamp", timestamp}};
}

MetricScore MetricScore::from_json(const Json &j) {
    try {
        MetricScore s;
        s.metric = j.at("metric").get<std::string>();
        s.pair_id = j.at("pair_id").get<std::string>();
        s.domain = parse_domain(j.at("domain").get<std::string>());
        s.s_corr = j.at("s_corr").get<double>();
        s.s_adv = j.at("s_adv").get<double>();
        s.raw_corr = j.value("raw_corr", s.s_corr);
        s.raw_adv = j.value("raw_adv", s.s_adv);
        s.judge_model = j.value("judge_model", "");
        s.timestamp = j.value("timestamp", "");
        if (!(s.s_corr >= 0 && s.s_corr <= 1 && s.s_adv >= 0 && s.s_adv <= 1)) {
            fail(ErrorCode::SchemaError, "score for " + s.pair_id + " outside [0,1]");
        }
        return s;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed score record: ") + e.what());
    }
}

Json UnscoredPair::to_json() const {
    return {{"metric", metric}, {"pair_id", pair_id}, {"domain", to_string(domain)}, {"status", "unscored"},
            {"error", error}};
}

std::vector<std::size_t> sample_pairs(const std::vector<PairRecord> &pairs, std::size_t n, std::uint64_t seed) {
    if (n == 0) {
        return {};
    }
    std::vector<StratifiedItem> items;
    items.reserve(pairs.size());
    for (const auto &p : pairs) {
        items.push_back({p.pair_id, std::string(to_string(p.domain))});
    }
    return stratified_sample(items, n, seed);
}

void score_pairs(const std::vector<PairRecord> &pairs, Metric &metric, const BlobStore &blobs, std::size_t width,
                 const std::set<std::string> &done, const std::function<void(const MetricScore &)> &on_score,
                 const std::function<void(const UnscoredPair &)> &on_unscored) {
    std::vector<const PairRecord *> todo;
    for (const auto &p : pairs) {
        if (done.count(p.pair_id) == 0) {
            todo.push_back(&p);
        }
    }
    const std::string label = metric.label();
    const std::string model = metric.model();

    auto one = [&](const std::string &text, const std::string &digest) {
        auto bytes = blobs.get(digest);
        if (!bytes) {
            fail(ErrorCode::MissingManifestError, "image blob " + digest + " is missing or corrupt");
        }
        try {
            return metric.score(text, *bytes);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::ScoreParseError) {
                throw;
            }
        }
        return metric.score(text, *bytes); // the single re-query
    };

    using Outcome = std::variant<MetricScore, UnscoredPair>;
    auto work = [&](std::size_t i) -> Outcome {
        const PairRecord &p = *todo[i];
        try {
            const RawScore c = one(p.text, p.image_corr);
            const RawScore a = one(p.text, p.image_adv);
            return MetricScore{label, p.pair_id, p.domain, c.normalized, a.normalized, c.raw, a.raw, model,
                               utc_timestamp()};
        } catch (const Error &e) {
            if (e.code() != ErrorCode::ScoreParseError) {
                throw;
            }
            return UnscoredPair{label, p.pair_id, p.domain, e.what()};
        }
    };
    auto commit = [&](std::size_t, Outcome out) {
        if (auto *s = std::get_if<MetricScore>(&out)) {
            on_score(*s);
        } else if (on_unscored) {
            on_unscored(std::get<UnscoredPair>(out));
        }
    };
    ordered_parallel_map<Outcome>(todo.size(), width, work, commit);
}

std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char *sde = std::getenv("SOURCE_DATE_EPOCH"); sde != nullptr && *sde != '\0') {
        t = static_cast<std::time_t>(std::stoll(sde));
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string label_filename(const std::string &label) {
    std::string out;
    for (char c : label) {
        if (c == '/') {
            out += "__";
        } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') {
            out.push_back(c);
        } else {
            out.push_back('_');
        }
    }
    return out;
}

} // namespace protobias
