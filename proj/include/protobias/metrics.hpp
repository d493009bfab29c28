#pragma once

#include "protobias/assets.hpp"
#include "protobias/blob_store.hpp"
#include "protobias/jsonl.hpp"
#include "protobias/media_pipeline.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace protobias {

enum class MetricId { ClipScore, PickScore, VqaScore, LlmJudge, ProtoScore };

std::string_view to_string(MetricId id) noexcept;
MetricId parse_metric_id(std::string_view name);
const std::vector<MetricId> &all_metrics();

// ---- normalizations: pure, monotone nondecreasing, into [0,1] ---------------

double normalize_clip(double cosine);        // clamp(2.5 * max(cos, 0), 0, 1)
double normalize_pick(double logit);         // logistic, midpoint at 0
double normalize_judge(int rating);          // (k - 1) / 3, k in 1..4
double normalize_proto(double value);        // clamp to [0, 1]
double normalize(MetricId id, double raw);

/// P(yes) after renormalizing the (yes, no) pair to sum to 1.
/// Throws ProbabilityUnavailableError when both are zero or either is invalid.
double yes_probability(double p_yes, double p_no);

double cosine(const std::vector<double> &a, const std::vector<double> &b); // DegenerateEmbeddingError on zero norm

/// {"score": k} with integer k in 1..4 from the first JSON object of a reply.
int parse_judge_rating(std::string_view reply);

/// First decimal number in a reply ("score: 0.40" -> 0.40).
double parse_decimal_score(std::string_view reply);

// ---- scorers ------------------------------------------------------------------

struct RawScore {
    double raw = 0.0;
    double normalized = 0.0;
};

class Metric {
public:
    virtual ~Metric() = default;
    virtual MetricId id() const = 0;
    virtual std::string model() const = 0;
    /// Versioned assets that shape the request (hashed into score headers).
    virtual Json assets() const { return Json::object(); }
    /// One (text, image) score. Throws EndpointError, ScoreParseError,
    /// ProbabilityUnavailableError or DegenerateEmbeddingError.
    virtual RawScore score(const std::string &text, const std::string &image_bytes) = 0;

    /// Row label in reports; judge-style metrics carry their model.
    std::string label() const;
};

struct MetricScore {
    std::string metric; // label
    std::string pair_id;
    Domain domain = Domain::Animals;
    double s_corr = 0.0;
    double s_adv = 0.0;
    double raw_corr = 0.0;
    double raw_adv = 0.0;
    std::string judge_model;
    std::string timestamp;

    Json to_json() const;
    static MetricScore from_json(const Json &j);
};

// A pair the metric could not score (parse failure after one re-query).
struct UnscoredPair {
    std::string metric;
    std::string pair_id;
    Domain domain = Domain::Animals;
    std::string error;

    Json to_json() const;
};

/// Indices of a seeded sample of n pairs, even across the domains present.
/// n = 0 gives an empty sample. Throws InsufficientPairsError.
std::vector<std::size_t> sample_pairs(const std::vector<PairRecord> &pairs, std::size_t n, std::uint64_t seed);

/// Scores both images of every pair not in `done` with one metric
/// configuration. ScoreParseError is retried once per image, then the pair is
/// reported unscored; ProbabilityUnavailableError aborts (metric unsupported).
void score_pairs(const std::vector<PairRecord> &pairs, Metric &metric, const BlobStore &blobs, std::size_t width,
                 const std::set<std::string> &done, const std::function<void(const MetricScore &)> &on_score,
                 const std::function<void(const UnscoredPair &)> &on_unscored = {});

/// UTC ISO-8601 timestamp; honors SOURCE_DATE_EPOCH for reproducible files.
std::string utc_timestamp();

/// Filename-safe form of a metric label ("llm_judge/gpt-4o" -> "llm_judge__gpt-4o").
std::string label_filename(const std::string &label);

} // namespace protobias
