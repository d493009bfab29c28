#pragma once

#include "protobias/assets.hpp"
#include "protobias/blob_store.hpp"
#include "protobias/jsonl.hpp"
#include "protobias/prompt_forge.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace protobias {

inline constexpr int kDefaultPairsPerPrompt = 5;
inline constexpr int kDefaultInferenceSteps = 5;
inline constexpr int kDefaultFilterThreshold = 8;

struct GenerationParams {
    std::string model;
    int steps = kDefaultInferenceSteps;
    std::uint64_t seed = 0; // shared by both sides of a pair
};

// One (correct, adversarial) image pair generated from a triplet.
struct PairRecord {
    std::string pair_id; // <triplet_id>-p<k>
    std::string triplet_id;
    Domain domain = Domain::Animals;
    std::string text;
    std::string correct;
    std::string adversarial;
    std::string image_corr; // sha256 of stored bytes
    std::string image_adv;
    GenerationParams params;

    Json to_json() const;
    static PairRecord from_json(const Json &j);
};

class ImageGenerator {
public:
    virtual ~ImageGenerator() = default;
    virtual std::string generate(const std::string &prompt, int steps, std::uint64_t seed) = 0;
    virtual std::string model() const = 0;
};

struct PairGenOptions {
    int pairs_per_prompt = kDefaultPairsPerPrompt;
    int steps = kDefaultInferenceSteps;
    std::uint64_t seed = 0;
    std::size_t width = 1;
};

struct PairFailure {
    std::string pair_id;
    std::string side;
    std::string error;

    Json to_json() const { return {{"pair_id", pair_id}, {"side", side}, {"error", error}}; }
};

// One unit of image work, in deterministic order.
struct PairJob {
    std::string pair_id;
    const Triplet *triplet = nullptr;
    int index = 0;
};

std::vector<PairJob> plan_pairs(const std::vector<Triplet> &triplets, int pairs_per_prompt);

std::uint64_t pair_seed(std::uint64_t run_seed, const std::string &pair_id);

/// Generates the pairs not listed in `done`, storing image bytes in `blobs`.
/// A pair whose either side still fails after the client's retries is dropped
/// and reported through `on_failure` (PartialFailure); other pairs continue.
/// Commits reach `on_pair` in plan order.
void generate_pairs(const std::vector<Triplet> &triplets, ImageGenerator &endpoint, BlobStore &blobs,
                    const PairGenOptions &options, const std::set<std::string> &done,
                    const std::function<void(const PairRecord &)> &on_pair,
                    const std::function<void(const PairFailure &)> &on_failure = {});

/// Convenience wrapper returning every generated record.
std::vector<PairRecord> generate_pairs(const std::vector<Triplet> &triplets, ImageGenerator &endpoint,
                                       BlobStore &blobs, const PairGenOptions &options);

// ---- filtration -------------------------------------------------------------

inline constexpr int kFilterScoreMin = 1;
inline constexpr int kFilterScoreMax = 10;

class AlignmentRater {
public:
    virtual ~AlignmentRater() = default;
    /// Raw model reply for (rubric prompt, image).
    virtual std::string rate(const std::string &rubric_prompt, const std::string &image_bytes) = 0;
    virtual std::string model() const = 0;
};

/// A single integer 1..10 from a rater reply ("8", "Score: 8", "8/10").
/// Throws ScoreParseError for no number, a fractional number, or out of range.
int parse_filter_score(std::string_view reply);

struct ImageRating {
    std::optional<int> score;
    int queries = 0;
    std::string error; // last parse error when unscored
};

/// Asks once, re-queries once on ScoreParseError, then gives up.
ImageRating rate_image(AlignmentRater &rater, const std::string &rubric_prompt, const std::string &image);

struct FilterRecord {
    std::string pair_id;
    std::string triplet_id;
    Domain domain = Domain::Animals;
    std::optional<int> score_corr;
    std::optional<int> score_adv;
    bool retained = false;
    std::string note; // why a pair is unscored

    bool scored() const noexcept { return score_corr && score_adv; }
    Json to_json() const;
    static FilterRecord from_json(const Json &j);
};

/// Pair-level rule: both sides scored and both >= threshold.
bool passes_threshold(const std::optional<int> &corr, const std::optional<int> &adv, int threshold);

/// Recomputes `retained` for every record. Pure.
std::vector<FilterRecord> apply_threshold(std::vector<FilterRecord> records, int threshold);

void check_threshold(int threshold);

/// Rates both images of every pair not in `done` against their own generation
/// prompt. Commits reach `on_record` in input order.
void filter_pairs(const std::vector<PairRecord> &pairs, AlignmentRater &rater, const BlobStore &blobs,
                  const AssetLibrary &assets, int threshold, std::size_t width, const std::set<std::string> &done,
                  const std::function<void(const FilterRecord &)> &on_record);

struct DomainRetention {
    std::size_t total = 0;
    std::size_t retained = 0;
    std::size_t unscored = 0;
    double rate() const noexcept { return total == 0 ? 0.0 : static_cast<double>(retained) / static_cast<double>(total); }
};

struct FiltrationSummary {
    int threshold = kDefaultFilterThreshold;
    std::map<std::string, DomainRetention> domains; // plus "overall"
    Json to_json() const;
};

FiltrationSummary summarize_filtration(const std::vector<FilterRecord> &records, int threshold);

} // namespace protobias
