#pragma once

#include "protobias/endpoint.hpp"
#include "protobias/human_study.hpp"
#include "protobias/metrics.hpp"
#include "protobias/pair_reward.hpp"
#include "protobias/taxonomy.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace protobias {

inline constexpr std::size_t kDefaultPromptsPerDomain = 100;
inline constexpr std::size_t kDefaultEvalPairs = 1000;
inline constexpr std::size_t kDefaultAnnotationItems = 300;
inline constexpr std::size_t kDefaultWidth = 4;

// Everything a run needs. Loaded from a JSON file (see README), then
// overridden by CLI flags; endpoint keys only ever come from the environment.
struct RunConfig {
    std::uint64_t seed = 0;
    std::vector<Domain> domains = all_domains();
    std::size_t prompts_per_domain = kDefaultPromptsPerDomain;
    std::size_t generation_attempts = kDefaultGenerationAttempts;
    int pairs_per_prompt = kDefaultPairsPerPrompt;
    int steps = kDefaultInferenceSteps;
    int threshold = kDefaultFilterThreshold;
    std::size_t eval_n = kDefaultEvalPairs;
    std::size_t training_n = 0; // 0: largest even sample the pool allows
    std::vector<MetricId> metrics; // empty: every metric whose endpoint is configured
    std::size_t width = kDefaultWidth;
    std::filesystem::path taxonomy = bundled_taxonomy_dir();
    std::filesystem::path assets = AssetLibrary::bundled_dir();
    RewardConfig reward;
    std::size_t annotation_items = kDefaultAnnotationItems;
    std::vector<std::string> annotators = {"ann1", "ann2", "ann3", "ann4", "ann5"};
    std::map<Role, EndpointConfig> endpoints;
    std::filesystem::path out = "run";

    /// Unknown keys are a ConfigError.
    static RunConfig from_json(const Json &j);
    static RunConfig load(const std::filesystem::path &path);
    /// Defaults plus environment-resolved endpoints.
    static RunConfig defaults();

    /// Points every role at a mock server base URL.
    void use_mock(const std::string &base);
};

// Output tree under the run root.
struct RunLayout {
    std::filesystem::path root;

    std::filesystem::path triplets() const { return root / "triplets" / "triplets.jsonl"; }
    std::filesystem::path rejections() const { return root / "triplets" / "rejections.jsonl"; }
    std::filesystem::path images() const { return root / "images"; }
    std::filesystem::path manifests() const { return root / "manifests"; }
    std::filesystem::path pairs() const { return manifests() / "pairs.jsonl"; }
    std::filesystem::path image_failures() const { return manifests() / "image_failures.jsonl"; }
    std::filesystem::path filtered() const { return manifests() / "filtered.jsonl"; }
    std::filesystem::path eval_split() const { return manifests() / "eval_split.jsonl"; }
    std::filesystem::path training_set() const { return manifests() / "training_set.jsonl"; }
    std::filesystem::path scores() const { return root / "scores"; }
    std::filesystem::path reports() const { return root / "reports"; }
    std::filesystem::path annotations() const { return root / "annotations"; }
};

// Lazily built clients, one per role.
class EndpointSet {
public:
    explicit EndpointSet(std::map<Role, EndpointConfig> configs);
    bool configured(Role role) const;
    /// ConfigError when the role has no URL.
    HttpEndpoint &get(Role role);

private:
    std::map<Role, EndpointConfig> m_configs;
    std::map<Role, std::unique_ptr<HttpEndpoint>> m_clients;
};

// Stages. Each one reads the previous stage's manifest, skips work already
// recorded in its own, appends the rest and returns a JSON summary.
Json run_gen_prompts(const RunConfig &cfg, EndpointSet &endpoints);
Json run_gen_images(const RunConfig &cfg, EndpointSet &endpoints);
Json run_filter(const RunConfig &cfg, EndpointSet &endpoints);
/// Draws (or reuses) the eval split, then scores it with every metric.
Json run_score(const RunConfig &cfg, EndpointSet &endpoints);
/// Score manifests to reports/eval_report.json. `score_files` empty means
/// every file under scores/. MissingManifestError when there are none.
Json run_evaluate(const RunConfig &cfg, const std::vector<std::filesystem::path> &score_files = {});
/// Renders the eval report, plot series, and human-study tables when
/// annotations exist.
Json run_report(const RunConfig &cfg);
Json run_export_training(const RunConfig &cfg);

/// Loads annotations/batch.json, or draws it from the eval split and saves it.
AnnotationBatch prepare_annotation_batch(const RunConfig &cfg);

// Manifest readers used by several stages.
std::vector<PairRecord> load_pairs(const RunLayout &layout);
std::vector<FilterRecord> load_filtered(const RunLayout &layout);
/// Pairs in manifest order that passed filtration.
std::vector<PairRecord> load_retained(const RunLayout &layout);
std::vector<PairRecord> load_eval_pairs(const RunLayout &layout);
std::vector<MetricScore> load_scores(const std::filesystem::path &file);

} // namespace protobias
