#pragma once

#include "protobias/jsonl.hpp"
#include "protobias/media_pipeline.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace protobias {

struct RewardConfig {
    double margin = 0.1;        // m in (0, 1]
    double penalty_slope = 2.0; // lambda >= 1

    void validate() const; // RangeError
    Json to_json() const { return {{"margin", margin}, {"penalty_slope", penalty_slope}}; }
};

/// With d = s_corr - s_adv: min(d / m, 1) when d >= 0, max(lambda * d, -1)
/// otherwise. Scores must lie in [0, 1]. Throws RangeError.
double pair_reward(double s_corr, double s_adv, const RewardConfig &cfg = {});

/// The same curve as a function of d in [-1, 1].
double reward_from_delta(double delta, const RewardConfig &cfg = {});

struct RewardSample {
    std::string pair_id;
    std::string text;
    std::string image_corr;
    std::string image_adv;
    Domain domain = Domain::Animals;
    std::string split = "train";

    Json to_json() const;
    static RewardSample from_json(const Json &j);
};

/// Seeded sample of n filtered pairs, even across domains. Every sampled id is
/// checked against `eval_ids`. Errors: OverlapError, InsufficientPairsError.
std::vector<RewardSample> export_training_set(const std::vector<PairRecord> &pairs, std::size_t n,
                                              std::uint64_t seed, const std::set<std::string> &eval_ids);

} // namespace protobias
