#include "protobias/pair_reward.hpp"

#include "protobias/error.hpp"
#include "protobias/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace protobias {

void RewardConfig::validate() const {
    if (!(margin > 0.0 && margin <= 1.0)) {
        fail(ErrorCode::RangeError, "reward margin must be in (0, 1]");
    }
    if (!(penalty_slope >= 1.0) || !std::isfinite(penalty_slope)) {
        fail(ErrorCode::RangeError, "reward penalty slope must be >= 1");
    }
}

double reward_from_delta(double delta, const RewardConfig &cfg) {
    cfg.validate();
    if (!(delta >= -1.0 && delta <= 1.0)) {
        fail(ErrorCode::RangeError, "score difference outside [-1, 1]");
    }
    if (delta >= 0.0) {
        return std::min(delta / cfg.margin, 1.0);
    }
    return std::max(cfg.penalty_slope * delta, -1.0);
}

double pair_reward(double s_corr, double s_adv, const RewardConfig &cfg) {
    if (!(s_corr >= 0.0 && s_corr <= 1.0 && s_adv >= 0.0 && s_adv <= 1.0)) {
        fail(ErrorCode::RangeError, "scores must lie in [0, 1]");
    }
    return reward_from_delta(s_corr - s_adv, cfg);
}

Json RewardSample::to_json() const {
    return {{"pair_id", pair_id},       {"text", text},     {"image_corr", image_corr},
            {"image_adv", image_adv},   {"domain", to_string(domain)}, {"split", split}};
}

RewardSample RewardSample::from_json(const Json &j) {
    try {
        RewardSample s;
        s.pair_id = j.at("pair_id").get<std::string>();
        s.text = j.at("text").get<std::string>();
        s.image_corr = j.at("image_corr").get<std::string>();
        s.image_adv = j.at("image_adv").get<std::string>();
        s.domain = parse_domain(j.at("domain").get<std::string>());
        s.split = j.at("split").get<std::string>();
        return s;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed reward sample: ") + e.what());
    }
}

std::vector<RewardSample> export_training_set(const std::vector<PairRecord> &pairs, std::size_t n,
                                              std::uint64_t seed, const std::set<std::string> &eval_ids) {
    if (n == 0) {
        return {};
    }
    std::vector<StratifiedItem> items;
    items.reserve(pairs.size());
    for (const auto &p : pairs) {
        items.push_back({p.pair_id, std::string(to_string(p.domain))});
    }
    std::vector<RewardSample> out;
    for (std::size_t i : stratified_sample(items, n, seed)) {
        const PairRecord &p = pairs[i];
        if (eval_ids.count(p.pair_id) != 0) {
            fail(ErrorCode::OverlapError, "pair " + p.pair_id + " is part of an evaluation split");
        }
        out.push_back({p.pair_id, p.text, p.image_corr, p.image_adv, p.domain, "train"});
    }
    return out;
}

} // namespace protobias
