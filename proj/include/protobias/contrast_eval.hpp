#pragma once

#include "protobias/jsonl.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace protobias {

struct ScoredPair {
    double s_corr = 0.0;
    double s_adv = 0.0;
};

/// The metric prefers the adversarial image: s_adv >= s_corr (ties fail).
constexpr bool is_failure(double s_corr, double s_adv) noexcept { return s_adv >= s_corr; }
constexpr bool is_failure(const ScoredPair &p) noexcept { return is_failure(p.s_corr, p.s_adv); }

/// Fraction of failures. Throws EmptyInputError.
double failure_rate(std::span<const ScoredPair> scores);

struct Averages {
    double mean_sc = 0.0;
    double mean_pa = 0.0;
    double delta = 0.0; // mean_sc - mean_pa
};

Averages average_scores(std::span<const ScoredPair> scores);

// Correct side: pairs with s_corr > s_adv, margin = mean(s_corr - s_adv).
// Incorrect side: pairs with s_adv >= s_corr, margin = mean(s_adv - s_corr);
// ties land here with margin 0. An empty side has no margin (nullopt).
struct Margins {
    std::optional<double> correct_margin;
    std::optional<double> incorrect_margin;
    std::size_t n_correct = 0;
    std::size_t n_incorrect = 0;
};

Margins ranking_margins(std::span<const ScoredPair> scores);

struct EvalInput {
    std::string metric;
    std::string domain;
    ScoredPair score;
};

struct EvalRow {
    std::string metric;
    std::string domain; // a domain name or "overall"
    std::size_t n_pairs = 0;
    double failure_rate = 0.0;
    Averages averages;
    Margins margins;
};

struct EvalReport {
    std::vector<EvalRow> rows; // metric ascending, then animals/demography/objects/overall
    Json provenance = Json::object(); // schema_version, seed, sources

    Json to_json() const;
    static EvalReport from_json(const Json &j);
};

/// One row per (metric, domain) present plus an "overall" row per metric.
/// Sums run in input order. Throws EmptyInputError.
EvalReport build_report(const std::vector<EvalInput> &inputs, Json provenance = Json::object());

// Renderings. Every file opens with '#' comment lines carrying the schema
// version, seed and source hashes from the provenance block.
std::string render_report_text(const EvalReport &report); // fixed 4 decimals
std::string render_report_csv(const EvalReport &report);  // %.12g
std::string render_failure_plot_csv(const EvalReport &report);
std::string render_sc_pa_plot_csv(const EvalReport &report);

} // namespace protobias
