#include "protobias/contrast_eval.hpp"

#include "protobias/error.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace protobias {

namespace {

void require_nonempty(std::span<const ScoredPair> scores, const char *what) {
    if (scores.empty()) {
        fail(ErrorCode::EmptyInputError, std::string(what) + " needs at least one score pair");
    }
}

int domain_rank(const std::string &d) {
    if (d == "animals") return 0;
    if (d == "demography") return 1;
    if (d == "objects") return 2;
    if (d == "overall") return 4;
    return 3; // unknown domains sort before overall, by name
}

EvalRow make_row(const std::string &metric, const std::string &domain, const std::vector<ScoredPair> &v) {
    EvalRow row;
    row.metric = metric;
    row.domain = domain;
    row.n_pairs = v.size();
    row.failure_rate = failure_rate(v);
    row.averages = average_scores(v);
    row.margins = ranking_margins(v);
    return row;
}

std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string comment_header(const EvalReport &r) {
    const Json &p = r.provenance;
    std::string out = "# schema_version: " + std::to_string(p.value("schema_version", kSchemaVersion)) + "\n";
    out += "# seed: ";
    out += p.contains("seed") && p["seed"].is_number_unsigned() ? std::to_string(p["seed"].get<std::uint64_t>())
                                                                : std::string("none");
    out += "\n";
    if (p.contains("sources")) {
        for (const auto &s : p["sources"]) {
            out += "# source: " + s.value("file", "") + " sha256=" + s.value("sha256", "") + "\n";
        }
    }
    return out;
}

std::string pad_left(const std::string &s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string pad_right(const std::string &s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string opt4(const std::optional<double> &v) { return v ? fmt("%.4f", *v) : "n/a"; }
std::string opt12(const std::optional<double> &v) { return v ? fmt("%.12g", *v) : ""; }
Json opt_json(const std::optional<double> &v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_opt(const Json &j, const char *key) {
    if (!j.contains(key) || j[key].is_null()) {
        return std::nullopt;
    }
    return j[key].get<double>();
}

} // namespace

double failure_rate(std::span<const ScoredPair> scores) {
    require_nonempty(scores, "failure_rate");
    std::size_t failures = 0;
    for (const auto &p : scores) {
        failures += is_failure(p) ? 1 : 0;
    }
    return static_cast<double>(failures) / static_cast<double>(scores.size());
}

Averages average_scores(std::span<const ScoredPair> scores) {
    require_nonempty(scores, "average_scores");
    double sc = 0.0;
    double pa = 0.0;
    for (const auto &p : scores) {
        sc += p.s_corr;
        pa += p.s_adv;
    }
    const auto n = static_cast<double>(scores.size());
    Averages a;
    a.mean_sc = sc / n;
    a.mean_pa = pa / n;
    a.delta = a.mean_sc - a.mean_pa;
    return a;
}

Margins ranking_margins(std::span<const ScoredPair> scores) {
    require_nonempty(scores, "ranking_margins");
    double correct = 0.0;
    double incorrect = 0.0;
    Margins m;
    for (const auto &p : scores) {
        if (is_failure(p)) {
            incorrect += p.s_adv - p.s_corr;
            ++m.n_incorrect;
        } else {
            correct += p.s_corr - p.s_adv;
            ++m.n_correct;
        }
    }
    if (m.n_correct > 0) {
        m.correct_margin = correct / static_cast<double>(m.n_correct);
    }
    if (m.n_incorrect > 0) {
        m.incorrect_margin = incorrect / static_cast<double>(m.n_incorrect);
    }
    return m;
}

EvalReport build_report(const std::vector<EvalInput> &inputs, Json provenance) {
    if (inputs.empty()) {
        fail(ErrorCode::EmptyInputError, "no scores to report");
    }
    std::map<std::string, std::map<std::string, std::vector<ScoredPair>>> groups;
    std::map<std::string, std::vector<ScoredPair>> overall;
    for (const auto &in : inputs) {
        groups[in.metric][in.domain].push_back(in.score);
        overall[in.metric].push_back(in.score);
    }
    EvalReport report;
    report.provenance = provenance.is_object() ? std::move(provenance) : Json::object();
    if (!report.provenance.contains("schema_version")) {
        report.provenance["schema_version"] = kSchemaVersion;
    }
    for (const auto &[metric, by_domain] : groups) {
        std::vector<std::string> domains;
        for (const auto &[d, _] : by_domain) {
            domains.push_back(d);
        }
        std::sort(domains.begin(), domains.end(), [](const std::string &a, const std::string &b) {
            const int ra = domain_rank(a);
            const int rb = domain_rank(b);
            return ra != rb ? ra < rb : a < b;
        });
        for (const auto &d : domains) {
            report.rows.push_back(make_row(metric, d, by_domain.at(d)));
        }
        report.rows.push_back(make_row(metric, "overall", overall.at(metric)));
    }
    return report;
}

Json EvalReport::to_json() const {
    Json rows_json = Json::array();
    for (const auto &r : rows) {
        rows_json.push_back({{"metric", r.metric},
                             {"domain", r.domain},
                             {"n_pairs", r.n_pairs},
                             {"failure_rate", r.failure_rate},
                             {"mean_sc", r.averages.mean_sc},
                             {"mean_pa", r.averages.mean_pa},
                             {"delta", r.averages.delta},
                             {"correct_margin", opt_json(r.margins.correct_margin)},
                             {"n_correct", r.margins.n_correct},
                             {"incorrect_margin", opt_json(r.margins.incorrect_margin)},
                             {"n_incorrect", r.margins.n_incorrect}});
    }
    return {{"kind", "eval_report"}, {"provenance", provenance}, {"rows", rows_json}};
}

EvalReport EvalReport::from_json(const Json &j) {
    try {
        EvalReport r;
        r.provenance = j.at("provenance");
        if (r.provenance.value("schema_version", 0) != kSchemaVersion) {
            fail(ErrorCode::SchemaError, "unsupported eval report schema_version");
        }
        for (const auto &row : j.at("rows")) {
            EvalRow e;
            e.metric = row.at("metric").get<std::string>();
            e.domain = row.at("domain").get<std::string>();
            e.n_pairs = row.at("n_pairs").get<std::size_t>();
            e.failure_rate = row.at("failure_rate").get<double>();
            e.averages = {row.at("mean_sc").get<double>(), row.at("mean_pa").get<double>(),
                          row.at("delta").get<double>()};
            e.margins.correct_margin = read_opt(row, "correct_margin");
            e.margins.incorrect_margin = read_opt(row, "incorrect_margin");
            e.margins.n_correct = row.at("n_correct").get<std::size_t>();
            e.margins.n_incorrect = row.at("n_incorrect").get<std::size_t>();
            r.rows.push_back(std::move(e));
        }
        return r;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed eval report: ") + e.what());
    }
}

std::string render_report_text(const EvalReport &report) {
    std::size_t mw = 6;
    for (const auto &r : report.rows) {
        mw = std::max(mw, r.metric.size());
    }
    std::string out = comment_header(report);
    auto line = [&](const std::vector<std::string> &c) {
        out += pad_right(c[0], mw) + "  " + pad_right(c[1], 10);
        static const std::size_t widths[] = {6, 9, 7, 7, 7, 11, 6, 10, 5};
        for (std::size_t i = 2; i < c.size(); ++i) {
            out += "  " + pad_left(c[i], widths[i - 2]);
        }
        out += "\n";
    };
    line({"metric", "domain", "n", "fail_rate", "mean_sc", "mean_pa", "delta", "corr_margin", "n_corr",
          "inc_margin", "n_inc"});
    for (const auto &r : report.rows) {
        line({r.metric, r.domain, std::to_string(r.n_pairs), fmt("%.4f", r.failure_rate),
              fmt("%.4f", r.averages.mean_sc), fmt("%.4f", r.averages.mean_pa), fmt("%.4f", r.averages.delta),
              opt4(r.margins.correct_margin), std::to_string(r.margins.n_correct), opt4(r.margins.incorrect_margin),
              std::to_string(r.margins.n_incorrect)});
    }
    return out;
}

std::string render_report_csv(const EvalReport &report) {
    std::string out = comment_header(report);
    out += "metric,domain,n_pairs,failure_rate,mean_sc,mean_pa,delta,correct_margin,n_correct,incorrect_margin,"
           "n_incorrect\n";
    for (const auto &r : report.rows) {
        out += r.metric + "," + r.domain + "," + std::to_string(r.n_pairs) + "," + fmt("%.12g", r.failure_rate) +
               "," + fmt("%.12g", r.averages.mean_sc) + "," + fmt("%.12g", r.averages.mean_pa) + "," +
               fmt("%.12g", r.averages.delta) + "," + opt12(r.margins.correct_margin) + "," +
               std::to_string(r.margins.n_correct) + "," + opt12(r.margins.incorrect_margin) + "," +
               std::to_string(r.margins.n_incorrect) + "\n";
    }
    return out;
}

std::string render_failure_plot_csv(const EvalReport &report) {
    std::string out = comment_header(report) + "metric,domain,failure_rate\n";
    for (const auto &r : report.rows) {
        out += r.metric + "," + r.domain + "," + fmt("%.12g", r.failure_rate) + "\n";
    }
    return out;
}

std::string render_sc_pa_plot_csv(const EvalReport &report) {
    std::string out = comment_header(report) + "metric,domain,mean_sc,mean_pa,delta\n";
    for (const auto &r : report.rows) {
        out += r.metric + "," + r.domain + "," + fmt("%.12g", r.averages.mean_sc) + "," +
               fmt("%.12g", r.averages.mean_pa) + "," + fmt("%.12g", r.averages.delta) + "\n";
    }
    return out;
}

} // namespace protobias
