#include "protobias/pipeline.hpp"

#include "protobias/clients.hpp"
#include "protobias/contrast_eval.hpp"
#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/mock_endpoints.hpp"

#include <algorithm>
#include <set>

namespace fs = std::filesystem;

namespace protobias {

namespace {

template <class T>
void take(const Json &j, const char *key, T &out) {
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception &e) {
        fail(ErrorCode::ConfigError, std::string("config '") + key + "': " + e.what());
    }
}

Json file_source(const fs::path &p) { return {{"file", p.filename().string()}, {"sha256", sha256_file(p)}}; }

std::string manifest_sha(const fs::path &p) {
    if (!fs::exists(p)) {
        fail(ErrorCode::MissingManifestError, "missing manifest " + p.string() + " (run the earlier stage first)");
    }
    return sha256_file(p);
}

Json taxonomy_sources(const fs::path &path) {
    Json out = Json::object();
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto &e : fs::directory_iterator(path)) {
            if (e.path().extension() == ".json") {
                files.push_back(e.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto &f : files) {
            out[f.filename().string()] = sha256_file(f);
        }
    } else {
        out[path.filename().string()] = sha256_file(path);
    }
    return out;
}

std::set<std::string> ids_of(const std::vector<Json> &records, const char *key) {
    std::set<std::string> ids;
    for (const auto &r : records) {
        if (r.contains(key)) {
            ids.insert(r.at(key).get<std::string>());
        }
    }
    return ids;
}

std::vector<fs::path> score_files_in(const fs::path &dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(dir)) {
        for (const auto &e : fs::directory_iterator(dir)) {
            if (e.path().extension() == ".jsonl") {
                files.push_back(e.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<MetricId> metrics_to_run(const RunConfig &cfg, const EndpointSet &endpoints) {
    if (!cfg.metrics.empty()) {
        return cfg.metrics;
    }
    std::vector<MetricId> out;
    for (MetricId id : all_metrics()) {
        if (endpoints.configured(role_for(id))) {
            out.push_back(id);
        }
    }
    if (out.empty()) {
        fail(ErrorCode::ConfigError, "no scorer endpoint configured (embed, preference, vqa, judge or scorer)");
    }
    return out;
}

} // namespace

// ---- config ---------------------------------------------------------------------

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    for (Role r : all_roles()) {
        cfg.endpoints[r] = resolve_endpoint(r);
    }
    return cfg;
}

namespace {

RunConfig parse_config(const Json &j) {
    if (!j.is_object()) {
        fail(ErrorCode::ConfigError, "config must be a JSON object");
    }
    static const std::set<std::string> known = {
        "seed",  "domains",  "prompts_per_domain", "generation_attempts", "pairs_per_prompt", "steps",
        "threshold", "eval_n", "training_n", "metrics", "width", "taxonomy", "assets", "reward", "annotation",
        "endpoints", "out"};
    for (const auto &[key, _] : j.items()) {
        if (known.count(key) == 0) {
            fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
        }
    }
    RunConfig cfg;
    take(j, "seed", cfg.seed);
    if (j.contains("domains")) {
        cfg.domains.clear();
        for (const auto &d : j["domains"]) {
            cfg.domains.push_back(parse_domain(d.get<std::string>()));
        }
    }
    take(j, "prompts_per_domain", cfg.prompts_per_domain);
    take(j, "generation_attempts", cfg.generation_attempts);
    take(j, "pairs_per_prompt", cfg.pairs_per_prompt);
    take(j, "steps", cfg.steps);
    take(j, "threshold", cfg.threshold);
    take(j, "eval_n", cfg.eval_n);
    take(j, "training_n", cfg.training_n);
    if (j.contains("metrics")) {
        for (const auto &m : j["metrics"]) {
            cfg.metrics.push_back(parse_metric_id(m.get<std::string>()));
        }
    }
    take(j, "width", cfg.width);
    std::string path;
    if (j.contains("taxonomy")) {
        take(j, "taxonomy", path);
        cfg.taxonomy = path;
    }
    if (j.contains("assets")) {
        take(j, "assets", path);
        cfg.assets = path;
    }
    if (j.contains("out")) {
        take(j, "out", path);
        cfg.out = path;
    }
    if (j.contains("reward")) {
        take(j["reward"], "margin", cfg.reward.margin);
        take(j["reward"], "penalty_slope", cfg.reward.penalty_slope);
    }
    if (j.contains("annotation")) {
        take(j["annotation"], "items", cfg.annotation_items);
        take(j["annotation"], "annotators", cfg.annotators);
    }
    const Json endpoints = j.value("endpoints", Json::object());
    for (const auto &[name, _] : endpoints.items()) {
        (void)parse_role(name); // rejects unknown roles
    }
    for (Role r : all_roles()) {
        const std::string name(to_string(r));
        cfg.endpoints[r] = resolve_endpoint(r, endpoints.contains(name) ? endpoints[name] : Json());
    }
    if (cfg.width == 0 || cfg.pairs_per_prompt < 1 || cfg.steps < 1 || cfg.generation_attempts == 0) {
        fail(ErrorCode::ConfigError, "width, pairs_per_prompt, steps and generation_attempts must be positive");
    }
    check_threshold(cfg.threshold);
    cfg.reward.validate();
    return cfg;
}

} // namespace

RunConfig RunConfig::from_json(const Json &j) {
    // bad names and out-of-range values inside a config file are config errors
    try {
        return parse_config(j);
    } catch (const Error &e) {
        if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::RangeError) {
            fail(ErrorCode::ConfigError, e.what());
        }
        throw;
    } catch (const Json::exception &e) {
        fail(ErrorCode::ConfigError, std::string("config: ") + e.what());
    }
}

RunConfig RunConfig::load(const fs::path &path) {
    const std::string text = read_file(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception &e) {
        fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return from_json(j);
}

void RunConfig::use_mock(const std::string &base) {
    for (Role r : all_roles()) {
        endpoints[r] = mock_endpoint_config(r, base);
    }
}

EndpointSet::EndpointSet(std::map<Role, EndpointConfig> configs) : m_configs(std::move(configs)) {}

bool EndpointSet::configured(Role role) const {
    auto it = m_configs.find(role);
    return it != m_configs.end() && it->second.configured();
}

HttpEndpoint &EndpointSet::get(Role role) {
    if (!configured(role)) {
        fail(ErrorCode::ConfigError, "endpoint role '" + std::string(to_string(role)) + "' not configured; set " +
                                         env_prefix(role) + "_URL or pass --mock");
    }
    auto &slot = m_clients[role];
    if (!slot) {
        slot = std::make_unique<HttpEndpoint>(m_configs.at(role));
    }
    return *slot;
}

// ---- readers ------------------------------------------------------------------------

std::vector<PairRecord> load_pairs(const RunLayout &layout) {
    std::vector<PairRecord> out;
    for (const auto &r : read_jsonl(layout.pairs()).records) {
        out.push_back(PairRecord::from_json(r));
    }
    return out;
}

std::vector<FilterRecord> load_filtered(const RunLayout &layout) {
    std::vector<FilterRecord> out;
    for (const auto &r : read_jsonl(layout.filtered()).records) {
        out.push_back(FilterRecord::from_json(r));
    }
    return out;
}

std::vector<PairRecord> load_retained(const RunLayout &layout) {
    std::set<std::string> keep;
    for (const auto &f : load_filtered(layout)) {
        if (f.retained) {
            keep.insert(f.pair_id);
        }
    }
    std::vector<PairRecord> out;
    for (auto &p : load_pairs(layout)) {
        if (keep.count(p.pair_id) != 0) {
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<PairRecord> load_eval_pairs(const RunLayout &layout) {
    std::map<std::string, PairRecord> by_id;
    for (auto &p : load_pairs(layout)) {
        by_id.emplace(p.pair_id, std::move(p));
    }
    std::vector<PairRecord> out;
    for (const auto &r : read_jsonl(layout.eval_split()).records) {
        const std::string id = r.at("pair_id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            fail(ErrorCode::SchemaError, "eval split names unknown pair " + id);
        }
        out.push_back(it->second);
    }
    return out;
}

std::vector<MetricScore> load_scores(const fs::path &file) {
    std::vector<MetricScore> out;
    for (const auto &r : read_jsonl(file).records) {
        if (r.value("status", "") == "unscored") {
            continue;
        }
        out.push_back(MetricScore::from_json(r));
    }
    return out;
}

// ---- stages ---------------------------------------------------------------------------

Json run_gen_prompts(const RunConfig &cfg, EndpointSet &endpoints) {
    const RunLayout layout{cfg.out};
    const Taxonomy taxonomy = load_taxonomy(cfg.taxonomy);
    const AssetLibrary assets = AssetLibrary::load(cfg.assets);
    ChatTextGenerator generator(endpoints.get(Role::TextGen));

    Json domains = Json::array();
    Json templates = Json::object();
    std::vector<GenerationCell> cells;
    for (Domain d : cfg.domains) {
        domains.push_back(to_string(d));
        templates[std::string(to_string(d))] = template_for(d, assets).provenance();
        auto some = enumerate_cells(taxonomy, d, cfg.prompts_per_domain, cfg.seed);
        cells.insert(cells.end(), some.begin(), some.end());
    }
    const Json params = {{"domains", domains},
                         {"prompts_per_domain", cfg.prompts_per_domain},
                         {"attempts", cfg.generation_attempts},
                         {"model", generator.model()},
                         {"templates", templates}};
    const Json sources = {{"taxonomy", taxonomy_sources(cfg.taxonomy)}};
    fs::create_directories(layout.triplets().parent_path());
    JsonlWriter triplets(layout.triplets(), make_header("triplets", cfg.seed, sources, params));
    JsonlWriter rejections(layout.rejections(), make_header("rejections", cfg.seed, sources, params));

    std::set<std::string> done = ids_of(triplets.existing_records(), "id");
    for (const auto &r : rejections.existing_records()) {
        if (r.value("reason", "") == "exhausted") {
            done.insert(r.at("cell_id").get<std::string>());
        }
    }
    std::vector<GenerationCell> todo;
    for (const auto &c : cells) {
        if (done.count(c.id) == 0) {
            todo.push_back(c);
        }
    }

    std::size_t made = 0;
    std::size_t exhausted = 0;
    std::size_t rejected = 0;
    GenerationOptions options;
    options.attempts = cfg.generation_attempts;
    options.width = cfg.width;
    generate_triplets(todo, generator, assets, options, [&](const CellOutcome &o) {
        for (const auto &r : o.rejections) {
            rejections.append(r.to_json());
            ++rejected;
        }
        if (o.triplet) {
            triplets.append(o.triplet->to_json());
            ++made;
        } else {
            rejections.append({{"cell_id", o.cell.id},
                               {"reason", "exhausted"},
                               {"error", "BudgetExhausted"},
                               {"attempts", o.attempts}});
            ++exhausted;
        }
    });
    return {{"stage", "gen-prompts"},
            {"cells", cells.size()},
            {"skipped", cells.size() - todo.size()},
            {"triplets_new", made},
            {"rejections_new", rejected},
            {"exhausted_new", exhausted},
            {"manifest", layout.triplets().string()}};
}

Json run_gen_images(const RunConfig &cfg, EndpointSet &endpoints) {
    const RunLayout layout{cfg.out};
    const std::string triplets_sha = manifest_sha(layout.triplets());
    std::vector<Triplet> triplets;
    for (const auto &r : read_jsonl(layout.triplets()).records) {
        triplets.push_back(Triplet::from_json(r));
    }
    HttpImageGenerator generator(endpoints.get(Role::ImageGen));
    BlobStore blobs(layout.images());

    const Json params = {{"pairs_per_prompt", cfg.pairs_per_prompt}, {"steps", cfg.steps}, {"model", generator.model()}};
    const Json sources = {{"triplets", triplets_sha}};
    fs::create_directories(layout.manifests());
    JsonlWriter pairs(layout.pairs(), make_header("pairs", cfg.seed, sources, params));
    JsonlWriter failures(layout.image_failures(), make_header("image_failures", cfg.seed, sources, params));
    const std::set<std::string> done = ids_of(pairs.existing_records(), "pair_id");

    PairGenOptions options;
    options.pairs_per_prompt = cfg.pairs_per_prompt;
    options.steps = cfg.steps;
    options.seed = cfg.seed;
    options.width = cfg.width;
    std::size_t made = 0;
    std::size_t failed = 0;
    generate_pairs(
        triplets, generator, blobs, options, done,
        [&](const PairRecord &p) {
            pairs.append(p.to_json());
            ++made;
        },
        [&](const PairFailure &f) {
            failures.append(f.to_json());
            ++failed;
        });
    return {{"stage", "gen-images"},
            {"planned", plan_pairs(triplets, cfg.pairs_per_prompt).size()},
            {"skipped", done.size()},
            {"pairs_new", made},
            {"failures_new", failed},
            {"manifest", layout.pairs().string()}};
}

Json run_filter(const RunConfig &cfg, EndpointSet &endpoints) {
    const RunLayout layout{cfg.out};
    const std::string pairs_sha = manifest_sha(layout.pairs());
    const std::vector<PairRecord> pairs = load_pairs(layout);
    const AssetLibrary assets = AssetLibrary::load(cfg.assets);
    ChatAlignmentRater rater(endpoints.get(Role::FilterVlm));
    BlobStore blobs(layout.images());

    const Json params = {{"threshold", cfg.threshold},
                         {"model", rater.model()},
                         {"rubric", assets.get("rubric.filtration").provenance()}};
    JsonlWriter writer(layout.filtered(), make_header("filtration", cfg.seed, {{"pairs", pairs_sha}}, params));
    const std::set<std::string> done = ids_of(writer.existing_records(), "pair_id");
    std::vector<FilterRecord> records;
    for (const auto &r : writer.existing_records()) {
        records.push_back(FilterRecord::from_json(r));
    }
    std::size_t rated = 0;
    filter_pairs(pairs, rater, blobs, assets, cfg.threshold, cfg.width, done, [&](const FilterRecord &r) {
        writer.append(r.to_json());
        records.push_back(r);
        ++rated;
    });

    const FiltrationSummary summary = summarize_filtration(records, cfg.threshold);
    fs::create_directories(layout.reports());
    Json report = summary.to_json();
    report["schema_version"] = kSchemaVersion;
    report["seed"] = cfg.seed;
    report["sources"] = Json::array({file_source(layout.filtered())});
    write_file_atomic(layout.reports() / "filtration_summary.json", report.dump(2) + "\n");
    return {{"stage", "filter"},
            {"pairs", pairs.size()},
            {"skipped", done.size()},
            {"rated_new", rated},
            {"retained", summary.domains.at("overall").retained},
            {"manifest", layout.filtered().string()}};
}

Json run_score(const RunConfig &cfg, EndpointSet &endpoints) {
    const RunLayout layout{cfg.out};
    const std::string pairs_sha = manifest_sha(layout.pairs());
    const std::string filtered_sha = manifest_sha(layout.filtered());
    {
        JsonlWriter split(layout.eval_split(), make_header("eval_split", cfg.seed,
                                                           {{"pairs", pairs_sha}, {"filtered", filtered_sha}},
                                                           {{"n", cfg.eval_n}}));
        if (split.existing_records().empty()) {
            const std::vector<PairRecord> retained = load_retained(layout);
            for (std::size_t i : sample_pairs(retained, cfg.eval_n, cfg.seed)) {
                split.append({{"pair_id", retained[i].pair_id}, {"domain", to_string(retained[i].domain)}});
            }
        }
    }
    const std::string split_sha = sha256_file(layout.eval_split());
    const std::vector<PairRecord> eval_pairs = load_eval_pairs(layout);
    const AssetLibrary assets = AssetLibrary::load(cfg.assets);
    BlobStore blobs(layout.images());
    fs::create_directories(layout.scores());

    Json per_metric = Json::array();
    std::optional<Error> first_error;
    for (MetricId id : metrics_to_run(cfg, endpoints)) {
        auto metric = make_metric(id, endpoints.get(role_for(id)), assets);
        const std::string label = metric->label();
        const fs::path file = layout.scores() / (label_filename(label) + ".jsonl");
        const Json params = {{"metric", label}, {"model", metric->model()}, {"assets", metric->assets()}};
        JsonlWriter writer(file, make_header("scores", cfg.seed, {{"pairs", pairs_sha}, {"eval_split", split_sha}},
                                             params));
        const std::set<std::string> done = ids_of(writer.existing_records(), "pair_id");
        std::size_t scored = 0;
        std::size_t unscored = 0;
        Json entry = {{"metric", label}, {"file", file.string()}, {"skipped", done.size()}};
        try {
            score_pairs(
                eval_pairs, *metric, blobs, cfg.width, done,
                [&](const MetricScore &s) {
                    writer.append(s.to_json());
                    ++scored;
                },
                [&](const UnscoredPair &u) {
                    writer.append(u.to_json());
                    ++unscored;
                });
        } catch (const Error &e) {
            if (e.code() != ErrorCode::ProbabilityUnavailableError) {
                throw;
            }
            // the metric is unsupported by this endpoint; the others still run
            entry["error"] = std::string(e.name());
            entry["message"] = e.what();
            if (!first_error) {
                first_error = e;
            }
        }
        entry["scored_new"] = scored;
        entry["unscored_new"] = unscored;
        per_metric.push_back(entry);
    }
    Json out = {{"stage", "score"}, {"eval_pairs", eval_pairs.size()}, {"metrics", per_metric}};
    if (first_error) {
        throw Error(first_error->code(), std::string(first_error->what()) + "; summary: " + out.dump());
    }
    return out;
}

Json run_evaluate(const RunConfig &cfg, const std::vector<fs::path> &score_files) {
    const RunLayout layout{cfg.out};
    std::vector<fs::path> files = score_files.empty() ? score_files_in(layout.scores()) : score_files;
    if (files.empty()) {
        fail(ErrorCode::MissingManifestError, "no score manifest under " + layout.scores().string() +
                                                  " (run `score` first or pass --scores)");
    }
    std::vector<EvalInput> inputs;
    Json sources = Json::array();
    std::optional<Json> seed;
    bool mixed = false;
    for (const auto &f : files) {
        const JsonlDocument doc = read_jsonl(f);
        if (doc.header.value("stage", "") != "scores") {
            fail(ErrorCode::SchemaError, f.string() + " is not a score manifest");
        }
        const Json s = doc.header.value("seed", Json());
        if (!seed) {
            seed = s;
        } else if (*seed != s) {
            mixed = true;
        }
        for (const auto &r : doc.records) {
            if (r.value("status", "") == "unscored") {
                continue;
            }
            const MetricScore m = MetricScore::from_json(r);
            inputs.push_back({m.metric, std::string(to_string(m.domain)), {m.s_corr, m.s_adv}});
        }
        sources.push_back(file_source(f));
    }
    Json provenance = {{"schema_version", kSchemaVersion}, {"sources", sources}};
    provenance["seed"] = mixed || !seed ? Json() : *seed;
    const EvalReport report = build_report(inputs, provenance);
    fs::create_directories(layout.reports());
    const fs::path out = layout.reports() / "eval_report.json";
    write_file_atomic(out, report.to_json().dump(2) + "\n");
    return {{"stage", "evaluate"}, {"rows", report.rows.size()}, {"scores", inputs.size()}, {"report", out.string()}};
}

Json run_report(const RunConfig &cfg) {
    const RunLayout layout{cfg.out};
    const fs::path in = layout.reports() / "eval_report.json";
    if (!fs::exists(in)) {
        fail(ErrorCode::MissingManifestError, "missing " + in.string() + " (run `evaluate` first)");
    }
    Json j;
    try {
        j = Json::parse(read_file(in));
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, in.string() + ": " + e.what());
    }
    const EvalReport report = EvalReport::from_json(j);
    const fs::path dir = layout.reports();
    write_file_atomic(dir / "report.txt", render_report_text(report));
    write_file_atomic(dir / "report.csv", render_report_csv(report));
    write_file_atomic(dir / "plot_failure_rates.csv", render_failure_plot_csv(report));
    write_file_atomic(dir / "plot_sc_pa.csv", render_sc_pa_plot_csv(report));
    Json written = Json::array({"report.txt", "report.csv", "plot_failure_rates.csv", "plot_sc_pa.csv"});

    const fs::path ann = layout.annotations() / "annotations.jsonl";
    Json out = {{"stage", "report"}, {"dir", dir.string()}};
    if (fs::exists(ann) && fs::exists(layout.annotations() / "batch.json")) {
        const std::vector<AnnotationRecord> records = ingest_annotations(read_file(ann));
        if (!records.empty()) {
            const AgreementMatrix m = agreement_matrix(records);
            write_file_atomic(dir / "agreement.csv", m.to_csv());
            write_file_atomic(dir / "agreement.json", m.to_json().dump(2) + "\n");
            written.push_back("agreement.csv");
            written.push_back("agreement.json");
            std::vector<MetricScore> scores;
            for (const auto &f : score_files_in(layout.scores())) {
                auto s = load_scores(f);
                scores.insert(scores.end(), s.begin(), s.end());
            }
            try {
                const auto rows = human_metric_table(load_batch(layout.annotations()), records, scores);
                write_file_atomic(dir / "human_vs_metrics.txt", render_separation_text(rows));
                written.push_back("human_vs_metrics.txt");
            } catch (const Error &e) {
                if (e.code() != ErrorCode::NoOverlapError) {
                    throw;
                }
                out["human_vs_metrics"] = e.what();
            }
        }
    }
    out["written"] = written;
    return out;
}

AnnotationBatch prepare_annotation_batch(const RunConfig &cfg) {
    const RunLayout layout{cfg.out};
    if (fs::exists(layout.annotations() / "batch.json")) {
        return load_batch(layout.annotations());
    }
    const AnnotationBatch batch =
        build_annotation_batch(load_eval_pairs(layout), cfg.annotation_items, cfg.annotators, cfg.seed);
    save_batch(layout.annotations(), batch);
    return batch;
}

Json run_export_training(const RunConfig &cfg) {
    const RunLayout layout{cfg.out};
    const std::string pairs_sha = manifest_sha(layout.pairs());
    const std::string filtered_sha = manifest_sha(layout.filtered());
    const std::string split_sha = manifest_sha(layout.eval_split());
    const std::set<std::string> eval_ids = ids_of(read_jsonl(layout.eval_split()).records, "pair_id");

    std::vector<PairRecord> pool;
    std::map<Domain, std::size_t> per_domain;
    for (auto &p : load_retained(layout)) {
        if (eval_ids.count(p.pair_id) == 0) {
            ++per_domain[p.domain];
            pool.push_back(std::move(p));
        }
    }
    std::size_t n = cfg.training_n;
    if (n == 0 && !per_domain.empty()) {
        std::size_t smallest = pool.size();
        for (const auto &[_, c] : per_domain) {
            smallest = std::min(smallest, c);
        }
        n = smallest * per_domain.size();
    }
    const std::vector<RewardSample> samples =
        export_training_set(pool, n, derive_seed(cfg.seed, "training"), eval_ids);

    const Json sources = {{"pairs", pairs_sha}, {"filtered", filtered_sha}, {"eval_split", split_sha}};
    const Json params = {{"n", n}, {"reward", cfg.reward.to_json()}};
    JsonlWriter writer(layout.training_set(), make_header("training_set", cfg.seed, sources, params));
    const std::set<std::string> done = ids_of(writer.existing_records(), "pair_id");
    std::size_t added = 0;
    for (const auto &s : samples) {
        if (done.count(s.pair_id) == 0) {
            writer.append(s.to_json());
            ++added;
        }
    }
    return {{"stage", "export-training"},
            {"pool", pool.size()},
            {"n", n},
            {"new", added},
            {"manifest", layout.training_set().string()}};
}

} // namespace protobias
