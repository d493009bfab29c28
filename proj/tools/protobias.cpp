// protobias: command-line driver for the benchmark pipeline.
//
//   gen-prompts -> gen-images -> filter -> score -> evaluate -> report
//   export-training, annotate-serve, mock-endpoints
//
// Every subcommand prints one JSON summary line on stdout. Failures print
// {"error": <code>, "message": ...} on stderr and exit 1.

#include "protobias/error.hpp"
#include "protobias/human_study.hpp"
#include "protobias/mock_endpoints.hpp"
#include "protobias/pipeline.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <pthread.h>

namespace fs = std::filesystem;
using namespace protobias;

namespace {

struct Common {
    std::string config;
    std::string out;
    bool mock = false;
    std::uint64_t seed = 0;
    std::size_t width = 0;
    std::size_t prompts = 0;
    int pairs = 0;
    int steps = 0;
    int threshold = 0;
    std::size_t eval_n = 0;
    std::size_t training_n = 0;
    std::string metrics;
    std::string domains;
    std::size_t items = 0;
    std::string annotators;
};

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const std::string part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!part.empty()) {
            out.push_back(part);
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

// Options every stage understands; only flags actually given override the
// config file.
struct Flags {
    Common v;
    std::map<std::string, CLI::Option *> opts;

    void attach(CLI::App *app) {
        app->add_option("--config", v.config, "run config (JSON)")->check(CLI::ExistingFile);
        opts["out"] = app->add_option("--out", v.out, "output root (default: run)");
        app->add_flag("--mock", v.mock, "serve every endpoint role from an in-process deterministic mock");
        opts["seed"] = app->add_option("--seed", v.seed, "run seed");
        opts["width"] = app->add_option("--width", v.width, "concurrent requests per stage")->check(CLI::PositiveNumber);
        opts["prompts"] = app->add_option("--prompts-per-domain", v.prompts, "triplets per domain");
        opts["pairs"] = app->add_option("--pairs-per-prompt", v.pairs, "image pairs per triplet");
        opts["steps"] = app->add_option("--steps", v.steps, "diffusion inference steps");
        opts["threshold"] = app->add_option("--threshold", v.threshold, "filtration threshold, 1..10");
        opts["eval_n"] = app->add_option("--eval-n", v.eval_n, "pairs in the evaluation split");
        opts["training_n"] = app->add_option("--training-n", v.training_n, "training pairs (0: largest even sample)");
        opts["metrics"] = app->add_option("--metrics", v.metrics, "comma list: clipscore,pickscore,vqascore,llm_judge,protoscore");
        opts["domains"] = app->add_option("--domains", v.domains, "comma list: animals,demography,objects");
        opts["items"] = app->add_option("--items", v.items, "annotation batch size");
        opts["annotators"] = app->add_option("--annotators", v.annotators, "comma list of annotator ids");
    }

    bool given(const char *name) const { return opts.at(name)->count() > 0; }

    RunConfig build() const {
        RunConfig cfg = v.config.empty() ? RunConfig::defaults() : RunConfig::load(v.config);
        if (given("out")) cfg.out = v.out;
        if (given("seed")) cfg.seed = v.seed;
        if (given("width")) cfg.width = v.width;
        if (given("prompts")) cfg.prompts_per_domain = v.prompts;
        if (given("pairs")) cfg.pairs_per_prompt = v.pairs;
        if (given("steps")) cfg.steps = v.steps;
        if (given("threshold")) {
            check_threshold(v.threshold);
            cfg.threshold = v.threshold;
        }
        if (given("eval_n")) cfg.eval_n = v.eval_n;
        if (given("training_n")) cfg.training_n = v.training_n;
        if (given("metrics")) {
            cfg.metrics.clear();
            for (const auto &m : split_list(v.metrics)) {
                cfg.metrics.push_back(parse_metric_id(m));
            }
        }
        if (given("domains")) {
            cfg.domains.clear();
            for (const auto &d : split_list(v.domains)) {
                cfg.domains.push_back(parse_domain(d));
            }
        }
        if (given("items")) cfg.annotation_items = v.items;
        if (given("annotators")) cfg.annotators = split_list(v.annotators);
        if (cfg.pairs_per_prompt < 1 || cfg.steps < 1) {
            fail(ErrorCode::ConfigError, "--pairs-per-prompt and --steps must be positive");
        }
        return cfg;
    }
};

void emit(const Json &j) {
    std::cout << j.dump() << std::endl;
}

// Blocks SIGINT/SIGTERM in this and every thread started afterwards, so the
// servers' threads never take them; wait_for_signal() collects one.
sigset_t block_stop_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

int wait_for_signal(const sigset_t &set) {
    int sig = 0;
    sigwait(&set, &sig);
    return sig;
}

// Runs a stage, with an in-process mock behind every role when asked.
template <class Fn>
Json with_endpoints(const Flags &flags, Fn stage) {
    RunConfig cfg = flags.build();
    std::unique_ptr<MockEndpoints> mock;
    if (flags.v.mock) {
        mock = std::make_unique<MockEndpoints>();
        const int port = mock->start("127.0.0.1", 0);
        cfg.use_mock("http://127.0.0.1:" + std::to_string(port));
    }
    EndpointSet endpoints(cfg.endpoints);
    return stage(cfg, endpoints);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"protobias: prototypicality-bias benchmark for text-to-image alignment metrics"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    struct Sub {
        CLI::App *app;
        Flags flags;
    };
    std::map<std::string, Sub> subs;
    auto add = [&](const std::string &name, const std::string &desc) -> Sub & {
        Sub &s = subs[name];
        s.app = app.add_subcommand(name, desc);
        s.flags.attach(s.app);
        return s;
    };

    add("gen-prompts", "generate and validate text triplets per domain");
    add("gen-images", "render an image pair per triplet and seed");
    add("filter", "rate every image against its own prompt and apply the threshold");
    add("score", "draw the evaluation split and score it with each metric");
    Sub &evaluate = add("evaluate", "aggregate score manifests into reports/eval_report.json");
    std::vector<std::string> score_files;
    evaluate.app->add_option("--scores", score_files, "score manifests (default: every file under scores/)")
        ->check(CLI::ExistingFile);
    add("report", "render report tables, plot series and human-study tables");
    add("export-training", "write the reward-training pairs, disjoint from the evaluation split");

    Sub &serve = add("annotate-serve", "serve the blind annotation API and UI");
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
    serve.app->add_option("--host", host, "bind address");
    serve.app->add_option("--port", port, "port (0: ephemeral)");
    serve.app->add_option("--static", static_dir, "directory with the annotation UI build")->check(CLI::ExistingDirectory);

    CLI::App *mock_app = app.add_subcommand("mock-endpoints", "serve deterministic stand-ins for every endpoint role");
    std::string mock_host = "127.0.0.1";
    int mock_port = 8765;
    mock_app->add_option("--host", mock_host, "bind address");
    mock_app->add_option("--port", mock_port, "port (0: ephemeral)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mock_app->parsed()) {
            const sigset_t signals = block_stop_signals();
            MockEndpoints mock;
            const int bound = mock.start(mock_host, mock_port);
            const std::string base = "http://" + mock_host + ":" + std::to_string(bound);
            Json roles = Json::object();
            for (Role r : all_roles()) {
                roles[std::string(to_string(r))] = mock.url(r);
            }
            emit({{"listening", base}, {"roles", roles}});
            wait_for_signal(signals);
            mock.stop();
            return 0;
        }
        for (auto &[name, sub] : subs) {
            if (!sub.app->parsed()) {
                continue;
            }
            const Flags &f = sub.flags;
            if (name == "gen-prompts") {
                emit(with_endpoints(f, [](const RunConfig &c, EndpointSet &e) { return run_gen_prompts(c, e); }));
            } else if (name == "gen-images") {
                emit(with_endpoints(f, [](const RunConfig &c, EndpointSet &e) { return run_gen_images(c, e); }));
            } else if (name == "filter") {
                emit(with_endpoints(f, [](const RunConfig &c, EndpointSet &e) { return run_filter(c, e); }));
            } else if (name == "score") {
                emit(with_endpoints(f, [](const RunConfig &c, EndpointSet &e) { return run_score(c, e); }));
            } else if (name == "evaluate") {
                std::vector<fs::path> files(score_files.begin(), score_files.end());
                emit(run_evaluate(f.build(), files));
            } else if (name == "report") {
                emit(run_report(f.build()));
            } else if (name == "export-training") {
                emit(run_export_training(f.build()));
            } else if (name == "annotate-serve") {
                const RunConfig cfg = f.build();
                const RunLayout layout{cfg.out};
                const AnnotationBatch batch = prepare_annotation_batch(cfg);
                const AssetLibrary assets = AssetLibrary::load(cfg.assets);
                const sigset_t signals = block_stop_signals();
                AnnotationService service(layout.annotations(), batch, assets.get("rubric.human"));
                BlobStore blobs(layout.images());
                std::optional<fs::path> ui;
                if (!static_dir.empty()) {
                    ui = static_dir;
                }
                AnnotationServer server(service, blobs, ui);
                const int bound = server.start(host, port);
                Json annotators = Json::array();
                for (const auto &[a, _] : batch.orders) {
                    annotators.push_back(a);
                }
                emit({{"listening", "http://" + host + ":" + std::to_string(bound)},
                      {"items", batch.items.size()},
                      {"annotators", annotators}});
                wait_for_signal(signals);
                server.stop();
                emit({{"stage", "annotate-serve"}, {"records", service.records().size()}});
            }
        }
        return 0;
    } catch (const Error &e) {
        std::cerr << Json{{"error", std::string(e.name())}, {"message", e.what()}}.dump() << std::endl;
        return 1;
    } catch (const std::exception &e) {
        std::cerr << Json{{"error", "InternalError"}, {"message", e.what()}}.dump() << std::endl;
        return 1;
    }
}
