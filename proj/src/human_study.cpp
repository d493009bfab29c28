#include "protobias/human_study.hpp"

#include "protobias/endpoint.hpp"
#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/sampling.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>

namespace protobias {

double scale_score(int score) {
    if (score < 1 || score > kRatingLevels) {
        fail(ErrorCode::RangeError, "score must be an integer in 1..4, got " + std::to_string(score));
    }
    return (score - 1) / 3.0;
}

KappaResult weighted_kappa(std::span<const int> a, std::span<const int> b, int levels) {
    if (a.size() != b.size() || a.size() < 2) {
        fail(ErrorCode::LengthMismatchError, "kappa needs two equal-length rating lists of length >= 2 (got " +
                                                 std::to_string(a.size()) + " and " + std::to_string(b.size()) + ")");
    }
    if (levels < 2) {
        fail(ErrorCode::RangeError, "kappa needs at least 2 rating levels");
    }
    const auto k = static_cast<std::size_t>(levels);
    std::vector<double> observed(k * k, 0.0);
    std::vector<double> pa(k, 0.0);
    std::vector<double> pb(k, 0.0);
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 1 || a[i] > levels || b[i] < 1 || b[i] > levels) {
            fail(ErrorCode::RangeError, "rating outside 1.." + std::to_string(levels));
        }
        const auto x = static_cast<std::size_t>(a[i] - 1);
        const auto y = static_cast<std::size_t>(b[i] - 1);
        observed[x * k + y] += 1.0 / n;
        pa[x] += 1.0 / n;
        pb[y] += 1.0 / n;
    }
    const double scale = static_cast<double>((levels - 1) * (levels - 1));
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            const double w = d * d / scale;
            num += w * observed[i * k + j];
            den += w * pa[i] * pb[j];
        }
    }
    const bool a_const = std::all_of(a.begin(), a.end(), [&](int v) { return v == a[0]; });
    const bool b_const = std::all_of(b.begin(), b.end(), [&](int v) { return v == b[0]; });
    if (a_const && b_const) {
        return {a[0] == b[0] ? 1.0 : 0.0, true};
    }
    return {1.0 - num / den, false};
}

// ---- batches ----------------------------------------------------------------

Json AnnotationItem::to_json() const {
    return {{"item_id", item_id}, {"pair_id", pair_id}, {"side", side},
            {"domain", to_string(domain)}, {"text", text}, {"image", image}};
}

AnnotationItem AnnotationItem::from_json(const Json &j) {
    try {
        AnnotationItem it;
        it.item_id = j.at("item_id").get<std::string>();
        it.pair_id = j.at("pair_id").get<std::string>();
        it.side = j.at("side").get<std::string>();
        it.domain = parse_domain(j.at("domain").get<std::string>());
        it.text = j.at("text").get<std::string>();
        it.image = j.at("image").get<std::string>();
        return it;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed annotation item: ") + e.what());
    }
}

Json AnnotationBatch::to_json() const {
    Json items_json = Json::array();
    for (const auto &it : items) {
        items_json.push_back(it.to_json());
    }
    Json orders_json = Json::object();
    for (const auto &[annotator, order] : orders) {
        orders_json[annotator] = order;
    }
    return {{"schema_version", kSchemaVersion}, {"seed", seed}, {"items", items_json}, {"orders", orders_json}};
}

AnnotationBatch AnnotationBatch::from_json(const Json &j) {
    try {
        if (j.value("schema_version", 0) != kSchemaVersion) {
            fail(ErrorCode::SchemaError, "unsupported annotation batch schema_version");
        }
        AnnotationBatch b;
        b.seed = j.at("seed").get<std::uint64_t>();
        for (const auto &it : j.at("items")) {
            b.items.push_back(AnnotationItem::from_json(it));
        }
        for (const auto &[annotator, order] : j.at("orders").items()) {
            b.orders[annotator] = order.get<std::vector<std::size_t>>();
            for (std::size_t i : b.orders[annotator]) {
                if (i >= b.items.size()) {
                    fail(ErrorCode::SchemaError, "annotation order references a missing item");
                }
            }
        }
        return b;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed annotation batch: ") + e.what());
    }
}

const AnnotationItem *AnnotationBatch::find(const std::string &item_id) const {
    for (const auto &it : items) {
        if (it.item_id == item_id) {
            return &it;
        }
    }
    return nullptr;
}

namespace {

// Shuffled order in which no two consecutive items share a pair.
std::vector<std::size_t> separated_order(const std::vector<AnnotationItem> &items, std::uint64_t seed) {
    std::vector<std::size_t> pool(items.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        pool[i] = i;
    }
    Rng rng(seed);
    shuffle(pool, rng);
    std::vector<std::size_t> order;
    order.reserve(pool.size());
    while (!pool.empty()) {
        auto pick = pool.begin();
        if (!order.empty()) {
            const std::string &last = items[order.back()].pair_id;
            pick = std::find_if(pool.begin(), pool.end(), [&](std::size_t i) { return items[i].pair_id != last; });
        }
        if (pick == pool.end()) {
            // only the twin of the last item is left: slot it between two other pairs
            const std::size_t twin = pool.front();
            pool.clear();
            const std::string &pid = items[twin].pair_id;
            bool placed = false;
            for (std::size_t pos = 0; pos <= order.size() && !placed; ++pos) {
                const bool left_ok = pos == 0 || items[order[pos - 1]].pair_id != pid;
                const bool right_ok = pos == order.size() || items[order[pos]].pair_id != pid;
                if (left_ok && right_ok) {
                    order.insert(order.begin() + static_cast<std::ptrdiff_t>(pos), twin);
                    placed = true;
                }
            }
            if (!placed) {
                fail(ErrorCode::InsufficientItemsError, "cannot keep the two sides of a pair apart with " +
                                                            std::to_string(items.size()) + " items");
            }
            break;
        }
        order.push_back(*pick);
        pool.erase(pick);
    }
    return order;
}

} // namespace

AnnotationBatch build_annotation_batch(const std::vector<PairRecord> &pairs, std::size_t n_items,
                                       const std::vector<std::string> &annotators, std::uint64_t seed) {
    if (n_items > 2 * pairs.size()) {
        fail(ErrorCode::InsufficientItemsError, std::to_string(n_items) + " items requested but " +
                                                    std::to_string(pairs.size()) + " pairs give at most " +
                                                    std::to_string(2 * pairs.size()));
    }
    AnnotationBatch batch;
    batch.seed = seed;
    std::set<std::string> seen;
    for (const auto &a : annotators) {
        if (a.empty() || !seen.insert(a).second) {
            fail(ErrorCode::InvalidArgument, "annotator ids must be unique and non-empty");
        }
    }
    if (n_items == 0) {
        for (const auto &a : annotators) {
            batch.orders[a] = {};
        }
        return batch;
    }

    std::vector<const PairRecord *> sorted;
    for (const auto &p : pairs) {
        sorted.push_back(&p);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto *x, auto *y) { return x->pair_id < y->pair_id; });
    Rng rng(derive_seed(seed, "annotation:pairs"));
    shuffle(sorted, rng);
    const std::size_t n_pairs = (n_items + 1) / 2;
    sorted.resize(n_pairs);

    auto item_for = [&](const PairRecord &p, const char *side) {
        AnnotationItem it;
        it.item_id = "it-" + sha256_hex(std::to_string(seed) + '\x1f' + p.pair_id + '\x1f' + side).substr(0, 16);
        it.pair_id = p.pair_id;
        it.side = side;
        it.domain = p.domain;
        it.text = p.text;
        it.image = std::string(side) == "corr" ? p.image_corr : p.image_adv;
        return it;
    };
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const PairRecord &p = *sorted[i];
        const bool last_single = (i + 1 == n_pairs) && (n_items % 2 == 1);
        if (last_single) {
            batch.items.push_back(item_for(p, (derive_seed(seed, "annotation:odd") & 1) ? "adv" : "corr"));
        } else {
            batch.items.push_back(item_for(p, "corr"));
            batch.items.push_back(item_for(p, "adv"));
        }
    }
    for (const auto &a : annotators) {
        batch.orders[a] = separated_order(batch.items, derive_seed(seed, "annotator:" + a));
    }
    return batch;
}

// ---- records ------------------------------------------------------------------

Json AnnotationRecord::to_json() const {
    return {{"annotator_id", annotator_id}, {"item_id", item_id},       {"score", score},
            {"scaled", scaled},             {"elapsed_ms", elapsed_ms}, {"rubric_version", rubric_version}};
}

AnnotationRecord AnnotationRecord::from_json(const Json &j) {
    AnnotationRecord r;
    try {
        r.annotator_id = j.at("annotator_id").get<std::string>();
        r.item_id = j.at("item_id").get<std::string>();
        r.score = j.at("score").get<int>();
        r.scaled = j.at("scaled").get<double>();
        r.elapsed_ms = j.at("elapsed_ms").get<std::int64_t>();
        r.rubric_version = j.at("rubric_version").get<std::string>();
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed annotation record: ") + e.what());
    }
    if (scale_score(r.score) != r.scaled) {
        fail(ErrorCode::SchemaError, "annotation record scaled value does not match its score");
    }
    return r;
}

std::string export_annotations(const std::vector<AnnotationRecord> &records) {
    std::string out;
    for (const auto &r : records) {
        out += dump_line(r.to_json());
        out += '\n';
    }
    return out;
}

std::vector<AnnotationRecord> ingest_annotations(const std::string &jsonl) {
    std::vector<AnnotationRecord> out;
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            fail(ErrorCode::SchemaError, "annotation export line is not JSON");
        }
        if (j.value("kind", "") == "header") {
            continue;
        }
        out.push_back(AnnotationRecord::from_json(j));
    }
    return out;
}

// ---- analysis -------------------------------------------------------------------

AgreementMatrix agreement_matrix(const std::vector<AnnotationRecord> &records) {
    std::map<std::string, std::map<std::string, int>> by_annotator;
    for (const auto &r : records) {
        by_annotator[r.annotator_id][r.item_id] = r.score;
    }
    AgreementMatrix m;
    for (const auto &[a, _] : by_annotator) {
        m.annotators.push_back(a);
    }
    const std::size_t n = m.annotators.size();
    m.cells.assign(n, std::vector<AgreementCell>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto &ra = by_annotator[m.annotators[i]];
        m.cells[i][i] = {1.0, false, ra.size()};
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto &rb = by_annotator[m.annotators[j]];
            std::vector<int> xa;
            std::vector<int> xb;
            for (const auto &[item, score] : ra) {
                if (auto it = rb.find(item); it != rb.end()) {
                    xa.push_back(score);
                    xb.push_back(it->second);
                }
            }
            AgreementCell cell;
            cell.n_shared = xa.size();
            if (xa.size() >= 2) {
                const auto k = weighted_kappa(xa, xb);
                cell.kappa = k.value;
                cell.degenerate = k.degenerate;
            }
            m.cells[i][j] = cell;
            m.cells[j][i] = cell;
        }
    }
    return m;
}

Json AgreementMatrix::to_json() const {
    Json rows = Json::array();
    for (std::size_t i = 0; i < annotators.size(); ++i) {
        for (std::size_t j = 0; j < annotators.size(); ++j) {
            const auto &c = cells[i][j];
            rows.push_back({{"a", annotators[i]},
                            {"b", annotators[j]},
                            {"kappa", c.kappa ? Json(*c.kappa) : Json(nullptr)},
                            {"degenerate", c.degenerate},
                            {"n_shared", c.n_shared}});
        }
    }
    return {{"annotators", annotators}, {"pairs", rows}};
}

std::string AgreementMatrix::to_csv() const {
    std::string out = "a,b,kappa,degenerate,n_shared\n";
    char buf[64];
    for (std::size_t i = 0; i < annotators.size(); ++i) {
        for (std::size_t j = 0; j < annotators.size(); ++j) {
            const auto &c = cells[i][j];
            std::string k;
            if (c.kappa) {
                std::snprintf(buf, sizeof buf, "%.12g", *c.kappa);
                k = buf;
            }
            out += annotators[i] + "," + annotators[j] + "," + k + "," + (c.degenerate ? "1" : "0") + "," +
                   std::to_string(c.n_shared) + "\n";
        }
    }
    return out;
}

namespace {

const std::vector<std::string> kDomainOrder{"animals", "demography", "objects"};

struct SideSums {
    double sc = 0.0;
    double pa = 0.0;
    std::size_t n_sc = 0;
    std::size_t n_pa = 0;

    void add(const std::string &side, double v) {
        if (side == "corr") {
            sc += v;
            ++n_sc;
        } else {
            pa += v;
            ++n_pa;
        }
    }
};

SeparationRow to_row(const std::string &source, const std::string &domain, const SideSums &s) {
    SeparationRow r;
    r.source = source;
    r.domain = domain;
    r.n_sc = s.n_sc;
    r.n_pa = s.n_pa;
    if (s.n_sc > 0) r.mean_sc = s.sc / static_cast<double>(s.n_sc);
    if (s.n_pa > 0) r.mean_pa = s.pa / static_cast<double>(s.n_pa);
    if (r.mean_sc && r.mean_pa) r.delta = *r.mean_sc - *r.mean_pa;
    return r;
}

void emit(std::vector<SeparationRow> &rows, const std::string &source, const std::map<std::string, SideSums> &by_domain) {
    SideSums overall;
    for (const auto &d : kDomainOrder) {
        if (auto it = by_domain.find(d); it != by_domain.end()) {
            rows.push_back(to_row(source, d, it->second));
        }
    }
    // overall averages items, not domain means
    for (const auto &[d, s] : by_domain) {
        overall.sc += s.sc;
        overall.pa += s.pa;
        overall.n_sc += s.n_sc;
        overall.n_pa += s.n_pa;
    }
    rows.push_back(to_row(source, "overall", overall));
}

} // namespace

std::vector<SeparationRow> human_metric_table(const AnnotationBatch &batch,
                                              const std::vector<AnnotationRecord> &records,
                                              const std::vector<MetricScore> &scores) {
    // item -> mean scaled score over annotators, in item order for stable sums
    std::map<std::string, std::pair<double, std::size_t>> per_item;
    for (const auto &r : records) {
        auto &acc = per_item[r.item_id];
        acc.first += r.scaled;
        ++acc.second;
    }
    if (per_item.empty()) {
        fail(ErrorCode::EmptyInputError, "no annotations to tabulate");
    }
    std::map<std::string, SideSums> human;
    std::map<std::string, std::map<std::string, SideSums>> metrics;
    std::map<std::string, std::map<std::string, const MetricScore *>> score_index; // metric -> pair -> score
    for (const auto &s : scores) {
        score_index[s.metric][s.pair_id] = &s;
    }
    std::size_t overlap = 0;
    for (const auto &item : batch.items) {
        auto it = per_item.find(item.item_id);
        if (it == per_item.end()) {
            continue;
        }
        const std::string domain(to_string(item.domain));
        human[domain].add(item.side, it->second.first / static_cast<double>(it->second.second));
        for (const auto &[metric, by_pair] : score_index) {
            if (auto s = by_pair.find(item.pair_id); s != by_pair.end()) {
                metrics[metric][domain].add(item.side, item.side == "corr" ? s->second->s_corr : s->second->s_adv);
                ++overlap;
            }
        }
    }
    if (overlap == 0) {
        fail(ErrorCode::NoOverlapError, "no metric score covers an annotated item");
    }
    std::vector<SeparationRow> rows;
    emit(rows, "human", human);
    for (const auto &[metric, by_domain] : metrics) {
        emit(rows, metric, by_domain);
    }
    return rows;
}

std::string render_separation_text(const std::vector<SeparationRow> &rows) {
    std::size_t w = 6;
    for (const auto &r : rows) {
        w = std::max(w, r.source.size());
    }
    auto num = [](const std::optional<double> &v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", *v);
        return std::string(buf);
    };
    char line[256];
    std::string out;
    std::snprintf(line, sizeof line, "%-*s  %-10s  %7s  %7s  %7s  %5s  %5s\n", static_cast<int>(w), "source", "domain",
                  "sc", "pa", "delta", "n_sc", "n_pa");
    out += line;
    for (const auto &r : rows) {
        std::snprintf(line, sizeof line, "%-*s  %-10s  %7s  %7s  %7s  %5zu  %5zu\n", static_cast<int>(w),
                      r.source.c_str(), r.domain.c_str(), num(r.mean_sc).c_str(), num(r.mean_pa).c_str(),
                      num(r.delta).c_str(), r.n_sc, r.n_pa);
        out += line;
    }
    return out;
}

// ---- service ---------------------------------------------------------------------

void save_batch(const std::filesystem::path &dir, const AnnotationBatch &batch) {
    write_file_atomic(dir / "batch.json", batch.to_json().dump(2) + "\n");
}

AnnotationBatch load_batch(const std::filesystem::path &dir) {
    const auto path = dir / "batch.json";
    if (!std::filesystem::exists(path)) {
        fail(ErrorCode::MissingManifestError, "no annotation batch at " + path.string());
    }
    const Json j = Json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) {
        fail(ErrorCode::SchemaError, path.string() + " is not JSON");
    }
    return AnnotationBatch::from_json(j);
}

AnnotationService::AnnotationService(std::filesystem::path dir, AnnotationBatch batch, Asset rubric)
    : m_dir(std::move(dir)), m_batch(std::move(batch)), m_rubric(std::move(rubric)) {
    std::filesystem::create_directories(m_dir);
    const Json header = make_header("annotations", m_batch.seed,
                                    {{"batch_sha256", sha256_hex(dump_line(m_batch.to_json()))}},
                                    {{"rubric", m_rubric.provenance()}});
    m_writer = std::make_unique<JsonlWriter>(m_dir / "annotations.jsonl", header);
    for (const auto &j : m_writer->existing_records()) {
        const AnnotationRecord r = AnnotationRecord::from_json(j);
        const auto order = m_batch.orders.find(r.annotator_id);
        const std::size_t done = done_locked(r.annotator_id);
        if (order == m_batch.orders.end() || done >= order->second.size() ||
            m_batch.items[order->second[done]].item_id != r.item_id) {
            fail(ErrorCode::SchemaError, "annotations.jsonl does not follow the batch order at item " + r.item_id);
        }
        m_answered[r.annotator_id][r.item_id] = m_records.size();
        m_records.push_back(r);
    }
}

std::size_t AnnotationService::done_locked(const std::string &annotator) const {
    auto it = m_answered.find(annotator);
    return it == m_answered.end() ? 0 : it->second.size();
}

Json AnnotationService::next_item(const std::string &annotator) {
    std::lock_guard lock(m_mutex);
    const auto order = m_batch.orders.find(annotator);
    if (order == m_batch.orders.end()) {
        fail(ErrorCode::UnknownAnnotator, "unknown annotator '" + annotator + "'");
    }
    const std::size_t done = done_locked(annotator);
    const std::size_t total = order->second.size();
    if (done >= total) {
        fail(ErrorCode::BatchExhausted, "annotator '" + annotator + "' has finished the batch");
    }
    const AnnotationItem &item = m_batch.items[order->second[done]];
    return {{"item_id", item.item_id},
            {"image_url", "/api/images/" + item.image},
            {"text", item.text},
            {"progress", {{"done", done}, {"total", total}}}};
}

AnnotationRecord AnnotationService::submit(const std::string &annotator, const std::string &item_id, int score,
                                           std::int64_t elapsed_ms) {
    std::lock_guard lock(m_mutex);
    const auto order = m_batch.orders.find(annotator);
    if (order == m_batch.orders.end()) {
        fail(ErrorCode::UnknownAnnotator, "unknown annotator '" + annotator + "'");
    }
    const double scaled = scale_score(score);
    if (m_answered[annotator].count(item_id) != 0) {
        fail(ErrorCode::DuplicateSubmission, "item " + item_id + " was already scored by '" + annotator + "'");
    }
    const std::size_t done = done_locked(annotator);
    if (done >= order->second.size() || m_batch.items[order->second[done]].item_id != item_id) {
        fail(ErrorCode::OutOfOrderSubmission, "item " + item_id + " is not the item currently served to '" +
                                                  annotator + "'");
    }
    AnnotationRecord r{annotator, item_id, score, scaled, std::max<std::int64_t>(elapsed_ms, 0), m_rubric.version};
    m_writer->append(r.to_json());
    m_answered[annotator][item_id] = m_records.size();
    m_records.push_back(r);
    return r;
}

Json AnnotationService::progress(const std::string &annotator) const {
    std::lock_guard lock(m_mutex);
    const auto order = m_batch.orders.find(annotator);
    if (order == m_batch.orders.end()) {
        fail(ErrorCode::UnknownAnnotator, "unknown annotator '" + annotator + "'");
    }
    return {{"done", done_locked(annotator)}, {"total", order->second.size()}};
}

Json AnnotationService::progress() const {
    std::lock_guard lock(m_mutex);
    Json out = Json::object();
    for (const auto &[annotator, order] : m_batch.orders) {
        out[annotator] = {{"done", done_locked(annotator)}, {"total", order.size()}};
    }
    return out;
}

std::vector<AnnotationRecord> AnnotationService::records() const {
    std::lock_guard lock(m_mutex);
    return m_records;
}

// ---- HTTP -------------------------------------------------------------------------

namespace {

int status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownAnnotator: return 404;
    case ErrorCode::BatchExhausted: return 410;
    case ErrorCode::DuplicateSubmission:
    case ErrorCode::OutOfOrderSubmission: return 409;
    case ErrorCode::RangeError:
    case ErrorCode::InvalidArgument: return 400;
    default: return 500;
    }
}

void send_error(httplib::Response &res, int status, std::string_view code, const std::string &message) {
    res.status = status;
    res.set_content(Json{{"error", code}, {"message", message}}.dump(), "application/json");
}

void send_error(httplib::Response &res, const Error &e) { send_error(res, status_for(e.code()), e.name(), e.what()); }

} // namespace

struct AnnotationServer::Impl {
    httplib::Server server;
    std::thread thread;
};

AnnotationServer::AnnotationServer(AnnotationService &service, const BlobStore &blobs,
                                   std::optional<std::filesystem::path> static_dir)
    : m_impl(std::make_unique<Impl>()) {
    auto &srv = m_impl->server;
    AnnotationService *svc = &service;
    const BlobStore *store = &blobs;

    srv.Get("/api/items/next", [svc](const httplib::Request &req, httplib::Response &res) {
        if (!req.has_param("annotator")) {
            send_error(res, 400, "InvalidArgument", "missing ?annotator=");
            return;
        }
        try {
            res.set_content(svc->next_item(req.get_param_value("annotator")).dump(), "application/json");
        } catch (const Error &e) {
            send_error(res, e);
        }
    });
    srv.Post("/api/scores", [svc](const httplib::Request &req, httplib::Response &res) {
        const Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("annotator") || !body["annotator"].is_string() ||
            !body.contains("item_id") || !body["item_id"].is_string() || !body.contains("score") ||
            !body["score"].is_number_integer()) {
            send_error(res, 400, "InvalidArgument", "body must be {annotator, item_id, score:int}");
            return;
        }
        try {
            const std::string annotator = body["annotator"].get<std::string>();
            const auto elapsed = body.contains("elapsed_ms") && body["elapsed_ms"].is_number()
                                     ? body["elapsed_ms"].get<std::int64_t>()
                                     : 0;
            const auto score = body["score"].get<long long>();
            if (score < 1 || score > kRatingLevels) {
                fail(ErrorCode::RangeError, "score must be an integer in 1..4");
            }
            svc->submit(annotator, body["item_id"].get<std::string>(), static_cast<int>(score), elapsed);
            res.set_content(Json{{"ok", true}, {"progress", svc->progress(annotator)}}.dump(), "application/json");
        } catch (const Error &e) {
            send_error(res, e);
        }
    });
    srv.Get("/api/export", [svc](const httplib::Request &, httplib::Response &res) {
        res.set_content(export_annotations(svc->records()), "application/x-ndjson");
    });
    srv.Get("/api/progress", [svc](const httplib::Request &req, httplib::Response &res) {
        try {
            const Json p = req.has_param("annotator") ? svc->progress(req.get_param_value("annotator")) : svc->progress();
            res.set_content(p.dump(), "application/json");
        } catch (const Error &e) {
            send_error(res, e);
        }
    });
    srv.Get("/api/rubric", [svc](const httplib::Request &, httplib::Response &res) {
        const Asset &r = svc->rubric();
        res.set_content(Json{{"name", r.name}, {"version", r.version}, {"sha256", r.sha256}, {"text", r.text}}.dump(),
                        "application/json");
    });
    srv.Get(R"(/api/images/([0-9a-f]{64}))", [store](const httplib::Request &req, httplib::Response &res) {
        const auto bytes = store->get(req.matches[1].str());
        if (!bytes) {
            send_error(res, 404, "NotFound", "no such image");
            return;
        }
        res.set_header("Cache-Control", "private, max-age=86400");
        res.set_content(*bytes, sniff_image_mime(*bytes));
    });
    if (static_dir && std::filesystem::is_directory(*static_dir)) {
        srv.set_mount_point("/", static_dir->string());
    }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string &host, int port) {
    auto &srv = m_impl->server;
    int bound = port;
    if (port == 0) {
        bound = srv.bind_to_any_port(host);
    } else if (!srv.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        fail(ErrorCode::IoError, "cannot bind annotation server to " + host + ":" + std::to_string(port));
    }
    m_impl->thread = std::thread([&srv] { srv.listen_after_bind(); });
    return bound;
}

void AnnotationServer::stop() {
    if (!m_impl) {
        return;
    }
    m_impl->server.stop();
    if (m_impl->thread.joinable()) {
        m_impl->thread.join();
    }
}

void AnnotationServer::wait() {
    if (m_impl->thread.joinable()) {
        m_impl->thread.join();
    }
}

} // namespace protobias
