#pragma once

#include "protobias/assets.hpp"
#include "protobias/blob_store.hpp"
#include "protobias/jsonl.hpp"
#include "protobias/media_pipeline.hpp"
#include "protobias/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace protobias {

inline constexpr int kRatingLevels = 4;

/// (score - 1) / 3 for score in 1..4. Throws RangeError.
double scale_score(int score);

struct KappaResult {
    double value = 0.0;
    bool degenerate = false; // both raters constant: 1 if equal, 0 otherwise
};

/// Quadratic-weighted kappa over ratings in 1..K.
/// Errors: LengthMismatchError (sizes differ or < 2), RangeError.
KappaResult weighted_kappa(std::span<const int> a, std::span<const int> b, int levels = kRatingLevels);

// ---- batches --------------------------------------------------------------------

struct AnnotationItem {
    std::string item_id; // opaque
    std::string pair_id;
    std::string side; // "corr" or "adv"; never served
    Domain domain = Domain::Animals;
    std::string text;
    std::string image; // sha256

    Json to_json() const;
    static AnnotationItem from_json(const Json &j);
};

struct AnnotationBatch {
    std::uint64_t seed = 0;
    std::vector<AnnotationItem> items;
    std::map<std::string, std::vector<std::size_t>> orders; // annotator -> item indices

    Json to_json() const;
    static AnnotationBatch from_json(const Json &j);
    const AnnotationItem *find(const std::string &item_id) const;
};

/// n_items individual (image, text) sides. Pairs are drawn by seed and both of
/// their sides enter the batch (an odd n keeps one side of the last pair).
/// Every annotator sees every item in an own seeded order in which the two
/// sides of a pair are never adjacent. Throws InsufficientItemsError.
AnnotationBatch build_annotation_batch(const std::vector<PairRecord> &pairs, std::size_t n_items,
                                       const std::vector<std::string> &annotators, std::uint64_t seed);

// ---- records ----------------------------------------------------------------------

struct AnnotationRecord {
    std::string annotator_id;
    std::string item_id;
    int score = 0;
    double scaled = 0.0;
    std::int64_t elapsed_ms = 0;
    std::string rubric_version;

    Json to_json() const;
    static AnnotationRecord from_json(const Json &j); // validates score/scaled
    bool operator==(const AnnotationRecord &) const = default;
};

/// Line-delimited records, one per line.
std::string export_annotations(const std::vector<AnnotationRecord> &records);
std::vector<AnnotationRecord> ingest_annotations(const std::string &jsonl);

// ---- analysis -----------------------------------------------------------------------

struct AgreementCell {
    std::optional<double> kappa; // nullopt when fewer than 2 shared items
    bool degenerate = false;
    std::size_t n_shared = 0;
};

struct AgreementMatrix {
    std::vector<std::string> annotators; // sorted
    std::vector<std::vector<AgreementCell>> cells;

    Json to_json() const;
    std::string to_csv() const;
};

/// Pairwise kappa over the items both annotators rated. Diagonal is 1.
AgreementMatrix agreement_matrix(const std::vector<AnnotationRecord> &records);

struct SeparationRow {
    std::string source; // "human" or a metric label
    std::string domain; // a domain or "overall"
    std::optional<double> mean_sc;
    std::optional<double> mean_pa;
    std::optional<double> delta;
    std::size_t n_sc = 0;
    std::size_t n_pa = 0;
};

/// Human SC/PA means (mean over annotators per item, then over items per
/// domain) beside each metric restricted to the same items.
/// Throws NoOverlapError when no metric score covers an annotated item.
std::vector<SeparationRow> human_metric_table(const AnnotationBatch &batch,
                                              const std::vector<AnnotationRecord> &records,
                                              const std::vector<MetricScore> &scores);

std::string render_separation_text(const std::vector<SeparationRow> &rows);

// ---- service ----------------------------------------------------------------------------

// Blind serving and score capture. Thread-safe; each annotator's progress is
// a cursor into their fixed order. Records are persisted append-only in
// <dir>/annotations.jsonl and reloaded on restart.
class AnnotationService {
public:
    AnnotationService(std::filesystem::path dir, AnnotationBatch batch, Asset rubric);

    /// {item_id, image_url, text, progress:{done,total}}.
    /// Errors: UnknownAnnotator, BatchExhausted.
    Json next_item(const std::string &annotator);

    /// Errors: UnknownAnnotator, RangeError, DuplicateSubmission, OutOfOrderSubmission.
    AnnotationRecord submit(const std::string &annotator, const std::string &item_id, int score,
                            std::int64_t elapsed_ms = 0);

    Json progress() const;
    Json progress(const std::string &annotator) const;
    std::vector<AnnotationRecord> records() const;
    const AnnotationBatch &batch() const noexcept { return m_batch; }
    const Asset &rubric() const noexcept { return m_rubric; }

private:
    std::size_t done_locked(const std::string &annotator) const;

    std::filesystem::path m_dir;
    AnnotationBatch m_batch;
    Asset m_rubric;
    mutable std::mutex m_mutex;
    std::unique_ptr<JsonlWriter> m_writer;
    std::vector<AnnotationRecord> m_records;
    std::map<std::string, std::map<std::string, std::size_t>> m_answered; // annotator -> item -> record index
};

/// Loads <dir>/batch.json written by save_batch.
AnnotationBatch load_batch(const std::filesystem::path &dir);
void save_batch(const std::filesystem::path &dir, const AnnotationBatch &batch);

// HTTP surface:
//   GET  /api/items/next?annotator=ID   GET /api/progress   GET /api/export
//   POST /api/scores {annotator, item_id, score, elapsed_ms?}
//   GET  /api/images/<sha256>           GET /api/rubric
// Errors come back as {"error": <code>, "message": ...} with 400/404/409/410.
class AnnotationServer {
public:
    AnnotationServer(AnnotationService &service, const BlobStore &blobs,
                     std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~AnnotationServer();

    /// Binds and starts serving on a background thread; returns the port
    /// (pass 0 for an ephemeral one). Throws IoError when binding fails.
    int start(const std::string &host, int port);
    void stop();
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

} // namespace protobias
