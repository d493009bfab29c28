#pragma once

#include "protobias/assets.hpp"
#include "protobias/jsonl.hpp"
#include "protobias/taxonomy.hpp"
#include "protobias/token_diff.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace protobias {

inline constexpr std::size_t kMaxSentenceWords = 30;
inline constexpr std::size_t kKnobWindow = 4;
inline constexpr std::size_t kDefaultGenerationAttempts = 3;

struct TripletCandidate {
    std::string text;
    std::string correct;
    std::string adversarial;
};

struct Triplet {
    std::string id;
    Domain domain = Domain::Animals;
    std::string text;
    std::string correct;
    std::string adversarial;
    KnobSpec knob;
    std::string extra_element;
    Json cell_metadata;

    Json to_json() const;
    static Triplet from_json(const Json &j);
};

// ---- prompt construction ---------------------------------------------------

/// Placeholder values for the cell's domain template.
std::map<std::string, std::string> prompt_inputs(const GenerationCell &cell);

/// The domain template with every placeholder filled.
/// Throws MissingPlaceholderError for an incomplete cell.
std::string build_generation_prompt(const GenerationCell &cell, const AssetLibrary &assets);

const Asset &template_for(Domain domain, const AssetLibrary &assets);

// ---- parsing ---------------------------------------------------------------

/// Byte range [first, second) of the first balanced {...} in `raw` that parses
/// as a JSON object, if any.
std::optional<std::pair<std::size_t, std::size_t>> find_first_json_object(std::string_view raw);

/// Extracts text/correct/adversarial from the first well-formed object in a
/// model reply. Errors: ParseError, MissingFieldError.
TripletCandidate parse_triplet(std::string_view raw_model_output);

// ---- lexical validation ----------------------------------------------------

enum class ViolationKind {
    Length,
    SubjectMissing,
    AnchorMissing,
    WrongSubject,
    CorrectExtraEdit,
    MissingKnobEdit,
    MultiSpanEdit,
    KnobOutsideWindow,
};

std::string_view to_string(ViolationKind kind) noexcept;

struct Violation {
    ViolationKind kind;
    std::string field;
    std::string detail;
};

struct ValidationReport {
    std::string cell_id;
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    std::set<ViolationKind> kinds() const;
    Json to_json() const;
};

// How a candidate sentence lines up with TEXT around the subject.
struct SubjectAlignment {
    std::size_t text_begin = 0;     // subject span in TEXT tokens
    std::size_t text_end = 0;
    std::size_t cand_begin = 0;     // substituted phrase in candidate tokens
    std::size_t cand_end = 0;
    std::vector<Hunk> other_edits;  // every edit outside the subject, TEXT coordinates
};

// Token-level contract checks on one triplet, in comparison form (lowercase,
// punctuation stripped, "an" folded to "a"):
//   TEXT must contain the subject (hypernym surface form; for demography it must
//   open with "a <attr_token> person") and mention the extra element (anchor).
//   CORRECT may differ from TEXT only by replacing the subject with the
//   non-prototype phrase.
//   ADVERSARIAL replaces the subject with the prototype phrase and must carry at
//   least one further edit, every one of which lies within kKnobWindow tokens
//   of the anchor. Several edits with any outside the window is a
//   multi_span_edit; a single edit outside it is knob_outside_window.
//   Every sentence has at most kMaxSentenceWords words.
ValidationReport check_triplet(const TripletCandidate &candidate, const GenerationCell &cell);

/// Triplet when check_triplet passes, the report otherwise. Pure.
std::variant<Triplet, ValidationReport> validate_triplet(const TripletCandidate &candidate,
                                                         const GenerationCell &cell);

/// Subject span of TEXT in comparison tokens, or nullopt when absent.
std::optional<std::pair<std::size_t, std::size_t>> locate_subject(
    const std::vector<std::string> &text_tokens, const GenerationCell &cell);

/// Anchor (extra element) span in TEXT tokens; the last word may be plural.
std::optional<std::pair<std::size_t, std::size_t>> locate_anchor(
    const std::vector<std::string> &text_tokens, const GenerationCell &cell);

enum class Side { Correct, Adversarial };

/// Subject phrase expected on each side, in comparison tokens.
std::vector<std::string> expected_subject(const GenerationCell &cell, Side side);

std::optional<SubjectAlignment> align_subject(const std::vector<std::string> &text_tokens,
                                              const std::vector<std::string> &cand_tokens,
                                              const GenerationCell &cell, Side side);

// ---- generation ------------------------------------------------------------

// Text-generation endpoint seen by the generation loop.
class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::string complete(const std::string &prompt) = 0;
    virtual std::string model() const = 0;
};

struct Rejection {
    std::string cell_id;
    std::size_t attempt = 0;
    std::string reason; // "parse" or "validation"
    std::string detail;
    std::vector<Violation> violations;

    Json to_json() const;
};

struct CellOutcome {
    GenerationCell cell;
    std::optional<Triplet> triplet;
    std::vector<Rejection> rejections;
    std::size_t attempts = 0;

    bool exhausted() const noexcept { return !triplet.has_value(); }
};

struct GenerationOptions {
    std::size_t attempts = kDefaultGenerationAttempts;
    std::size_t width = 1;
};

struct GenerationResult {
    std::vector<Triplet> triplets;
    std::vector<Rejection> rejections;
    std::vector<std::string> exhausted_cells; // BudgetExhausted, in input order
};

/// Up to `attempts` generations per cell until one validates. Cells run with
/// bounded parallelism; `on_commit` sees outcomes strictly in input order.
/// Transport failures surface as EndpointError.
GenerationResult generate_triplets(const std::vector<GenerationCell> &cells, TextGenerator &endpoint,
                                   const AssetLibrary &assets, const GenerationOptions &options,
                                   const std::function<void(const CellOutcome &)> &on_commit = {});

} // namespace protobias
