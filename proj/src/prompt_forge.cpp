#include "protobias/prompt_forge.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/parallel.hpp"
#include "protobias/text.hpp"

#include <algorithm>

namespace protobias {

namespace {

std::string knob_label(const GenerationCell &cell) {
    // the animal template lists the color knob as plain "color"
    if (cell.domain == Domain::Animals && cell.knob.kind == KnobKind::ColorTone) {
        return "color";
    }
    return std::string(to_string(cell.knob.kind));
}

std::string knob_description(const KnobSpec &knob) {
    return knob.description + "; adversarial change: " + knob.perturbation_rule;
}

Json knob_json(const KnobSpec &k) {
    return {{"kind", to_string(k.kind)}, {"description", k.description}, {"perturbation_rule", k.perturbation_rule}};
}

std::string span_text(const std::vector<std::string> &tokens, std::size_t begin, std::size_t end) {
    std::vector<std::string> part(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(end));
    return text::join(part, " ");
}

std::optional<std::size_t> find_tokens(const std::vector<std::string> &hay, const std::vector<std::string> &needle,
                                       std::size_t from = 0) {
    if (needle.empty() || hay.size() < needle.size()) {
        return std::nullopt;
    }
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) {
            return i;
        }
    }
    return std::nullopt;
}

std::string describe_hunk(const Hunk &h, const std::vector<std::string> &ref, const std::vector<std::string> &cand) {
    return "'" + span_text(ref, h.a_begin, h.a_end) + "' -> '" + span_text(cand, h.b_begin, h.b_end) +
           "' at token " + std::to_string(h.a_begin);
}

} // namespace

Json Triplet::to_json() const {
    return {{"id", id},
            {"domain", to_string(domain)},
            {"text", text},
            {"correct", correct},
            {"adversarial", adversarial},
            {"knob", knob_json(knob)},
            {"extra_element", extra_element},
            {"cell", cell_metadata.is_null() ? Json::object() : cell_metadata}};
}

Triplet Triplet::from_json(const Json &j) {
    try {
        Triplet t;
        t.id = j.at("id").get<std::string>();
        t.domain = parse_domain(j.at("domain").get<std::string>());
        t.text = j.at("text").get<std::string>();
        t.correct = j.at("correct").get<std::string>();
        t.adversarial = j.at("adversarial").get<std::string>();
        t.knob.kind = parse_knob_kind(j.at("knob").at("kind").get<std::string>());
        t.knob.description = j.at("knob").value("description", "");
        t.knob.perturbation_rule = j.at("knob").value("perturbation_rule", "");
        t.extra_element = j.at("extra_element").get<std::string>();
        t.cell_metadata = j.value("cell", Json::object());
        return t;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed triplet record: ") + e.what());
    }
}

std::map<std::string, std::string> prompt_inputs(const GenerationCell &cell) {
    std::map<std::string, std::string> in;
    in["knob"] = knob_label(cell);
    in["knob_description"] = knob_description(cell.knob);
    if (const auto *d = cell.demography()) {
        in["group_category"] = std::string(to_string(d->axis));
        in["socio_attr"] = std::string(to_string(d->socio_attr));
        in["pole"] = std::string(to_string(d->pole));
        in["attr_token"] = d->attr_token;
        in["disadvantaged"] = d->disadvantaged_key;
        in["advantaged"] = d->advantaged_key;
        in["disadv_desc"] = d->disadvantaged_desc;
        in["adv_desc"] = d->advantaged_desc;
        in["extra_element"] = cell.extra_element;
        in["environment_hint"] = cell.environment_hint;
        return in;
    }
    const CategoryPair &p = *cell.pair();
    if (cell.domain == Domain::Objects) {
        in["subcategory"] = p.hypernym;
    } else {
        in["hypernym"] = p.hypernym;
    }
    in["non_proto"] = p.non_proto;
    in["proto"] = p.proto;
    in["extra_object"] = cell.extra_element;
    in["env_hint"] = cell.environment_hint;
    return in;
}

const Asset &template_for(Domain domain, const AssetLibrary &assets) {
    return assets.get("template." + std::string(to_string(domain)));
}

std::string build_generation_prompt(const GenerationCell &cell, const AssetLibrary &assets) {
    std::string prompt = fill_placeholders(template_for(cell.domain, assets).text, prompt_inputs(cell));
    if (const auto left = unresolved_placeholders(prompt); !left.empty()) {
        fail(ErrorCode::MissingPlaceholderError,
             "cell " + cell.id + ": unresolved placeholder {" + left.front() + "}");
    }
    return prompt;
}

std::optional<std::pair<std::size_t, std::size_t>> find_first_json_object(std::string_view raw) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos; start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t j = start; j < raw.size(); ++j) {
            const char c = raw[j];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    const auto parsed = Json::parse(raw.substr(start, j + 1 - start), nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) {
                        return std::make_pair(start, j + 1);
                    }
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

TripletCandidate parse_triplet(std::string_view raw) {
    const auto range = find_first_json_object(raw);
    if (!range) {
        fail(ErrorCode::ParseError, "no JSON object in model output");
    }
    const Json obj = Json::parse(raw.substr(range->first, range->second - range->first));
    std::vector<std::string> missing;
    auto field = [&](const char *key) {
        if (!obj.contains(key) || !obj[key].is_string() || text::trim(obj[key].get<std::string>()).empty()) {
            missing.emplace_back(key);
            return std::string();
        }
        return text::trim(obj[key].get<std::string>());
    };
    TripletCandidate c{field("text"), field("correct"), field("adversarial")};
    if (!missing.empty()) {
        fail(ErrorCode::MissingFieldError, "model output lacks: " + text::join(missing, ", "));
    }
    return c;
}

std::string_view to_string(ViolationKind kind) noexcept {
    switch (kind) {
    case ViolationKind::Length: return "length";
    case ViolationKind::SubjectMissing: return "subject_missing";
    case ViolationKind::AnchorMissing: return "anchor_missing";
    case ViolationKind::WrongSubject: return "wrong_subject";
    case ViolationKind::CorrectExtraEdit: return "correct_extra_edit";
    case ViolationKind::MissingKnobEdit: return "missing_knob_edit";
    case ViolationKind::MultiSpanEdit: return "multi_span_edit";
    case ViolationKind::KnobOutsideWindow: return "knob_outside_window";
    }
    return "unknown";
}

std::set<ViolationKind> ValidationReport::kinds() const {
    std::set<ViolationKind> out;
    for (const auto &v : violations) {
        out.insert(v.kind);
    }
    return out;
}

Json ValidationReport::to_json() const {
    Json list = Json::array();
    for (const auto &v : violations) {
        list.push_back({{"kind", to_string(v.kind)}, {"field", v.field}, {"detail", v.detail}});
    }
    return {{"cell_id", cell_id}, {"violations", list}};
}

std::optional<std::pair<std::size_t, std::size_t>> locate_subject(const std::vector<std::string> &tokens,
                                                                  const GenerationCell &cell) {
    if (const auto *d = cell.demography()) {
        auto head = text::comparison_tokens("a " + d->attr_token);
        const auto noun = text::comparison_tokens(d->hypernym);
        const std::size_t begin = head.size();
        head.insert(head.end(), noun.begin(), noun.end());
        if (tokens.size() >= head.size() && std::equal(head.begin(), head.end(), tokens.begin())) {
            return std::make_pair(begin, head.size());
        }
        return std::nullopt;
    }
    const auto noun = text::comparison_tokens(cell.pair()->hypernym);
    if (const auto at = find_tokens(tokens, noun)) {
        return std::make_pair(*at, *at + noun.size());
    }
    return std::nullopt;
}

std::optional<std::pair<std::size_t, std::size_t>> locate_anchor(const std::vector<std::string> &tokens,
                                                                 const GenerationCell &cell) {
    const auto singular = text::comparison_tokens(cell.extra_element);
    if (singular.empty()) {
        return std::nullopt;
    }
    auto plural = singular;
    plural.back() = text::comparison_tokens(text::pluralize(singular.back())).back();
    const auto subject = locate_subject(tokens, cell);
    auto overlaps_subject = [&](std::size_t b, std::size_t e) {
        return subject && b < subject->second && subject->first < e;
    };
    for (std::size_t i = 0; i + singular.size() <= tokens.size(); ++i) {
        const std::size_t e = i + singular.size();
        if (overlaps_subject(i, e)) {
            continue;
        }
        auto matches = [&](const std::vector<std::string> &needle) {
            return std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
        };
        if (matches(singular) || matches(plural)) {
            return std::make_pair(i, e);
        }
    }
    return std::nullopt;
}

std::vector<std::string> expected_subject(const GenerationCell &cell, Side side) {
    if (const auto *d = cell.demography()) {
        return text::comparison_tokens(side == Side::Correct ? d->non_proto_desc() : d->proto_desc());
    }
    const CategoryPair &p = *cell.pair();
    return text::comparison_tokens(side == Side::Correct ? p.non_proto : p.proto);
}

std::optional<SubjectAlignment> align_subject(const std::vector<std::string> &text_tokens,
                                              const std::vector<std::string> &cand_tokens,
                                              const GenerationCell &cell, Side side) {
    const auto subject = locate_subject(text_tokens, cell);
    if (!subject) {
        return std::nullopt;
    }
    const auto core = expected_subject(cell, side);
    const auto at = find_tokens(cand_tokens, core);
    if (!at) {
        return std::nullopt;
    }
    SubjectAlignment a;
    a.text_begin = subject->first;
    a.text_end = subject->second;
    a.cand_begin = *at;
    a.cand_end = *at + core.size();

    const std::span<const std::string> t(text_tokens);
    const std::span<const std::string> c(cand_tokens);
    for (Hunk h : token_diff(t.first(a.text_begin), c.first(a.cand_begin))) {
        a.other_edits.push_back(h);
    }
    for (Hunk h : token_diff(t.subspan(a.text_end), c.subspan(a.cand_end))) {
        h.a_begin += a.text_end;
        h.a_end += a.text_end;
        h.b_begin += a.cand_end;
        h.b_end += a.cand_end;
        a.other_edits.push_back(h);
    }
    return a;
}

ValidationReport check_triplet(const TripletCandidate &candidate, const GenerationCell &cell) {
    ValidationReport report;
    report.cell_id = cell.id;
    auto flag = [&](ViolationKind kind, const char *field, std::string detail) {
        report.violations.push_back({kind, field, std::move(detail)});
    };

    const std::pair<const char *, const std::string *> fields[] = {
        {"text", &candidate.text}, {"correct", &candidate.correct}, {"adversarial", &candidate.adversarial}};
    for (const auto &[name, value] : fields) {
        if (const auto n = text::word_count(*value); n > kMaxSentenceWords) {
            flag(ViolationKind::Length, name, std::to_string(n) + " words");
        }
    }

    const auto t = text::comparison_tokens(candidate.text);
    const auto c = text::comparison_tokens(candidate.correct);
    const auto a = text::comparison_tokens(candidate.adversarial);

    if (!locate_subject(t, cell)) {
        const std::string want = cell.demography() ? "a " + cell.demography()->attr_token + " " +
                                                         cell.demography()->hypernym
                                                   : cell.pair()->hypernym;
        flag(ViolationKind::SubjectMissing, "text", "expected '" + want + "'");
        return report;
    }
    const auto anchor = locate_anchor(t, cell);
    if (!anchor) {
        flag(ViolationKind::AnchorMissing, "text", "no mention of '" + cell.extra_element + "'");
    }

    if (const auto al = align_subject(t, c, cell, Side::Correct); !al) {
        flag(ViolationKind::WrongSubject, "correct",
             "expected '" + text::join(expected_subject(cell, Side::Correct), " ") + "'");
    } else if (!al->other_edits.empty()) {
        flag(ViolationKind::CorrectExtraEdit, "correct", describe_hunk(al->other_edits.front(), t, c));
    }

    const auto al = align_subject(t, a, cell, Side::Adversarial);
    if (!al) {
        flag(ViolationKind::WrongSubject, "adversarial",
             "expected '" + text::join(expected_subject(cell, Side::Adversarial), " ") + "'");
        return report;
    }
    if (al->other_edits.empty()) {
        flag(ViolationKind::MissingKnobEdit, "adversarial", "only the subject changed");
        return report;
    }
    if (!anchor) {
        return report;
    }
    const long lo = static_cast<long>(anchor->first) - static_cast<long>(kKnobWindow);
    const long hi = static_cast<long>(anchor->second) + static_cast<long>(kKnobWindow);
    std::vector<const Hunk *> outside;
    for (const auto &h : al->other_edits) {
        // [a_begin, a_end) must sit inside [lo, hi); an insertion is a point at a_begin
        const long b = static_cast<long>(h.a_begin);
        const long e = static_cast<long>(h.a_end);
        const bool inside = b >= lo && (e == b ? b <= hi : e <= hi);
        if (!inside) {
            outside.push_back(&h);
        }
    }
    if (outside.empty()) {
        return report;
    }
    if (al->other_edits.size() >= 2) {
        flag(ViolationKind::MultiSpanEdit, "adversarial",
             std::to_string(al->other_edits.size()) + " edits, first outside: " +
                 describe_hunk(*outside.front(), t, a));
    } else {
        flag(ViolationKind::KnobOutsideWindow, "adversarial", describe_hunk(*outside.front(), t, a));
    }
    return report;
}

std::variant<Triplet, ValidationReport> validate_triplet(const TripletCandidate &candidate,
                                                         const GenerationCell &cell) {
    auto report = check_triplet(candidate, cell);
    if (!report.ok()) {
        return report;
    }
    Triplet t;
    t.id = cell.id;
    t.domain = cell.domain;
    t.text = candidate.text;
    t.correct = candidate.correct;
    t.adversarial = candidate.adversarial;
    t.knob = cell.knob;
    t.extra_element = cell.extra_element;
    t.cell_metadata = cell.to_json();
    return t;
}

Json Rejection::to_json() const {
    Json v = Json::array();
    for (const auto &x : violations) {
        v.push_back({{"kind", to_string(x.kind)}, {"field", x.field}, {"detail", x.detail}});
    }
    return {{"cell_id", cell_id}, {"attempt", attempt}, {"reason", reason}, {"detail", detail}, {"violations", v}};
}

GenerationResult generate_triplets(const std::vector<GenerationCell> &cells, TextGenerator &endpoint,
                                   const AssetLibrary &assets, const GenerationOptions &options,
                                   const std::function<void(const CellOutcome &)> &on_commit) {
    if (options.attempts == 0) {
        fail(ErrorCode::InvalidArgument, "generation needs at least one attempt per cell");
    }
    const std::string model = endpoint.model();
    GenerationResult result;

    auto work = [&](std::size_t i) {
        CellOutcome out;
        out.cell = cells[i];
        const Asset &tmpl = template_for(out.cell.domain, assets);
        const std::string prompt = build_generation_prompt(out.cell, assets);
        for (std::size_t attempt = 1; attempt <= options.attempts; ++attempt) {
            out.attempts = attempt;
            const std::string raw = endpoint.complete(prompt);
            TripletCandidate cand;
            try {
                cand = parse_triplet(raw);
            } catch (const Error &e) {
                out.rejections.push_back({out.cell.id, attempt, "parse", e.what(), {}});
                continue;
            }
            auto checked = validate_triplet(cand, out.cell);
            if (auto *rep = std::get_if<ValidationReport>(&checked)) {
                out.rejections.push_back({out.cell.id, attempt, "validation", "", rep->violations});
                continue;
            }
            Triplet t = std::get<Triplet>(std::move(checked));
            t.cell_metadata["generation"] = {{"model", model},
                                             {"template", tmpl.provenance()},
                                             {"prompt_sha256", sha256_hex(prompt)},
                                             {"attempt", attempt}};
            out.triplet = std::move(t);
            break;
        }
        return out;
    };
    auto commit = [&](std::size_t, CellOutcome out) {
        if (on_commit) {
            on_commit(out);
        }
        result.rejections.insert(result.rejections.end(), out.rejections.begin(), out.rejections.end());
        if (out.triplet) {
            result.triplets.push_back(std::move(*out.triplet));
        } else {
            result.exhausted_cells.push_back(out.cell.id);
        }
    };
    ordered_parallel_map<CellOutcome>(cells.size(), std::max<std::size_t>(options.width, 1), work, commit);
    return result;
}

} // namespace protobias
