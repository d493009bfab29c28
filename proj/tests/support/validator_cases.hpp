#pragma once

// Hand-built triplets for the lexical validator: 50 that follow the contract
// in phrasings unlike the mock generator's, and 50 broken in one known way.

#include "protobias/prompt_forge.hpp"
#include "protobias/taxonomy.hpp"
#include "protobias/text.hpp"

#include <optional>
#include <string>
#include <vector>

namespace protobias::testing {

struct ValidatorCase {
    GenerationCell cell;
    TripletCandidate triplet;
    std::optional<ViolationKind> expected; // nullopt: must pass
    std::string what;
};

inline std::string art(const std::string &phrase) {
    const auto w = text::words(phrase);
    return std::string(text::indefinite_article(w.empty() ? phrase : w.front()));
}

inline std::string np(const std::string &phrase) { return art(phrase) + " " + phrase; }

inline std::string cap(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') {
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
    }
    return s;
}

struct Tails {
    std::string plain;
    std::string knobbed;
};

inline Tails knob_tails(KnobKind kind, const std::string &x) {
    switch (kind) {
    case KnobKind::Count:
        return {"near exactly two " + text::pluralize(x), "near exactly three " + text::pluralize(x)};
    case KnobKind::ColorTone:
        return {"beside a green " + x, "beside a yellow " + x};
    case KnobKind::LayoutRelation:
        return {"with " + np(x) + " placed to its left", "with " + np(x) + " placed to its right"};
    case KnobKind::Spatial:
        return {"with " + np(x) + " in the foreground", "with " + np(x) + " in the background"};
    case KnobKind::ScaleSize:
        return {"beside a tiny " + x, "beside a huge " + x};
    }
    return {};
}

struct Subjects {
    std::string text, correct, adversarial;
};

inline Subjects subjects_for(const GenerationCell &cell) {
    if (const auto *d = cell.demography()) {
        const std::string a = art(d->attr_token) + " " + d->attr_token;
        return {a + " " + d->hypernym, a + " " + d->non_proto_desc(), a + " " + d->proto_desc()};
    }
    const CategoryPair &p = *cell.pair();
    return {np(p.hypernym), np(p.non_proto), np(p.proto)};
}

inline const char *verb_for(std::size_t i) {
    static const char *verbs[] = {"waits", "rests", "appears", "is seen"};
    return verbs[i % 4];
}

// One sentence. Odd i puts the environment first (not allowed for demography,
// whose text must open with the subject).
inline bool env_first(const GenerationCell &cell, std::size_t i) { return i % 2 == 1 && !cell.demography(); }

inline std::string sentence(const GenerationCell &cell, std::size_t i, const std::string &subject,
                            const std::string &verb, const std::string &tail, const std::string &lead = "In") {
    const std::string &env = cell.environment_hint;
    if (env_first(cell, i)) {
        return lead + " " + env + ", " + subject + " " + verb + " " + tail + ".";
    }
    return cap(subject) + " " + verb + " in " + env + " " + tail + ".";
}

inline TripletCandidate valid_triplet(const GenerationCell &cell, std::size_t i) {
    const Subjects s = subjects_for(cell);
    const Tails t = knob_tails(cell.knob.kind, cell.extra_element);
    const std::string v = verb_for(i);
    return {sentence(cell, i, s.text, v, t.plain), sentence(cell, i, s.correct, v, t.plain),
            sentence(cell, i, s.adversarial, v, t.knobbed)};
}

inline std::vector<ValidatorCase> valid_cases(const std::vector<GenerationCell> &cells) {
    std::vector<ValidatorCase> out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        out.push_back({cells[i], valid_triplet(cells[i], i), std::nullopt, "valid " + cells[i].id});
    }
    return out;
}

inline std::vector<ValidatorCase> corrupted_cases(const std::vector<GenerationCell> &cells) {
    static const std::string long_tail =
        ", while soft evening light falls across the quiet scene and a gentle breeze moves slowly through the "
        "air around everything nearby";
    std::vector<ValidatorCase> out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const GenerationCell &cell = cells[i];
        const Subjects s = subjects_for(cell);
        const Tails t = knob_tails(cell.knob.kind, cell.extra_element);
        const std::string v = verb_for(i);
        // an edit well away from the extra element: the opening word when the
        // environment leads, else the verb (the environment sits between it
        // and the knob phrase)
        auto far = [&](const std::string &subject, const std::string &tail) {
            return env_first(cell, i) ? sentence(cell, i, subject, v, tail, "Within")
                                      : sentence(cell, i, subject, "sleeps", tail);
        };
        TripletCandidate c = valid_triplet(cell, i);
        ValidatorCase vc{cell, c, std::nullopt, ""};
        switch (i % 5) {
        case 0: // knob edit plus a second edit far from the anchor
            vc.triplet.adversarial = far(s.adversarial, t.knobbed);
            vc.expected = ViolationKind::MultiSpanEdit;
            vc.what = "multi-span edit";
            break;
        case 1: // adversarial keeps the non-prototype subject
            vc.triplet.adversarial = sentence(cell, i, s.correct, v, t.knobbed);
            vc.expected = ViolationKind::WrongSubject;
            vc.what = "adversarial wrong subject";
            break;
        case 2: // correct side swaps in the prototype
            vc.triplet.correct = sentence(cell, i, s.adversarial, v, t.plain);
            vc.expected = ViolationKind::WrongSubject;
            vc.what = "correct wrong subject";
            break;
        case 3: // over the word limit
            for (std::string *f : {&vc.triplet.text, &vc.triplet.correct, &vc.triplet.adversarial}) {
                f->pop_back(); // drop the period
                *f += long_tail + ".";
            }
            vc.expected = ViolationKind::Length;
            vc.what = "over 30 words";
            break;
        default: // the only edit sits away from the extra element
            vc.triplet.adversarial = far(s.adversarial, t.plain);
            vc.expected = ViolationKind::KnobOutsideWindow;
            vc.what = "knob edit outside window";
            break;
        }
        vc.what += " " + cell.id;
        out.push_back(std::move(vc));
    }
    return out;
}

/// 50 cells spread over the three domains (17 animals, 17 objects, 16 demography).
inline std::vector<GenerationCell> mixed_cells(std::uint64_t seed) {
    const Taxonomy tax = load_taxonomy(bundled_taxonomy_dir());
    std::vector<GenerationCell> out;
    const std::pair<Domain, std::size_t> plan[] = {{Domain::Animals, 17}, {Domain::Objects, 17}, {Domain::Demography, 16}};
    for (const auto &[d, n] : plan) {
        auto cells = enumerate_cells(tax, d, n, seed);
        out.insert(out.end(), cells.begin(), cells.end());
    }
    return out;
}

} // namespace protobias::testing
