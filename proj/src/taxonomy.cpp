#include "protobias/taxonomy.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"
#include "protobias/sampling.hpp"
#include "protobias/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <set>

#ifndef PROTOBIAS_DATA_DIR
#define PROTOBIAS_DATA_DIR "data"
#endif

namespace protobias {

namespace fs = std::filesystem;

std::string_view to_string(Domain domain) noexcept {
    switch (domain) {
    case Domain::Animals: return "animals";
    case Domain::Demography: return "demography";
    case Domain::Objects: return "objects";
    }
    return "unknown";
}

Domain parse_domain(std::string_view name) {
    if (name == "animals") return Domain::Animals;
    if (name == "demography") return Domain::Demography;
    if (name == "objects") return Domain::Objects;
    fail(ErrorCode::InvalidArgument, "unknown domain '" + std::string(name) + "'");
}

const std::vector<Domain> &all_domains() {
    static const std::vector<Domain> domains{Domain::Animals, Domain::Demography, Domain::Objects};
    return domains;
}

std::string_view to_string(KnobKind kind) noexcept {
    switch (kind) {
    case KnobKind::Count: return "count";
    case KnobKind::ColorTone: return "color_tone";
    case KnobKind::LayoutRelation: return "layout_relation";
    case KnobKind::Spatial: return "spatial";
    case KnobKind::ScaleSize: return "scale_size";
    }
    return "unknown";
}

KnobKind parse_knob_kind(std::string_view name) {
    if (name == "count") return KnobKind::Count;
    if (name == "color_tone" || name == "color") return KnobKind::ColorTone;
    if (name == "layout_relation") return KnobKind::LayoutRelation;
    if (name == "spatial") return KnobKind::Spatial;
    if (name == "scale_size") return KnobKind::ScaleSize;
    fail(ErrorCode::SchemaError, "unknown knob kind '" + std::string(name) + "'");
}

std::string_view to_string(SocialAxis axis) noexcept {
    switch (axis) {
    case SocialAxis::Religion: return "religion";
    case SocialAxis::Nationality: return "nationality";
    case SocialAxis::SexualOrientation: return "sexual_orientation";
    }
    return "unknown";
}

std::string_view to_string(SocioAttr attr) noexcept {
    switch (attr) {
    case SocioAttr::Wealth: return "wealth";
    case SocioAttr::Intellect: return "intellect";
    case SocioAttr::Morality: return "morality";
    case SocioAttr::Power: return "power";
    case SocioAttr::Civility: return "civility";
    }
    return "unknown";
}

std::string_view to_string(Pole pole) noexcept {
    return pole == Pole::Positive ? "positive" : "negative";
}

namespace {

SocialAxis parse_axis(std::string_view name) {
    if (name == "religion") return SocialAxis::Religion;
    if (name == "nationality") return SocialAxis::Nationality;
    if (name == "sexual_orientation") return SocialAxis::SexualOrientation;
    fail(ErrorCode::SchemaError, "unknown social axis '" + std::string(name) + "'");
}

SocioAttr parse_socio_attr(std::string_view name) {
    if (name == "wealth") return SocioAttr::Wealth;
    if (name == "intellect") return SocioAttr::Intellect;
    if (name == "morality") return SocioAttr::Morality;
    if (name == "power") return SocioAttr::Power;
    if (name == "civility") return SocioAttr::Civility;
    fail(ErrorCode::SchemaError, "unknown socio-attribute '" + std::string(name) + "'");
}

Pole parse_pole(std::string_view name) {
    if (name == "positive") return Pole::Positive;
    if (name == "negative") return Pole::Negative;
    fail(ErrorCode::SchemaError, "unknown pole '" + std::string(name) + "'");
}

// Typed field access that turns nlohmann type errors into SchemaError with a
// location.
std::string req_string(const Json &obj, const char *key, const std::string &where) {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
        fail(ErrorCode::SchemaError, where + ": field '" + key + "' must be a string");
    }
    return obj[key].get<std::string>();
}

std::vector<std::string> req_string_list(const Json &obj, const char *key, const std::string &where) {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_array()) {
        fail(ErrorCode::SchemaError, where + ": field '" + key + "' must be an array of strings");
    }
    std::vector<std::string> out;
    for (const auto &v : obj[key]) {
        if (!v.is_string()) {
            fail(ErrorCode::SchemaError, where + ": field '" + key + "' must hold strings only");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

const Json &req_array(const Json &obj, const char *key, const std::string &where) {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_array()) {
        fail(ErrorCode::SchemaError, where + ": field '" + key + "' must be an array");
    }
    return obj[key];
}

bool blank(const std::string &s) { return text::trim(s).empty(); }

bool same_term(const std::string &a, const std::string &b) {
    return text::to_lower(text::trim(a)) == text::to_lower(text::trim(b));
}

std::string slug(std::string_view s) {
    std::string out;
    for (char c : text::to_lower(s)) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            out.push_back(c);
        } else if (!out.empty() && out.back() != '-') {
            out.push_back('-');
        }
    }
    while (!out.empty() && out.back() == '-') {
        out.pop_back();
    }
    return out;
}

std::vector<KnobSpec> parse_knobs(const Json &doc, const std::string &where) {
    std::vector<KnobSpec> knobs;
    std::set<KnobKind> seen;
    for (const auto &k : req_array(doc, "knobs", where)) {
        KnobSpec spec;
        spec.kind = parse_knob_kind(req_string(k, "kind", where + ".knobs"));
        spec.description = req_string(k, "description", where + ".knobs");
        spec.perturbation_rule = req_string(k, "perturbation_rule", where + ".knobs");
        if (blank(spec.perturbation_rule)) {
            fail(ErrorCode::InvariantError,
                 where + ": knob '" + std::string(to_string(spec.kind)) + "' has an empty perturbation_rule");
        }
        if (!seen.insert(spec.kind).second) {
            fail(ErrorCode::DuplicateIdError,
                 where + ": knob '" + std::string(to_string(spec.kind)) + "' declared twice");
        }
        knobs.push_back(std::move(spec));
    }
    return knobs;
}

void parse_pairs(const Json &doc, DomainTaxonomy &out, const std::string &where) {
    std::set<std::string> ids;
    for (const auto &p : req_array(doc, "pairs", where)) {
        CategoryPair pair;
        pair.domain = out.domain;
        pair.id = req_string(p, "id", where + ".pairs");
        const std::string at = where + ".pairs[" + pair.id + "]";
        pair.subcategory = req_string(p, "subcategory", at);
        pair.hypernym = req_string(p, "hypernym", at);
        pair.non_proto = req_string(p, "non_proto", at);
        pair.proto = req_string(p, "proto", at);
        pair.extra_objects = req_string_list(p, "extra_objects", at);
        pair.environment_hint = req_string(p, "environment_hint", at);

        if (blank(pair.id)) {
            fail(ErrorCode::InvariantError, at + ": empty id");
        }
        if (blank(pair.non_proto) || blank(pair.proto)) {
            fail(ErrorCode::InvariantError, at + ": non_proto and proto must be non-empty");
        }
        if (same_term(pair.non_proto, pair.proto)) {
            fail(ErrorCode::InvariantError, at + ": non_proto equals proto ('" + pair.proto + "')");
        }
        if (blank(pair.hypernym)) {
            fail(ErrorCode::InvariantError, at + ": empty hypernym");
        }
        if (pair.extra_objects.empty() ||
            std::any_of(pair.extra_objects.begin(), pair.extra_objects.end(), blank)) {
            fail(ErrorCode::InvariantError, at + ": extra_objects must be a non-empty list of names");
        }
        if (!ids.insert(pair.id).second) {
            fail(ErrorCode::DuplicateIdError, where + ": duplicate pair id '" + pair.id + "'");
        }
        out.pairs.push_back(std::move(pair));
    }
}

void parse_demography(const Json &doc, DomainTaxonomy &out, const std::string &where) {
    out.hypernym = req_string(doc, "hypernym", where);
    if (blank(out.hypernym)) {
        fail(ErrorCode::InvariantError, where + ": empty hypernym");
    }
    struct Attribute {
        SocioAttr attr;
        std::string positive;
        std::string negative;
        std::vector<std::string> extras;
        std::string environment_hint;
    };
    std::vector<Attribute> attributes;
    for (const auto &a : req_array(doc, "attributes", where)) {
        Attribute attr;
        attr.attr = parse_socio_attr(req_string(a, "socio_attr", where + ".attributes"));
        const std::string at = where + ".attributes[" + std::string(to_string(attr.attr)) + "]";
        attr.positive = req_string(a, "positive", at);
        attr.negative = req_string(a, "negative", at);
        attr.extras = req_string_list(a, "extra_elements", at);
        attr.environment_hint = req_string(a, "environment_hint", at);
        if (blank(attr.positive) || blank(attr.negative)) {
            fail(ErrorCode::InvariantError, at + ": attr tokens must be non-empty");
        }
        if (same_term(attr.positive, attr.negative)) {
            fail(ErrorCode::InvariantError, at + ": positive and negative attr tokens coincide");
        }
        if (attr.extras.empty() || std::any_of(attr.extras.begin(), attr.extras.end(), blank)) {
            fail(ErrorCode::InvariantError, at + ": extra_elements must be a non-empty list");
        }
        attributes.push_back(std::move(attr));
    }

    std::set<std::string> ids;
    for (const auto &g : req_array(doc, "groups", where)) {
        const SocialAxis axis = parse_axis(req_string(g, "axis", where + ".groups"));
        const std::string at = where + ".groups[" + std::string(to_string(axis)) + "]";
        if (!g.contains("advantaged") || !g["advantaged"].is_object()) {
            fail(ErrorCode::SchemaError, at + ": 'advantaged' must be an object");
        }
        const std::string adv_key = req_string(g["advantaged"], "key", at + ".advantaged");
        const std::string adv_desc = req_string(g["advantaged"], "desc", at + ".advantaged");
        for (const auto &d : req_array(g, "disadvantaged", at)) {
            const std::string dis_key = req_string(d, "key", at + ".disadvantaged");
            const std::string dis_desc = req_string(d, "desc", at + ".disadvantaged");
            if (blank(adv_key) || blank(dis_key) || blank(adv_desc) || blank(dis_desc)) {
                fail(ErrorCode::InvariantError, at + ": group keys and descriptions must be non-empty");
            }
            if (same_term(adv_key, dis_key)) {
                fail(ErrorCode::InvariantError,
                     at + ": advantaged_key equals disadvantaged_key ('" + adv_key + "')");
            }
            for (const auto &attr : attributes) {
                for (Pole pole : {Pole::Positive, Pole::Negative}) {
                    for (const auto &extra : attr.extras) {
                        DemographyCell cell;
                        cell.hypernym = out.hypernym;
                        cell.axis = axis;
                        cell.advantaged_key = adv_key;
                        cell.disadvantaged_key = dis_key;
                        cell.advantaged_desc = adv_desc;
                        cell.disadvantaged_desc = dis_desc;
                        cell.socio_attr = attr.attr;
                        cell.pole = pole;
                        cell.attr_token = pole == Pole::Positive ? attr.positive : attr.negative;
                        cell.extra_element = extra;
                        cell.environment_hint = attr.environment_hint;
                        cell.id = "demography." + slug(to_string(axis)) + "." + slug(adv_key) + "-" +
                                  slug(dis_key) + "." + std::string(to_string(attr.attr)) + "." +
                                  std::string(to_string(pole)) + "." + slug(extra);
                        if (!ids.insert(cell.id).second) {
                            fail(ErrorCode::DuplicateIdError, where + ": duplicate cell '" + cell.id + "'");
                        }
                        out.cells.push_back(std::move(cell));
                    }
                }
            }
        }
    }
}

} // namespace

const std::string &DemographyCell::non_proto_key() const {
    return pole == Pole::Positive ? disadvantaged_key : advantaged_key;
}
const std::string &DemographyCell::proto_key() const {
    return pole == Pole::Positive ? advantaged_key : disadvantaged_key;
}
const std::string &DemographyCell::non_proto_desc() const {
    return pole == Pole::Positive ? disadvantaged_desc : advantaged_desc;
}
const std::string &DemographyCell::proto_desc() const {
    return pole == Pole::Positive ? advantaged_desc : disadvantaged_desc;
}

void Taxonomy::add(DomainTaxonomy domain) {
    const Domain key = domain.domain;
    if (!m_domains.emplace(key, std::move(domain)).second) {
        fail(ErrorCode::DuplicateIdError, "domain '" + std::string(to_string(key)) + "' loaded twice");
    }
}

const DomainTaxonomy &Taxonomy::get(Domain domain) const {
    auto it = m_domains.find(domain);
    if (it == m_domains.end()) {
        fail(ErrorCode::EmptyTaxonomyError,
             "taxonomy has no '" + std::string(to_string(domain)) + "' domain");
    }
    return it->second;
}

DomainTaxonomy parse_domain_taxonomy(const Json &doc, const std::string &source) {
    if (!doc.is_object()) {
        fail(ErrorCode::SchemaError, source + ": taxonomy document must be an object");
    }
    if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
        fail(ErrorCode::SchemaError, source + ": missing integer schema_version");
    }
    if (doc["schema_version"].get<int>() != kSchemaVersion) {
        fail(ErrorCode::SchemaError, source + ": unsupported schema_version");
    }
    DomainTaxonomy out;
    try {
        out.domain = parse_domain(req_string(doc, "domain", source));
    } catch (const Error &e) {
        if (e.code() == ErrorCode::InvalidArgument) {
            fail(ErrorCode::SchemaError, source + ": " + e.what());
        }
        throw;
    }
    out.knobs = parse_knobs(doc, source);
    if (out.domain == Domain::Demography) {
        parse_demography(doc, out, source);
    } else {
        parse_pairs(doc, out, source);
    }
    return out;
}

Taxonomy load_taxonomy(const fs::path &path) {
    auto load_file = [](const fs::path &file) {
        Json doc;
        try {
            doc = Json::parse(read_file(file));
        } catch (const Json::exception &e) {
            fail(ErrorCode::SchemaError, file.string() + ": " + e.what());
        }
        return parse_domain_taxonomy(doc, file.filename().string());
    };

    Taxonomy taxonomy;
    if (fs::is_directory(path)) {
        for (Domain d : all_domains()) {
            const fs::path file = path / (std::string(to_string(d)) + ".json");
            if (fs::exists(file)) {
                auto dom = load_file(file);
                if (dom.domain != d) {
                    fail(ErrorCode::SchemaError, file.string() + ": declares domain '" +
                                                     std::string(to_string(dom.domain)) + "'");
                }
                taxonomy.add(std::move(dom));
            }
        }
    } else if (fs::exists(path)) {
        taxonomy.add(load_file(path));
    } else {
        fail(ErrorCode::IoError, "taxonomy path does not exist: " + path.string());
    }
    if (taxonomy.domains().empty()) {
        fail(ErrorCode::SchemaError, "no taxonomy files found under " + path.string());
    }
    return taxonomy;
}

fs::path bundled_taxonomy_dir() {
    if (const char *env = std::getenv("PROTOBIAS_DATA_DIR")) {
        return fs::path(env) / "taxonomy";
    }
    return fs::path(PROTOBIAS_DATA_DIR) / "taxonomy";
}

const std::string &GenerationCell::subject_id() const {
    return std::visit([](const auto &s) -> const std::string & { return s.id; }, subject);
}

Json GenerationCell::to_json() const {
    Json j;
    j["cell_id"] = id;
    j["domain"] = to_string(domain);
    j["knob"] = {{"kind", to_string(knob.kind)},
                 {"description", knob.description},
                 {"perturbation_rule", knob.perturbation_rule}};
    j["extra_element"] = extra_element;
    j["environment_hint"] = environment_hint;
    j["round"] = round;
    if (const auto *p = pair()) {
        j["subject"] = {{"id", p->id},
                        {"subcategory", p->subcategory},
                        {"hypernym", p->hypernym},
                        {"non_proto", p->non_proto},
                        {"proto", p->proto},
                        {"extra_objects", p->extra_objects},
                        {"environment_hint", p->environment_hint}};
    } else {
        const auto &c = std::get<DemographyCell>(subject);
        j["subject"] = {{"id", c.id},
                        {"hypernym", c.hypernym},
                        {"axis", to_string(c.axis)},
                        {"advantaged_key", c.advantaged_key},
                        {"disadvantaged_key", c.disadvantaged_key},
                        {"advantaged_desc", c.advantaged_desc},
                        {"disadvantaged_desc", c.disadvantaged_desc},
                        {"socio_attr", to_string(c.socio_attr)},
                        {"pole", to_string(c.pole)},
                        {"attr_token", c.attr_token},
                        {"extra_element", c.extra_element},
                        {"environment_hint", c.environment_hint}};
    }
    return j;
}

GenerationCell GenerationCell::from_json(const Json &j) {
    try {
        GenerationCell cell;
        cell.id = j.at("cell_id").get<std::string>();
        cell.domain = parse_domain(j.at("domain").get<std::string>());
        cell.knob.kind = parse_knob_kind(j.at("knob").at("kind").get<std::string>());
        cell.knob.description = j.at("knob").at("description").get<std::string>();
        cell.knob.perturbation_rule = j.at("knob").at("perturbation_rule").get<std::string>();
        cell.extra_element = j.at("extra_element").get<std::string>();
        cell.environment_hint = j.at("environment_hint").get<std::string>();
        cell.round = j.at("round").get<std::size_t>();
        const Json &s = j.at("subject");
        if (cell.domain == Domain::Demography) {
            DemographyCell c;
            c.id = s.at("id").get<std::string>();
            c.hypernym = s.at("hypernym").get<std::string>();
            c.axis = parse_axis(s.at("axis").get<std::string>());
            c.advantaged_key = s.at("advantaged_key").get<std::string>();
            c.disadvantaged_key = s.at("disadvantaged_key").get<std::string>();
            c.advantaged_desc = s.at("advantaged_desc").get<std::string>();
            c.disadvantaged_desc = s.at("disadvantaged_desc").get<std::string>();
            c.socio_attr = parse_socio_attr(s.at("socio_attr").get<std::string>());
            c.pole = parse_pole(s.at("pole").get<std::string>());
            c.attr_token = s.at("attr_token").get<std::string>();
            c.extra_element = s.at("extra_element").get<std::string>();
            c.environment_hint = s.at("environment_hint").get<std::string>();
            cell.subject = std::move(c);
        } else {
            CategoryPair p;
            p.id = s.at("id").get<std::string>();
            p.domain = cell.domain;
            p.subcategory = s.at("subcategory").get<std::string>();
            p.hypernym = s.at("hypernym").get<std::string>();
            p.non_proto = s.at("non_proto").get<std::string>();
            p.proto = s.at("proto").get<std::string>();
            p.extra_objects = s.at("extra_objects").get<std::vector<std::string>>();
            p.environment_hint = s.at("environment_hint").get<std::string>();
            cell.subject = std::move(p);
        }
        return cell;
    } catch (const Json::exception &e) {
        fail(ErrorCode::SchemaError, std::string("malformed cell record: ") + e.what());
    }
}

namespace {

struct Subject {
    std::string id;
    std::variant<CategoryPair, DemographyCell> value;
    std::vector<std::string> extras;
    std::string environment_hint;
    std::vector<std::size_t> knob_order;
    std::vector<std::size_t> extra_order;
};

std::vector<std::size_t> iota_vec(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

} // namespace

std::vector<GenerationCell> enumerate_cells(const Taxonomy &taxonomy, Domain domain,
                                            std::size_t limit, std::uint64_t seed) {
    if (limit == 0) {
        fail(ErrorCode::InvalidArgument, "enumerate_cells requires limit >= 1");
    }
    if (!taxonomy.has(domain)) {
        fail(ErrorCode::EmptyTaxonomyError,
             "taxonomy has no '" + std::string(to_string(domain)) + "' domain");
    }
    const DomainTaxonomy &dom = taxonomy.get(domain);
    if (dom.knobs.empty() || dom.subject_count() == 0) {
        fail(ErrorCode::EmptyTaxonomyError,
             "domain '" + std::string(to_string(domain)) + "' has no subjects or knobs");
    }

    std::vector<Subject> subjects;
    if (domain == Domain::Demography) {
        for (const auto &c : dom.cells) {
            subjects.push_back({c.id, c, {c.extra_element}, c.environment_hint, {}, {}});
        }
    } else {
        for (const auto &p : dom.pairs) {
            subjects.push_back({p.id, p, p.extra_objects, p.environment_hint, {}, {}});
        }
    }
    std::sort(subjects.begin(), subjects.end(),
              [](const Subject &a, const Subject &b) { return a.id < b.id; });
    for (auto &s : subjects) {
        Rng rng(derive_seed(seed, "subject:" + s.id));
        s.knob_order = iota_vec(dom.knobs.size());
        s.extra_order = iota_vec(s.extras.size());
        shuffle(s.knob_order, rng);
        shuffle(s.extra_order, rng);
    }

    std::vector<GenerationCell> cells;
    cells.reserve(limit);
    for (std::size_t round = 0; cells.size() < limit; ++round) {
        std::vector<std::size_t> order = iota_vec(subjects.size());
        Rng rng(derive_seed(seed, "round:" + std::to_string(round)));
        shuffle(order, rng);
        for (std::size_t idx : order) {
            if (cells.size() == limit) {
                break;
            }
            const Subject &s = subjects[idx];
            const std::size_t k = s.knob_order.size();
            const std::size_t e = s.extra_order.size();
            // (r mod K, (r + floor(r / lcm)) mod E) visits every (knob, extra)
            // combination exactly once per K*E rounds with both coordinates
            // cycling every round.
            const std::size_t l = std::lcm(k, e);
            const std::size_t knob_slot = round % k;
            const std::size_t extra_slot = (round + round / l) % e;

            GenerationCell cell;
            cell.domain = domain;
            cell.subject = s.value;
            cell.knob = dom.knobs[s.knob_order[knob_slot]];
            cell.extra_element = s.extras[s.extra_order[extra_slot]];
            cell.environment_hint = s.environment_hint;
            cell.round = round;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%06zu", cells.size());
            cell.id = std::string(to_string(domain)) + "-" + buf;
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

} // namespace protobias
