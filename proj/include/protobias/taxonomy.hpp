#pragma once

#include "protobias/jsonl.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace protobias {

enum class Domain { Animals, Demography, Objects };

std::string_view to_string(Domain domain) noexcept;
Domain parse_domain(std::string_view name);
const std::vector<Domain> &all_domains();

enum class KnobKind { Count, ColorTone, LayoutRelation, Spatial, ScaleSize };

std::string_view to_string(KnobKind kind) noexcept;
KnobKind parse_knob_kind(std::string_view name);

struct KnobSpec {
    KnobKind kind = KnobKind::Count;
    std::string description;
    std::string perturbation_rule;
};

struct CategoryPair {
    std::string id;
    Domain domain = Domain::Animals;
    std::string subcategory;
    std::string hypernym;
    std::string non_proto;
    std::string proto;
    std::vector<std::string> extra_objects;
    std::string environment_hint;
};

enum class SocialAxis { Religion, Nationality, SexualOrientation };
enum class SocioAttr { Wealth, Intellect, Morality, Power, Civility };
enum class Pole { Positive, Negative };

std::string_view to_string(SocialAxis axis) noexcept;
std::string_view to_string(SocioAttr attr) noexcept;
std::string_view to_string(Pole pole) noexcept;

struct DemographyCell {
    std::string id;
    std::string hypernym = "person";
    SocialAxis axis = SocialAxis::Religion;
    std::string advantaged_key;
    std::string disadvantaged_key;
    std::string advantaged_desc;
    std::string disadvantaged_desc;
    SocioAttr socio_attr = SocioAttr::Wealth;
    Pole pole = Pole::Positive;
    std::string attr_token;
    std::string extra_element;
    std::string environment_hint;

    // Positive pole: the attribute on the disadvantaged group is the
    // non-prototypical case. Negative pole swaps the assignment.
    const std::string &non_proto_key() const;
    const std::string &proto_key() const;
    const std::string &non_proto_desc() const;
    const std::string &proto_desc() const;
};

struct DomainTaxonomy {
    Domain domain = Domain::Animals;
    std::string hypernym; // demography only: the shared subject noun
    std::vector<KnobSpec> knobs;
    std::vector<CategoryPair> pairs;
    std::vector<DemographyCell> cells;

    std::size_t subject_count() const noexcept {
        return domain == Domain::Demography ? cells.size() : pairs.size();
    }
};

// Immutable after load; safe to share across threads.
class Taxonomy {
public:
    void add(DomainTaxonomy domain);
    bool has(Domain domain) const noexcept { return m_domains.count(domain) != 0; }
    const DomainTaxonomy &get(Domain domain) const;
    const std::map<Domain, DomainTaxonomy> &domains() const noexcept { return m_domains; }

private:
    std::map<Domain, DomainTaxonomy> m_domains;
};

/// Parses one domain document (see data/taxonomy/README.md for the schema).
DomainTaxonomy parse_domain_taxonomy(const Json &doc, const std::string &source);

/// Loads a taxonomy directory (animals.json, objects.json, demography.json;
/// any subset) or a single domain file. Every invariant is checked.
/// Errors: SchemaError, InvariantError, DuplicateIdError.
Taxonomy load_taxonomy(const std::filesystem::path &path);

/// Directory of the taxonomy bundled with the build.
std::filesystem::path bundled_taxonomy_dir();

struct GenerationCell {
    std::string id;
    Domain domain = Domain::Animals;
    std::variant<CategoryPair, DemographyCell> subject;
    KnobSpec knob;
    std::string extra_element;
    std::string environment_hint;
    std::size_t round = 0;

    const std::string &subject_id() const;
    const CategoryPair *pair() const { return std::get_if<CategoryPair>(&subject); }
    const DemographyCell *demography() const { return std::get_if<DemographyCell>(&subject); }

    Json to_json() const;
    static GenerationCell from_json(const Json &j);
};

/// Deterministic cross-product walk over (subject x knob x extra element).
/// Cells are emitted in rounds; each round visits every subject once (in a
/// seeded order) with that subject's next (knob, extra) combination, so any
/// prefix is balanced across subjects and each subject cycles its knobs and
/// extras evenly. enumerate_cells(..., n, s) is a prefix of (..., m, s) for m > n.
std::vector<GenerationCell> enumerate_cells(const Taxonomy &taxonomy, Domain domain,
                                            std::size_t limit, std::uint64_t seed);

} // namespace protobias
