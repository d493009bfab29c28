#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace protobias {

// splitmix64 stream with an unbiased bounded draw. Used instead of the
// standard distributions, whose output is implementation-defined, so samples
// and shuffles are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : m_state(seed) {}

    std::uint64_t next();
    /// Uniform integer in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform double in [0, 1).
    double uniform();

private:
    std::uint64_t m_state;
};

template <class T>
void shuffle(std::vector<T> &items, Rng &rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Splits n across k strata as evenly as possible; the first n % k strata get
/// one extra.
std::vector<std::size_t> even_quota(std::size_t n, std::size_t k);

struct StratifiedItem {
    std::string id;
    std::string stratum;
};

/// Seeded, stratified, even sample of n items across the distinct strata
/// present. Returned indices are grouped by stratum (lexicographic) and keep
/// the shuffled draw order inside each stratum. The result depends only on the
/// (id, stratum) multiset, the seed and n, never on input order.
/// Throws InsufficientPairsError when a stratum cannot fill its quota.
std::vector<std::size_t> stratified_sample(const std::vector<StratifiedItem> &items, std::size_t n,
                                           std::uint64_t seed);

} // namespace protobias
