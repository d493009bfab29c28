#include "protobias/sampling.hpp"

#include "protobias/error.hpp"
#include "protobias/hashing.hpp"

#include <algorithm>
#include <map>

namespace protobias {

std::uint64_t Rng::next() {
    std::uint64_t z = (m_state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) {
        fail(ErrorCode::InvalidArgument, "Rng::below requires a positive bound");
    }
    // Rejection sampling on the top of the range removes modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = next();
    while (x >= limit) {
        x = next();
    }
    return x % bound;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::vector<std::size_t> even_quota(std::size_t n, std::size_t k) {
    std::vector<std::size_t> quota(k, k == 0 ? 0 : n / k);
    for (std::size_t i = 0; k > 0 && i < n % k; ++i) {
        ++quota[i];
    }
    return quota;
}

std::vector<std::size_t> stratified_sample(const std::vector<StratifiedItem> &items, std::size_t n,
                                           std::uint64_t seed) {
    if (n == 0) {
        return {};
    }
    if (n > items.size()) {
        fail(ErrorCode::InsufficientPairsError, "requested " + std::to_string(n) +
                                                    " samples but only " +
                                                    std::to_string(items.size()) + " available");
    }
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < items.size(); ++i) {
        strata[items[i].stratum].push_back(i);
    }
    const auto quota = even_quota(n, strata.size());
    std::vector<std::size_t> picked;
    picked.reserve(n);
    std::size_t s = 0;
    for (auto &[name, members] : strata) {
        if (members.size() < quota[s]) {
            fail(ErrorCode::InsufficientPairsError,
                 "stratum '" + name + "' has " + std::to_string(members.size()) +
                     " items but needs " + std::to_string(quota[s]));
        }
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return items[a].id < items[b].id;
        });
        Rng rng(derive_seed(seed, "stratum:" + name));
        shuffle(members, rng);
        picked.insert(picked.end(), members.begin(),
                      members.begin() + static_cast<std::ptrdiff_t>(quota[s]));
        ++s;
    }
    return picked;
}

} // namespace protobias
