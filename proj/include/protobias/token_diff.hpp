#pragma once

#include <span>
#include <string>
#include <vector>

namespace protobias {

// One maximal edit region: tokens [a_begin, a_end) of the reference are
// replaced by tokens [b_begin, b_end) of the candidate. An empty reference
// range is a pure insertion before a_begin; an empty candidate range is a
// pure deletion.
struct Hunk {
    std::size_t a_begin = 0;
    std::size_t a_end = 0;
    std::size_t b_begin = 0;
    std::size_t b_end = 0;

    bool operator==(const Hunk &) const = default;
};

/// Edit regions of a longest-common-subsequence alignment, in order.
/// Deterministic: a token match is taken whenever it lies on some optimal
/// alignment, otherwise reference deletions are preferred over insertions.
std::vector<Hunk> token_diff(std::span<const std::string> reference,
                             std::span<const std::string> candidate);

} // namespace protobias
