#include "protobias/token_diff.hpp"

#include <algorithm>

namespace protobias {

std::vector<Hunk> token_diff(std::span<const std::string> reference,
                             std::span<const std::string> candidate) {
    const std::size_t n = reference.size();
    const std::size_t m = candidate.size();
    // lcs[i][j] = LCS length of reference[i:] and candidate[j:]
    std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            lcs[i][j] = reference[i] == candidate[j]
                            ? lcs[i + 1][j + 1] + 1
                            : std::max(lcs[i + 1][j], lcs[i][j + 1]);
        }
    }

    std::vector<Hunk> hunks;
    std::size_t i = 0;
    std::size_t j = 0;
    bool open = false;
    Hunk current;
    auto close = [&] {
        if (open) {
            current.a_end = i;
            current.b_end = j;
            hunks.push_back(current);
            open = false;
        }
    };
    auto begin = [&] {
        if (!open) {
            current = Hunk{i, i, j, j};
            open = true;
        }
    };
    while (i < n || j < m) {
        if (i < n && j < m && reference[i] == candidate[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1) {
            close();
            ++i;
            ++j;
        } else if (i < n && (j == m || lcs[i + 1][j] >= lcs[i][j + 1])) {
            begin();
            ++i;
        } else {
            begin();
            ++j;
        }
    }
    close();
    return hunks;
}

} // namespace protobias
