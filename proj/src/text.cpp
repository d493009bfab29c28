#include "protobias/text.hpp"

#include <algorithm>
#include <cctype>

namespace protobias::text {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Non-ASCII bytes belong to words (UTF-8 letters), never to punctuation.
bool is_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u) != 0;
}

} // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) {
        ++b;
    }
    while (e > b && is_space(s[e - 1])) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
    });
    return out;
}

std::vector<std::string> words(std::string_view sentence) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < sentence.size()) {
        while (i < sentence.size() && is_space(sentence[i])) {
            ++i;
        }
        std::size_t j = i;
        while (j < sentence.size() && !is_space(sentence[j])) {
            ++j;
        }
        std::size_t b = i;
        std::size_t e = j;
        while (b < e && is_punct(sentence[b])) {
            ++b;
        }
        while (e > b && is_punct(sentence[e - 1])) {
            --e;
        }
        if (e > b) {
            out.emplace_back(sentence.substr(b, e - b));
        }
        i = j;
    }
    return out;
}

std::vector<std::string> comparison_tokens(std::string_view sentence) {
    auto tokens = words(sentence);
    for (auto &t : tokens) {
        t = to_lower(t);
        if (t == "an") {
            t = "a";
        }
    }
    return tokens;
}

std::size_t word_count(std::string_view sentence) { return words(sentence).size(); }

std::string pluralize(std::string_view phrase) {
    std::string s = trim(phrase);
    if (s.empty()) {
        return s;
    }
    const auto last_space = s.find_last_of(' ');
    const std::string head = last_space == std::string::npos ? "" : s.substr(0, last_space + 1);
    std::string last = last_space == std::string::npos ? s : s.substr(last_space + 1);
    const std::string lower = to_lower(last);
    auto ends_with = [&](std::string_view suffix) {
        return lower.size() >= suffix.size() &&
               lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    auto is_vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
    };
    if (ends_with("s") || ends_with("x") || ends_with("z") || ends_with("ch") || ends_with("sh")) {
        last += "es";
    } else if (lower.size() >= 2 && lower.back() == 'y' && !is_vowel(lower[lower.size() - 2])) {
        last.pop_back();
        last += "ies";
    } else {
        last += "s";
    }
    return head + last;
}

bool starts_with_vowel_sound(std::string_view word) {
    if (word.empty()) {
        return false;
    }
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word.front())));
    if (c == 'u' && word.size() > 2 && std::tolower(static_cast<unsigned char>(word[1])) == 'n' &&
        std::tolower(static_cast<unsigned char>(word[2])) == 'i') {
        return false; // "unicycle", "uniform"
    }
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

std::string_view indefinite_article(std::string_view next_word) {
    return starts_with_vowel_sound(next_word) ? "an" : "a";
}

std::string join(const std::vector<std::string> &parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out.append(sep);
        }
        out.append(parts[i]);
    }
    return out;
}

} // namespace protobias::text
