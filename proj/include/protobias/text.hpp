#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace protobias::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Whitespace split, then leading/trailing ASCII punctuation stripped from each
/// token; tokens that were pure punctuation are dropped. Case is preserved.
std::vector<std::string> words(std::string_view sentence);

/// words() lowercased with the indefinite article folded ("an" -> "a"), the
/// comparison form used by the triplet validator.
std::vector<std::string> comparison_tokens(std::string_view sentence);

std::size_t word_count(std::string_view sentence);

/// English plural of the last word of a noun phrase ("bamboo stalk" ->
/// "bamboo stalks", "bench" -> "benches", "pony" -> "ponies").
std::string pluralize(std::string_view phrase);

/// "a" or "an" for the given following word.
std::string_view indefinite_article(std::string_view next_word);

std::string join(const std::vector<std::string> &parts, std::string_view sep);

bool starts_with_vowel_sound(std::string_view word);

} // namespace protobias::text
