#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace versenet {

// Shared tokenization for the corpus, metrics and vocabulary modules: input is
// lowercased, punctuation is split off into single-character tokens, words may
// contain letters, digits and apostrophes ("o'er" stays one token). Line
// breaks act as whitespace and are never tokens.
std::vector<std::string> tokenize(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string to_lower(std::string_view text);

// True if `text` contains `token` as a whole token (case-insensitive).
bool contains_token(std::string_view text, std::string_view token);

}  // namespace versenet
