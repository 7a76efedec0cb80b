#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tracer {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Lowercased unique word tokens, split on whitespace and punctuation.
std::set<std::string> word_tokens(std::string_view s);

/// Whitespace-separated token count, used when a backend reports no usage.
long approx_token_count(std::string_view s);

/// True for lines of the form "Name: utterance".
bool is_dialogue_line(std::string_view line);

/// Speaker of a dialogue line, or "" when the line is not dialogue.
std::string dialogue_speaker(std::string_view line);

/// Splits text into sentence units. Dialogue lines are kept whole; other
/// lines break on terminal punctuation followed by whitespace.
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace tracer
