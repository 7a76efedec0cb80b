#include "tracer/text.hpp"

#include <algorithm>
#include <cctype>

namespace tracer {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Characters allowed in a speaker name before the colon of a dialogue line.
bool is_name_char(char c) {
    return is_alnum(c) || c == ' ' || c == '.' || c == '\'' || c == '-' || c == '_';
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t begin = 0;
    while (begin < s.size() && is_space(s[begin])) ++begin;
    std::size_t end = s.size();
    while (end > begin && is_space(s[end - 1])) --end;
    return std::string(s.substr(begin, end - begin));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::set<std::string> word_tokens(std::string_view s) {
    std::set<std::string> tokens;
    std::string current;
    for (char c : s) {
        if (is_alnum(c)) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            tokens.insert(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.insert(current);
    return tokens;
}

long approx_token_count(std::string_view s) {
    long count = 0;
    bool in_token = false;
    for (char c : s) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

std::string dialogue_speaker(std::string_view line) {
    std::string_view t = line;
    while (!t.empty() && is_space(t.front())) t.remove_prefix(1);
    auto colon = t.find(':');
    if (colon == std::string_view::npos || colon == 0) return "";
    std::string_view name = t.substr(0, colon);
    if (name.size() > 48) return "";
    if (!is_alnum(name.front())) return "";
    int words = 1;
    for (std::size_t i = 0; i < name.size(); ++i) {
        if (!is_name_char(name[i])) return "";
        if (name[i] == ' ' && i + 1 < name.size() && name[i - 1] != ' ') ++words;
    }
    if (words > 4) return "";
    // Require the colon to be followed by whitespace or end of line.
    if (colon + 1 < t.size() && !is_space(t[colon + 1])) return "";
    return trim(name);
}

bool is_dialogue_line(std::string_view line) { return !dialogue_speaker(line).empty(); }

namespace {

// Splits a non-dialogue line at terminal punctuation followed by whitespace.
// Closing quotes and brackets stick to the sentence they terminate.
void split_line_into_sentences(std::string_view line, std::vector<std::string>& out) {
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (c == '.' || c == '!' || c == '?') {
            std::size_t end = i + 1;
            while (end < line.size() &&
                   (line[end] == '"' || line[end] == '\'' || line[end] == ')' ||
                    line[end] == ']')) {
                ++end;
            }
            if (end >= line.size() || is_space(line[end])) {
                std::string sentence = trim(line.substr(start, end - start));
                if (!sentence.empty()) out.push_back(std::move(sentence));
                start = end;
                i = end;
                continue;
            }
        }
        ++i;
    }
    std::string tail = trim(line.substr(start));
    if (!tail.empty()) out.push_back(std::move(tail));
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        std::string trimmed = trim(line);
        if (!trimmed.empty()) {
            if (is_dialogue_line(trimmed)) {
                out.push_back(std::move(trimmed));
            } else {
                split_line_into_sentences(trimmed, out);
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

}  // namespace tracer
