#pragma once

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdohkit {

struct TokenSpan {
    std::string text;
    std::size_t begin = 0;  // character offset into the source text
    std::size_t end = 0;    // one past the last character
};

inline bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

// Whitespace-delimited tokens with their character offsets.
inline std::vector<TokenSpan> tokenize_with_offsets(std::string_view text) {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        if (i >= text.size()) break;
        const std::size_t begin = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        out.push_back({std::string(text.substr(begin, i - begin)), begin, i});
    }
    return out;
}

inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
    return out;
}

inline std::size_t word_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (const char c : text) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

inline std::string join_words(const std::vector<std::string>& words,
                              std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) out.push_back(' ');
        out += words[i];
    }
    return out;
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
    return to_lower_ascii(haystack).find(to_lower_ascii(needle)) != std::string::npos;
}

inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (const char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

// Maps the common Unicode quote/apostrophe/ellipsis glyphs onto their ASCII
// counterparts, leaving all other bytes untouched.
inline std::string asciify_quotes(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
            static_cast<unsigned char>(s[i + 1]) == 0x80) {
            const unsigned char b = static_cast<unsigned char>(s[i + 2]);
            if (b == 0x98 || b == 0x99) {  // left/right single quote
                out.push_back('\'');
                i += 3;
                continue;
            }
            if (b == 0x9C || b == 0x9D) {  // left/right double quote
                out.push_back('"');
                i += 3;
                continue;
            }
            if (b == 0xA6) {  // horizontal ellipsis
                out += "...";
                i += 3;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

inline std::string strip_edge_ellipses(std::string_view s) {
    std::string t = trim(s);
    while (t.size() >= 3 && t.compare(0, 3, "...") == 0) t = trim(t.substr(3));
    while (t.size() >= 3 && t.compare(t.size() - 3, 3, "...") == 0)
        t = trim(t.substr(0, t.size() - 3));
    return t;
}

// Parses a decimal number out of a token, ignoring surrounding punctuation
// ("7.2," -> 7.2, "(6%)" -> 6). Tokens without a digit yield nullopt.
inline std::optional<double> extract_number(std::string_view token) {
    std::size_t b = 0, e = token.size();
    auto numeric = [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+';
    };
    while (b < e && !numeric(token[b])) ++b;
    while (e > b && !numeric(token[e - 1])) --e;
    if (b >= e) return std::nullopt;
    const std::string core(token.substr(b, e - b));
    bool has_digit = false;
    for (const char c : core)
        if (std::isdigit(static_cast<unsigned char>(c))) has_digit = true;
    if (!has_digit) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(core, &used);
        if (used != core.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

}  // namespace sdohkit
