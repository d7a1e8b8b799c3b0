#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sdohkit/error.hpp"
#include "sdohkit/text.hpp"

// Parsers for the five prompt responses. Lenient about surrounding prose and
// code fences (models deviate); strict about the typed fields (rating range,
// single A1C number). Every parser is total: any input yields a parsed value,
// a structured parse error, or an explicit non-response.

namespace sdohkit::llm {

namespace parse_detail {

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::string cur;
    for (const char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    lines.push_back(cur);
    return lines;
}

inline std::string drop_code_fences(std::string_view text) {
    std::string out;
    for (const auto& line : split_lines(text)) {
        if (trim(line).rfind("```", 0) == 0) continue;
        out += line;
        out.push_back('\n');
    }
    return out;
}

// Case-insensitive search for a marker, returning the offset just past it.
inline std::optional<std::size_t> find_marker_end(std::string_view text,
                                                  std::string_view marker) {
    const std::string low = to_lower_ascii(text);
    const std::string needle = to_lower_ascii(marker);
    const auto pos = low.find(needle);
    if (pos == std::string::npos) return std::nullopt;
    return pos + needle.size();
}

inline std::string rest_of_line(std::string_view text, std::size_t from) {
    const auto eol = text.find('\n', from);
    return std::string(text.substr(from, eol == std::string_view::npos ? eol : eol - from));
}

// Number parse that rejects digits embedded in words ("B12", "[A1C"): after
// trimming edge punctuation the whole token must be numeric.
inline std::optional<double> strict_number(std::string_view token) {
    std::size_t b = 0, e = token.size();
    auto is_edge_punct = [](char c) {
        return !std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '+';
    };
    while (b < e && is_edge_punct(token[b])) ++b;
    while (e > b && is_edge_punct(token[e - 1])) --e;
    // allow a trailing % or period
    while (e > b && (token[e - 1] == '%' || token[e - 1] == '.')) --e;
    if (b >= e) return std::nullopt;
    const std::string core(token.substr(b, e - b));
    bool any_digit = false;
    for (const char c : core) {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            any_digit = true;
        } else if (c != '.' && c != '-' && c != '+') {
            return std::nullopt;
        }
    }
    if (!any_digit) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(core, &used);
        if (used != core.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

// Strips one layer of surrounding quotation glyphs (straight or curly).
inline std::string strip_outer_quotes(std::string_view s) {
    std::string t = trim(s);
    auto starts = [&t](std::string_view p) { return t.rfind(std::string(p), 0) == 0; };
    auto ends = [&t](std::string_view p) {
        return t.size() >= p.size() && t.compare(t.size() - p.size(), p.size(), p) == 0;
    };
    bool stripped_front = false, stripped_back = false;
    for (const std::string_view q : {std::string_view("\""), std::string_view("“"),
                                     std::string_view("”")}) {
        if (!stripped_front && starts(q)) {
            t = t.substr(q.size());
            stripped_front = true;
        }
    }
    for (const std::string_view q : {std::string_view("\""), std::string_view("“"),
                                     std::string_view("”")}) {
        if (!stripped_back && ends(q)) {
            t = t.substr(0, t.size() - q.size());
            stripped_back = true;
        }
    }
    return trim(t);
}

}  // namespace parse_detail

// ---------------------------------------------------------------------------
// Prompt 1: theme codes
// ---------------------------------------------------------------------------

struct ThemeCode {
    std::string code;
    std::vector<std::string> quotes;  // at most 3
};

struct ThemeParse {
    std::vector<ThemeCode> codes;
    std::vector<std::string> skipped;  // per-item schema violations
};

// Extracts the first well-formed JSON array of objects, tolerating code
// fences and surrounding prose. Objects missing a non-empty "code" are
// skipped and reported.
inline ThemeParse parse_theme_json(std::string_view response_text) {
    const std::string text(response_text);
    for (std::size_t start = text.find('['); start != std::string::npos;
         start = text.find('[', start + 1)) {
        // balanced-bracket scan, string-aware
        int depth = 0;
        bool in_string = false;
        std::size_t end = std::string::npos;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (c == '\\')
                    ++i;
                else if (c == '"')
                    in_string = false;
            } else if (c == '"') {
                in_string = true;
            } else if (c == '[') {
                ++depth;
            } else if (c == ']') {
                if (--depth == 0) {
                    end = i;
                    break;
                }
            }
        }
        if (end == std::string::npos) continue;

        nlohmann::json j =
            nlohmann::json::parse(text.substr(start, end - start + 1), nullptr, false);
        if (j.is_discarded() || !j.is_array()) continue;
        bool all_objects = true;
        for (const auto& item : j)
            if (!item.is_object()) all_objects = false;
        if (!all_objects) continue;

        ThemeParse out;
        for (const auto& item : j) {
            if (!item.contains("code") || !item["code"].is_string() ||
                item["code"].get<std::string>().empty()) {
                out.skipped.push_back("item missing \"code\": " + item.dump());
                continue;
            }
            ThemeCode tc;
            tc.code = item["code"].get<std::string>();
            if (item.contains("quotes") && item["quotes"].is_array()) {
                for (const auto& q : item["quotes"]) {
                    if (!q.is_string()) {
                        out.skipped.push_back("non-string quote under \"" + tc.code + "\"");
                        continue;
                    }
                    if (tc.quotes.size() == 3) {
                        out.skipped.push_back("extra quote under \"" + tc.code + "\" dropped");
                        continue;
                    }
                    tc.quotes.push_back(q.get<std::string>());
                }
            }
            out.codes.push_back(std::move(tc));
        }
        return out;
    }
    throw Error(ErrorKind::Parse, "no JSON array of theme objects found");
}

// ---------------------------------------------------------------------------
// Prompt 2: factor summary bullets
// ---------------------------------------------------------------------------

struct FactorBullet {
    std::string keyword;
    std::string timeframe;  // "Past" | "Present" | "Future"
    std::string detail;
};

struct FactorParse {
    bool none = false;  // explicit "No information available."
    std::vector<FactorBullet> bullets;
    std::vector<std::string> skipped;
};

inline FactorParse parse_factor_bullets(std::string_view response_text) {
    const std::string text = parse_detail::drop_code_fences(response_text);
    FactorParse out;
    if (trim(text) == "No information available.") {
        out.none = true;
        return out;
    }

    for (const auto& raw : parse_detail::split_lines(text)) {
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line[0] != '-') {
            out.skipped.push_back(line);
            continue;
        }
        // "- [Keyword][Time Frame]: Detail"
        const auto k_open = line.find('[');
        const auto k_close = line.find(']', k_open == std::string::npos ? 0 : k_open);
        const auto t_open = k_close == std::string::npos ? std::string::npos
                                                         : line.find('[', k_close);
        const auto t_close = t_open == std::string::npos ? std::string::npos
                                                         : line.find(']', t_open);
        const auto colon = t_close == std::string::npos ? std::string::npos
                                                        : line.find(':', t_close);
        if (colon == std::string::npos) {
            out.skipped.push_back(line);
            continue;
        }
        FactorBullet b;
        b.keyword = trim(line.substr(k_open + 1, k_close - k_open - 1));
        std::string tf = to_lower_ascii(trim(line.substr(t_open + 1, t_close - t_open - 1)));
        if (tf == "past")
            b.timeframe = "Past";
        else if (tf == "present")
            b.timeframe = "Present";
        else if (tf == "future")
            b.timeframe = "Future";
        else {
            out.skipped.push_back(line);
            continue;
        }
        b.detail = trim(line.substr(colon + 1));
        if (b.keyword.empty()) {
            out.skipped.push_back(line);
            continue;
        }
        if (out.bullets.size() >= 5) {
            out.skipped.push_back("over bullet cap: " + line);
            continue;
        }
        out.bullets.push_back(std::move(b));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompt 3: rating block
// ---------------------------------------------------------------------------

struct SummaryQuote {
    std::string summary;
    std::string quote;
};

struct RatingParse {
    int rating = -1;  // in {-1, 1..5}
    std::string justification;
    std::vector<SummaryQuote> summary_quotes;
};

inline RatingParse parse_rating_block(std::string_view response_text) {
    const std::string text = parse_detail::drop_code_fences(response_text);

    const auto rating_at = parse_detail::find_marker_end(text, "Rating:");
    if (!rating_at) throw Error(ErrorKind::Parse, "missing \"Rating:\" line");
    const std::string rating_str = trim(parse_detail::rest_of_line(text, *rating_at));
    const auto rating_val = parse_detail::strict_number(rating_str.empty()
                                                            ? rating_str
                                                            : split_words(rating_str)[0]);
    if (!rating_val) throw Error(ErrorKind::Parse, "no numeric rating after \"Rating:\"");
    const double rv = *rating_val;
    if (rv != std::floor(rv) || !(rv == -1.0 || (rv >= 1.0 && rv <= 5.0)))
        throw Error(ErrorKind::Parse, "rating out of range: " + rating_str);

    RatingParse out;
    out.rating = static_cast<int>(rv);

    const auto lines = parse_detail::split_lines(text);
    // locate the Justification line, then capture to "Summary And Quotes:" or
    // the first bullet (the block header is sometimes dropped by models)
    std::size_t i = 0;
    std::optional<std::size_t> just_line;
    for (; i < lines.size(); ++i) {
        if (parse_detail::find_marker_end(lines[i], "Justification:")) {
            just_line = i;
            break;
        }
    }
    std::size_t body_start = lines.size();
    if (just_line) {
        std::string just =
            trim(lines[*just_line].substr(*parse_detail::find_marker_end(lines[*just_line],
                                                                         "Justification:")));
        std::size_t j = *just_line + 1;
        for (; j < lines.size(); ++j) {
            const std::string t = trim(lines[j]);
            if (t.empty()) continue;
            if (parse_detail::find_marker_end(t, "Summary And Quotes:") ||
                t.rfind("- ", 0) == 0 || t == "-")
                break;
            just += (just.empty() ? "" : " ") + t;
        }
        out.justification = just;
        body_start = j;
    }

    // bullets paired with Quote:/[Quote]: lines
    std::optional<SummaryQuote> current;
    auto flush = [&] {
        if (current) {
            out.summary_quotes.push_back(std::move(*current));
            current.reset();
        }
    };
    for (std::size_t j = body_start; j < lines.size(); ++j) {
        std::string t = trim(lines[j]);
        if (t.empty()) continue;
        if (const auto after = parse_detail::find_marker_end(t, "Summary And Quotes:")) {
            t = trim(t.substr(*after));
            if (t.empty()) continue;
        }
        const bool is_bullet = t.rfind("- ", 0) == 0;
        std::optional<std::size_t> quote_at;
        for (const char* marker : {"[Quote]:", "Quote:"}) {
            if (const auto at = parse_detail::find_marker_end(t, marker)) {
                // only at line start (possibly after a bullet dash)
                std::string head = to_lower_ascii(t.substr(0, *at));
                if (head.rfind("- ", 0) == 0) head = head.substr(2);
                if (head == to_lower_ascii(marker)) quote_at = *at;
                break;
            }
        }
        if (quote_at) {
            std::string q = trim(t.substr(*quote_at));
            // continuation lines until a blank, bullet, or next marker
            while (j + 1 < lines.size()) {
                const std::string next = trim(lines[j + 1]);
                if (next.empty() || next.rfind("- ", 0) == 0 ||
                    parse_detail::find_marker_end(next, "Quote:"))
                    break;
                q += " " + next;
                ++j;
            }
            if (!current) current = SummaryQuote{};
            current->quote = parse_detail::strip_outer_quotes(q);
            flush();
        } else if (is_bullet) {
            flush();
            current = SummaryQuote{trim(t.substr(2)), ""};
        }
    }
    flush();
    return out;
}

// ---------------------------------------------------------------------------
// Prompt 5: A1C prediction
// ---------------------------------------------------------------------------

struct PredictedA1C {
    std::optional<double> value;  // absent = non-response; one-decimal resolution
    std::string justification;
    std::vector<std::string> quotes;
};

// Never a hard error: anything without exactly one parseable number after
// "A1C Level:" is a non-response. Ranges are non-responses (the prompt
// forbids them; inventing a midpoint would fabricate data).
inline PredictedA1C parse_a1c_prediction(std::string_view response_text) {
    const std::string text = parse_detail::drop_code_fences(response_text);
    PredictedA1C out;

    const auto marker = parse_detail::find_marker_end(text, "A1C Level:");
    if (!marker) return out;
    std::string line = parse_detail::rest_of_line(text, *marker);
    auto numbers_in = [](const std::string& s) {
        std::vector<double> nums;
        for (const auto& token : split_words(s))
            if (const auto v = parse_detail::strict_number(token)) nums.push_back(*v);
        return nums;
    };
    std::vector<double> numbers = numbers_in(line);
    if (numbers.empty() && trim(line).empty()) {
        // value occasionally lands on the following line
        const auto eol = text.find('\n', *marker);
        if (eol != std::string::npos) {
            for (const auto& next : parse_detail::split_lines(text.substr(eol + 1))) {
                const std::string t = trim(next);
                if (t.empty()) continue;
                if (!parse_detail::find_marker_end(t, "Justification:") &&
                    !parse_detail::find_marker_end(t, "Supporting Quotes:"))
                    numbers = numbers_in(t);
                break;
            }
        }
    }
    if (numbers.size() == 1) out.value = std::round(numbers[0] * 10.0) / 10.0;

    if (const auto just_at = parse_detail::find_marker_end(text, "Justification:")) {
        const auto quotes_at = to_lower_ascii(text).find("supporting quotes:");
        const std::size_t end = quotes_at == std::string::npos ? text.size() : quotes_at;
        if (end > *just_at) out.justification = trim(text.substr(*just_at, end - *just_at));
    }
    if (const auto quotes_at = parse_detail::find_marker_end(text, "Supporting Quotes:")) {
        for (const auto& raw : parse_detail::split_lines(text.substr(*quotes_at))) {
            std::string t = trim(raw);
            if (t.empty()) continue;
            if (t.rfind("- ", 0) == 0) t = trim(t.substr(2));
            t = parse_detail::strip_outer_quotes(t);
            if (!t.empty()) out.quotes.push_back(t);
        }
    }
    return out;
}

}  // namespace sdohkit::llm
