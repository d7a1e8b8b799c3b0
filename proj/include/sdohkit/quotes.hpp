#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdohkit/text.hpp"

namespace sdohkit::llm {

// Quote verification: a quote counts as verified iff, after a small, fixed
// set of normalizations, it occurs as a contiguous substring of the
// normalized transcript. The normalization is deliberately minimal (case,
// whitespace, quote glyphs, edge ellipses) so the check stays falsifiable.

inline std::string normalize_for_quote_match(std::string_view s) {
    return collapse_whitespace(to_lower_ascii(asciify_quotes(s)));
}

struct QuoteCheck {
    std::string quote;
    bool verified = false;
    // offset into the normalized transcript, when verified
    std::optional<std::size_t> match_offset;
};

inline std::vector<QuoteCheck> verify_quotes(const std::vector<std::string>& quotes,
                                             std::string_view transcript_text) {
    const std::string haystack = normalize_for_quote_match(transcript_text);
    std::vector<QuoteCheck> out;
    out.reserve(quotes.size());
    for (const auto& q : quotes) {
        QuoteCheck check;
        check.quote = q;
        const std::string needle = strip_edge_ellipses(normalize_for_quote_match(q));
        if (!needle.empty()) {
            const auto pos = haystack.find(needle);
            if (pos != std::string::npos) {
                check.verified = true;
                check.match_offset = pos;
            }
        }
        out.push_back(std::move(check));
    }
    return out;
}

}  // namespace sdohkit::llm
