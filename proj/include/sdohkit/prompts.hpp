#pragma once

#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sdohkit/error.hpp"

namespace sdohkit::llm {

// Separator between retrieved excerpts when they are bound into prompt
// context slots.
inline constexpr std::string_view kExcerptSeparator = "\n---\n";

enum class PromptName {
    ThemeExtraction,
    FactorSummary,
    SubtopicRating,
    A1cRedaction,
    A1cPrediction,
};

inline const char* prompt_name_str(PromptName n) {
    switch (n) {
        case PromptName::ThemeExtraction: return "theme_extraction";
        case PromptName::FactorSummary: return "factor_summary";
        case PromptName::SubtopicRating: return "subtopic_rating";
        case PromptName::A1cRedaction: return "a1c_redaction";
        case PromptName::A1cPrediction: return "a1c_prediction";
    }
    return "?";
}

struct PromptTemplate {
    PromptName name;
    std::string body;  // "{placeholder}" slots; "{{" and "}}" are literal braces
};

// Substitutes every {placeholder} from bindings. "{{"/"}}" escape literal
// braces. A placeholder with no binding is an error; an empty-string binding
// is a valid (blank) substitution.
inline std::string render_prompt(const PromptTemplate& tmpl,
                                 const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(tmpl.body.size());
    const std::string& body = tmpl.body;
    std::size_t i = 0;
    while (i < body.size()) {
        const char c = body[i];
        if (c == '{') {
            if (i + 1 < body.size() && body[i + 1] == '{') {
                out.push_back('{');
                i += 2;
                continue;
            }
            const std::size_t close = body.find('}', i + 1);
            if (close == std::string::npos)
                throw Error(ErrorKind::Template, "unterminated placeholder");
            const std::string key = body.substr(i + 1, close - i - 1);
            const auto it = bindings.find(key);
            if (it == bindings.end()) throw Error(ErrorKind::Template, key);
            out += it->second;
            i = close + 1;
        } else if (c == '}') {
            if (i + 1 < body.size() && body[i + 1] == '}') {
                out.push_back('}');
                i += 2;
                continue;
            }
            out.push_back('}');
            ++i;
        } else {
            out.push_back(c);
            ++i;
        }
    }
    return out;
}

// Scans rendered output for leftover {word} slots; used by the render
// round-trip property check.
inline std::vector<std::string> find_unfilled_placeholders(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            const std::size_t close = text.find('}', i + 1);
            if (close != std::string::npos) {
                bool word = close > i + 1;
                for (std::size_t j = i + 1; j < close && word; ++j)
                    if (!(std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
                        word = false;
                if (word) out.emplace_back(text.substr(i + 1, close - i - 1));
            }
        }
        ++i;
    }
    return out;
}

namespace prompt_bodies {

inline constexpr std::string_view kThemeExtraction =
    R"(You are an AI assistant specializing in qualitative analysis. Read the following interview transcript with a diabetes patient and identify the main themes and sub-themes discussed. For each theme, provide:
- A concise code (theme) that represents the key concept.
- Up to three relevant direct quotes from the transcript that illustrate the theme.
Provide the output in valid JSON format as a list of objects, where each object has the following structure:
{{
 "code": "Code representing the theme",
 "quotes": ["Quote 1", "Quote 2", "Quote 3"]
}}
Do not include any additional text or explanations outside the JSON.
Interview Transcript:
{interview_text}
Extracted Codes and Quotes:)";

inline constexpr std::string_view kFactorSummary =
    R"(You are an expert analyst extracting key information from an interview with a diabetes patient about their life story. The patients are all older than 50. **Task**: Extract and list only the key pieces of information specifically about "{topic}" from the following interview excerpts.
**Instructions**:
- Provide the information as a bullet-point list.
- Start each bullet point with a standardized format: "- [Keyword][Time Frame]: Detail"
- Use only the following predefined keywords for "{topic}": {keywords}
- Pay close attention to the time frames mentioned, and accurately reflect whether the information is about the past, present, or future.
- Indicate the time frame in each bullet point using [Past], [Present], or [Future].
- Focus exclusively on "{topic}" and exclude any unrelated details.
- If there is no information about "{topic}" in the interview excerpts, respond exactly with "No information available."
- Do not include introductions, explanations, summaries, or conclusions.
- Limit the list to a maximum of 5 bullet points.
**Example**:
- [Exercise][Past]: Used to play basketball in college.
- [Diet][Present]: Currently avoids sweets and limits rice intake.
- [Work Routine][Future]: Plans to retire next year.
**Interview Excerpts**: {context}
**Answer**:)";

inline constexpr std::string_view kSubtopicRating =
    R"(Subtopic: {subtopic_label}
Below is the rating scale for this subtopic:{scale_text}
Here is the relevant content from the interview:
{subtopic_text}
TASK:
1) Decide on an integer rating for the subtopic based on the scale above from 1..5, or -1 if not present.
2) Provide a short justification or rationale for why you chose that rating.
3) Then follow these instructions for summarizing and quoting material from the interview:
Provide a concise and specific answer in 3-5 bullet points. Each bullet point must include:
1. A clear summary of the insight or opinion in a single sentence.
2. A full supporting quote from the interviews, written verbatim, with no omissions or ellipses.
Ensure the quote is at least 2-3 sentences long and provides enough context for the reader to understand its meaning fully.
3. If contradictory opinions exist, provide them in a separate bullet point with a full quote.
4. Ensure the entire output adheres to the above criteria.
Formatting: <your summary>
Quote: <verbatim quote>
Return your answer in the following structure:
Rating: <numeric>
Justification: <1-2 sentence reason>
Summary And Quotes: <Bullet points following instructions>)";

inline constexpr std::string_view kA1cRedaction =
    R"(Please remove all explicit mentions of A1C levels from the following interview text. Replace any specific A1C numbers or ranges with '[REMOVED]' while preserving the rest of the context and meaning of the sentences. Keep all other diabetes-related information intact.
Interview Content:
{interview_text}
Please return only the modified text without any additional commentary.)";

inline constexpr std::string_view kA1cPrediction =
    R"(Based on the following interview content, please:
1. Predict the person's A1C level to .1 accuracy and only use one number, not a range.
2. Do not use mentions of A1C in the text to determine the level of diabetes control.
3. Provide a detailed justification with relevant quotes from the interview
Interview Content:
{interview_text}
Please format your response exactly as follows:
A1C Level: [A1C level prediction]
Justification: [Your detailed analysis]
Supporting Quotes: [At least 2-3 relevant quotes from the interview])";

}  // namespace prompt_bodies

inline const PromptTemplate& prompt_template(PromptName name) {
    static const std::map<PromptName, PromptTemplate> registry = {
        {PromptName::ThemeExtraction,
         {PromptName::ThemeExtraction, std::string(prompt_bodies::kThemeExtraction)}},
        {PromptName::FactorSummary,
         {PromptName::FactorSummary, std::string(prompt_bodies::kFactorSummary)}},
        {PromptName::SubtopicRating,
         {PromptName::SubtopicRating, std::string(prompt_bodies::kSubtopicRating)}},
        {PromptName::A1cRedaction,
         {PromptName::A1cRedaction, std::string(prompt_bodies::kA1cRedaction)}},
        {PromptName::A1cPrediction,
         {PromptName::A1cPrediction, std::string(prompt_bodies::kA1cPrediction)}},
    };
    return registry.at(name);
}

}  // namespace sdohkit::llm
