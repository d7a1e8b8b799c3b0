#pragma once

// Shared fixtures: response texts for the structured-output parsers
// (including the published rating-block example with its four verbatim
// quotes) and prediction sets encoding the published accuracy tables.

#include <array>
#include <string>
#include <vector>

#include "sdohkit/control.hpp"

namespace fixtures {

// ---------------------------------------------------------------------------
// Accuracy-table fixtures. Each model is given by its confusion matrix
// (rows = true level, columns = predicted level) plus non-responses per true
// level. The first model's matrix is uniquely determined by the published
// cells; the others are consistent completions of the published counts.
// ---------------------------------------------------------------------------

struct AccuracyFixture {
    const char* label;
    std::array<std::array<std::size_t, 3>, 3> confusion;
    std::array<std::size_t, 3> non_response;
};

inline std::vector<AccuracyFixture> accuracy_fixtures() {
    return {
        {"gpt-4o", {{{0, 11, 0}, {1, 34, 8}, {6, 0, 5}}}, {0, 0, 0}},
        {"o1", {{{1, 10, 0}, {5, 30, 8}, {3, 4, 4}}}, {0, 0, 0}},
        {"o1-mini", {{{0, 10, 0}, {7, 26, 7}, {0, 6, 5}}}, {1, 3, 0}},
        {"deepseek", {{{0, 11, 0}, {7, 29, 7}, {0, 7, 4}}}, {0, 0, 0}},
    };
}

inline std::vector<sdohkit::control::ControlPrediction> make_predictions(
    const AccuracyFixture& fx) {
    using sdohkit::control::ControlPrediction;
    static constexpr std::array<double, 3> kTrueA1c = {5.5, 6.5, 8.0};
    static constexpr std::array<double, 3> kPredictedA1c = {5.0, 7.0, 9.0};
    std::vector<ControlPrediction> out;
    int counter = 0;
    auto add = [&](std::size_t true_level, std::size_t predicted_level, bool respond) {
        ControlPrediction p;
        p.patient_id = "fx" + std::to_string(++counter);
        p.model_label = fx.label;
        p.true_a1c = kTrueA1c[true_level];
        p.true_level = sdohkit::corpus::categorize_control(p.true_a1c);
        if (respond) {
            p.predicted.value = kPredictedA1c[predicted_level];
            p.predicted_level = sdohkit::corpus::categorize_control(*p.predicted.value);
        }
        out.push_back(std::move(p));
    };
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t pl = 0; pl < 3; ++pl)
            for (std::size_t i = 0; i < fx.confusion[t][pl]; ++i) add(t, pl, true);
        for (std::size_t i = 0; i < fx.non_response[t]; ++i) add(t, 0, false);
    }
    return out;
}

inline const std::string kRatingBlockExample =
    "Rating: 4\n"
    "\n"
    "Justification: The interviewee describes having a strong network of friends with whom "
    "they have consistent and meaningful interactions, indicating a high level of social "
    "support.\n"
    "\n"
    "- The interviewee has a strong connection with long-time friends who provide consistent "
    "social interaction.\n"
    "\n"
    "  [Quote]: \"I can reach out to any of my friends, and we talk on the phone for an hour, "
    "whatever\xE2\x80\x9D\n"
    "\n"
    "- The interviewee values their friendships despite differing political views, indicating "
    "a deep and accepting relationship.\n"
    "\n"
    "  [Quote]: \"I've known her for 46 years. I know exactly what she's going to say. I know "
    "how her feelings are, and you know about this and that, and she's a conservative "
    "Republican, but I love her anyway.\"\n"
    "\n"
    "- The interviewee frequently invites friends to enjoy their garden, showing an active "
    "effort to maintain and share their interests with friends.\n"
    "\n"
    "  [Quote]: \"I always invite my friends to my garden, because I can't go out and work in "
    "it anymore.\"\n"
    "\n"
    "- Despite enjoying solitude, the interviewee emphasizes that they are never lonely due to "
    "their strong social connections and personal interests.\n"
    "\n"
    "  [Quote]: \"I like to be in my silence and and alone. And so people sometimes say to me, "
    "oh, you know, I don't want you to be lonely. It's never lonely. I am alone, but I'm never "
    "lonely, and I have my books, I have my artwork around me.\"\n";

inline const std::vector<std::string> kRatingBlockExampleQuotes = {
    "I can reach out to any of my friends, and we talk on the phone for an hour, whatever",
    "I've known her for 46 years. I know exactly what she's going to say. I know how her "
    "feelings are, and you know about this and that, and she's a conservative Republican, but "
    "I love her anyway.",
    "I always invite my friends to my garden, because I can't go out and work in it anymore.",
    "I like to be in my silence and and alone. And so people sometimes say to me, oh, you "
    "know, I don't want you to be lonely. It's never lonely. I am alone, but I'm never lonely, "
    "and I have my books, I have my artwork around me.",
};

// Parser fixture corpus: every entry must parse without crashing and land on
// the expected outcome.
enum class Expect {
    ThemeCodes,     // payload = expected code count
    ThemeError,
    Bullets,        // payload = expected bullet count
    BulletsNone,
    Rating,         // payload = expected rating
    RatingError,
    A1cValue,       // payload10 = expected value*10
    A1cNonResponse,
};

struct ParserFixture {
    const char* tag;
    Expect expect;
    int payload;
    std::string text;
};

inline std::vector<ParserFixture> parser_corpus() {
    std::vector<ParserFixture> v;

    // --- theme JSON ---
    v.push_back({"theme-wellformed", Expect::ThemeCodes, 1,
                 R"([{"code":"Diet","quotes":["q1"]}])"});
    v.push_back({"theme-fenced", Expect::ThemeCodes, 1,
                 "```json\n[{\"code\":\"Diet\",\"quotes\":[\"q1\"]}]\n```"});
    v.push_back({"theme-prose-wrapped", Expect::ThemeCodes, 1,
                 "Here are the extracted codes:\n[{\"code\":\"X\",\"quotes\":[]}]\nHope that helps!"});
    v.push_back({"theme-object-not-array", Expect::ThemeError, 0, R"({"code":"X"})"});
    v.push_back({"theme-empty-array", Expect::ThemeCodes, 0, "[]"});
    v.push_back({"theme-missing-code", Expect::ThemeCodes, 0, R"([{"quotes":["q"]}])"});
    v.push_back({"theme-quote-overflow", Expect::ThemeCodes, 1,
                 R"([{"code":"A","quotes":["1","2","3","4"]}])"});
    v.push_back({"theme-no-json", Expect::ThemeError, 0, "no structured output at all"});
    v.push_back({"theme-mixed-items", Expect::ThemeCodes, 2,
                 R"([{"code":"A"},{"code":""},{"code":"B","quotes":"x"}])"});
    v.push_back({"theme-truncated-json", Expect::ThemeError, 0,
                 R"([{"code":"A","quotes":["q1)"});

    // --- factor bullets ---
    v.push_back({"bullets-single", Expect::Bullets, 1, "- [Diet][Present]: avoids sweets"});
    v.push_back({"bullets-none", Expect::BulletsNone, 0, "No information available."});
    v.push_back({"bullets-seven", Expect::Bullets, 5,
                 "- [A][Past]: one\n- [B][Present]: two\n- [C][Future]: three\n"
                 "- [D][Past]: four\n- [E][Present]: five\n- [F][Future]: six\n"
                 "- [G][Past]: seven"});
    v.push_back({"bullets-malformed", Expect::Bullets, 0, "- a line without the format"});
    v.push_back({"bullets-with-prose", Expect::Bullets, 2,
                 "Sure, here is what I found:\n- [Income][Past]: worked two jobs\n"
                 "- [Income][Present]: pension covers costs\nThat is everything."});
    v.push_back({"bullets-fenced", Expect::Bullets, 1,
                 "```\n- [Diet][Future]: plans to cut sugar\n```"});
    v.push_back({"bullets-bad-timeframe", Expect::Bullets, 0, "- [Diet][Sometimes]: x"});

    // --- rating block ---
    v.push_back({"rating-figure-example", Expect::Rating, 4, kRatingBlockExample});
    v.push_back({"rating-sentinel", Expect::Rating, -1,
                 "Rating: -1\nJustification: not discussed"});
    v.push_back({"rating-out-of-range", Expect::RatingError, 0, "Rating: 9"});
    v.push_back({"rating-zero", Expect::RatingError, 0, "Rating: 0"});
    v.push_back({"rating-missing-line", Expect::RatingError, 0,
                 "Justification: there is no rating here"});
    v.push_back({"rating-non-integer", Expect::RatingError, 0, "Rating: 3.5"});
    v.push_back({"rating-lowercase-markers", Expect::Rating, 2,
                 "rating: 2\njustification: brief reason"});
    v.push_back({"rating-two-pairs", Expect::Rating, 4,
                 "Rating: 4\nJustification: ok\nSummary And Quotes:\n- point one\n"
                 "Quote: \"q1\"\n- point two\nQuote: \"q2\""});
    v.push_back({"rating-fenced", Expect::Rating, 3,
                 "```\nRating: 3\nJustification: fenced\n```"});
    v.push_back({"rating-words-not-number", Expect::RatingError, 0, "Rating: four"});

    // --- A1C prediction ---
    v.push_back({"a1c-wellformed", Expect::A1cValue, 72,
                 "A1C Level: 7.2\nJustification: steady habits"});
    v.push_back({"a1c-textual-range", Expect::A1cNonResponse, 0,
                 "A1C Level: between 6 and 7"});
    v.push_back({"a1c-empty", Expect::A1cNonResponse, 0, ""});
    v.push_back({"a1c-dash-range", Expect::A1cNonResponse, 0, "A1C Level: 6.5-7.0"});
    v.push_back({"a1c-removed-echo", Expect::A1cNonResponse, 0, "A1C Level: [REMOVED]"});
    v.push_back({"a1c-two-decimals", Expect::A1cValue, 73, "A1C Level: 7.25"});
    v.push_back({"a1c-prose-and-percent", Expect::A1cValue, 81,
                 "The A1C Level: 8.1%\nJustification: j"});
    v.push_back({"a1c-next-line-value", Expect::A1cValue, 70, "A1C Level:\n7.0"});
    v.push_back({"a1c-word-number", Expect::A1cNonResponse, 0, "A1C Level: seven"});
    v.push_back({"a1c-template-echo", Expect::A1cNonResponse, 0,
                 "A1C Level: [A1C level prediction]"});
    v.push_back({"a1c-no-marker", Expect::A1cNonResponse, 0,
                 "I think the patient manages reasonably well."});

    return v;
}

}  // namespace fixtures
