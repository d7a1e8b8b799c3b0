#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sdohkit/backend.hpp"
#include "sdohkit/corpus.hpp"
#include "sdohkit/prompts.hpp"
#include "sdohkit/synth.hpp"
#include "sdohkit/taxonomy.hpp"

namespace sdohkit::llm {

// Deterministic stand-in for the hosted models. Two layers:
//   1. fixture responses keyed by prompt sha256 (exact-prompt overrides),
//   2. synthesized responses derived from a synthetic corpus and its
//      ground-truth sidecar, with configurable noise.
// Every decision is keyed off the prompt digest, so responses are pure
// functions of the prompt regardless of call order or thread count.

struct MockNoise {
    double quote_fabrication_rate = 0.0;  // swap a real quote for a fabricated one
    double rating_noise_rate = 0.0;       // perturb the rating by +/-1
    double a1c_noise_sd = 0.4;            // sd of predicted-A1C error
    std::uint64_t seed = 0;
};

struct InjectedQuote {
    std::string patient_id;
    std::string subtopic_label;
    std::string quote;
};

namespace mock_detail {

inline constexpr std::array<std::string_view, 5> kFabricatedQuotes = {
    "I once piloted a zeppelin across the violet tundra while reciting opera.",
    "My pet iguana files my taxes every spring without fail.",
    "We summited the glacier barefoot carrying a grandfather clock.",
    "The lighthouse keeper taught me to juggle flaming pineapples.",
    "I collect meteorite fragments and trade them for accordion lessons.",
};

inline std::optional<std::string> slot_between(std::string_view text, std::string_view begin,
                                               std::string_view end) {
    const auto b = text.find(begin);
    if (b == std::string_view::npos) return std::nullopt;
    const auto content_start = b + begin.size();
    const auto e = text.find(end, content_start);
    if (e == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(content_start, e - content_start));
}

}  // namespace mock_detail

class MockBackend : public Backend {
public:
    MockBackend() = default;

    explicit MockBackend(const synth::SyntheticCorpus& corpus, MockNoise noise = {})
        : noise_(noise) {
        for (std::size_t p = 0; p < corpus.records.size(); ++p)
            add_patient(corpus.records[p].patient_id, corpus.records[p].transcript.text,
                        corpus.levels[p], corpus.records[p].a1c);
    }

    MockBackend(const std::vector<corpus::PatientRecord>& records,
                const std::map<std::string, std::array<int, kSubtopicCount>>& truth,
                MockNoise noise = {})
        : noise_(noise) {
        for (const auto& r : records) {
            const auto it = truth.find(r.patient_id);
            if (it == truth.end())
                throw Error(ErrorKind::Input, "no ground truth for " + r.patient_id);
            add_patient(r.patient_id, r.transcript.text, it->second, r.a1c);
        }
    }

    static std::unique_ptr<MockBackend> from_dir(const fs::path& dir, MockNoise noise = {}) {
        return std::make_unique<MockBackend>(corpus::load_corpus(dir),
                                             synth::load_ground_truth(dir), noise);
    }

    void add_fixture(const std::string& prompt, const std::string& response) {
        fixtures_[sha256_hex(prompt)] = response;
    }
    void add_fixture_digest(const std::string& digest_hex, const std::string& response) {
        fixtures_[digest_hex] = response;
    }

    void set_embedding_dim(std::size_t dim) { embedding_dim_ = dim; }

    std::vector<InjectedQuote> injected_quotes() const {
        std::lock_guard<std::mutex> lock(injected_mu_);
        return injected_;
    }

    std::string model_id() const override { return "mock"; }

protected:
    ChatExchange do_chat(const std::string& prompt) override {
        ChatExchange ex;
        ex.rendered_prompt = prompt;
        ex.model_id = "mock";
        ex.attempt_count = 1;
        ex.latency_ms = 0.0;

        const auto fixture = fixtures_.find(sha256_hex(prompt));
        if (fixture != fixtures_.end()) {
            ex.response_text = fixture->second;
            return ex;
        }

        if (prompt.rfind("You are an AI assistant specializing in qualitative analysis", 0) == 0)
            ex.response_text = themes_response(prompt);
        else if (prompt.rfind("You are an expert analyst", 0) == 0)
            ex.response_text = factor_summary_response(prompt);
        else if (prompt.rfind("Subtopic:", 0) == 0)
            ex.response_text = rating_response(prompt);
        else if (prompt.rfind("Please remove all explicit mentions", 0) == 0)
            ex.response_text = redaction_response(prompt);
        else if (prompt.rfind("Based on the following interview content", 0) == 0)
            ex.response_text = prediction_response(prompt);
        else
            ex.response_text = "MOCK-RESPONSE-" + sha256_hex(prompt).substr(0, 16);
        return ex;
    }

    // Feature hashing over lowercase alphanumeric tokens; identical texts map
    // to identical unit vectors.
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            EmbeddingVector v;
            v.values.assign(embedding_dim_, 0.0);
            v.source_text_hash = sha256_hex(text);
            std::string token;
            auto feed = [&] {
                if (token.empty()) return;
                const std::uint64_t h = fnv1a64(token);
                const double sign = ((h >> 32) & 1u) != 0 ? 1.0 : -1.0;
                v.values[h % embedding_dim_] += sign;
                token.clear();
            };
            for (const char c : text) {
                if (std::isalnum(static_cast<unsigned char>(c)))
                    token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
                else
                    feed();
            }
            feed();
            normalize_embedding(v.values);
            out.push_back(std::move(v));
        }
        return out;
    }

private:
    struct Patient {
        std::string id;
        std::string text;
        std::string collapsed;
        std::array<int, kSubtopicCount> levels{};
        double a1c = 0.0;
    };

    void add_patient(const std::string& id, const std::string& text,
                     const std::array<int, kSubtopicCount>& levels, double a1c) {
        patients_.push_back({id, text, collapse_whitespace(text), levels, a1c});
    }

    Rng prompt_rng(const std::string& prompt) const {
        return Rng(mix64(digest_u64(prompt) ^ noise_.seed));
    }

    // Longest [REMOVED]-free fragment of `text` that identifies a patient by
    // containment in their whitespace-collapsed transcript.
    const Patient* match_fragment(std::string_view text) const {
        std::vector<std::string> fragments;
        std::size_t pos = 0;
        const std::string s(text);
        while (pos <= s.size()) {
            const auto cut = s.find("[REMOVED]", pos);
            fragments.push_back(s.substr(pos, cut == std::string::npos ? cut : cut - pos));
            if (cut == std::string::npos) break;
            pos = cut + 9;
        }
        std::string best;
        for (auto& f : fragments) {
            const std::string c = collapse_whitespace(f);
            if (c.size() > best.size()) best = c;
        }
        if (best.empty()) return nullptr;
        for (const auto& p : patients_)
            if (p.collapsed.find(best) != std::string::npos) return &p;
        return nullptr;
    }

    // Patient whose transcript contains every excerpt fragment.
    const Patient* match_excerpts(std::string_view excerpts) const {
        std::vector<std::string> parts;
        const std::string sep(kExcerptSeparator);
        std::string s(excerpts);
        std::size_t pos = 0;
        while (true) {
            const auto cut = s.find(sep, pos);
            parts.push_back(collapse_whitespace(
                s.substr(pos, cut == std::string::npos ? cut : cut - pos)));
            if (cut == std::string::npos) break;
            pos = cut + sep.size();
        }
        for (const auto& p : patients_) {
            bool all = true;
            for (const auto& part : parts)
                if (!part.empty() && p.collapsed.find(part) == std::string::npos) all = false;
            if (all) return &p;
        }
        return nullptr;
    }

    // First planted sentence for (patient, subtopic) found in the transcript.
    std::optional<std::string> planted_quote(const Patient& p, std::size_t s) const {
        if (p.levels[s] < 1) return std::nullopt;
        for (std::size_t variant = 0; variant < 2; ++variant) {
            const std::string sentence(synth::planted_sentence(s, p.levels[s], variant));
            if (p.collapsed.find(collapse_whitespace(sentence)) != std::string::npos)
                return sentence;
        }
        return std::nullopt;
    }

    std::string themes_response(const std::string& prompt) const {
        const auto slot = mock_detail::slot_between(prompt, "Interview Transcript:\n",
                                                    "\nExtracted Codes and Quotes:");
        const Patient* p = slot ? match_fragment(*slot) : nullptr;
        if (p == nullptr) return "[]";

        nlohmann::json arr = nlohmann::json::array();
        for (std::size_t s = 0; s < kSubtopicCount; ++s) {
            const auto quote = planted_quote(*p, s);
            if (!quote) continue;
            const std::size_t variant =
                mix64(fnv1a64(p->id) ^ (0x9E3779B9ull * (s + 1))) % 3;
            arr.push_back({{"code", std::string(synth::bank::kThemeCodeVariants[s][variant])},
                           {"quotes", nlohmann::json::array({*quote})}});
        }
        return arr.dump(1);
    }

    std::string factor_summary_response(const std::string& prompt) const {
        const auto topic = mock_detail::slot_between(prompt, "specifically about \"", "\"");
        const auto excerpts =
            mock_detail::slot_between(prompt, "**Interview Excerpts**: ", "\n**Answer**:");
        if (!topic || !excerpts) return "No information available.";
        const Patient* p = match_excerpts(*excerpts);
        if (p == nullptr) return "No information available.";

        const std::string collapsed_excerpts = collapse_whitespace(*excerpts);
        std::string out;
        for (const std::size_t s : subtopic_indices_for_topic(*topic)) {
            const auto quote = planted_quote(*p, s);
            if (!quote) continue;
            // only report what the provided excerpts actually contain
            if (collapsed_excerpts.find(collapse_whitespace(*quote)) == std::string::npos)
                continue;
            out += "- [" + std::string(subtopics()[s].subtopic) + "][Present]: " + *quote + "\n";
        }
        if (out.empty()) return "No information available.";
        return out;
    }

    std::string rating_response(const std::string& prompt) const {
        const auto label_line = mock_detail::slot_between(prompt, "Subtopic: ", "\n");
        const auto excerpts = mock_detail::slot_between(
            prompt, "Here is the relevant content from the interview:\n", "\nTASK:");
        if (!label_line || !excerpts) return "Rating: -1\nJustification: No content provided.";

        std::optional<std::size_t> subtopic;
        for (std::size_t s = 0; s < kSubtopicCount; ++s)
            if (feature_name(s) == *label_line || subtopics()[s].subtopic == *label_line)
                subtopic = s;
        const Patient* p = match_excerpts(*excerpts);
        if (!subtopic || p == nullptr)
            return "Rating: -1\nJustification: The subtopic is not mentioned in the interview.";

        const int level = p->levels[*subtopic];
        if (level < 1)
            return "Rating: -1\nJustification: The subtopic is not mentioned in the interview.";

        Rng rng = prompt_rng(prompt);
        int rating = level;
        if (noise_.rating_noise_rate > 0 && rng.bernoulli(noise_.rating_noise_rate)) {
            rating += rng.bernoulli(0.5) ? 1 : -1;
            rating = std::min(5, std::max(1, rating));
        }

        std::string quote = planted_quote(*p, *subtopic).value_or("");
        if (noise_.quote_fabrication_rate > 0 && rng.bernoulli(noise_.quote_fabrication_rate)) {
            quote = std::string(mock_detail::kFabricatedQuotes[rng.index(
                mock_detail::kFabricatedQuotes.size())]);
            std::lock_guard<std::mutex> lock(injected_mu_);
            injected_.push_back({p->id, *label_line, quote});
        }

        std::string out = "Rating: " + std::to_string(rating) + "\n";
        out += "Justification: The interview content supports level " + std::to_string(rating) +
               " on the " + *label_line + " scale.\n";
        out += "Summary And Quotes:\n";
        out += "- The interviewee describes their " + to_lower_ascii(*label_line) +
               " in concrete terms.\n";
        out += "Quote: \"" + quote + "\"\n";
        return out;
    }

    std::string redaction_response(const std::string& prompt) const {
        const auto slot = mock_detail::slot_between(prompt, "Interview Content:\n",
                                                    "\nPlease return only");
        if (!slot) return "";
        std::string text = *slot;
        // replace every residual span, right to left so offsets stay valid
        const auto report = corpus::verify_redaction(text);
        for (auto it = report.residuals.rbegin(); it != report.residuals.rend(); ++it)
            text.replace(it->begin, it->end - it->begin, "[REMOVED]");
        return text;
    }

    std::string prediction_response(const std::string& prompt) const {
        const auto slot = mock_detail::slot_between(prompt, "Interview Content:\n",
                                                    "\nPlease format");
        const Patient* p = slot ? match_fragment(*slot) : nullptr;
        if (p == nullptr) return "I cannot determine the A1C level from this content.";

        Rng rng = prompt_rng(prompt);
        double value = p->a1c + rng.normal(0.0, noise_.a1c_noise_sd);
        value = std::min(std::max(value, 3.5), 14.0);
        value = std::round(value * 10.0) / 10.0;

        std::vector<std::string> quotes;
        for (std::size_t s = 0; s < kSubtopicCount && quotes.size() < 2; ++s)
            if (const auto q = planted_quote(*p, s)) quotes.push_back(*q);

        std::string out = "A1C Level: " + format_fixed(value, 1) + "\n";
        out += "Justification: Lifestyle, management habits, and support described in the "
               "interview suggest this level of control.\n";
        out += "Supporting Quotes:\n";
        for (const auto& q : quotes) out += "- \"" + q + "\"\n";
        return out;
    }

    std::map<std::string, std::string> fixtures_;
    std::vector<Patient> patients_;
    MockNoise noise_;
    std::size_t embedding_dim_ = 256;
    mutable std::mutex injected_mu_;
    mutable std::vector<InjectedQuote> injected_;
};

}  // namespace sdohkit::llm
