#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdohkit/backend.hpp"
#include "sdohkit/corpus.hpp"
#include "sdohkit/parallel.hpp"
#include "sdohkit/parsers.hpp"
#include "sdohkit/prompts.hpp"
#include "sdohkit/quotes.hpp"
#include "sdohkit/taxonomy.hpp"

namespace sdohkit::rag {

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

struct Chunk {
    std::string patient_id;
    std::size_t chunk_index = 0;
    std::string text;
    std::size_t begin_word = 0;
    std::size_t end_word = 0;  // exclusive
};

// Sliding word windows of `chunk_words`, stepping chunk_words - overlap_words;
// the final partial window is kept.
inline std::vector<Chunk> chunk_transcript(const corpus::Transcript& transcript,
                                           std::size_t chunk_words,
                                           std::size_t overlap_words) {
    if (!(chunk_words > overlap_words))
        throw Error(ErrorKind::Input, "chunk_words must exceed overlap_words");
    const auto words = split_words(transcript.text);
    std::vector<Chunk> out;
    if (words.empty()) return out;

    const std::size_t step = chunk_words - overlap_words;
    std::size_t start = 0;
    std::size_t index = 0;
    while (true) {
        const std::size_t end = std::min(start + chunk_words, words.size());
        out.push_back({transcript.patient_id, index++, join_words(words, start, end), start, end});
        if (end >= words.size()) break;
        start += step;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rubric
// ---------------------------------------------------------------------------

struct Rubric {
    std::string topic;
    std::string subtopic;
    std::string scale_text;
    std::vector<std::string> keywords;

    std::string label() const { return topic + " - " + subtopic; }
};

// The 15 (topic, subtopic) rubrics with their full scale text and default
// retrieval keywords.
inline std::vector<Rubric> default_rubrics() {
    std::vector<Rubric> out;
    for (std::size_t s = 0; s < kSubtopicCount; ++s) {
        Rubric r;
        r.topic = std::string(subtopics()[s].topic);
        r.subtopic = std::string(subtopics()[s].subtopic);
        r.scale_text = scale_text(s);
        for (const auto kw : subtopics()[s].keywords) r.keywords.emplace_back(kw);
        out.push_back(std::move(r));
    }
    return out;
}

// Prompt 2 keyword set for a topic: its three subtopic names.
inline std::string topic_keywords(std::string_view topic) {
    std::string out;
    for (const std::size_t s : subtopic_indices_for_topic(topic)) {
        if (!out.empty()) out += ", ";
        out += std::string(subtopics()[s].subtopic);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Retrieval index
// ---------------------------------------------------------------------------

struct RetrievalIndex {
    std::vector<Chunk> chunks;
    std::vector<llm::EmbeddingVector> vectors;

    std::size_t size() const { return chunks.size(); }
};

inline RetrievalIndex build_index(std::vector<Chunk> chunks, llm::Backend& backend) {
    if (chunks.empty()) throw Error(ErrorKind::EmptyInput, "no chunks to index");
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) texts.push_back(c.text);
    RetrievalIndex index;
    index.vectors = backend.embed(texts);
    index.chunks = std::move(chunks);
    return index;
}

struct ScoredChunk {
    std::size_t chunk_pos = 0;  // position within the index
    double score = 0.0;
};

// Top-k by cosine similarity (vectors are unit-norm, so dot product); score
// ties resolve by ascending chunk_index.
inline std::vector<ScoredChunk> retrieve(const RetrievalIndex& index, llm::Backend& backend,
                                         const std::string& query_text, std::size_t k) {
    if (k < 1) throw Error(ErrorKind::Input, "k must be >= 1");
    if (index.size() == 0) return {};
    const auto query = backend.embed({query_text}).front();
    std::vector<ScoredChunk> scored;
    scored.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i)
        scored.push_back({i, llm::cosine_of_unit(query, index.vectors[i])});
    std::sort(scored.begin(), scored.end(), [&index](const ScoredChunk& a, const ScoredChunk& b) {
        if (a.score != b.score) return a.score > b.score;
        return index.chunks[a.chunk_pos].chunk_index < index.chunks[b.chunk_pos].chunk_index;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

inline std::string join_excerpts(const RetrievalIndex& index,
                                 const std::vector<ScoredChunk>& hits) {
    std::string out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i > 0) out += std::string(llm::kExcerptSeparator);
        out += index.chunks[hits[i].chunk_pos].text;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Factor summaries (Prompt 2) and subtopic ratings (Prompt 3)
// ---------------------------------------------------------------------------

struct FactorSummary {
    std::string patient_id;
    std::string factor;
    bool none = false;
    bool failed = false;
    std::string error_note;
    std::vector<llm::FactorBullet> bullets;
};

struct RatingRecord {
    std::string patient_id;
    std::string topic;
    std::string subtopic;
    int rating = -1;  // in {-1, 1..5}; -1 is the "not mentioned" sentinel
    bool failed = false;
    std::string error_note;
    std::string justification;
    std::vector<llm::SummaryQuote> summary_quotes;
    std::vector<llm::QuoteCheck> quote_checks;

    bool present() const { return !failed && rating != -1; }
    std::size_t verified_count() const {
        std::size_t n = 0;
        for (const auto& q : quote_checks)
            if (q.verified) ++n;
        return n;
    }
};

struct ExtractionConfig {
    std::size_t chunk_words = 200;
    std::size_t overlap_words = 50;
    std::size_t top_k = 6;
    int parallel = 1;
};

inline FactorSummary extract_factor_summary(const corpus::PatientRecord& patient,
                                            const std::string& topic,
                                            const std::string& keywords,
                                            const RetrievalIndex& index, llm::Backend& backend,
                                            std::size_t top_k) {
    FactorSummary summary;
    summary.patient_id = patient.patient_id;
    summary.factor = topic;
    try {
        const auto hits = retrieve(index, backend, topic + ": " + keywords, top_k);
        const auto prompt = llm::render_prompt(
            llm::prompt_template(llm::PromptName::FactorSummary),
            {{"topic", topic}, {"keywords", keywords}, {"context", join_excerpts(index, hits)}});
        const auto parsed = llm::parse_factor_bullets(backend.chat(prompt).response_text);
        summary.none = parsed.none;
        summary.bullets = parsed.bullets;
        if (!parsed.none && parsed.bullets.empty()) summary.none = true;
    } catch (const Error& e) {
        summary.failed = true;
        summary.error_note = e.what();
    }
    return summary;
}

inline RatingRecord rate_subtopic(const corpus::PatientRecord& patient, const Rubric& rubric,
                                  const RetrievalIndex& index, llm::Backend& backend,
                                  std::size_t top_k) {
    RatingRecord record;
    record.patient_id = patient.patient_id;
    record.topic = rubric.topic;
    record.subtopic = rubric.subtopic;
    try {
        std::string query = rubric.label();
        for (const auto& kw : rubric.keywords) query += " " + kw;
        const auto hits = retrieve(index, backend, query, top_k);
        const auto prompt =
            llm::render_prompt(llm::prompt_template(llm::PromptName::SubtopicRating),
                               {{"subtopic_label", rubric.label()},
                                {"scale_text", rubric.scale_text},
                                {"subtopic_text", join_excerpts(index, hits)}});
        const auto parsed = llm::parse_rating_block(backend.chat(prompt).response_text);
        record.rating = parsed.rating;
        record.justification = parsed.justification;
        record.summary_quotes = parsed.summary_quotes;
        std::vector<std::string> quotes;
        for (const auto& sq : parsed.summary_quotes) quotes.push_back(sq.quote);
        record.quote_checks = llm::verify_quotes(quotes, patient.transcript.text);
    } catch (const Error& e) {
        // degrade to a missing rating; population-scale analysis tolerates gaps
        record.failed = true;
        record.rating = -1;
        record.error_note = e.what();
    }
    return record;
}

struct ExtractionResult {
    std::vector<FactorSummary> summaries;  // patients x topics
    std::vector<RatingRecord> ratings;     // patients x subtopics
};

// Full per-corpus extraction: per patient, build one retrieval index, then
// run Prompt 2 per topic and Prompt 3 per subtopic. Patients are independent
// tasks; results land in preallocated slots so any thread count produces
// identical output.
inline ExtractionResult run_extraction(const std::vector<corpus::PatientRecord>& records,
                                       const std::vector<Rubric>& rubrics,
                                       llm::Backend& backend, const ExtractionConfig& config) {
    if (records.empty()) throw Error(ErrorKind::EmptyInput, "no patients");
    const auto topics = topic_names();
    ExtractionResult result;
    result.summaries.resize(records.size() * topics.size());
    result.ratings.resize(records.size() * rubrics.size());

    parallel_for(records.size(), config.parallel, [&](std::size_t p) {
        const auto& patient = records[p];
        const auto index = build_index(
            chunk_transcript(patient.transcript, config.chunk_words, config.overlap_words),
            backend);
        for (std::size_t t = 0; t < topics.size(); ++t) {
            result.summaries[p * topics.size() + t] = extract_factor_summary(
                patient, topics[t], topic_keywords(topics[t]), index, backend, config.top_k);
        }
        for (std::size_t s = 0; s < rubrics.size(); ++s) {
            result.ratings[p * rubrics.size() + s] =
                rate_subtopic(patient, rubrics[s], index, backend, config.top_k);
        }
    });
    return result;
}

// ---------------------------------------------------------------------------
// Coverage statistics
// ---------------------------------------------------------------------------

struct SubtopicCoverage {
    std::string topic;
    std::string subtopic;
    std::size_t present = 0;
    std::size_t total = 0;

    double pct() const {
        return total == 0 ? 0.0 : 100.0 * static_cast<double>(present) / static_cast<double>(total);
    }
};

struct CoverageStats {
    std::vector<SubtopicCoverage> per_subtopic;
    std::size_t missing_cells = 0;
    std::size_t total_cells = 0;

    double missing_fraction() const {
        return total_cells == 0 ? 0.0
                                : static_cast<double>(missing_cells) /
                                      static_cast<double>(total_cells);
    }
};

// Presence share per subtopic: ratings != -1 and not failed.
inline CoverageStats coverage_stats(const std::vector<RatingRecord>& ratings) {
    if (ratings.empty()) throw Error(ErrorKind::EmptyInput, "no ratings");
    std::map<std::pair<std::string, std::string>, SubtopicCoverage> acc;
    CoverageStats stats;
    for (const auto& r : ratings) {
        auto& cell = acc[{r.topic, r.subtopic}];
        cell.topic = r.topic;
        cell.subtopic = r.subtopic;
        ++cell.total;
        ++stats.total_cells;
        if (r.present())
            ++cell.present;
        else
            ++stats.missing_cells;
    }
    // keep taxonomy order where possible, then any extras
    for (std::size_t s = 0; s < kSubtopicCount; ++s) {
        const auto key = std::make_pair(std::string(subtopics()[s].topic),
                                        std::string(subtopics()[s].subtopic));
        const auto it = acc.find(key);
        if (it != acc.end()) {
            stats.per_subtopic.push_back(it->second);
            acc.erase(it);
        }
    }
    for (const auto& [_, cell] : acc) stats.per_subtopic.push_back(cell);
    return stats;
}

// ---------------------------------------------------------------------------
// Artifact renderers
// ---------------------------------------------------------------------------

inline std::string ratings_grid_csv(const std::vector<RatingRecord>& ratings) {
    std::string out = "patient_id,topic,subtopic,rating,quote_verified_count,quote_total\n";
    for (const auto& r : ratings)
        out += csv_row({r.patient_id, r.topic, r.subtopic, std::to_string(r.rating),
                        std::to_string(r.verified_count()), std::to_string(r.quote_checks.size())});
    return out;
}

inline std::string ratings_jsonl(const std::vector<RatingRecord>& ratings) {
    std::string out;
    for (const auto& r : ratings) {
        nlohmann::json quotes = nlohmann::json::array();
        for (std::size_t i = 0; i < r.summary_quotes.size(); ++i) {
            nlohmann::json q = {{"summary", r.summary_quotes[i].summary},
                                {"quote", r.summary_quotes[i].quote}};
            if (i < r.quote_checks.size()) q["verified"] = r.quote_checks[i].verified;
            quotes.push_back(q);
        }
        const nlohmann::json j = {{"patient_id", r.patient_id},
                                  {"topic", r.topic},
                                  {"subtopic", r.subtopic},
                                  {"rating", r.rating},
                                  {"failed", r.failed},
                                  {"error_note", r.error_note},
                                  {"justification", r.justification},
                                  {"summary_quotes", quotes}};
        out += j.dump() + "\n";
    }
    return out;
}

inline std::string coverage_csv(const CoverageStats& stats) {
    std::string out = "topic,subtopic,present,total,pct\n";
    for (const auto& c : stats.per_subtopic)
        out += csv_row({c.topic, c.subtopic, std::to_string(c.present), std::to_string(c.total),
                        format_fixed(c.pct(), 1)});
    return out;
}

struct ParsedRatingsGrid {
    std::vector<RatingRecord> ratings;
};

// Reads back the ratings grid CSV (quote texts live in the JSON-lines file).
inline std::vector<RatingRecord> parse_ratings_grid_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "patient_id")
        throw Error(ErrorKind::Input, "unexpected ratings grid header");
    std::vector<RatingRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 4)
            throw Error(ErrorKind::Input, "short ratings grid row " + std::to_string(i));
        RatingRecord r;
        r.patient_id = rows[i][0];
        r.topic = rows[i][1];
        r.subtopic = rows[i][2];
        r.rating = std::stoi(rows[i][3]);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace sdohkit::rag
