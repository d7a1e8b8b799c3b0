#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "sdohkit/mock_backend.hpp"
#include "sdohkit/rag.hpp"
#include "sdohkit/synth.hpp"

using namespace sdohkit;
using namespace sdohkit::rag;

namespace {

corpus::Transcript transcript_of(const std::string& text) {
    return corpus::Transcript::make("t", text);
}

std::string words(std::size_t n, const std::string& prefix = "w") {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += " ";
        out += prefix + std::to_string(i);
    }
    return out;
}

}  // namespace

TEST_CASE("chunk_transcript window arithmetic") {
    SECTION("10 words, chunk 4, no overlap -> sizes 4,4,2") {
        const auto chunks = chunk_transcript(transcript_of(words(10)), 4, 0);
        REQUIRE(chunks.size() == 3);
        CHECK(chunks[0].end_word - chunks[0].begin_word == 4);
        CHECK(chunks[1].end_word - chunks[1].begin_word == 4);
        CHECK(chunks[2].end_word - chunks[2].begin_word == 2);
        CHECK(chunks[2].chunk_index == 2);
    }
    SECTION("236 words, chunk 200, overlap 50 -> 2 chunks") {
        const auto chunks = chunk_transcript(transcript_of(words(236)), 200, 50);
        REQUIRE(chunks.size() == 2);
        CHECK(chunks[1].begin_word == 150);
        CHECK(chunks[1].end_word == 236);
    }
    SECTION("overlap >= chunk rejected") {
        CHECK_THROWS_AS(chunk_transcript(transcript_of("a b c"), 4, 4), Error);
        CHECK_THROWS_AS(chunk_transcript(transcript_of("a b c"), 4, 5), Error);
    }
    SECTION("short transcript -> single chunk") {
        const auto chunks = chunk_transcript(transcript_of(words(5)), 200, 50);
        REQUIRE(chunks.size() == 1);
        CHECK(chunks[0].text == words(5));
    }
    SECTION("chunks reconstruct the word sequence") {
        const auto text = words(57);
        const auto reference = split_words(text);
        for (const std::size_t overlap : {std::size_t(0), std::size_t(3)}) {
            const auto chunks = chunk_transcript(transcript_of(text), 10, overlap);
            std::vector<std::string> rebuilt;
            for (const auto& c : chunks) {
                const auto w = split_words(c.text);
                CHECK(w.size() == c.end_word - c.begin_word);
                const std::size_t from = rebuilt.size() - std::min(rebuilt.size(), overlap);
                // overlapping prefix must agree with what is already there
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const std::size_t pos = c.begin_word + i;
                    if (pos < rebuilt.size())
                        CHECK(rebuilt[pos] == w[i]);
                    else
                        rebuilt.push_back(w[i]);
                }
                (void)from;
            }
            CHECK(rebuilt == reference);
        }
    }
}

TEST_CASE("retrieval index") {
    llm::MockBackend backend;
    SECTION("single chunk index") {
        auto index = build_index(chunk_transcript(transcript_of("hello world"), 4, 0), backend);
        CHECK(index.size() == 1);
    }
    SECTION("identical chunks embed identically") {
        auto index = build_index({{"t", 0, "same text", 0, 2}, {"t", 1, "same text", 2, 4}},
                                 backend);
        CHECK(index.vectors[0].values == index.vectors[1].values);
    }
    SECTION("querying with a chunk's own text returns that chunk first") {
        const std::string text =
            "the garden keeps me busy in spring . "
            "my medication doses are never missed at all . "
            "we travel by train to the coast every summer season";
        auto index = build_index(chunk_transcript(transcript_of(text), 8, 0), backend);
        for (const auto& chunk : index.chunks) {
            const auto hits = retrieve(index, backend, chunk.text, 1);
            REQUIRE(hits.size() == 1);
            CHECK(index.chunks[hits[0].chunk_pos].chunk_index == chunk.chunk_index);
        }
    }
    SECTION("k larger than index returns everything ranked") {
        auto index = build_index(chunk_transcript(transcript_of(words(20)), 5, 0), backend);
        const auto hits = retrieve(index, backend, "w0 w1", 100);
        CHECK(hits.size() == index.size());
        for (std::size_t i = 1; i < hits.size(); ++i)
            CHECK(hits[i - 1].score >= hits[i].score);
    }
    SECTION("planted keyword chunk ranks first") {
        const std::string text = words(30, "filler") +
                                 " my medication pills and doses follow a strict schedule " +
                                 words(30, "padding");
        auto index = build_index(chunk_transcript(transcript_of(text), 12, 0), backend);
        const auto hits = retrieve(index, backend, "medication pills doses", 3);
        REQUIRE_FALSE(hits.empty());
        CHECK(index.chunks[hits[0].chunk_pos].text.find("medication") != std::string::npos);
    }
    SECTION("score ties break by ascending chunk index") {
        // query shares nothing with either chunk: all scores equal (zero)
        auto index = build_index({{"t", 1, "alpha beta", 0, 2}, {"t", 0, "gamma delta", 2, 4}},
                                 backend);
        const auto hits = retrieve(index, backend, "unrelated query terms", 2);
        REQUIRE(hits.size() == 2);
        CHECK(index.chunks[hits[0].chunk_pos].chunk_index <
              index.chunks[hits[1].chunk_pos].chunk_index);
    }
    SECTION("empty index yields empty result") {
        RetrievalIndex index;
        CHECK(retrieve(index, backend, "q", 3).empty());
    }
    SECTION("ranking unaffected by duplicated unrelated chunks below rank k") {
        const std::string needle = "my medication pills and doses follow a strict schedule";
        std::vector<Chunk> chunks = {{"t", 0, needle, 0, 9}, {"t", 1, words(9, "x"), 9, 18}};
        auto index = build_index(chunks, backend);
        const auto before = retrieve(index, backend, "medication pills doses", 1);
        for (std::size_t i = 2; i < 6; ++i)
            chunks.push_back({"t", i, words(9, "x"), 9 * i, 9 * i + 9});
        auto bigger = build_index(chunks, backend);
        const auto after = retrieve(bigger, backend, "medication pills doses", 1);
        REQUIRE(before.size() == 1);
        REQUIRE(after.size() == 1);
        CHECK(index.chunks[before[0].chunk_pos].text == bigger.chunks[after[0].chunk_pos].text);
    }
}

TEST_CASE("default rubrics mirror the taxonomy") {
    const auto rubrics = default_rubrics();
    REQUIRE(rubrics.size() == 15);
    std::set<std::string> labels;
    for (const auto& r : rubrics) {
        labels.insert(r.label());
        CHECK(r.scale_text.find("1: ") != std::string::npos);
        CHECK(r.scale_text.find("5: ") != std::string::npos);
        CHECK(r.scale_text.find("-1: Not mentioned or irrelevant in the interview.") !=
              std::string::npos);
        CHECK_FALSE(r.keywords.empty());
    }
    CHECK(labels.size() == 15);
    CHECK(labels.count("Socioeconomic Status - Income Level") == 1);
    CHECK(labels.count("Information on Diabetes Management - Medication Adherence") == 1);
    CHECK(topic_keywords("Diet") == "Diet Type, Food Preferences, Dietary Restrictions");
}

TEST_CASE("extraction against the synthetic corpus and mock backend") {
    synth::SyntheticConfig config;
    config.n_patients = 8;
    config.seed = 21;
    const auto sc = synth::generate_synthetic_corpus(config);
    llm::MockBackend backend(sc);
    ExtractionConfig extraction;

    SECTION("ratings are diagonal against planted levels at zero noise") {
        const auto result = run_extraction(sc.records, default_rubrics(), backend, extraction);
        REQUIRE(result.ratings.size() == 8 * 15);
        for (std::size_t p = 0; p < sc.records.size(); ++p) {
            for (std::size_t s = 0; s < kSubtopicCount; ++s) {
                const auto& r = result.ratings[p * 15 + s];
                INFO(r.patient_id << " " << r.topic << " - " << r.subtopic);
                CHECK_FALSE(r.failed);
                CHECK(r.rating == sc.levels[p][s]);
                CHECK(r.rating == ((sc.levels[p][s] == -1) ? -1 : sc.levels[p][s]));
            }
        }
    }
    SECTION("present ratings carry verified quotes") {
        const auto result = run_extraction(sc.records, default_rubrics(), backend, extraction);
        for (const auto& r : result.ratings) {
            if (!r.present()) continue;
            REQUIRE_FALSE(r.quote_checks.empty());
            for (const auto& q : r.quote_checks) {
                INFO(r.patient_id << " " << r.subtopic << " quote: " << q.quote);
                CHECK(q.verified);
            }
        }
    }
    SECTION("factor summaries reflect planted topics") {
        const auto result = run_extraction(sc.records, default_rubrics(), backend, extraction);
        const auto topics = topic_names();
        for (std::size_t p = 0; p < sc.records.size(); ++p) {
            for (std::size_t t = 0; t < topics.size(); ++t) {
                const auto& s = result.summaries[p * topics.size() + t];
                CHECK_FALSE(s.failed);
                const auto subs = subtopic_indices_for_topic(topics[t]);
                bool any_planted = false;
                for (const auto idx : subs)
                    if (sc.levels[p][idx] > 0) any_planted = true;
                if (!any_planted) {
                    CHECK(s.none);
                } else {
                    CHECK_FALSE(s.none);
                    CHECK_FALSE(s.bullets.empty());
                    CHECK(s.bullets.size() <= 5);
                    for (const auto& b : s.bullets) {
                        bool keyword_known = false;
                        for (const auto idx : subs)
                            if (std::string(subtopics()[idx].subtopic) == b.keyword)
                                keyword_known = true;
                        CHECK(keyword_known);
                    }
                }
            }
        }
    }
    SECTION("parallel extraction matches serial exactly") {
        const auto serial = run_extraction(sc.records, default_rubrics(), backend, extraction);
        auto par = extraction;
        par.parallel = 4;
        const auto parallel = run_extraction(sc.records, default_rubrics(), backend, par);
        REQUIRE(serial.ratings.size() == parallel.ratings.size());
        for (std::size_t i = 0; i < serial.ratings.size(); ++i) {
            CHECK(serial.ratings[i].rating == parallel.ratings[i].rating);
            CHECK(serial.ratings[i].justification == parallel.ratings[i].justification);
        }
    }
    SECTION("rating noise perturbs some ratings deterministically") {
        llm::MockBackend noisy(sc, {.quote_fabrication_rate = 0, .rating_noise_rate = 0.5,
                                    .a1c_noise_sd = 0.4, .seed = 3});
        const auto a = run_extraction(sc.records, default_rubrics(), noisy, extraction);
        const auto b = run_extraction(sc.records, default_rubrics(), noisy, extraction);
        std::size_t deviations = 0;
        for (std::size_t p = 0; p < sc.records.size(); ++p)
            for (std::size_t s = 0; s < kSubtopicCount; ++s) {
                const auto& r = a.ratings[p * 15 + s];
                CHECK(r.rating == b.ratings[p * 15 + s].rating);
                if (sc.levels[p][s] > 0 && r.rating != sc.levels[p][s]) ++deviations;
            }
        CHECK(deviations > 0);
    }
}

TEST_CASE("rate_subtopic degrades to -1 on parse failure") {
    synth::SyntheticConfig config;
    config.n_patients = 2;
    config.seed = 4;
    const auto sc = synth::generate_synthetic_corpus(config);
    llm::MockBackend backend(sc);

    // poison one specific rating prompt with an unparseable fixture
    const auto rubrics = default_rubrics();
    const auto& rubric = rubrics[0];
    auto index = build_index(chunk_transcript(sc.records[0].transcript, 200, 50), backend);
    std::string query = rubric.label();
    for (const auto& kw : rubric.keywords) query += " " + kw;
    const auto hits = retrieve(index, backend, query, 6);
    const auto prompt = llm::render_prompt(llm::prompt_template(llm::PromptName::SubtopicRating),
                                           {{"subtopic_label", rubric.label()},
                                            {"scale_text", rubric.scale_text},
                                            {"subtopic_text", join_excerpts(index, hits)}});
    backend.add_fixture(prompt, "Rating: 9\nJustification: out of range");

    const auto record = rate_subtopic(sc.records[0], rubric, index, backend, 6);
    CHECK(record.failed);
    CHECK(record.rating == -1);
    CHECK_FALSE(record.error_note.empty());
}

TEST_CASE("coverage statistics") {
    SECTION("all -1 -> zero percent everywhere") {
        std::vector<RatingRecord> grid;
        for (int p = 0; p < 4; ++p)
            for (std::size_t s = 0; s < kSubtopicCount; ++s) {
                RatingRecord r;
                r.patient_id = "p" + std::to_string(p);
                r.topic = std::string(subtopics()[s].topic);
                r.subtopic = std::string(subtopics()[s].subtopic);
                r.rating = -1;
                grid.push_back(r);
            }
        const auto stats = coverage_stats(grid);
        REQUIRE(stats.per_subtopic.size() == 15);
        for (const auto& c : stats.per_subtopic) CHECK(c.pct() == 0.0);
        CHECK(stats.missing_fraction() == Catch::Approx(1.0));
    }
    SECTION("59 of 65 present -> 90.8%") {
        std::vector<RatingRecord> grid;
        for (int p = 0; p < 65; ++p) {
            RatingRecord r;
            r.patient_id = "p" + std::to_string(p);
            r.topic = "Diet";
            r.subtopic = "Diet Type";
            r.rating = p < 59 ? 3 : -1;
            grid.push_back(r);
        }
        const auto stats = coverage_stats(grid);
        REQUIRE(stats.per_subtopic.size() == 1);
        CHECK(format_fixed(stats.per_subtopic[0].pct(), 1) == "90.8");
    }
    SECTION("failed records count as missing") {
        std::vector<RatingRecord> grid(2);
        grid[0].topic = grid[1].topic = "Diet";
        grid[0].subtopic = grid[1].subtopic = "Diet Type";
        grid[0].rating = 4;
        grid[1].rating = 4;
        grid[1].failed = true;
        const auto stats = coverage_stats(grid);
        CHECK(stats.per_subtopic[0].present == 1);
        CHECK(stats.missing_cells == 1);
    }
    SECTION("empty grid is an error") { CHECK_THROWS_AS(coverage_stats({}), Error); }
}

TEST_CASE("ratings grid CSV round-trip") {
    std::vector<RatingRecord> grid(2);
    grid[0] = {"p1", "Diet", "Diet Type", 4, false, "", "j", {}, {}};
    grid[1] = {"p2", "Diet", "Diet Type", -1, false, "", "", {}, {}};
    const auto csv = ratings_grid_csv(grid);
    const auto parsed = parse_ratings_grid_csv(csv);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].patient_id == "p1");
    CHECK(parsed[0].rating == 4);
    CHECK(parsed[1].rating == -1);
}
