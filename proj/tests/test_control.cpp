#include <catch2/catch_amalgamated.hpp>

#include "sdohkit/control.hpp"
#include "sdohkit/mock_backend.hpp"
#include "sdohkit/synth.hpp"
#include "support/fixtures.hpp"

using namespace sdohkit;
using namespace sdohkit::control;
using corpus::ControlLevel;

namespace {

std::string redaction_prompt_for(const corpus::PatientRecord& r) {
    return llm::render_prompt(llm::prompt_template(llm::PromptName::A1cRedaction),
                              {{"interview_text", r.transcript.text}});
}

std::string prediction_prompt_for(const std::string& redacted) {
    return llm::render_prompt(llm::prompt_template(llm::PromptName::A1cPrediction),
                              {{"interview_text", redacted}});
}

}  // namespace

TEST_CASE("redact_and_predict paths") {
    synth::SyntheticConfig config;
    config.n_patients = 4;
    config.seed = 44;
    const auto sc = synth::generate_synthetic_corpus(config);
    llm::MockBackend mock(sc);
    const auto& patient = sc.records[0];

    SECTION("fixed prediction 6.5 categorizes Medium") {
        const std::string redacted =
            mock.chat(redaction_prompt_for(patient)).response_text;
        mock.add_fixture(prediction_prompt_for(redacted),
                         "A1C Level: 6.5\nJustification: steady management");
        const auto p = redact_and_predict(patient, mock, "test");
        REQUIRE(p.predicted.value.has_value());
        CHECK(*p.predicted.value == Catch::Approx(6.5));
        REQUIRE(p.predicted_level.has_value());
        CHECK(*p.predicted_level == ControlLevel::Medium);
        CHECK(p.true_level == corpus::categorize_control(patient.a1c));
    }
    SECTION("redaction residue is a hard error and the patient is excluded") {
        mock.add_fixture(redaction_prompt_for(patient),
                         "they told me my A1C was 8.1 that afternoon");
        CHECK_THROWS_AS(redact_and_predict(patient, mock, "test"), Error);

        const auto predictions = run_control(sc.records, mock, "test");
        REQUIRE(predictions.size() == 4);
        CHECK(predictions[0].redaction_failed);
        CHECK_FALSE(predictions[0].responded());
        for (std::size_t i = 1; i < 4; ++i) CHECK_FALSE(predictions[i].redaction_failed);
        const auto table = evaluate_accuracy(predictions);
        CHECK(table.non_response >= 1);
        CHECK(table.overall_total + table.non_response == 4);
    }
    SECTION("unparseable prediction counts as non-response") {
        const std::string redacted =
            mock.chat(redaction_prompt_for(patient)).response_text;
        mock.add_fixture(prediction_prompt_for(redacted),
                         "I would rather not commit to a number.");
        const auto p = redact_and_predict(patient, mock, "test");
        CHECK_FALSE(p.predicted.value.has_value());
        CHECK_FALSE(p.predicted_level.has_value());
        CHECK_FALSE(p.responded());
    }
    SECTION("mock predictions carry verifiable quotes from the redacted text") {
        const auto p = redact_and_predict(patient, mock, "test");
        REQUIRE(p.responded());
        REQUIRE_FALSE(p.quote_checks.empty());
        for (const auto& q : p.quote_checks) CHECK(q.verified);
    }
}

TEST_CASE("evaluate_accuracy reproduces the published tables") {
    const auto fixtures = fixtures::accuracy_fixtures();

    SECTION("overall accuracies") {
        const std::vector<std::string> expected = {"60.0", "53.8", "50.8", "50.8"};
        for (std::size_t i = 0; i < fixtures.size(); ++i) {
            const auto table = evaluate_accuracy(fixtures::make_predictions(fixtures[i]));
            INFO(fixtures[i].label);
            CHECK(format_fixed(table.overall_pct(), 1) == expected[i]);
        }
    }
    SECTION("first model: 39/65 overall from 0/11, 34/43, 5/11") {
        const auto table = evaluate_accuracy(fixtures::make_predictions(fixtures[0]));
        CHECK(table.per_class[0].correct == 0);
        CHECK(table.per_class[0].total == 11);
        CHECK(table.per_class[1].correct == 34);
        CHECK(table.per_class[1].total == 43);
        CHECK(table.per_class[2].correct == 5);
        CHECK(table.per_class[2].total == 11);
        CHECK(table.overall_correct == 39);
        CHECK(table.overall_total == 65);
        CHECK(table.non_response == 0);
    }
    SECTION("third model: non-responses excluded from denominators (31/61)") {
        const auto table = evaluate_accuracy(fixtures::make_predictions(fixtures[2]));
        CHECK(table.per_class[0].total == 10);
        CHECK(table.per_class[1].total == 40);
        CHECK(table.per_class[2].total == 11);
        CHECK(table.overall_correct == 31);
        CHECK(table.overall_total == 61);
        CHECK(table.non_response == 4);
        CHECK(table.overall_total + table.non_response == table.corpus_size);
    }
    SECTION("per-class totals sum to the overall total") {
        for (const auto& fx : fixtures) {
            const auto table = evaluate_accuracy(fixtures::make_predictions(fx));
            std::size_t correct = 0, total = 0;
            for (const auto& cell : table.per_class) {
                correct += cell.correct;
                total += cell.total;
            }
            CHECK(correct == table.overall_correct);
            CHECK(total == table.overall_total);
        }
    }
    SECTION("all predictions correct gives 100% everywhere") {
        std::vector<ControlPrediction> predictions;
        for (const double a1c : {5.0, 6.5, 9.0, 5.5, 7.0}) {
            ControlPrediction p;
            p.patient_id = "x";
            p.model_label = "perfect";
            p.true_a1c = a1c;
            p.true_level = corpus::categorize_control(a1c);
            p.predicted.value = a1c;
            p.predicted_level = p.true_level;
            predictions.push_back(p);
        }
        const auto table = evaluate_accuracy(predictions);
        CHECK(table.overall_pct() == Catch::Approx(100.0));
        for (const auto& cell : table.per_class)
            if (cell.total > 0) CHECK(cell.pct() == Catch::Approx(100.0));
    }
    SECTION("zero responded is undefined") {
        std::vector<ControlPrediction> predictions(2);
        predictions[0].true_a1c = predictions[1].true_a1c = 6.5;
        CHECK_THROWS_AS(evaluate_accuracy(predictions), Error);
        CHECK_THROWS_AS(evaluate_accuracy({}), Error);
    }
}

TEST_CASE("confusion matrix") {
    const auto fixtures = fixtures::accuracy_fixtures();

    SECTION("first model's low row: everything predicted medium") {
        const auto m = confusion_matrix(fixtures::make_predictions(fixtures[0]));
        CHECK(m.counts[0][0] == 0);
        CHECK(m.counts[0][1] == 11);
        CHECK(m.counts[0][2] == 0);
    }
    SECTION("marginals agree with the accuracy table") {
        for (const auto& fx : fixtures) {
            const auto predictions = fixtures::make_predictions(fx);
            const auto m = confusion_matrix(predictions);
            const auto table = evaluate_accuracy(predictions);
            for (std::size_t t = 0; t < 3; ++t) {
                std::size_t row_sum = 0;
                for (std::size_t p = 0; p < 3; ++p) row_sum += m.counts[t][p];
                CHECK(row_sum == table.per_class[t].total);
                CHECK(m.counts[t][t] == table.per_class[t].correct);
            }
        }
    }
    SECTION("diagonal matrix means 100% overall") {
        std::vector<ControlPrediction> predictions;
        for (const double a1c : {5.0, 6.5, 9.0}) {
            ControlPrediction p;
            p.true_a1c = a1c;
            p.true_level = corpus::categorize_control(a1c);
            p.predicted.value = a1c;
            p.predicted_level = p.true_level;
            p.model_label = "d";
            predictions.push_back(p);
        }
        const auto m = confusion_matrix(predictions);
        std::size_t off_diagonal = 0;
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t p = 0; p < 3; ++p)
                if (t != p) off_diagonal += m.counts[t][p];
        CHECK(off_diagonal == 0);
        CHECK(evaluate_accuracy(predictions).overall_pct() == Catch::Approx(100.0));
    }
}

TEST_CASE("prediction log JSONL round-trip") {
    const auto fixtures = fixtures::accuracy_fixtures();
    const auto predictions = fixtures::make_predictions(fixtures[2]);
    const auto jsonl = prediction_log_jsonl(predictions);
    const auto back = parse_prediction_log_jsonl(jsonl);
    REQUIRE(back.size() == predictions.size());

    const auto a = evaluate_accuracy(predictions);
    const auto b = evaluate_accuracy(back);
    CHECK(a.overall_correct == b.overall_correct);
    CHECK(a.overall_total == b.overall_total);
    CHECK(a.non_response == b.non_response);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(a.per_class[t].correct == b.per_class[t].correct);
        CHECK(a.per_class[t].total == b.per_class[t].total);
    }
}

TEST_CASE("evaluation is idempotent") {
    const auto predictions =
        fixtures::make_predictions(fixtures::accuracy_fixtures()[0]);
    const auto a = evaluate_accuracy(predictions);
    const auto b = evaluate_accuracy(predictions);
    CHECK(a.overall_correct == b.overall_correct);
    CHECK(a.per_class[1].total == b.per_class[1].total);
}
