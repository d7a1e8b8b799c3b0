#pragma once

#include <array>
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

namespace sdohkit::control {

struct ControlPrediction {
    std::string patient_id;
    std::string model_label;
    double true_a1c = 0.0;
    corpus::ControlLevel true_level = corpus::ControlLevel::Medium;
    llm::PredictedA1C predicted;  // absent value = non-response
    std::optional<corpus::ControlLevel> predicted_level;
    std::vector<llm::QuoteCheck> quote_checks;  // against the redacted text
    bool redaction_failed = false;
    std::string error_note;

    bool responded() const { return !redaction_failed && predicted.value.has_value(); }
};

// Redact (Prompt 4), verify the redaction deterministically, then predict
// (Prompt 5) from the redacted text only. A residual A1C pattern is a hard
// error: the unredacted transcript must never reach the prediction prompt.
inline ControlPrediction redact_and_predict(const corpus::PatientRecord& patient,
                                            llm::Backend& backend,
                                            const std::string& model_label) {
    ControlPrediction out;
    out.patient_id = patient.patient_id;
    out.model_label = model_label;
    out.true_a1c = patient.a1c;
    out.true_level = corpus::categorize_control(patient.a1c);

    const auto redact_prompt =
        llm::render_prompt(llm::prompt_template(llm::PromptName::A1cRedaction),
                           {{"interview_text", patient.transcript.text}});
    const std::string redacted = backend.chat(redact_prompt).response_text;

    const auto report = corpus::verify_redaction(redacted);
    if (!report.clean)
        throw Error(ErrorKind::Redaction,
                    patient.patient_id + ": " + std::to_string(report.residuals.size()) +
                        " residual A1C value(s) after redaction");

    try {
        const auto predict_prompt =
            llm::render_prompt(llm::prompt_template(llm::PromptName::A1cPrediction),
                               {{"interview_text", redacted}});
        out.predicted = llm::parse_a1c_prediction(backend.chat(predict_prompt).response_text);
    } catch (const Error& e) {
        out.error_note = e.what();  // backend failure degrades to a non-response
        out.predicted = {};
    }
    if (out.predicted.value)
        out.predicted_level = corpus::categorize_control(*out.predicted.value);
    out.quote_checks = llm::verify_quotes(out.predicted.quotes, redacted);
    return out;
}

// Per-patient redaction+prediction over a corpus; redaction errors skip the
// patient (recorded on the result) instead of aborting the run.
inline std::vector<ControlPrediction> run_control(
    const std::vector<corpus::PatientRecord>& records, llm::Backend& backend,
    const std::string& model_label, int parallel = 1) {
    std::vector<ControlPrediction> out(records.size());
    parallel_for(records.size(), parallel, [&](std::size_t i) {
        try {
            out[i] = redact_and_predict(records[i], backend, model_label);
        } catch (const Error& e) {
            out[i].patient_id = records[i].patient_id;
            out[i].model_label = model_label;
            out[i].true_a1c = records[i].a1c;
            out[i].true_level = corpus::categorize_control(records[i].a1c);
            out[i].redaction_failed = true;
            out[i].error_note = e.what();
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Accuracy accounting (non-responses excluded from denominators)
// ---------------------------------------------------------------------------

struct ClassCell {
    std::size_t correct = 0;
    std::size_t total = 0;

    double pct() const {
        return total == 0 ? 0.0
                          : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    }
};

struct AccuracyTable {
    std::string model_label;
    std::array<ClassCell, 3> per_class;  // indexed by ControlLevel
    std::size_t overall_correct = 0;
    std::size_t overall_total = 0;
    std::size_t non_response = 0;
    std::size_t corpus_size = 0;

    double overall_pct() const {
        return overall_total == 0 ? 0.0
                                  : 100.0 * static_cast<double>(overall_correct) /
                                        static_cast<double>(overall_total);
    }
};

inline AccuracyTable evaluate_accuracy(const std::vector<ControlPrediction>& predictions) {
    if (predictions.empty()) throw Error(ErrorKind::EmptyInput, "no predictions");
    AccuracyTable table;
    table.model_label = predictions.front().model_label;
    table.corpus_size = predictions.size();
    for (const auto& p : predictions) {
        if (!p.responded()) {
            ++table.non_response;
            continue;
        }
        auto& cell = table.per_class[static_cast<std::size_t>(p.true_level)];
        ++cell.total;
        ++table.overall_total;
        if (*p.predicted_level == p.true_level) {
            ++cell.correct;
            ++table.overall_correct;
        }
    }
    if (table.overall_total == 0)
        throw Error(ErrorKind::UndefinedStat, "no responded predictions to score");
    return table;
}

struct ConfusionMatrix {
    // rows = true level, columns = predicted level
    std::array<std::array<std::size_t, 3>, 3> counts{};
    std::array<std::size_t, 3> non_response_by_true{};
};

inline ConfusionMatrix confusion_matrix(const std::vector<ControlPrediction>& predictions) {
    ConfusionMatrix m;
    for (const auto& p : predictions) {
        const auto t = static_cast<std::size_t>(p.true_level);
        if (!p.responded()) {
            ++m.non_response_by_true[t];
            continue;
        }
        ++m.counts[t][static_cast<std::size_t>(*p.predicted_level)];
    }
    return m;
}

// ---------------------------------------------------------------------------
// Artifact formats
// ---------------------------------------------------------------------------

inline const char* kAccuracyCsvHeader =
    "model,low_correct,low_total,medium_correct,medium_total,high_correct,high_total,"
    "overall_correct,overall_total,non_response";

inline std::string accuracy_csv_row(const AccuracyTable& t) {
    return csv_row({t.model_label, std::to_string(t.per_class[0].correct),
                    std::to_string(t.per_class[0].total), std::to_string(t.per_class[1].correct),
                    std::to_string(t.per_class[1].total), std::to_string(t.per_class[2].correct),
                    std::to_string(t.per_class[2].total), std::to_string(t.overall_correct),
                    std::to_string(t.overall_total), std::to_string(t.non_response)});
}

inline std::string prediction_log_jsonl(const std::vector<ControlPrediction>& predictions) {
    std::string out;
    for (const auto& p : predictions) {
        nlohmann::json quotes = nlohmann::json::array();
        for (const auto& q : p.quote_checks)
            quotes.push_back({{"quote", q.quote}, {"verified", q.verified}});
        nlohmann::json j = {{"patient_id", p.patient_id},
                            {"model", p.model_label},
                            {"true_a1c", p.true_a1c},
                            {"justification", p.predicted.justification},
                            {"quotes", quotes},
                            {"redaction_failed", p.redaction_failed},
                            {"error_note", p.error_note}};
        if (p.predicted.value)
            j["predicted_a1c"] = *p.predicted.value;
        else
            j["predicted_a1c"] = nullptr;
        out += j.dump() + "\n";
    }
    return out;
}

inline std::vector<ControlPrediction> parse_prediction_log_jsonl(const std::string& text) {
    std::vector<ControlPrediction> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (trim(line).empty()) continue;
        const auto j = nlohmann::json::parse(line);
        ControlPrediction p;
        p.patient_id = j.at("patient_id").get<std::string>();
        p.model_label = j.at("model").get<std::string>();
        p.true_a1c = j.at("true_a1c").get<double>();
        p.true_level = corpus::categorize_control(p.true_a1c);
        if (j.contains("redaction_failed")) p.redaction_failed = j.at("redaction_failed").get<bool>();
        if (!j.at("predicted_a1c").is_null()) {
            p.predicted.value = j.at("predicted_a1c").get<double>();
            p.predicted_level = corpus::categorize_control(*p.predicted.value);
        }
        if (j.contains("justification"))
            p.predicted.justification = j.at("justification").get<std::string>();
        if (j.contains("quotes")) {
            for (const auto& q : j.at("quotes")) {
                llm::QuoteCheck check;
                check.quote = q.at("quote").get<std::string>();
                check.verified = q.at("verified").get<bool>();
                p.quote_checks.push_back(std::move(check));
                p.predicted.quotes.push_back(p.quote_checks.back().quote);
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace sdohkit::control
