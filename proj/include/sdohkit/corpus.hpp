#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdohkit/csv.hpp"
#include "sdohkit/error.hpp"
#include "sdohkit/io.hpp"
#include "sdohkit/text.hpp"

namespace sdohkit::corpus {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Transcript {
    std::string patient_id;
    std::string text;
    std::size_t words = 0;

    static Transcript make(std::string patient_id, std::string text) {
        if (trim(text).empty())
            throw Error(ErrorKind::Input, "empty transcript for " + patient_id);
        Transcript t;
        t.patient_id = std::move(patient_id);
        t.words = word_count(text);
        t.text = std::move(text);
        return t;
    }
};

struct LabPanel {
    std::optional<double> triglycerides;
    std::optional<double> hdl;
    std::optional<double> ldl;
    std::optional<double> glucose;
    std::optional<double> creatinine;

    static const std::vector<std::string>& column_names() {
        static const std::vector<std::string> names = {
            "Triglycerides", "HDL", "LDL", "Glucose", "Creatinine"};
        return names;
    }

    std::optional<double> value(std::size_t i) const {
        switch (i) {
            case 0: return triglycerides;
            case 1: return hdl;
            case 2: return ldl;
            case 3: return glucose;
            case 4: return creatinine;
            default: throw Error(ErrorKind::Input, "lab index out of range");
        }
    }

    void set(std::size_t i, std::optional<double> v) {
        if (v && !(*v > 0.0))
            throw Error(ErrorKind::InvalidValue,
                        "lab value must be strictly positive: " + column_names()[i]);
        switch (i) {
            case 0: triglycerides = v; break;
            case 1: hdl = v; break;
            case 2: ldl = v; break;
            case 3: glucose = v; break;
            case 4: creatinine = v; break;
            default: throw Error(ErrorKind::Input, "lab index out of range");
        }
    }
};

// Plausibility window for A1C percent values; rejects parse garbage while
// admitting the full clinically observed range.
inline constexpr double kA1cMin = 3.0;
inline constexpr double kA1cMax = 20.0;

struct PatientRecord {
    std::string patient_id;
    Transcript transcript;
    LabPanel labs;
    double a1c = 0.0;

    static PatientRecord make(std::string patient_id, Transcript transcript,
                              LabPanel labs, double a1c) {
        if (!std::isfinite(a1c) || a1c < kA1cMin || a1c > kA1cMax)
            throw Error(ErrorKind::InvalidValue,
                        "a1c outside plausibility window [3.0, 20.0]: " +
                            format_fixed(a1c, 2));
        PatientRecord r;
        r.patient_id = std::move(patient_id);
        r.transcript = std::move(transcript);
        r.labs = labs;
        r.a1c = a1c;
        return r;
    }
};

enum class ControlLevel { Low = 0, Medium = 1, High = 2 };

inline const char* control_level_name(ControlLevel l) {
    switch (l) {
        case ControlLevel::Low: return "Low";
        case ControlLevel::Medium: return "Medium";
        case ControlLevel::High: return "High";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Low: a1c < 6.0; Medium: 6.0 <= a1c <= 7.5 (both boundaries inclusive);
// High: a1c > 7.5.
inline ControlLevel categorize_control(double a1c) {
    if (!std::isfinite(a1c))
        throw Error(ErrorKind::InvalidValue, "a1c must be finite");
    if (a1c < 6.0) return ControlLevel::Low;
    if (a1c <= 7.5) return ControlLevel::Medium;
    return ControlLevel::High;
}

struct ResidualSpan {
    std::size_t begin = 0;  // character offsets into the scanned text
    std::size_t end = 0;
    std::string token;
};

struct RedactionReport {
    bool clean = true;
    std::vector<ResidualSpan> residuals;
};

// Deterministic scanner layered on top of LLM redaction: flags any number in
// the A1C plausibility window that sits within 8 tokens of an A1C-context
// mention. Never trusts the model to have scrubbed everything.
inline RedactionReport verify_redaction(std::string_view text) {
    RedactionReport report;
    const auto tokens = tokenize_with_offsets(text);

    std::vector<std::size_t> context_positions;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string low = to_lower_ascii(tokens[i].text);
        if (low.find("a1c") != std::string::npos ||
            low.find("hemoglobin") != std::string::npos)
            context_positions.push_back(i);
    }
    if (context_positions.empty()) return report;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto value = extract_number(tokens[i].text);
        if (!value || *value < kA1cMin || *value > kA1cMax) continue;
        const bool near_context = std::any_of(
            context_positions.begin(), context_positions.end(), [&](std::size_t j) {
                return (i > j ? i - j : j - i) <= 8;
            });
        if (near_context)
            report.residuals.push_back({tokens[i].begin, tokens[i].end, tokens[i].text});
    }
    report.clean = report.residuals.empty();
    return report;
}

struct Summary {
    double mean = 0, median = 0, sd = 0, min = 0, max = 0;
};

struct CorpusStats {
    std::size_t n = 0;
    Summary a1c;
    Summary words;
    std::map<ControlLevel, std::size_t> level_counts;

    double level_pct(ControlLevel l) const {
        const auto it = level_counts.find(l);
        const std::size_t c = it == level_counts.end() ? 0 : it->second;
        return 100.0 * static_cast<double>(c) / static_cast<double>(n);
    }
};

namespace detail {
inline Summary summarize(std::vector<double> v) {
    Summary s;
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    s.min = v.front();
    s.max = v.back();
    s.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    double sum = 0;
    for (const double x : v) sum += x;
    s.mean = sum / static_cast<double>(n);
    double ss = 0;
    for (const double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(n));
    return s;
}
}  // namespace detail

inline CorpusStats corpus_stats(const std::vector<PatientRecord>& records) {
    if (records.empty()) throw Error(ErrorKind::EmptyInput, "corpus is empty");
    CorpusStats stats;
    stats.n = records.size();
    std::vector<double> a1c, words;
    a1c.reserve(records.size());
    words.reserve(records.size());
    for (const auto& r : records) {
        a1c.push_back(r.a1c);
        words.push_back(static_cast<double>(r.transcript.words));
        stats.level_counts[categorize_control(r.a1c)]++;
    }
    stats.a1c = detail::summarize(std::move(a1c));
    stats.words = detail::summarize(std::move(words));
    return stats;
}

// ---------------------------------------------------------------------------
// Corpus directory layout:
//   <dir>/patients.csv  header: patient_id,a1c,triglycerides,hdl,ldl,glucose,creatinine
//   <dir>/transcripts/<patient_id>.txt
// Empty CSV cells mean a missing lab value.
// ---------------------------------------------------------------------------

inline const char* kPatientsCsvHeader =
    "patient_id,a1c,triglycerides,hdl,ldl,glucose,creatinine";

inline std::vector<PatientRecord> load_corpus(const fs::path& dir) {
    const auto rows = parse_csv(read_file(dir / "patients.csv"));
    if (rows.empty()) throw Error(ErrorKind::Input, "patients.csv is empty");
    const std::vector<std::string> expected = {
        "patient_id", "a1c", "triglycerides", "hdl", "ldl", "glucose", "creatinine"};
    if (rows[0] != expected)
        throw Error(ErrorKind::Input, "patients.csv header mismatch");

    std::vector<PatientRecord> out;
    std::vector<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != expected.size())
            throw Error(ErrorKind::Input,
                        "patients.csv row " + std::to_string(i) + " has " +
                            std::to_string(row.size()) + " fields");
        const std::string& id = row[0];
        if (std::find(seen.begin(), seen.end(), id) != seen.end())
            throw Error(ErrorKind::Input, "duplicate patient_id " + id);
        seen.push_back(id);

        LabPanel labs;
        for (std::size_t j = 0; j < 5; ++j) {
            const std::string cell = trim(row[2 + j]);
            if (cell.empty()) continue;
            const auto v = extract_number(cell);
            if (!v) throw Error(ErrorKind::Input, "bad lab value '" + cell + "' for " + id);
            labs.set(j, *v);
        }
        const auto a1c = extract_number(row[1]);
        if (!a1c) throw Error(ErrorKind::Input, "bad a1c for " + id);

        auto transcript = Transcript::make(id, read_file(dir / "transcripts" / (id + ".txt")));
        out.push_back(PatientRecord::make(id, std::move(transcript), labs, *a1c));
    }
    return out;
}

inline void save_corpus(const fs::path& dir, const std::vector<PatientRecord>& records) {
    std::string csv = std::string(kPatientsCsvHeader) + "\n";
    for (const auto& r : records) {
        std::vector<std::string> row = {r.patient_id, format_fixed(r.a1c, 2)};
        for (std::size_t j = 0; j < 5; ++j) {
            const auto v = r.labs.value(j);
            row.push_back(v ? format_fixed(*v, 2) : "");
        }
        csv += csv_row(row);
        write_file(dir / "transcripts" / (r.patient_id + ".txt"), r.transcript.text);
    }
    write_file(dir / "patients.csv", csv);
}

}  // namespace sdohkit::corpus
