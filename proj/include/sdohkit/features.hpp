#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sdohkit/corpus.hpp"
#include "sdohkit/csv.hpp"
#include "sdohkit/error.hpp"
#include "sdohkit/rag.hpp"
#include "sdohkit/rng.hpp"
#include "sdohkit/taxonomy.hpp"

namespace sdohkit::features {

// ---------------------------------------------------------------------------
// Matrix with explicit missingness
// ---------------------------------------------------------------------------

struct FeatureMatrix {
    std::vector<std::string> column_names;
    std::vector<std::string> patient_ids;
    std::vector<std::vector<std::optional<double>>> rows;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return column_names.size(); }

    std::size_t missing_count() const {
        std::size_t n = 0;
        for (const auto& row : rows)
            for (const auto& cell : row)
                if (!cell) ++n;
        return n;
    }

    bool complete() const { return missing_count() == 0; }
};

enum class FeatureSetKind { Sdoh, Labs, Combined };

inline FeatureSetKind feature_set_from_string(const std::string& s) {
    if (s == "sdoh") return FeatureSetKind::Sdoh;
    if (s == "labs") return FeatureSetKind::Labs;
    if (s == "combined") return FeatureSetKind::Combined;
    throw Error(ErrorKind::Config, "unknown feature set: " + s);
}

inline const char* feature_set_name(FeatureSetKind k) {
    switch (k) {
        case FeatureSetKind::Sdoh: return "sdoh";
        case FeatureSetKind::Labs: return "labs";
        case FeatureSetKind::Combined: return "combined";
    }
    return "?";
}

struct Assembled {
    FeatureMatrix X;
    std::vector<double> y;  // most recent A1C per patient
};

// SDOH -> 15 rating columns (-1 and failed extractions become missing);
// Labs -> 5 columns; Combined -> all 20. Row order follows `records`.
inline Assembled assemble(const std::vector<rag::RatingRecord>& grid,
                          const std::vector<corpus::PatientRecord>& records,
                          FeatureSetKind kind) {
    if (records.empty()) throw Error(ErrorKind::EmptyInput, "no patients");

    const bool want_sdoh = kind != FeatureSetKind::Labs;
    const bool want_labs = kind != FeatureSetKind::Sdoh;

    std::map<std::string, std::map<std::string, int>> by_patient;  // id -> label -> rating
    if (want_sdoh) {
        std::set<std::string> known;
        for (const auto& r : records) known.insert(r.patient_id);
        std::vector<std::string> strays;
        for (const auto& r : grid) {
            if (known.count(r.patient_id) == 0) {
                strays.push_back(r.patient_id);
                continue;
            }
            by_patient[r.patient_id][r.topic + " - " + r.subtopic] =
                r.failed ? -1 : r.rating;
        }
        std::vector<std::string> missing_ids;
        for (const auto& r : records)
            if (by_patient.find(r.patient_id) == by_patient.end())
                missing_ids.push_back(r.patient_id);
        if (!strays.empty() || !missing_ids.empty()) {
            std::string msg = "patient ids do not align;";
            for (const auto& id : strays) msg += " unknown:" + id;
            for (const auto& id : missing_ids) msg += " unrated:" + id;
            throw Error(ErrorKind::Alignment, msg);
        }
    }

    Assembled out;
    if (want_sdoh)
        for (std::size_t s = 0; s < kSubtopicCount; ++s)
            out.X.column_names.push_back(feature_name(s));
    if (want_labs)
        for (const auto& name : corpus::LabPanel::column_names())
            out.X.column_names.push_back(name);

    for (const auto& r : records) {
        std::vector<std::optional<double>> row;
        if (want_sdoh) {
            const auto& ratings = by_patient[r.patient_id];
            for (std::size_t s = 0; s < kSubtopicCount; ++s) {
                const auto it = ratings.find(feature_name(s));
                const int rating = it == ratings.end() ? -1 : it->second;
                row.push_back(rating >= 1 ? std::optional<double>(rating) : std::nullopt);
            }
        }
        if (want_labs)
            for (std::size_t j = 0; j < 5; ++j) row.push_back(r.labs.value(j));
        out.X.rows.push_back(std::move(row));
        out.X.patient_ids.push_back(r.patient_id);
        out.y.push_back(r.a1c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// KNN imputation
// ---------------------------------------------------------------------------

struct ImputerConfig {
    std::size_t k = 5;
};

// Missing-aware squared distance: sum over co-observed coordinates, scaled by
// (total columns / co-observed count). No co-observed coordinates -> +inf.
inline double missing_aware_sq_distance(const std::vector<std::optional<double>>& a,
                                        const std::vector<std::optional<double>>& b) {
    double sum = 0;
    std::size_t shared = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] && b[j]) {
            const double d = *a[j] - *b[j];
            sum += d * d;
            ++shared;
        }
    }
    if (shared == 0) return std::numeric_limits<double>::infinity();
    return sum * static_cast<double>(a.size()) / static_cast<double>(shared);
}

// Each missing cell becomes the mean of its column over the k nearest rows
// that observe that column (distance ties resolve by row index). Observed
// cells never change. Degenerate fallbacks: fewer than k finite-distance
// donors -> use those available; none -> column mean.
inline FeatureMatrix knn_impute(const FeatureMatrix& matrix, const ImputerConfig& config) {
    const std::size_t n = matrix.n_rows();
    const std::size_t p = matrix.n_cols();
    if (n == 0) throw Error(ErrorKind::EmptyInput, "empty matrix");
    if (config.k < 1 || config.k >= n)
        throw Error(ErrorKind::Config, "imputer k must satisfy 1 <= k < n_rows");

    for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        for (const auto& cell : matrix.rows[i])
            if (cell) any = true;
        if (!any)
            throw Error(ErrorKind::Input,
                        "row " + matrix.patient_ids.at(i) + " has no observed values");
    }
    std::vector<double> column_mean(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        double sum = 0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (matrix.rows[i][j]) {
                sum += *matrix.rows[i][j];
                ++count;
            }
        }
        if (count == 0)
            throw Error(ErrorKind::Imputation,
                        "column has no observed values: " + matrix.column_names[j]);
        column_mean[j] = sum / static_cast<double>(count);
    }

    FeatureMatrix out = matrix;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            if (matrix.rows[i][j]) continue;

            std::vector<std::pair<double, std::size_t>> donors;  // (distance, row)
            for (std::size_t r = 0; r < n; ++r) {
                if (r == i || !matrix.rows[r][j]) continue;
                const double d = missing_aware_sq_distance(matrix.rows[i], matrix.rows[r]);
                if (std::isfinite(d)) donors.emplace_back(d, r);
            }
            std::sort(donors.begin(), donors.end());
            double value;
            if (donors.empty()) {
                value = column_mean[j];
            } else {
                const std::size_t take = std::min(config.k, donors.size());
                double sum = 0;
                for (std::size_t t = 0; t < take; ++t) sum += *matrix.rows[donors[t].second][j];
                value = sum / static_cast<double>(take);
            }
            out.rows[i][j] = value;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Min-max scaling
// ---------------------------------------------------------------------------

struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;
};

inline ScalerParams fit_minmax(const FeatureMatrix& matrix,
                               const std::vector<std::size_t>& row_indices) {
    if (row_indices.empty()) throw Error(ErrorKind::EmptyInput, "no rows to fit scaler");
    const std::size_t p = matrix.n_cols();
    ScalerParams params;
    params.min.assign(p, std::numeric_limits<double>::infinity());
    params.max.assign(p, -std::numeric_limits<double>::infinity());
    for (const std::size_t i : row_indices) {
        for (std::size_t j = 0; j < p; ++j) {
            if (!matrix.rows.at(i)[j])
                throw Error(ErrorKind::Input, "scaler requires complete data");
            params.min[j] = std::min(params.min[j], *matrix.rows[i][j]);
            params.max[j] = std::max(params.max[j], *matrix.rows[i][j]);
        }
    }
    return params;
}

// x' = (x - min) / (max - min), clamped to [0, 1]; constant columns map to 0.
inline FeatureMatrix apply_minmax(const ScalerParams& params, const FeatureMatrix& matrix) {
    FeatureMatrix out = matrix;
    for (auto& row : out.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (!row[j]) throw Error(ErrorKind::Input, "scaler requires complete data");
            const double range = params.max[j] - params.min[j];
            double v = range > 0 ? (*row[j] - params.min[j]) / range : 0.0;
            v = std::min(1.0, std::max(0.0, v));
            row[j] = v;
        }
    }
    return out;
}

inline FeatureMatrix inverse_minmax(const ScalerParams& params, const FeatureMatrix& matrix) {
    FeatureMatrix out = matrix;
    for (auto& row : out.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double range = params.max[j] - params.min[j];
            row[j] = range > 0 ? params.min[j] + *row[j] * range : params.min[j];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

struct SplitSpec {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded uniform permutation; the first ceil((1 - test_fraction) * n) rows
// train, the rest test.
inline SplitIndices train_test_split(std::size_t n_rows, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw Error(ErrorKind::Config, "test_fraction must lie in (0, 1)");
    if (n_rows < 5) throw Error(ErrorKind::Input, "need at least 5 rows to split");
    Rng rng = substream(spec.seed, "split");
    const auto perm = rng.permutation(n_rows);
    const std::size_t n_train = static_cast<std::size_t>(
        std::ceil((1.0 - spec.test_fraction) * static_cast<double>(n_rows)));
    SplitIndices out;
    out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return out;
}

inline FeatureMatrix take_rows(const FeatureMatrix& matrix,
                               const std::vector<std::size_t>& indices) {
    FeatureMatrix out;
    out.column_names = matrix.column_names;
    for (const std::size_t i : indices) {
        out.rows.push_back(matrix.rows.at(i));
        out.patient_ids.push_back(matrix.patient_ids.at(i));
    }
    return out;
}

inline std::vector<double> take_values(const std::vector<double>& v,
                                       const std::vector<std::size_t>& indices) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (const std::size_t i : indices) out.push_back(v.at(i));
    return out;
}

// ---------------------------------------------------------------------------
// CSV export/import (empty cell = missing)
// ---------------------------------------------------------------------------

inline std::string feature_matrix_csv(const FeatureMatrix& matrix,
                                      const std::vector<double>* y = nullptr) {
    std::vector<std::string> header = {"patient_id"};
    header.insert(header.end(), matrix.column_names.begin(), matrix.column_names.end());
    if (y != nullptr) header.push_back("a1c");
    std::string out = csv_row(header);
    for (std::size_t i = 0; i < matrix.n_rows(); ++i) {
        std::vector<std::string> row = {matrix.patient_ids[i]};
        for (const auto& cell : matrix.rows[i])
            row.push_back(cell ? format_fixed(*cell, 6) : "");
        if (y != nullptr) row.push_back(format_fixed(y->at(i), 2));
        out += csv_row(row);
    }
    return out;
}

inline std::pair<FeatureMatrix, std::vector<double>> parse_feature_matrix_csv(
    const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "patient_id")
        throw Error(ErrorKind::Input, "unexpected feature matrix header");
    const bool has_y = rows[0].back() == "a1c";
    FeatureMatrix matrix;
    std::vector<double> y;
    const std::size_t p = rows[0].size() - 1 - (has_y ? 1 : 0);
    for (std::size_t j = 0; j < p; ++j) matrix.column_names.push_back(rows[0][j + 1]);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw Error(ErrorKind::Input, "ragged feature matrix row " + std::to_string(i));
        matrix.patient_ids.push_back(rows[i][0]);
        std::vector<std::optional<double>> row;
        for (std::size_t j = 0; j < p; ++j) {
            const std::string cell = trim(rows[i][j + 1]);
            row.push_back(cell.empty() ? std::optional<double>()
                                       : std::optional<double>(std::stod(cell)));
        }
        matrix.rows.push_back(std::move(row));
        if (has_y) y.push_back(std::stod(rows[i].back()));
    }
    return {std::move(matrix), std::move(y)};
}

}  // namespace sdohkit::features
