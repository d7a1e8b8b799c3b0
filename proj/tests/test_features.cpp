#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "sdohkit/features.hpp"
#include "sdohkit/rng.hpp"
#include "support/oracles.hpp"

using namespace sdohkit;
using namespace sdohkit::features;

namespace {

FeatureMatrix matrix_of(std::vector<std::vector<std::optional<double>>> rows) {
    FeatureMatrix m;
    m.rows = std::move(rows);
    const std::size_t p = m.rows.empty() ? 0 : m.rows[0].size();
    for (std::size_t j = 0; j < p; ++j) m.column_names.push_back("c" + std::to_string(j));
    for (std::size_t i = 0; i < m.rows.size(); ++i)
        m.patient_ids.push_back("p" + std::to_string(i));
    return m;
}

std::vector<rag::RatingRecord> full_grid(const std::vector<corpus::PatientRecord>& records,
                                         int rating) {
    std::vector<rag::RatingRecord> grid;
    for (const auto& r : records) {
        for (std::size_t s = 0; s < kSubtopicCount; ++s) {
            rag::RatingRecord rec;
            rec.patient_id = r.patient_id;
            rec.topic = std::string(subtopics()[s].topic);
            rec.subtopic = std::string(subtopics()[s].subtopic);
            rec.rating = rating;
            grid.push_back(rec);
        }
    }
    return grid;
}

corpus::PatientRecord patient(const std::string& id, double a1c, bool with_labs) {
    corpus::LabPanel labs;
    if (with_labs)
        for (std::size_t j = 0; j < 5; ++j) labs.set(j, 10.0 + static_cast<double>(j));
    return corpus::PatientRecord::make(id, corpus::Transcript::make(id, "text here"), labs, a1c);
}

}  // namespace

TEST_CASE("assemble feature sets") {
    std::vector<corpus::PatientRecord> records = {patient("a", 6.0, true),
                                                  patient("b", 7.0, true)};
    auto grid = full_grid(records, 3);

    SECTION("combined has 20 named columns") {
        const auto out = assemble(grid, records, FeatureSetKind::Combined);
        CHECK(out.X.n_cols() == 20);
        CHECK(out.X.column_names[0] == "Socioeconomic Status - Income Level");
        CHECK(out.X.column_names[15] == "Triglycerides");
        CHECK(out.y == std::vector<double>{6.0, 7.0});
    }
    SECTION("-1 ratings become missing cells, never -1") {
        grid[0].rating = -1;
        const auto out = assemble(grid, records, FeatureSetKind::Sdoh);
        CHECK_FALSE(out.X.rows[0][0].has_value());
        for (const auto& row : out.X.rows)
            for (const auto& cell : row)
                if (cell) CHECK(*cell != -1.0);
        CHECK(out.X.missing_count() == 1);
    }
    SECTION("failed extraction is missing too") {
        grid[1].failed = true;
        const auto out = assemble(grid, records, FeatureSetKind::Sdoh);
        CHECK(out.X.missing_count() == 1);
    }
    SECTION("labs-only with complete labs has zero missing") {
        const auto out = assemble(grid, records, FeatureSetKind::Labs);
        CHECK(out.X.n_cols() == 5);
        CHECK(out.X.missing_count() == 0);
    }
    SECTION("id mismatch lists offenders") {
        grid[0].patient_id = "stranger";
        try {
            assemble(grid, records, FeatureSetKind::Sdoh);
            FAIL("expected alignment error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Alignment);
            CHECK(std::string(e.what()).find("stranger") != std::string::npos);
        }
    }
}

TEST_CASE("knn imputation") {
    SECTION("complete matrix is untouched") {
        const auto m = matrix_of({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
        const auto out = knn_impute(m, {2});
        for (std::size_t i = 0; i < m.n_rows(); ++i) CHECK(out.rows[i] == m.rows[i]);
    }
    SECTION("k=1 copies the exact duplicate's value") {
        const auto m = matrix_of({{1.0, std::nullopt}, {1.0, 7.5}, {100.0, 2.0}});
        const auto out = knn_impute(m, {1});
        CHECK(*out.rows[0][1] == 7.5);
    }
    SECTION("matches the brute-force oracle exactly on random instances") {
        Rng rng(909);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = 4 + rng.index(7);   // up to 10
            const std::size_t p = 2 + rng.index(5);   // up to 6
            std::vector<std::vector<std::optional<double>>> rows(
                n, std::vector<std::optional<double>>(p));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < p; ++j)
                    rows[i][j] = rng.uniform(-5.0, 5.0);
            // knock out up to 30%, keeping every row and column populated
            const std::size_t holes = rng.index(n * p * 3 / 10 + 1);
            for (std::size_t h = 0; h < holes; ++h) {
                const std::size_t i = rng.index(n), j = rng.index(p);
                std::size_t row_obs = 0, col_obs = 0;
                for (std::size_t c = 0; c < p; ++c)
                    if (rows[i][c]) ++row_obs;
                for (std::size_t r = 0; r < n; ++r)
                    if (rows[r][j]) ++col_obs;
                if (row_obs > 1 && col_obs > 1) rows[i][j] = std::nullopt;
            }
            const auto m = matrix_of(rows);
            const std::size_t k = 1 + rng.index(n - 1);
            const auto got = knn_impute(m, {k});
            const auto want = oracles::knn_impute_oracle(m, k);
            INFO("trial " << trial << " n=" << n << " p=" << p << " k=" << k);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    REQUIRE(got.rows[i][j].has_value());
                    CHECK(*got.rows[i][j] == *want.rows[i][j]);  // exact
                    if (m.rows[i][j]) CHECK(*got.rows[i][j] == *m.rows[i][j]);
                }
        }
    }
    SECTION("all-missing column is an imputation error naming the column") {
        auto m = matrix_of({{1.0, std::nullopt}, {2.0, std::nullopt}});
        try {
            knn_impute(m, {1});
            FAIL("expected imputation error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Imputation);
            CHECK(std::string(e.what()).find("c1") != std::string::npos);
        }
    }
    SECTION("k bounds validated") {
        const auto m = matrix_of({{1.0}, {2.0}});
        CHECK_THROWS_AS(knn_impute(m, {0}), Error);
        CHECK_THROWS_AS(knn_impute(m, {2}), Error);
    }
}

TEST_CASE("min-max scaling") {
    SECTION("basic column scaling") {
        const auto m = matrix_of({{2.0}, {4.0}, {6.0}});
        const auto params = fit_minmax(m, {0, 1, 2});
        const auto out = apply_minmax(params, m);
        CHECK(*out.rows[0][0] == 0.0);
        CHECK(*out.rows[1][0] == 0.5);
        CHECK(*out.rows[2][0] == 1.0);
    }
    SECTION("constant column maps to zero") {
        const auto m = matrix_of({{3.0}, {3.0}, {3.0}});
        const auto out = apply_minmax(fit_minmax(m, {0, 1, 2}), m);
        for (const auto& row : out.rows) CHECK(*row[0] == 0.0);
    }
    SECTION("test rows clamp into [0, 1]") {
        const auto train = matrix_of({{0.0}, {10.0}});
        const auto params = fit_minmax(train, {0, 1});
        const auto out = apply_minmax(params, matrix_of({{-5.0}, {15.0}}));
        CHECK(*out.rows[0][0] == 0.0);
        CHECK(*out.rows[1][0] == 1.0);
    }
    SECTION("train rows land exactly in [0,1] and invert to 1e-12") {
        Rng rng(55);
        std::vector<std::vector<std::optional<double>>> rows(
            8, std::vector<std::optional<double>>(3));
        for (auto& row : rows)
            for (auto& cell : row) cell = rng.uniform(-20.0, 20.0);
        const auto m = matrix_of(rows);
        std::vector<std::size_t> all = {0, 1, 2, 3, 4, 5, 6, 7};
        const auto params = fit_minmax(m, all);
        const auto scaled = apply_minmax(params, m);
        for (const auto& row : scaled.rows)
            for (const auto& cell : row) {
                CHECK(*cell >= 0.0);
                CHECK(*cell <= 1.0);
            }
        const auto back = inverse_minmax(params, scaled);
        for (std::size_t i = 0; i < m.n_rows(); ++i)
            for (std::size_t j = 0; j < m.n_cols(); ++j)
                CHECK(*back.rows[i][j] == Catch::Approx(*m.rows[i][j]).margin(1e-12));
    }
}

TEST_CASE("train/test split") {
    SECTION("n=65 gives 52 train, 13 test") {
        const auto split = train_test_split(65, {0.2, 1});
        CHECK(split.train.size() == 52);
        CHECK(split.test.size() == 13);
    }
    SECTION("deterministic per seed, different across seeds") {
        const auto a = train_test_split(40, {0.2, 7});
        const auto b = train_test_split(40, {0.2, 7});
        const auto c = train_test_split(40, {0.2, 8});
        CHECK(a.train == b.train);
        CHECK(a.test == b.test);
        CHECK(a.train != c.train);
    }
    SECTION("split partitions the row indices") {
        const auto split = train_test_split(37, {0.2, 3});
        std::set<std::size_t> seen(split.train.begin(), split.train.end());
        seen.insert(split.test.begin(), split.test.end());
        CHECK(seen.size() == 37);
        CHECK(split.train.size() + split.test.size() == 37);
    }
    SECTION("too few rows rejected") {
        CHECK_THROWS_AS(train_test_split(4, {0.2, 1}), Error);
    }
}

TEST_CASE("feature matrix CSV round-trip preserves missingness") {
    auto m = matrix_of({{1.5, std::nullopt}, {std::nullopt, 2.25}});
    std::vector<double> y = {6.1, 7.2};
    const auto csv = feature_matrix_csv(m, &y);
    const auto [back, y_back] = parse_feature_matrix_csv(csv);
    REQUIRE(back.n_rows() == 2);
    CHECK_FALSE(back.rows[0][1].has_value());
    CHECK_FALSE(back.rows[1][0].has_value());
    CHECK(*back.rows[0][0] == Catch::Approx(1.5));
    CHECK(*back.rows[1][1] == Catch::Approx(2.25));
    CHECK(y_back[0] == Catch::Approx(6.1));
    CHECK(back.column_names == m.column_names);
}
