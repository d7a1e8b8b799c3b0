#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "sdohkit/rng.hpp"
#include "sdohkit/thematic.hpp"
#include "support/oracles.hpp"

using namespace sdohkit;
using namespace sdohkit::thematic;

namespace {

std::vector<std::vector<double>> random_vectors(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<std::vector<double>> vs(n, std::vector<double>(dim));
    for (auto& v : vs) {
        double norm = 0;
        while (norm < 1e-6) {
            norm = 0;
            for (auto& x : v) {
                x = rng.uniform(-1.0, 1.0);
                norm += x * x;
            }
        }
    }
    return vs;
}

std::vector<std::vector<std::size_t>> partition_of(const std::vector<CodeCluster>& clusters) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& c : clusters) out.push_back(c.member_indices);
    return out;
}

}  // namespace

TEST_CASE("cosine similarity") {
    const std::vector<double> v = {1, 2, 3};
    CHECK(cosine_similarity(v, v) == Catch::Approx(1.0));
    CHECK(cosine_similarity({1, 0}, {0, 1}) == Catch::Approx(0.0));
    CHECK(cosine_similarity({1, 2, 3}, {4, 5, 6}) ==
          Catch::Approx(32.0 / (std::sqrt(14.0) * std::sqrt(77.0))).margin(1e-4));
    CHECK_THROWS_AS(cosine_similarity({1, 2}, {1, 2, 3}), Error);
    CHECK_THROWS_AS(cosine_similarity({0, 0}, {1, 2}), Error);
}

TEST_CASE("clustering basics") {
    ClusteringConfig config;
    SECTION("identical vectors merge at any positive threshold") {
        config.merge_threshold = 0.01;
        const auto clusters = agglomerative_cluster({{1, 0}, {1, 0}}, config);
        REQUIRE(clusters.size() == 1);
        CHECK(clusters[0].member_indices == std::vector<std::size_t>{0, 1});
        CHECK(clusters[0].cohesion == Catch::Approx(1.0));
    }
    SECTION("orthogonal vectors stay singletons below distance 1") {
        config.merge_threshold = 0.5;
        const auto clusters =
            agglomerative_cluster({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, config);
        CHECK(clusters.size() == 3);
    }
    SECTION("two planted groups") {
        config.merge_threshold = 0.3;
        // group A around (1, 0.05x), group B around (0, 1)
        const std::vector<std::vector<double>> vs = {
            {1.0, 0.05}, {0.0, 1.0}, {1.0, -0.05}, {0.02, 1.0}, {1.0, 0.0}, {-0.03, 1.0}};
        const auto clusters = agglomerative_cluster(vs, config);
        REQUIRE(clusters.size() == 2);
        CHECK(clusters[0].member_indices == std::vector<std::size_t>{0, 2, 4});
        CHECK(clusters[1].member_indices == std::vector<std::size_t>{1, 3, 5});
        // matches the from-scratch oracle
        const auto oracle = oracles::cluster_oracle(vs, config.linkage, config.merge_threshold);
        CHECK(partition_of(clusters) == oracle);
    }
    SECTION("dimension mismatch rejected") {
        CHECK_THROWS_AS(agglomerative_cluster({{1, 0}, {1, 0, 0}}, config), Error);
    }
    SECTION("threshold outside (0,2) rejected") {
        config.merge_threshold = 2.5;
        CHECK_THROWS_AS(agglomerative_cluster({{1.0, 0.0}}, config), Error);
    }
}

TEST_CASE("clustering matches the exhaustive oracle on random instances") {
    Rng rng(404);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t n = 2 + rng.index(7);  // up to 8
        const auto vs = random_vectors(rng, n, 3);
        ClusteringConfig config;
        config.linkage = trial % 2 == 0 ? Linkage::Average : Linkage::Complete;
        config.merge_threshold = rng.uniform(0.05, 1.2);
        const auto got = partition_of(agglomerative_cluster(vs, config));
        const auto want = oracles::cluster_oracle(vs, config.linkage, config.merge_threshold);
        INFO("trial " << trial << " n=" << n << " threshold=" << config.merge_threshold);
        CHECK(got == want);
    }
}

TEST_CASE("clustering properties") {
    Rng rng(505);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + rng.index(9);
        const auto vs = random_vectors(rng, n, 4);
        ClusteringConfig config;
        config.merge_threshold = rng.uniform(0.05, 1.5);

        const auto clusters = agglomerative_cluster(vs, config);

        SECTION("partition: every index exactly once (trial " + std::to_string(trial) + ")") {
            std::set<std::size_t> seen;
            std::size_t total = 0;
            for (const auto& c : clusters) {
                for (const auto i : c.member_indices) seen.insert(i);
                total += c.member_indices.size();
                CHECK(std::find(c.member_indices.begin(), c.member_indices.end(),
                                c.representative_index) != c.member_indices.end());
            }
            CHECK(total == n);
            CHECK(seen.size() == n);
        }

        // raising the threshold never increases the cluster count
        auto higher = config;
        higher.merge_threshold = std::min(1.99, config.merge_threshold + rng.uniform(0.0, 0.4));
        const auto clusters_higher = agglomerative_cluster(vs, higher);
        CHECK(clusters_higher.size() <= clusters.size());

        // permuting the input yields the same partition up to relabeling
        auto perm = rng.permutation(n);
        std::vector<std::vector<double>> shuffled(n);
        for (std::size_t i = 0; i < n; ++i) shuffled[perm[i]] = vs[i];
        const auto clusters_perm = agglomerative_cluster(shuffled, config);
        auto canonical = [](std::vector<std::vector<std::size_t>> p) {
            for (auto& c : p) std::sort(c.begin(), c.end());
            std::sort(p.begin(), p.end());
            return p;
        };
        std::vector<std::vector<std::size_t>> remapped;
        for (const auto& c : clusters) {
            std::vector<std::size_t> m;
            for (const auto i : c.member_indices) m.push_back(perm[i]);
            remapped.push_back(m);
        }
        CHECK(canonical(remapped) == canonical(partition_of(clusters_perm)));
    }
}

TEST_CASE("medoid representative") {
    SECTION("singleton") {
        CHECK(representative_code({3}, {{1, 0}, {1, 0}, {1, 0}, {0, 1}}) == 3);
    }
    SECTION("duplicate pair beats the outlier, smallest index wins") {
        const std::vector<std::vector<double>> vs = {{1, 0}, {1, 0}, {0.6, 0.8}};
        CHECK(representative_code({0, 1, 2}, vs) == 0);
    }
    SECTION("matches brute-force mean-similarity argmax") {
        Rng rng(77);
        const auto vs = random_vectors(rng, 5, 3);
        const std::vector<std::size_t> members = {0, 1, 2, 3, 4};
        double best = -2;
        std::size_t want = 0;
        for (const auto i : members) {
            double mean = 0;
            for (const auto j : members)
                if (i != j) mean += cosine_similarity(vs[i], vs[j]);
            mean /= 4.0;
            if (mean > best + 1e-15) {
                best = mean;
                want = i;
            }
        }
        CHECK(representative_code(members, vs) == want);
    }
}

TEST_CASE("consolidate") {
    const std::vector<std::string> codes = {"diet habits", "diet quality", "family help",
                                            "family support", "income worries"};
    const std::vector<std::vector<double>> vs = {
        {1, 0, 0}, {0.99, 0.1, 0}, {0, 1, 0}, {0, 0.99, 0.1}, {0, 0, 1}};
    ClusteringConfig config;
    config.merge_threshold = 0.2;
    const auto clusters = agglomerative_cluster(vs, config);
    REQUIRE(clusters.size() == 3);

    SECTION("named by medoid when no overrides") {
        const auto factors = consolidate(clusters, codes);
        REQUIRE(factors.size() == 3);
        // two 2-clusters first (by size), then the singleton
        CHECK(factors[0].cluster_size == 2);
        CHECK(factors[1].cluster_size == 2);
        CHECK(factors[2].name == "income worries");
    }
    SECTION("override renames its cluster") {
        const auto factors = consolidate(clusters, codes, {{0, "Diet"}});
        bool found = false;
        for (const auto& f : factors)
            if (f.cluster_index == 0) {
                CHECK(f.name == "Diet");
                found = true;
            }
        CHECK(found);
    }
    SECTION("dangling override is a config error") {
        CHECK_THROWS_AS(consolidate(clusters, codes, {{9, "X"}}), Error);
    }
    SECTION("cluster report renders") {
        const auto csv = cluster_report_csv(clusters, codes);
        CHECK(csv.find("cluster_id,size,representative_code,member_codes") == 0);
        CHECK(csv.find("diet habits;diet quality") != std::string::npos);
    }
    SECTION("overrides file round-trip") {
        const auto parsed = parse_overrides_csv("cluster_id,factor_name\n0,Diet\n2,Income\n");
        REQUIRE(parsed.size() == 2);
        CHECK(parsed.at(0) == "Diet");
        CHECK(parsed.at(2) == "Income");
    }
}
